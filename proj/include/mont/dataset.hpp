#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mont/errors.hpp"
#include "mont/rng.hpp"

namespace mont {

enum class ColumnRole { numeric, categorical, label, ignore };

// Tabular classification data. Features are stored row-major (N x d).
struct Dataset {
    std::string name;
    std::vector<std::string> feature_names;
    std::vector<double> features;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    // Sorted vocabulary per feature; empty for numeric columns.
    std::vector<std::vector<std::string>> categories;

    std::size_t samples() const noexcept { return labels.size(); }
    std::size_t dims() const noexcept { return feature_names.size(); }
    std::size_t classes() const noexcept { return class_names.size(); }

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * dims(), dims()};
    }
    double at(std::size_t i, std::size_t j) const { return features[i * dims() + j]; }
};

struct NormalizationParams {
    std::vector<double> min;
    std::vector<double> max;

    double apply(std::size_t column, double value) const {
        const double range = max[column] - min[column];
        if (range == 0.0) {
            return 0.5;
        }
        return (value - min[column]) / range;
    }
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// How to read a CSV file. The label column may be given by header name or by
// zero-based index (negative counts from the end); the default is the last
// column. Unlisted columns are numeric features.
struct CsvSchema {
    std::string label = "-1";
    std::vector<std::string> categorical;
    std::vector<std::string> ignored;
    std::optional<bool> header; // auto-detect when unset
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_record(std::string_view line, char delimiter = ',') {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            cells.emplace_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    cells.emplace_back(trim(cell));
    return cells;
}

inline std::vector<std::vector<std::string>> read_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && line.starts_with("\xEF\xBB\xBF")) {
            line.erase(0, 3);
        }
        first = false;
        if (trim(line).empty()) {
            continue;
        }
        records.push_back(split_record(line));
    }
    return records;
}

// Sorted distinct values: numeric order when every value parses as a number,
// lexicographic otherwise.
inline std::vector<std::string> sorted_vocabulary(std::vector<std::string> values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const bool numeric = std::all_of(values.begin(), values.end(),
                                     [](const std::string& v) { return parse_number(v).has_value(); });
    if (numeric) {
        std::stable_sort(values.begin(), values.end(), [](const std::string& a, const std::string& b) {
            return *parse_number(a) < *parse_number(b);
        });
    }
    return values;
}

inline int code_of(const std::vector<std::string>& vocabulary, const std::string& value) {
    const auto it = std::find(vocabulary.begin(), vocabulary.end(), value);
    return it == vocabulary.end() ? -1 : static_cast<int>(it - vocabulary.begin());
}

} // namespace detail

// Builds a dataset from parsed records and an explicit role per column.
inline Dataset make_dataset(std::string name, const std::vector<std::vector<std::string>>& rows,
                            const std::vector<ColumnRole>& roles,
                            std::vector<std::string> column_names = {}) {
    if (rows.empty()) {
        throw DataError("dataset '" + name + "' is empty");
    }
    const std::size_t columns = roles.size();
    if (std::count(roles.begin(), roles.end(), ColumnRole::label) != 1) {
        throw DataError("schema must mark exactly one label column");
    }
    if (column_names.empty()) {
        for (std::size_t c = 0; c < columns; ++c) {
            column_names.push_back("col" + std::to_string(c));
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != columns) {
            throw DataError("row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                            " columns, expected " + std::to_string(columns));
        }
    }

    Dataset ds;
    ds.name = std::move(name);
    std::vector<std::size_t> feature_columns;
    std::size_t label_column = 0;
    for (std::size_t c = 0; c < columns; ++c) {
        if (roles[c] == ColumnRole::label) {
            label_column = c;
        } else if (roles[c] != ColumnRole::ignore) {
            feature_columns.push_back(c);
            ds.feature_names.push_back(column_names[c]);
        }
    }

    auto column_values = [&](std::size_t c) {
        std::vector<std::string> values;
        values.reserve(rows.size());
        for (const auto& row : rows) {
            values.push_back(row[c]);
        }
        return values;
    };

    for (std::size_t c : feature_columns) {
        if (roles[c] == ColumnRole::categorical) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i][c].empty() || rows[i][c] == "?") {
                    throw DataError("row " + std::to_string(i + 1) + ": missing value in column '" +
                                    column_names[c] + "'");
                }
            }
            ds.categories.push_back(detail::sorted_vocabulary(column_values(c)));
        } else {
            ds.categories.emplace_back();
        }
    }

    ds.class_names = detail::sorted_vocabulary(column_values(label_column));
    if (ds.class_names.size() < 2) {
        throw DataError("label column '" + column_names[label_column] + "' has fewer than two classes");
    }

    const std::size_t d = feature_columns.size();
    ds.features.resize(rows.size() * d);
    ds.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const std::string& cell = rows[i][feature_columns[j]];
            if (!ds.categories[j].empty()) {
                ds.features[i * d + j] = detail::code_of(ds.categories[j], cell);
                continue;
            }
            const auto value = detail::parse_number(cell);
            if (!value) {
                throw DataError("row " + std::to_string(i + 1) + ": cannot parse '" + cell +
                                "' in numeric column '" + ds.feature_names[j] + "'");
            }
            ds.features[i * d + j] = *value;
        }
        if (rows[i][label_column].empty()) {
            throw DataError("row " + std::to_string(i + 1) + ": missing label");
        }
        ds.labels[i] = detail::code_of(ds.class_names, rows[i][label_column]);
    }
    return ds;
}

// Resolves a named/indexed schema against the header (or column count) of a file.
inline std::vector<ColumnRole> resolve_roles(const CsvSchema& schema,
                                             const std::vector<std::string>& column_names) {
    const auto columns = static_cast<long>(column_names.size());
    auto locate = [&](const std::string& key) -> std::size_t {
        const auto it = std::find(column_names.begin(), column_names.end(), key);
        if (it != column_names.end()) {
            return static_cast<std::size_t>(it - column_names.begin());
        }
        long index = 0;
        const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
        if (ec != std::errc{} || ptr != key.data() + key.size()) {
            throw DataError("unknown column '" + key + "'");
        }
        if (index < 0) {
            index += columns;
        }
        if (index < 0 || index >= columns) {
            throw DataError("column index " + key + " out of range");
        }
        return static_cast<std::size_t>(index);
    };

    std::vector<ColumnRole> roles(column_names.size(), ColumnRole::numeric);
    for (const auto& key : schema.categorical) {
        roles[locate(key)] = ColumnRole::categorical;
    }
    for (const auto& key : schema.ignored) {
        roles[locate(key)] = ColumnRole::ignore;
    }
    roles[locate(schema.label)] = ColumnRole::label;
    return roles;
}

// A first row is a header when one of its numeric-role cells does not parse.
inline bool looks_like_header(const std::vector<std::string>& first, const std::vector<ColumnRole>& roles) {
    for (std::size_t c = 0; c < first.size() && c < roles.size(); ++c) {
        if (roles[c] == ColumnRole::numeric && !detail::parse_number(first[c])) {
            return true;
        }
    }
    return false;
}

// True when the schema refers to a first-row cell by a non-numeric name.
inline bool names_a_column(const CsvSchema& schema, const std::vector<std::string>& first) {
    auto named = [&](const std::string& key) {
        return !detail::parse_number(key) && std::find(first.begin(), first.end(), key) != first.end();
    };
    return named(schema.label) || std::any_of(schema.categorical.begin(), schema.categorical.end(), named) ||
           std::any_of(schema.ignored.begin(), schema.ignored.end(), named);
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema, std::string name = {}) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open data file '" + path + "'");
    }
    auto records = detail::read_records(in);
    if (records.empty()) {
        throw DataError("data file '" + path + "' is empty");
    }
    if (name.empty()) {
        name = path.substr(path.find_last_of('/') + 1);
        name = name.substr(0, name.find_last_of('.'));
    }

    std::vector<std::string> positional;
    for (std::size_t c = 0; c < records.front().size(); ++c) {
        positional.push_back("col" + std::to_string(c));
    }

    bool header = false;
    std::vector<ColumnRole> roles;
    if (schema.header.has_value()) {
        header = *schema.header;
        roles = resolve_roles(schema, header ? records.front() : positional);
    } else {
        // names may only resolve against the header, so try it first
        try {
            roles = resolve_roles(schema, records.front());
            header = names_a_column(schema, records.front()) || looks_like_header(records.front(), roles);
        } catch (const DataError&) {
            roles = resolve_roles(schema, positional);
            header = looks_like_header(records.front(), roles);
        }
        if (!header) {
            roles = resolve_roles(schema, positional);
        }
    }

    std::vector<std::string> names = header ? records.front() : positional;
    if (header) {
        records.erase(records.begin());
    }
    if (records.empty()) {
        throw DataError("data file '" + path + "' has no data rows");
    }
    return make_dataset(std::move(name), records, roles, std::move(names));
}

inline Dataset take_rows(const Dataset& ds, std::span<const std::size_t> indices) {
    Dataset out;
    out.name = ds.name;
    out.feature_names = ds.feature_names;
    out.class_names = ds.class_names;
    out.categories = ds.categories;
    out.features.reserve(indices.size() * ds.dims());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto row = ds.row(i);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.labels.push_back(ds.labels[i]);
    }
    return out;
}

inline NormalizationParams fit_normalization(const Dataset& ds, std::span<const std::size_t> train_idx) {
    if (train_idx.empty()) {
        throw DataError("normalization needs at least one training row");
    }
    const std::size_t d = ds.dims();
    NormalizationParams params{std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t j = 0; j < d; ++j) {
        double lo = ds.at(train_idx.front(), j);
        double hi = lo;
        for (std::size_t i : train_idx) {
            lo = std::min(lo, ds.at(i, j));
            hi = std::max(hi, ds.at(i, j));
        }
        params.min[j] = lo;
        params.max[j] = hi;
    }
    return params;
}

inline Dataset apply_normalization(Dataset ds, const NormalizationParams& params) {
    const std::size_t d = ds.dims();
    for (std::size_t i = 0; i < ds.samples(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            ds.features[i * d + j] = params.apply(j, ds.features[i * d + j]);
        }
    }
    return ds;
}

// Min-max scaling with statistics from the training rows only; every row,
// including test rows, goes through the same affine map.
inline std::pair<Dataset, NormalizationParams> normalize(const Dataset& ds,
                                                        std::span<const std::size_t> train_idx) {
    auto params = fit_normalization(ds, train_idx);
    return {apply_normalization(ds, params), std::move(params)};
}

inline Split split(const Dataset& ds, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie in (0, 1)");
    }
    RngStream rng(spec.seed, 0x5b1d);
    Split out;
    auto take = [&](std::vector<std::size_t> pool) {
        rng.shuffle(pool);
        auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(pool.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, pool.size() - 1);
        out.train.insert(out.train.end(), pool.begin(), pool.begin() + static_cast<long>(n_train));
        out.test.insert(out.test.end(), pool.begin() + static_cast<long>(n_train), pool.end());
    };

    if (spec.stratified) {
        std::vector<std::vector<std::size_t>> by_class(ds.classes());
        for (std::size_t i = 0; i < ds.samples(); ++i) {
            by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
        }
        for (std::size_t k = 0; k < by_class.size(); ++k) {
            if (by_class[k].size() < 2) {
                throw DataError("class '" + ds.class_names[k] + "' has fewer than 2 samples; cannot stratify");
            }
            take(std::move(by_class[k]));
        }
    } else {
        if (ds.samples() < 2) {
            throw DataError("need at least 2 samples to split");
        }
        std::vector<std::size_t> all(ds.samples());
        for (std::size_t i = 0; i < all.size(); ++i) {
            all[i] = i;
        }
        take(std::move(all));
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

struct DatasetManifestEntry {
    std::string_view index;
    std::string_view name;
    std::size_t features;
    std::size_t samples;
    std::size_t classes;
};

// The benchmark suite's published dimensions.
inline constexpr DatasetManifestEntry dataset_manifest[] = {
    {"aus", "Australia", 14, 691, 2},  {"hrt", "Heart", 13, 270, 2},  {"ion", "Ionosphere", 33, 351, 2},
    {"pma", "Pima", 8, 768, 2},        {"wis", "Wisconsin", 30, 569, 2}, {"irs", "Iris", 4, 150, 3},
    {"win", "Wine", 13, 178, 3},       {"vhl", "Vehicle", 18, 846, 4}, {"gls", "Glass", 9, 214, 7},
};

inline const DatasetManifestEntry* find_manifest(std::string_view index) {
    for (const auto& entry : dataset_manifest) {
        if (entry.index == index) {
            return &entry;
        }
    }
    return nullptr;
}

// Throws when the dataset's dimensions differ from the manifest row.
inline void check_manifest(const Dataset& ds, std::string_view index) {
    const auto* entry = find_manifest(index);
    if (entry == nullptr) {
        throw DataError("no manifest entry for dataset '" + std::string(index) + "'");
    }
    if (ds.dims() != entry->features || ds.samples() != entry->samples || ds.classes() != entry->classes) {
        std::ostringstream msg;
        msg << "dataset '" << index << "' has d=" << ds.dims() << ", N=" << ds.samples()
            << ", r=" << ds.classes() << "; manifest expects d=" << entry->features
            << ", N=" << entry->samples << ", r=" << entry->classes;
        throw DataError(msg.str());
    }
}

} // namespace mont
