#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "mont/dataset.hpp"
#include "mont/errors.hpp"
#include "mont/hypervolume.hpp"
#include "mont/metrics.hpp"
#include "mont/moea.hpp"
#include "mont/serialize.hpp"

namespace mont {

namespace fs = std::filesystem;

struct DatasetSource {
    std::string name; // manifest index when strict, e.g. "irs"
    std::string path;
    CsvSchema schema;
    bool strict_manifest = false;
};

struct ExperimentPlan {
    std::vector<DatasetSource> datasets;
    std::vector<Optimizer> optimizers{Optimizer::gp, Optimizer::nsga2, Optimizer::nsga3};
    std::vector<Activation> activations{Activation::gaussian};
    std::size_t runs = 30;
    std::uint64_t base_seed = 0;
    EvolutionConfig evolution; // optimizer, activation and seed are set per cell
    HvReference hv_ref{1.0, 100.0};
    double train_fraction = 0.8;
    bool stratified = true;
    bool resample_split = true; // fresh split per run; otherwise one split for all runs
    double selection_offset = 0.1;
    Optimizer baseline = Optimizer::nsga3;
    bool welch = true;

    std::uint64_t run_seed(std::size_t run) const { return base_seed + run; }

    void check() const {
        if (datasets.empty() || optimizers.empty() || activations.empty()) {
            throw ConfigError("plan needs at least one dataset, optimizer and activation");
        }
        if (runs < 1) {
            throw ConfigError("plan needs at least one run");
        }
        evolution.check();
    }
};

// ---- plan (de)serialization -------------------------------------------------

inline nlohmann::json variation_to_json(const VariationConfig& v) {
    return {{"max_arity", v.max_arity},       {"max_height", v.max_height}, {"crossover_prob", v.crossover_prob},
            {"mutation_prob", v.mutation_prob}, {"leaf_prob", v.leaf_prob},   {"weight_min", v.weight_min},
            {"weight_max", v.weight_max},     {"param_sigma", v.param_sigma}, {"max_retries", v.max_retries}};
}

inline void variation_from_json(const nlohmann::json& j, VariationConfig& v) {
    v.max_arity = j.value("max_arity", v.max_arity);
    v.max_height = j.value("max_height", v.max_height);
    v.crossover_prob = j.value("crossover_prob", v.crossover_prob);
    v.mutation_prob = j.value("mutation_prob", v.mutation_prob);
    v.leaf_prob = j.value("leaf_prob", v.leaf_prob);
    v.weight_min = j.value("weight_min", v.weight_min);
    v.weight_max = j.value("weight_max", v.weight_max);
    v.param_sigma = j.value("param_sigma", v.param_sigma);
    v.max_retries = j.value("max_retries", v.max_retries);
}

inline nlohmann::json evolution_to_json(const EvolutionConfig& e) {
    return {{"population_size", e.population_size},
            {"generations", e.generations},
            {"optimizer", std::string(to_string(e.optimizer))},
            {"activation", std::string(to_string(e.activation))},
            {"divisions", e.divisions},
            {"seed", e.seed},
            {"variation", variation_to_json(e.variation)}};
}

inline void evolution_from_json(const nlohmann::json& j, EvolutionConfig& e) {
    e.population_size = j.value("population_size", e.population_size);
    e.generations = j.value("generations", e.generations);
    e.divisions = j.value("divisions", e.divisions);
    e.seed = j.value("seed", e.seed);
    if (j.contains("optimizer")) {
        const auto o = parse_optimizer(j["optimizer"].get<std::string>());
        if (!o) throw ConfigError("unknown optimizer '" + j["optimizer"].get<std::string>() + "'");
        e.optimizer = *o;
    }
    if (j.contains("activation")) {
        const auto a = parse_activation(j["activation"].get<std::string>());
        if (!a) throw ConfigError("unknown activation '" + j["activation"].get<std::string>() + "'");
        e.activation = *a;
    }
    if (j.contains("variation")) {
        variation_from_json(j["variation"], e.variation);
    }
}

inline nlohmann::json plan_to_json(const ExperimentPlan& p) {
    nlohmann::json datasets = nlohmann::json::array();
    for (const auto& d : p.datasets) {
        nlohmann::json dj = {{"name", d.name},
                             {"path", d.path},
                             {"label", d.schema.label},
                             {"categorical", d.schema.categorical},
                             {"ignored", d.schema.ignored},
                             {"strict_manifest", d.strict_manifest}};
        if (d.schema.header) {
            dj["header"] = *d.schema.header;
        }
        datasets.push_back(dj);
    }
    std::vector<std::string> optimizers, activations;
    for (auto o : p.optimizers) optimizers.emplace_back(to_string(o));
    for (auto a : p.activations) activations.emplace_back(to_string(a));
    auto evolution = evolution_to_json(p.evolution);
    evolution.erase("optimizer");
    evolution.erase("activation");
    evolution.erase("seed");
    return {{"datasets", datasets},
            {"optimizers", optimizers},
            {"activations", activations},
            {"runs", p.runs},
            {"base_seed", p.base_seed},
            {"evolution", evolution},
            {"hv_ref", {{"error", p.hv_ref.error}, {"size", p.hv_ref.size}}},
            {"split", {{"train_fraction", p.train_fraction}, {"stratified", p.stratified}, {"resample", p.resample_split}}},
            {"selection_offset", p.selection_offset},
            {"baseline", std::string(to_string(p.baseline))},
            {"ttest", p.welch ? "welch" : "student"}};
}

inline ExperimentPlan plan_from_json(const nlohmann::json& j) {
    try {
        ExperimentPlan p;
        for (const auto& dj : j.at("datasets")) {
            DatasetSource d;
            d.path = dj.at("path").get<std::string>();
            d.name = dj.value("name", fs::path(d.path).stem().string());
            d.schema.label = dj.value("label", d.schema.label);
            d.schema.categorical = dj.value("categorical", std::vector<std::string>{});
            d.schema.ignored = dj.value("ignored", std::vector<std::string>{});
            if (dj.contains("header")) {
                d.schema.header = dj["header"].get<bool>();
            }
            d.strict_manifest = dj.value("strict_manifest", false);
            p.datasets.push_back(std::move(d));
        }
        if (j.contains("optimizers")) {
            p.optimizers.clear();
            for (const auto& o : j["optimizers"]) {
                const auto parsed = parse_optimizer(o.get<std::string>());
                if (!parsed) throw ConfigError("unknown optimizer '" + o.get<std::string>() + "'");
                p.optimizers.push_back(*parsed);
            }
        }
        if (j.contains("activations")) {
            p.activations.clear();
            for (const auto& a : j["activations"]) {
                const auto parsed = parse_activation(a.get<std::string>());
                if (!parsed) throw ConfigError("unknown activation '" + a.get<std::string>() + "'");
                p.activations.push_back(*parsed);
            }
        }
        p.runs = j.value("runs", p.runs);
        p.base_seed = j.value("base_seed", p.base_seed);
        if (j.contains("evolution")) {
            evolution_from_json(j["evolution"], p.evolution);
        }
        if (j.contains("hv_ref")) {
            p.hv_ref.error = j["hv_ref"].value("error", p.hv_ref.error);
            p.hv_ref.size = j["hv_ref"].value("size", p.hv_ref.size);
        }
        if (j.contains("split")) {
            p.train_fraction = j["split"].value("train_fraction", p.train_fraction);
            p.stratified = j["split"].value("stratified", p.stratified);
            p.resample_split = j["split"].value("resample", p.resample_split);
        }
        p.selection_offset = j.value("selection_offset", p.selection_offset);
        if (j.contains("baseline")) {
            const auto b = parse_optimizer(j["baseline"].get<std::string>());
            if (!b) throw ConfigError("unknown baseline optimizer");
            p.baseline = *b;
        }
        const auto ttest = j.value("ttest", std::string("welch"));
        if (ttest != "welch" && ttest != "student") {
            throw ConfigError("ttest must be 'welch' or 'student'");
        }
        p.welch = ttest == "welch";
        p.check();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed plan: ") + e.what());
    }
}

// FNV-1a over the canonical plan JSON, as 16 hex digits.
inline std::string plan_hash(const ExperimentPlan& plan) {
    const std::string text = plan_to_json(plan).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- one run of one cell ------------------------------------------------------

struct CellKey {
    std::size_t dataset = 0; // index into plan.datasets
    Optimizer optimizer = Optimizer::nsga3;
    Activation activation = Activation::gaussian;
    std::size_t run = 0;

    friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellResult {
    RunRecord record;
    EvolutionResult evolution;
    ContributorChoice selection; // on training error
    NeuralTree best;
    ParetoArchive test_front;
};

// Loads a plan dataset and applies the manifest check when strict.
inline Dataset load_source(const DatasetSource& source) {
    auto ds = load_csv(source.path, source.schema, source.name);
    if (source.strict_manifest) {
        check_manifest(ds, source.name);
    }
    return ds;
}

// Split, evolve on the training rows, pick the greatest hypervolume
// contributor of the final population by training error, then score it on
// the test rows. Also records the hypervolume of the final test-error front.
inline CellResult run_cell(const Dataset& raw, const std::string& dataset_name, Optimizer optimizer,
                           Activation activation, std::size_t run, const ExperimentPlan& plan,
                           std::size_t workers = 1) {
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t seed = plan.run_seed(run);
    const auto parts = split(raw, {plan.train_fraction, plan.resample_split ? seed : plan.base_seed, plan.stratified});
    const auto [normalized, params] = normalize(raw, parts.train);
    const auto train = take_rows(normalized, parts.train);
    const auto test = take_rows(normalized, parts.test);

    EvolutionConfig cfg = plan.evolution;
    cfg.optimizer = optimizer;
    cfg.activation = activation;
    cfg.seed = seed;
    cfg.workers = workers;

    CellResult out;
    out.evolution = evolve(train, cfg);
    const auto& pop = out.evolution.population;
    out.selection = greatest_contributor(std::span<const Individual>(pop), plan.selection_offset);
    out.best = pop[out.selection.id].tree;

    std::vector<ObjectiveVector> test_points;
    test_points.reserve(pop.size());
    for (const auto& ind : pop) {
        test_points.push_back({error_rate(ind.tree, test), ind.objectives.size});
    }
    out.test_front = extract_front(test_points);

    auto& r = out.record;
    r.dataset = dataset_name;
    r.optimizer = std::string(to_string(optimizer));
    r.activation = std::string(to_string(activation));
    r.seed = seed;
    r.run = run;
    r.best_tree_id = out.selection.id;
    r.train_error = pop[out.selection.id].objectives.error;
    r.test_error = test_points[out.selection.id].error;
    r.tree_size = tree_size(out.best);
    r.hv_test = hypervolume_2d(out.test_front, plan.hv_ref);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

// ---- persistence --------------------------------------------------------------

inline std::string trace_csv(const std::vector<GenerationStats>& trace) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "generation,best_f1,mean_f1,best_f2,front0_size\n";
    for (const auto& g : trace) {
        out << g.generation << ',' << g.best_error << ',' << g.mean_error << ',' << g.best_size << ','
            << g.front0_size << '\n';
    }
    return out.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw DataError("cannot write '" + path.string() + "'");
        }
        out << text;
    }
    fs::rename(tmp, path);
}

inline fs::path cell_dir(const fs::path& store, const std::string& dataset, Optimizer o, Activation a,
                         std::size_t run) {
    return store / dataset / (std::string(to_string(o)) + "-" + std::string(to_string(a))) /
           ("run" + std::to_string(run));
}

// Writes the run artifacts; record.json goes last and marks the run complete.
inline void persist_cell(const fs::path& dir, const CellResult& cell) {
    write_text(dir / "trace.csv", trace_csv(cell.evolution.trace));
    write_text(dir / "front.csv",
               contributions_csv(cell.selection.archive, cell.selection.contributions, cell.selection.archive_index));
    std::ostringstream test_front;
    test_front << std::setprecision(17) << "test_f1,f2\n";
    for (const auto& p : cell.test_front.points) {
        test_front << p.objectives.error << ',' << p.objectives.size << '\n';
    }
    write_text(dir / "front_test.csv", test_front.str());
    write_text(dir / "best_tree.json", tree_to_json(cell.best).dump(2) + "\n");
    write_text(dir / "best_tree.dot", to_dot(cell.best));
    write_text(dir / "record.json", record_to_json(cell.record).dump(2) + "\n");
}

inline std::optional<RunRecord> read_record(const fs::path& dir) {
    std::ifstream in(dir / "record.json");
    if (!in) {
        return std::nullopt;
    }
    try {
        return record_from_json(nlohmann::json::parse(in));
    } catch (const std::exception&) {
        throw DataError("corrupt record in " + dir.string());
    }
}

inline std::vector<CellKey> all_cells(const ExperimentPlan& plan) {
    std::vector<CellKey> keys;
    for (std::size_t d = 0; d < plan.datasets.size(); ++d) {
        for (auto o : plan.optimizers) {
            for (auto a : plan.activations) {
                for (std::size_t run = 0; run < plan.runs; ++run) {
                    keys.push_back({d, o, a, run});
                }
            }
        }
    }
    return keys;
}

// Checks (or creates) the plan marker of a store directory.
inline void bind_store(const ExperimentPlan& plan, const fs::path& store) {
    const fs::path marker = store / "plan.json";
    const std::string hash = plan_hash(plan);
    if (fs::exists(marker)) {
        std::ifstream in(marker);
        std::string stored;
        try {
            stored = plan_hash(plan_from_json(nlohmann::json::parse(in)));
        } catch (const std::exception&) {
            throw ConfigError("store " + store.string() + " has an unreadable plan.json");
        }
        if (stored != hash) {
            throw ConfigError("store " + store.string() + " belongs to plan " + stored + ", not " + hash);
        }
        return;
    }
    write_text(marker, plan_to_json(plan).dump(2) + "\n");
}

struct ResumeState {
    std::vector<CellKey> remaining;
    std::vector<RunRecord> completed;
    std::vector<std::string> warnings;
};

// Splits the plan's cells into already-persisted runs and runs still to do.
// Corrupt or mismatching records are scheduled again with a warning.
inline ResumeState resume(const ExperimentPlan& plan, const fs::path& store) {
    bind_store(plan, store);
    ResumeState state;
    for (const auto& key : all_cells(plan)) {
        const auto& name = plan.datasets[key.dataset].name;
        const auto dir = cell_dir(store, name, key.optimizer, key.activation, key.run);
        try {
            const auto record = read_record(dir);
            if (!record) {
                state.remaining.push_back(key);
                continue;
            }
            if (record->dataset != name || record->optimizer != to_string(key.optimizer) ||
                record->activation != to_string(key.activation) || record->run != key.run ||
                record->seed != plan.run_seed(key.run)) {
                throw DataError("record in " + dir.string() + " does not match its cell");
            }
            state.completed.push_back(*record);
        } catch (const DataError& e) {
            state.warnings.emplace_back(std::string(e.what()) + "; rerunning");
            state.remaining.push_back(key);
        }
    }
    return state;
}

// ---- aggregation --------------------------------------------------------------

struct CellStats {
    std::string dataset;
    std::string optimizer;
    std::string activation;
    std::size_t runs = 0;
    double mean_test = 0.0;
    double var_test = 0.0; // sample variance (n - 1)
    double best_test = 0.0;
    double mean_train = 0.0;
    double mean_size = 0.0;
    double mean_hv = 0.0;
    std::vector<double> test_errors; // in run order
};

struct TTestRow {
    std::string dataset;
    std::string activation;
    std::string baseline;
    std::string other;
    std::optional<TTestResult> result; // empty when a cell has fewer than 2 runs
};

struct AggregateReport {
    std::vector<CellStats> cells;   // plan order: dataset, optimizer, activation
    std::vector<TTestRow> ttests;
};

inline AggregateReport aggregate(std::vector<RunRecord> records, const ExperimentPlan& plan) {
    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::tie(a.dataset, a.optimizer, a.activation, a.run) < std::tie(b.dataset, b.optimizer, b.activation, b.run);
    });
    AggregateReport report;
    for (const auto& source : plan.datasets) {
        for (auto o : plan.optimizers) {
            for (auto a : plan.activations) {
                CellStats s;
                s.dataset = source.name;
                s.optimizer = std::string(to_string(o));
                s.activation = std::string(to_string(a));
                double sum_test = 0, sum_train = 0, sum_size = 0, sum_hv = 0;
                s.best_test = std::numeric_limits<double>::infinity();
                for (const auto& r : records) {
                    if (r.dataset != s.dataset || r.optimizer != s.optimizer || r.activation != s.activation) {
                        continue;
                    }
                    ++s.runs;
                    s.test_errors.push_back(r.test_error);
                    sum_test += r.test_error;
                    sum_train += r.train_error;
                    sum_size += static_cast<double>(r.tree_size);
                    sum_hv += r.hv_test;
                    s.best_test = std::min(s.best_test, r.test_error);
                }
                if (s.runs == 0) {
                    throw DataError("no completed runs for cell " + s.dataset + "/" + s.optimizer + "-" + s.activation);
                }
                const double n = static_cast<double>(s.runs);
                s.mean_test = sum_test / n;
                s.mean_train = sum_train / n;
                s.mean_size = sum_size / n;
                s.mean_hv = sum_hv / n;
                double ss = 0.0;
                for (double e : s.test_errors) {
                    ss += (e - s.mean_test) * (e - s.mean_test);
                }
                s.var_test = s.runs > 1 ? ss / (n - 1.0) : std::numeric_limits<double>::quiet_NaN();
                report.cells.push_back(std::move(s));
            }
        }
    }

    auto find = [&](const std::string& d, const std::string& o, const std::string& a) -> const CellStats* {
        for (const auto& c : report.cells) {
            if (c.dataset == d && c.optimizer == o && c.activation == a) return &c;
        }
        return nullptr;
    };
    const std::string baseline(to_string(plan.baseline));
    for (const auto& source : plan.datasets) {
        for (auto a : plan.activations) {
            const auto* base = find(source.name, baseline, std::string(to_string(a)));
            if (base == nullptr) {
                continue;
            }
            for (auto o : plan.optimizers) {
                if (o == plan.baseline) {
                    continue;
                }
                const auto* other = find(source.name, std::string(to_string(o)), std::string(to_string(a)));
                TTestRow row{source.name, std::string(to_string(a)), baseline, std::string(to_string(o)), std::nullopt};
                if (base->runs >= 2 && other->runs >= 2) {
                    row.result = plan.welch ? welch_ttest(base->test_errors, other->test_errors)
                                            : student_ttest(base->test_errors, other->test_errors);
                }
                report.ttests.push_back(std::move(row));
            }
        }
    }
    return report;
}

namespace detail {

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream out;
    out << std::setprecision(12) << v;
    return out.str();
}

} // namespace detail

// Report tables: mean/variance/best test error (table3), mean test-front
// hypervolume per optimizer (table2), t-tests against the baseline (table4),
// mean training error and selected tree size (table5).
inline std::map<std::string, std::string> report_tables(const AggregateReport& report) {
    using detail::fmt;
    std::ostringstream t3, t2, t4, t5;
    t3 << "dataset,optimizer,activation,runs,mean_test_f1,var_test_f1,best_test_f1\n";
    t2 << "dataset,optimizer,activation,mean_hv\n";
    t5 << "dataset,optimizer,activation,mean_train_f1,mean_tree_size\n";
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> hv_avg;
    std::vector<std::pair<std::string, std::string>> hv_order;
    for (const auto& c : report.cells) {
        t3 << c.dataset << ',' << c.optimizer << ',' << c.activation << ',' << c.runs << ',' << fmt(c.mean_test) << ','
           << fmt(c.var_test) << ',' << fmt(c.best_test) << '\n';
        t2 << c.dataset << ',' << c.optimizer << ',' << c.activation << ',' << fmt(c.mean_hv) << '\n';
        t5 << c.dataset << ',' << c.optimizer << ',' << c.activation << ',' << fmt(c.mean_train) << ','
           << fmt(c.mean_size) << '\n';
        const auto key = std::make_pair(c.optimizer, c.activation);
        if (!hv_avg.contains(key)) {
            hv_order.push_back(key);
        }
        hv_avg[key].first += c.mean_hv;
        hv_avg[key].second += 1;
    }
    for (const auto& key : hv_order) {
        const auto& [sum, n] = hv_avg[key];
        t2 << "avg," << key.first << ',' << key.second << ',' << fmt(sum / static_cast<double>(n)) << '\n';
    }
    t4 << "dataset,activation,baseline,other,t_stat,p_value,df,significant,degenerate\n";
    for (const auto& row : report.ttests) {
        t4 << row.dataset << ',' << row.activation << ',' << row.baseline << ',' << row.other << ',';
        if (row.result) {
            const auto& r = *row.result;
            t4 << fmt(r.t) << ',' << fmt(r.p) << ',' << fmt(r.df) << ',' << (r.p < 0.05 ? 1 : 0) << ','
               << (r.degenerate ? 1 : 0) << '\n';
        } else {
            t4 << "na,na,na,na,na\n";
        }
    }
    return {{"table2.csv", t2.str()}, {"table3.csv", t3.str()}, {"table4.csv", t4.str()}, {"table5.csv", t5.str()}};
}

inline void write_report(const fs::path& store, const AggregateReport& report) {
    for (const auto& [name, text] : report_tables(report)) {
        write_text(store / "report" / name, text);
    }
}

// ---- plan execution -----------------------------------------------------------

struct ExperimentOutcome {
    fs::path store;
    std::vector<RunRecord> records;
    std::vector<std::string> failures;
    std::vector<std::string> warnings;
    std::size_t executed = 0;
    std::optional<AggregateReport> report;
};

// Runs every missing cell of the plan under root/<plan-hash>/ on `workers`
// threads, then aggregates and writes the report tables. Without `resume`
// every cell is recomputed.
inline ExperimentOutcome run_plan(const ExperimentPlan& plan, const fs::path& root, std::size_t workers = 1,
                                  bool resume_existing = false) {
    plan.check();
    ExperimentOutcome outcome;
    outcome.store = root / plan_hash(plan);
    ResumeState state;
    if (resume_existing) {
        state = resume(plan, outcome.store);
    } else {
        bind_store(plan, outcome.store);
        state.remaining = all_cells(plan);
    }
    outcome.records = std::move(state.completed);
    outcome.warnings = std::move(state.warnings);

    std::vector<std::optional<Dataset>> data(plan.datasets.size());
    for (std::size_t d = 0; d < plan.datasets.size(); ++d) {
        const bool needed = std::any_of(state.remaining.begin(), state.remaining.end(),
                                        [&](const CellKey& k) { return k.dataset == d; });
        if (!needed) {
            continue;
        }
        try {
            data[d] = load_source(plan.datasets[d]);
        } catch (const DataError& e) {
            outcome.failures.push_back(plan.datasets[d].name + ": " + e.what());
        }
    }

    std::mutex lock;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < state.remaining.size(); k = next++) {
            const auto& key = state.remaining[k];
            if (!data[key.dataset]) {
                continue;
            }
            const auto& name = plan.datasets[key.dataset].name;
            try {
                const auto cell = run_cell(*data[key.dataset], name, key.optimizer, key.activation, key.run, plan);
                persist_cell(cell_dir(outcome.store, name, key.optimizer, key.activation, key.run), cell);
                std::lock_guard guard(lock);
                outcome.records.push_back(cell.record);
                ++outcome.executed;
            } catch (const std::exception& e) {
                std::lock_guard guard(lock);
                outcome.failures.push_back(name + "/" + std::string(to_string(key.optimizer)) + "-" +
                                           std::string(to_string(key.activation)) + "/run" +
                                           std::to_string(key.run) + ": " + e.what());
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        for (std::size_t w = 1; w < std::max<std::size_t>(workers, 1); ++w) {
            threads.emplace_back(work);
        }
        work();
    }

    std::sort(outcome.failures.begin(), outcome.failures.end());
    if (outcome.failures.empty()) {
        outcome.report = aggregate(outcome.records, plan);
        write_report(outcome.store, *outcome.report);
    }
    return outcome;
}

// Re-aggregates a store from its persisted records.
inline AggregateReport analyze_store(const fs::path& store) {
    std::ifstream in(store / "plan.json");
    if (!in) {
        throw ConfigError("no plan.json in " + store.string());
    }
    const auto plan = plan_from_json(nlohmann::json::parse(in));
    const auto state = resume(plan, store);
    if (!state.remaining.empty()) {
        throw DataError(std::to_string(state.remaining.size()) + " runs missing from " + store.string());
    }
    auto report = aggregate(state.completed, plan);
    write_report(store, report);
    return report;
}

} // namespace mont
