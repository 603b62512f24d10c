// mont: train, apply and benchmark multi-output neural trees.
//
// Exit codes: 0 ok, 1 some experiment cells failed, 2 bad configuration,
// 3 bad data.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mont/mont.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_partial = 1;
constexpr int exit_config = 2;
constexpr int exit_data = 3;

fs::path runs_root(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("MONT_RUNS_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "runs";
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw mont::ConfigError("cannot open '" + path.string() + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw mont::ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::string hash_text(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- train ---------------------------------------------------------------------

struct TrainOptions {
    std::string data;
    mont::CsvSchema schema;
    mont::EvolutionConfig evolution;
    double train_fraction = 0.8;
    bool stratified = true;
    double offset = 0.1;
    std::string out;
    std::string config;
};

json train_config_json(const TrainOptions& o) {
    json j;
    j["data"] = o.data;
    j["label"] = o.schema.label;
    j["categorical"] = o.schema.categorical;
    j["evolution"] = mont::evolution_to_json(o.evolution);
    j["split"] = {{"train_fraction", o.train_fraction}, {"stratified", o.stratified}};
    j["selection_offset"] = o.offset;
    return j;
}

void apply_train_config(const json& j, TrainOptions& o) {
    o.data = j.value("data", o.data);
    o.schema.label = j.value("label", o.schema.label);
    o.schema.categorical = j.value("categorical", o.schema.categorical);
    if (j.contains("evolution")) {
        mont::evolution_from_json(j["evolution"], o.evolution);
    }
    if (j.contains("split")) {
        o.train_fraction = j["split"].value("train_fraction", o.train_fraction);
        o.stratified = j["split"].value("stratified", o.stratified);
    }
    o.offset = j.value("selection_offset", o.offset);
}

int cmd_train(TrainOptions o) {
    o.evolution.check();
    if (o.data.empty()) {
        throw mont::ConfigError("--data is required");
    }
    const json config = train_config_json(o);
    std::cout << "config " << config.dump() << "\n";

    const auto raw = mont::load_csv(o.data, o.schema);
    const auto parts = mont::split(raw, {o.train_fraction, o.evolution.seed, o.stratified});
    const auto [normalized, params] = mont::normalize(raw, parts.train);
    const auto train = mont::take_rows(normalized, parts.train);
    const auto test = mont::take_rows(normalized, parts.test);

    const auto result = mont::evolve(train, o.evolution);
    const auto& pop = result.population;
    const auto choice = mont::greatest_contributor(std::span<const mont::Individual>(pop), o.offset);
    const auto& best = pop[choice.id];

    mont::Model model;
    model.tree = best.tree;
    model.feature_names = raw.feature_names;
    model.class_names = raw.class_names;
    model.categories = raw.categories;
    model.normalization = params;
    model.label_column = o.schema.label;
    model.train_error = best.objectives.error;
    model.test_error = mont::error_rate(best.tree, test);

    const fs::path out = o.out.empty() ? runs_root("") / ("train-" + hash_text(config.dump())) : fs::path(o.out);
    mont::write_text(out / "config.json", config.dump(2) + "\n");
    mont::write_text(out / "model.json", mont::model_to_json(model).dump(2) + "\n");
    mont::write_text(out / "best_tree.json", mont::tree_to_json(best.tree).dump(2) + "\n");
    mont::write_text(out / "best_tree.dot", mont::to_dot(best.tree));
    mont::write_text(out / "front.csv", mont::contributions_csv(choice.archive, choice.contributions, choice.archive_index));
    mont::write_text(out / "trace.csv", mont::trace_csv(result.trace));
    std::ostringstream split_csv;
    split_csv << "row,part\n";
    for (std::size_t i : parts.train) split_csv << i << ",train\n";
    for (std::size_t i : parts.test) split_csv << i << ",test\n";
    mont::write_text(out / "split.csv", split_csv.str());
    mont::write_text(out / "confusion_test.json", mont::confusion_to_json(mont::confusion(best.tree, test)).dump() + "\n");

    std::cout << std::setprecision(17);
    std::cout << "train_f1 " << model.train_error << "\n";
    std::cout << "test_f1 " << model.test_error << "\n";
    std::cout << "tree_size " << mont::tree_size(best.tree) << "\n";
    std::cout << "front_size " << choice.archive.size() << "\n";
    std::cout << "out " << out.string() << "\n";
    return 0;
}

// ---- predict -------------------------------------------------------------------

int cmd_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path) {
    const auto model = [&] {
        try {
            return mont::model_from_json(read_json(model_path));
        } catch (const mont::ConfigError& e) {
            throw mont::DataError(e.what());
        }
    }();
    std::ifstream in(data_path);
    if (!in) {
        throw mont::DataError("cannot open data file '" + data_path + "'");
    }
    auto records = mont::detail::read_records(in);
    const std::size_t d = model.tree.dims();

    // Column of each feature, and of the label when present.
    std::vector<std::size_t> feature_col(d);
    std::optional<std::size_t> label_col;
    bool header = false;
    if (!records.empty()) {
        const auto& first = records.front();
        header = std::all_of(model.feature_names.begin(), model.feature_names.end(), [&](const std::string& name) {
            return std::find(first.begin(), first.end(), name) != first.end();
        });
        if (header) {
            for (std::size_t j = 0; j < d; ++j) {
                feature_col[j] = static_cast<std::size_t>(
                    std::find(first.begin(), first.end(), model.feature_names[j]) - first.begin());
            }
            const auto it = std::find_if(first.begin(), first.end(), [&](const std::string& name) {
                return std::find(model.feature_names.begin(), model.feature_names.end(), name) ==
                       model.feature_names.end();
            });
            if (it != first.end() && first.size() == d + 1) {
                label_col = static_cast<std::size_t>(it - first.begin());
            }
            records.erase(records.begin());
        } else {
            if (first.size() != d && first.size() != d + 1) {
                throw mont::DataError("data has " + std::to_string(first.size()) + " columns; model expects " +
                                      std::to_string(d) + " features (plus an optional trailing label)");
            }
            for (std::size_t j = 0; j < d; ++j) feature_col[j] = j;
            if (first.size() == d + 1) label_col = d;
        }
    }

    std::ostringstream out;
    out << std::setprecision(17);
    if (!records.empty()) {
        out << "row,predicted,predicted_class";
        for (const auto& c : model.class_names) out << ",score_" << c;
        if (label_col) out << ",label";
        out << "\n";
    }
    std::vector<double> x(d);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& row = records[i];
        if (row.size() != records.front().size()) {
            throw mont::DataError("row " + std::to_string(i + 1) + " has a different column count");
        }
        for (std::size_t j = 0; j < d; ++j) {
            const std::string& cell = row[feature_col[j]];
            double value = 0.0;
            if (!model.categories[j].empty()) {
                const int code = mont::detail::code_of(model.categories[j], cell);
                if (code < 0) throw mont::DataError("row " + std::to_string(i + 1) + ": unknown category '" + cell + "'");
                value = code;
            } else {
                const auto parsed = mont::detail::parse_number(cell);
                if (!parsed) throw mont::DataError("row " + std::to_string(i + 1) + ": cannot parse '" + cell + "'");
                value = *parsed;
            }
            x[j] = model.normalization.apply(j, value);
        }
        const auto scores = mont::class_scores(model.tree, x);
        const int predicted = mont::argmax_class(scores);
        out << i << ',' << predicted << ',' << model.class_names[static_cast<std::size_t>(predicted)];
        for (double s : scores) out << ',' << s;
        if (label_col) {
            out << ',' << row[*label_col];
            if (row[*label_col] == model.class_names[static_cast<std::size_t>(predicted)]) ++hits;
        }
        out << "\n";
    }
    if (out_path.empty() || out_path == "-") {
        std::cout << out.str();
    } else {
        mont::write_text(out_path, out.str());
        if (label_col && !records.empty()) {
            std::cout << std::setprecision(17) << "error_rate "
                      << 1.0 - static_cast<double>(hits) / static_cast<double>(records.size()) << "\n";
        }
    }
    return 0;
}

// ---- experiment / analyze --------------------------------------------------------

int cmd_experiment(const std::string& plan_path, std::size_t workers, bool resume, const std::string& runs_dir) {
    auto plan = mont::plan_from_json(read_json(plan_path));
    const fs::path base = fs::path(plan_path).parent_path();
    for (auto& source : plan.datasets) {
        if (fs::path(source.path).is_relative() && !fs::exists(source.path) && fs::exists(base / source.path)) {
            source.path = (base / source.path).string();
        }
    }
    const auto outcome = mont::run_plan(plan, runs_root(runs_dir), workers, resume);
    for (const auto& w : outcome.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    std::cout << "store " << outcome.store.string() << "\n";
    std::cout << "executed " << outcome.executed << "\n";
    std::cout << "records " << outcome.records.size() << "\n";
    if (!outcome.failures.empty()) {
        for (const auto& f : outcome.failures) {
            std::cerr << "failed: " << f << "\n";
        }
        return exit_partial;
    }
    std::cout << "report " << (outcome.store / "report").string() << "\n";
    return 0;
}

int cmd_analyze(const std::string& store) {
    const auto report = mont::analyze_store(store);
    std::cout << mont::report_tables(report).at("table3.csv");
    return 0;
}

// ---- hv --------------------------------------------------------------------------

int cmd_hv(const std::string& front_path, double ref_f1, double ref_f2, const std::string& out_path) {
    std::ifstream in(front_path);
    if (!in) {
        throw mont::DataError("cannot open front file '" + front_path + "'");
    }
    const auto records = mont::detail::read_records(in);
    std::vector<mont::ObjectiveVector> points;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& row = records[i];
        const auto f1 = row.size() >= 2 ? mont::detail::parse_number(row[0]) : std::nullopt;
        const auto f2 = row.size() >= 2 ? mont::detail::parse_number(row[1]) : std::nullopt;
        if (!f1 || !f2) {
            if (i == 0) continue; // header
            throw mont::DataError("front row " + std::to_string(i + 1) + " is not an (f1, f2) pair");
        }
        points.push_back({*f1, *f2});
    }
    if (points.empty()) {
        throw mont::DataError("front file has no points");
    }
    const mont::HvReference ref{ref_f1, ref_f2};
    const auto archive = mont::extract_front(points);
    const auto objectives = archive.objectives();
    const auto outside = mont::outside_reference(objectives, ref);
    const auto contributions = mont::exclusive_contributions(archive, ref);
    std::size_t greatest = 0;
    for (std::size_t i = 1; i < archive.size(); ++i) {
        const auto& c = objectives[i];
        const auto& b = objectives[greatest];
        if (contributions[i] > contributions[greatest] ||
            (contributions[i] == contributions[greatest] &&
             (c.error < b.error || (c.error == b.error && c.size < b.size)))) {
            greatest = i;
        }
    }
    std::cout << std::setprecision(17);
    std::cout << "hypervolume " << mont::hypervolume_2d(archive, ref) << "\n";
    std::cout << "points " << points.size() << "\n";
    std::cout << "filtered " << points.size() - archive.size() << " dominated or duplicate\n";
    for (std::size_t i : outside) {
        std::cout << "clamped " << objectives[i].error << "," << objectives[i].size << " lies outside the reference box\n";
    }
    std::cout << "greatest " << objectives[greatest].error << "," << objectives[greatest].size << "\n";
    const auto csv = mont::contributions_csv(archive, contributions, greatest);
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        mont::write_text(out_path, csv);
    }
    return 0;
}

// ---- export ------------------------------------------------------------------------

int cmd_export(const std::string& model_path, const std::string& format, const std::string& out_path) {
    const json j = read_json(model_path);
    const auto tree = j.contains("kind") ? mont::model_from_json(j).tree : mont::tree_from_json(j);
    const std::string text = format == "dot" ? mont::to_dot(tree) : mont::tree_to_json(tree).dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        mont::write_text(out_path, text);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-output neural trees trained by GP, NSGA-II or NSGA-III"};
    app.require_subcommand(1);

    // train
    TrainOptions train;
    std::string optimizer = "nsga3";
    std::string activation = "gaussian";
    bool no_stratify = false;
    auto* t = app.add_subcommand("train", "Evolve a population and keep the greatest hypervolume contributor");
    t->add_option("--config", train.config, "JSON config file; flags override its values");
    auto* o_data = t->add_option("--data", train.data, "CSV data file");
    auto* o_label = t->add_option("--label-col", train.schema.label, "Label column name or index (negative from end)")
                        ->default_val("-1");
    auto* o_cat = t->add_option("--categorical", train.schema.categorical, "Categorical feature columns");
    auto* o_opt = t->add_option("--optimizer", optimizer, "gp | nsga2 | nsga3 (default nsga3)");
    auto* o_act = t->add_option("--activation", activation, "gaussian | sigmoid | tanh (default gaussian)");
    auto* o_pop = t->add_option("--pop", train.evolution.population_size, "Population size (default 50)");
    auto* o_gens = t->add_option("--gens", train.evolution.generations, "Generations (default 100)");
    auto* o_seed = t->add_option("--seed", train.evolution.seed, "Random seed (default 0)");
    auto* o_arity = t->add_option("--max-arity", train.evolution.variation.max_arity, "Max child nodes (default 5)");
    auto* o_height = t->add_option("--max-height", train.evolution.variation.max_height, "Max tree height (default 10)");
    auto* o_cx = t->add_option("--crossover", train.evolution.variation.crossover_prob, "Crossover probability (default 0.5)");
    auto* o_mut = t->add_option("--mutation", train.evolution.variation.mutation_prob, "Mutation probability (default 0.5)");
    auto* o_leaf = t->add_option("--leaf-prob", train.evolution.variation.leaf_prob, "Leaf probability when growing (default 0.5)");
    auto* o_sigma = t->add_option("--param-sigma", train.evolution.variation.param_sigma, "Weight perturbation std-dev (default 0.1)");
    auto* o_div = t->add_option("--divisions", train.evolution.divisions, "NSGA-III reference-point divisions (default 10)");
    auto* o_frac = t->add_option("--train-fraction", train.train_fraction, "Training share of the holdout split (default 0.8)");
    auto* o_nostrat = t->add_flag("--no-stratify", no_stratify, "Split without class stratification");
    auto* o_offset = t->add_option("--offset", train.offset, "Reference-point offset for best-tree selection (default 0.1)");
    t->add_option("--workers", train.evolution.workers, "Objective evaluation threads (default 1)");
    t->add_option("--out", train.out, "Output directory (default $MONT_RUNS_DIR/train-<config-hash>)");

    // predict
    std::string model_path, predict_data, predict_out;
    auto* p = app.add_subcommand("predict", "Score a CSV file with a trained model");
    p->add_option("--model", model_path, "model.json written by train")->required();
    p->add_option("--data", predict_data, "CSV data file")->required();
    p->add_option("--out", predict_out, "Predictions CSV (default stdout)");

    // experiment
    std::string plan_path, runs_dir;
    std::size_t workers = 1;
    bool resume = false;
    auto* e = app.add_subcommand("experiment", "Run a repeated-run benchmark plan and write report tables");
    e->add_option("--plan", plan_path, "Plan JSON file")->required();
    e->add_option("--workers", workers, "Concurrent runs (default 1)");
    e->add_flag("--resume", resume, "Skip runs already persisted in the store");
    e->add_option("--runs-dir", runs_dir, "Store root (default $MONT_RUNS_DIR or ./runs)");

    // analyze
    std::string store;
    auto* a = app.add_subcommand("analyze", "Re-aggregate report tables from a run store");
    a->add_option("--store", store, "runs/<plan-hash> directory")->required();

    // hv
    std::string front_path, hv_out;
    double ref_f1 = 1.0, ref_f2 = 100.0;
    auto* h = app.add_subcommand("hv", "Hypervolume and per-point contributions of a front");
    h->add_option("--front", front_path, "CSV of f1,f2 points")->required();
    h->add_option("--ref-f1", ref_f1, "Reference error-rate (default 1.0)");
    h->add_option("--ref-f2", ref_f2, "Reference tree-size (default 100)");
    h->add_option("--out", hv_out, "Contributions CSV (default stdout)");

    // export
    std::string export_model, export_format = "dot", export_out;
    auto* x = app.add_subcommand("export", "Render a model or tree JSON as DOT or normalized JSON");
    x->add_option("--model", export_model, "model.json or best_tree.json")->required();
    x->add_option("--format", export_format, "dot | json (default dot)")->check(CLI::IsMember({"dot", "json"}));
    x->add_option("--out", export_out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*t) {
            if (!train.config.empty()) {
                // file values first, then re-apply only the flags that were given
                TrainOptions flags = train;
                apply_train_config(read_json(train.config), train);
                auto given = [](const CLI::Option* opt) { return opt->count() > 0; };
                if (given(o_data)) train.data = flags.data;
                if (given(o_label)) train.schema.label = flags.schema.label;
                if (given(o_cat)) train.schema.categorical = flags.schema.categorical;
                if (given(o_pop)) train.evolution.population_size = flags.evolution.population_size;
                if (given(o_gens)) train.evolution.generations = flags.evolution.generations;
                if (given(o_seed)) train.evolution.seed = flags.evolution.seed;
                if (given(o_arity)) train.evolution.variation.max_arity = flags.evolution.variation.max_arity;
                if (given(o_height)) train.evolution.variation.max_height = flags.evolution.variation.max_height;
                if (given(o_cx)) train.evolution.variation.crossover_prob = flags.evolution.variation.crossover_prob;
                if (given(o_mut)) train.evolution.variation.mutation_prob = flags.evolution.variation.mutation_prob;
                if (given(o_leaf)) train.evolution.variation.leaf_prob = flags.evolution.variation.leaf_prob;
                if (given(o_sigma)) train.evolution.variation.param_sigma = flags.evolution.variation.param_sigma;
                if (given(o_div)) train.evolution.divisions = flags.evolution.divisions;
                if (given(o_frac)) train.train_fraction = flags.train_fraction;
                if (given(o_offset)) train.offset = flags.offset;
                if (!given(o_opt)) optimizer = std::string(mont::to_string(train.evolution.optimizer));
                if (!given(o_act)) activation = std::string(mont::to_string(train.evolution.activation));
                if (given(o_nostrat)) train.stratified = false;
            } else if (no_stratify) {
                train.stratified = false;
            }
            const auto opt = mont::parse_optimizer(optimizer);
            const auto act = mont::parse_activation(activation);
            if (!opt) throw mont::ConfigError("unknown optimizer '" + optimizer + "'");
            if (!act) throw mont::ConfigError("unknown activation '" + activation + "'");
            train.evolution.optimizer = *opt;
            train.evolution.activation = *act;
            return cmd_train(train);
        }
        if (*p) return cmd_predict(model_path, predict_data, predict_out);
        if (*e) return cmd_experiment(plan_path, workers, resume, runs_dir);
        if (*a) return cmd_analyze(store);
        if (*h) return cmd_hv(front_path, ref_f1, ref_f2, hv_out);
        if (*x) return cmd_export(export_model, export_format, export_out);
    } catch (const mont::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return exit_config;
    } catch (const mont::DataError& err) {
        std::cerr << "data error: " << err.what() << "\n";
        return exit_data;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_data;
    }
    return 0;
}
