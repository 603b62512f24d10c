// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <thread>

#include "mont/mont.hpp"

using namespace mont;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const std::string data_dir = MONT_DATA_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---- oracles -------------------------------------------------------------------

Fronts brute_force_sort(const std::vector<ObjectiveVector>& points) {
    Fronts fronts;
    std::vector<bool> done(points.size(), false);
    std::size_t left = points.size();
    while (left > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (done[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
                dominated = !done[j] && dominates(points[j], points[i]);
            }
            if (!dominated) front.push_back(i);
        }
        for (std::size_t i : front) done[i] = true;
        left -= front.size();
        fronts.push_back(front);
    }
    return fronts;
}

double grid_hypervolume(const std::vector<ObjectiveVector>& points, const HvReference& ref, std::size_t g) {
    double lo_e = ref.error, lo_s = ref.size;
    for (const auto& p : points) {
        lo_e = std::min(lo_e, p.error);
        lo_s = std::min(lo_s, p.size);
    }
    const double de = (ref.error - lo_e) / static_cast<double>(g);
    const double ds = (ref.size - lo_s) / static_cast<double>(g);
    std::size_t covered = 0;
    for (std::size_t a = 0; a < g; ++a) {
        const double e = lo_e + (static_cast<double>(a) + 0.5) * de;
        double floor = ref.size;
        for (const auto& p : points) {
            if (p.error <= e) floor = std::min(floor, p.size);
        }
        for (std::size_t b = 0; b < g; ++b) {
            if (lo_s + (static_cast<double>(b) + 0.5) * ds >= floor) {
                covered += g - b;
                break;
            }
        }
    }
    return static_cast<double>(covered) * de * ds;
}

std::size_t binomial(std::size_t n, std::size_t k) {
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

Dataset toy_dataset(std::size_t samples, std::size_t dims, std::size_t classes, std::uint64_t seed) {
    RngStream rng(seed, 77);
    Dataset ds;
    ds.name = "toy";
    for (std::size_t j = 0; j < dims; ++j) ds.feature_names.push_back("f" + std::to_string(j));
    ds.categories.assign(dims, {});
    for (std::size_t k = 0; k < classes; ++k) ds.class_names.push_back("c" + std::to_string(k));
    for (std::size_t i = 0; i < samples; ++i) {
        const int label = static_cast<int>(i % classes);
        ds.labels.push_back(label);
        for (std::size_t j = 0; j < dims; ++j) {
            const double centre = (j == 0) ? (label + 0.5) / static_cast<double>(classes) : 0.5;
            ds.features.push_back(std::clamp(centre + rng.normal(0.0, 0.15), 0.0, 1.0));
        }
    }
    return ds;
}

std::vector<Individual> individuals(const std::vector<ObjectiveVector>& points) {
    std::vector<Individual> pop;
    for (const auto& p : points) {
        Individual ind;
        ind.objectives = p;
        ind.evaluated = true;
        pop.push_back(std::move(ind));
    }
    return pop;
}

// ---- property criteria ---------------------------------------------------------

Outcome operator_closure() {
    const auto start = Clock::now();
    VariationConfig cfg;
    RngStream rng(1001, 0);
    std::vector<NeuralTree> pool;
    for (int i = 0; i < 30; ++i) pool.push_back(random_tree(3, 5, Activation::gaussian, cfg, rng));
    std::size_t checked = 0;
    int max_height = 0;
    for (int step = 0; step < 10000; ++step) {
        const std::size_t i = rng.below(pool.size());
        const std::size_t j = rng.below(pool.size());
        const NeuralTree a = pool[i];
        const NeuralTree b = pool[j];
        std::vector<NeuralTree> out;
        switch (step % 3) {
        case 0: out.push_back(random_tree(2 + rng.below(4), 5, Activation::gaussian, cfg, rng)); break;
        case 1: {
            auto [c, d] = crossover(pool[i], pool[j], cfg, rng);
            out.push_back(std::move(c));
            out.push_back(std::move(d));
            break;
        }
        default: out.push_back(mutate(pool[i], cfg, rng)); break;
        }
        if (!(pool[i] == a) || !(pool[j] == b)) {
            return {false, fmt("parent modified at step %d", step)};
        }
        for (auto& t : out) {
            const auto v = validate(t);
            if (!v.empty()) return {false, fmt("step %d: %s", step, v.front().c_str())};
            max_height = std::max(max_height, tree_height(t));
            ++checked;
            // keep class count uniform inside the pool
            if (t.classes() == 3) pool[rng.below(pool.size())] = std::move(t);
        }
    }
    const double secs = seconds_since(start);
    const bool pass = max_height <= 10 && secs < 30.0;
    return {pass, fmt("%zu outputs valid, max height %d, %.2f s", checked, max_height, secs)};
}

Outcome sorting_oracle() {
    RngStream rng(1002, 0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.below(64);
        std::vector<ObjectiveVector> pts;
        for (std::size_t i = 0; i < n; ++i) {
            if (trial % 2 == 0) {
                pts.push_back({rng.uniform(), rng.uniform(7.0, 200.0)});
            } else {
                pts.push_back({static_cast<double>(rng.below(15)) / 15.0, static_cast<double>(7 + rng.below(30))});
            }
        }
        if (fast_nondominated_sort(pts) != brute_force_sort(pts)) {
            return {false, fmt("mismatch on population %d (N=%zu)", trial, n)};
        }
    }
    return {true, "500 populations identical to brute force"};
}

Outcome hypervolume_oracle() {
    const HvReference ref{1.0, 100.0};
    const double single = hypervolume_2d(std::vector<ObjectiveVector>{{0.2, 10}}, ref);
    const double pair = hypervolume_2d(std::vector<ObjectiveVector>{{0.1, 50}, {0.5, 10}}, ref);
    if (std::fabs(single - 72.0) > 1e-12 || std::fabs(pair - 65.0) > 1e-12) {
        return {false, fmt("hand cases %.15g and %.15g", single, pair)};
    }
    RngStream rng(1003, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ObjectiveVector> pts;
        const std::size_t n = 1 + rng.below(20);
        for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(0.0, 0.95), rng.uniform(7.0, 99.0)});
        const auto archive = extract_front(pts).objectives();
        const double exact = hypervolume_2d(archive, ref);
        const double grid = grid_hypervolume(archive, ref, 2000);
        worst = std::max(worst, std::fabs(grid - exact) / exact);
    }
    return {worst <= 0.005, fmt("72.0 and 65.0 exact; worst grid deviation %.4f%% over 200 archives", worst * 100)};
}

Outcome das_dennis() {
    for (std::size_t m = 2; m <= 4; ++m) {
        for (int h = 1; h <= 12; ++h) {
            const auto refs = das_dennis_points(m, h);
            if (refs.points.size() != binomial(static_cast<std::size_t>(h) + m - 1, m - 1)) {
                return {false, fmt("M=%zu H=%d gave %zu points", m, h, refs.points.size())};
            }
            for (const auto& p : refs.points) {
                double sum = 0;
                for (double v : p) sum += v;
                if (std::fabs(sum - 1.0) > 1e-12) return {false, fmt("M=%zu H=%d sum %.17g", m, h, sum)};
            }
        }
    }
    const auto refs = das_dennis_points(2, 10);
    return {refs.points.size() == 11, fmt("all counts match; M=2 H=10 gives %zu points", refs.points.size())};
}

Outcome survival_and_elitism() {
    const auto refs = das_dennis_points(2, 10);
    RngStream rng(1005, 0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ObjectiveVector> pts;
        const std::size_t n = 2 + rng.below(100);
        for (std::size_t i = 0; i < n; ++i) {
            pts.push_back({static_cast<double>(rng.below(20)) / 20.0, static_cast<double>(7 + rng.below(60))});
        }
        const std::size_t target = 1 + rng.below(n);
        const std::size_t sizes[] = {survive_gp(individuals(pts), target).size(),
                                     survive_nsga2(individuals(pts), target, rng).size(),
                                     survive_nsga3(individuals(pts), target, refs, rng).size()};
        for (std::size_t s : sizes) {
            if (s != target) return {false, fmt("trial %d: kept %zu of target %zu", trial, s, target)};
        }
    }
    const auto data = toy_dataset(20, 3, 2, 5);
    std::string detail = "survivor counts exact on 300 fuzzed inputs;";
    for (auto opt : {Optimizer::gp, Optimizer::nsga2, Optimizer::nsga3}) {
        EvolutionConfig cfg;
        cfg.population_size = 20;
        cfg.generations = 500;
        cfg.optimizer = opt;
        cfg.seed = 55;
        const auto result = evolve(data, cfg);
        for (std::size_t g = 1; g < result.trace.size(); ++g) {
            if (result.trace[g].best_error > result.trace[g - 1].best_error) {
                return {false, fmt("%s best f1 rose at generation %zu", std::string(to_string(opt)).c_str(), g)};
            }
        }
        detail += fmt(" %s best f1 %.3f->%.3f", std::string(to_string(opt)).c_str(), result.trace.front().best_error,
                      result.trace.back().best_error);
    }
    return {true, detail + " (monotone over 500 generations)"};
}

std::string report_text(const fs::path& store) {
    std::string text;
    for (const char* name : {"table2.csv", "table3.csv", "table4.csv", "table5.csv"}) {
        std::ifstream in(store / "report" / name, std::ios::binary);
        text += std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return text;
}

Outcome determinism(const fs::path& scratch) {
    ExperimentPlan plan;
    plan.datasets.push_back({"irs", data_dir + "/iris.csv", {}, true});
    plan.optimizers = {Optimizer::gp, Optimizer::nsga2, Optimizer::nsga3};
    plan.activations = {Activation::gaussian, Activation::tanh};
    plan.runs = 3;
    plan.base_seed = 500;
    plan.evolution.population_size = 16;
    plan.evolution.generations = 10;
    const auto a = run_plan(plan, scratch / "det-a", 1);
    const auto b = run_plan(plan, scratch / "det-b", 4);
    const auto c = run_plan(plan, scratch / "det-c", 1);
    if (!a.failures.empty() || !b.failures.empty() || !c.failures.empty()) {
        return {false, "plan runs failed"};
    }
    const auto ta = report_text(a.store);
    const bool same = !ta.empty() && ta == report_text(b.store) && ta == report_text(c.store);
    return {same, fmt("18 runs, 1 vs 4 workers vs repeat: reports %s (%zu bytes)", same ? "byte-identical" : "differ",
                      ta.size())};
}

Outcome error_rate_consistency() {
    RngStream rng(1007, 0);
    VariationConfig cfg;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t r = 2 + rng.below(5);
        const auto data = toy_dataset(1 + rng.below(120), 3, r, rng.next_u64());
        const auto tree = random_tree(r, 3, static_cast<Activation>(trial % 3), cfg, rng);
        const auto cm = confusion(tree, data);
        const double lhs = error_rate(tree, data);
        const double rhs = 1.0 - static_cast<double>(cm.trace()) / static_cast<double>(data.samples());
        if (lhs != rhs) return {false, fmt("trial %d: %.17g vs %.17g", trial, lhs, rhs)};
    }
    return {true, "300 random trees and datasets, exact equality"};
}

// ---- desk-scale reproductions ----------------------------------------------------

struct DeskRuns {
    AggregateReport report;
    bool ok = false;
    std::string error;
    double seconds = 0.0;
};

const CellStats* find_cell(const AggregateReport& report, const std::string& dataset, const std::string& opt) {
    for (const auto& c : report.cells) {
        if (c.dataset == dataset && c.optimizer == opt) return &c;
    }
    return nullptr;
}

DeskRuns desk_runs(const fs::path& scratch) {
    ExperimentPlan plan;
    plan.datasets = {{"irs", data_dir + "/iris.csv", {}, true},
                     {"win", data_dir + "/wine.csv", {}, true},
                     {"wis", data_dir + "/wisconsin.csv", {}, true}};
    plan.optimizers = {Optimizer::gp, Optimizer::nsga3};
    plan.activations = {Activation::gaussian};
    plan.runs = 10;
    plan.base_seed = 0;
    const auto start = Clock::now();
    DeskRuns out;
    const auto outcome =
        run_plan(plan, scratch / "desk", std::max<std::size_t>(1, std::thread::hardware_concurrency()));
    out.seconds = seconds_since(start);
    if (!outcome.failures.empty() || !outcome.report) {
        out.error = outcome.failures.empty() ? "no report" : outcome.failures.front();
        return out;
    }
    out.report = *outcome.report;
    out.ok = true;
    return out;
}

} // namespace

int main() {
    const fs::path scratch = fs::temp_directory_path() / "mont-acceptance";
    fs::remove_all(scratch);
    int failures = 0;
    auto report = [&](int id, const std::string& name, const Outcome& o) {
        std::printf("%s criterion %d: %s -- %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };

    report(1, "operator closure", guarded(operator_closure));
    report(2, "non-dominated sort oracle", guarded(sorting_oracle));
    report(3, "hypervolume oracle", guarded(hypervolume_oracle));
    report(4, "reference point lattice", guarded(das_dennis));
    report(5, "survival cardinality and elitism", guarded(survival_and_elitism));
    report(6, "determinism across workers", guarded([&] { return determinism(scratch); }));
    report(7, "error rate equals 1 - trace/N", guarded(error_rate_consistency));

    DeskRuns desk;
    try {
        desk = desk_runs(scratch);
    } catch (const std::exception& e) {
        desk.error = e.what();
    }
    auto desk_outcome = [&](const std::function<Outcome(const AggregateReport&)>& f) {
        if (!desk.ok) return Outcome{false, "desk runs failed: " + desk.error};
        return f(desk.report);
    };

    report(8, "iris NSGA-III test error", desk_outcome([](const AggregateReport& r) {
               const auto* c = find_cell(r, "irs", "nsga3");
               return Outcome{c->mean_test <= 0.10 && c->best_test <= 0.034,
                              fmt("10 runs: mean %.4f (<= 0.10), best %.4f (<= 0.034)", c->mean_test, c->best_test)};
           }));
    report(9, "wine NSGA-III test error", desk_outcome([](const AggregateReport& r) {
               const auto* c = find_cell(r, "win", "nsga3");
               return Outcome{c->mean_test <= 0.15 && c->best_test <= 0.06,
                              fmt("10 runs: mean %.4f (<= 0.15), best %.4f (<= 0.06)", c->mean_test, c->best_test)};
           }));
    report(10, "tree size pressure on iris", desk_outcome([](const AggregateReport& r) {
               const auto* n3 = find_cell(r, "irs", "nsga3");
               const auto* gp = find_cell(r, "irs", "gp");
               return Outcome{n3->mean_size <= 40.0 && n3->mean_size < gp->mean_size,
                              fmt("NSGA-III mean size %.2f (<= 40), GP mean size %.2f", n3->mean_size, gp->mean_size)};
           }));
    report(11, "hypervolume trend NSGA-III >= GP", desk_outcome([](const AggregateReport& r) {
               double n3 = 0, gp = 0;
               for (const char* d : {"irs", "win", "wis"}) {
                   n3 += find_cell(r, d, "nsga3")->mean_hv / 3.0;
                   gp += find_cell(r, d, "gp")->mean_hv / 3.0;
               }
               return Outcome{n3 >= gp, fmt("mean test-front H_i at (1.0, 100): NSGA-III %.2f, GP %.2f", n3, gp)};
           }));
    std::printf("desk-scale runs took %.1f s\n", desk.seconds);
    std::printf("%s: %d of 11 criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
