#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mont/dataset.hpp"
#include "mont/errors.hpp"
#include "mont/individual.hpp"
#include "mont/metrics.hpp"
#include "mont/rng.hpp"
#include "mont/tree.hpp"
#include "mont/variation.hpp"

namespace mont {

enum class Optimizer { gp, nsga2, nsga3 };

inline std::string_view to_string(Optimizer o) {
    switch (o) {
    case Optimizer::gp: return "gp";
    case Optimizer::nsga2: return "nsga2";
    case Optimizer::nsga3: return "nsga3";
    }
    return "nsga3";
}

inline std::optional<Optimizer> parse_optimizer(std::string_view s) {
    if (s == "gp") return Optimizer::gp;
    if (s == "nsga2") return Optimizer::nsga2;
    if (s == "nsga3") return Optimizer::nsga3;
    return std::nullopt;
}

// Pareto dominance for minimization.
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    return a.error <= b.error && a.size <= b.size && (a.error < b.error || a.size < b.size);
}

using Fronts = std::vector<std::vector<std::size_t>>;

// Deb's fast non-dominated sort. Each front lists indices in ascending order.
inline Fronts fast_nondominated_sort(std::span<const ObjectiveVector> points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> domination_count(n, 0);
    Fronts fronts;
    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (dominates(points[p], points[q])) {
                dominated[p].push_back(q);
            } else if (dominates(points[q], points[p])) {
                ++domination_count[p];
            }
        }
        if (domination_count[p] == 0) {
            current.push_back(p);
        }
    }
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t p : current) {
            for (std::size_t q : dominated[p]) {
                if (--domination_count[q] == 0) {
                    next.push_back(q);
                }
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

inline std::vector<ObjectiveVector> objectives_of(std::span<const Individual> pop) {
    std::vector<ObjectiveVector> out;
    out.reserve(pop.size());
    for (const auto& ind : pop) {
        out.push_back(ind.objectives);
    }
    return out;
}

// Sorts a population and stores each member's front index in `rank`.
inline Fronts fast_nondominated_sort(std::span<Individual> pop) {
    const auto points = objectives_of(pop);
    auto fronts = fast_nondominated_sort(std::span<const ObjectiveVector>(points));
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        for (std::size_t i : fronts[f]) {
            pop[i].rank = static_cast<int>(f);
        }
    }
    return fronts;
}

// NSGA-II crowding distance of each member of one front.
inline std::vector<double> crowding_distance(std::span<const ObjectiveVector> front) {
    const std::size_t n = front.size();
    std::vector<double> distance(n, 0.0);
    if (n <= 2) {
        std::fill(distance.begin(), distance.end(), infinite_crowding);
        return distance;
    }
    std::vector<std::size_t> order(n);
    for (int objective = 0; objective < 2; ++objective) {
        auto value = [&](std::size_t i) { return objective == 0 ? front[i].error : front[i].size; };
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
        distance[order.front()] = infinite_crowding;
        distance[order.back()] = infinite_crowding;
        const double range = value(order.back()) - value(order.front());
        if (range == 0.0) {
            continue;
        }
        for (std::size_t k = 1; k + 1 < n; ++k) {
            distance[order[k]] += (value(order[k + 1]) - value(order[k - 1])) / range;
        }
    }
    return distance;
}

struct ReferencePointSet {
    std::size_t objectives = 2;
    int divisions = 0;
    std::vector<std::vector<double>> points;
};

namespace detail {

inline void das_dennis_fill(std::vector<int>& current, std::size_t position, int left,
                            std::vector<std::vector<double>>& out, int divisions) {
    if (position + 1 == current.size()) {
        current[position] = left;
        std::vector<double> point(current.size());
        for (std::size_t i = 0; i < current.size(); ++i) {
            point[i] = static_cast<double>(current[i]) / static_cast<double>(divisions);
        }
        out.push_back(std::move(point));
        return;
    }
    for (int v = left; v >= 0; --v) {
        current[position] = v;
        das_dennis_fill(current, position + 1, left - v, out, divisions);
    }
}

} // namespace detail

// Simplex-lattice reference points: every vector of non-negative multiples of
// 1/H summing to 1, in descending lexicographic order.
inline ReferencePointSet das_dennis_points(std::size_t objectives, int divisions) {
    if (objectives < 2 || divisions < 1) {
        throw ConfigError("reference points need M >= 2 and H >= 1");
    }
    ReferencePointSet refs{objectives, divisions, {}};
    std::vector<int> current(objectives, 0);
    detail::das_dennis_fill(current, 0, divisions, refs.points, divisions);
    return refs;
}

// Translate by the ideal point and divide by the per-objective range.
inline std::vector<std::vector<double>> normalize_objectives(std::span<const ObjectiveVector> points) {
    std::vector<std::vector<double>> out;
    if (points.empty()) {
        return out;
    }
    double min_e = points[0].error, max_e = points[0].error;
    double min_s = points[0].size, max_s = points[0].size;
    for (const auto& p : points) {
        min_e = std::min(min_e, p.error);
        max_e = std::max(max_e, p.error);
        min_s = std::min(min_s, p.size);
        max_s = std::max(max_s, p.size);
    }
    const double range_e = max_e > min_e ? max_e - min_e : 1.0;
    const double range_s = max_s > min_s ? max_s - min_s : 1.0;
    out.reserve(points.size());
    for (const auto& p : points) {
        out.push_back({(p.error - min_e) / range_e, (p.size - min_s) / range_s});
    }
    return out;
}

struct Association {
    std::size_t reference = 0;
    double distance = 0.0; // perpendicular distance to the reference ray
};

inline Association associate(std::span<const double> point, const ReferencePointSet& refs) {
    Association best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t j = 0; j < refs.points.size(); ++j) {
        const auto& w = refs.points[j];
        double dot = 0.0, ww = 0.0;
        for (std::size_t m = 0; m < w.size(); ++m) {
            dot += point[m] * w[m];
            ww += w[m] * w[m];
        }
        double d2 = 0.0;
        for (std::size_t m = 0; m < w.size(); ++m) {
            const double diff = point[m] - dot / ww * w[m];
            d2 += diff * diff;
        }
        const double d = std::sqrt(d2);
        if (d < best.distance) {
            best = {j, d};
        }
    }
    return best;
}

// NSGA-III niche-preserving choice of k members of the last front. Inputs are
// normalized objectives of already accepted members and of the last front;
// returns indices into `last`.
inline std::vector<std::size_t> associate_and_niche(std::span<const std::vector<double>> accepted,
                                                    std::span<const std::vector<double>> last,
                                                    const ReferencePointSet& refs, std::size_t k, RngStream& rng,
                                                    std::vector<Association>* last_associations = nullptr) {
    std::vector<std::size_t> chosen;
    if (k >= last.size()) {
        chosen.resize(last.size());
        std::iota(chosen.begin(), chosen.end(), 0);
        if (last_associations != nullptr) {
            last_associations->clear();
            for (const auto& p : last) {
                last_associations->push_back(associate(p, refs));
            }
        }
        return chosen;
    }

    const std::size_t n_refs = refs.points.size();
    std::vector<std::size_t> niche_count(n_refs, 0);
    for (const auto& p : accepted) {
        ++niche_count[associate(p, refs).reference];
    }
    std::vector<Association> assoc;
    std::vector<std::vector<std::size_t>> members(n_refs);
    for (std::size_t i = 0; i < last.size(); ++i) {
        assoc.push_back(associate(last[i], refs));
        members[assoc.back().reference].push_back(i);
    }
    auto norm = [&](std::size_t i) {
        double s = 0.0;
        for (double v : last[i]) {
            s += v * v;
        }
        return s;
    };

    std::vector<bool> excluded(n_refs, false);
    std::vector<std::size_t> candidates;
    while (chosen.size() < k) {
        std::size_t min_count = std::numeric_limits<std::size_t>::max();
        for (std::size_t j = 0; j < n_refs; ++j) {
            if (!excluded[j]) {
                min_count = std::min(min_count, niche_count[j]);
            }
        }
        candidates.clear();
        for (std::size_t j = 0; j < n_refs; ++j) {
            if (!excluded[j] && niche_count[j] == min_count) {
                candidates.push_back(j);
            }
        }
        const std::size_t j = candidates[rng.below(candidates.size())];
        auto& pool = members[j];
        if (pool.empty()) {
            excluded[j] = true;
            continue;
        }
        std::size_t pick = 0;
        if (niche_count[j] == 0) {
            for (std::size_t m = 1; m < pool.size(); ++m) {
                const auto a = pool[m];
                const auto b = pool[pick];
                if (assoc[a].distance < assoc[b].distance ||
                    (assoc[a].distance == assoc[b].distance && norm(a) < norm(b))) {
                    pick = m;
                }
            }
        } else {
            pick = rng.below(pool.size());
        }
        chosen.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<long>(pick));
        ++niche_count[j];
    }
    if (last_associations != nullptr) {
        *last_associations = std::move(assoc);
    }
    return chosen;
}

namespace detail {

inline std::vector<Individual> take(std::vector<Individual>& from, std::span<const std::size_t> indices) {
    std::vector<Individual> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        out.push_back(std::move(from[i]));
    }
    return out;
}

inline void require_target(std::size_t available, std::size_t target) {
    if (target > available) {
        throw ConfigError("survival target exceeds the combined population");
    }
}

} // namespace detail

// Single-objective survival: ascending error, then smaller tree, then original order.
inline std::vector<Individual> survive_gp(std::vector<Individual> combined, std::size_t target) {
    detail::require_target(combined.size(), target);
    std::vector<std::size_t> order(combined.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& oa = combined[a].objectives;
        const auto& ob = combined[b].objectives;
        return oa.error < ob.error || (oa.error == ob.error && oa.size < ob.size);
    });
    order.resize(target);
    return detail::take(combined, order);
}

// Whole fronts in rank order; the overflowing front is cut by descending
// crowding distance with random tie-breaks.
inline std::vector<Individual> survive_nsga2(std::vector<Individual> combined, std::size_t target, RngStream& rng) {
    detail::require_target(combined.size(), target);
    const auto fronts = fast_nondominated_sort(std::span<Individual>(combined));
    std::vector<std::size_t> keep;
    for (const auto& front : fronts) {
        std::vector<ObjectiveVector> points;
        for (std::size_t i : front) {
            points.push_back(combined[i].objectives);
        }
        const auto distance = crowding_distance(points);
        for (std::size_t m = 0; m < front.size(); ++m) {
            combined[front[m]].crowding = distance[m];
        }
        if (keep.size() + front.size() <= target) {
            keep.insert(keep.end(), front.begin(), front.end());
            if (keep.size() == target) {
                break;
            }
            continue;
        }
        std::vector<std::size_t> order(front.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return distance[a] > distance[b]; });
        for (std::size_t m = 0; keep.size() < target; ++m) {
            keep.push_back(front[order[m]]);
        }
        break;
    }
    return detail::take(combined, keep);
}

// Whole fronts in rank order; the overflowing front is resolved by
// reference-point niching on range-normalized objectives.
inline std::vector<Individual> survive_nsga3(std::vector<Individual> combined, std::size_t target,
                                             const ReferencePointSet& refs, RngStream& rng) {
    detail::require_target(combined.size(), target);
    const auto fronts = fast_nondominated_sort(std::span<Individual>(combined));
    std::vector<std::size_t> keep;
    for (const auto& front : fronts) {
        if (keep.size() + front.size() <= target) {
            keep.insert(keep.end(), front.begin(), front.end());
            if (keep.size() == target) {
                break;
            }
            continue;
        }
        std::vector<ObjectiveVector> pool;
        for (std::size_t i : keep) {
            pool.push_back(combined[i].objectives);
        }
        for (std::size_t i : front) {
            pool.push_back(combined[i].objectives);
        }
        const auto normalized = normalize_objectives(pool);
        std::span<const std::vector<double>> all(normalized);
        std::vector<Association> assoc;
        const auto chosen = associate_and_niche(all.first(keep.size()), all.subspan(keep.size()), refs,
                                                target - keep.size(), rng, &assoc);
        for (std::size_t m = 0; m < keep.size(); ++m) {
            combined[keep[m]].niche = associate(normalized[m], refs).reference;
        }
        for (std::size_t c : chosen) {
            combined[front[c]].niche = assoc[c].reference;
            keep.push_back(front[c]);
        }
        break;
    }
    return detail::take(combined, keep);
}

struct EvolutionConfig {
    std::size_t population_size = 50;
    std::size_t generations = 100;
    Optimizer optimizer = Optimizer::nsga3;
    Activation activation = Activation::gaussian;
    VariationConfig variation;
    int divisions = 10; // reference-point divisions per objective axis
    std::uint64_t seed = 0;
    std::size_t workers = 1; // objective evaluation threads; results do not depend on it

    void check() const {
        if (population_size < 4 || population_size % 2 != 0) {
            throw ConfigError("population size must be even and at least 4");
        }
        if (divisions < 1) {
            throw ConfigError("reference-point divisions must be at least 1");
        }
        variation.check();
    }
};

struct GenerationStats {
    std::size_t generation = 0;
    double best_error = 0.0;
    double mean_error = 0.0;
    double best_size = 0.0; // size of the lowest-error member (smallest on ties)
    std::size_t front0_size = 0;
    std::vector<ObjectiveVector> front; // distinct non-dominated objective vectors
};

struct EvolutionResult {
    std::vector<Individual> population;
    std::vector<GenerationStats> trace;
};

// Fills objectives of every not-yet-evaluated member using `workers` threads.
inline void evaluate_population(std::span<Individual> pop, const Dataset& train, std::size_t workers = 1) {
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        if (!pop[i].evaluated) {
            pending.push_back(i);
        }
    }
    auto evaluate_one = [&](std::size_t i) {
        pop[i].objectives = {error_rate(pop[i].tree, train), static_cast<double>(tree_size(pop[i].tree))};
        pop[i].evaluated = true;
    };
    if (workers <= 1 || pending.size() < 2) {
        for (std::size_t i : pending) {
            evaluate_one(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < std::min(workers, pending.size()); ++w) {
        threads.emplace_back([&] {
            for (std::size_t k = next++; k < pending.size(); k = next++) {
                evaluate_one(pending[k]);
            }
        });
    }
}

inline GenerationStats summarize(std::span<const Individual> pop, std::size_t generation) {
    GenerationStats s;
    s.generation = generation;
    const Individual* best = &pop.front();
    double total = 0.0;
    for (const auto& ind : pop) {
        total += ind.objectives.error;
        const auto& o = ind.objectives;
        if (o.error < best->objectives.error || (o.error == best->objectives.error && o.size < best->objectives.size)) {
            best = &ind;
        }
    }
    s.best_error = best->objectives.error;
    s.best_size = best->objectives.size;
    s.mean_error = total / static_cast<double>(pop.size());
    const auto points = objectives_of(pop);
    const auto fronts = fast_nondominated_sort(std::span<const ObjectiveVector>(points));
    s.front0_size = fronts.front().size();
    for (std::size_t i : fronts.front()) {
        s.front.push_back(points[i]);
    }
    std::sort(s.front.begin(), s.front.end(), [](const ObjectiveVector& a, const ObjectiveVector& b) {
        return a.error < b.error || (a.error == b.error && a.size < b.size);
    });
    s.front.erase(std::unique(s.front.begin(), s.front.end()), s.front.end());
    return s;
}

namespace detail {

// Refreshes rank and crowding of a population for crowded-tournament selection.
inline void assign_rank_and_crowding(std::span<Individual> pop) {
    const auto fronts = fast_nondominated_sort(pop);
    for (const auto& front : fronts) {
        std::vector<ObjectiveVector> points;
        for (std::size_t i : front) {
            points.push_back(pop[i].objectives);
        }
        const auto distance = crowding_distance(points);
        for (std::size_t m = 0; m < front.size(); ++m) {
            pop[front[m]].crowding = distance[m];
        }
    }
}

} // namespace detail

// Parent selection per optimizer: binary tournament on error (GP), crowded
// binary tournament on (rank, crowding) (NSGA-II), uniform draw (NSGA-III).
inline std::size_t select_parent(std::span<const Individual> pop, Optimizer optimizer, RngStream& rng) {
    if (optimizer == Optimizer::nsga3) {
        return rng.below(pop.size());
    }
    const std::size_t a = rng.below(pop.size());
    const std::size_t b = rng.below(pop.size());
    const auto& x = pop[a];
    const auto& y = pop[b];
    if (optimizer == Optimizer::gp) {
        if (y.objectives.error < x.objectives.error ||
            (y.objectives.error == x.objectives.error && y.objectives.size < x.objectives.size)) {
            return b;
        }
        return a;
    }
    if (y.rank < x.rank || (y.rank == x.rank && y.crowding > x.crowding)) {
        return b;
    }
    return a;
}

// Generational loop: random initial population, then per generation
// offspring Q of the population's size, R = P + Q, survival back to |P|.
inline EvolutionResult evolve(const Dataset& train, const EvolutionConfig& cfg) {
    cfg.check();
    if (train.samples() == 0) {
        throw DataError("cannot evolve on an empty training set");
    }
    RngStream rng(cfg.seed, 0xe401);
    const auto refs = das_dennis_points(2, cfg.divisions);

    EvolutionResult result;
    auto& pop = result.population;
    pop.reserve(cfg.population_size);
    for (std::size_t i = 0; i < cfg.population_size; ++i) {
        pop.push_back(Individual::of(random_tree(train.classes(), train.dims(), cfg.activation, cfg.variation, rng)));
    }
    evaluate_population(pop, train, cfg.workers);
    if (cfg.optimizer == Optimizer::nsga2) {
        detail::assign_rank_and_crowding(pop);
    }
    result.trace.push_back(summarize(pop, 0));

    for (std::size_t g = 1; g <= cfg.generations; ++g) {
        auto offspring = make_offspring(std::span<const Individual>(pop), cfg.population_size, cfg.variation, rng,
                                        [&](RngStream& r) { return select_parent(pop, cfg.optimizer, r); });
        std::vector<Individual> combined = std::move(pop);
        combined.reserve(combined.size() + offspring.size());
        for (auto& tree : offspring) {
            combined.push_back(Individual::of(std::move(tree)));
        }
        evaluate_population(combined, train, cfg.workers);
        switch (cfg.optimizer) {
        case Optimizer::gp: pop = survive_gp(std::move(combined), cfg.population_size); break;
        case Optimizer::nsga2:
            pop = survive_nsga2(std::move(combined), cfg.population_size, rng);
            detail::assign_rank_and_crowding(pop);
            break;
        case Optimizer::nsga3: pop = survive_nsga3(std::move(combined), cfg.population_size, refs, rng); break;
        }
        result.trace.push_back(summarize(pop, g));
    }
    return result;
}

} // namespace mont
