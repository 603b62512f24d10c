#pragma once

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "mont/individual.hpp"
#include "mont/moea.hpp"

namespace mont {

struct HvReference {
    double error = 1.0;
    double size = 100.0;
};

struct ArchivePoint {
    ObjectiveVector objectives;
    std::size_t id = 0; // index of the individual in its population
};

// Mutually non-dominated points, deduplicated on exact objective equality.
struct ParetoArchive {
    std::vector<ArchivePoint> points;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }

    std::vector<ObjectiveVector> objectives() const {
        std::vector<ObjectiveVector> out;
        out.reserve(points.size());
        for (const auto& p : points) {
            out.push_back(p.objectives);
        }
        return out;
    }
};

// Front 0 of the population; of several identical points the first is kept.
inline ParetoArchive extract_front(std::span<const ObjectiveVector> points) {
    ParetoArchive archive;
    if (points.empty()) {
        return archive;
    }
    const auto fronts = fast_nondominated_sort(points);
    for (std::size_t i : fronts.front()) {
        const bool seen = std::any_of(archive.points.begin(), archive.points.end(),
                                      [&](const ArchivePoint& p) { return p.objectives == points[i]; });
        if (!seen) {
            archive.points.push_back({points[i], i});
        }
    }
    return archive;
}

inline ParetoArchive extract_front(std::span<const Individual> pop) {
    const auto points = objectives_of(pop);
    return extract_front(std::span<const ObjectiveVector>(points));
}

// Points lying outside the reference box (not weakly dominating the reference).
inline std::vector<std::size_t> outside_reference(std::span<const ObjectiveVector> points, const HvReference& ref) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].error > ref.error || points[i].size > ref.size) {
            out.push_back(i);
        }
    }
    return out;
}

// Area dominated by the points inside the box bounded by `ref`. Points are
// clamped to the box first, so a point outside it adds no area.
inline double hypervolume_2d(std::span<const ObjectiveVector> points, const HvReference& ref) {
    std::vector<ObjectiveVector> clamped;
    clamped.reserve(points.size());
    for (const auto& p : points) {
        clamped.push_back({std::min(p.error, ref.error), std::min(p.size, ref.size)});
    }
    std::sort(clamped.begin(), clamped.end(), [](const ObjectiveVector& a, const ObjectiveVector& b) {
        return a.error < b.error || (a.error == b.error && a.size < b.size);
    });
    double area = 0.0;
    double ceiling = ref.size;
    for (const auto& p : clamped) {
        if (p.size < ceiling) {
            area += (ref.error - p.error) * (ceiling - p.size);
            ceiling = p.size;
        }
    }
    return area;
}

inline double hypervolume_2d(const ParetoArchive& archive, const HvReference& ref) {
    return hypervolume_2d(archive.objectives(), ref);
}

// Hypervolume lost when each point alone is removed.
inline std::vector<double> exclusive_contributions(std::span<const ObjectiveVector> points, const HvReference& ref) {
    const double total = hypervolume_2d(points, ref);
    std::vector<double> out(points.size(), 0.0);
    std::vector<ObjectiveVector> rest;
    for (std::size_t i = 0; i < points.size(); ++i) {
        rest.assign(points.begin(), points.end());
        rest.erase(rest.begin() + static_cast<long>(i));
        out[i] = std::max(0.0, total - hypervolume_2d(rest, ref));
    }
    return out;
}

inline std::vector<double> exclusive_contributions(const ParetoArchive& archive, const HvReference& ref) {
    return exclusive_contributions(archive.objectives(), ref);
}

struct ContributorChoice {
    std::size_t id = 0;          // index into the population
    std::size_t archive_index = 0;
    double contribution = 0.0;
    HvReference reference;
    ParetoArchive archive;
    std::vector<double> contributions; // per archive point
    bool degenerate = false;     // the chosen point adds no area
};

// Reference = worst error and worst size of the population, each plus
// `offset`; picks the front member with the largest exclusive contribution
// (ties: smaller error, then smaller size).
inline ContributorChoice greatest_contributor(std::span<const ObjectiveVector> points, double offset = 0.1) {
    ContributorChoice choice;
    if (points.empty()) {
        throw ConfigError("greatest contributor of an empty population");
    }
    double worst_error = points[0].error;
    double worst_size = points[0].size;
    for (const auto& p : points) {
        worst_error = std::max(worst_error, p.error);
        worst_size = std::max(worst_size, p.size);
    }
    choice.reference = {worst_error + offset, worst_size + offset};
    choice.archive = extract_front(points);
    choice.contributions = exclusive_contributions(choice.archive, choice.reference);
    std::size_t best = 0;
    for (std::size_t i = 1; i < choice.archive.size(); ++i) {
        const auto& c = choice.archive.points[i].objectives;
        const auto& b = choice.archive.points[best].objectives;
        const double dc = choice.contributions[i];
        const double db = choice.contributions[best];
        if (dc > db || (dc == db && (c.error < b.error || (c.error == b.error && c.size < b.size)))) {
            best = i;
        }
    }
    choice.archive_index = best;
    choice.id = choice.archive.points[best].id;
    choice.contribution = choice.contributions[best];
    choice.degenerate = choice.contribution <= 0.0;
    return choice;
}

inline ContributorChoice greatest_contributor(std::span<const Individual> pop, double offset = 0.1) {
    const auto points = objectives_of(pop);
    return greatest_contributor(std::span<const ObjectiveVector>(points), offset);
}

struct HvComparison {
    std::vector<double> hypervolume;          // one per archive
    std::vector<std::size_t> outside_points;  // per archive, points clamped to the box
};

// Hypervolume of several archives on one shared reference frame.
inline HvComparison compare_optimizers_hv(std::span<const ParetoArchive> archives, const HvReference& ref = {}) {
    HvComparison out;
    for (const auto& archive : archives) {
        const auto points = archive.objectives();
        out.hypervolume.push_back(hypervolume_2d(points, ref));
        out.outside_points.push_back(outside_reference(points, ref).size());
    }
    return out;
}

// CSV rows "f1,f2,contribution,is_greatest" for an archive.
inline std::string contributions_csv(const ParetoArchive& archive, std::span<const double> contributions,
                                     std::size_t greatest) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "f1,f2,contribution,is_greatest\n";
    for (std::size_t i = 0; i < archive.size(); ++i) {
        const auto& p = archive.points[i].objectives;
        out << p.error << ',' << p.size << ',' << contributions[i] << ',' << (i == greatest ? 1 : 0) << '\n';
    }
    return out.str();
}

} // namespace mont
