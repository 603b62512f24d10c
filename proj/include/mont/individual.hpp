#pragma once

#include <cstddef>
#include <limits>
#include <optional>

#include "mont/tree.hpp"

namespace mont {

// Both objectives are minimized: classification error-rate in [0, 1] and
// the total node count of the tree (stored as a real).
struct ObjectiveVector {
    double error = 0.0;
    double size = 0.0;

    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

struct Individual {
    NeuralTree tree;
    ObjectiveVector objectives;
    bool evaluated = false;
    int rank = -1;          // front index, 0 = non-dominated
    double crowding = 0.0;  // NSGA-II density, +inf at front boundaries
    std::optional<std::size_t> niche; // NSGA-III reference point

    static Individual of(NeuralTree tree) {
        Individual ind;
        ind.tree = std::move(tree);
        return ind;
    }
};

inline constexpr double infinite_crowding = std::numeric_limits<double>::infinity();

} // namespace mont
