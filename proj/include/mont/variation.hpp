#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mont/errors.hpp"
#include "mont/individual.hpp"
#include "mont/rng.hpp"
#include "mont/tree.hpp"

namespace mont {

struct VariationConfig {
    int max_arity = 5;
    int max_height = 10;
    double crossover_prob = 0.5;
    double mutation_prob = 0.5;
    double leaf_prob = 0.5;
    double weight_min = -1.0;
    double weight_max = 1.0;
    double param_sigma = 0.1;
    int max_retries = 10;

    TreeLimits limits() const { return {max_arity, max_height}; }

    void check() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (max_arity < 2) throw ConfigError("max arity must be at least 2");
        if (max_height < 2) throw ConfigError("max height must be at least 2");
        if (!prob(crossover_prob) || !prob(mutation_prob)) throw ConfigError("operator probabilities must lie in [0, 1]");
        if (!(leaf_prob > 0.0 && leaf_prob < 1.0)) throw ConfigError("leaf probability must lie in (0, 1)");
        if (!(weight_min <= weight_max)) throw ConfigError("weight range is empty");
        if (!(param_sigma >= 0.0)) throw ConfigError("parameter sigma must be non-negative");
        if (max_retries < 0) throw ConfigError("max retries must be non-negative");
    }
};

enum class MutationKind { delete_leaf, replace_leaf, replace_function, perturb_params };

namespace detail {

inline void grow(std::vector<Node>& out, int depth, std::size_t dims, const VariationConfig& cfg, RngStream& rng) {
    const int arity = rng.between(2, cfg.max_arity);
    std::vector<double> weights(static_cast<std::size_t>(arity));
    for (auto& w : weights) {
        w = rng.uniform(cfg.weight_min, cfg.weight_max);
    }
    const double bias = rng.uniform(cfg.weight_min, cfg.weight_max);
    out.push_back(Node::internal(std::move(weights), bias));
    for (int c = 0; c < arity; ++c) {
        const int child_depth = depth + 1;
        if (child_depth >= cfg.max_height || rng.bernoulli(cfg.leaf_prob)) {
            out.push_back(Node::leaf(rng.below(dims)));
        } else {
            grow(out, child_depth, dims, cfg, rng);
        }
    }
}

inline int subtree_height(std::span<const Node> nodes, std::size_t index, std::span<const int> depth) {
    const std::size_t end = subtree_end(nodes, index);
    int h = 0;
    for (std::size_t i = index; i < end; ++i) {
        h = std::max(h, depth[i] - depth[index]);
    }
    return h;
}

// Position of `child` among its parent's children.
inline std::size_t child_slot(std::span<const Node> nodes, std::size_t parent, std::size_t child) {
    std::size_t pos = parent + 1;
    for (std::size_t slot = 0;; ++slot) {
        if (pos == child) {
            return slot;
        }
        pos = subtree_end(nodes, pos);
    }
}

inline std::vector<Node> splice(std::span<const Node> nodes, std::size_t begin, std::size_t end,
                                std::span<const Node> replacement) {
    std::vector<Node> out;
    out.reserve(nodes.size() - (end - begin) + replacement.size());
    out.insert(out.end(), nodes.begin(), nodes.begin() + static_cast<long>(begin));
    out.insert(out.end(), replacement.begin(), replacement.end());
    out.insert(out.end(), nodes.begin() + static_cast<long>(end), nodes.end());
    return out;
}

} // namespace detail

inline NeuralTree random_tree(std::size_t classes, std::size_t dims, Activation activation,
                              const VariationConfig& cfg, RngStream& rng) {
    if (classes < 2 || dims < 1) {
        throw ConfigError("random trees need at least 2 classes and 1 feature");
    }
    std::vector<Node> nodes;
    Node root;
    root.arity = static_cast<int>(classes);
    nodes.push_back(root);
    for (std::size_t k = 0; k < classes; ++k) {
        detail::grow(nodes, 1, dims, cfg, rng);
    }
    return NeuralTree(std::move(nodes), classes, dims, activation, cfg.limits());
}

// Subtree crossover at uniformly drawn non-root points. Offspring that would
// exceed the height limit or put a leaf under the root trigger a redraw;
// after max_retries redraws the parents are returned unchanged.
inline std::pair<NeuralTree, NeuralTree> crossover(const NeuralTree& a, const NeuralTree& b,
                                                   const VariationConfig& cfg, RngStream& rng) {
    const auto& na = a.nodes();
    const auto& nb = b.nodes();
    const auto depth_a = node_depths(na);
    const auto depth_b = node_depths(nb);
    const auto parent_a = node_parents(na);
    const auto parent_b = node_parents(nb);

    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        const std::size_t i = 1 + rng.below(na.size() - 1);
        const std::size_t j = 1 + rng.below(nb.size() - 1);
        if ((parent_a[i] == 0 && nb[j].is_leaf()) || (parent_b[j] == 0 && na[i].is_leaf())) {
            continue;
        }
        const int ha = detail::subtree_height(na, i, depth_a);
        const int hb = detail::subtree_height(nb, j, depth_b);
        if (depth_a[i] + hb > cfg.max_height || depth_b[j] + ha > cfg.max_height) {
            continue;
        }
        const std::size_t end_a = subtree_end(na, i);
        const std::size_t end_b = subtree_end(nb, j);
        std::span<const Node> sub_a(na.data() + i, end_a - i);
        std::span<const Node> sub_b(nb.data() + j, end_b - j);
        return {NeuralTree(detail::splice(na, i, end_a, sub_b), a.classes(), a.dims(), a.activation(), a.limits()),
                NeuralTree(detail::splice(nb, j, end_b, sub_a), b.classes(), b.dims(), b.activation(), b.limits())};
    }
    return {a, b};
}

// Applies one specific mutation form; nullopt when the form has no legal target.
inline std::optional<NeuralTree> mutate_with(const NeuralTree& t, MutationKind kind, const VariationConfig& cfg,
                                             RngStream& rng) {
    const auto& nodes = t.nodes();
    auto rebuild = [&](std::vector<Node> next) {
        return NeuralTree(std::move(next), t.classes(), t.dims(), t.activation(), t.limits());
    };

    switch (kind) {
    case MutationKind::delete_leaf: {
        const auto parent = node_parents(nodes);
        std::vector<std::size_t> targets;
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            if (nodes[i].is_leaf() && parent[i] != 0 && nodes[parent[i]].arity > 2) {
                targets.push_back(i);
            }
        }
        if (targets.empty()) {
            return std::nullopt;
        }
        const std::size_t leaf = targets[rng.below(targets.size())];
        const std::size_t p = parent[leaf];
        const std::size_t slot = detail::child_slot(nodes, p, leaf);
        std::vector<Node> next = nodes;
        next[p].weights.erase(next[p].weights.begin() + static_cast<long>(slot));
        --next[p].arity;
        next.erase(next.begin() + static_cast<long>(leaf));
        return rebuild(std::move(next));
    }
    case MutationKind::replace_leaf: {
        std::vector<std::size_t> leaves;
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            if (nodes[i].is_leaf()) {
                leaves.push_back(i);
            }
        }
        if (leaves.empty()) {
            return std::nullopt;
        }
        const std::size_t leaf = leaves[rng.below(leaves.size())];
        std::vector<Node> next = nodes;
        if (t.dims() >= 2) {
            std::size_t feature = rng.below(t.dims() - 1);
            if (feature >= nodes[leaf].feature) {
                ++feature;
            }
            next[leaf].feature = feature;
        }
        return rebuild(std::move(next));
    }
    case MutationKind::replace_function: {
        const auto parent = node_parents(nodes);
        const auto depth = node_depths(nodes);
        std::vector<std::size_t> targets;
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            if (!nodes[i].is_leaf()) {
                targets.push_back(i);
            }
        }
        if (targets.empty()) {
            return std::nullopt;
        }
        const std::size_t target = targets[rng.below(targets.size())];
        std::vector<Node> replacement;
        if (parent[target] != 0 && rng.bernoulli(cfg.leaf_prob)) {
            replacement.push_back(Node::leaf(rng.below(t.dims())));
        } else {
            detail::grow(replacement, depth[target], t.dims(), cfg, rng);
        }
        return rebuild(detail::splice(nodes, target, subtree_end(nodes, target), replacement));
    }
    case MutationKind::perturb_params: {
        std::vector<Node> next = nodes;
        for (std::size_t i = 1; i < next.size(); ++i) {
            if (next[i].is_leaf()) {
                continue;
            }
            for (auto& w : next[i].weights) {
                w += rng.normal(0.0, cfg.param_sigma);
            }
            next[i].bias += rng.normal(0.0, cfg.param_sigma);
        }
        return rebuild(std::move(next));
    }
    }
    return std::nullopt;
}

// One mutation form drawn uniformly; inapplicable forms are redrawn up to
// max_retries times before the tree is returned unchanged.
inline NeuralTree mutate(const NeuralTree& t, const VariationConfig& cfg, RngStream& rng) {
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        const auto kind = static_cast<MutationKind>(rng.below(4));
        if (auto child = mutate_with(t, kind, cfg, rng)) {
            return std::move(*child);
        }
    }
    return t;
}

// Fills `count` offspring. Each step either crosses two selected parents
// (probability crossover_prob; each child then mutated with probability
// mutation_prob) or mutates one selected parent. `select(rng)` returns an
// index into `parents`.
template <typename Select>
std::vector<NeuralTree> make_offspring(std::span<const Individual> parents, std::size_t count,
                                       const VariationConfig& cfg, RngStream& rng, Select&& select) {
    if (parents.empty()) {
        throw ConfigError("offspring generation needs at least one parent");
    }
    std::vector<NeuralTree> offspring;
    offspring.reserve(count);
    while (offspring.size() < count) {
        if (rng.bernoulli(cfg.crossover_prob)) {
            const std::size_t first = select(rng);
            const std::size_t second = select(rng);
            auto [a, b] = crossover(parents[first].tree, parents[second].tree, cfg, rng);
            if (rng.bernoulli(cfg.mutation_prob)) {
                a = mutate(a, cfg, rng);
            }
            offspring.push_back(std::move(a));
            if (offspring.size() < count) {
                if (rng.bernoulli(cfg.mutation_prob)) {
                    b = mutate(b, cfg, rng);
                }
                offspring.push_back(std::move(b));
            }
        } else {
            offspring.push_back(mutate(parents[select(rng)].tree, cfg, rng));
        }
    }
    return offspring;
}

} // namespace mont
