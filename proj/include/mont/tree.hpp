#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mont {

enum class Activation { gaussian, sigmoid, tanh };

inline std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::gaussian: return "gaussian";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    }
    return "gaussian";
}

inline std::optional<Activation> parse_activation(std::string_view s) {
    if (s == "gaussian") return Activation::gaussian;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "tanh") return Activation::tanh;
    return std::nullopt;
}

inline double activate(Activation a, double y) {
    switch (a) {
    case Activation::gaussian: return std::exp(-y * y);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-y));
    case Activation::tanh: return std::tanh(y);
    }
    return y;
}

// One node of a tree stored in pre-order. A leaf has arity 0 and reads one
// input feature; an internal node holds one weight per child and a bias.
// The root (index 0) is purely structural: its weights and bias are unused.
struct Node {
    int arity = 0;
    std::size_t feature = 0;
    double bias = 0.0;
    std::vector<double> weights;

    bool is_leaf() const noexcept { return arity == 0; }

    static Node leaf(std::size_t feature) { return Node{0, feature, 0.0, {}}; }
    static Node internal(std::vector<double> weights, double bias) {
        return Node{static_cast<int>(weights.size()), 0, bias, std::move(weights)};
    }

    friend bool operator==(const Node&, const Node&) = default;
};

struct TreeLimits {
    int max_arity = 5;
    int max_height = 10;

    friend bool operator==(const TreeLimits&, const TreeLimits&) = default;
};

// Multi-output neural tree. The root has one child per class; child k's
// output is the score of class k. Trees are values: operators build new ones.
class NeuralTree {
public:
    NeuralTree() = default;
    NeuralTree(std::vector<Node> nodes, std::size_t classes, std::size_t dims, Activation activation,
               TreeLimits limits = {})
        : nodes_(std::move(nodes)), classes_(classes), dims_(dims), activation_(activation), limits_(limits) {}

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t classes() const noexcept { return classes_; }
    std::size_t dims() const noexcept { return dims_; }
    Activation activation() const noexcept { return activation_; }
    const TreeLimits& limits() const noexcept { return limits_; }

    friend bool operator==(const NeuralTree&, const NeuralTree&) = default;

private:
    std::vector<Node> nodes_;
    std::size_t classes_ = 0;
    std::size_t dims_ = 0;
    Activation activation_ = Activation::gaussian;
    TreeLimits limits_;
};

// One past the last node of the subtree rooted at `index`.
inline std::size_t subtree_end(std::span<const Node> nodes, std::size_t index) {
    std::size_t pending = 1;
    std::size_t i = index;
    while (pending > 0 && i < nodes.size()) {
        pending += static_cast<std::size_t>(std::max(nodes[i].arity, 0));
        --pending;
        ++i;
    }
    return i;
}

// Depth of every node, root at depth 0.
inline std::vector<int> node_depths(std::span<const Node> nodes) {
    std::vector<int> depth(nodes.size(), 0);
    std::vector<std::pair<int, int>> stack; // (depth of children, children left)
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        while (!stack.empty() && stack.back().second == 0) {
            stack.pop_back();
        }
        if (!stack.empty()) {
            depth[i] = stack.back().first;
            --stack.back().second;
        }
        if (nodes[i].arity > 0) {
            stack.emplace_back(depth[i] + 1, nodes[i].arity);
        }
    }
    return depth;
}

// Parent index of every node; the root's parent is itself.
inline std::vector<std::size_t> node_parents(std::span<const Node> nodes) {
    std::vector<std::size_t> parent(nodes.size(), 0);
    std::vector<std::pair<std::size_t, int>> stack;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        while (!stack.empty() && stack.back().second == 0) {
            stack.pop_back();
        }
        if (!stack.empty()) {
            parent[i] = stack.back().first;
            --stack.back().second;
        }
        if (nodes[i].arity > 0) {
            stack.emplace_back(i, nodes[i].arity);
        }
    }
    return parent;
}

inline std::size_t tree_size(const NeuralTree& tree) { return tree.nodes().size(); }

inline int tree_height(const NeuralTree& tree) {
    const auto depth = node_depths(tree.nodes());
    return depth.empty() ? 0 : *std::max_element(depth.begin(), depth.end());
}

namespace detail {

inline double evaluate_from(const NeuralTree& tree, std::size_t& pos, std::span<const double> x,
                            std::size_t* visits) {
    const Node& node = tree.nodes()[pos++];
    if (visits != nullptr) {
        ++*visits;
    }
    if (node.is_leaf()) {
        return x[node.feature];
    }
    double y = node.bias;
    for (int c = 0; c < node.arity; ++c) {
        y += node.weights[static_cast<std::size_t>(c)] * evaluate_from(tree, pos, x, visits);
    }
    return activate(tree.activation(), y);
}

} // namespace detail

// Output of the subtree rooted at `index`, computed depth-first in pre-order.
inline double evaluate_node(const NeuralTree& tree, std::size_t index, std::span<const double> x,
                            std::size_t* visits = nullptr) {
    std::size_t pos = index;
    return detail::evaluate_from(tree, pos, x, visits);
}

// Writes the r class scores into `scores` (size r). The root adds no arithmetic.
inline void class_scores(const NeuralTree& tree, std::span<const double> x, std::span<double> scores,
                         std::size_t* visits = nullptr) {
    std::size_t pos = 1;
    for (std::size_t k = 0; k < tree.classes(); ++k) {
        scores[k] = detail::evaluate_from(tree, pos, x, visits);
    }
}

inline std::vector<double> class_scores(const NeuralTree& tree, std::span<const double> x) {
    std::vector<double> scores(tree.classes());
    class_scores(tree, x, scores);
    return scores;
}

// Argmax with ties going to the lowest class index.
inline int argmax_class(std::span<const double> scores) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[best]) {
            best = k;
        }
    }
    return static_cast<int>(best);
}

inline int predict(const NeuralTree& tree, std::span<const double> x) {
    double buffer[64];
    if (tree.classes() <= 64) {
        std::span<double> scores(buffer, tree.classes());
        class_scores(tree, x, scores);
        return argmax_class(scores);
    }
    const auto scores = class_scores(tree, x);
    return argmax_class(scores);
}

// Every broken structural invariant, one message each; empty means valid.
inline std::vector<std::string> validate(const NeuralTree& tree) {
    std::vector<std::string> violations;
    const auto& nodes = tree.nodes();
    if (nodes.empty()) {
        violations.emplace_back("empty tree");
        return violations;
    }
    if (tree.classes() < 2) {
        violations.emplace_back("class count below 2");
    }
    if (subtree_end(nodes, 0) != nodes.size() ||
        [&] {
            long pending = 1;
            for (const auto& n : nodes) {
                pending += std::max(n.arity, 0) - 1;
            }
            return pending != 0;
        }()) {
        // the root's subtree must consume exactly every node
        violations.emplace_back("malformed pre-order sequence");
        return violations;
    }
    if (static_cast<std::size_t>(nodes[0].arity) != tree.classes()) {
        violations.emplace_back("root arity " + std::to_string(nodes[0].arity) + " != class count " +
                                std::to_string(tree.classes()));
    }

    const auto depth = node_depths(nodes);
    const auto parent = node_parents(nodes);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        const std::string at = " at node " + std::to_string(i);
        if (n.arity < 0) {
            violations.push_back("negative arity" + at);
            continue;
        }
        if (n.is_leaf()) {
            if (parent[i] == 0) {
                violations.push_back("root child is a leaf" + at);
            }
            if (n.feature >= tree.dims()) {
                violations.push_back("leaf feature " + std::to_string(n.feature) + " out of range" + at);
            }
            continue;
        }
        if (n.arity < 2) {
            violations.push_back("min arity 2 violated" + at);
        }
        if (n.arity > tree.limits().max_arity) {
            violations.push_back("max arity " + std::to_string(tree.limits().max_arity) + " exceeded" + at);
        }
        if (n.weights.size() != static_cast<std::size_t>(n.arity)) {
            violations.push_back("weights length differs from arity" + at);
        }
        const bool finite = std::isfinite(n.bias) &&
                            std::all_of(n.weights.begin(), n.weights.end(), [](double w) { return std::isfinite(w); });
        if (!finite) {
            violations.push_back("non-finite parameter" + at);
        }
    }
    const int height = *std::max_element(depth.begin(), depth.end());
    if (height > tree.limits().max_height) {
        violations.push_back("height " + std::to_string(height) + " exceeds limit " +
                             std::to_string(tree.limits().max_height));
    }
    return violations;
}

inline bool is_valid(const NeuralTree& tree) { return validate(tree).empty(); }

namespace detail {

inline std::string format_weight(double w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", w);
    std::string s(buf);
    if (s == "-0.000") {
        s = "0.000";
    }
    return s;
}

} // namespace detail

// Graphviz digraph: internal nodes v<k> (pre-order among internal nodes) with
// their activation, leaves x<i> by feature index, edges carry weights.
inline std::string to_dot(const NeuralTree& tree) {
    const auto& nodes = tree.nodes();
    const auto parent = node_parents(nodes);
    std::ostringstream out;
    out << "digraph mont {\n";
    out << "  node [shape=circle];\n";
    int internal = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        out << "  n" << i << " [label=\"";
        if (i == 0) {
            out << "v" << internal++ << "\", shape=doublecircle];\n";
        } else if (nodes[i].is_leaf()) {
            out << "x" << nodes[i].feature << "\", shape=box];\n";
        } else {
            out << "v" << internal++ << "\\n" << to_string(tree.activation()) << "\\nb=" << detail::format_weight(nodes[i].bias)
                << "\", style=filled, fillcolor=lightgray];\n";
        }
    }
    std::vector<int> next_child(nodes.size(), 0);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const std::size_t p = parent[i];
        const int slot = next_child[p]++;
        out << "  n" << p << " -> n" << i << " [label=\"";
        if (p == 0) {
            out << "c" << slot;
        } else {
            out << detail::format_weight(nodes[p].weights[static_cast<std::size_t>(slot)]);
        }
        out << "\"];\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace mont
