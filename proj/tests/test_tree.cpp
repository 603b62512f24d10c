#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "support.hpp"

using namespace mont;

namespace {

// Pre-order tree from a class count and per-class subtrees already flattened.
NeuralTree with_root(std::size_t classes, std::size_t dims, std::vector<Node> body,
                     Activation activation = Activation::sigmoid, TreeLimits limits = {}) {
    Node root;
    root.arity = static_cast<int>(classes);
    body.insert(body.begin(), root);
    return NeuralTree(std::move(body), classes, dims, activation, limits);
}

bool mentions(const std::vector<std::string>& violations, const std::string& needle) {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

} // namespace

TEST(Activation, Formulas) {
    EXPECT_DOUBLE_EQ(activate(Activation::sigmoid, 0.0), 0.5);
    EXPECT_DOUBLE_EQ(activate(Activation::gaussian, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(activate(Activation::gaussian, 1.5), std::exp(-2.25));
    EXPECT_DOUBLE_EQ(activate(Activation::tanh, 0.7), std::tanh(0.7));
    EXPECT_DOUBLE_EQ(activate(Activation::sigmoid, 2.0), 1.0 / (1.0 + std::exp(-2.0)));
    for (auto a : {Activation::gaussian, Activation::sigmoid, Activation::tanh}) {
        EXPECT_EQ(parse_activation(to_string(a)), a);
    }
    EXPECT_FALSE(parse_activation("relu").has_value());
}

TEST(EvaluateNode, LeafPassesThroughItsFeature) {
    const auto tree = with_root(2, 3, {Node::internal({1, 1}, 0), Node::leaf(2), Node::leaf(0),
                                       Node::internal({1, 1}, 0), Node::leaf(1), Node::leaf(1)});
    const std::vector<double> x{0.1, 0.2, 0.9};
    EXPECT_EQ(evaluate_node(tree, 2, x), 0.9);
}

TEST(EvaluateNode, SigmoidOfZeroSumIsHalf) {
    const auto tree = test::minimal_tree(2, 2, Activation::sigmoid, 0.0, 0.0);
    const std::vector<double> x{1.0, 1.0};
    EXPECT_EQ(evaluate_node(tree, 1, x), 0.5);
}

TEST(EvaluateNode, GaussianOfZeroSumIsOne) {
    const auto tree = with_root(2, 2, {Node::internal({1, -1}, 0), Node::leaf(0), Node::leaf(1),
                                       Node::internal({1, 1}, 0), Node::leaf(0), Node::leaf(1)},
                                Activation::gaussian);
    const std::vector<double> x{0.3, 0.3};
    EXPECT_EQ(evaluate_node(tree, 1, x), 1.0);
}

TEST(EvaluateNode, NestedWeightedSum) {
    // class 0: tanh(0.5 * tanh(2*x0 - x1 + 0.1) + 3*x2 - 0.2)
    const auto tree = with_root(2, 3,
                                {Node::internal({0.5, 3.0}, -0.2), Node::internal({2.0, -1.0}, 0.1), Node::leaf(0),
                                 Node::leaf(1), Node::leaf(2), Node::internal({1, 1}, 0), Node::leaf(0),
                                 Node::leaf(1)},
                                Activation::tanh);
    const std::vector<double> x{0.4, 0.9, 0.25};
    const double inner = std::tanh(2 * 0.4 - 0.9 + 0.1);
    EXPECT_DOUBLE_EQ(class_scores(tree, x)[0], std::tanh(0.5 * inner + 3 * 0.25 - 0.2));
}

TEST(ClassScores, ShapeRangeAndSymmetry) {
    const auto tree = test::minimal_tree(3, 4, Activation::sigmoid, 0.0, 0.0);
    const std::vector<double> x{0.2, 0.4, 0.6, 0.8};
    EXPECT_EQ(class_scores(tree, x), (std::vector<double>{0.5, 0.5, 0.5}));

    auto nodes = std::vector<Node>{Node::internal({0.3, -0.7}, 0.2), Node::leaf(1), Node::leaf(3)};
    std::vector<Node> body;
    for (int k = 0; k < 3; ++k) body.insert(body.end(), nodes.begin(), nodes.end());
    const auto same = with_root(3, 4, body, Activation::gaussian);
    const auto s = class_scores(same, x);
    EXPECT_EQ(s[0], s[1]);
    EXPECT_EQ(s[1], s[2]);
}

TEST(ClassScores, ValuesStayInActivationCodomain) {
    VariationConfig cfg;
    RngStream rng(5, 1);
    for (auto a : {Activation::gaussian, Activation::sigmoid, Activation::tanh}) {
        for (int i = 0; i < 200; ++i) {
            const auto tree = random_tree(3, 4, a, cfg, rng);
            std::vector<double> x(4);
            for (auto& v : x) v = rng.uniform(-2.0, 2.0);
            for (double s : class_scores(tree, x)) {
                switch (a) {
                case Activation::gaussian: EXPECT_GE(s, 0.0); EXPECT_LE(s, 1.0); break;
                case Activation::sigmoid: EXPECT_GE(s, 0.0); EXPECT_LE(s, 1.0); break;
                case Activation::tanh: EXPECT_GE(s, -1.0); EXPECT_LE(s, 1.0); break;
                }
            }
        }
    }
}

TEST(ClassScores, VisitsEveryNonRootNodeOnce) {
    VariationConfig cfg;
    RngStream rng(9, 2);
    for (int i = 0; i < 300; ++i) {
        const auto tree = random_tree(3, 5, Activation::gaussian, cfg, rng);
        const std::vector<double> x(5, 0.5);
        std::vector<double> scores(3);
        std::size_t visits = 0;
        class_scores(tree, x, scores, &visits);
        EXPECT_EQ(visits, tree_size(tree) - 1);
    }
}

TEST(Predict, ArgmaxWithLowestIndexTieBreak) {
    EXPECT_EQ(argmax_class(std::vector<double>{0.2, 0.9, 0.1}), 1);
    EXPECT_EQ(argmax_class(std::vector<double>{0.5, 0.5, 0.5}), 0);
    EXPECT_EQ(argmax_class(std::vector<double>{0.1, 0.7, 0.7}), 1);
}

TEST(Predict, PureAcrossCallsAndThreads) {
    VariationConfig cfg;
    RngStream rng(3, 3);
    const auto tree = random_tree(4, 6, Activation::tanh, cfg, rng);
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x(6);
        for (auto& v : x) v = rng.uniform();
        xs.push_back(x);
    }
    std::vector<int> expected;
    for (const auto& x : xs) expected.push_back(predict(tree, x));
    std::vector<std::vector<int>> seen(4);
    {
        std::vector<std::jthread> threads;
        for (std::size_t t = 0; t < 4; ++t) {
            threads.emplace_back([&, t] {
                for (const auto& x : xs) seen[t].push_back(predict(tree, x));
            });
        }
    }
    for (const auto& s : seen) EXPECT_EQ(s, expected);
}

TEST(TreeSize, MinimalAndFullTrees) {
    const auto minimal = test::minimal_tree(2, 4);
    EXPECT_EQ(tree_size(minimal), 7u);
    EXPECT_EQ(tree_height(minimal), 2);

    std::vector<Node> binary;
    for (int k = 0; k < 2; ++k) test::full_subtree(binary, 2, 1, 4);
    EXPECT_EQ(tree_size(with_root(2, 4, binary)), 7u); // 2^(2+1) - 1

    std::vector<Node> ternary;
    for (int k = 0; k < 3; ++k) test::full_subtree(ternary, 3, 1, 4);
    const auto t3 = with_root(3, 4, ternary);
    EXPECT_EQ(tree_size(t3), 13u); // (3^3 - 1) / 2
    EXPECT_TRUE(is_valid(t3));
}

TEST(TreeHeight, DeepeningOneClassSubtree) {
    const auto tree = with_root(2, 4, {Node::internal({1, 1}, 0), Node::internal({1, 1}, 0), Node::leaf(0),
                                       Node::leaf(1), Node::leaf(2), Node::internal({1, 1}, 0), Node::leaf(0),
                                       Node::leaf(1)});
    EXPECT_EQ(tree_height(tree), 3);
    EXPECT_TRUE(is_valid(tree));
}

TEST(TreeSize, RootPlusSubtreeSizes) {
    VariationConfig cfg;
    RngStream rng(1, 4);
    for (int i = 0; i < 200; ++i) {
        const auto tree = random_tree(3, 4, Activation::sigmoid, cfg, rng);
        std::size_t sum = 1;
        std::size_t pos = 1;
        for (std::size_t k = 0; k < tree.classes(); ++k) {
            const auto end = subtree_end(tree.nodes(), pos);
            sum += end - pos;
            pos = end;
        }
        EXPECT_EQ(sum, tree_size(tree));
    }
}

TEST(Validate, MinimalTreeIsValid) {
    EXPECT_TRUE(validate(test::minimal_tree(2, 4)).empty());
    EXPECT_TRUE(validate(test::minimal_tree(7, 9)).empty());
}

TEST(Validate, RootArityMustMatchClassCount) {
    const auto tree = with_root(2, 4, {Node::internal({1, 1}, 0), Node::leaf(0), Node::leaf(1)});
    // root says arity 2 but only one subtree exists
    EXPECT_TRUE(mentions(validate(tree), "malformed"));
    auto nodes = test::minimal_tree(3, 4).nodes();
    const NeuralTree fewer(nodes, 4, 4, Activation::sigmoid);
    EXPECT_TRUE(mentions(validate(fewer), "root arity"));
}

TEST(Validate, UnaryInternalNode) {
    const auto tree = with_root(2, 4, {Node::internal({1}, 0), Node::leaf(0), Node::internal({1, 1}, 0),
                                       Node::leaf(0), Node::leaf(1)});
    EXPECT_TRUE(mentions(validate(tree), "min arity 2"));
}

TEST(Validate, OtherViolations) {
    EXPECT_TRUE(mentions(validate(NeuralTree{}), "empty"));
    EXPECT_TRUE(mentions(validate(with_root(2, 4, {Node::leaf(0), Node::internal({1, 1}, 0), Node::leaf(0),
                                                   Node::leaf(1)})),
                         "root child is a leaf"));
    EXPECT_TRUE(mentions(validate(with_root(2, 1, {Node::internal({1, 1}, 0), Node::leaf(0), Node::leaf(3),
                                                   Node::internal({1, 1}, 0), Node::leaf(0), Node::leaf(0)})),
                         "leaf feature 3 out of range"));
    auto nodes = test::minimal_tree(2, 4).nodes();
    nodes[1].weights.push_back(1.0);
    EXPECT_TRUE(mentions(validate(NeuralTree(nodes, 2, 4, Activation::sigmoid)), "weights length"));
    nodes = test::minimal_tree(2, 4).nodes();
    nodes[1].bias = std::nan("");
    EXPECT_TRUE(mentions(validate(NeuralTree(nodes, 2, 4, Activation::sigmoid)), "non-finite"));
    EXPECT_TRUE(mentions(validate(NeuralTree(test::minimal_tree(2, 4).nodes(), 2, 4, Activation::sigmoid, {5, 1})),
                         "height 2 exceeds limit 1"));
    std::vector<Node> wide{Node::internal(std::vector<double>(6, 0.1), 0)};
    for (int c = 0; c < 6; ++c) wide.push_back(Node::leaf(0));
    wide.push_back(Node::internal({1, 1}, 0));
    wide.push_back(Node::leaf(0));
    wide.push_back(Node::leaf(0));
    EXPECT_TRUE(mentions(validate(with_root(2, 4, wide)), "max arity 5 exceeded"));
    EXPECT_TRUE(mentions(validate(NeuralTree(test::minimal_tree(2, 4).nodes(), 1, 4, Activation::sigmoid)),
                         "class count below 2"));
}

TEST(ToDot, MinimalTreeHasSevenNodeStatements) {
    const auto tree = test::minimal_tree(2, 4, Activation::gaussian, 0.25, -0.5);
    const auto dot = to_dot(tree);
    std::size_t statements = 0;
    std::istringstream in(dot);
    for (std::string line; std::getline(in, line);) {
        if (line.find("[label=") != std::string::npos && line.find("->") == std::string::npos) {
            ++statements;
        }
    }
    EXPECT_EQ(statements, 7u);
    EXPECT_EQ(dot, to_dot(tree));
    EXPECT_NE(dot.find("v1\\ngaussian\\nb=-0.500"), std::string::npos);
    EXPECT_NE(dot.find("[label=\"0.250\"]"), std::string::npos);
    EXPECT_NE(dot.find("[label=\"c1\"]"), std::string::npos);
}

TEST(ToDot, LeafLabelUsesFeatureIndex) {
    const auto tree = with_root(2, 5, {Node::internal({1, 1}, 0), Node::leaf(3), Node::leaf(0),
                                       Node::internal({-0.0001, 1.23456}, 0), Node::leaf(1), Node::leaf(1)});
    const auto dot = to_dot(tree);
    EXPECT_NE(dot.find("[label=\"x3\", shape=box]"), std::string::npos);
    EXPECT_NE(dot.find("[label=\"1.235\"]"), std::string::npos);
    EXPECT_EQ(dot.find("-0.000"), std::string::npos);
}
