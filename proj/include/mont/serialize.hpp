#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "mont/dataset.hpp"
#include "mont/errors.hpp"
#include "mont/metrics.hpp"
#include "mont/tree.hpp"

namespace mont {

inline constexpr int tree_schema_version = 1;

namespace detail {

inline nlohmann::json node_to_json(const NeuralTree& tree, std::size_t& pos) {
    const std::size_t index = pos++;
    const Node& node = tree.nodes()[index];
    nlohmann::json j;
    if (node.is_leaf()) {
        j["kind"] = "leaf";
        j["feature"] = node.feature;
        return j;
    }
    const bool root = index == 0;
    j["kind"] = root ? "root" : "internal";
    if (!root) {
        j["activation"] = std::string(to_string(tree.activation()));
        j["bias"] = node.bias;
        j["weights"] = node.weights;
    }
    j["children"] = nlohmann::json::array();
    for (int c = 0; c < node.arity; ++c) {
        j["children"].push_back(node_to_json(tree, pos));
    }
    return j;
}

inline void node_from_json(const nlohmann::json& j, std::vector<Node>& out, Activation activation, bool root) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "leaf") {
        out.push_back(Node::leaf(j.at("feature").get<std::size_t>()));
        return;
    }
    if (kind != (root ? "root" : "internal")) {
        throw DataError("unexpected node kind '" + kind + "'");
    }
    const auto& children = j.at("children");
    Node node;
    node.arity = static_cast<int>(children.size());
    if (!root) {
        if (j.contains("activation") && parse_activation(j["activation"].get<std::string>()) != activation) {
            throw DataError("node activation differs from the tree activation");
        }
        node.bias = j.at("bias").get<double>();
        node.weights = j.at("weights").get<std::vector<double>>();
    }
    out.push_back(std::move(node));
    for (const auto& child : children) {
        node_from_json(child, out, activation, false);
    }
}

} // namespace detail

inline nlohmann::json tree_to_json(const NeuralTree& tree) {
    nlohmann::json j;
    j["schema_version"] = tree_schema_version;
    j["activation"] = std::string(to_string(tree.activation()));
    j["classes"] = tree.classes();
    j["features"] = tree.dims();
    j["max_arity"] = tree.limits().max_arity;
    j["max_height"] = tree.limits().max_height;
    j["size"] = tree_size(tree);
    std::size_t pos = 0;
    j["root"] = detail::node_to_json(tree, pos);
    return j;
}

// Parses and validates a tree; throws DataError on any schema or structure problem.
inline NeuralTree tree_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != tree_schema_version) {
            throw DataError("unsupported tree schema version");
        }
        const auto activation = parse_activation(j.at("activation").get<std::string>());
        if (!activation) {
            throw DataError("unknown activation in tree");
        }
        std::vector<Node> nodes;
        detail::node_from_json(j.at("root"), nodes, *activation, true);
        NeuralTree tree(std::move(nodes), j.at("classes").get<std::size_t>(), j.at("features").get<std::size_t>(),
                        *activation, TreeLimits{j.at("max_arity").get<int>(), j.at("max_height").get<int>()});
        const auto violations = validate(tree);
        if (!violations.empty()) {
            throw DataError("invalid tree: " + violations.front());
        }
        return tree;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed tree JSON: ") + e.what());
    }
}

// A trained tree plus everything needed to score raw CSV rows.
struct Model {
    NeuralTree tree;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::vector<std::vector<std::string>> categories;
    NormalizationParams normalization;
    std::string label_column;
    double train_error = 0.0;
    double test_error = 0.0;
};

inline nlohmann::json model_to_json(const Model& m) {
    nlohmann::json j;
    j["schema_version"] = tree_schema_version;
    j["kind"] = "mont-model";
    j["tree"] = tree_to_json(m.tree);
    j["feature_names"] = m.feature_names;
    j["class_names"] = m.class_names;
    j["categories"] = m.categories;
    j["normalization"] = {{"min", m.normalization.min}, {"max", m.normalization.max}};
    j["label_column"] = m.label_column;
    j["train_error"] = m.train_error;
    j["test_error"] = m.test_error;
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "mont-model") {
            throw DataError("not a model file");
        }
        Model m;
        m.tree = tree_from_json(j.at("tree"));
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        m.categories = j.at("categories").get<std::vector<std::vector<std::string>>>();
        m.normalization.min = j.at("normalization").at("min").get<std::vector<double>>();
        m.normalization.max = j.at("normalization").at("max").get<std::vector<double>>();
        m.label_column = j.at("label_column").get<std::string>();
        m.train_error = j.at("train_error").get<double>();
        m.test_error = j.at("test_error").get<double>();
        if (m.feature_names.size() != m.tree.dims() || m.class_names.size() != m.tree.classes() ||
            m.normalization.min.size() != m.tree.dims() || m.normalization.max.size() != m.tree.dims() ||
            m.categories.size() != m.tree.dims()) {
            throw DataError("model metadata does not match the tree dimensions");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model JSON: ") + e.what());
    }
}

inline nlohmann::json record_to_json(const RunRecord& r) {
    return {{"dataset", r.dataset},       {"optimizer", r.optimizer},   {"activation", r.activation},
            {"seed", r.seed},             {"run", r.run},               {"best_tree_id", r.best_tree_id},
            {"train_f1", r.train_error},  {"test_f1", r.test_error},    {"tree_size", r.tree_size},
            {"hv_test", r.hv_test},       {"wall_seconds", r.wall_seconds}};
}

inline RunRecord record_from_json(const nlohmann::json& j) {
    try {
        RunRecord r;
        r.dataset = j.at("dataset").get<std::string>();
        r.optimizer = j.at("optimizer").get<std::string>();
        r.activation = j.at("activation").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.run = j.at("run").get<std::size_t>();
        r.best_tree_id = j.at("best_tree_id").get<std::size_t>();
        r.train_error = j.at("train_f1").get<double>();
        r.test_error = j.at("test_f1").get<double>();
        r.tree_size = j.at("tree_size").get<std::size_t>();
        r.hv_test = j.at("hv_test").get<double>();
        r.wall_seconds = j.at("wall_seconds").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed run record: ") + e.what());
    }
}

inline nlohmann::json confusion_to_json(const ConfusionMatrix& cm) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < cm.classes; ++t) {
        std::vector<std::size_t> row;
        for (std::size_t p = 0; p < cm.classes; ++p) {
            row.push_back(cm.at(t, p));
        }
        rows.push_back(row);
    }
    return {{"classes", cm.classes}, {"counts", rows}};
}

} // namespace mont
