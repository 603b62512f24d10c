#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mont/mont.hpp"

namespace mont::test {

// Root with r class nodes, each holding two leaves.
inline NeuralTree minimal_tree(std::size_t classes = 2, std::size_t dims = 4,
                               Activation activation = Activation::sigmoid, double weight = 0.0, double bias = 0.0) {
    std::vector<Node> nodes;
    Node root;
    root.arity = static_cast<int>(classes);
    nodes.push_back(root);
    for (std::size_t k = 0; k < classes; ++k) {
        nodes.push_back(Node::internal({weight, weight}, bias));
        nodes.push_back(Node::leaf(k % dims));
        nodes.push_back(Node::leaf((k + 1) % dims));
    }
    return NeuralTree(std::move(nodes), classes, dims, activation);
}

// Complete m-ary tree of the given height below a root with `classes` children.
inline void full_subtree(std::vector<Node>& out, int arity, int levels, std::size_t dims) {
    if (levels == 0) {
        out.push_back(Node::leaf(0 % dims));
        return;
    }
    out.push_back(Node::internal(std::vector<double>(static_cast<std::size_t>(arity), 0.5), 0.1));
    for (int c = 0; c < arity; ++c) {
        full_subtree(out, arity, levels - 1, dims);
    }
}

inline Dataset toy_dataset(std::size_t samples, std::size_t dims, std::size_t classes, std::uint64_t seed) {
    RngStream rng(seed, 77);
    Dataset ds;
    ds.name = "toy";
    for (std::size_t j = 0; j < dims; ++j) {
        ds.feature_names.push_back("f" + std::to_string(j));
    }
    ds.categories.assign(dims, {});
    for (std::size_t k = 0; k < classes; ++k) {
        ds.class_names.push_back("c" + std::to_string(k));
    }
    for (std::size_t i = 0; i < samples; ++i) {
        const int label = static_cast<int>(i % classes);
        ds.labels.push_back(label);
        for (std::size_t j = 0; j < dims; ++j) {
            const double centre = (j == 0) ? (label + 0.5) / static_cast<double>(classes) : 0.5;
            ds.features.push_back(std::clamp(centre + rng.normal(0.0, 0.1), 0.0, 1.0));
        }
    }
    return ds;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mont-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

} // namespace mont::test
