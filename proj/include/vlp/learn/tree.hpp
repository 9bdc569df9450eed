#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vlp/learn/matrix.hpp"
#include "vlp/rng.hpp"

namespace vlp::learn {

struct TreeNode {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Samples with x[feature] <= threshold go left.
struct Tree {
    std::vector<TreeNode> nodes;

    int leaf_index(std::span<const double> x) const;
    double predict(std::span<const double> x) const { return nodes[static_cast<std::size_t>(leaf_index(x))].value; }
    int depth() const;
    friend bool operator==(const Tree&, const Tree&) = default;
};

struct TreeParams {
    int max_depth = -1;          // -1: unlimited
    int min_leaf = 1;
    int feature_subset_size = 0; // 0: all features at every split
};

// Greedy CART with squared error. Candidate thresholds are midpoints between
// consecutive distinct sorted values; ties go to the lowest feature index,
// then the lowest threshold. `rows` may repeat indices (bootstrap); empty
// means every row once.
Tree fit_tree(const FeatureMatrix& x, std::span<const double> y, const TreeParams& params, Rng& rng,
              std::span<const int> rows = {});

// Midpoint of two consecutive distinct values, falling back to `lo` when the
// midpoint rounds up to `hi`.
double split_threshold(double lo, double hi);

}  // namespace vlp::learn
