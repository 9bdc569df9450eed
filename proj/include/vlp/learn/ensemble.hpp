#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vlp/learn/tree.hpp"

namespace vlp::learn {

struct TreeEnsemble {
    enum class Combine { Mean, Additive };

    Combine combine = Combine::Mean;
    double base_score = 0.0;
    double learning_rate = 1.0;
    std::vector<Tree> trees;

    // Mean: average of tree outputs. Additive: base + lr * sum, accumulated
    // tree by tree in training order.
    double predict(std::span<const double> x) const;
    // Additive prediction using only the first `n` trees.
    double predict_prefix(std::span<const double> x, std::size_t n) const;

    friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;
};

struct ForestParams {
    int n_trees = 150;
    bool bootstrap = true;
    TreeParams tree;
};

TreeEnsemble fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params,
                        std::uint64_t seed, int threads = 1);

struct GbtParams {
    int rounds = 150;
    double learning_rate = 0.3;
    int max_depth = 6;  // -1: unlimited
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
};

// -G / (H + lambda)
double gbt_leaf_weight(double grad_sum, double hess_sum, double lambda);

// Gain of splitting (G, H) into (GL, HL) + (GR, HR).
double gbt_split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma);

// Squared loss: gradients pred - y, hessians 1; base score is the target mean.
// Leaves store the raw weight; the learning rate is applied at prediction.
// `on_round` (optional) sees the training predictions after each round.
TreeEnsemble fit_gbt(const FeatureMatrix& x, std::span<const double> y, const GbtParams& params,
                     std::uint64_t seed,
                     const std::function<void(int, std::span<const double>)>& on_round = {});

}  // namespace vlp::learn
