#include "vlp/learn/ensemble.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vlp/parallel.hpp"

namespace vlp::learn {

double TreeEnsemble::predict(std::span<const double> x) const { return predict_prefix(x, trees.size()); }

double TreeEnsemble::predict_prefix(std::span<const double> x, std::size_t n) const {
    n = std::min(n, trees.size());
    if (combine == Combine::Mean) {
        if (n == 0) return 0.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += trees[i].predict(x);
        return sum / static_cast<double>(n);
    }
    double pred = base_score;
    for (std::size_t i = 0; i < n; ++i) pred += learning_rate * trees[i].predict(x);
    return pred;
}

TreeEnsemble fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params,
                        std::uint64_t seed, int threads) {
    if (params.n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
    if (x.rows() == 0 || x.rows() != y.size()) throw std::invalid_argument("fit_forest needs matching, non-empty data");
    TreeEnsemble forest;
    forest.combine = TreeEnsemble::Combine::Mean;
    forest.trees.resize(static_cast<std::size_t>(params.n_trees));
    parallel_for(forest.trees.size(), threads, [&](std::size_t t) {
        Rng rng(derive_seed(seed, {t}));
        std::vector<int> rows(x.rows());
        if (params.bootstrap) {
            std::uniform_int_distribution<int> draw(0, static_cast<int>(x.rows()) - 1);
            for (auto& r : rows) r = draw(rng);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        forest.trees[t] = fit_tree(x, y, params.tree, rng, rows);
    });
    return forest;
}

double gbt_leaf_weight(double grad_sum, double hess_sum, double lambda) { return -grad_sum / (hess_sum + lambda); }

double gbt_split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
    const double g = gl + gr, h = hl + hr;
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

namespace {

class BoostTreeBuilder {
public:
    BoostTreeBuilder(const FeatureMatrix& x, const std::vector<double>& grad, const GbtParams& params)
        : x_(x), grad_(grad), params_(params) {}

    Tree build() {
        std::vector<int> rows(x_.rows());
        std::iota(rows.begin(), rows.end(), 0);
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    // Rows stay in ascending order in every node, so leaf sums are reproducible.
    int grow(const std::vector<int>& rows, int depth) {
        const int index = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double g = 0.0;
        for (int r : rows) g += grad_[static_cast<std::size_t>(r)];
        const double h = static_cast<double>(rows.size());
        tree_.nodes[static_cast<std::size_t>(index)].value = gbt_leaf_weight(g, h, params_.lambda);
        if (params_.max_depth >= 0 && depth >= params_.max_depth) return index;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        std::vector<int> sorted = rows;
        for (std::size_t f = 0; f < x_.cols(); ++f) {
            std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
                return x_(static_cast<std::size_t>(a), f) < x_(static_cast<std::size_t>(b), f);
            });
            double gl = 0.0;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                gl += grad_[static_cast<std::size_t>(sorted[i])];
                const double xa = x_(static_cast<std::size_t>(sorted[i]), f);
                const double xb = x_(static_cast<std::size_t>(sorted[i + 1]), f);
                if (!(xa < xb)) continue;
                const double hl = static_cast<double>(i + 1), hr = h - hl;
                if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
                const double gain = gbt_split_gain(gl, hl, g - gl, hr, params_.lambda, params_.gamma);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = split_threshold(xa, xb);
                }
            }
        }
        if (best_feature < 0) return index;

        std::vector<int> left_rows, right_rows;
        for (int r : rows)
            (x_(static_cast<std::size_t>(r), static_cast<std::size_t>(best_feature)) <= best_threshold ? left_rows
                                                                                                       : right_rows)
                .push_back(r);
        const int l = grow(left_rows, depth + 1);
        const int r = grow(right_rows, depth + 1);
        TreeNode& node = tree_.nodes[static_cast<std::size_t>(index)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return index;
    }

    const FeatureMatrix& x_;
    const std::vector<double>& grad_;
    const GbtParams& params_;
    Tree tree_;
};

}  // namespace

TreeEnsemble fit_gbt(const FeatureMatrix& x, std::span<const double> y, const GbtParams& params, std::uint64_t,
                     const std::function<void(int, std::span<const double>)>& on_round) {
    if (x.rows() == 0 || x.rows() != y.size()) throw std::invalid_argument("fit_gbt needs matching, non-empty data");
    if (params.rounds < 0) throw std::invalid_argument("rounds must be non-negative");
    TreeEnsemble model;
    model.combine = TreeEnsemble::Combine::Additive;
    model.learning_rate = params.learning_rate;
    model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    std::vector<double> pred(y.size(), model.base_score);
    std::vector<double> grad(y.size());
    for (int round = 0; round < params.rounds; ++round) {
        for (std::size_t i = 0; i < y.size(); ++i) grad[i] = pred[i] - y[i];
        Tree tree = BoostTreeBuilder(x, grad, params).build();
        for (std::size_t i = 0; i < y.size(); ++i) pred[i] += model.learning_rate * tree.predict(x.row(i));
        model.trees.push_back(std::move(tree));
        if (on_round) on_round(round, pred);
    }
    return model;
}

}  // namespace vlp::learn
