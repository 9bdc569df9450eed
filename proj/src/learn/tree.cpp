#include "vlp/learn/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace vlp::learn {

int Tree::leaf_index(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
}

int Tree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int best = 0;
    while (!stack.empty()) {
        const auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        if (!n.is_leaf()) {
            stack.emplace_back(n.left, d + 1);
            stack.emplace_back(n.right, d + 1);
        }
    }
    return best;
}

double split_threshold(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

namespace {

class CartBuilder {
public:
    CartBuilder(const FeatureMatrix& x, std::span<const double> y, const TreeParams& params, Rng& rng)
        : x_(x), y_(y), params_(params), rng_(rng) {}

    Tree build(std::vector<int> rows) {
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<int>& rows, int depth) {
        const int index = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double sum = 0.0;
        for (int r : rows) sum += y_[static_cast<std::size_t>(r)];
        const double n = static_cast<double>(rows.size());
        const double mean = sum / n;
        tree_.nodes[static_cast<std::size_t>(index)].value = mean;

        const bool constant = std::all_of(rows.begin(), rows.end(), [&](int r) {
            return y_[static_cast<std::size_t>(r)] == y_[static_cast<std::size_t>(rows.front())];
        });
        const int min_leaf = std::max(1, params_.min_leaf);
        if (constant || (params_.max_depth >= 0 && depth >= params_.max_depth) ||
            rows.size() < 2 * static_cast<std::size_t>(min_leaf))
            return index;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = -std::numeric_limits<double>::infinity();
        std::vector<int> sorted = rows;
        for (int f : candidate_features()) {
            const auto col = static_cast<std::size_t>(f);
            std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
                return x_(static_cast<std::size_t>(a), col) < x_(static_cast<std::size_t>(b), col);
            });
            // Maximizing SL^2/nL + SR^2/nR minimizes the children's squared error.
            double left = 0.0;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                left += y_[static_cast<std::size_t>(sorted[i])];
                const double xa = x_(static_cast<std::size_t>(sorted[i]), col);
                const double xb = x_(static_cast<std::size_t>(sorted[i + 1]), col);
                if (!(xa < xb)) continue;
                const std::size_t nl = i + 1, nr = sorted.size() - nl;
                if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf)) continue;
                const double right = sum - left;
                const double score = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr);
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = split_threshold(xa, xb);
                }
            }
        }
        if (best_feature < 0) return index;

        std::vector<int> left_rows, right_rows;
        for (int r : rows) {
            (x_(static_cast<std::size_t>(r), static_cast<std::size_t>(best_feature)) <= best_threshold ? left_rows
                                                                                                       : right_rows)
                .push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(left_rows, depth + 1);
        const int r = grow(right_rows, depth + 1);
        TreeNode& node = tree_.nodes[static_cast<std::size_t>(index)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return index;
    }

    std::vector<int> candidate_features() {
        const int d = static_cast<int>(x_.cols());
        std::vector<int> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        const int k = params_.feature_subset_size;
        if (k <= 0 || k >= d) return all;
        // Partial Fisher-Yates, then ascending so ties still favour low indices.
        for (int i = 0; i < k; ++i) {
            std::uniform_int_distribution<int> pick(i, d - 1);
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng_))]);
        }
        all.resize(static_cast<std::size_t>(k));
        std::sort(all.begin(), all.end());
        return all;
    }

    const FeatureMatrix& x_;
    std::span<const double> y_;
    const TreeParams& params_;
    Rng& rng_;
    Tree tree_;
};

}  // namespace

Tree fit_tree(const FeatureMatrix& x, std::span<const double> y, const TreeParams& params, Rng& rng,
              std::span<const int> rows) {
    if (x.rows() == 0 || x.rows() != y.size()) throw std::invalid_argument("fit_tree needs matching, non-empty data");
    std::vector<int> idx;
    if (rows.empty()) {
        idx.resize(x.rows());
        std::iota(idx.begin(), idx.end(), 0);
    } else {
        idx.assign(rows.begin(), rows.end());
    }
    return CartBuilder(x, y, params, rng).build(std::move(idx));
}

}  // namespace vlp::learn
