#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vlp/errors.hpp"
#include "vlp/learn/model.hpp"

using namespace vlp;
using namespace vlp::learn;

namespace {

FeatureMatrix matrix(const std::vector<std::vector<double>>& rows) {
    FeatureMatrix m(0, rows.front().size());
    for (const auto& r : rows) m.append_row(r);
    return m;
}

struct Synthetic {
    FeatureMatrix x{0, 8};
    std::vector<double> y;
};

// y = sum of features + noise.
Synthetic synthetic(int n, std::uint64_t seed, int cols = 8) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.1);
    Synthetic s;
    s.x = FeatureMatrix(0, static_cast<std::size_t>(cols));
    for (int i = 0; i < n; ++i) {
        std::vector<double> row;
        double sum = 0.0;
        for (int f = 0; f < cols; ++f) {
            row.push_back(u(rng));
            sum += row.back();
        }
        s.x.append_row(row);
        s.y.push_back(sum + noise(rng));
    }
    return s;
}

double sse(const std::function<double(std::span<const double>)>& f, const Synthetic& s) {
    double e = 0.0;
    for (std::size_t r = 0; r < s.x.rows(); ++r) e += std::pow(f(s.x.row(r)) - s.y[r], 2);
    return e;
}

TrainingSet position_set(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TrainingSet ts;
    for (int i = 0; i < n; ++i) {
        vision::FeatureVector f;
        for (auto& v : f) v = 800.0 + 300.0 * u(rng);
        ts.add(f, {f[0] / 1000.0, f[1] / 1000.0 - f[2] / 2000.0, 1.3 + 0.001 * (f[3] - 800.0)});
    }
    return ts;
}

}  // namespace

TEST_CASE("constant targets give a single leaf") {
    const auto x = matrix({{1}, {2}, {3}});
    Rng rng(1);
    const Tree t = fit_tree(x, std::vector<double>{4, 4, 4}, {}, rng);
    REQUIRE(t.nodes.size() == 1);
    CHECK(t.nodes[0].value == 4.0);
    const Tree single = fit_tree(matrix({{5}}), std::vector<double>{2.5}, {}, rng);
    CHECK(single.nodes.size() == 1);
    CHECK(single.predict(std::vector<double>{100}) == 2.5);
}

TEST_CASE("one-dimensional step") {
    Rng rng(1);
    const Tree t = fit_tree(matrix({{0}, {1}, {2}, {3}}), std::vector<double>{0, 0, 1, 1}, {}, rng);
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == 1.5);
    CHECK(t.nodes[static_cast<std::size_t>(t.nodes[0].left)].value == 0.0);
    CHECK(t.nodes[static_cast<std::size_t>(t.nodes[0].right)].value == 1.0);
}

TEST_CASE("ties go to the lowest feature, then the lowest threshold") {
    Rng rng(1);
    const Tree t = fit_tree(matrix({{0, 0}, {1, 1}, {2, 2}, {3, 3}}), std::vector<double>{0, 0, 1, 1}, {}, rng);
    CHECK(t.nodes[0].feature == 0);
    const Tree sym = fit_tree(matrix({{0}, {1}, {2}}), std::vector<double>{0, 1, 0}, {1, 1, 0}, rng);
    CHECK(sym.nodes[0].threshold == 0.5);
    CHECK(split_threshold(1.0, 2.0) == 1.5);
    CHECK(split_threshold(1.0, std::nextafter(1.0, 2.0)) == 1.0);
}

TEST_CASE("fit_tree matches the exhaustive greedy oracle") {
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 200; ++k) {
        const auto c = oracle::random_tree_case(rng);
        CHECK(oracle::tree_case_gap(c) == 0.0);
    }
}

TEST_CASE("min_leaf and depth limits") {
    const auto s = synthetic(60, 3, 2);
    Rng rng(1);
    TreeParams p;
    p.min_leaf = 7;
    p.max_depth = 4;
    const Tree t = fit_tree(s.x, s.y, p, rng);
    CHECK(t.depth() <= 4);
    for (const auto& g : oracle::tree_partition(t, s.x)) CHECK(g.size() >= 7);
}

TEST_CASE("forest basics") {
    const auto train = synthetic(500, 10);
    const auto held = synthetic(500, 11);
    ForestParams one;
    one.n_trees = 1;
    one.bootstrap = false;
    const auto f1 = fit_forest(train.x, train.y, one, 5);
    Rng rng(derive_seed(5, {0}));
    const Tree t = fit_tree(train.x, train.y, one.tree, rng);
    for (std::size_t r = 0; r < held.x.rows(); ++r) CHECK(f1.predict(held.x.row(r)) == t.predict(held.x.row(r)));

    ForestParams many;
    many.n_trees = 60;
    const auto forest = fit_forest(train.x, train.y, many, 5);
    CHECK(sse([&](auto x) { return forest.predict(x); }, held) <= sse([&](auto x) { return t.predict(x); }, held));

    const auto again = fit_forest(train.x, train.y, many, 5, 3);
    CHECK(again == forest);
    CHECK_FALSE(fit_forest(train.x, train.y, many, 6) == forest);
}

TEST_CASE("gbt leaf weight and gain formulas") {
    CHECK(gbt_leaf_weight(-2.0, 4.0, 1.0) == doctest::Approx(0.4));
    CHECK(gbt_split_gain(-2, 2, 2, 2, 0, 0) == doctest::Approx(0.5 * (2.0 + 2.0 - 0.0)));
    CHECK(gbt_split_gain(-2, 2, 2, 2, 0, 1.5) == doctest::Approx(0.5));

    // Single leaf: four rows with residual sum -2 around a zero base.
    const auto x = matrix({{1}, {1}, {1}, {1}});
    const std::vector<double> y{1.0, 0.5, 0.5, 0.0};
    GbtParams p;
    p.rounds = 1;
    const auto m = fit_gbt(x, y, p, 1);
    CHECK(m.base_score == 0.5);
    REQUIRE(m.trees.size() == 1);
    CHECK(m.trees[0].nodes.size() == 1);
    CHECK(m.trees[0].nodes[0].value == 0.0);
}

TEST_CASE("one unregularized round interpolates distinct rows") {
    const auto s = synthetic(40, 21);
    GbtParams p;
    p.rounds = 1;
    p.learning_rate = 1.0;
    p.lambda = 0.0;
    p.max_depth = -1;
    const auto m = fit_gbt(s.x, s.y, p, 1);
    for (std::size_t r = 0; r < s.x.rows(); ++r) CHECK(m.predict(s.x.row(r)) == doctest::Approx(s.y[r]).epsilon(1e-12));
}

TEST_CASE("gbt training loss never increases") {
    const auto s = synthetic(300, 22);
    for (double lr : {0.3, 1.0}) {
        GbtParams p;
        p.learning_rate = lr;
        double prev = std::numeric_limits<double>::infinity();
        bool monotone = true;
        fit_gbt(s.x, s.y, p, 1, [&](int, std::span<const double> pred) {
            double e = 0.0;
            for (std::size_t r = 0; r < s.y.size(); ++r) e += std::pow(pred[r] - s.y[r], 2);
            // Once the fit interpolates, only round-off remains.
            monotone = monotone && e <= prev * (1 + 1e-12) + 1e-20;
            prev = e;
        });
        CHECK(monotone);
    }
}

TEST_CASE("gbt leaves equal -G/(H+lambda) from their rows") {
    const auto s = synthetic(200, 23);
    GbtParams p;
    p.rounds = 40;
    const auto m = fit_gbt(s.x, s.y, p, 1);
    std::mt19937_64 rng(5);
    CHECK(oracle::gbt_leaf_deviation(s.x, s.y, m, p.lambda, 100, rng) < 1e-10);
    for (std::size_t r = 0; r < 5; ++r) CHECK(m.predict_prefix(s.x.row(r), m.trees.size()) == m.predict(s.x.row(r)));
}

TEST_CASE("mlp gradient matches finite differences") {
    std::mt19937_64 rng(9);
    for (const auto& widths : std::vector<std::vector<int>>{{2, 3, 1}, {3, 5, 4, 1}, {8, 6, 6, 1}}) {
        auto net = oracle::random_micro_net(widths, rng);
        Eigen::MatrixXd x = Eigen::MatrixXd::Random(7, widths.front());
        Eigen::VectorXd y = Eigen::VectorXd::Random(7);
        CHECK(oracle::mlp_gradient_error(net, x, y, 0.0) < 1e-4);
        CHECK(oracle::mlp_gradient_error(net, x, y, 0.3) < 1e-4);
    }
}

TEST_CASE("untrained mlp predicts the target mean") {
    const auto s = synthetic(50, 30);
    MlpParams p;
    p.hidden = {16, 16};
    p.epochs = 0;
    const Mlp net = fit_mlp(s.x, s.y, p, 1);
    double mean = 0.0;
    for (double v : s.y) mean += v / static_cast<double>(s.y.size());
    for (std::size_t r = 0; r < 5; ++r) CHECK(net.predict(s.x.row(r)) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("mlp fits a linear target") {
    const auto train = synthetic(400, 31);
    const auto held = synthetic(200, 32);
    MlpParams p;
    p.hidden = {32, 32};
    p.epochs = 150;
    p.batch_size = 32;
    p.learning_rate = 3e-3;
    const Mlp net = fit_mlp(train.x, train.y, p, 7);
    double mean = 0.0, var = 0.0, mse = 0.0;
    for (double v : held.y) mean += v / static_cast<double>(held.y.size());
    for (std::size_t r = 0; r < held.x.rows(); ++r) {
        var += std::pow(held.y[r] - mean, 2);
        mse += std::pow(net.predict(held.x.row(r)) - held.y[r], 2);
    }
    // Targets carry N(0, 0.1) noise, so even the true function scores 0.1 RMSE.
    const double n = static_cast<double>(held.y.size());
    CHECK(std::sqrt(mse / n) < 2.0 * 0.1);
    CHECK(mse < 0.1 * var);
    CHECK(fit_mlp(train.x, train.y, p, 7).parameters() == net.parameters());
}

TEST_CASE("training set validation") {
    TrainingSet ts;
    CHECK_THROWS_AS(ts.validate(), InvalidTrainingSet);
    ts.add({1, 2, 3, 4, 5, 6, 7, 8}, {0, 0, 1});
    CHECK_NOTHROW(ts.validate());
    ts.add({1, 2, 3, 4, 5, 6, 7, NAN}, {0, 0, 1});
    CHECK_THROWS_AS(ts.validate(), InvalidTrainingSet);
    CHECK_THROWS_AS(fit_position_model(ts, ModelKind::Gbt, {}, 1), InvalidTrainingSet);
}

TEST_CASE("position models") {
    const auto ts = position_set(150, 40);
    ModelParams p;
    p.forest.n_trees = 20;
    p.gbt.rounds = 30;
    p.mlp.hidden = {8};
    p.mlp.epochs = 3;

    ForestParams overfit;
    overfit.bootstrap = false;
    overfit.n_trees = 3;
    ModelParams po = p;
    po.forest = overfit;
    const auto forest = fit_position_model(ts, ModelKind::Forest, po, 2);
    for (std::size_t r = 0; r < 20; ++r) {
        vision::FeatureVector f;
        std::copy(ts.features.row(r).begin(), ts.features.row(r).end(), f.begin());
        const auto pred = forest.predict(f);
        CHECK(pred.x == doctest::Approx(ts.targets[r][0]).epsilon(1e-12));
        CHECK(pred.z == doctest::Approx(ts.targets[r][2]).epsilon(1e-12));
    }

    // Permuting target columns permutes the axis models.
    TrainingSet swapped = ts;
    for (auto& t : swapped.targets) std::swap(t[0], t[2]);
    const auto a = fit_position_model(ts, ModelKind::Gbt, p, 3);
    const auto b = fit_position_model(swapped, ModelKind::Gbt, p, 3);
    CHECK(std::get<TreeEnsemble>(a.axes[0]).trees == std::get<TreeEnsemble>(b.axes[2]).trees);
    CHECK(std::get<TreeEnsemble>(a.axes[1]) == std::get<TreeEnsemble>(b.axes[1]));

    for (ModelKind kind : {ModelKind::SingleTree, ModelKind::Forest, ModelKind::Gbt, ModelKind::Mlp}) {
        const auto m = fit_position_model(ts, kind, p, 4, 2);
        const auto back = model_from_json(model_to_json(m));
        CHECK(model_to_json(back) == model_to_json(m));
        CHECK(model_to_json(fit_position_model(ts, kind, p, 4, 1)) == model_to_json(m));
        std::mt19937_64 rng(kind == ModelKind::Mlp ? 1 : 2);
        std::uniform_real_distribution<double> u(400.0, 1200.0);
        for (int k = 0; k < 1000; ++k) {
            vision::FeatureVector f;
            for (auto& v : f) v = u(rng);
            const auto p1 = m.predict(f), p2 = back.predict(f);
            REQUIRE(p1.x == p2.x);
            REQUIRE(p1.y == p2.y);
            REQUIRE(p1.z == p2.z);
        }
    }
    CHECK_THROWS_AS(model_from_json("{\"format\":\"other\"}"), MalformedModel);
    CHECK_THROWS_AS(model_from_json("not json"), MalformedModel);
}

TEST_CASE("constant targets predict a constant") {
    TrainingSet ts;
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    for (int i = 0; i < 60; ++i) {
        vision::FeatureVector f;
        for (auto& v : f) v = u(rng);
        ts.add(f, {0.1, -0.2, 1.3});
    }
    ModelParams p;
    p.forest.n_trees = 10;
    p.gbt.rounds = 10;
    for (ModelKind kind : {ModelKind::SingleTree, ModelKind::Forest, ModelKind::Gbt}) {
        const auto m = fit_position_model(ts, kind, p, 1);
        for (int k = 0; k < 20; ++k) {
            vision::FeatureVector f;
            for (auto& v : f) v = u(rng);
            const auto pred = m.predict(f);
            CHECK(pred.x == doctest::Approx(0.1).epsilon(1e-12));
            CHECK(pred.z == doctest::Approx(1.3).epsilon(1e-12));
        }
    }
}

TEST_CASE("tree models are invariant to increasing affine feature maps") {
    const auto ts = position_set(200, 60);
    TrainingSet scaled = ts;
    const std::size_t col = 3;
    const double a = 4.0, b = -250.0;  // exact in binary, so midpoints map exactly
    for (std::size_t r = 0; r < scaled.features.rows(); ++r) scaled.features(r, col) = a * scaled.features(r, col) + b;
    ModelParams p;
    p.forest.n_trees = 15;
    p.gbt.rounds = 25;
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(500.0, 1100.0);
    for (ModelKind kind : {ModelKind::SingleTree, ModelKind::Forest, ModelKind::Gbt}) {
        const auto m1 = fit_position_model(ts, kind, p, 9);
        const auto m2 = fit_position_model(scaled, kind, p, 9);
        for (int k = 0; k < 200; ++k) {
            vision::FeatureVector f;
            for (auto& v : f) v = u(rng);
            vision::FeatureVector g = f;
            g[col] = a * g[col] + b;
            const auto p1 = m1.predict(f), p2 = m2.predict(g);
            CHECK(p1.x == p2.x);
            CHECK(p1.y == p2.y);
            CHECK(p1.z == p2.z);
        }
    }
}
