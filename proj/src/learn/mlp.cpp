#include "vlp/learn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vlp/rng.hpp"

namespace vlp::learn {

namespace {

struct Gradients {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
};

// Columns are samples.
double backprop(const Mlp& net, const Eigen::MatrixXd& xt, const Eigen::VectorXd& y, double l2, Gradients* grad) {
    const auto& W = net.weights();
    const auto& B = net.biases();
    const std::size_t layers = W.size();
    const double n = static_cast<double>(xt.cols());
    std::vector<Eigen::MatrixXd> act(layers + 1);
    act[0] = xt;
    for (std::size_t l = 0; l < layers; ++l) {
        act[l + 1] = (W[l] * act[l]).colwise() + B[l];
        if (l + 1 < layers) act[l + 1] = act[l + 1].cwiseMax(0.0);
    }
    const Eigen::RowVectorXd err = act[layers].row(0) - y.transpose();
    double penalty = 0.0;
    for (const auto& w : W) penalty += w.squaredNorm();
    const double loss = err.squaredNorm() / (2.0 * n) + l2 * penalty / (2.0 * n);
    if (!grad) return loss;

    grad->w.resize(layers);
    grad->b.resize(layers);
    Eigen::MatrixXd delta = err / n;
    for (std::size_t l = layers; l-- > 0;) {
        grad->w[l] = delta * act[l].transpose() + (l2 / n) * W[l];
        grad->b[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = W[l].transpose() * delta;
            delta = delta.cwiseProduct((act[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, double target_mean, std::uint64_t seed) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("network needs input and output widths");
    for (int w : widths_)
        if (w < 1) throw std::invalid_argument("layer widths must be at least 1");
    Rng rng(seed);
    const std::size_t layers = widths_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = widths_[l], out = widths_[l + 1];
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(out, in);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(out);
        if (l + 1 < layers) {
            const double limit = std::sqrt(6.0 / (in + out));
            std::uniform_real_distribution<double> u(-limit, limit);
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
            for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = u(rng);
        } else {
            b.setConstant(target_mean);
        }
        weights_.push_back(std::move(w));
        biases_.push_back(std::move(b));
    }
    mean_ = Eigen::VectorXd::Zero(widths_.front());
    scale_ = Eigen::VectorXd::Ones(widths_.front());
}

void Mlp::set_standardization(Eigen::VectorXd mean, Eigen::VectorXd scale) {
    if (mean.size() != widths_.front() || scale.size() != widths_.front())
        throw std::invalid_argument("standardization size mismatch");
    mean_ = std::move(mean);
    scale_ = std::move(scale);
}

Eigen::VectorXd Mlp::forward(const Eigen::MatrixXd& x_std) const {
    Eigen::MatrixXd a = x_std.transpose();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        a = (weights_[l] * a).colwise() + biases_[l];
        if (l + 1 < weights_.size()) a = a.cwiseMax(0.0);
    }
    return a.row(0).transpose();
}

double Mlp::predict(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != widths_.front()) throw std::invalid_argument("input width mismatch");
    Eigen::MatrixXd row(1, widths_.front());
    for (int i = 0; i < widths_.front(); ++i) row(0, i) = (x[static_cast<std::size_t>(i)] - mean_(i)) / scale_(i);
    return forward(row)(0);
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.insert(out.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
        out.insert(out.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
    }
    return out;
}

void Mlp::set_parameters(std::span<const double> params) {
    std::size_t pos = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const auto nw = static_cast<std::size_t>(weights_[l].size());
        const auto nb = static_cast<std::size_t>(biases_[l].size());
        if (pos + nw + nb > params.size()) throw std::invalid_argument("parameter vector too short");
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(pos), nw, weights_[l].data());
        pos += nw;
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(pos), nb, biases_[l].data());
        pos += nb;
    }
    if (pos != params.size()) throw std::invalid_argument("parameter vector too long");
}

double Mlp::loss_and_gradient(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y, double l2,
                              std::vector<double>* gradient) const {
    if (!gradient) return backprop(*this, x_std.transpose(), y, l2, nullptr);
    Gradients g;
    const double loss = backprop(*this, x_std.transpose(), y, l2, &g);
    gradient->clear();
    for (std::size_t l = 0; l < g.w.size(); ++l) {
        gradient->insert(gradient->end(), g.w[l].data(), g.w[l].data() + g.w[l].size());
        gradient->insert(gradient->end(), g.b[l].data(), g.b[l].data() + g.b[l].size());
    }
    return loss;
}

Mlp fit_mlp(const FeatureMatrix& x, std::span<const double> y, const MlpParams& params, std::uint64_t seed) {
    if (x.rows() == 0 || x.rows() != y.size()) throw std::invalid_argument("fit_mlp needs matching, non-empty data");
    if (params.batch_size < 1 || params.epochs < 0) throw std::invalid_argument("bad MLP training parameters");
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto d = static_cast<Eigen::Index>(x.cols());
    std::vector<int> widths{static_cast<int>(d)};
    widths.insert(widths.end(), params.hidden.begin(), params.hidden.end());
    widths.push_back(1);
    const double target_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    Mlp net(widths, target_mean, derive_seed(seed, {1}));

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), scale = Eigen::VectorXd::Ones(d);
    if (params.standardize) {
        for (Eigen::Index c = 0; c < d; ++c) {
            double m = 0.0;
            for (Eigen::Index r = 0; r < n; ++r) m += x(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            m /= static_cast<double>(n);
            double v = 0.0;
            for (Eigen::Index r = 0; r < n; ++r) {
                const double dv = x(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) - m;
                v += dv * dv;
            }
            const double s = std::sqrt(v / static_cast<double>(n));
            mean(c) = m;
            scale(c) = s > 0.0 ? s : 1.0;
        }
    }
    net.set_standardization(mean, scale);
    Eigen::MatrixXd xt(d, n);  // standardized, samples as columns
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            xt(c, r) = (x(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) - mean(c)) / scale(c);
    Eigen::VectorXd yv(n);
    for (Eigen::Index r = 0; r < n; ++r) yv(r) = y[static_cast<std::size_t>(r)];

    auto& W = net.weights();
    auto& B = net.biases();
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    for (std::size_t l = 0; l < W.size(); ++l) {
        mw.push_back(Eigen::MatrixXd::Zero(W[l].rows(), W[l].cols()));
        vw.push_back(mw.back());
        mb.push_back(Eigen::VectorXd::Zero(B[l].size()));
        vb.push_back(mb.back());
    }
    Rng rng(derive_seed(seed, {2}));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const Eigen::Index batch = std::min<Eigen::Index>(params.batch_size, n);
    long step = 0;
    Gradients g;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index m = std::min(batch, n - start);
            Eigen::MatrixXd xb(d, m);
            Eigen::VectorXd yb(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                xb.col(i) = xt.col(src);
                yb(i) = yv(src);
            }
            backprop(net, xb, yb, params.l2, &g);
            ++step;
            const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(step));
            const double lr = params.learning_rate * std::sqrt(c2) / c1;
            for (std::size_t l = 0; l < W.size(); ++l) {
                mw[l] = params.beta1 * mw[l] + (1.0 - params.beta1) * g.w[l];
                vw[l] = params.beta2 * vw[l] + (1.0 - params.beta2) * g.w[l].cwiseAbs2();
                W[l].array() -= lr * mw[l].array() / (vw[l].array().sqrt() + params.epsilon);
                mb[l] = params.beta1 * mb[l] + (1.0 - params.beta1) * g.b[l];
                vb[l] = params.beta2 * vb[l] + (1.0 - params.beta2) * g.b[l].cwiseAbs2();
                B[l].array() -= lr * mb[l].array() / (vb[l].array().sqrt() + params.epsilon);
            }
        }
    }
    return net;
}

}  // namespace vlp::learn
