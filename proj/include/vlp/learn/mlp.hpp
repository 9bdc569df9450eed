#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vlp/learn/matrix.hpp"

namespace vlp::learn {

struct MlpParams {
    std::vector<int> hidden{200, 200, 200, 200, 200};
    double learning_rate = 1e-3;
    int epochs = 200;
    int batch_size = 200;
    double l2 = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool standardize = true;
};

// Fully connected ReLU network with a single linear output.
class Mlp {
public:
    Mlp() = default;
    // Glorot-uniform hidden layers, zero output weights, output bias = target_mean.
    Mlp(std::vector<int> widths, double target_mean, std::uint64_t seed);

    const std::vector<int>& widths() const { return widths_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
    std::vector<Eigen::MatrixXd>& weights() { return weights_; }
    std::vector<Eigen::VectorXd>& biases() { return biases_; }

    const Eigen::VectorXd& feature_mean() const { return mean_; }
    const Eigen::VectorXd& feature_scale() const { return scale_; }
    void set_standardization(Eigen::VectorXd mean, Eigen::VectorXd scale);

    // Inputs in raw units; standardized internally.
    double predict(std::span<const double> x) const;
    // Rows already standardized; one output per row.
    Eigen::VectorXd forward(const Eigen::MatrixXd& x_std) const;

    // Flattened (W0, b0, W1, b1, ...), weights column-major.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> params);

    // 1/(2n) sum (f(x) - y)^2 + l2/(2n) sum ||W||^2 and its gradient in
    // parameters() order.
    double loss_and_gradient(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y, double l2,
                             std::vector<double>* gradient) const;

private:
    std::vector<int> widths_;
    std::vector<Eigen::MatrixXd> weights_;  // out x in
    std::vector<Eigen::VectorXd> biases_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd scale_;
};

// Mini-batch Adam on mean squared error.
Mlp fit_mlp(const FeatureMatrix& x, std::span<const double> y, const MlpParams& params, std::uint64_t seed);

}  // namespace vlp::learn
