#pragma once

/**
 * @file nnet.hpp
 * @brief Small dense feed-forward networks with exact reverse-mode gradients,
 *        an Adam optimizer and Polyak (soft) target updates.
 *
 * Batches are stored column-wise: a batch of B inputs is an (input_dim x B)
 * matrix.
 */

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fes::nnet {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Sigmoid = 2 };

struct Layer {
  Eigen::MatrixXd weight; // out x in
  Eigen::VectorXd bias;   // out
  Activation activation = Activation::Identity;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

/// Activations recorded by a batched forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to layer k
  std::vector<Eigen::MatrixXd> outputs; // post-activation output of layer k
};

/// Per-parameter gradient buffers mirroring a DenseNet, plus the gradient
/// with respect to the network input.
struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;

  double squared_norm() const;
  bool all_finite() const;
  void scale(double factor);
};

class DenseNet {
public:
  DenseNet() = default;
  explicit DenseNet(std::vector<Layer> layers);

  /// Hidden layers use U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the output layer
  /// uses U(-final_range, final_range).
  static DenseNet create(std::span<const int> dims, Activation hidden,
                         Activation output, std::mt19937_64 &rng,
                         double final_range = 3e-3);

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;

  const std::vector<Layer> &layers() const { return layers_; }
  std::vector<Layer> &layers() { return layers_; }

  Eigen::VectorXd forward(const Eigen::VectorXd &input) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd &inputs,
                                ForwardCache *cache = nullptr) const;

  /// Gradients of sum(output .* upstream) with respect to every parameter
  /// and to the input, for the batch recorded in `cache`.
  Gradients backward(const ForwardCache &cache,
                     const Eigen::MatrixXd &upstream) const;

  /// Input gradient only (skips the parameter gradients).
  Eigen::MatrixXd input_gradient(const ForwardCache &cache,
                                 const Eigen::MatrixXd &upstream) const;

  /// Single-sample convenience: forward then backward.
  Gradients backward(const Eigen::VectorXd &input,
                     const Eigen::VectorXd &upstream) const;

  bool same_shape(const DenseNet &other) const;
  bool all_finite() const;

private:
  std::vector<Layer> layers_;
};

/// Scale `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_global_norm(Gradients &grads, double max_norm);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam. Holds the first and second moment estimates for one
/// network shape.
class Adam {
public:
  Adam() = default;
  Adam(const DenseNet &net, AdamConfig config);

  /// Apply one update. Throws NumericalError on non-finite gradients.
  void step(DenseNet &net, const Gradients &grads);

  long step_count() const { return step_count_; }
  const AdamConfig &config() const { return config_; }

private:
  AdamConfig config_;
  long step_count_ = 0;
  std::vector<Eigen::MatrixXd> m_weight_, v_weight_;
  std::vector<Eigen::VectorXd> m_bias_, v_bias_;
};

/// target <- tau * online + (1 - tau) * target, parameter-wise.
void soft_update(DenseNet &target, const DenseNet &online, double tau);

/// Largest absolute parameter difference between two same-shaped nets.
double max_parameter_distance(const DenseNet &a, const DenseNet &b);

Eigen::VectorXd to_eigen(std::span<const double> values);

} // namespace fes::nnet
