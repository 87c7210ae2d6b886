#include "fescycle/nnet.hpp"

#include <cmath>
#include <string>

#include "fescycle/error.hpp"

namespace fes::nnet {

namespace {

void apply_activation(Eigen::MatrixXd &z, Activation act) {
  switch (act) {
  case Activation::Identity:
    break;
  case Activation::Relu:
    z = z.cwiseMax(0.0);
    break;
  case Activation::Sigmoid:
    z = (1.0 + (-z.array()).exp()).inverse().matrix();
    break;
  }
}

// d(activation)/dz expressed through the activation output y.
void scale_by_derivative(Eigen::MatrixXd &grad, const Eigen::MatrixXd &y,
                         Activation act) {
  switch (act) {
  case Activation::Identity:
    break;
  case Activation::Relu:
    grad = (y.array() > 0.0).select(grad, 0.0);
    break;
  case Activation::Sigmoid:
    grad = (grad.array() * y.array() * (1.0 - y.array())).matrix();
    break;
  }
}

double uniform(std::mt19937_64 &rng, double limit) {
  // Drawn through the raw engine so the stream does not depend on the
  // standard library's distribution implementation.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * limit;
}

} // namespace

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto &w : weight) {
    s += w.squaredNorm();
  }
  for (const auto &b : bias) {
    s += b.squaredNorm();
  }
  return s;
}

bool Gradients::all_finite() const {
  for (const auto &w : weight) {
    if (!w.allFinite()) {
      return false;
    }
  }
  for (const auto &b : bias) {
    if (!b.allFinite()) {
      return false;
    }
  }
  return true;
}

void Gradients::scale(double factor) {
  for (auto &w : weight) {
    w *= factor;
  }
  for (auto &b : bias) {
    b *= factor;
  }
}

DenseNet::DenseNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), "DenseNet needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto &l = layers_[k];
    require(l.bias.size() == l.weight.rows(), "layer bias length mismatch");
    if (k > 0) {
      require(l.in_dim() == layers_[k - 1].out_dim(),
              "adjacent layer dimensions do not chain");
    }
  }
}

DenseNet DenseNet::create(std::span<const int> dims, Activation hidden,
                          Activation output, std::mt19937_64 &rng,
                          double final_range) {
  require(dims.size() >= 2, "DenseNet::create needs input and output dims");
  std::vector<Layer> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    require(dims[k] > 0 && dims[k + 1] > 0, "layer widths must be positive");
    const bool last = k + 2 == dims.size();
    const double limit = last ? final_range : 1.0 / std::sqrt(dims[k]);
    Layer l;
    l.weight.resize(dims[k + 1], dims[k]);
    l.bias.resize(dims[k + 1]);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        l.weight(r, c) = uniform(rng, limit);
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      l.bias(r) = uniform(rng, limit);
    }
    l.activation = last ? output : hidden;
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(layers));
}

int DenseNet::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

int DenseNet::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto &l : layers_) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd &input) const {
  return forward_batch(input);
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd &inputs,
                                        ForwardCache *cache) const {
  require(inputs.rows() == input_dim(),
          "forward: input has " + std::to_string(inputs.rows()) +
              " rows, network expects " + std::to_string(input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Eigen::MatrixXd x = inputs;
  for (const auto &l : layers_) {
    Eigen::MatrixXd z = l.weight * x;
    z.colwise() += l.bias;
    apply_activation(z, l.activation);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->outputs.push_back(z);
    }
    x = std::move(z);
  }
  return x;
}

Gradients DenseNet::backward(const ForwardCache &cache,
                             const Eigen::MatrixXd &upstream) const {
  require(cache.outputs.size() == layers_.size(),
          "backward: cache does not match network depth");
  require(upstream.rows() == output_dim() &&
              upstream.cols() == cache.outputs.back().cols(),
          "backward: upstream gradient shape mismatch");
  Gradients g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    scale_by_derivative(delta, cache.outputs[k], layers_[k].activation);
    g.weight[k].noalias() = delta * cache.inputs[k].transpose();
    g.bias[k] = delta.rowwise().sum();
    Eigen::MatrixXd next = layers_[k].weight.transpose() * delta;
    delta = std::move(next);
  }
  g.input = std::move(delta);
  return g;
}

Eigen::MatrixXd DenseNet::input_gradient(const ForwardCache &cache,
                                         const Eigen::MatrixXd &upstream) const {
  require(cache.outputs.size() == layers_.size() &&
              upstream.rows() == output_dim() &&
              upstream.cols() == cache.outputs.back().cols(),
          "input_gradient: shape mismatch");
  Eigen::MatrixXd delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    scale_by_derivative(delta, cache.outputs[k], layers_[k].activation);
    Eigen::MatrixXd next = layers_[k].weight.transpose() * delta;
    delta = std::move(next);
  }
  return delta;
}

Gradients DenseNet::backward(const Eigen::VectorXd &input,
                             const Eigen::VectorXd &upstream) const {
  ForwardCache cache;
  forward_batch(input, &cache);
  return backward(cache, upstream);
}

bool DenseNet::same_shape(const DenseNet &other) const {
  if (layers_.size() != other.layers_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto &a = layers_[k];
    const auto &b = other.layers_[k];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.activation != b.activation) {
      return false;
    }
  }
  return true;
}

bool DenseNet::all_finite() const {
  for (const auto &l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      return false;
    }
  }
  return true;
}

double clip_global_norm(Gradients &grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm && norm > 0) {
    grads.scale(max_norm / norm);
  }
  return norm;
}

Adam::Adam(const DenseNet &net, AdamConfig config) : config_(config) {
  for (const auto &l : net.layers()) {
    m_weight_.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    v_weight_.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    m_bias_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    v_bias_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
}

void Adam::step(DenseNet &net, const Gradients &grads) {
  auto &layers = net.layers();
  require(grads.weight.size() == layers.size() && m_weight_.size() == layers.size(),
          "adam: gradient shape does not match network");
  if (!grads.all_finite()) {
    throw NumericalError("adam: non-finite gradient at optimizer step " +
                         std::to_string(step_count_ + 1));
  }
  ++step_count_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  auto update = [&](auto &param, auto &m, auto &v, const auto &g) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseAbs2();
    param.array() -= config_.lr * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + config_.epsilon);
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weight, m_weight_[k], v_weight_[k], grads.weight[k]);
    update(layers[k].bias, m_bias_[k], v_bias_[k], grads.bias[k]);
  }
}

void soft_update(DenseNet &target, const DenseNet &online, double tau) {
  require(target.same_shape(online), "soft_update: network shapes differ");
  require(tau >= 0.0 && tau <= 1.0, "soft_update: tau must lie in [0, 1]");
  auto &t = target.layers();
  const auto &o = online.layers();
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k].weight = tau * o[k].weight + (1.0 - tau) * t[k].weight;
    t[k].bias = tau * o[k].bias + (1.0 - tau) * t[k].bias;
  }
}

double max_parameter_distance(const DenseNet &a, const DenseNet &b) {
  require(a.same_shape(b), "parameter distance: network shapes differ");
  double d = 0.0;
  for (std::size_t k = 0; k < a.layers().size(); ++k) {
    const auto &la = a.layers()[k];
    const auto &lb = b.layers()[k];
    d = std::max(d, (la.weight - lb.weight).cwiseAbs().maxCoeff());
    d = std::max(d, (la.bias - lb.bias).cwiseAbs().maxCoeff());
  }
  return d;
}

Eigen::VectorXd to_eigen(std::span<const double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = values[i];
  }
  return v;
}

} // namespace fes::nnet
