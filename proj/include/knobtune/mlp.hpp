#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "knobtune/json_io.hpp"

namespace knobtune {

enum class Activation { Identity, Relu, Sigmoid };

struct NetworkSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden{64, 64};
  Activation hidden_activation = Activation::Relu;
  Activation output_activation = Activation::Identity;

  void validate() const;
};

/// Fully connected feed-forward network with all parameters in one flat
/// vector (per layer: weights row-major out x in, then biases).
class Mlp {
 public:
  Mlp() = default;
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  Mlp(NetworkSpec spec, std::uint64_t seed);

  /// Activations of every layer, kept for backward().
  struct Tape {
    std::vector<std::vector<double>> inputs;  ///< input to each layer
    std::vector<std::vector<double>> outputs; ///< post-activation output of each layer
  };

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Tape& tape) const;

  /// Back-propagates dL/dy. Adds dL/dtheta into `param_grad` (size
  /// param_count()) and returns dL/dx.
  std::vector<double> backward(const Tape& tape, std::span<const double> upstream, std::span<double> param_grad) const;

  const NetworkSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return dims_.size() - 1; }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Offsets of layer l's weights and biases in params().
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + dims_[layer + 1] * dims_[layer]; }

  json to_json() const;
  static Mlp from_json(const json& j);

 private:
  void layout();
  Activation activation(std::size_t layer) const;

  NetworkSpec spec_;
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Plain stochastic gradient descent with optional heavy-ball momentum.
class SgdOptimizer {
 public:
  SgdOptimizer() = default;
  SgdOptimizer(std::size_t n, double lr, double momentum) : lr_(lr), momentum_(momentum), velocity_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad);

  std::span<const double> velocity() const { return velocity_; }
  std::vector<double>& velocity_mut() { return velocity_; }

 private:
  double lr_ = 1e-3;
  double momentum_ = 0.0;
  std::vector<double> velocity_;
};

}  // namespace knobtune
