#include "knobtune/mlp.hpp"

#include <cmath>

#include "knobtune/errors.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid:
      return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return z;
}

// Derivative expressed through the activation output y.
double activate_grad(Activation a, double y) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ParseError("unknown activation '" + s + "'");
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ValidationError("network: dimensions must be positive");
  for (auto h : hidden) {
    if (h == 0) throw ValidationError("network: hidden widths must be positive");
  }
}

Mlp::Mlp(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  layout();
  Rng rng(seed);
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    for (std::size_t i = 0; i < dims_[l + 1] * dims_[l]; ++i) params_[weight_offset(l) + i] = rng.uniform(-bound, bound);
  }
}

void Mlp::layout() {
  dims_.clear();
  dims_.push_back(spec_.input_dim);
  for (auto h : spec_.hidden) dims_.push_back(h);
  dims_.push_back(spec_.output_dim);
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

Activation Mlp::activation(std::size_t layer) const {
  return layer + 1 == layer_count() ? spec_.output_activation : spec_.hidden_activation;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Tape tape;
  return forward(x, tape);
}

std::vector<double> Mlp::forward(std::span<const double> x, Tape& tape) const {
  if (x.size() != spec_.input_dim) {
    throw DimensionError("mlp forward: input has " + std::to_string(x.size()) + " values, expected " +
                         std::to_string(spec_.input_dim));
  }
  tape.inputs.assign(layer_count(), {});
  tape.outputs.assign(layer_count(), {});
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    tape.inputs[l] = h;
    const std::size_t in = dims_[l], out = dims_[l + 1];
    const double* W = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    std::vector<double> y(out);
    const Activation act = activation(l);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = W + o * in;
      for (std::size_t i = 0; i < in; ++i) z += row[i] * h[i];
      y[o] = activate(act, z);
    }
    tape.outputs[l] = y;
    h = std::move(y);
  }
  return h;
}

std::vector<double> Mlp::backward(const Tape& tape, std::span<const double> upstream, std::span<double> param_grad) const {
  if (upstream.size() != spec_.output_dim) throw DimensionError("mlp backward: upstream size mismatch");
  if (param_grad.size() != params_.size()) throw DimensionError("mlp backward: gradient buffer size mismatch");
  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t l = layer_count(); l-- > 0;) {
    const std::size_t in = dims_[l], out = dims_[l + 1];
    const Activation act = activation(l);
    const auto& y = tape.outputs[l];
    const auto& x = tape.inputs[l];
    for (std::size_t o = 0; o < out; ++o) delta[o] *= activate_grad(act, y[o]);
    const double* W = params_.data() + weight_offset(l);
    double* gW = param_grad.data() + weight_offset(l);
    double* gb = param_grad.data() + bias_offset(l);
    std::vector<double> prev(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      const double* row = W + o * in;
      double* grow = gW + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        grow[i] += d * x[i];
        prev[i] += d * row[i];
      }
    }
    delta = std::move(prev);
  }
  return delta;
}

json Mlp::to_json() const {
  return json{{"input_dim", spec_.input_dim},
              {"output_dim", spec_.output_dim},
              {"hidden", spec_.hidden},
              {"hidden_activation", activation_name(spec_.hidden_activation)},
              {"output_activation", activation_name(spec_.output_activation)},
              {"params", params_}};
}

Mlp Mlp::from_json(const json& j) {
  Mlp m;
  try {
    m.spec_.input_dim = j.at("input_dim").get<std::size_t>();
    m.spec_.output_dim = j.at("output_dim").get<std::size_t>();
    m.spec_.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    m.spec_.hidden_activation = parse_activation(j.at("hidden_activation").get<std::string>());
    m.spec_.output_activation = parse_activation(j.at("output_activation").get<std::string>());
    m.spec_.validate();
    m.layout();
    const auto p = j.at("params").get<std::vector<double>>();
    if (p.size() != m.params_.size()) throw ParseError("mlp: parameter count mismatch");
    m.params_ = p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("mlp: ") + e.what());
  }
  return m;
}

void SgdOptimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size() || velocity_.size() != params.size()) throw DimensionError("sgd: size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grad[i];
    params[i] -= lr_ * velocity_[i];
  }
}

}  // namespace knobtune
