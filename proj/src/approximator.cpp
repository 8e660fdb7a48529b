#include "lexisafe/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lexisafe/errors.hpp"

namespace lexisafe {

namespace {

using MatMap = Eigen::Map<const Eigen::MatrixXd>;
using VecMap = Eigen::Map<const Eigen::VectorXd>;

std::size_t layer_in(const MlpSpec& spec, std::size_t l) {
  return l == 0 ? spec.input_dim : spec.hidden_dims[l - 1];
}

std::size_t layer_out(const MlpSpec& spec, std::size_t l) {
  return l == spec.hidden_dims.size() ? spec.output_dim : spec.hidden_dims[l];
}

void check_params(const MlpSpec& spec, const ParamVector& params) {
  if (params.size() != spec.param_count()) {
    throw ConfigError("parameter vector has " + std::to_string(params.size()) + " entries, network expects " +
                      std::to_string(spec.param_count()));
  }
}

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  if (act == Activation::relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

// Multiplies delta in place by the activation derivative, expressed through
// the post-activation values.
void apply_derivative(Activation act, const Eigen::MatrixXd& post, Eigen::MatrixXd& delta) {
  if (act == Activation::relu) {
    delta = (post.array() > 0.0).select(delta, 0.0);
  } else {
    delta.array() *= 1.0 - post.array().square();
  }
}

}  // namespace

const char* to_string(Activation act) { return act == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::size_t MlpSpec::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < depth(); ++l) total += (layer_in(*this, l) + 1) * layer_out(*this, l);
  return total;
}

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("network input and output dims must be positive");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
}

bool ParamVector::all_finite() const {
  for (double x : values) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

ParamVector init_params(const MlpSpec& spec, RngStream& rng) {
  spec.validate();
  ParamVector params(spec.param_count());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.depth(); ++l) {
    const std::size_t fan_in = layer_in(spec, l);
    const std::size_t fan_out = layer_out(spec, l);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) params[offset + i] = (2.0 * rng.uniform() - 1.0) * limit;
    offset += fan_in * fan_out + fan_out;  // biases stay zero
  }
  return params;
}

Eigen::MatrixXd forward_batch(const MlpSpec& spec, const ParamVector& params, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache) {
  check_params(spec, params);
  if (static_cast<std::size_t>(inputs.rows()) != spec.input_dim) {
    throw ConfigError("network input has " + std::to_string(inputs.rows()) + " rows, expected " +
                      std::to_string(spec.input_dim));
  }
  if (cache) {
    cache->activations.resize(spec.depth());
    cache->activations[0] = inputs;
  }
  Eigen::MatrixXd x = inputs;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.depth(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(layer_in(spec, l));
    const auto fan_out = static_cast<Eigen::Index>(layer_out(spec, l));
    MatMap w(params.data() + offset, fan_out, fan_in);
    VecMap b(params.data() + offset + fan_out * fan_in, fan_out);
    offset += static_cast<std::size_t>(fan_out * fan_in + fan_out);
    Eigen::MatrixXd z = w * x;
    z.colwise() += b;
    if (l + 1 < spec.depth()) {
      apply_activation(spec.activation, z);
      if (cache) cache->activations[l + 1] = z;
    }
    x = std::move(z);
  }
  return x;
}

void backward_batch(const MlpSpec& spec, const ParamVector& params, const ForwardCache& cache,
                    const Eigen::MatrixXd& output_grad, std::span<double> grad) {
  check_params(spec, params);
  if (grad.size() != params.size()) throw ConfigError("gradient buffer length does not match parameter count");
  if (cache.activations.size() != spec.depth()) throw ConfigError("forward cache does not match network depth");
  if (static_cast<std::size_t>(output_grad.rows()) != spec.output_dim ||
      output_grad.cols() != cache.activations[0].cols()) {
    throw ConfigError("output gradient has wrong shape");
  }

  // Layer offsets, walked in reverse.
  std::vector<std::size_t> offsets(spec.depth());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.depth(); ++l) {
    offsets[l] = offset;
    offset += (layer_in(spec, l) + 1) * layer_out(spec, l);
  }

  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = spec.depth(); l-- > 0;) {
    const auto fan_in = static_cast<Eigen::Index>(layer_in(spec, l));
    const auto fan_out = static_cast<Eigen::Index>(layer_out(spec, l));
    const Eigen::MatrixXd& input = cache.activations[l];
    // Evaluated into aligned temporaries: with wide vector units the kernel
    // choice depends on the destination address, which would leak the
    // caller's allocation into the low bits of the gradient.
    const Eigen::MatrixXd gw = delta * input.transpose();
    const Eigen::VectorXd gb = delta.rowwise().sum();
    std::copy(gw.data(), gw.data() + gw.size(), grad.data() + offsets[l]);
    std::copy(gb.data(), gb.data() + gb.size(), grad.data() + offsets[l] + static_cast<std::size_t>(gw.size()));
    if (l > 0) {
      MatMap w(params.data() + offsets[l], fan_out, fan_in);
      Eigen::MatrixXd next = w.transpose() * delta;
      apply_derivative(spec.activation, input, next);
      delta = std::move(next);
    }
  }
}

Eigen::VectorXd forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input) {
  if (input.size() != spec.input_dim) {
    throw ConfigError("input has length " + std::to_string(input.size()) + ", network expects " +
                      std::to_string(spec.input_dim));
  }
  Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  return forward_batch(spec, params, x).col(0);
}

std::vector<double> backward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
                             std::span<const double> output_grad) {
  if (input.size() != spec.input_dim) throw ConfigError("input length does not match network input_dim");
  if (output_grad.size() != spec.output_dim) throw ConfigError("output gradient length does not match output_dim");
  Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  ForwardCache cache;
  forward_batch(spec, params, x, &cache);
  Eigen::MatrixXd g =
      Eigen::Map<const Eigen::MatrixXd>(output_grad.data(), static_cast<Eigen::Index>(output_grad.size()), 1);
  std::vector<double> grad(params.size());
  backward_batch(spec, params, cache, g, grad);
  return grad;
}

AdamState AdamState::for_params(std::size_t n, double lr) {
  AdamState state;
  state.m.assign(n, 0.0);
  state.v.assign(n, 0.0);
  state.lr = lr;
  return state;
}

void adam_step(AdamState& state, ParamVector& params, std::span<const double> grad) {
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("adam_step: gradient, moment and parameter lengths disagree");
  }
  if (!(state.eps_stab > 0.0)) throw ConfigError("adam_step: eps_stab must be positive");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericalError("adam_step: non-finite gradient at index " + std::to_string(i));
    }
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps_stab);
  }
}

void soft_update(ParamVector& target, const ParamVector& online, double tau) {
  if (target.size() != online.size()) throw ConfigError("soft_update: target and online lengths differ");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("soft_update: tau must lie in (0, 1]");
  if (tau == 1.0) {
    target = online;
    return;
  }
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = (1.0 - tau) * target[i] + tau * online[i];
}

}  // namespace lexisafe
