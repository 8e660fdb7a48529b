#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lexisafe/rng.hpp"

namespace lexisafe {

enum class Activation { relu, tanh };

const char* to_string(Activation act);
Activation activation_from_string(const std::string& name);

/// Fully connected network shape.
struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;
  Activation activation = Activation::relu;

  /// Total parameter count, sum over layers of (fan_in + 1) * fan_out.
  std::size_t param_count() const;
  /// Number of affine layers.
  std::size_t depth() const { return hidden_dims.size() + 1; }
  /// Throws ConfigError on zero-sized layers.
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

/// Flat parameter storage. Layer l is laid out as its weight matrix
/// (fan_out x fan_in, column-major) followed by its bias vector.
///
/// The buffer uses Eigen's aligned allocator: vectorized reductions over
/// mapped layers peel a different number of leading elements depending on
/// the base address, so an unaligned buffer makes results vary in the last
/// bits from run to run.
struct ParamVector {
  std::vector<double, Eigen::aligned_allocator<double>> values;

  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values(n, fill) {}

  std::size_t size() const { return values.size(); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  std::span<double> span() { return values; }
  std::span<const double> span() const { return values; }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  bool all_finite() const;
  bool operator==(const ParamVector&) const = default;
};

/// Glorot-uniform weights, zero biases.
ParamVector init_params(const MlpSpec& spec, RngStream& rng);

/// Intermediate activations of a batched forward pass; column k is sample k.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] is the input
};

Eigen::VectorXd forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input);

/// Gradient of output_grad . forward(params, input) with respect to params.
std::vector<double> backward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
                             std::span<const double> output_grad);

/// Batched forward pass: inputs is input_dim x B, result is output_dim x B.
Eigen::MatrixXd forward_batch(const MlpSpec& spec, const ParamVector& params, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache = nullptr);

/// Sum over the batch of per-sample parameter gradients of output_grad(:,k) . output(:,k).
/// Callers fold any 1/B averaging into output_grad. grad is overwritten.
void backward_batch(const MlpSpec& spec, const ParamVector& params, const ForwardCache& cache,
                    const Eigen::MatrixXd& output_grad, std::span<double> grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stab = 1e-8;

  static AdamState for_params(std::size_t n, double lr);
};

/// Bias-corrected Adam update in place. Throws NumericalError naming the
/// first non-finite gradient index.
void adam_step(AdamState& state, ParamVector& params, std::span<const double> grad);

/// target <- (1 - tau) * target + tau * online.
void soft_update(ParamVector& target, const ParamVector& online, double tau);

}  // namespace lexisafe
