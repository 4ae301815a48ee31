#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slide/tensor_io.hpp"

namespace slide {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Flat storage aligned for SIMD so reductions run the same way every run.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

enum class Activation { Identity, Relu, Tanh };

/// Location of one weight or bias block inside a flat parameter vector.
struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Fully connected network. Parameters live in one contiguous vector so the
/// optimizer, target-network updates and checkpoints can treat them as a
/// flat array; layers are column-major Eigen views into it.
///
/// Batches are column-major: one sample per column.
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> activations;  // a_0 = input, ..., a_L = output
    std::vector<Matrix> pre;          // z_1..z_L
  };

  Mlp() = default;
  Mlp(std::vector<int> sizes, Activation hidden, Activation output, std::string name);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; the last
  /// layer is additionally scaled by `final_scale`.
  void init_fan_in(std::mt19937_64& rng, double final_scale = 1.0);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::string& name() const { return name_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Vector> bias(int layer);
  Eigen::Map<const Vector> bias(int layer) const;

  /// Throws DimensionMismatch when the row count differs from input_dim().
  Matrix forward(const Matrix& input, Cache* cache = nullptr) const;
  Vector forward(const Vector& input) const;

  /// Accumulates parameter gradients into `grad` (same layout as params())
  /// and returns the gradient with respect to the input batch.
  Matrix backward(const Cache& cache, const Matrix& output_grad, std::span<double> grad) const;

  void export_to(TensorFile& file) const;
  /// Loads parameters by name; shapes must match this network.
  void import_from(const TensorFile& file);

 private:
  std::vector<int> sizes_;
  Activation hidden_ = Activation::Relu;
  Activation output_ = Activation::Identity;
  std::string name_;
  ParamVector params_;
  std::vector<ParamBlock> blocks_;
};

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

/// Adam moments for one flat parameter vector.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected adaptive-moment update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// target <- tau * source + (1 - tau) * target.
void soft_update(std::span<double> target, std::span<const double> source, double tau);

}  // namespace slide
