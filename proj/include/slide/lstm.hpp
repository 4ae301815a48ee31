#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "slide/dynamics.hpp"
#include "slide/mlp.hpp"

namespace slide {

struct LstmShape {
  std::vector<int> layers{64, 32};
  std::vector<int> head{16, 1};
  double rate = 50.0;    // Hz
  double window = 2.0;   // s
  double accel_scale = 4.2;
  double vel_scale = 1.0;

  int length() const;
  /// Throws InvalidConfig.
  void validate() const;
};

/// Stacked LSTM over a (accel, v_rel) series with a fully connected head on
/// the last hidden state. Gate order inside every block is i, f, g, o.
///
/// Batches are time-major: one (input_dim x T*B) matrix whose column block t
/// holds step t of every sample.
class LstmNetwork {
 public:
  static constexpr int kInputDim = 2;

  struct LayerCache {
    Matrix input;  // in x T*B
    Matrix gates;  // 4H x T*B, activated
    Matrix c;      // H x T*B
    Matrix h;      // H x T*B
  };
  struct Cache {
    int batch = 0;
    std::vector<LayerCache> layers;
    Mlp::Cache head;
  };

  LstmNetwork() = default;
  explicit LstmNetwork(LstmShape shape);

  /// Uniform(+-1/sqrt(H)) recurrent weights, forget bias 1, head fan-in init
  /// with the output bias at `output_bias`.
  void init(std::mt19937_64& rng, double output_bias = 0.0);

  const LstmShape& shape() const { return shape_; }
  int length() const { return length_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  Mlp& head() { return head_; }
  const Mlp& head() const { return head_; }

  /// Normalized time-major batch. Throws DimensionMismatch when a series has
  /// the wrong length.
  Matrix make_batch(std::span<const TwoChannelSeries* const> series) const;

  /// Returns a 1 x B row of predictions.
  Matrix forward(const Matrix& batch, int batch_size, Cache* cache = nullptr) const;

  /// Accumulates gradients for params() and head().params().
  void backward(const Cache& cache, const Matrix& output_grad, std::span<double> grad,
                std::span<double> head_grad) const;

  /// Raw network output for one series.
  double forward_one(const TwoChannelSeries& series) const;

  void export_to(TensorFile& file) const;
  static LstmNetwork load(const std::filesystem::path& manifest);
  void save(const std::filesystem::path& manifest, nlohmann::json meta = {}) const;

 private:
  Eigen::Map<const Matrix> block(int layer, int which) const;

  LstmShape shape_;
  int length_ = 0;
  ParamVector params_;
  std::vector<ParamBlock> blocks_;  // per layer: W, U, b
  Mlp head_;
};

/// Clamped friction estimate. Throws DimensionMismatch on a wrong length.
double estimate_lstm(const LstmNetwork& net, const TwoChannelSeries& series);

/// Simulated (series, mu_k) pairs.
struct FrictionDataset {
  double rate = 50.0;
  int length = 0;
  std::vector<TwoChannelSeries> inputs;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
  void save(const std::filesystem::path& manifest) const;
  static FrictionDataset load(const std::filesystem::path& manifest);
};

struct DatasetOptions {
  double rate = 50.0;
  double window = 2.0;
  double mu_lo = 0.05;
  double mu_hi = 0.45;
  double slip_fraction = 0.85;
  double static_ratio = 1.0;
  double g = 9.81;
};

/// Random valid maneuvers lasting at most the window, mu_k ~ U[mu_lo, mu_hi].
/// `slip_fraction` of the samples are drawn until the object slides.
FrictionDataset gen_dataset(std::size_t n, std::uint64_t seed, const DatasetOptions& opt = {});

/// Fraction of samples whose v_rel channel is not identically zero.
double slip_fraction(const FrictionDataset& data);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded permutation cut into train/val/test.
DatasetSplit split_dataset(std::size_t n, std::uint64_t seed, double train_frac = 0.8,
                           double val_frac = 0.1);

struct LstmTrainOptions {
  int epochs = 30;
  int batch = 64;
  double lr = 2e-3;
  double lr_decay = 0.93;  // per epoch
  double grad_clip = 1.0;  // global norm; <= 0 disables
  std::uint64_t seed = 7;
};

struct EpochMetrics {
  int epoch = 0;
  double train_mae = 0.0;
  double val_mae = 0.0;
  double seconds = 0.0;
};

/// Mean absolute error of raw predictions over `indices`.
double evaluate_mae(const LstmNetwork& net, const FrictionDataset& data,
                    std::span<const std::size_t> indices, int batch = 256);

/// Minibatch Adam on the mean squared error with full backprop through time.
std::vector<EpochMetrics> lstm_train(LstmNetwork& net, const FrictionDataset& data,
                                     const DatasetSplit& split, const LstmTrainOptions& opt,
                                     const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace slide
