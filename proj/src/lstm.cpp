#include "slide/lstm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "slide/error.hpp"

namespace slide {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string block_name(int layer, const char* which) {
  return "lstm/l" + std::to_string(layer) + "/" + which;
}

}  // namespace

int LstmShape::length() const { return static_cast<int>(std::llround(rate * window)); }

void LstmShape::validate() const {
  if (layers.empty() || std::any_of(layers.begin(), layers.end(), [](int h) { return h <= 0; })) {
    throw SlideError(ErrorCode::InvalidConfig, "lstm layers must be non-empty and positive");
  }
  if (head.empty() || head.back() != 1 ||
      std::any_of(head.begin(), head.end(), [](int h) { return h <= 0; })) {
    throw SlideError(ErrorCode::InvalidConfig, "lstm head must be positive and end in 1");
  }
  if (!(rate > 0.0) || !(window > 0.0) || length() < 1) {
    throw SlideError(ErrorCode::InvalidConfig, "lstm rate and window must be positive");
  }
  if (!(accel_scale > 0.0) || !(vel_scale > 0.0)) {
    throw SlideError(ErrorCode::InvalidConfig, "lstm input scales must be positive");
  }
}

LstmNetwork::LstmNetwork(LstmShape shape) : shape_(std::move(shape)) {
  shape_.validate();
  length_ = shape_.length();
  std::size_t offset = 0;
  int in = kInputDim;
  for (std::size_t l = 0; l < shape_.layers.size(); ++l) {
    const int h = shape_.layers[l];
    const int li = static_cast<int>(l);
    blocks_.push_back({block_name(li, "W"), 4 * h, in, offset});
    offset += blocks_.back().size();
    blocks_.push_back({block_name(li, "U"), 4 * h, h, offset});
    offset += blocks_.back().size();
    blocks_.push_back({block_name(li, "b"), 4 * h, 1, offset});
    offset += blocks_.back().size();
    in = h;
  }
  params_.assign(offset, 0.0);
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), shape_.head.begin(), shape_.head.end());
  head_ = Mlp(sizes, Activation::Relu, Activation::Identity, "head");
}

void LstmNetwork::init(std::mt19937_64& rng, double output_bias) {
  for (std::size_t l = 0; l < shape_.layers.size(); ++l) {
    const int h = shape_.layers[l];
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(h), 1.0 / std::sqrt(h));
    for (int which = 0; which < 2; ++which) {
      const auto& blk = blocks_[3 * l + which];
      for (std::size_t k = 0; k < blk.size(); ++k) params_[blk.offset + k] = dist(rng);
    }
    const auto& b = blocks_[3 * l + 2];
    std::fill_n(params_.begin() + static_cast<long>(b.offset), b.size(), 0.0);
    std::fill_n(params_.begin() + static_cast<long>(b.offset) + h, h, 1.0);
  }
  head_.init_fan_in(rng);
  head_.bias(head_.num_layers() - 1).setConstant(output_bias);
}

Eigen::Map<const Matrix> LstmNetwork::block(int layer, int which) const {
  const auto& blk = blocks_[3 * layer + which];
  return {params_.data() + blk.offset, blk.rows, blk.cols};
}

Matrix LstmNetwork::make_batch(std::span<const TwoChannelSeries* const> series) const {
  const auto b = static_cast<Eigen::Index>(series.size());
  Matrix out(kInputDim, length_ * b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const TwoChannelSeries& s = *series[j];
    if (static_cast<int>(s.accel.size()) != length_ || static_cast<int>(s.v_rel.size()) != length_) {
      throw SlideError(ErrorCode::DimensionMismatch,
                       "series length " + std::to_string(s.accel.size()) + " != expected " +
                           std::to_string(length_));
    }
    for (int t = 0; t < length_; ++t) {
      out(0, t * b + j) = s.accel[t] / shape_.accel_scale;
      out(1, t * b + j) = s.v_rel[t] / shape_.vel_scale;
    }
  }
  return out;
}

Matrix LstmNetwork::forward(const Matrix& batch, int batch_size, Cache* cache) const {
  const Eigen::Index b = batch_size;
  if (batch.rows() != kInputDim || batch.cols() != length_ * b) {
    throw SlideError(ErrorCode::DimensionMismatch, "lstm batch has wrong shape");
  }
  if (cache) {
    cache->batch = batch_size;
    cache->layers.assign(shape_.layers.size(), {});
  }
  Matrix input = batch;
  for (std::size_t l = 0; l < shape_.layers.size(); ++l) {
    const int h = shape_.layers[l];
    const auto W = block(static_cast<int>(l), 0);
    const auto U = block(static_cast<int>(l), 1);
    const auto bias = block(static_cast<int>(l), 2);
    Matrix gates = W * input;
    gates.colwise() += bias.col(0);
    Matrix c(h, length_ * b), out(h, length_ * b);
    Matrix h_prev = Matrix::Zero(h, b), c_prev = Matrix::Zero(h, b);
    for (int t = 0; t < length_; ++t) {
      auto z = gates.middleCols(t * b, b);
      z.noalias() += U * h_prev;
      z.topRows(h) = z.topRows(h).unaryExpr(&sigmoid);
      z.middleRows(h, h) = z.middleRows(h, h).unaryExpr(&sigmoid);
      z.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh();
      z.bottomRows(h) = z.bottomRows(h).unaryExpr(&sigmoid);
      auto ct = c.middleCols(t * b, b);
      ct = z.middleRows(h, h).cwiseProduct(c_prev) + z.topRows(h).cwiseProduct(z.middleRows(2 * h, h));
      auto ht = out.middleCols(t * b, b);
      ht = z.bottomRows(h).cwiseProduct(Matrix(ct.array().tanh()));
      h_prev = ht;
      c_prev = ct;
    }
    if (cache) {
      auto& lc = cache->layers[l];
      lc.input = std::move(input);
      lc.gates = std::move(gates);
      lc.c = c;
      lc.h = out;
    }
    input = std::move(out);
  }
  const Matrix last = input.rightCols(b);
  return head_.forward(last, cache ? &cache->head : nullptr);
}

void LstmNetwork::backward(const Cache& cache, const Matrix& output_grad, std::span<double> grad,
                           std::span<double> head_grad) const {
  if (grad.size() != params_.size() || head_grad.size() != head_.params().size()) {
    throw SlideError(ErrorCode::DimensionMismatch, "lstm gradient buffers have wrong size");
  }
  const Eigen::Index b = cache.batch;
  const Matrix d_last = head_.backward(cache.head, output_grad, head_grad);
  Matrix d_out;  // gradient w.r.t. the current layer's outputs, H x T*B
  for (int l = static_cast<int>(shape_.layers.size()) - 1; l >= 0; --l) {
    const int h = shape_.layers[l];
    const LayerCache& lc = cache.layers[l];
    if (d_out.size() == 0) {
      d_out = Matrix::Zero(h, length_ * b);
      d_out.rightCols(b) = d_last;
    }
    const auto U = block(l, 1);
    Matrix dz(4 * h, length_ * b);
    Matrix dh_next = Matrix::Zero(h, b), dc_next = Matrix::Zero(h, b);
    for (int t = length_ - 1; t >= 0; --t) {
      const auto g = lc.gates.middleCols(t * b, b);
      const auto i = g.topRows(h).array();
      const auto f = g.middleRows(h, h).array();
      const auto cand = g.middleRows(2 * h, h).array();
      const auto o = g.bottomRows(h).array();
      const Eigen::ArrayXXd tc = lc.c.middleCols(t * b, b).array().tanh();
      const Eigen::ArrayXXd dh = d_out.middleCols(t * b, b).array() + dh_next.array();
      const Eigen::ArrayXXd dc = dh * o * (1.0 - tc.square()) + dc_next.array();
      const Eigen::ArrayXXd c_prev =
          t > 0 ? Eigen::ArrayXXd(lc.c.middleCols((t - 1) * b, b).array()) : Eigen::ArrayXXd::Zero(h, b);
      auto d = dz.middleCols(t * b, b);
      d.topRows(h) = (dc * cand * i * (1.0 - i)).matrix();
      d.middleRows(h, h) = (dc * c_prev * f * (1.0 - f)).matrix();
      d.middleRows(2 * h, h) = (dc * i * (1.0 - cand.square())).matrix();
      d.bottomRows(h) = (dh * tc * o * (1.0 - o)).matrix();
      dc_next = (dc * f).matrix();
      dh_next.noalias() = U.transpose() * d;
    }
    const auto& bw = blocks_[3 * l];
    const auto& bu = blocks_[3 * l + 1];
    const auto& bb = blocks_[3 * l + 2];
    Eigen::Map<Matrix> gW(grad.data() + bw.offset, bw.rows, bw.cols);
    Eigen::Map<Matrix> gU(grad.data() + bu.offset, bu.rows, bu.cols);
    Eigen::Map<Vector> gb(grad.data() + bb.offset, bb.rows);
    gW.noalias() += dz * lc.input.transpose();
    if (length_ > 1) {
      gU.noalias() += dz.rightCols((length_ - 1) * b) * lc.h.leftCols((length_ - 1) * b).transpose();
    }
    gb += dz.rowwise().sum();
    if (l > 0) d_out = block(l, 0).transpose() * dz;
  }
}

double LstmNetwork::forward_one(const TwoChannelSeries& series) const {
  const TwoChannelSeries* ptr = &series;
  const Matrix batch = make_batch(std::span<const TwoChannelSeries* const>(&ptr, 1));
  return forward(batch, 1)(0, 0);
}

void LstmNetwork::export_to(TensorFile& file) const {
  for (const auto& blk : blocks_) {
    file.add(blk.name, {blk.rows, blk.cols},
             std::span<const double>(params_.data() + blk.offset, blk.size()));
  }
  head_.export_to(file);
  file.meta["kind"] = "lstm";
  file.meta["layers"] = shape_.layers;
  file.meta["head"] = shape_.head;
  file.meta["rate"] = shape_.rate;
  file.meta["window"] = shape_.window;
  file.meta["accel_scale"] = shape_.accel_scale;
  file.meta["vel_scale"] = shape_.vel_scale;
}

void LstmNetwork::save(const std::filesystem::path& manifest, nlohmann::json meta) const {
  TensorFile file;
  if (meta.is_object()) file.meta = std::move(meta);
  export_to(file);
  file.save(manifest);
}

LstmNetwork LstmNetwork::load(const std::filesystem::path& manifest) {
  const TensorFile file = TensorFile::load(manifest);
  LstmShape shape;
  try {
    if (file.meta.value("kind", "") != "lstm") {
      throw SlideError(ErrorCode::InvalidConfig, manifest.string() + " is not an lstm checkpoint");
    }
    shape.layers = file.meta.at("layers").get<std::vector<int>>();
    shape.head = file.meta.at("head").get<std::vector<int>>();
    shape.rate = file.meta.at("rate").get<double>();
    shape.window = file.meta.at("window").get<double>();
    shape.accel_scale = file.meta.at("accel_scale").get<double>();
    shape.vel_scale = file.meta.at("vel_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SlideError(ErrorCode::InvalidConfig, "lstm checkpoint meta: " + std::string(e.what()));
  }
  LstmNetwork net(shape);
  for (const auto& blk : net.blocks_) {
    const NamedArray& arr = file.get(blk.name);
    if (arr.shape != std::vector<std::int64_t>{blk.rows, blk.cols}) {
      throw SlideError(ErrorCode::DimensionMismatch, "shape mismatch for " + blk.name);
    }
    std::copy(arr.data.begin(), arr.data.end(), net.params_.begin() + static_cast<long>(blk.offset));
  }
  net.head_.import_from(file);
  return net;
}

double estimate_lstm(const LstmNetwork& net, const TwoChannelSeries& series) {
  const double mu = net.forward_one(series);
  if (!std::isfinite(mu)) throw SlideError(ErrorCode::DegenerateTrace, "lstm output is not finite");
  return std::clamp(mu, 0.01, 0.6);
}

// Dataset

void FrictionDataset::save(const std::filesystem::path& manifest) const {
  const auto n = static_cast<std::int64_t>(size());
  std::vector<float> series(static_cast<std::size_t>(n) * 2 * length);
  for (std::int64_t k = 0; k < n; ++k) {
    const auto& s = inputs[k];
    float* dst = series.data() + k * 2 * length;
    for (int t = 0; t < length; ++t) {
      dst[t] = static_cast<float>(s.accel[t]);
      dst[length + t] = static_cast<float>(s.v_rel[t]);
    }
  }
  TensorFile file;
  file.add("series", {n, 2, length}, std::move(series));
  file.add("labels", {n}, std::vector<float>(labels.begin(), labels.end()));
  file.meta["kind"] = "friction-dataset";
  file.meta["rate"] = rate;
  file.meta["length"] = length;
  file.save(manifest);
}

FrictionDataset FrictionDataset::load(const std::filesystem::path& manifest) {
  const TensorFile file = TensorFile::load(manifest);
  if (file.meta.value("kind", "") != "friction-dataset") {
    throw SlideError(ErrorCode::InvalidConfig, manifest.string() + " is not a friction dataset");
  }
  FrictionDataset data;
  data.rate = file.meta.value("rate", 0.0);
  data.length = file.meta.value("length", 0);
  const NamedArray& series = file.get("series");
  const NamedArray& labels = file.get("labels");
  if (series.shape.size() != 3 || series.shape[1] != 2 || series.shape[2] != data.length ||
      labels.shape.size() != 1 || labels.shape[0] != series.shape[0]) {
    throw SlideError(ErrorCode::DimensionMismatch, "dataset arrays have inconsistent shapes");
  }
  const auto n = static_cast<std::size_t>(labels.shape[0]);
  data.labels.assign(labels.data.begin(), labels.data.end());
  data.inputs.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const float* src = series.data.data() + k * 2 * data.length;
    auto& s = data.inputs[k];
    s.rate = data.rate;
    s.accel.assign(src, src + data.length);
    s.v_rel.assign(src + data.length, src + 2 * data.length);
  }
  return data;
}

namespace {

// Returns false when the draw cannot fit the window; the caller redraws.
bool draw_action(std::mt19937_64& rng, double limit, double window, RawAction& out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double dir = u(rng) < 0.5 ? -1.0 : 1.0;
  const double t_m = 0.05 + u(rng) * (std::min(1.2, window) - 0.05);
  const double lo = std::min(0.05, 0.5 * limit);
  const double a_m = lo + u(rng) * (limit - lo);
  const double a_i_min = std::max(lo, a_m * t_m / (window - t_m));
  if (a_i_min >= limit) return false;
  const double a_i = a_i_min + u(rng) * (limit - a_i_min);
  out = {dir * a_i, -dir * a_m, t_m};
  return true;
}

}  // namespace

FrictionDataset gen_dataset(std::size_t n, std::uint64_t seed, const DatasetOptions& opt) {
  if (n == 0) throw SlideError(ErrorCode::InvalidArgument, "dataset size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FrictionDataset data;
  data.rate = opt.rate;
  data.length = static_cast<int>(std::llround(opt.rate * opt.window));
  data.inputs.reserve(n);
  data.labels.reserve(n);
  while (data.size() < n) {
    const double mu = opt.mu_lo + u(rng) * (opt.mu_hi - opt.mu_lo);
    const FrictionModel f = FrictionModel::coulomb(mu, opt.static_ratio, opt.g);
    const bool want_slip = u(rng) < opt.slip_fraction;
    const double stick_limit = f.mu_s * f.g;
    const double limit = want_slip ? kMaxAccel : std::min(kMaxAccel, stick_limit);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      RawAction raw;
      if (!draw_action(rng, limit, opt.window, raw)) continue;
      const ManeuverAction action = validate_action(raw);
      const SlideResult res = simulate_closed_form(VelocityProfile(action), f, 0.0);
      if (res.duration > opt.window) continue;
      TwoChannelSeries s = sample_relative_trace(res, opt.rate, opt.window);
      const bool slid = std::any_of(s.v_rel.begin(), s.v_rel.end(), [](double v) { return v != 0.0; });
      if (slid != want_slip) continue;
      data.inputs.push_back(std::move(s));
      data.labels.push_back(mu);
      break;
    }
  }
  return data;
}

double slip_fraction(const FrictionDataset& data) {
  if (data.size() == 0) return 0.0;
  const auto slid = std::count_if(data.inputs.begin(), data.inputs.end(), [](const TwoChannelSeries& s) {
    return std::any_of(s.v_rel.begin(), s.v_rel.end(), [](double v) { return v != 0.0; });
  });
  return static_cast<double>(slid) / static_cast<double>(data.size());
}

DatasetSplit split_dataset(std::size_t n, std::uint64_t seed, double train_frac, double val_frac) {
  if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
    throw SlideError(ErrorCode::InvalidArgument, "split fractions must be non-negative and sum to <= 1");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t k = n; k > 1; --k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::swap(idx[k - 1], idx[pick(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n))));
  DatasetSplit split;
  split.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
  split.val.assign(idx.begin() + static_cast<long>(n_train), idx.begin() + static_cast<long>(n_train + n_val));
  split.test.assign(idx.begin() + static_cast<long>(n_train + n_val), idx.end());
  return split;
}

namespace {

std::vector<const TwoChannelSeries*> gather(const FrictionDataset& data,
                                            std::span<const std::size_t> indices) {
  std::vector<const TwoChannelSeries*> out;
  out.reserve(indices.size());
  for (std::size_t k : indices) out.push_back(&data.inputs.at(k));
  return out;
}

}  // namespace

double evaluate_mae(const LstmNetwork& net, const FrictionDataset& data,
                    std::span<const std::size_t> indices, int batch) {
  if (indices.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch)) {
    const auto chunk = indices.subspan(start, std::min<std::size_t>(batch, indices.size() - start));
    const auto ptrs = gather(data, chunk);
    const Matrix pred = net.forward(net.make_batch(ptrs), static_cast<int>(chunk.size()));
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      total += std::abs(pred(0, static_cast<Eigen::Index>(j)) - data.labels[chunk[j]]);
    }
  }
  return total / static_cast<double>(indices.size());
}

std::vector<EpochMetrics> lstm_train(LstmNetwork& net, const FrictionDataset& data,
                                     const DatasetSplit& split, const LstmTrainOptions& opt,
                                     const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (split.train.empty()) throw SlideError(ErrorCode::InvalidArgument, "empty training split");
  if (opt.epochs < 0 || opt.batch <= 0 || !(opt.lr > 0.0)) {
    throw SlideError(ErrorCode::InvalidConfig, "lstm training options out of range");
  }
  std::mt19937_64 rng(opt.seed);
  AdamState adam(net.params().size(), opt.lr);
  AdamState adam_head(net.head().params().size(), opt.lr);
  ParamVector grad(net.params().size()), head_grad(net.head().params().size());
  std::vector<std::size_t> order = split.train;
  std::vector<EpochMetrics> history;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t k = order.size(); k > 1; --k) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::swap(order[k - 1], order[pick(rng)]);
    }
    double abs_err = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch)) {
      const std::span<const std::size_t> chunk(order.data() + start,
                                               std::min<std::size_t>(opt.batch, order.size() - start));
      const int b = static_cast<int>(chunk.size());
      const auto ptrs = gather(data, chunk);
      LstmNetwork::Cache cache;
      const Matrix pred = net.forward(net.make_batch(ptrs), b, &cache);
      Matrix d_pred(1, b);
      for (int j = 0; j < b; ++j) {
        const double err = pred(0, j) - data.labels[chunk[j]];
        abs_err += std::abs(err);
        d_pred(0, j) = 2.0 * err / b;
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      std::fill(head_grad.begin(), head_grad.end(), 0.0);
      net.backward(cache, d_pred, grad, head_grad);
      if (opt.grad_clip > 0.0) {
        double sq = 0.0;
        for (double g : grad) sq += g * g;
        for (double g : head_grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > opt.grad_clip) {
          const double s = opt.grad_clip / norm;
          for (double& g : grad) g *= s;
          for (double& g : head_grad) g *= s;
        }
      }
      adam_step(net.params(), grad, adam);
      adam_step(net.head().params(), head_grad, adam_head);
    }
    adam.lr *= opt.lr_decay;
    adam_head.lr *= opt.lr_decay;
    EpochMetrics m;
    m.epoch = epoch;
    m.train_mae = abs_err / static_cast<double>(order.size());
    m.val_mae = evaluate_mae(net, data, split.val);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

}  // namespace slide
