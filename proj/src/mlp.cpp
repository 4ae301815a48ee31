#include "slide/mlp.hpp"

#include <cmath>

#include "slide/error.hpp"

namespace slide {
namespace {

void apply(Activation act, Matrix& m) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::Relu: m = m.cwiseMax(0.0); break;
    case Activation::Tanh: m = m.array().tanh().matrix(); break;
  }
}

// dL/dz from dL/da, given z and a = act(z).
Matrix activation_grad(Activation act, const Matrix& z, const Matrix& a, const Matrix& da) {
  switch (act) {
    case Activation::Identity: return da;
    case Activation::Relu: return (z.array() > 0.0).select(da, 0.0);
    case Activation::Tanh: return (da.array() * (1.0 - a.array().square())).matrix();
  }
  return da;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw SlideError(ErrorCode::InvalidArgument, "unknown activation " + std::string(s));
}

Mlp::Mlp(std::vector<int> sizes, Activation hidden, Activation output, std::string name)
    : sizes_(std::move(sizes)), hidden_(hidden), output_(output), name_(std::move(name)) {
  if (sizes_.size() < 2) throw SlideError(ErrorCode::InvalidArgument, "an MLP needs >= 2 sizes");
  std::size_t offset = 0;
  for (int l = 0; l + 1 < static_cast<int>(sizes_.size()); ++l) {
    const std::string prefix = name_ + "/l" + std::to_string(l);
    blocks_.push_back({prefix + "/W", sizes_[l + 1], sizes_[l], offset});
    offset += blocks_.back().size();
    blocks_.push_back({prefix + "/b", sizes_[l + 1], 1, offset});
    offset += blocks_.back().size();
  }
  params_.assign(offset, 0.0);
}

void Mlp::init_fan_in(std::mt19937_64& rng, double final_scale) {
  for (int l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    const double scale = l + 1 == num_layers() ? final_scale : 1.0;
    std::uniform_real_distribution<double> dist(-bound * scale, bound * scale);
    auto w = weight(l);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
    auto b = bias(l);
    for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = dist(rng);
  }
}

Eigen::Map<Matrix> Mlp::weight(int layer) {
  const auto& blk = blocks_[2 * layer];
  return {params_.data() + blk.offset, blk.rows, blk.cols};
}
Eigen::Map<const Matrix> Mlp::weight(int layer) const {
  const auto& blk = blocks_[2 * layer];
  return {params_.data() + blk.offset, blk.rows, blk.cols};
}
Eigen::Map<Vector> Mlp::bias(int layer) {
  const auto& blk = blocks_[2 * layer + 1];
  return {params_.data() + blk.offset, blk.rows};
}
Eigen::Map<const Vector> Mlp::bias(int layer) const {
  const auto& blk = blocks_[2 * layer + 1];
  return {params_.data() + blk.offset, blk.rows};
}

Matrix Mlp::forward(const Matrix& input, Cache* cache) const {
  if (input.rows() != input_dim()) {
    throw SlideError(ErrorCode::DimensionMismatch,
                     name_ + ": expected input dim " + std::to_string(input_dim()) + ", got " +
                         std::to_string(input.rows()));
  }
  if (cache) {
    cache->activations.assign(1, input);
    cache->pre.clear();
  }
  Matrix a = input;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = weight(l) * a;
    z.colwise() += bias(l);
    a = z;
    apply(l + 1 == num_layers() ? output_ : hidden_, a);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->activations.push_back(a);
    }
  }
  return a;
}

Vector Mlp::forward(const Vector& input) const {
  return forward(Matrix(input)).col(0);
}

Matrix Mlp::backward(const Cache& cache, const Matrix& output_grad, std::span<double> grad) const {
  if (grad.size() != params_.size()) {
    throw SlideError(ErrorCode::DimensionMismatch, name_ + ": gradient buffer size mismatch");
  }
  Matrix da = output_grad;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Activation act = l + 1 == num_layers() ? output_ : hidden_;
    const Matrix dz = activation_grad(act, cache.pre[l], cache.activations[l + 1], da);
    const auto& wblk = blocks_[2 * l];
    const auto& bblk = blocks_[2 * l + 1];
    Eigen::Map<Matrix>(grad.data() + wblk.offset, wblk.rows, wblk.cols).noalias() +=
        dz * cache.activations[l].transpose();
    Eigen::Map<Vector>(grad.data() + bblk.offset, bblk.rows) += dz.rowwise().sum();
    da = weight(l).transpose() * dz;
  }
  return da;
}

void Mlp::export_to(TensorFile& file) const {
  for (const auto& blk : blocks_) {
    file.add(blk.name, {blk.rows, blk.cols},
             std::span<const double>(params_.data() + blk.offset, blk.size()));
  }
}

void Mlp::import_from(const TensorFile& file) {
  for (const auto& blk : blocks_) {
    const NamedArray& arr = file.get(blk.name);
    if (arr.shape != std::vector<std::int64_t>{blk.rows, blk.cols}) {
      throw SlideError(ErrorCode::DimensionMismatch, "shape mismatch for " + blk.name);
    }
    std::copy(arr.data.begin(), arr.data.end(), params_.begin() + static_cast<long>(blk.offset));
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size() || s.m.size() != params.size()) {
    throw SlideError(ErrorCode::DimensionMismatch, "adam: parameter/gradient/moment sizes differ");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * grads[k];
    s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * grads[k] * grads[k];
    params[k] -= s.lr * (s.m[k] / c1) / (std::sqrt(s.v[k] / c2) + s.eps);
  }
}

void soft_update(std::span<double> target, std::span<const double> source, double tau) {
  if (target.size() != source.size()) {
    throw SlideError(ErrorCode::DimensionMismatch, "soft_update: size mismatch");
  }
  for (std::size_t k = 0; k < target.size(); ++k) {
    target[k] = tau * source[k] + (1.0 - tau) * target[k];
  }
}

}  // namespace slide
