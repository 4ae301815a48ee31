#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include <doctest.h>

#include "slide/lstm.hpp"
#include "support.hpp"

using namespace slide;
using slide::test::check_error;

namespace {

LstmShape tiny_shape() {
  LstmShape s;
  s.layers = {8, 4};
  s.head = {3, 1};
  s.rate = 10.0;  // T = 20
  return s;
}

TwoChannelSeries random_series(int length, double rate, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  TwoChannelSeries s;
  s.rate = rate;
  for (int t = 0; t < length; ++t) {
    s.accel.push_back(2.0 * n(rng));
    s.v_rel.push_back(0.3 * n(rng));
  }
  return s;
}

double weighted_loss(const LstmNetwork& net, const Matrix& batch, int b, const Matrix& w) {
  return (net.forward(batch, b).array() * w.array()).sum();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("slide_lstm_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

LstmShape small_shape() {
  LstmShape s;
  s.layers = {16, 8};
  s.head = {8, 1};
  return s;
}

}  // namespace

TEST_CASE("shape validation") {
  LstmShape s;
  CHECK(s.length() == 100);
  s.head = {4, 2};
  check_error(ErrorCode::InvalidConfig, [&] { s.validate(); });
  s = LstmShape{};
  s.layers = {};
  check_error(ErrorCode::InvalidConfig, [&] { s.validate(); });
}

TEST_CASE("zero parameters give a zero output") {
  LstmNetwork net(tiny_shape());
  std::fill(net.params().begin(), net.params().end(), 0.0);
  std::fill(net.head().params().begin(), net.head().params().end(), 0.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5; ++i) CHECK(net.forward_one(random_series(20, 10.0, rng)) == 0.0);
}

TEST_CASE("zero input kernels decouple the input") {
  std::mt19937_64 rng(2);
  LstmNetwork net(tiny_shape());
  net.init(rng, 0.2);
  const ParamBlock& w0 = net.blocks().front();
  std::fill_n(net.params().begin() + static_cast<long>(w0.offset), w0.size(), 0.0);
  TwoChannelSeries zero;
  zero.rate = 10.0;
  zero.accel.assign(20, 0.0);
  zero.v_rel.assign(20, 0.0);
  const double base = net.forward_one(zero);
  for (int i = 0; i < 5; ++i) CHECK(net.forward_one(random_series(20, 10.0, rng)) == base);
}

TEST_CASE("backward matches central differences") {
  std::mt19937_64 rng(3);
  LstmNetwork net(tiny_shape());
  net.init(rng, 0.1);
  std::vector<TwoChannelSeries> data;
  for (int i = 0; i < 3; ++i) data.push_back(random_series(20, 10.0, rng));
  std::vector<const TwoChannelSeries*> ptrs;
  for (const auto& s : data) ptrs.push_back(&s);
  const Matrix batch = net.make_batch(ptrs);
  Matrix w(1, 3);
  w << 0.7, -1.3, 0.4;

  LstmNetwork::Cache cache;
  net.forward(batch, 3, &cache);
  std::vector<double> grad(net.params().size(), 0.0), head_grad(net.head().params().size(), 0.0);
  net.backward(cache, w, grad, head_grad);

  const double h = 1e-6;
  auto close = [](double fd, double an) { return std::abs(fd - an) <= 1e-7 + 1e-3 * std::abs(fd); };
  int bad = 0;
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    const double keep = net.params()[k];
    net.params()[k] = keep + h;
    const double up = weighted_loss(net, batch, 3, w);
    net.params()[k] = keep - h;
    const double down = weighted_loss(net, batch, 3, w);
    net.params()[k] = keep;
    if (!close((up - down) / (2.0 * h), grad[k])) ++bad;
  }
  for (std::size_t k = 0; k < net.head().params().size(); ++k) {
    const double keep = net.head().params()[k];
    net.head().params()[k] = keep + h;
    const double up = weighted_loss(net, batch, 3, w);
    net.head().params()[k] = keep - h;
    const double down = weighted_loss(net, batch, 3, w);
    net.head().params()[k] = keep;
    if (!close((up - down) / (2.0 * h), head_grad[k])) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("forward is length strict") {
  LstmNetwork net(tiny_shape());
  std::mt19937_64 rng(4);
  net.init(rng);
  const TwoChannelSeries wrong = random_series(19, 10.0, rng);
  check_error(ErrorCode::DimensionMismatch, [&] { net.forward_one(wrong); });
  check_error(ErrorCode::DimensionMismatch, [&] { estimate_lstm(net, wrong); });
}

TEST_CASE("estimate is clamped") {
  LstmNetwork net(tiny_shape());
  std::fill(net.params().begin(), net.params().end(), 0.0);
  std::fill(net.head().params().begin(), net.head().params().end(), 0.0);
  std::mt19937_64 rng(5);
  const TwoChannelSeries s = random_series(20, 10.0, rng);
  net.head().bias(net.head().num_layers() - 1).setConstant(3.0);
  CHECK(estimate_lstm(net, s) == 0.6);
  net.head().bias(net.head().num_layers() - 1).setConstant(-1.0);
  CHECK(estimate_lstm(net, s) == 0.01);
}

TEST_CASE("dataset generation") {
  const FrictionDataset a = gen_dataset(1000, 42);
  CHECK(a.size() == 1000);
  CHECK(a.inputs.size() == 1000);
  CHECK(a.length == 100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.labels[i] >= 0.05);
    CHECK(a.labels[i] <= 0.45);
    CHECK(a.inputs[i].length() == 100);
  }
  CHECK(slip_fraction(a) >= 0.7);

  const auto dir = scratch_dir("data");
  std::filesystem::create_directories(dir / "a");
  std::filesystem::create_directories(dir / "b");
  a.save(dir / "a" / "data.json");
  gen_dataset(1000, 42).save(dir / "b" / "data.json");
  CHECK(slurp(payload_path(dir / "a" / "data.json")) == slurp(payload_path(dir / "b" / "data.json")));
  CHECK(slurp(dir / "a" / "data.json") == slurp(dir / "b" / "data.json"));

  const FrictionDataset back = FrictionDataset::load(dir / "a" / "data.json");
  REQUIRE(back.size() == a.size());
  CHECK(back.length == a.length);
  CHECK(static_cast<float>(a.labels[7]) == back.labels[7]);
  CHECK(static_cast<float>(a.inputs[7].v_rel[3]) == back.inputs[7].v_rel[3]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("split is a seeded partition") {
  const DatasetSplit s = split_dataset(1000, 9);
  CHECK(s.train.size() == 800);
  CHECK(s.val.size() == 100);
  CHECK(s.test.size() == 100);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(1000);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(all == expected);

  const DatasetSplit again = split_dataset(1000, 9);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK(split_dataset(1000, 10).train != s.train);
}

TEST_CASE("constant labels are learned") {
  FrictionDataset data = gen_dataset(256, 5);
  std::fill(data.labels.begin(), data.labels.end(), 0.3);
  const DatasetSplit split = split_dataset(data.size(), 5);
  std::mt19937_64 rng(5);
  LstmNetwork net(small_shape());
  net.init(rng, 0.0);
  LstmTrainOptions opt;
  opt.epochs = 40;
  opt.batch = 32;
  opt.lr = 1e-2;
  opt.lr_decay = 0.9;
  lstm_train(net, data, split, opt);
  CHECK(evaluate_mae(net, data, split.val) < 1e-3);
}

TEST_CASE("real labels beat a shuffled-label control") {
  const FrictionDataset data = gen_dataset(1500, 11);
  const DatasetSplit split = split_dataset(data.size(), 11);
  LstmTrainOptions opt;
  opt.epochs = 6;

  const double mean = std::accumulate(data.labels.begin(), data.labels.end(), 0.0) / data.size();
  std::mt19937_64 rng(11);
  LstmNetwork real(small_shape());
  real.init(rng, mean);
  const auto hist = lstm_train(real, data, split, opt);
  REQUIRE(hist.size() == 6);
  CHECK(hist.back().train_mae < hist.front().train_mae);

  FrictionDataset shuffled = data;
  std::shuffle(shuffled.labels.begin(), shuffled.labels.end(), rng);
  LstmNetwork control(small_shape());
  control.init(rng, mean);
  lstm_train(control, shuffled, split, opt);

  const double real_mae = evaluate_mae(real, data, split.val);
  const double control_mae = evaluate_mae(control, shuffled, split.val);
  MESSAGE("val MAE real " << real_mae << " shuffled " << control_mae);
  CHECK(control_mae > 0.08);
  CHECK(real_mae < 0.75 * control_mae);

  {
    // Reversing a slip sequence changes the output.
    int checked = 0;
    for (std::size_t i : split.val) {
      const TwoChannelSeries& s = data.inputs[i];
      if (std::none_of(s.v_rel.begin(), s.v_rel.end(), [](double v) { return v != 0.0; })) continue;
      TwoChannelSeries rev = s;
      std::reverse(rev.accel.begin(), rev.accel.end());
      std::reverse(rev.v_rel.begin(), rev.v_rel.end());
      CHECK(std::abs(real.forward_one(rev) - real.forward_one(s)) > 1e-4);
      if (++checked == 20) break;
    }
    CHECK(checked == 20);
  }
  {
    // Checkpoint round trip.
    const auto dir = scratch_dir("ckpt");
    real.save(dir / "net.json", {{"note", "test"}});
    const LstmNetwork back = LstmNetwork::load(dir / "net.json");
    CHECK(back.shape().layers == real.shape().layers);
    back.save(dir / "again.json", {{"note", "test"}});
    CHECK(slurp(payload_path(dir / "net.json")) == slurp(payload_path(dir / "again.json")));
    for (std::size_t i : split.test) {
      CHECK(back.forward_one(data.inputs[i]) == doctest::Approx(real.forward_one(data.inputs[i])).epsilon(1e-4));
    }
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("training rejects an empty split") {
  const FrictionDataset data = gen_dataset(10, 1);
  LstmNetwork net(small_shape());
  std::mt19937_64 rng(1);
  net.init(rng);
  check_error(ErrorCode::InvalidArgument, [&] { lstm_train(net, data, DatasetSplit{}, {}); });
}
