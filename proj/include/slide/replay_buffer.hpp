#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

namespace slide {

inline constexpr int kStateDim = 14;
inline constexpr int kActionDim = 3;

using StateVec = std::array<double, kStateDim>;
using ActionVec = std::array<double, kActionDim>;

struct Transition {
  StateVec state{};
  ActionVec action{};  // normalized, in [-1, 1]
  double reward = 0.0;
  StateVec next_state{};
  bool done = false;
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return storage_.size(); }
  const Transition& at(std::size_t logical_index) const;

  /// Indices drawn uniformly without replacement (Floyd's algorithm).
  /// Requires batch <= size().
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;
  std::vector<Transition> sample(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::vector<Transition> storage_;
  std::size_t head_ = 0;  // next slot to overwrite
  std::size_t size_ = 0;
};

}  // namespace slide
