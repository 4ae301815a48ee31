#include "slide/replay_buffer.hpp"

#include <algorithm>

#include "slide/error.hpp"

namespace slide {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : storage_(capacity) {
  if (capacity == 0) throw SlideError(ErrorCode::InvalidArgument, "replay capacity must be > 0");
}

void ReplayBuffer::push(const Transition& t) {
  storage_[head_] = t;
  head_ = (head_ + 1) % storage_.size();
  size_ = std::min(size_ + 1, storage_.size());
}

// Logical index 0 is the oldest stored transition.
const Transition& ReplayBuffer::at(std::size_t logical_index) const {
  if (logical_index >= size_) throw SlideError(ErrorCode::InvalidArgument, "replay index out of range");
  const std::size_t oldest = size_ < storage_.size() ? 0 : head_;
  return storage_[(oldest + logical_index) % storage_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch,
                                                      std::mt19937_64& rng) const {
  if (batch > size_) throw SlideError(ErrorCode::InvalidArgument, "batch larger than replay size");
  std::vector<std::size_t> chosen;
  chosen.reserve(batch);
  for (std::size_t j = size_ - batch; j < size_; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
      chosen.push_back(t);
    } else {
      chosen.push_back(j);
    }
  }
  return chosen;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, std::mt19937_64& rng) const {
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t idx : sample_indices(batch, rng)) out.push_back(at(idx));
  return out;
}

}  // namespace slide
