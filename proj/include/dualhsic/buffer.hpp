#pragma once

// Fixed-capacity rehearsal memory with reservoir insertion: after n >= capacity
// observations every stream element is resident with probability capacity/n.

#include <cstdint>
#include <optional>
#include <vector>

#include "dualhsic/numerics.hpp"
#include "dualhsic/rng.hpp"

namespace dualhsic {

struct BufferEntry {
  Vector x;
  int y = 0;
  std::optional<Vector> logits;  // present when the base method replays logits
  int task_id = 0;
  std::uint64_t insertion_index = 0;  // position in the observed stream
};

class RehearsalBuffer {
 public:
  RehearsalBuffer() : RehearsalBuffer(0, RngState(0)) {}
  RehearsalBuffer(std::size_t capacity, RngState rng) : capacity_(capacity), rng_(rng) {}

  // Reservoir update (algorithm R). Capacity 0 leaves the buffer untouched
  // and draws nothing; `observed` still counts the stream element.
  void observe(BufferEntry entry);

  // Uniform draw: without replacement when the buffer holds at least
  // batch_size entries, with replacement otherwise.
  std::vector<BufferEntry> sample(std::size_t batch_size, RngState& rng) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t observed() const { return observed_; }
  bool empty() const { return entries_.empty(); }
  const std::vector<BufferEntry>& entries() const { return entries_; }
  const RngState& rng() const { return rng_; }

  // Checkpoint restore.
  static RehearsalBuffer restore(std::size_t capacity, std::vector<BufferEntry> entries,
                                 std::uint64_t observed, RngState rng);

 private:
  std::size_t capacity_;
  std::vector<BufferEntry> entries_;
  std::uint64_t observed_ = 0;
  RngState rng_;
};

}  // namespace dualhsic
