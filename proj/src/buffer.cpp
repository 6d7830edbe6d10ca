#include "dualhsic/buffer.hpp"

#include <algorithm>

#include "dualhsic/errors.hpp"

namespace dualhsic {

void RehearsalBuffer::observe(BufferEntry entry) {
  ++observed_;
  if (capacity_ == 0) return;
  entry.insertion_index = observed_ - 1;
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(entry));
    return;
  }
  // Element i of the stream survives with probability capacity/i.
  const std::uint64_t slot = rng_.uniform_index(observed_);
  if (slot < capacity_) {
    entries_[static_cast<std::size_t>(slot)] = std::move(entry);
  }
}

std::vector<BufferEntry> RehearsalBuffer::sample(std::size_t batch_size, RngState& rng) const {
  if (entries_.empty()) throw EmptyBufferError("sample: rehearsal buffer is empty");
  std::vector<BufferEntry> batch;
  batch.reserve(batch_size);
  if (entries_.size() < batch_size) {
    for (std::size_t i = 0; i < batch_size; ++i) {
      batch.push_back(entries_[static_cast<std::size_t>(rng.uniform_index(entries_.size()))]);
    }
    return batch;
  }
  // Partial Fisher-Yates over indices; first batch_size slots are the draw.
  std::vector<std::size_t> idx(entries_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(idx.size() - i));
    std::swap(idx[i], idx[j]);
    batch.push_back(entries_[idx[i]]);
  }
  return batch;
}

RehearsalBuffer RehearsalBuffer::restore(std::size_t capacity, std::vector<BufferEntry> entries,
                                         std::uint64_t observed, RngState rng) {
  if (entries.size() > capacity) throw IoError("buffer restore: entries exceed capacity");
  RehearsalBuffer buf(capacity, rng);
  buf.entries_ = std::move(entries);
  buf.observed_ = observed;
  return buf;
}

}  // namespace dualhsic
