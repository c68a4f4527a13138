#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "bfp/error.hpp"
#include "bfp/matrix.hpp"
#include "bfp/rng.hpp"

namespace bfp {

/// Fixed-capacity replay memory. Insertion follows reservoir sampling or
/// its class-balanced variant: the fill phase is shared; once full, a
/// uniform draw j in [0, N] decides acceptance, and the balanced variant
/// evicts a random member of the currently largest class instead of slot j.
class MemoryBuffer {
 public:
  struct Stored {
    std::vector<double> input;
    int label = 0;
  };

  MemoryBuffer(std::size_t capacity, std::uint64_t seed)
      : capacity_(capacity), rng_(seed) {
    if (capacity == 0) throw InvalidInput("MemoryBuffer: capacity must be positive");
    slots_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  /// Number of stream examples offered so far.
  std::uint64_t seen() const { return seen_; }
  const Stored& slot(std::size_t i) const { return slots_[i]; }

  void reservoir_insert(std::vector<double> input, int label) {
    if (slots_.size() < capacity_) {
      slots_.push_back(Stored{std::move(input), label});
    } else {
      const std::uint64_t j = rng_.below_or_equal(seen_);
      if (j < capacity_) slots_[static_cast<std::size_t>(j)] = Stored{std::move(input), label};
    }
    ++seen_;
  }

  void balanced_reservoir_insert(std::vector<double> input, int label) {
    if (slots_.size() < capacity_) {
      slots_.push_back(Stored{std::move(input), label});
      ++seen_;
      return;
    }
    const std::uint64_t j = rng_.below_or_equal(seen_);
    if (j < capacity_) {
      // Largest class, ties broken by lowest class index.
      int max_label = 0;
      for (const auto& s : slots_) max_label = std::max(max_label, s.label);
      std::vector<std::size_t> counts(static_cast<std::size_t>(max_label) + 1, 0);
      for (const auto& s : slots_) ++counts[static_cast<std::size_t>(s.label)];
      int largest = 0;
      for (int c = 1; c <= max_label; ++c)
        if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(largest)])
          largest = c;
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i].label == largest) members.push_back(i);
      const std::size_t victim = members[static_cast<std::size_t>(rng_.below(members.size()))];
      slots_[victim] = Stored{std::move(input), label};
    }
    ++seen_;
  }

  /// k stored examples as an input matrix plus labels: uniform without
  /// replacement when k <= size, with replacement otherwise. Draws come
  /// from the caller's stream so per-loss samples stay independent.
  std::pair<Matrix, std::vector<int>> sample_batch(std::size_t k, Rng& rng) const {
    if (slots_.empty())
      throw EmptyBufferError("sample_batch: buffer holds no examples");
    std::vector<std::size_t> chosen(k);
    if (k <= slots_.size()) {
      std::vector<std::size_t> idx(slots_.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        chosen[i] = idx[i];
      }
    } else {
      for (std::size_t i = 0; i < k; ++i)
        chosen[i] = static_cast<std::size_t>(rng.below(slots_.size()));
    }
    Matrix x(slots_.front().input.size(), k);
    std::vector<int> y(k);
    for (std::size_t j = 0; j < k; ++j) {
      const Stored& s = slots_[chosen[j]];
      for (std::size_t i = 0; i < x.rows; ++i) x(i, j) = s.input[i];
      y[j] = s.label;
    }
    return {std::move(x), std::move(y)};
  }

  std::vector<std::size_t> class_counts(int class_count) const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count), 0);
    for (const auto& s : slots_) ++counts[static_cast<std::size_t>(s.label)];
    return counts;
  }

  /// Debug listing: one "slot,label" line per stored example.
  void dump(std::ostream& out) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
      out << i << ',' << slots_[i].label << '\n';
  }

 private:
  std::size_t capacity_;
  std::uint64_t seen_ = 0;
  Rng rng_;
  std::vector<Stored> slots_;
};

}  // namespace bfp
