#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "advbench/core/tensor.hpp"

namespace advbench {

/// Named flat parameter blocks. Gradients and optimizer state reuse the same layout.
template <class T>
class Parameters {
 public:
  /// Returns the index of the new block.
  std::size_t add(std::string name, std::size_t count, T fill = T(0)) {
    names_.push_back(std::move(name));
    blocks_.emplace_back(count, fill);
    return blocks_.size() - 1;
  }

  std::size_t num_blocks() const { return blocks_.size(); }
  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.size();
    return n;
  }

  AlignedVector<T>& block(std::size_t i) { return blocks_[i]; }
  const AlignedVector<T>& block(std::size_t i) const { return blocks_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  std::size_t find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    throw ContractError("no parameter block named '" + std::string(name) + "'");
  }

  Parameters zeros_like() const {
    Parameters z;
    for (std::size_t i = 0; i < blocks_.size(); ++i) z.add(names_[i], blocks_[i].size());
    return z;
  }

  void fill(T value) {
    for (auto& b : blocks_) std::fill(b.begin(), b.end(), value);
  }

  void fill_block(std::size_t i, T value) { std::fill(blocks_[i].begin(), blocks_[i].end(), value); }

  bool same_layout(const Parameters& other) const {
    if (other.blocks_.size() != blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (other.blocks_[i].size() != blocks_[i].size()) return false;
    return true;
  }

  /// this += scale * other
  void axpy(T scale, const Parameters& other) {
    require(same_layout(other), "parameter layouts differ");
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      for (std::size_t j = 0; j < blocks_[i].size(); ++j) blocks_[i][j] += scale * other.blocks_[i][j];
  }

  bool all_finite() const {
    for (const auto& b : blocks_)
      for (T v : b)
        if (!std::isfinite(v)) return false;
    return true;
  }

  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& b : blocks_) h = hash_values<T>(b, h);
    return h;
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<AlignedVector<T>> blocks_;
};

/// He-normal initialisation for a block with the given fan-in.
template <class T>
void he_normal(AlignedVector<T>& block, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : block) v = static_cast<T>(dist(rng));
}

}  // namespace advbench
