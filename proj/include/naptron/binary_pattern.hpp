#pragma once

#include <naptron/error.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace naptron {

/// Pre-binarization activations of one detection at one layer.
using ActivationVector = std::vector<double>;

inline constexpr std::size_t kBitsPerWord = 64;

constexpr std::size_t words_for_bits(std::size_t bits) noexcept {
  return (bits + kBitsPerWord - 1) / kBitsPerWord;
}

/// Bit-packed neuron activation pattern. Bit i lives in word i / 64 at
/// position i % 64; padding bits past `size()` are always zero.
class BinaryPattern {
 public:
  BinaryPattern() = default;

  explicit BinaryPattern(std::size_t length)
      : words_(words_for_bits(length), 0), length_(length) {
    if (length == 0) throw DimensionError("binary pattern length must be >= 1");
  }

  /// Adopts packed words; padding bits must already be zero.
  BinaryPattern(std::vector<std::uint64_t> words, std::size_t length)
      : words_(std::move(words)), length_(length) {
    if (length == 0) throw DimensionError("binary pattern length must be >= 1");
    if (words_.size() != words_for_bits(length))
      throw DimensionError("word count does not match pattern length " +
                           std::to_string(length));
    if (padding_mask() & words_.back())
      throw InputError("binary pattern has non-zero padding bits");
  }

  static BinaryPattern from_bools(std::span<const bool> bits) {
    BinaryPattern pat(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) pat.set(i, true);
    return pat;
  }

  /// Parses a string of '0'/'1' characters, bit 0 first.
  static BinaryPattern from_string(std::string_view text) {
    BinaryPattern pat(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '1') pat.set(i, true);
      else if (text[i] != '0') throw InputError("pattern text must be 0/1");
    }
    return pat;
  }

  std::size_t size() const noexcept { return length_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool test(std::size_t i) const noexcept {
    return (words_[i / kBitsPerWord] >> (i % kBitsPerWord)) & 1U;
  }

  void set(std::size_t i, bool value) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i % kBitsPerWord);
    if (value) words_[i / kBitsPerWord] |= mask;
    else words_[i / kBitsPerWord] &= ~mask;
  }

  std::size_t popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  BinaryPattern complement() const {
    BinaryPattern out = *this;
    for (auto& w : out.words_) w = ~w;
    out.words_.back() &= ~padding_mask();
    return out;
  }

  std::string to_string() const {
    std::string s(length_, '0');
    for (std::size_t i = 0; i < length_; ++i)
      if (test(i)) s[i] = '1';
    return s;
  }

  friend bool operator==(const BinaryPattern&, const BinaryPattern&) = default;

 private:
  std::uint64_t padding_mask() const noexcept {
    const std::size_t used = length_ % kBitsPerWord;
    return used == 0 ? 0 : ~((std::uint64_t{1} << used) - 1);
  }

  std::vector<std::uint64_t> words_;
  std::size_t length_ = 0;
};

/// Hamming distance over raw packed words of equal count.
inline std::size_t hamming_words(std::span<const std::uint64_t> a,
                                 std::span<const std::uint64_t> b) noexcept {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d += static_cast<std::size_t>(std::popcount(a[i] ^ b[i]));
  return d;
}

inline std::size_t hamming(const BinaryPattern& a, const BinaryPattern& b) {
  if (a.size() != b.size())
    throw DimensionError("hamming: length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  return hamming_words(a.words(), b.words());
}

/// Number of values zeroed by `binarize` for a vector of `n` elements.
/// The small epsilon keeps products such as 0.29 * 100 from landing on 28.
inline std::size_t zeroed_count(double p, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9));
  return std::min(k, n);
}

/// Zeroes the floor(p * n) smallest values (ties: lower index first), then
/// sets bit i iff the remaining value is strictly positive.
inline BinaryPattern binarize(std::span<const double> values, double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError("binarization percentile must lie in [0, 1]");
  if (values.empty()) throw InputError("cannot binarize an empty activation vector");
  for (double v : values)
    if (!std::isfinite(v)) throw InputError("activation vector contains a non-finite value");

  BinaryPattern pat(values.size());
  const std::size_t k = zeroed_count(p, values.size());
  std::vector<bool> zeroed(values.size(), false);
  if (k > 0) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    for (std::size_t j = 0; j < k; ++j) zeroed[order[j]] = true;
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!zeroed[i] && values[i] > 0.0) pat.set(i, true);
  return pat;
}

inline BinaryPattern binarize(std::span<const float> values, double p) {
  const ActivationVector widened(values.begin(), values.end());
  return binarize(std::span<const double>(widened), p);
}

}  // namespace naptron
