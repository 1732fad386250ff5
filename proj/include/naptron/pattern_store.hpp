#pragma once

#include <naptron/binary_pattern.hpp>
#include <naptron/error.hpp>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace naptron {

/// Parameters the store was built with. Test-time binarization reads
/// `percentile` from here so train and test patterns always agree.
struct StoreConfig {
  std::int32_t layer = 0;
  double percentile = 0.0;
  double train_iou = 0.5;
  double softmax_threshold = 0.0;

  friend bool operator==(const StoreConfig&, const StoreConfig&) = default;
};

/// Per-class memory of known activation patterns.
///
/// Patterns of one class are kept contiguously as packed words so a query is
/// a linear popcount scan. The store is written by a single owner and then
/// frozen; a frozen store is immutable and may be queried from any number of
/// threads.
class PatternStore {
 public:
  PatternStore() = default;
  explicit PatternStore(StoreConfig config, std::size_t pattern_length = 0)
      : config_(config), pattern_length_(pattern_length) {}

  const StoreConfig& config() const noexcept { return config_; }

  /// Zero until the first insert (or an explicit length) fixes it.
  std::size_t pattern_length() const noexcept { return pattern_length_; }
  std::size_t words_per_pattern() const noexcept { return words_for_bits(pattern_length_); }

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  /// Creates an empty pattern list for `class_id` if none exists.
  void register_class(int class_id) {
    require_mutable();
    classes_.try_emplace(class_id);
  }

  void insert(int class_id, const BinaryPattern& pattern) {
    require_mutable();
    if (pattern_length_ == 0) pattern_length_ = pattern.size();
    if (pattern.size() != pattern_length_)
      throw DimensionError("pattern length " + std::to_string(pattern.size()) +
                           " does not match store length " + std::to_string(pattern_length_));
    auto& cls = classes_[class_id];
    cls.words.insert(cls.words.end(), pattern.words().begin(), pattern.words().end());
    ++cls.count;
  }

  /// Appends `count` packed patterns in one go; used by the file loader.
  void insert_packed(int class_id, std::vector<std::uint64_t> words, std::size_t count) {
    require_mutable();
    if (pattern_length_ == 0 && count > 0)
      throw StateError("insert_packed requires a fixed pattern length");
    if (words.size() != count * words_per_pattern())
      throw DimensionError("packed word count does not match pattern count");
    auto& cls = classes_[class_id];
    cls.words.insert(cls.words.end(), words.begin(), words.end());
    cls.count += count;
  }

  std::vector<int> class_ids() const {
    std::vector<int> ids;
    ids.reserve(classes_.size());
    for (const auto& [id, _] : classes_) ids.push_back(id);
    return ids;
  }

  bool has_class(int class_id) const { return classes_.contains(class_id); }

  std::size_t count(int class_id) const {
    auto it = classes_.find(class_id);
    return it == classes_.end() ? 0 : it->second.count;
  }

  std::size_t total_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, cls] : classes_) n += cls.count;
    return n;
  }

  std::span<const std::uint64_t> packed(int class_id) const {
    auto it = classes_.find(class_id);
    if (it == classes_.end()) return {};
    return it->second.words;
  }

  BinaryPattern pattern(int class_id, std::size_t index) const {
    const auto& cls = nonempty(class_id);
    if (index >= cls.count) throw InputError("pattern index out of range");
    const std::size_t wpp = words_per_pattern();
    std::vector<std::uint64_t> words(cls.words.begin() + static_cast<std::ptrdiff_t>(index * wpp),
                                     cls.words.begin() + static_cast<std::ptrdiff_t>((index + 1) * wpp));
    return BinaryPattern(std::move(words), pattern_length_);
  }

  /// Hamming distance from `query` to its nearest stored pattern of `class_id`.
  std::size_t min_distance(int class_id, const BinaryPattern& query) const {
    const auto& cls = nonempty(class_id);
    check_query(query);
    const std::size_t wpp = words_per_pattern();
    const std::span<const std::uint64_t> all(cls.words);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < cls.count && best != 0; ++i)
      best = std::min(best, hamming_words(query.words(), all.subspan(i * wpp, wpp)));
    return best;
  }

  /// Mean Hamming distance from `query` to every stored pattern of `class_id`.
  double avg_distance(int class_id, const BinaryPattern& query) const {
    const auto& cls = nonempty(class_id);
    check_query(query);
    const std::size_t wpp = words_per_pattern();
    const std::span<const std::uint64_t> all(cls.words);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < cls.count; ++i)
      sum += hamming_words(query.words(), all.subspan(i * wpp, wpp));
    return static_cast<double>(sum) / static_cast<double>(cls.count);
  }

  friend bool operator==(const PatternStore& a, const PatternStore& b) {
    return a.config_ == b.config_ && a.pattern_length_ == b.pattern_length_ &&
           a.frozen_ == b.frozen_ && a.classes_ == b.classes_;
  }

 private:
  struct ClassPatterns {
    std::vector<std::uint64_t> words;
    std::size_t count = 0;
    friend bool operator==(const ClassPatterns&, const ClassPatterns&) = default;
  };

  void require_mutable() const {
    if (frozen_) throw StateError("pattern store is frozen");
  }

  const ClassPatterns& nonempty(int class_id) const {
    auto it = classes_.find(class_id);
    if (it == classes_.end() || it->second.count == 0)
      throw EmptyClassError(class_id, "no stored patterns for class " + std::to_string(class_id));
    return it->second;
  }

  void check_query(const BinaryPattern& query) const {
    if (query.size() != pattern_length_)
      throw DimensionError("query length " + std::to_string(query.size()) +
                           " does not match store length " + std::to_string(pattern_length_));
  }

  StoreConfig config_;
  std::size_t pattern_length_ = 0;
  bool frozen_ = false;
  std::map<int, ClassPatterns> classes_;
};

}  // namespace naptron
