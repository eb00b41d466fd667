#ifndef TEXTSPOT_PHOC_HPP
#define TEXTSPOT_PHOC_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace textspot {

/// The 50 bigrams used by the default 604-dimensional descriptor.
const std::vector<std::string>& default_bigrams();

/**
 * Descriptor layout of a pyramidal histogram of characters.
 *
 * The vector is the concatenation, in this order, of one block per unigram
 * level and then one block per bigram level. A level-L block holds L regions
 * and every region holds one slot per alphabet symbol (or listed bigram).
 */
struct PhocConfig {
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::vector<int> unigram_levels{2, 3, 4, 5};
  std::vector<int> bigram_levels{2};
  std::vector<std::string> bigrams = default_bigrams();
  double overlap_threshold = 0.5;

  std::size_t dimension() const;

  /// Throws Error(kInvalidArgument) when an invariant is broken.
  void validate() const;

  /// Line-oriented `key value...` form; stable across platforms.
  std::string to_text() const;
  static PhocConfig from_text(std::string_view text);

  /// CRC-32 of to_text(); identifies the layout inside index and detection files.
  std::uint32_t hash() const;

  bool operator==(const PhocConfig&) const = default;
};

enum class PhocKind { kTarget, kPrediction };

struct PhocVector {
  std::vector<float> values;
  PhocKind kind = PhocKind::kTarget;

  std::size_t size() const { return values.size(); }
  bool operator==(const PhocVector&) const = default;
};

struct NormalizedWord {
  std::string chars;
  std::string source;
};

/// Closed interval on the unit segment.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Span of character `position` inside a word of `length` characters.
Interval occupancy(std::size_t position, std::size_t length);

/// Lowercases ASCII, drops everything outside the alphabet.
/// Throws kEmptyAfterNormalization when nothing survives.
NormalizedWord normalize_word(std::string_view raw, const PhocConfig& config);

/// Non-throwing variant used by loaders; returns an empty string instead.
std::string normalize_or_empty(std::string_view raw, const PhocConfig& config);

/**
 * Precomputed symbol tables for repeated encoding under one configuration.
 *
 * Region membership is decided in integer units of 1/(n*L): character k of
 * an n-character word spans [k*L, (k+1)*L] and region r spans
 * [r*n, (r+1)*n], so half-overlaps compare exactly.
 */
class PhocEncoder {
 public:
  explicit PhocEncoder(PhocConfig config);

  const PhocConfig& config() const { return config_; }
  std::size_t dimension() const { return dimension_; }

  NormalizedWord normalize(std::string_view raw) const;
  PhocVector encode(const NormalizedWord& word) const;
  PhocVector encode(std::string_view raw) const { return encode(normalize(raw)); }

  /// Writes the binary descriptor into `out` (must hold dimension() floats).
  void encode_into(std::string_view normalized, std::span<float> out) const;

 private:
  PhocConfig config_;
  std::size_t dimension_;
  std::array<int, 256> symbol_index_;
  std::unordered_map<std::uint16_t, int> bigram_index_;
};

PhocVector encode(const NormalizedWord& word, const PhocConfig& config);

/// Most frequent adjacent pairs over the normalized lexicon; frequency
/// descending, ties lexicographic. Throws kInsufficientBigrams.
std::vector<std::string> derive_bigrams(std::span<const std::string> lexicon,
                                        std::size_t count,
                                        const PhocConfig& config);

}  // namespace textspot

#endif  // TEXTSPOT_PHOC_HPP
