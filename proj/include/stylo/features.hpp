#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/error.hpp"

namespace stylo {

enum class TokenMode { word, chr };

struct Tokenizer {
  TokenMode mode = TokenMode::word;
  bool lowercase = false;
};

enum class TokenKind { word, suffix, punct };

/// A token located in the source text by byte offsets.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  TokenKind kind = TokenKind::word;
};

/// Word-mode segmentation. Letters, digits, combining marks and '*' form
/// words; an apostrophe inside a word starts a suffix token ("'s"); every
/// other non-space code point is a single punctuation token.
std::vector<TokenSpan> word_spans(std::string_view text);

std::vector<std::string> tokenize(std::string_view text, const Tokenizer& tokenizer);

/// Unicode-aware lowercase of UTF-8 text.
std::string to_lower(std::string_view utf8);
/// Number of code points in UTF-8 text.
std::size_t codepoint_count(std::string_view utf8);

enum class DistortionVariant { single_asterisk, multiple_asterisk, exterior_chars, last_two_chars };

DistortionVariant parse_distortion_variant(std::string_view name);
std::string_view distortion_variant_name(DistortionVariant variant);

struct DistortionScheme {
  DistortionVariant variant = DistortionVariant::single_asterisk;
  /// Lowercased word forms kept verbatim.
  std::set<std::string> vocabulary;

  static DistortionScheme make(DistortionVariant variant, const std::vector<std::string>& words);
};

/// Masks out-of-vocabulary words; punctuation, apostrophe suffixes and all
/// inter-token spacing are preserved. Throws DataError on empty vocabulary.
std::string distort(std::string_view text, const DistortionScheme& scheme);

enum class FeatureFamily { char_ngram, token_ngram, summary_stats };

FeatureFamily parse_feature_family(std::string_view name);
std::string_view feature_family_name(FeatureFamily family);

inline constexpr std::size_t kAllKeys = std::numeric_limits<std::size_t>::max();

/// Configuration of one feature family.
struct FamilySpec {
  FeatureFamily family = FeatureFamily::char_ngram;
  std::size_t n = 3;
  std::size_t top_k = 3000;  // kAllKeys keeps every key
  bool lowercase = false;
  /// token_ngram only: "words" (built-in tokenizer) or the name of a bound
  /// external stream such as a part-of-speech tagger's output.
  std::string stream = "words";
  std::optional<DistortionScheme> distortion;
};

/// char n in {2,3,4} (top 3000) and token n in {1,2} (top 2000).
std::vector<FamilySpec> default_family_specs();

/// External token stream (e.g. part-of-speech tags) for a document.
using TokenStream = std::function<std::vector<std::string>(const Document&)>;

/// Adapter serving precomputed token sequences keyed by document id.
class PrecomputedStream {
 public:
  explicit PrecomputedStream(std::unordered_map<std::string, std::vector<std::string>> tokens)
      : tokens_(std::move(tokens)) {}
  /// JSONL with {"id": ..., "tokens": [...]} per line.
  static PrecomputedStream load_jsonl(const std::filesystem::path& path);
  std::vector<std::string> operator()(const Document& doc) const;

 private:
  std::unordered_map<std::string, std::vector<std::string>> tokens_;
};

inline constexpr std::size_t kHistogramBuckets = 21;
inline constexpr std::size_t kSummaryColumns = kHistogramBuckets + 6;

struct SummaryStats {
  /// Relative frequency of word lengths 1..20; index 20 holds longer words.
  std::array<double, kHistogramBuckets> word_length_histogram{};
  double hapax_legomena_rate = 0.0;
  double type_token_ratio = 0.0;
  double maas_a2 = 0.0;
  double herdan_vm = 0.0;
  double punctuation_frequency = 0.0;
  double mean_sentence_length_words = 0.0;
  bool empty = false;

  std::array<double, kSummaryColumns> as_array() const;
};

/// Vocabulary-richness and shape statistics over word tokens.
SummaryStats summary_stats(std::string_view text, const Tokenizer& tokenizer = {TokenMode::word, true});

/// Sparse vector with sorted, zero-free entries.
class FeatureVector {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  FeatureVector() = default;
  /// Entries must be sorted by column; zeros are dropped.
  FeatureVector(std::size_t dim, std::uint64_t schema_tag, std::vector<Entry> entries, bool l2_normalized);

  std::size_t dim() const { return dim_; }
  std::uint64_t schema_tag() const { return schema_tag_; }
  const std::vector<Entry>& entries() const { return entries_; }
  bool l2_normalized() const { return l2_normalized_; }
  double get(std::uint32_t column) const;
  double norm() const;
  std::vector<double> dense() const;

  bool operator==(const FeatureVector&) const = default;

 private:
  std::size_t dim_ = 0;
  std::uint64_t schema_tag_ = 0;
  std::vector<Entry> entries_;
  bool l2_normalized_ = false;
};

/// |x - y| componentwise. Throws DataError on schema mismatch.
FeatureVector vector_diff(const FeatureVector& x, const FeatureVector& y);

struct VectorizeOptions {
  bool normalize = true;
};

/// A fitted schema: per-family vocabularies laid out as contiguous column
/// blocks in family order.
class FeatureSchema {
 public:
  struct Block {
    FamilySpec spec;
    /// Keys in column order (column = offset + position).
    std::vector<std::string> keys;
    std::size_t offset = 0;
    std::size_t width() const { return keys.size(); }
  };

  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<Block> blocks);

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t dim() const { return dim_; }
  /// Fingerprint of the layout; vectors carry it to detect mismatches.
  std::uint64_t tag() const { return tag_; }
  std::optional<std::uint32_t> column(std::size_t block, std::string_view key) const;

  /// Registers the producer for a token_ngram family's named stream.
  void bind_stream(const std::string& name, TokenStream stream);
  const TokenStream* stream(const std::string& name) const;

  /// Full vector: each family block normalized separately, then concatenated.
  FeatureVector vectorize(const Document& doc, VectorizeOptions options = {}) const;
  /// One family block in block-local columns.
  FeatureVector vectorize_block(const Document& doc, std::size_t block, VectorizeOptions options = {}) const;

  std::string to_json() const;
  static FeatureSchema from_json(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static FeatureSchema load(const std::filesystem::path& path);

 private:
  std::vector<double> block_values(const Document& doc, std::size_t block) const;

  std::vector<Block> blocks_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> lookup_;
  std::map<std::string, std::shared_ptr<const TokenStream>> streams_;
  std::size_t dim_ = 0;
  std::uint64_t tag_ = 0;
};

/// Keys a family extracts from a document (n-grams; empty for summary stats).
std::vector<std::string> family_keys(const Document& doc, const FamilySpec& spec, const TokenStream* stream);

/// Fits every family on the corpus: top_k keys by count, ties broken by key.
FeatureSchema fit_schema(const Corpus& corpus, const std::vector<FamilySpec>& specs,
                         const std::map<std::string, TokenStream>& streams = {},
                         Warnings* warnings = nullptr);

/// "doc_id col:value ..." with values printed to round-trip precision.
std::string dump_row(std::string_view doc_id, const FeatureVector& v);

}  // namespace stylo
