#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stylo/corpus.hpp"

namespace stylo {

/// Order-k PPM character model over UTF-8 bytes with PPM-C escapes and full
/// exclusion. Immutable after training.
class PpmModel {
 public:
  static constexpr std::size_t kMaxOrder = 8;
  static constexpr std::size_t kAlphabetSize = 256;
  static constexpr std::size_t kDefaultOrder = 5;

  struct Context {
    /// (symbol, count) sorted by symbol; every count >= 1.
    std::vector<std::pair<std::uint8_t, std::uint32_t>> counts;
    std::uint64_t total = 0;
    std::uint32_t count(std::uint8_t symbol) const;
  };

  PpmModel() = default;
  explicit PpmModel(std::size_t order);

  std::size_t order() const { return order_; }
  std::uint64_t trained_chars() const { return trained_chars_; }
  /// Bytes observed in training.
  std::vector<std::uint8_t> alphabet() const;
  std::size_t context_count() const;

  /// Statistics for an exact context (bytes, oldest first; length <= order).
  const Context* context(std::string_view ctx) const;
  /// Every stored context as (bytes, stats), sorted by length then bytes.
  std::vector<std::pair<std::string, const Context*>> contexts() const;

  /// P(symbol | history); only the last `order` bytes of history matter.
  double prob(std::string_view history, std::uint8_t symbol) const;

  /// Adds one document; contexts never span two documents.
  void train(std::string_view text);

  std::string to_json() const;
  static PpmModel from_json(std::string_view json);
  /// SHA-256 of the canonical content.
  std::string content_hash() const;
  void save(const std::filesystem::path& path) const;
  static PpmModel load(const std::filesystem::path& path);

 private:
  double prob_keys(const std::uint64_t* keys, std::size_t longest, std::uint8_t symbol) const;

  std::size_t order_ = kDefaultOrder;
  std::uint64_t trained_chars_ = 0;
  // Indexed by context length; the key packs the context bytes with the most
  // recent byte in the low 8 bits.
  std::vector<std::unordered_map<std::uint64_t, Context>> tables_;

};

struct CrossEntropyScore {
  double bits_per_char = 0.0;
  std::size_t chars_scored = 0;
};

/// Trains on all texts (document-boundary reset). Throws DataError when the
/// material is empty or the order is outside [0, 8].
PpmModel ppm_train(const std::vector<std::string>& texts, std::size_t order = PpmModel::kDefaultOrder);

double ppm_prob(const PpmModel& model, std::string_view context, std::uint8_t symbol);

/// Static-model cross-entropy in bits per byte.
CrossEntropyScore cross_entropy(const PpmModel& model, std::string_view text);

/// Authors ranked by ascending bits per char, ties by author id.
std::vector<std::pair<std::string, double>> ppm_attribute(const std::map<std::string, PpmModel>& author_models,
                                                          std::string_view text);

/// One model per author over all of that author's documents.
std::map<std::string, PpmModel> train_author_models(const Corpus& corpus, std::size_t order = PpmModel::kDefaultOrder);

/// Model on text_a, scored on text_b.
double ppm_verify(std::string_view text_a, std::string_view text_b, std::size_t order = PpmModel::kDefaultOrder);
/// Mean of both directions.
double ppm_verify_symmetric(std::string_view text_a, std::string_view text_b,
                            std::size_t order = PpmModel::kDefaultOrder);

}  // namespace stylo
