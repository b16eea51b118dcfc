#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stylo/error.hpp"

namespace stylo {

struct Document {
  std::string id;
  std::string author_id;
  std::string text;
  std::optional<std::string> topic;
  std::optional<std::string> genre;
};

/// An ordered, immutable collection of documents with unique ids.
class Corpus {
 public:
  Corpus() = default;
  /// Throws DataError on duplicate ids or blank texts.
  Corpus(std::string name, std::vector<Document> documents);

  const std::string& name() const { return name_; }
  const std::vector<Document>& documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  const Document& at(std::string_view id) const;
  const Document* find(std::string_view id) const;

  /// Distinct author ids in lexicographic order.
  std::vector<std::string> authors() const;

  /// Sub-corpus with the given ids, in this corpus's document order.
  Corpus subset(const std::vector<std::string>& ids, std::string name) const;

 private:
  std::string name_;
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class CorpusFormat { jsonl, csv, directory_tree };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view corpus_format_name(CorpusFormat format);

/// Loads a corpus. Errors name the offending line (or file, for trees).
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Writes the corpus as JSONL (the inverse of the jsonl loader).
void save_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// Unicode NFC normalization of a UTF-8 string.
std::string nfc_normalize(std::string_view utf8);

struct DedupResult {
  Corpus corpus;
  std::size_t removed_count = 0;
};

/// Keeps the first document for every distinct NFC-normalized text.
DedupResult dedup_exact(const Corpus& corpus);

/// Exact non-negative rational, used so that D/A * A == D holds exactly.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct DatasetStats {
  std::uint64_t documents = 0;  // D
  std::uint64_t authors = 0;    // A
  std::uint64_t words = 0;      // W
  Ratio docs_per_author;        // D / A
  Ratio words_per_doc;          // W / D
  double imbalance = 0.0;       // population stddev of per-author document counts
};

struct Tokenizer;

/// Corpus size statistics. Throws DataError on an empty corpus.
DatasetStats compute_stats(const Corpus& corpus, const Tokenizer& tokenizer);
DatasetStats compute_stats(const Corpus& corpus);

/// Rendering at display precision (integers and one decimal).
std::string format_stats(const DatasetStats& stats);

enum class SplitKind { iid, cross_topic, cross_genre, unique_author };

SplitKind parse_split_kind(std::string_view name);
std::string_view split_kind_name(SplitKind kind);

struct Split {
  SplitKind kind = SplitKind::iid;
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Deterministic split of `corpus`. Set members are sorted by id.
Split make_split(const Corpus& corpus, SplitKind kind, SplitFractions fractions, std::uint64_t seed,
                 Warnings* warnings = nullptr);

/// Checks pairwise disjointness plus the kind-specific predicate; returns a
/// description of the first violation, or nothing.
std::optional<std::string> check_split(const Corpus& corpus, const Split& split);

/// SHA-256 over the kind and the sorted id lists.
std::string split_hash(const Split& split);

/// Split file: {kind, hash, train, validation, test}.
void save_split(const Split& split, const std::filesystem::path& path);
/// Reads a split file, verifying the stored hash.
Split load_split(const std::filesystem::path& path);

}  // namespace stylo
