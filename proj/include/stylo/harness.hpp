#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/linear.hpp"
#include "stylo/metrics.hpp"

namespace stylo {

enum class Task { aa, av };
enum class Method { ngram_ensemble, ppm, profile_metric, unmasking, imposters };

Task parse_task(std::string_view name);
std::string_view task_name(Task task);
Method parse_method(std::string_view name);
std::string_view method_name(Method method);
bool method_supports(Method method, Task task);

struct ExperimentConfig {
  std::string name;
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  bool dedup = false;
  std::optional<std::filesystem::path> split_file;
  SplitKind split_kind = SplitKind::iid;
  SplitFractions fractions;
  std::optional<std::uint64_t> split_seed;  // defaults to the global seed
  Task task = Task::aa;
  Method method = Method::ngram_ensemble;
  nlohmann::json params = nlohmann::json::object();
  std::vector<std::string> metrics;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  bool pan_compat = false;
  std::size_t pairs_per_class = 50;

  /// Parses a config; relative paths resolve against base_dir. Unknown keys
  /// and invalid combinations raise ConfigError.
  static ExperimentConfig from_json(std::string_view text, const std::filesystem::path& base_dir = ".");
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Checks method/task compatibility, parameter keys and path existence.
  void validate() const;
  nlohmann::json to_json() const;
  /// SHA-256 of the canonical JSON form.
  std::string hash() const;
  std::vector<std::string> effective_metrics() const;
};

/// Tracks which document ids each stage reads. Test documents may be read
/// only after begin_prediction(); earlier reads are recorded as leaks.
class DocumentAccess {
 public:
  enum class Part { train, validation, test };

  DocumentAccess(const Corpus& corpus, const Split& split);

  Corpus partition(Part part);
  void begin_prediction() { predicting_ = true; }
  bool predicting() const { return predicting_; }

  struct Audit {
    bool passed = true;
    std::size_t fit_ids = 0;
    std::size_t test_ids_before_prediction = 0;
    std::vector<std::string> leaked_ids;
  };
  Audit audit() const;

 private:
  const Corpus& corpus_;
  const Split& split_;
  bool predicting_ = false;
  std::set<std::string> fit_reads_;
  std::set<std::string> leaked_;
};

struct AvPair {
  std::string id;
  std::string a;
  std::string b;
  bool same = false;
};

struct PairSet {
  std::vector<AvPair> train;
  std::vector<AvPair> validation;
  std::vector<AvPair> test;
};

/// Balanced same/different pairs sampled without replacement inside each
/// split partition. Shortfalls produce warnings and the feasible maximum.
std::vector<AvPair> sample_pairs(const Corpus& corpus, const std::vector<std::string>& ids, std::size_t pairs_per_class,
                                 std::uint64_t seed, const std::string& prefix, Warnings* warnings = nullptr);
PairSet av_pairs_from_split(const Corpus& corpus, const Split& split, std::size_t pairs_per_class, std::uint64_t seed,
                            Warnings* warnings = nullptr);

void write_pairs_csv(const std::vector<AvPair>& pairs, const std::filesystem::path& path);

/// Authors as seeded order-1 Markov sources over 'a'-'z' and space;
/// separation blends each author's transitions between a shared base (0)
/// and an independent random matrix (1).
Corpus synth_corpus(std::size_t n_authors, std::size_t docs_per_author, std::size_t doc_len, double separation,
                    std::uint64_t seed);

struct RunRecord {
  nlohmann::json config;
  std::string name;
  std::string dataset;
  std::string task;
  std::string method;
  std::string split_hash;
  double duration_seconds = 0.0;
  EvalReport report;
  std::string version;
  std::string predictions_path;
  DocumentAccess::Audit audit;
  std::map<std::string, double> tuning;  // e.g. chosen threshold or lambda
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
  static RunRecord load(const std::filesystem::path& path);
};

/// load -> (dedup) -> split -> fit on train, tune on validation -> evaluate
/// on test. Writes split.json, predictions.csv, report.json and
/// run_record.json into the output directory.
RunRecord run_experiment(const ExperimentConfig& config);

enum class ReportFormat { json, csv, markdown_table };
ReportFormat parse_report_format(std::string_view name);

std::string report_render(const RunRecord& record, ReportFormat format);
/// One table row per (method, dataset); split hashes listed in the footer.
std::string report_render_markdown(const std::vector<RunRecord>& records);

}  // namespace stylo
