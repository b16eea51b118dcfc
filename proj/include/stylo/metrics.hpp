#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stylo/error.hpp"
#include "stylo/rng.hpp"

namespace stylo {

struct AaRow {
  std::string doc_id;
  std::string true_author;
  std::string predicted_author;
  std::vector<std::string> ranking;  // optional full ranking, best first
};
using AaPredictions = std::vector<AaRow>;

struct AvRow {
  std::string pair_id;
  bool true_same = false;
  double score = 0.5;  // in [0, 1], higher = more likely same author
  bool abstain = false;
};
using AvPredictions = std::vector<AvRow>;

double accuracy(const AaPredictions& preds);

/// Mean over true-author classes of per-class accuracy.
double macro_accuracy(const AaPredictions& preds);

/// Mann-Whitney AUC with midranks for ties. With pan_compat, rows flagged
/// as abstentions are left out (the PAN evaluator's behavior); by default
/// they are ranked by their raw score.
double auc(const AvPredictions& preds, bool pan_compat = false);

/// AUC of raw (score, label) pairs.
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct PanMetrics {
  double auc = 0.0;
  double f1 = 0.0;
  double f05u = 0.0;
  double c_at_1 = 0.0;
  double brier = 0.0;  // mean squared error; lower is better
  double overall = 0.0;

  std::map<std::string, double> as_map() const;
};

/// PAN-style verification metrics. A row is unanswered when its score is
/// exactly 0.5 or it is flagged as an abstention.
PanMetrics pan_metrics(const AvPredictions& preds, bool pan_compat = false);

/// Linear-interpolation quantile (type 7) of unsorted data.
double quantile(std::vector<double> values, double q);

/// Percentile 95% bootstrap interval of `metric` over resampled rows.
/// Resamples on which the metric is undefined (it throws) are redrawn.
template <typename Row, typename Metric>
std::pair<double, double> bootstrap_ci(Metric&& metric, const std::vector<Row>& rows, std::size_t iterations,
                                       std::uint64_t seed) {
  if (rows.size() < 10) throw DataError("bootstrap_ci: need at least 10 rows");
  if (iterations == 0) throw ConfigError("bootstrap_ci: iterations must be positive");
  Rng rng = Rng::substream(seed, "bootstrap");
  std::vector<double> stats;
  stats.reserve(iterations);
  std::vector<Row> sample(rows.size());
  std::size_t attempts = 0;
  while (stats.size() < iterations) {
    if (++attempts > iterations * 100) throw DataError("bootstrap_ci: metric undefined on most resamples");
    for (auto& s : sample) s = rows[rng.below(rows.size())];
    try {
      stats.push_back(metric(sample));
    } catch (const DataError&) {
      continue;
    }
  }
  return {quantile(stats, 0.025), quantile(stats, 0.975)};
}

struct EvalReport {
  std::map<std::string, double> metrics;
  std::size_t n = 0;
  std::map<std::string, std::size_t> per_class_n;
  std::string config_hash;
  std::string split_hash;
  std::string version;

  std::string to_json() const;
  static EvalReport from_json(std::string_view json);
  bool operator==(const EvalReport&) const = default;
};

/// CSV doc_id,true,pred[,rank1,rank2,...]
void write_aa_predictions(const AaPredictions& preds, const std::filesystem::path& path);
AaPredictions read_aa_predictions(const std::filesystem::path& path);
/// CSV pair_id,true,score,abstain
void write_av_predictions(const AvPredictions& preds, const std::filesystem::path& path);
AvPredictions read_av_predictions(const std::filesystem::path& path);

}  // namespace stylo
