#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/features.hpp"
#include "stylo/linear.hpp"
#include "stylo/matrix.hpp"
#include "stylo/rng.hpp"

namespace stylo {

// ---------------------------------------------------------------------------
// Author profiles

using EmbedFn = std::function<std::vector<double>(const Document&)>;

struct AuthorProfile {
  std::string author_id;
  std::vector<double> centroid;  // arithmetic mean of member embeddings
  std::vector<std::string> member_ids;
};

using ProfileMap = std::map<std::string, AuthorProfile>;

inline constexpr std::size_t kDefaultProfileSize = 10;

/// Samples up to profile_size documents per author without replacement.
/// Sampling is keyed by sorted document ids, so corpus order is irrelevant.
ProfileMap build_profiles(const Corpus& corpus, const EmbedFn& embed, std::size_t profile_size = kDefaultProfileSize,
                          std::uint64_t seed = 0);

/// Authors by ascending Euclidean distance to their centroid, ties by id.
Ranking profile_attribute(const ProfileMap& profiles, std::span<const double> x);

// ---------------------------------------------------------------------------
// Thresholded verification

struct VerificationDecision {
  double score = 0.0;
  double threshold = 0.0;
  bool same_author = false;

  static VerificationDecision make(double score, double threshold) { return {score, threshold, score >= threshold}; }
};

double binary_accuracy(const std::vector<double>& scores, const std::vector<bool>& labels, double threshold);

/// Grid point with the best accuracy of (score >= theta) == label; ties go
/// to the smallest theta.
double threshold_search(const std::vector<double>& scores, const std::vector<bool>& labels,
                        const std::vector<double>& grid);

/// `points` evenly spaced values spanning [min score, max score].
std::vector<double> default_threshold_grid(const std::vector<double>& scores, std::size_t points = 101);

// ---------------------------------------------------------------------------
// Unmasking and the round-win imposters variant

struct DegradationCurve {
  std::vector<double> accuracies;
  std::size_t rounds = 0;
  std::size_t features_removed_per_round = 0;

  double total_drop() const { return accuracies.empty() ? 0.0 : accuracies.front() - accuracies.back(); }
  bool operator==(const DegradationCurve&) const = default;
};

struct UnmaskOptions {
  std::size_t chunk_words = 500;
  std::size_t rounds = 10;
  std::size_t k_remove = 3;  // per sign, per round
  std::size_t n_features = 250;
  std::size_t folds = 5;
  TrainOptions train{1e-2, 100, 1.0, 0, false};
  std::uint64_t seed = 0;
};

/// Lowercased word tokens of all texts, cut into consecutive chunks of
/// chunk_words; a short tail is dropped.
std::vector<std::vector<std::string>> chunk_texts(const std::vector<std::string>& texts, std::size_t chunk_words);

DegradationCurve unmask(const std::vector<std::string>& texts_a, const std::vector<std::string>& texts_b,
                        const UnmaskOptions& options = {});

/// CSV rows "round,accuracy" (rounds numbered from 1) for plotting.
std::string curve_csv(const DegradationCurve& curve);

/// Accuracies, their first differences, and the largest one-round drop.
std::vector<double> curve_features(const DegradationCurve& curve);

/// Meta-classifier over curve features; labels are same-author flags.
LinearModel train_unmask_meta(const std::vector<DegradationCurve>& curves, const std::vector<bool>& same_author,
                              const TrainOptions& options = {1e-3, 500, 1.0, 0, false});

VerificationDecision unmask_verify(const DegradationCurve& curve, const LinearModel& meta, double threshold = 0.5);

struct ImpostersOptions {
  std::size_t chunk_words = 500;
  std::size_t rounds = 10;
  std::size_t k_remove = 3;
  std::size_t n_features = 250;
  TrainOptions train{1e-2, 100, 1.0, 0, false};
};

/// Fraction of elimination rounds each candidate wins for the query.
Ranking imposters_attribute(const std::map<std::string, std::vector<std::string>>& candidates, std::string_view query,
                            const ImpostersOptions& options = {});

// ---------------------------------------------------------------------------
// Triplet metric learning

enum class Mining { none, batch_hard };

Mining parse_mining(std::string_view name);
std::string_view mining_name(Mining mining);

struct MetricModel {
  Matrix projection;  // embed_dim x feature_dim
  double margin = 1.0;

  std::vector<double> embed(std::span<const double> x) const;
  std::string to_json() const;
  static MetricModel from_json(std::string_view json);
  bool operator==(const MetricModel&) const = default;
};

struct MetricTrainOptions {
  std::size_t embed_dim = 64;
  double margin = 1.0;
  std::size_t authors_per_batch = 4;
  std::size_t docs_per_author = 4;
  std::size_t epochs = 30;
  double lr = 1.0;  // inputs are unit-norm blocks, so steps are small
  std::uint64_t seed = 0;
  Mining mining = Mining::batch_hard;
};

struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
};

/// Batch-hard: the farthest in-batch positive and nearest negative for each
/// anchor. None: a uniformly random valid positive and negative.
std::vector<Triplet> select_triplets(const Matrix& embeddings, const std::vector<std::size_t>& labels, Mining mining,
                                     Rng& rng);

/// Mean hinge max(0, d(a,p) - d(a,n) + margin) over triplets with Euclidean
/// distances of projected rows; gradient w.r.t. the projection when grad is
/// non-null (same shape as projection).
double triplet_loss(const Matrix& projection, const Matrix& batch, const std::vector<Triplet>& triplets, double margin,
                    Matrix* grad);

/// Batch-hard loss with selection re-done at the given projection.
double batch_hard_loss(const Matrix& projection, const Matrix& batch, const std::vector<std::size_t>& labels,
                       double margin, Matrix* grad);

/// Throws DataError when fewer than two authors are given or any author has
/// fewer than two rows.
MetricModel train_metric(const Matrix& x, const std::vector<std::string>& labels, const MetricTrainOptions& options,
                         std::vector<double>* loss_history = nullptr);
MetricModel train_metric(const Corpus& corpus, const FeatureSchema& schema, const MetricTrainOptions& options,
                         std::vector<double>* loss_history = nullptr);

/// Negated projected distance: higher means more similar.
double av_score(const MetricModel& model, std::span<const double> x, std::span<const double> y);

}  // namespace stylo
