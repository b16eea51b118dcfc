#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/features.hpp"
#include "stylo/matrix.hpp"

namespace stylo {

/// Multinomial (or, with two classes, binary) logistic regression.
///
/// Binary models keep a single weight row scoring class_labels[1]; the
/// probability of class_labels[0] is its complement.
struct LinearModel {
  Matrix weights;
  std::vector<double> bias;
  std::vector<std::string> class_labels;
  double l2_lambda = 0.0;

  bool binary() const { return weights.rows() == 1; }
  std::size_t dim() const { return weights.cols(); }
  std::size_t class_index(const std::string& label) const;

  std::string to_json() const;
  static LinearModel from_json(std::string_view json);
  std::string content_hash() const;
  bool operator==(const LinearModel&) const = default;
};

struct TrainOptions {
  double l2_lambda = 1e-4;
  std::size_t epochs = 500;
  double lr = 1.0;
  /// Recorded for reproducibility; optimization starts from zero weights
  /// and is fully deterministic.
  std::uint64_t seed = 0;
  /// Weight examples by inverse class frequency.
  bool balance_classes = false;
};

/// L2-regularized mean cross-entropy over a dense design matrix. Parameters
/// are laid out as the weight rows followed by one bias per row.
class LogisticObjective {
 public:
  LogisticObjective(const Matrix& x, std::vector<std::size_t> labels, std::size_t n_classes, double l2_lambda,
                    std::vector<double> sample_weights = {});

  std::size_t rows() const { return rows_; }
  std::size_t parameter_count() const { return rows_ * (x_.cols() + 1); }
  double value(std::span<const double> params) const;
  /// Loss at params; gradient written to grad.
  double value_and_gradient(std::span<const double> params, std::span<double> grad) const;

 private:
  const Matrix& x_;
  std::vector<std::size_t> labels_;
  std::size_t n_classes_;
  std::size_t rows_;
  double l2_lambda_;
  std::vector<double> weights_;
  double weight_sum_ = 0.0;
};

/// Full-batch gradient descent; the step is halved whenever it would raise
/// the loss, so recorded losses never increase.
LinearModel train_logreg(const Matrix& x, const std::vector<std::string>& y, const TrainOptions& options = {},
                         std::vector<double>* loss_history = nullptr);
LinearModel train_logreg(const std::vector<FeatureVector>& x, const std::vector<std::string>& y,
                         const TrainOptions& options = {}, std::vector<double>* loss_history = nullptr);

/// Softmax (or sigmoid) class probabilities in class_labels order.
std::vector<double> predict_proba(const LinearModel& model, std::span<const double> x);
std::vector<double> predict_proba(const LinearModel& model, const FeatureVector& x);

/// Dense matrix with one row per vector.
Matrix to_matrix(const std::vector<FeatureVector>& rows);

using Ranking = std::vector<std::pair<std::string, double>>;

/// Descending by probability, ties by label.
Ranking rank_probabilities(const std::vector<std::string>& labels, const std::vector<double>& probs);

/// One member per feature family block of a schema.
struct Ensemble {
  struct Member {
    std::size_t block = 0;
    LinearModel model;
  };
  std::vector<Member> members;
  std::vector<std::string> class_labels;
};

Ensemble train_ensemble(const Corpus& train, const FeatureSchema& schema, const TrainOptions& options = {});

/// Renormalized mean of member probability vectors, ranked.
Ranking combine_member_probabilities(const std::vector<std::string>& labels,
                                     const std::vector<std::vector<double>>& member_probs);

Ranking ensemble_predict(const Ensemble& ensemble, const FeatureSchema& schema, const Document& doc);

struct LabeledPair {
  std::string a;
  std::string b;
  bool same = false;
};

inline const std::string kSameLabel = "same";
inline const std::string kDifferentLabel = "different";

/// Binary logistic regression on |x_a - x_b| over the full schema vector.
LinearModel train_av_classifier(const std::vector<LabeledPair>& pairs, const Corpus& corpus,
                                const FeatureSchema& schema, const TrainOptions& options = {});

/// P(same author) for two documents under an AV classifier.
double av_probability(const LinearModel& model, const FeatureSchema& schema, const Document& a, const Document& b);
double av_probability(const LinearModel& model, const FeatureVector& a, const FeatureVector& b);

}  // namespace stylo
