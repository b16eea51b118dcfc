#include "stylo/linear.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "stylo/hash.hpp"
#include "stylo/parallel.hpp"
#include "stylo/simd/kernels.hpp"

namespace stylo {

using nlohmann::json;

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

json model_body(const LinearModel& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.weights.rows(); ++r) {
    auto row = m.weights.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"format", "stylo-linear"}, {"version", 1},       {"labels", m.class_labels},
          {"bias", m.bias},           {"l2_lambda", m.l2_lambda}, {"dim", m.weights.cols()},
          {"weights", std::move(rows)}};
}

}  // namespace

std::size_t LinearModel::class_index(const std::string& label) const {
  auto it = std::find(class_labels.begin(), class_labels.end(), label);
  if (it == class_labels.end()) throw DataError("unknown class label '" + label + "'");
  return static_cast<std::size_t>(it - class_labels.begin());
}

std::string LinearModel::to_json() const {
  json j = model_body(*this);
  j["hash"] = sha256_hex(j.dump());
  return j.dump();
}

std::string LinearModel::content_hash() const { return sha256_hex(model_body(*this).dump()); }

LinearModel LinearModel::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("linear model: ") + e.what());
  }
  if (j.value("format", "") != "stylo-linear" || j.value("version", 0) != 1) {
    throw DataError("linear model: unsupported format or version");
  }
  std::string stored = j.value("hash", "");
  j.erase("hash");
  if (sha256_hex(j.dump()) != stored) throw DataError("linear model: content hash mismatch");
  LinearModel m;
  m.class_labels = j.at("labels").get<std::vector<std::string>>();
  m.bias = j.at("bias").get<std::vector<double>>();
  m.l2_lambda = j.at("l2_lambda").get<double>();
  std::size_t dim = j.at("dim").get<std::size_t>();
  const auto& rows = j.at("weights");
  m.weights = Matrix(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto v = rows[r].get<std::vector<double>>();
    if (v.size() != dim) throw DataError("linear model: weight row width mismatch");
    std::copy(v.begin(), v.end(), m.weights.row(r).begin());
  }
  if (m.bias.size() != m.weights.rows()) throw DataError("linear model: bias size mismatch");
  return m;
}

LogisticObjective::LogisticObjective(const Matrix& x, std::vector<std::size_t> labels, std::size_t n_classes,
                                     double l2_lambda, std::vector<double> sample_weights)
    : x_(x),
      labels_(std::move(labels)),
      n_classes_(n_classes),
      rows_(n_classes == 2 ? 1 : n_classes),
      l2_lambda_(l2_lambda),
      weights_(std::move(sample_weights)) {
  if (labels_.size() != x_.rows()) throw DataError("logistic objective: label count mismatch");
  if (weights_.empty()) weights_.assign(labels_.size(), 1.0);
  if (weights_.size() != labels_.size()) throw DataError("logistic objective: sample weight count mismatch");
  for (double w : weights_) weight_sum_ += w;
}

double LogisticObjective::value(std::span<const double> params) const {
  std::vector<double> scratch(parameter_count());
  return value_and_gradient(params, scratch);
}

double LogisticObjective::value_and_gradient(std::span<const double> params, std::span<double> grad) const {
  const std::size_t d = x_.cols();
  if (params.size() != parameter_count() || grad.size() != parameter_count()) {
    throw InvariantError("logistic objective: parameter size mismatch");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  auto w_row = [&](std::size_t r) { return params.subspan(r * d, d); };
  auto g_row = [&](std::size_t r) { return grad.subspan(r * d, d); };
  const std::size_t bias_at = rows_ * d;
  std::vector<double> z(rows_);
  double loss = 0.0;
  for (std::size_t i = 0; i < x_.rows(); ++i) {
    auto xi = x_.row(i);
    for (std::size_t r = 0; r < rows_; ++r) z[r] = simd::dot(w_row(r), xi) + params[bias_at + r];
    const double s = weights_[i] / weight_sum_;
    if (rows_ == 1) {
      const double y = labels_[i] == 1 ? 1.0 : 0.0;
      loss += s * (softplus(z[0]) - y * z[0]);
      const double g = s * (sigmoid(z[0]) - y);
      simd::axpy(g, xi, g_row(0));
      grad[bias_at] += g;
    } else {
      double m = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double v : z) sum += std::exp(v - m);
      const double lse = m + std::log(sum);
      loss += s * (lse - z[labels_[i]]);
      for (std::size_t r = 0; r < rows_; ++r) {
        double g = s * (std::exp(z[r] - lse) - (r == labels_[i] ? 1.0 : 0.0));
        simd::axpy(g, xi, g_row(r));
        grad[bias_at + r] += g;
      }
    }
  }
  if (l2_lambda_ > 0.0) {
    auto w = params.first(bias_at);
    loss += 0.5 * l2_lambda_ * simd::dot(w, w);
    simd::axpy(l2_lambda_, w, grad.first(bias_at));
  }
  return loss;
}

LinearModel train_logreg(const Matrix& x, const std::vector<std::string>& y, const TrainOptions& options,
                         std::vector<double>* loss_history) {
  if (x.rows() != y.size() || y.size() < 2) throw DataError("train_logreg: need |X| = |y| >= 2");
  for (double v : x.flat()) {
    if (!std::isfinite(v)) throw DataError("train_logreg: non-finite feature value");
  }
  std::set<std::string> label_set(y.begin(), y.end());
  if (label_set.size() < 2) throw DataError("train_logreg: need at least two classes");
  std::vector<std::string> labels(label_set.begin(), label_set.end());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;
  std::vector<std::size_t> yi(y.size());
  std::vector<std::size_t> counts(labels.size(), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    yi[i] = index[y[i]];
    ++counts[yi[i]];
  }
  std::vector<double> sample_weights;
  if (options.balance_classes) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      sample_weights.push_back(static_cast<double>(y.size()) /
                               (static_cast<double>(labels.size()) * static_cast<double>(counts[yi[i]])));
    }
  }
  LogisticObjective objective(x, yi, labels.size(), options.l2_lambda, sample_weights);
  const std::size_t n_params = objective.parameter_count();
  std::vector<double> params(n_params, 0.0);
  std::vector<double> grad(n_params);
  std::vector<double> trial(n_params);
  std::vector<double> trial_grad(n_params);
  double loss = objective.value_and_gradient(params, grad);
  if (loss_history) loss_history->assign(1, loss);
  double lr = options.lr;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double trial_loss = 0.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      std::copy(params.begin(), params.end(), trial.begin());
      simd::axpy(-lr, grad, trial);
      trial_loss = objective.value_and_gradient(trial, trial_grad);
      if (std::isfinite(trial_loss) && trial_loss <= loss) {
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
    params.swap(trial);
    grad.swap(trial_grad);
    loss = trial_loss;
    if (loss_history) loss_history->push_back(loss);
  }
  LinearModel m;
  m.class_labels = labels;
  m.l2_lambda = options.l2_lambda;
  const std::size_t rows = objective.rows();
  m.weights = Matrix(rows, x.cols());
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(rows * x.cols()), m.weights.flat().begin());
  m.bias.assign(params.begin() + static_cast<std::ptrdiff_t>(rows * x.cols()), params.end());
  return m;
}

Matrix to_matrix(const std::vector<FeatureVector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dim() != m.cols()) throw DataError("to_matrix: vectors of different dimension");
    for (const auto& [c, v] : rows[i].entries()) m(i, c) = v;
  }
  return m;
}

LinearModel train_logreg(const std::vector<FeatureVector>& x, const std::vector<std::string>& y,
                         const TrainOptions& options, std::vector<double>* loss_history) {
  return train_logreg(to_matrix(x), y, options, loss_history);
}

std::vector<double> predict_proba(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) throw DataError("predict_proba: dimension mismatch");
  if (model.binary()) {
    double p = sigmoid(simd::dot(model.weights.row(0), x) + model.bias[0]);
    return {1.0 - p, p};
  }
  std::vector<double> z(model.weights.rows());
  for (std::size_t r = 0; r < z.size(); ++r) z[r] = simd::dot(model.weights.row(r), x) + model.bias[r];
  double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

std::vector<double> predict_proba(const LinearModel& model, const FeatureVector& x) {
  if (x.dim() != model.dim()) throw DataError("predict_proba: dimension mismatch");
  return predict_proba(model, x.dense());
}

Ranking rank_probabilities(const std::vector<std::string>& labels, const std::vector<double>& probs) {
  Ranking r;
  for (std::size_t i = 0; i < labels.size(); ++i) r.emplace_back(labels[i], probs.at(i));
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return r;
}

Ensemble train_ensemble(const Corpus& train, const FeatureSchema& schema, const TrainOptions& options) {
  if (schema.blocks().empty()) throw ConfigError("train_ensemble: schema has no families");
  const auto& docs = train.documents();
  std::vector<std::string> y;
  for (const auto& d : docs) y.push_back(d.author_id);
  Ensemble ens;
  for (std::size_t b = 0; b < schema.blocks().size(); ++b) {
    std::vector<FeatureVector> x(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) { x[i] = schema.vectorize_block(docs[i], b); });
    ens.members.push_back({b, train_logreg(x, y, options)});
  }
  ens.class_labels = ens.members.front().model.class_labels;
  return ens;
}

Ranking combine_member_probabilities(const std::vector<std::string>& labels,
                                     const std::vector<std::vector<double>>& member_probs) {
  if (member_probs.empty()) throw DataError("ensemble: no members");
  std::vector<double> mean(labels.size(), 0.0);
  for (const auto& p : member_probs) {
    if (p.size() != labels.size()) throw InvariantError("ensemble: member label count mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
  }
  double total = 0.0;
  for (double v : mean) total += v;
  for (double& v : mean) v /= total;
  return rank_probabilities(labels, mean);
}

Ranking ensemble_predict(const Ensemble& ensemble, const FeatureSchema& schema, const Document& doc) {
  if (ensemble.members.empty()) throw DataError("ensemble_predict: empty ensemble");
  std::vector<std::vector<double>> probs;
  for (const auto& m : ensemble.members) {
    if (m.model.class_labels != ensemble.class_labels) throw InvariantError("ensemble: label ordering differs");
    probs.push_back(predict_proba(m.model, schema.vectorize_block(doc, m.block)));
  }
  return combine_member_probabilities(ensemble.class_labels, probs);
}

LinearModel train_av_classifier(const std::vector<LabeledPair>& pairs, const Corpus& corpus,
                                const FeatureSchema& schema, const TrainOptions& options) {
  if (pairs.size() < 2) throw DataError("train_av_classifier: need at least two pairs");
  bool any_same = false;
  bool any_diff = false;
  for (const auto& p : pairs) (p.same ? any_same : any_diff) = true;
  if (!any_same || !any_diff) throw DataError("train_av_classifier: both labels must be present");
  std::vector<std::string> ids;
  for (const auto& p : pairs) {
    ids.push_back(p.a);
    ids.push_back(p.b);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<FeatureVector> vecs(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) { vecs[i] = schema.vectorize(corpus.at(ids[i])); });
  auto vec_of = [&](const std::string& id) -> const FeatureVector& {
    return vecs[static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin())];
  };
  std::vector<FeatureVector> x;
  std::vector<std::string> y;
  for (const auto& p : pairs) {
    x.push_back(vector_diff(vec_of(p.a), vec_of(p.b)));
    y.push_back(p.same ? kSameLabel : kDifferentLabel);
  }
  return train_logreg(x, y, options);
}

double av_probability(const LinearModel& model, const FeatureVector& a, const FeatureVector& b) {
  auto p = predict_proba(model, vector_diff(a, b));
  return p[model.class_index(kSameLabel)];
}

double av_probability(const LinearModel& model, const FeatureSchema& schema, const Document& a, const Document& b) {
  return av_probability(model, schema.vectorize(a), schema.vectorize(b));
}

}  // namespace stylo
