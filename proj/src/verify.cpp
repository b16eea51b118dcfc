#include "stylo/verify.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <unordered_map>

#include "stylo/hash.hpp"
#include "stylo/parallel.hpp"
#include "stylo/simd/kernels.hpp"

namespace stylo {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Profiles

ProfileMap build_profiles(const Corpus& corpus, const EmbedFn& embed, std::size_t profile_size, std::uint64_t seed) {
  if (profile_size == 0) throw ConfigError("build_profiles: profile_size must be positive");
  std::map<std::string, std::vector<std::string>> by_author;
  for (const auto& d : corpus.documents()) by_author[d.author_id].push_back(d.id);
  ProfileMap profiles;
  for (auto& [author, ids] : by_author) {
    if (ids.empty()) throw DataError("build_profiles: author '" + author + "' has no documents");
    std::sort(ids.begin(), ids.end());
    Rng rng = Rng::substream(seed, "profile:" + author);
    rng.shuffle(std::span<std::string>(ids));
    ids.resize(std::min(profile_size, ids.size()));
    std::sort(ids.begin(), ids.end());
    AuthorProfile p;
    p.author_id = author;
    p.member_ids = ids;
    for (const auto& id : ids) {
      auto v = embed(corpus.at(id));
      if (p.centroid.empty()) p.centroid.assign(v.size(), 0.0);
      if (v.size() != p.centroid.size()) throw DataError("build_profiles: embedding dimension varies");
      simd::axpy(1.0, v, p.centroid);
    }
    simd::scale(1.0 / static_cast<double>(ids.size()), p.centroid);
    profiles.emplace(author, std::move(p));
  }
  return profiles;
}

Ranking profile_attribute(const ProfileMap& profiles, std::span<const double> x) {
  if (profiles.empty()) throw DataError("profile_attribute: no profiles");
  Ranking r;
  for (const auto& [author, p] : profiles) {
    if (p.centroid.size() != x.size()) throw DataError("profile_attribute: dimension mismatch");
    r.emplace_back(author, std::sqrt(simd::squared_distance(p.centroid, x)));
  }
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  return r;
}

// ---------------------------------------------------------------------------
// Thresholds

double binary_accuracy(const std::vector<double>& scores, const std::vector<bool>& labels, double threshold) {
  if (scores.size() != labels.size() || scores.empty()) throw DataError("binary_accuracy: bad input sizes");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= threshold) == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double threshold_search(const std::vector<double>& scores, const std::vector<bool>& labels,
                        const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("threshold_search: empty grid");
  if (scores.size() != labels.size()) throw DataError("threshold_search: size mismatch");
  bool pos = false;
  bool neg = false;
  for (bool l : labels) (l ? pos : neg) = true;
  if (!pos || !neg) throw DataError("threshold_search: both labels must be present");
  std::vector<double> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  double best = sorted_grid.front();
  double best_acc = -1.0;
  for (double t : sorted_grid) {
    double acc = binary_accuracy(scores, labels, t);
    if (acc > best_acc) {
      best_acc = acc;
      best = t;
    }
  }
  return best;
}

std::vector<double> default_threshold_grid(const std::vector<double>& scores, std::size_t points) {
  if (scores.empty()) throw DataError("default_threshold_grid: no scores");
  if (points < 2) throw ConfigError("default_threshold_grid: need at least 2 points");
  auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = *lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Unmasking

namespace {

std::vector<std::string> lower_words(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& s : word_spans(text)) {
    if (s.kind != TokenKind::punct) out.push_back(to_lower(text.substr(s.begin, s.end - s.begin)));
  }
  return out;
}

// Most frequent words over all chunks, ties by word.
std::vector<std::string> top_words(const std::vector<const std::vector<std::string>*>& chunks, std::size_t n) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto* c : chunks) {
    for (const auto& w : *c) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.push_back(ranked[i].first);
  return out;
}

std::vector<double> frequency_row(const std::vector<std::string>& words, const std::unordered_map<std::string, std::size_t>& index,
                                  std::size_t width) {
  std::vector<double> row(width, 0.0);
  if (words.empty()) return row;
  for (const auto& w : words) {
    auto it = index.find(w);
    if (it != index.end()) row[it->second] += 1.0;
  }
  for (double& v : row) v /= static_cast<double>(words.size());
  return row;
}

// Column standardization fitted on `fit_rows` of x, restricted to active columns.
struct Standardizer {
  std::vector<std::size_t> columns;
  std::vector<double> mean;
  std::vector<double> inv_std;

  Standardizer(const Matrix& x, const std::vector<std::size_t>& fit_rows, std::vector<std::size_t> active)
      : columns(std::move(active)), mean(columns.size(), 0.0), inv_std(columns.size(), 0.0) {
    const double n = static_cast<double>(fit_rows.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      double s = 0.0;
      for (std::size_t r : fit_rows) s += x(r, columns[j]);
      mean[j] = s / n;
      double v = 0.0;
      for (std::size_t r : fit_rows) v += (x(r, columns[j]) - mean[j]) * (x(r, columns[j]) - mean[j]);
      double sd = std::sqrt(v / n);
      inv_std[j] = sd > 0.0 ? 1.0 / sd : 0.0;
    }
  }

  std::vector<double> apply(std::span<const double> row) const {
    std::vector<double> out(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) out[j] = (row[columns[j]] - mean[j]) * inv_std[j];
    return out;
  }

  Matrix apply(const Matrix& x, const std::vector<std::size_t>& rows) const {
    Matrix m;
    for (std::size_t r : rows) m.append_row(apply(x.row(r)));
    return m;
  }
};

std::vector<std::size_t> active_columns(const std::vector<bool>& removed) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < removed.size(); ++j) {
    if (!removed[j]) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

std::vector<std::vector<std::string>> chunk_texts(const std::vector<std::string>& texts, std::size_t chunk_words) {
  if (chunk_words == 0) throw ConfigError("chunk_words must be positive");
  std::vector<std::string> words;
  for (const auto& t : texts) {
    auto w = lower_words(t);
    words.insert(words.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  std::vector<std::vector<std::string>> chunks;
  for (std::size_t i = 0; i + chunk_words <= words.size(); i += chunk_words) {
    chunks.emplace_back(words.begin() + static_cast<std::ptrdiff_t>(i),
                        words.begin() + static_cast<std::ptrdiff_t>(i + chunk_words));
  }
  return chunks;
}

DegradationCurve unmask(const std::vector<std::string>& texts_a, const std::vector<std::string>& texts_b,
                        const UnmaskOptions& options) {
  if (options.rounds == 0 || options.k_remove == 0) throw ConfigError("unmask: rounds and k_remove must be positive");
  auto chunks_a = chunk_texts(texts_a, options.chunk_words);
  auto chunks_b = chunk_texts(texts_b, options.chunk_words);
  if (chunks_a.size() < 4 || chunks_b.size() < 4) {
    throw DataError("unmask: each side needs at least 4 chunks of " + std::to_string(options.chunk_words) + " words");
  }
  std::vector<const std::vector<std::string>*> all;
  for (const auto& c : chunks_a) all.push_back(&c);
  for (const auto& c : chunks_b) all.push_back(&c);
  auto vocab = top_words(all, options.n_features);
  if (vocab.size() <= options.rounds * options.k_remove * 2) {
    throw DataError("unmask: " + std::to_string(vocab.size()) + " features cannot support " +
                    std::to_string(options.rounds) + " rounds removing " + std::to_string(2 * options.k_remove));
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index[vocab[i]] = i;
  Matrix x;
  std::vector<std::string> y;
  for (std::size_t i = 0; i < all.size(); ++i) {
    x.append_row(frequency_row(*all[i], index, vocab.size()));
    y.push_back(i < chunks_a.size() ? "a" : "b");
  }

  // Stratified fold assignment, fixed for all rounds.
  const std::size_t folds = std::min(options.folds, std::min(chunks_a.size(), chunks_b.size()));
  std::vector<std::size_t> fold_of(all.size());
  Rng rng = Rng::substream(options.seed, "unmask-folds");
  for (auto [lo, hi] : {std::pair{std::size_t{0}, chunks_a.size()}, std::pair{chunks_a.size(), all.size()}}) {
    std::vector<std::size_t> idx(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = k % folds;
  }

  DegradationCurve curve;
  curve.rounds = options.rounds;
  curve.features_removed_per_round = 2 * options.k_remove;
  std::vector<bool> removed(vocab.size(), false);
  for (std::size_t round = 0; round < options.rounds; ++round) {
    auto active = active_columns(removed);
    std::vector<std::size_t> correct(folds, 0);
    parallel_for(folds, [&](std::size_t f) {
      std::vector<std::size_t> train_rows;
      std::vector<std::size_t> test_rows;
      for (std::size_t i = 0; i < all.size(); ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(i);
      Standardizer st(x, train_rows, active);
      std::vector<std::string> ty;
      for (std::size_t r : train_rows) ty.push_back(y[r]);
      LinearModel m = train_logreg(st.apply(x, train_rows), ty, options.train);
      for (std::size_t r : test_rows) {
        auto p = predict_proba(m, st.apply(x.row(r)));
        std::string pred = p[1] > p[0] ? m.class_labels[1] : m.class_labels[0];
        correct[f] += pred == y[r] ? 1 : 0;
      }
    });
    std::size_t total_correct = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
    curve.accuracies.push_back(static_cast<double>(total_correct) / static_cast<double>(all.size()));

    auto rows = iota(all.size());
    Standardizer st(x, rows, active);
    LinearModel m = train_logreg(st.apply(x, rows), y, options.train);
    std::vector<std::size_t> order = iota(active.size());
    auto w = m.weights.row(0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return w[a] != w[b] ? w[a] > w[b] : active[a] < active[b];
    });
    for (std::size_t k = 0; k < options.k_remove; ++k) {
      removed[active[order[k]]] = true;
      removed[active[order[order.size() - 1 - k]]] = true;
    }
  }
  return curve;
}

std::string curve_csv(const DegradationCurve& curve) {
  std::string out = "round,accuracy\n";
  char buf[64];
  for (std::size_t r = 0; r < curve.accuracies.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", r + 1, curve.accuracies[r]);
    out += buf;
  }
  return out;
}

std::vector<double> curve_features(const DegradationCurve& curve) {
  std::vector<double> f = curve.accuracies;
  double max_drop = 0.0;
  for (std::size_t i = 1; i < curve.accuracies.size(); ++i) {
    double d = curve.accuracies[i] - curve.accuracies[i - 1];
    f.push_back(d);
    max_drop = std::max(max_drop, -d);
  }
  f.push_back(max_drop);
  return f;
}

LinearModel train_unmask_meta(const std::vector<DegradationCurve>& curves, const std::vector<bool>& same_author,
                              const TrainOptions& options) {
  if (curves.size() != same_author.size()) throw DataError("train_unmask_meta: size mismatch");
  if (curves.empty()) throw DataError("train_unmask_meta: no curves");
  Matrix x;
  std::vector<std::string> y;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (curves[i].accuracies.size() != curves.front().accuracies.size()) {
      throw DataError("train_unmask_meta: curves differ in length");
    }
    x.append_row(curve_features(curves[i]));
    y.push_back(same_author[i] ? kSameLabel : kDifferentLabel);
  }
  return train_logreg(x, y, options);
}

VerificationDecision unmask_verify(const DegradationCurve& curve, const LinearModel& meta, double threshold) {
  auto f = curve_features(curve);
  if (f.size() != meta.dim()) throw DataError("unmask_verify: curve length does not match the meta-classifier");
  auto p = predict_proba(meta, f);
  return VerificationDecision::make(p[meta.class_index(kSameLabel)], threshold);
}

Ranking imposters_attribute(const std::map<std::string, std::vector<std::string>>& candidates, std::string_view query,
                            const ImpostersOptions& options) {
  if (candidates.empty()) throw DataError("imposters_attribute: no candidates");
  if (candidates.size() == 1) return {{candidates.begin()->first, 1.0}};
  if (options.rounds == 0) throw ConfigError("imposters_attribute: rounds must be positive");
  std::vector<std::vector<std::string>> chunks;
  std::vector<std::string> y;
  for (const auto& [author, texts] : candidates) {
    auto c = chunk_texts(texts, options.chunk_words);
    if (c.size() < 2) throw DataError("imposters_attribute: candidate '" + author + "' has too little text");
    for (auto& ch : c) {
      chunks.push_back(std::move(ch));
      y.push_back(author);
    }
  }
  std::vector<const std::vector<std::string>*> all;
  for (const auto& c : chunks) all.push_back(&c);
  auto vocab = top_words(all, options.n_features);
  if (vocab.size() <= options.rounds * options.k_remove * 2) {
    throw DataError("imposters_attribute: too few features for the elimination schedule");
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index[vocab[i]] = i;
  Matrix x;
  for (const auto& c : chunks) x.append_row(frequency_row(c, index, vocab.size()));
  auto query_row = frequency_row(lower_words(query), index, vocab.size());

  std::map<std::string, std::size_t> wins;
  for (const auto& [author, t] : candidates) wins[author] = 0;
  std::vector<bool> removed(vocab.size(), false);
  auto rows = iota(chunks.size());
  for (std::size_t round = 0; round < options.rounds; ++round) {
    auto active = active_columns(removed);
    Standardizer st(x, rows, active);
    LinearModel m = train_logreg(st.apply(x, rows), y, options.train);
    auto ranking = rank_probabilities(m.class_labels, predict_proba(m, st.apply(query_row)));
    ++wins[ranking.front().first];
    // Features separating the candidates most: largest weight spread.
    std::vector<double> spread(active.size(), 0.0);
    for (std::size_t j = 0; j < active.size(); ++j) {
      double lo = m.weights(0, j);
      double hi = lo;
      for (std::size_t r = 1; r < m.weights.rows(); ++r) {
        lo = std::min(lo, m.weights(r, j));
        hi = std::max(hi, m.weights(r, j));
      }
      spread[j] = m.binary() ? std::abs(lo) : hi - lo;
    }
    std::vector<std::size_t> order = iota(active.size());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return spread[a] != spread[b] ? spread[a] > spread[b] : active[a] < active[b];
    });
    for (std::size_t k = 0; k < 2 * options.k_remove; ++k) removed[active[order[k]]] = true;
  }
  Ranking out;
  for (const auto& [author, w] : wins) {
    out.emplace_back(author, static_cast<double>(w) / static_cast<double>(options.rounds));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Metric learning

Mining parse_mining(std::string_view name) {
  if (name == "none") return Mining::none;
  if (name == "batch_hard") return Mining::batch_hard;
  throw ConfigError("unknown mining mode '" + std::string(name) + "'");
}

std::string_view mining_name(Mining mining) { return mining == Mining::none ? "none" : "batch_hard"; }

std::vector<double> MetricModel::embed(std::span<const double> x) const {
  if (x.size() != projection.cols()) throw DataError("metric model: dimension mismatch");
  std::vector<double> out(projection.rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = simd::dot(projection.row(r), x);
  return out;
}

std::string MetricModel::to_json() const {
  json rows = json::array();
  for (std::size_t r = 0; r < projection.rows(); ++r) {
    auto row = projection.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  json j = {{"format", "stylo-metric"},
            {"version", 1},
            {"margin", margin},
            {"feature_dim", projection.cols()},
            {"projection", std::move(rows)}};
  j["hash"] = sha256_hex(j.dump());
  return j.dump();
}

MetricModel MetricModel::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("metric model: ") + e.what());
  }
  if (j.value("format", "") != "stylo-metric" || j.value("version", 0) != 1) {
    throw DataError("metric model: unsupported format or version");
  }
  std::string stored = j.value("hash", "");
  j.erase("hash");
  if (sha256_hex(j.dump()) != stored) throw DataError("metric model: content hash mismatch");
  MetricModel m;
  m.margin = j.at("margin").get<double>();
  std::size_t dim = j.at("feature_dim").get<std::size_t>();
  const auto& rows = j.at("projection");
  m.projection = Matrix(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto v = rows[r].get<std::vector<double>>();
    if (v.size() != dim) throw DataError("metric model: row width mismatch");
    std::copy(v.begin(), v.end(), m.projection.row(r).begin());
  }
  return m;
}

namespace {

Matrix project_rows(const Matrix& projection, const Matrix& batch) {
  Matrix e(batch.rows(), projection.rows());
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    for (std::size_t r = 0; r < projection.rows(); ++r) e(i, r) = simd::dot(projection.row(r), batch.row(i));
  }
  return e;
}

double row_distance(const Matrix& e, std::size_t a, std::size_t b) {
  return std::sqrt(simd::squared_distance(e.row(a), e.row(b)));
}

// grad += sign * coef * (P u) u^T / ||P u|| with u = x_a - x_b.
void accumulate_pair(const Matrix& projection, const Matrix& batch, const Matrix& emb, std::size_t a, std::size_t b,
                     double coef, Matrix& grad, std::vector<double>& u) {
  const double d = row_distance(emb, a, b);
  if (d == 0.0) return;
  auto xa = batch.row(a);
  auto xb = batch.row(b);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = xa[k] - xb[k];
  for (std::size_t r = 0; r < projection.rows(); ++r) {
    double pu = emb(a, r) - emb(b, r);
    simd::axpy(coef * pu / d, u, grad.row(r));
  }
}

}  // namespace

std::vector<Triplet> select_triplets(const Matrix& embeddings, const std::vector<std::size_t>& labels, Mining mining,
                                     Rng& rng) {
  const std::size_t n = labels.size();
  if (embeddings.rows() != n) throw InvariantError("select_triplets: size mismatch");
  std::vector<Triplet> out;
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      (labels[j] == labels[a] ? pos : neg).push_back(j);
    }
    if (pos.empty() || neg.empty()) continue;
    Triplet t{a, pos.front(), neg.front()};
    if (mining == Mining::batch_hard) {
      double best_p = -1.0;
      for (std::size_t p : pos) {
        double d = row_distance(embeddings, a, p);
        if (d > best_p) {
          best_p = d;
          t.positive = p;
        }
      }
      double best_n = std::numeric_limits<double>::infinity();
      for (std::size_t q : neg) {
        double d = row_distance(embeddings, a, q);
        if (d < best_n) {
          best_n = d;
          t.negative = q;
        }
      }
    } else {
      t.positive = pos[rng.below(pos.size())];
      t.negative = neg[rng.below(neg.size())];
    }
    out.push_back(t);
  }
  return out;
}

double triplet_loss(const Matrix& projection, const Matrix& batch, const std::vector<Triplet>& triplets, double margin,
                    Matrix* grad) {
  if (batch.cols() != projection.cols()) throw DataError("triplet_loss: dimension mismatch");
  Matrix emb = project_rows(projection, batch);
  if (grad) *grad = Matrix(projection.rows(), projection.cols());
  if (triplets.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(triplets.size());
  std::vector<double> u(batch.cols());
  double loss = 0.0;
  for (const auto& t : triplets) {
    double d_ap = row_distance(emb, t.anchor, t.positive);
    double d_an = row_distance(emb, t.anchor, t.negative);
    double h = d_ap - d_an + margin;
    if (h <= 0.0) continue;
    loss += scale * h;
    if (grad) {
      accumulate_pair(projection, batch, emb, t.anchor, t.positive, scale, *grad, u);
      accumulate_pair(projection, batch, emb, t.anchor, t.negative, -scale, *grad, u);
    }
  }
  return loss;
}

double batch_hard_loss(const Matrix& projection, const Matrix& batch, const std::vector<std::size_t>& labels,
                       double margin, Matrix* grad) {
  Rng unused(0);
  auto triplets = select_triplets(project_rows(projection, batch), labels, Mining::batch_hard, unused);
  return triplet_loss(projection, batch, triplets, margin, grad);
}

MetricModel train_metric(const Matrix& x, const std::vector<std::string>& labels, const MetricTrainOptions& options,
                         std::vector<double>* loss_history) {
  if (x.rows() != labels.size()) throw DataError("train_metric: label count mismatch");
  if (options.embed_dim == 0 || options.margin <= 0.0) throw ConfigError("train_metric: bad embed_dim or margin");
  if (options.authors_per_batch < 2 || options.docs_per_author < 2) {
    throw ConfigError("train_metric: batches need at least 2 authors x 2 documents");
  }
  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (std::size_t i = 0; i < labels.size(); ++i) rows_of[labels[i]].push_back(i);
  if (rows_of.size() < 2) throw DataError("train_metric: need at least two authors");
  for (const auto& [a, rows] : rows_of) {
    if (rows.size() < 2) throw DataError("train_metric: author '" + a + "' has no positive pair");
  }
  std::vector<std::string> authors;
  for (const auto& [a, r] : rows_of) authors.push_back(a);

  MetricModel model;
  model.margin = options.margin;
  model.projection = Matrix(options.embed_dim, x.cols());
  Rng init = Rng::substream(options.seed, "metric-init");
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, x.cols())));
  for (double& v : model.projection.flat()) v = init.uniform(-bound, bound);

  Rng sampler = Rng::substream(options.seed, "metric-batches");
  Rng miner = Rng::substream(options.seed, "metric-mining");
  Matrix grad;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<std::size_t> order(authors.size());
    std::iota(order.begin(), order.end(), 0);
    sampler.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.authors_per_batch) {
      std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + options.authors_per_batch)));
      while (group.size() < 2) {
        std::size_t extra = order[sampler.below(order.size())];
        if (std::find(group.begin(), group.end(), extra) == group.end()) group.push_back(extra);
      }
      Matrix batch;
      std::vector<std::size_t> batch_labels;
      for (std::size_t g : group) {
        std::vector<std::size_t> rows = rows_of[authors[g]];
        sampler.shuffle(std::span<std::size_t>(rows));
        rows.resize(std::min(rows.size(), options.docs_per_author));
        for (std::size_t r : rows) {
          batch.append_row(x.row(r));
          batch_labels.push_back(g);
        }
      }
      auto triplets = select_triplets(project_rows(model.projection, batch), batch_labels, options.mining, miner);
      epoch_loss += triplet_loss(model.projection, batch, triplets, options.margin, &grad);
      simd::axpy(-options.lr, grad.flat(), model.projection.flat());
      ++batches;
    }
    if (loss_history) loss_history->push_back(epoch_loss / static_cast<double>(batches));
  }
  return model;
}

MetricModel train_metric(const Corpus& corpus, const FeatureSchema& schema, const MetricTrainOptions& options,
                         std::vector<double>* loss_history) {
  const auto& docs = corpus.documents();
  std::vector<FeatureVector> vecs(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) { vecs[i] = schema.vectorize(docs[i]); });
  std::vector<std::string> labels;
  for (const auto& d : docs) labels.push_back(d.author_id);
  return train_metric(to_matrix(vecs), labels, options, loss_history);
}

double av_score(const MetricModel& model, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("av_score: dimension mismatch");
  auto ex = model.embed(x);
  auto ey = model.embed(y);
  return -std::sqrt(simd::squared_distance(ex, ey));
}

}  // namespace stylo
