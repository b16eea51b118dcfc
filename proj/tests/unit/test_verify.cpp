#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "stylo/metrics.hpp"
#include "stylo/verify.hpp"
#include "support.hpp"

using namespace stylo;

namespace {

Corpus vector_corpus(const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string text;
    for (double v : rows[i].second) text += std::to_string(v) + " ";
    docs.push_back({"d" + std::to_string(i), rows[i].first, text});
  }
  return Corpus("vectors", docs);
}

EmbedFn parse_embed() {
  return [](const Document& d) {
    std::vector<double> out;
    std::istringstream in(d.text);
    for (double v; in >> v;) out.push_back(v);
    return out;
  };
}

UnmaskOptions small_unmask(std::uint64_t seed) {
  UnmaskOptions o;
  o.chunk_words = 100;
  o.rounds = 6;
  o.k_remove = 2;
  o.n_features = 100;
  o.folds = 5;
  o.seed = seed;
  return o;
}

Matrix to_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

}  // namespace

TEST_CASE("profiles") {
  SUBCASE("single document") {
    auto c = vector_corpus({{"a", {1.0, 2.0}}});
    auto p = build_profiles(c, parse_embed());
    CHECK(p.at("a").centroid == std::vector<double>{1.0, 2.0});
    CHECK(p.at("a").member_ids == std::vector<std::string>{"d0"});
  }
  SUBCASE("identical members") {
    auto c = vector_corpus({{"a", {0.25, -3.0}}, {"a", {0.25, -3.0}}});
    CHECK(build_profiles(c, parse_embed()).at("a").centroid == std::vector<double>{0.25, -3.0});
  }
  SUBCASE("unit axes") {
    auto c = vector_corpus({{"a", {1, 0, 0}}, {"a", {0, 1, 0}}});
    CHECK(build_profiles(c, parse_embed()).at("a").centroid == std::vector<double>{0.5, 0.5, 0.0});
  }
  SUBCASE("sampling size, determinism and order independence") {
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (int i = 0; i < 30; ++i) rows.push_back({i % 2 ? "a" : "b", {static_cast<double>(i), 1.0}});
    auto c = vector_corpus(rows);
    auto p1 = build_profiles(c, parse_embed(), 10, 5);
    CHECK(p1.at("a").member_ids.size() == 10);
    auto docs = c.documents();
    std::reverse(docs.begin(), docs.end());
    auto p2 = build_profiles(Corpus("rev", docs), parse_embed(), 10, 5);
    CHECK(p1.at("a").member_ids == p2.at("a").member_ids);
    CHECK(p1.at("a").centroid == p2.at("a").centroid);
    auto p3 = build_profiles(c, parse_embed(), 10, 6);
    CHECK(p3.at("a").member_ids != p1.at("a").member_ids);
    CHECK_THROWS_AS(build_profiles(c, parse_embed(), 0, 1), ConfigError);
  }
}

TEST_CASE("profile attribution") {
  ProfileMap profiles;
  profiles["b"] = {"b", {1.0, 0.0}, {}};
  profiles["a"] = {"a", {-1.0, 0.0}, {}};
  profiles["c"] = {"c", {5.0, 5.0}, {}};
  std::vector<double> at_c{5.0, 5.0};
  auto r = profile_attribute(profiles, at_c);
  CHECK(r.front().first == "c");
  CHECK(r.front().second == 0.0);
  std::vector<double> origin{0.0, 0.0};
  CHECK(profile_attribute(profiles, origin).front().first == "a");
  CHECK_THROWS_AS(profile_attribute({}, origin), DataError);
  std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(profile_attribute(profiles, wrong), DataError);
}

TEST_CASE("profile attribution equals a brute-force nearest centroid") {
  Rng rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    auto blobs = testing::gaussian_blobs(rng, 2 + rng.below(4), 3 + rng.below(5), 3, 2.0, 1.0);
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (std::size_t i = 0; i < blobs.rows.size(); ++i) rows.push_back({blobs.labels[i], blobs.rows[i]});
    auto c = vector_corpus(rows);
    auto profiles = build_profiles(c, parse_embed(), 100, trial);
    for (int q = 0; q < 20; ++q) {
      std::vector<double> x{rng.normal() * 3, rng.normal() * 3, rng.normal() * 3};
      std::string best;
      double best_d = 1e300;
      for (const auto& [author, p] : profiles) {
        double d = 0.0;
        for (std::size_t k = 0; k < 3; ++k) d += (x[k] - p.centroid[k]) * (x[k] - p.centroid[k]);
        if (d < best_d) {
          best_d = d;
          best = author;
        }
      }
      CHECK(profile_attribute(profiles, x).front().first == best);
    }
  }
}

TEST_CASE("well separated Gaussian authors") {
  Rng rng(3);
  std::vector<std::pair<std::string, std::vector<double>>> train_rows;
  std::vector<std::vector<double>> centers;
  for (int a = 0; a < 3; ++a) centers.push_back({rng.normal() * 10, rng.normal() * 10});
  // Force pairwise separation of at least 6 sigma.
  centers = {{0, 0}, {8, 0}, {0, 8}};
  AaPredictions preds;
  for (int a = 0; a < 3; ++a) {
    for (int i = 0; i < 10; ++i) {
      train_rows.push_back({"A" + std::to_string(a), {centers[a][0] + rng.normal(), centers[a][1] + rng.normal()}});
    }
  }
  auto profiles = build_profiles(vector_corpus(train_rows), parse_embed(), 10, 1);
  for (int a = 0; a < 3; ++a) {
    for (int i = 0; i < 10; ++i) {
      std::vector<double> x{centers[a][0] + rng.normal(), centers[a][1] + rng.normal()};
      preds.push_back({"q", "A" + std::to_string(a), profile_attribute(profiles, x).front().first, {}});
    }
  }
  CHECK(macro_accuracy(preds) >= 0.95);
}

TEST_CASE("threshold search") {
  CHECK(threshold_search({0.4, 0.6}, {false, true}, {0.5}) == 0.5);
  CHECK(binary_accuracy({0.4, 0.6}, {false, true}, 0.5) == 1.0);
  std::vector<double> sep{0.1, 0.2, 0.3, 0.7, 0.8};
  std::vector<bool> sep_l{false, false, false, true, true};
  double t = threshold_search(sep, sep_l, default_threshold_grid(sep));
  CHECK(binary_accuracy(sep, sep_l, t) == 1.0);
  // Ties go to the smallest threshold.
  CHECK(threshold_search({0.1, 0.9}, {false, true}, {0.8, 0.2, 0.5}) == 0.2);
  CHECK_THROWS_AS(threshold_search({0.1}, {true}, {0.5}), DataError);
  CHECK_THROWS_AS(threshold_search({0.1, 0.2}, {true, false}, {}), ConfigError);

  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s;
    std::vector<bool> l;
    for (int i = 0; i < 200; ++i) {
      s.push_back(rng.uniform());
      l.push_back(i % 2 == 0);
    }
    auto grid = default_threshold_grid(s);
    CHECK(grid.size() == 101);
    double best = threshold_search(s, l, grid);
    double acc = binary_accuracy(s, l, best);
    for (double g : grid) CHECK(acc >= binary_accuracy(s, l, g));
    CHECK(acc <= 0.6);
    CHECK(acc >= 0.5);
    VerificationDecision d = VerificationDecision::make(s[0], best);
    CHECK(d.same_author == (s[0] >= best));
  }
}

TEST_CASE("unmasking curves") {
  Rng rng(1);
  auto [a, b] = testing::unmasking_pair(rng, false);
  auto opts = small_unmask(3);
  auto curve = unmask({a}, {b}, opts);
  CHECK(curve.accuracies.size() == opts.rounds);
  CHECK(curve.rounds == opts.rounds);
  CHECK(curve.features_removed_per_round == 2 * opts.k_remove);
  for (double acc : curve.accuracies) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  CHECK(unmask({a}, {b}, opts) == curve);
  auto one = opts;
  one.rounds = 1;
  CHECK(unmask({a}, {b}, one).accuracies.size() == 1);
  CHECK_THROWS_AS(unmask({"too short"}, {b}, opts), DataError);
  auto greedy = opts;
  greedy.rounds = 30;
  CHECK_THROWS_AS(unmask({a}, {b}, greedy), DataError);
  auto csv = curve_csv(curve);
  CHECK(csv.rfind("round,accuracy\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(opts.rounds + 1));
  auto chunks = chunk_texts({"A b, c. D e f g"}, 3);
  CHECK(chunks == std::vector<std::vector<std::string>>{{"a", "b", "c"}, {"d", "e", "f"}});
}

TEST_CASE("same-author curves degrade faster; the meta-classifier separates them") {
  std::vector<DegradationCurve> curves;
  std::vector<bool> labels;
  double same_drop = 0.0;
  double diff_drop = 0.0;
  const int trials = 12;
  for (int t = 0; t < 2 * trials; ++t) {
    Rng rng(1000 + t);
    bool same = t % 2 == 0;
    auto [a, b] = testing::unmasking_pair(rng, same);
    auto curve = unmask({a}, {b}, small_unmask(t));
    (same ? same_drop : diff_drop) += curve.total_drop();
    curves.push_back(curve);
    labels.push_back(same);
  }
  CHECK(same_drop / trials > diff_drop / trials);

  std::vector<DegradationCurve> train(curves.begin(), curves.begin() + trials);
  std::vector<bool> train_l(labels.begin(), labels.begin() + trials);
  auto meta = train_unmask_meta(train, train_l);
  int correct = 0;
  for (int i = trials; i < 2 * trials; ++i) {
    auto d = unmask_verify(curves[i], meta);
    CHECK(d.score >= 0.0);
    CHECK(d.score <= 1.0);
    correct += d.same_author == labels[i] ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / trials >= 0.8);
  CHECK(unmask_verify(curves[0], meta).score == unmask_verify(curves[0], meta).score);
  DegradationCurve shorter = curves[0];
  shorter.accuracies.pop_back();
  shorter.rounds -= 1;
  CHECK_THROWS_AS(unmask_verify(shorter, meta), DataError);
}

TEST_CASE("imposters round-win attribution") {
  Rng rng(77);
  auto vocab = testing::word_list(150, "w");
  std::vector<testing::Unigram> authors;
  for (int a = 0; a < 3; ++a) authors.push_back(testing::Unigram::make(vocab, rng));
  std::map<std::string, std::vector<std::string>> candidates;
  for (int a = 0; a < 3; ++a) candidates["cand" + std::to_string(a)] = {authors[a].text(rng, 800)};
  ImpostersOptions o;
  o.chunk_words = 100;
  o.rounds = 6;
  o.k_remove = 2;
  o.n_features = 100;
  auto r = imposters_attribute(candidates, authors[1].text(rng, 400), o);
  CHECK(r.front().first == "cand1");
  CHECK(r.front().second > 0.5);
  double sum = 0.0;
  for (const auto& [c, s] : r) sum += s;
  CHECK(std::abs(sum - 1.0) < 1e-9);
  auto solo = imposters_attribute({{"only", {"x"}}}, "anything", o);
  CHECK(solo == Ranking{{"only", 1.0}});
  CHECK_THROWS_AS(imposters_attribute({}, "q", o), DataError);
  CHECK_THROWS_AS(imposters_attribute({{"a", {"tiny"}}, {"b", {"tiny"}}}, "q", o), DataError);
}

TEST_CASE("triplet loss: inactive hinge and finite differences") {
  Matrix proj(1, 1, 1.0);
  Matrix batch(3, 1);
  batch(0, 0) = 0.0;
  batch(1, 0) = 0.5;
  batch(2, 0) = 3.0;
  Matrix grad;
  CHECK(triplet_loss(proj, batch, {{0, 1, 2}}, 1.0, &grad) == 0.0);
  CHECK(grad.rows() == 1);
  CHECK(grad(0, 0) == 0.0);

  Rng rng(5);
  const std::size_t dim = 4;
  const std::size_t embed = 3;
  auto blobs = testing::gaussian_blobs(rng, 3, 3, dim, 1.0, 0.7);
  Matrix x = to_rows(blobs.rows);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < blobs.labels.size(); ++i) labels.push_back(i / 3);
  Matrix p(embed, dim);
  for (auto& v : p.flat()) v = rng.normal();
  Matrix g;
  double loss = batch_hard_loss(p, x, labels, 2.0, &g);
  CHECK(loss > 0.0);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.flat().size(); ++i) {
    Matrix plus = p;
    Matrix minus = p;
    plus.flat()[i] += h;
    minus.flat()[i] -= h;
    double fd = (batch_hard_loss(plus, x, labels, 2.0, nullptr) - batch_hard_loss(minus, x, labels, 2.0, nullptr)) / (2 * h);
    worst = std::max(worst, testing::relative_error(g.flat()[i], fd));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("triplet selection") {
  Rng rng(2);
  auto blobs = testing::gaussian_blobs(rng, 3, 4, 2, 2.0, 1.0);
  Matrix emb = to_rows(blobs.rows);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < emb.rows(); ++i) labels.push_back(i / 4);
  auto dist = [&](std::size_t i, std::size_t j) {
    double dx = emb(i, 0) - emb(j, 0);
    double dy = emb(i, 1) - emb(j, 1);
    return std::sqrt(dx * dx + dy * dy);
  };
  auto hard = select_triplets(emb, labels, Mining::batch_hard, rng);
  CHECK(hard.size() == emb.rows());
  for (const auto& t : hard) {
    CHECK(labels[t.positive] == labels[t.anchor]);
    CHECK(t.positive != t.anchor);
    CHECK(labels[t.negative] != labels[t.anchor]);
    for (std::size_t j = 0; j < emb.rows(); ++j) {
      if (j == t.anchor) continue;
      if (labels[j] == labels[t.anchor]) CHECK(dist(t.anchor, j) <= dist(t.anchor, t.positive));
      else CHECK(dist(t.anchor, j) >= dist(t.anchor, t.negative));
    }
  }
  auto random = select_triplets(emb, labels, Mining::none, rng);
  for (const auto& t : random) {
    CHECK(labels[t.positive] == labels[t.anchor]);
    CHECK(t.positive != t.anchor);
    CHECK(labels[t.negative] != labels[t.anchor]);
  }
  CHECK(parse_mining("none") == Mining::none);
  CHECK(mining_name(Mining::batch_hard) == "batch_hard");
}

TEST_CASE("metric training separates synthetic authors") {
  Rng rng(10);
  auto blobs = testing::gaussian_blobs(rng, 5, 8, 12, 1.0, 0.8);
  Matrix x = to_rows(blobs.rows);
  MetricTrainOptions o;
  o.embed_dim = 4;
  o.epochs = 40;
  o.seed = 3;
  std::vector<double> history;
  auto model = train_metric(x, blobs.labels, o, &history);
  CHECK(model.projection.rows() == 4);
  CHECK(model.projection.cols() == 12);
  for (double v : model.projection.flat()) CHECK(std::isfinite(v));
  double intra = 0.0;
  double inter = 0.0;
  int n_intra = 0;
  int n_inter = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
      double d = -av_score(model, x.row(i), x.row(j));
      if (blobs.labels[i] == blobs.labels[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  CHECK(intra / n_intra < inter / n_inter);
  CHECK(train_metric(x, blobs.labels, o) == model);
  CHECK(MetricModel::from_json(model.to_json()) == model);

  CHECK(av_score(model, x.row(0), x.row(0)) == 0.0);
  CHECK(av_score(model, x.row(0), x.row(5)) == av_score(model, x.row(5), x.row(0)));
  for (std::size_t i = 0; i + 2 < x.rows(); ++i) {
    double ab = -av_score(model, x.row(i), x.row(i + 1));
    double bc = -av_score(model, x.row(i + 1), x.row(i + 2));
    double ac = -av_score(model, x.row(i), x.row(i + 2));
    CHECK(ac <= ab + bc + 1e-12);
  }
  std::vector<double> wrong(3);
  CHECK_THROWS_AS(av_score(model, x.row(0), wrong), DataError);

  Matrix lonely = to_rows({{1, 2}, {3, 4}, {5, 6}});
  CHECK_THROWS_AS(train_metric(lonely, {"a", "a", "b"}, o), DataError);
  CHECK_THROWS_AS(train_metric(lonely, {"a", "a", "a"}, o), DataError);
}
