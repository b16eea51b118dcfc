#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "stylo/linear.hpp"
#include "stylo/metrics.hpp"
#include "support.hpp"

using namespace stylo;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (auto& x : m.flat()) x = rng.normal();
  return m;
}

double max_relative_gradient_error(const LogisticObjective& obj, Rng& rng) {
  std::vector<double> p(obj.parameter_count());
  for (auto& x : p) x = rng.normal() * 0.5;
  std::vector<double> g(p.size());
  obj.value_and_gradient(p, g);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto plus = p;
    auto minus = p;
    plus[i] += h;
    minus[i] -= h;
    double fd = (obj.value(plus) - obj.value(minus)) / (2 * h);
    worst = std::max(worst, testing::relative_error(g[i], fd));
  }
  return worst;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  Rng rng(12);
  for (std::size_t classes : {2, 3, 4}) {
    Matrix x = random_matrix(rng, 5, 4);
    std::vector<std::size_t> y(5);
    for (std::size_t i = 0; i < 5; ++i) y[i] = i % classes;
    LogisticObjective obj(x, y, classes, 0.1);
    CHECK(obj.rows() == (classes == 2 ? 1u : classes));
    CHECK(max_relative_gradient_error(obj, rng) <= 1e-5);
    LogisticObjective weighted(x, y, classes, 0.01, {1.0, 2.0, 0.5, 1.0, 3.0});
    CHECK(max_relative_gradient_error(weighted, rng) <= 1e-5);
  }
}

TEST_CASE("separable 1-D data") {
  Matrix x(2, 1);
  x(0, 0) = -1.0;
  x(1, 0) = 1.0;
  auto m = train_logreg(x, {"c0", "c1"});
  CHECK(m.binary());
  CHECK(m.class_labels == std::vector<std::string>{"c0", "c1"});
  CHECK(argmax(predict_proba(m, x.row(0))) == 0);
  CHECK(argmax(predict_proba(m, x.row(1))) == 1);
}

TEST_CASE("loss is non-increasing and training is deterministic") {
  Rng rng(4);
  Matrix x = random_matrix(rng, 40, 6);
  std::vector<std::string> y;
  for (std::size_t i = 0; i < 40; ++i) y.push_back(x(i, 0) + 0.3 * x(i, 1) > 0 ? "p" : (x(i, 2) > 0 ? "q" : "r"));
  std::vector<double> history;
  TrainOptions opts;
  opts.lr = 8.0;  // large enough to trigger halving
  auto m1 = train_logreg(x, y, opts, &history);
  REQUIRE(history.size() >= 2);
  for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1]);
  auto m2 = train_logreg(x, y, opts);
  CHECK(m1 == m2);
  CHECK(m1.content_hash() == m2.content_hash());
}

TEST_CASE("strong regularization approaches the class prior") {
  Rng rng(8);
  Matrix x = random_matrix(rng, 30, 3);
  std::vector<std::string> y;
  for (std::size_t i = 0; i < 30; ++i) y.push_back(i < 20 ? "major" : (i < 25 ? "minor" : "tiny"));
  TrainOptions opts;
  opts.l2_lambda = 1e6;
  auto m = train_logreg(x, y, opts);
  for (double w : m.weights.flat()) CHECK(std::abs(w) < 1e-4);
  for (std::size_t i = 0; i < 30; ++i) CHECK(m.class_labels[argmax(predict_proba(m, x.row(i)))] == "major");
}

TEST_CASE("feature scaling with zero regularization keeps argmax predictions") {
  Matrix x(4, 2);
  double rows[4][2] = {{-2, 1}, {-1, -1}, {1, 0.5}, {2, -0.5}};
  for (int i = 0; i < 4; ++i) {
    x(i, 0) = rows[i][0];
    x(i, 1) = rows[i][1];
  }
  std::vector<std::string> y{"a", "a", "b", "b"};
  TrainOptions opts;
  opts.l2_lambda = 0.0;
  auto m = train_logreg(x, y, opts);
  Matrix scaled = x;
  for (auto& v : scaled.flat()) v *= 3.0;
  auto ms = train_logreg(scaled, y, opts);
  for (std::size_t i = 0; i < 4; ++i) CHECK(argmax(predict_proba(m, x.row(i))) == argmax(predict_proba(ms, scaled.row(i))));
}

TEST_CASE("predict_proba") {
  LinearModel zero;
  zero.weights = Matrix(3, 2);
  zero.bias = {0, 0, 0};
  zero.class_labels = {"a", "b", "c"};
  std::vector<double> x{0.3, -2.0};
  for (double p : predict_proba(zero, x)) CHECK(p == doctest::Approx(1.0 / 3.0));

  Rng rng(1);
  LinearModel m;
  m.weights = random_matrix(rng, 3, 2);
  m.bias = {0.1, -0.2, 0.3};
  m.class_labels = {"a", "b", "c"};
  auto p = predict_proba(m, x);
  CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
  LinearModel shifted = m;
  for (auto& b : shifted.bias) b += 5.0;
  auto ps = predict_proba(shifted, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ps[i] == doctest::Approx(p[i]).epsilon(1e-12));
  std::vector<double> raw(3);
  for (std::size_t k = 0; k < 3; ++k) raw[k] = m.weights(k, 0) * x[0] + m.weights(k, 1) * x[1] + m.bias[k];
  CHECK(argmax(raw) == argmax(p));
  std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(predict_proba(m, wrong), DataError);
}

TEST_CASE("training preconditions") {
  Matrix x(3, 1, 1.0);
  CHECK_THROWS_AS(train_logreg(x, {"a", "a", "a"}), DataError);
  CHECK_THROWS_AS(train_logreg(x, {"a", "b"}), DataError);
  Matrix bad(2, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train_logreg(bad, {"a", "b"}), DataError);
  Matrix one(1, 1, 1.0);
  CHECK_THROWS_AS(train_logreg(one, {"a"}), DataError);
}

TEST_CASE("class balancing shifts the decision toward the minority class") {
  Matrix x(10, 1);
  std::vector<std::string> y;
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = i < 8 ? -0.2 + 0.05 * i : 0.3;
    y.push_back(i < 8 ? "big" : "small");
  }
  TrainOptions plain;
  TrainOptions balanced;
  balanced.balance_classes = true;
  std::vector<double> probe{0.2};
  double p_plain = predict_proba(train_logreg(x, y, plain), probe)[1];
  double p_bal = predict_proba(train_logreg(x, y, balanced), probe)[1];
  CHECK(p_bal > p_plain);
}

TEST_CASE("model serialization") {
  Rng rng(2);
  Matrix x = random_matrix(rng, 12, 3);
  std::vector<std::string> y;
  for (std::size_t i = 0; i < 12; ++i) y.push_back(i % 3 == 0 ? "x" : (i % 3 == 1 ? "y" : "z"));
  auto m = train_logreg(x, y);
  auto back = LinearModel::from_json(m.to_json());
  CHECK(back == m);
  auto text = m.to_json();
  auto pos = text.find("\"l2_lambda\"");
  REQUIRE(pos != std::string::npos);
  text.insert(text.find(':', pos) + 1, "1");
  CHECK_THROWS_AS(LinearModel::from_json(text), DataError);
}

TEST_CASE("ensemble combination") {
  std::vector<std::string> labels{"c1", "c2"};
  auto single = combine_member_probabilities(labels, {{0.7, 0.3}});
  CHECK(single.front().first == "c1");
  CHECK(single.front().second == doctest::Approx(0.7));
  auto same = combine_member_probabilities(labels, {{0.7, 0.3}, {0.7, 0.3}});
  CHECK(same == single);
  auto mixed = combine_member_probabilities(labels, {{0.6, 0.4}, {0.2, 0.8}});
  CHECK(mixed.front().first == "c2");
  CHECK(mixed.front().second == doctest::Approx(0.6));
  CHECK(mixed.back().second == doctest::Approx(0.4));
  auto tie = combine_member_probabilities(labels, {{0.5, 0.5}});
  CHECK(tie.front().first == "c1");
  CHECK_THROWS(combine_member_probabilities(labels, {}));
}

TEST_CASE("ensemble over feature families") {
  Rng rng(9);
  auto vocab_a = testing::word_list(30, "alpha");
  auto vocab_b = testing::word_list(30, "beta");
  auto ua = testing::Unigram::make(vocab_a, rng);
  auto ub = testing::Unigram::make(vocab_b, rng);
  std::vector<Document> train_docs;
  for (int i = 0; i < 8; ++i) {
    train_docs.push_back({"a" + std::to_string(i), "A", ua.text(rng, 40)});
    train_docs.push_back({"b" + std::to_string(i), "B", ub.text(rng, 40)});
  }
  Corpus train("t", train_docs);
  FamilySpec chars;
  chars.family = FeatureFamily::char_ngram;
  chars.n = 3;
  chars.top_k = 200;
  FamilySpec toks;
  toks.family = FeatureFamily::token_ngram;
  toks.n = 1;
  toks.top_k = 100;
  auto schema = fit_schema(train, {chars, toks});
  auto ens = train_ensemble(train, schema);
  CHECK(ens.members.size() == 2);
  Document qa{"qa", "A", ua.text(rng, 40)};
  auto r = ensemble_predict(ens, schema, qa);
  CHECK(r.front().first == "A");
  double sum = 0.0;
  for (const auto& [label, p] : r) {
    CHECK(p >= 0.0);
    sum += p;
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
  CHECK_THROWS(ensemble_predict(Ensemble{}, schema, qa));
}

TEST_CASE("AV classifier on vector differences") {
  Rng rng(21);
  std::vector<testing::Unigram> authors;
  for (int a = 0; a < 6; ++a) authors.push_back(testing::Unigram::make(testing::word_list(25, "v" + std::to_string(a) + "_"), rng));
  std::vector<Document> docs;
  for (int a = 0; a < 6; ++a) {
    for (int d = 0; d < 6; ++d) {
      docs.push_back({"a" + std::to_string(a) + "d" + std::to_string(d), "A" + std::to_string(a), authors[a].text(rng, 60)});
    }
  }
  Corpus corpus("av", docs);
  FamilySpec toks;
  toks.family = FeatureFamily::token_ngram;
  toks.n = 1;
  toks.top_k = kAllKeys;
  auto schema = fit_schema(corpus, {toks});
  auto pairs_for = [&](int lo, int hi) {
    std::vector<LabeledPair> pairs;
    for (int a = lo; a < hi; ++a) {
      for (int d = 0; d + 1 < 6; d += 2) {
        pairs.push_back({docs[a * 6 + d].id, docs[a * 6 + d + 1].id, true});
        int b = lo + (a - lo + 1) % (hi - lo);
        pairs.push_back({docs[a * 6 + d].id, docs[b * 6 + d + 1].id, false});
      }
    }
    return pairs;
  };
  auto train_pairs = pairs_for(0, 3);
  auto model = train_av_classifier(train_pairs, corpus, schema);
  CHECK(model.binary());
  const auto& d0 = corpus.documents()[0];
  const auto& d1 = corpus.documents()[7];
  CHECK(av_probability(model, schema, d0, d1) == av_probability(model, schema, d1, d0));
  double self = av_probability(model, schema, d0, d0);
  double bias_only = 1.0 / (1.0 + std::exp(-model.bias[0]));
  CHECK(self == doctest::Approx(bias_only).epsilon(1e-12));
  CHECK(self > 0.5);

  std::vector<double> scores;
  std::vector<bool> labels;
  for (const auto& p : pairs_for(3, 6)) {
    scores.push_back(av_probability(model, schema, corpus.at(p.a), corpus.at(p.b)));
    labels.push_back(p.same);
  }
  CHECK(auc(scores, labels) >= 0.95);

  std::vector<LabeledPair> one_label{{docs[0].id, docs[1].id, true}, {docs[2].id, docs[3].id, true}};
  CHECK_THROWS_AS(train_av_classifier(one_label, corpus, schema), DataError);
}
