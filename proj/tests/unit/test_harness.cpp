#include <doctest.h>

#include <cstdlib>
#include <set>

#include "stylo/harness.hpp"
#include "support.hpp"

using namespace stylo;
using testing::TempDir;

namespace {

std::filesystem::path project_dir() {
  const char* env = std::getenv("STYLO_DATA_DIR");
  return env != nullptr ? std::filesystem::path(env) : std::filesystem::current_path();
}

std::filesystem::path toy_corpus() { return project_dir() / "data" / "toy" / "toy_corpus.jsonl"; }

nlohmann::json base_config(const std::filesystem::path& corpus, const std::filesystem::path& out) {
  return {{"name", "t"},
          {"corpus", {{"path", corpus.string()}, {"format", "jsonl"}}},
          {"split", {{"kind", "iid"}, {"fractions", {0.5, 0.25, 0.25}}}},
          {"task", "aa"},
          {"method", "ppm"},
          {"params", {{"order", 3}}},
          {"output_dir", out.string()},
          {"seed", 7}};
}

ExperimentConfig parse(const nlohmann::json& j) {
  auto c = ExperimentConfig::from_json(j.dump());
  c.validate();
  return c;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  TempDir dir("cfg");
  auto good = base_config(toy_corpus(), dir / "out");
  CHECK_NOTHROW(parse(good));

  auto bad = good;
  bad["colour"] = "blue";
  CHECK_THROWS_AS(parse(bad), ConfigError);

  bad = good;
  bad["params"]["depth"] = 3;
  CHECK_THROWS_AS(parse(bad), ConfigError);

  bad = good;
  bad["method"] = "unmasking";
  CHECK_THROWS_AS(parse(bad), ConfigError);

  bad = good;
  bad["task"] = "av";
  bad["method"] = "imposters";
  CHECK_THROWS_AS(parse(bad), ConfigError);

  bad = good;
  bad["corpus"]["path"] = (dir / "nope.jsonl").string();
  CHECK_THROWS_AS(parse(bad), ConfigError);

  bad = good;
  bad["split"]["fractions"] = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(parse(bad), ConfigError);

  bad = good;
  bad["split"]["kind"] = "unique_author";
  CHECK_THROWS_AS(parse(bad), ConfigError);
  bad["task"] = "av";
  CHECK_NOTHROW(parse(bad));

  bad = good;
  bad["metrics"] = {"auc"};
  CHECK_THROWS_AS(parse(bad), ConfigError);

  bad = good;
  bad["task"] = "sorting";
  CHECK_THROWS_AS(parse(bad), ConfigError);

  CHECK_THROWS_AS(ExperimentConfig::from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "absent.json"), ConfigError);
}

TEST_CASE("config hash") {
  TempDir dir("hash");
  auto a = parse(base_config(toy_corpus(), dir / "out1"));
  auto b = parse(base_config(toy_corpus(), dir / "out2"));
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 64);
  auto j = base_config(toy_corpus(), dir / "out1");
  j["seed"] = 8;
  CHECK(parse(j).hash() != a.hash());
  CHECK(ExperimentConfig::from_json(a.to_json().dump()).hash() == a.hash());
  CHECK(method_supports(Method::imposters, Task::aa));
  CHECK_FALSE(method_supports(Method::imposters, Task::av));
  CHECK(method_supports(Method::unmasking, Task::av));
  CHECK_FALSE(method_supports(Method::unmasking, Task::aa));
  CHECK(parse_method(method_name(Method::profile_metric)) == Method::profile_metric);
}

TEST_CASE("pair sampling") {
  SUBCASE("two authors with two documents") {
    Corpus c = testing::balanced_corpus(2, 2);
    std::vector<std::string> ids;
    for (const auto& d : c.documents()) ids.push_back(d.id);
    Warnings w;
    auto pairs = sample_pairs(c, ids, 1, 3, "p", &w);
    REQUIRE(pairs.size() == 2);
    CHECK(std::count_if(pairs.begin(), pairs.end(), [](const AvPair& p) { return p.same; }) == 1);
    CHECK(w.empty());
    auto more = sample_pairs(c, ids, 5, 3, "p", &w);
    CHECK(more.size() == 6);  // 2 same pairs, 4 different, both capped
    CHECK_FALSE(w.empty());
  }
  SUBCASE("partition discipline, uniqueness and balance") {
    Corpus c = testing::balanced_corpus(6, 10);
    Split split = make_split(c, SplitKind::iid, {0.6, 0.2, 0.2}, 4);
    auto set = av_pairs_from_split(c, split, 15, 9);
    auto check = [&](const std::vector<AvPair>& pairs, const std::vector<std::string>& part, bool feasible) {
      std::set<std::string> allowed(part.begin(), part.end());
      std::set<std::pair<std::string, std::string>> seen;
      std::size_t same = 0;
      for (const auto& p : pairs) {
        CHECK(allowed.count(p.a) == 1);
        CHECK(allowed.count(p.b) == 1);
        CHECK(p.a != p.b);
        CHECK(p.same == (c.at(p.a).author_id == c.at(p.b).author_id));
        CHECK(seen.insert(std::minmax(p.a, p.b)).second);
        same += p.same ? 1 : 0;
      }
      CHECK(same <= 15);
      CHECK(pairs.size() - same <= 15);
      if (feasible) CHECK(same * 2 == pairs.size());
    };
    // 2 documents per author outside train: at most 6 same-author pairs there.
    check(set.train, split.train, true);
    check(set.validation, split.validation, false);
    check(set.test, split.test, false);
    CHECK(set.test.size() == 21);
    CHECK(set.train.size() == 30);
    auto again = av_pairs_from_split(c, split, 15, 9);
    CHECK(again.test.size() == set.test.size());
    for (std::size_t i = 0; i < set.test.size(); ++i) CHECK(again.test[i].a == set.test[i].a);
  }
  SUBCASE("csv") {
    TempDir dir("pairs");
    write_pairs_csv({{"x_00000", "a", "b", true}}, dir / "p.csv");
    CHECK(testing::read_file(dir / "p.csv") == "pair_id,doc_a,doc_b,same\nx_00000,a,b,1\n");
  }
}

TEST_CASE("synthetic corpus") {
  Corpus a = synth_corpus(3, 4, 200, 0.5, 11);
  Corpus b = synth_corpus(3, 4, 200, 0.5, 11);
  REQUIRE(a.size() == 12);
  CHECK(a.authors().size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.documents()[i].text == b.documents()[i].text);
    CHECK(a.documents()[i].text.size() == 200);
  }
  CHECK(synth_corpus(3, 4, 200, 0.5, 12).documents()[0].text != a.documents()[0].text);
  CHECK_THROWS(synth_corpus(0, 4, 200, 0.5, 1));
  CHECK_THROWS(synth_corpus(3, 4, 200, 1.5, 1));
}

TEST_CASE("synthetic separation drives accuracy") {
  TempDir dir("synth");
  auto run = [&](double separation) {
    Corpus c = synth_corpus(5, 20, 600, separation, 21);
    save_corpus_jsonl(c, dir / "synth.jsonl");
    auto j = base_config(dir / "synth.jsonl", dir / "out");
    j["params"]["order"] = 2;
    return run_experiment(parse(j)).report.metrics.at("macro_accuracy");
  };
  CHECK(run(1.0) >= 0.9);
  CHECK(run(0.0) <= 0.2 + 0.15);
}

TEST_CASE("runs are reproducible and audited") {
  TempDir dir("repro");
  auto j = base_config(toy_corpus(), dir / "a");
  auto ra = run_experiment(parse(j));
  j["output_dir"] = (dir / "b").string();
  auto rb = run_experiment(parse(j));
  CHECK(testing::read_file(dir / "a" / "predictions.csv") == testing::read_file(dir / "b" / "predictions.csv"));
  CHECK(testing::read_file(dir / "a" / "split.json") == testing::read_file(dir / "b" / "split.json"));
  CHECK(ra.report.metrics == rb.report.metrics);
  CHECK(ra.audit.passed);
  CHECK(ra.audit.fit_ids > 0);
  CHECK(ra.audit.test_ids_before_prediction == 0);

  auto loaded = RunRecord::load(dir / "a" / "run_record.json");
  CHECK(loaded.split_hash == ra.split_hash);
  CHECK(loaded.report == ra.report);
  auto split = load_split(dir / "a" / "split.json");
  CHECK(split_hash(split) == ra.split_hash);

  // Reusing the saved split reproduces the run.
  auto k = base_config(toy_corpus(), dir / "c");
  k["split"] = {{"file", (dir / "a" / "split.json").string()}};
  auto rc = run_experiment(parse(k));
  CHECK(rc.split_hash == ra.split_hash);
  CHECK(testing::read_file(dir / "c" / "predictions.csv") == testing::read_file(dir / "a" / "predictions.csv"));
}

TEST_CASE("leakage audit") {
  Corpus c = testing::balanced_corpus(3, 6);
  Split split = make_split(c, SplitKind::iid, {0.5, 0.25, 0.25}, 1);
  {
    DocumentAccess access(c, split);
    access.partition(DocumentAccess::Part::train);
    access.partition(DocumentAccess::Part::validation);
    access.begin_prediction();
    access.partition(DocumentAccess::Part::test);
    auto audit = access.audit();
    CHECK(audit.passed);
    CHECK(audit.fit_ids == split.train.size() + split.validation.size());
  }
  {
    DocumentAccess access(c, split);
    access.partition(DocumentAccess::Part::train);
    access.partition(DocumentAccess::Part::test);
    auto audit = access.audit();
    CHECK_FALSE(audit.passed);
    CHECK(audit.test_ids_before_prediction == split.test.size());
    CHECK(audit.leaked_ids == split.test);
  }
}

TEST_CASE("report formats") {
  TempDir dir("report");
  auto j = base_config(toy_corpus(), dir / "out");
  auto record = run_experiment(parse(j));
  auto js = report_render(record, ReportFormat::json);
  CHECK(RunRecord::from_json(nlohmann::json::parse(js)).report == record.report);
  auto csv = report_render(record, ReportFormat::csv);
  CHECK(csv.rfind("metric,value\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == record.report.metrics.size() + 1);
  auto md = report_render_markdown({record});
  CHECK(md.find("| Method | Dataset |") != std::string::npos);
  CHECK(md.find(record.split_hash) != std::string::npos);
  CHECK(parse_report_format("markdown") == ReportFormat::markdown_table);
  CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
}

TEST_CASE("bundled configs run with a clean audit") {
  for (const auto& entry : std::filesystem::directory_iterator(project_dir() / "configs")) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    auto config = ExperimentConfig::load(entry.path());
    TempDir dir("bundled");
    config.output_dir = dir.path();
    auto record = run_experiment(config);
    CHECK(record.audit.passed);
    for (const auto& [k, v] : record.report.metrics) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}
