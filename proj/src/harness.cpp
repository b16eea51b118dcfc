#include "stylo/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "stylo/csv.hpp"
#include "stylo/features.hpp"
#include "stylo/hash.hpp"
#include "stylo/parallel.hpp"
#include "stylo/ppm.hpp"
#include "stylo/rng.hpp"
#include "stylo/verify.hpp"
#include "stylo/version.hpp"

namespace stylo {

using nlohmann::json;

Task parse_task(std::string_view name) {
  if (name == "aa") return Task::aa;
  if (name == "av") return Task::av;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::string_view task_name(Task task) { return task == Task::aa ? "aa" : "av"; }

Method parse_method(std::string_view name) {
  if (name == "ngram_ensemble") return Method::ngram_ensemble;
  if (name == "ppm") return Method::ppm;
  if (name == "profile_metric") return Method::profile_metric;
  if (name == "unmasking") return Method::unmasking;
  if (name == "imposters") return Method::imposters;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::ngram_ensemble:
      return "ngram_ensemble";
    case Method::ppm:
      return "ppm";
    case Method::profile_metric:
      return "profile_metric";
    case Method::unmasking:
      return "unmasking";
    case Method::imposters:
      return "imposters";
  }
  return "?";
}

bool method_supports(Method method, Task task) {
  if (method == Method::imposters) return task == Task::aa;
  if (method == Method::unmasking) return task == Task::av;
  return true;
}

// ---------------------------------------------------------------------------
// Config

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

const std::map<Method, std::set<std::string>>& method_params() {
  static const std::map<Method, std::set<std::string>> m = {
      {Method::ngram_ensemble, {"families", "l2_grid", "epochs", "lr", "balance_classes"}},
      {Method::ppm, {"order"}},
      {Method::profile_metric,
       {"families", "embed_dim", "margin", "authors_per_batch", "docs_per_author", "epochs", "lr", "mining",
        "profile_size"}},
      {Method::unmasking, {"chunk_words", "rounds", "k_remove", "n_features", "folds", "epochs", "l2"}},
      {Method::imposters, {"chunk_words", "rounds", "k_remove", "n_features", "epochs", "l2"}},
  };
  return m;
}

const std::set<std::string> kAaMetrics = {"accuracy", "macro_accuracy"};
const std::set<std::string> kAvMetrics = {"auc", "f1", "f05u", "c_at_1", "brier", "overall"};

std::vector<FamilySpec> parse_families(const json& params) {
  auto it = params.find("families");
  if (it == params.end()) return default_family_specs();
  if (!it->is_array() || it->empty()) throw ConfigError("params.families must be a non-empty array");
  std::vector<FamilySpec> specs;
  for (const auto& f : *it) {
    check_keys(f, {"family", "n", "top_k", "lowercase", "stream", "distortion"}, "params.families[]");
    FamilySpec s;
    s.family = parse_feature_family(get_or<std::string>(f, "family", ""));
    s.n = get_or<std::size_t>(f, "n", s.family == FeatureFamily::token_ngram ? 1 : 3);
    if (f.contains("top_k") && f["top_k"].is_string()) {
      if (f["top_k"] != "all") throw ConfigError("top_k must be an integer or \"all\"");
      s.top_k = kAllKeys;
    } else {
      s.top_k = get_or<std::size_t>(f, "top_k", s.family == FeatureFamily::token_ngram ? 2000 : 3000);
    }
    s.lowercase = get_or<bool>(f, "lowercase", s.family == FeatureFamily::token_ngram);
    s.stream = get_or<std::string>(f, "stream", "words");
    if (s.stream != "words") throw ConfigError("only the built-in 'words' token stream is available from configs");
    if (f.contains("distortion") && !f["distortion"].is_null()) {
      const auto& d = f["distortion"];
      check_keys(d, {"variant", "vocabulary"}, "distortion");
      auto vocab = get_or<std::vector<std::string>>(d, "vocabulary", {});
      if (vocab.empty()) throw ConfigError("distortion vocabulary must be non-empty");
      s.distortion = DistortionScheme::make(parse_distortion_variant(get_or<std::string>(d, "variant", "")), vocab);
    }
    if (s.family != FeatureFamily::summary_stats && (s.n < 1 || s.top_k < 1)) {
      throw ConfigError("feature family needs n >= 1 and top_k >= 1");
    }
    specs.push_back(std::move(s));
  }
  return specs;
}

std::string path_text(const std::filesystem::path& p) { return p.generic_string(); }

}  // namespace

ExperimentConfig ExperimentConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"name", "corpus", "dedup", "split", "task", "method", "params", "metrics", "output_dir", "seed",
                 "pan_compat", "pairs_per_class"},
             "config");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", "experiment");
  if (!j.contains("corpus")) throw ConfigError("config lacks 'corpus'");
  check_keys(j["corpus"], {"path", "format"}, "corpus");
  c.corpus_path = resolve(get_or<std::string>(j["corpus"], "path", ""));
  c.corpus_format = parse_corpus_format(get_or<std::string>(j["corpus"], "format", "jsonl"));
  c.dedup = get_or<bool>(j, "dedup", false);
  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, {"kind", "fractions", "seed", "file"}, "split");
    if (s.contains("file")) {
      if (s.contains("kind") || s.contains("fractions") || s.contains("seed")) {
        throw ConfigError("split: give either 'file' or kind/fractions/seed");
      }
      c.split_file = resolve(get_or<std::string>(s, "file", ""));
    } else {
      c.split_kind = parse_split_kind(get_or<std::string>(s, "kind", "iid"));
      if (s.contains("fractions")) {
        auto f = get_or<std::vector<double>>(s, "fractions", {});
        if (f.size() != 3) throw ConfigError("split.fractions needs three values");
        c.fractions = {f[0], f[1], f[2]};
      }
      if (s.contains("seed")) c.split_seed = get_or<std::uint64_t>(s, "seed", 0);
    }
  }
  if (!j.contains("task") || !j.contains("method")) throw ConfigError("config needs 'task' and 'method'");
  c.task = parse_task(get_or<std::string>(j, "task", ""));
  c.method = parse_method(get_or<std::string>(j, "method", ""));
  c.params = j.value("params", json::object());
  c.metrics = get_or<std::vector<std::string>>(j, "metrics", {});
  c.output_dir = resolve(get_or<std::string>(j, "output_dir", "out"));
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.pan_compat = get_or<bool>(j, "pan_compat", false);
  c.pairs_per_class = get_or<std::size_t>(j, "pairs_per_class", 50);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), path.parent_path());
}

void ExperimentConfig::validate() const {
  if (!method_supports(method, task)) {
    throw ConfigError(std::string(method_name(method)) + " does not support task " + std::string(task_name(task)));
  }
  check_keys(params, method_params().at(method), "params for " + std::string(method_name(method)));
  if (params.contains("families")) parse_families(params);
  if (params.contains("mining")) parse_mining(params["mining"].get<std::string>());
  const auto& allowed = task == Task::aa ? kAaMetrics : kAvMetrics;
  for (const auto& m : metrics) {
    if (!allowed.contains(m)) throw ConfigError("metric '" + m + "' is not available for task " + std::string(task_name(task)));
  }
  if (!std::filesystem::exists(corpus_path)) throw ConfigError("corpus path does not exist: " + corpus_path.string());
  if (split_file && !std::filesystem::exists(*split_file)) {
    throw ConfigError("split file does not exist: " + split_file->string());
  }
  if (!split_file) {
    const double sum = fractions.train + fractions.validation + fractions.test;
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  }
  if (task == Task::aa && !split_file && split_kind == SplitKind::unique_author) {
    throw ConfigError("closed-set attribution needs test authors seen in training; unique_author splits are AV-only");
  }
  if (task == Task::av && pairs_per_class == 0) throw ConfigError("pairs_per_class must be positive");
}

json ExperimentConfig::to_json() const {
  json split;
  if (split_file) {
    split = {{"file", path_text(*split_file)}};
  } else {
    split = {{"kind", split_kind_name(split_kind)},
             {"fractions", {fractions.train, fractions.validation, fractions.test}}};
    if (split_seed) split["seed"] = *split_seed;
  }
  return {{"name", name},
          {"corpus", {{"path", path_text(corpus_path)}, {"format", corpus_format_name(corpus_format)}}},
          {"dedup", dedup},
          {"split", split},
          {"task", task_name(task)},
          {"method", method_name(method)},
          {"params", params},
          {"metrics", effective_metrics()},
          {"output_dir", path_text(output_dir)},
          {"seed", seed},
          {"pan_compat", pan_compat},
          {"pairs_per_class", pairs_per_class}};
}

std::string ExperimentConfig::hash() const {
  // Paths are excluded so the hash identifies the experiment, not the machine.
  json j = to_json();
  j.erase("output_dir");
  j["corpus"].erase("path");
  j["corpus"]["file"] = corpus_path.filename().generic_string();
  if (split_file) j["split"]["file"] = split_file->filename().generic_string();
  return sha256_hex(j.dump());
}

std::vector<std::string> ExperimentConfig::effective_metrics() const {
  if (!metrics.empty()) return metrics;
  if (task == Task::aa) return {"accuracy", "macro_accuracy"};
  return {"auc", "f1", "f05u", "c_at_1", "brier", "overall"};
}

// ---------------------------------------------------------------------------
// Access audit

DocumentAccess::DocumentAccess(const Corpus& corpus, const Split& split) : corpus_(corpus), split_(split) {}

Corpus DocumentAccess::partition(Part part) {
  const std::vector<std::string>* ids = nullptr;
  const char* name = "";
  switch (part) {
    case Part::train:
      ids = &split_.train;
      name = "train";
      break;
    case Part::validation:
      ids = &split_.validation;
      name = "validation";
      break;
    case Part::test:
      ids = &split_.test;
      name = "test";
      break;
  }
  if (!predicting_) {
    if (part == Part::test) {
      leaked_.insert(ids->begin(), ids->end());
    } else {
      fit_reads_.insert(ids->begin(), ids->end());
    }
  }
  if (ids->empty()) return Corpus(name, {});
  return corpus_.subset(*ids, name);
}

DocumentAccess::Audit DocumentAccess::audit() const {
  Audit a;
  a.fit_ids = fit_reads_.size();
  std::unordered_set<std::string> test(split_.test.begin(), split_.test.end());
  for (const auto& id : fit_reads_) {
    if (test.contains(id)) a.leaked_ids.push_back(id);
  }
  a.leaked_ids.insert(a.leaked_ids.end(), leaked_.begin(), leaked_.end());
  std::sort(a.leaked_ids.begin(), a.leaked_ids.end());
  a.leaked_ids.erase(std::unique(a.leaked_ids.begin(), a.leaked_ids.end()), a.leaked_ids.end());
  a.test_ids_before_prediction = a.leaked_ids.size();
  a.passed = a.leaked_ids.empty();
  return a;
}

// ---------------------------------------------------------------------------
// Pairs

std::vector<AvPair> sample_pairs(const Corpus& corpus, const std::vector<std::string>& ids_in,
                                 std::size_t pairs_per_class, std::uint64_t seed, const std::string& prefix,
                                 Warnings* warnings) {
  std::vector<std::string> ids = ids_in;
  std::sort(ids.begin(), ids.end());
  const std::size_t n = ids.size();
  std::vector<std::string> author(n);
  for (std::size_t i = 0; i < n; ++i) author[i] = corpus.at(ids[i]).author_id;
  Rng rng = Rng::substream(seed, "pairs:" + prefix);

  std::vector<std::pair<std::size_t, std::size_t>> same_all;
  std::map<std::string, std::vector<std::size_t>> by_author;
  for (std::size_t i = 0; i < n; ++i) by_author[author[i]].push_back(i);
  for (const auto& [a, members] : by_author) {
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) same_all.emplace_back(members[x], members[y]);
    }
  }
  rng.shuffle(std::span<std::pair<std::size_t, std::size_t>>(same_all));
  std::size_t n_same = std::min(pairs_per_class, same_all.size());

  const std::size_t total_pairs = n < 2 ? 0 : n * (n - 1) / 2;
  const std::size_t diff_available = total_pairs - same_all.size();
  const std::size_t n_diff = std::min(pairs_per_class, diff_available);
  std::vector<std::pair<std::size_t, std::size_t>> diff;
  if (diff_available <= 4 * n_diff || diff_available <= 100000) {
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (author[i] != author[j]) all.emplace_back(i, j);
      }
    }
    rng.shuffle(std::span<std::pair<std::size_t, std::size_t>>(all));
    diff.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_diff));
  } else {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    while (diff.size() < n_diff) {
      std::size_t i = rng.below(n);
      std::size_t j = rng.below(n);
      if (author[i] == author[j]) continue;
      auto key = std::minmax(i, j);
      if (seen.insert(key).second) diff.push_back(key);
    }
  }
  if (n_same < pairs_per_class || n_diff < pairs_per_class) {
    warn(warnings, prefix + ": requested " + std::to_string(pairs_per_class) + " pairs per class, feasible " +
                       std::to_string(n_same) + " same / " + std::to_string(n_diff) + " different");
  }
  std::vector<AvPair> out;
  for (std::size_t k = 0; k < n_same; ++k) out.push_back({"", ids[same_all[k].first], ids[same_all[k].second], true});
  for (const auto& [i, j] : diff) out.push_back({"", ids[i], ids[j], false});
  rng.shuffle(std::span<AvPair>(out));
  char buf[32];
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::snprintf(buf, sizeof buf, "_%05zu", k);
    out[k].id = prefix + buf;
  }
  return out;
}

PairSet av_pairs_from_split(const Corpus& corpus, const Split& split, std::size_t pairs_per_class, std::uint64_t seed,
                            Warnings* warnings) {
  PairSet p;
  p.train = sample_pairs(corpus, split.train, pairs_per_class, seed, "train", warnings);
  p.validation = sample_pairs(corpus, split.validation, pairs_per_class, seed, "validation", warnings);
  p.test = sample_pairs(corpus, split.test, pairs_per_class, seed, "test", warnings);
  return p;
}

void write_pairs_csv(const std::vector<AvPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "pair_id,doc_a,doc_b,same\n";
  for (const auto& p : pairs) {
    out << csv_escape(p.id) << ',' << csv_escape(p.a) << ',' << csv_escape(p.b) << ',' << (p.same ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic corpora

Corpus synth_corpus(std::size_t n_authors, std::size_t docs_per_author, std::size_t doc_len, double separation,
                    std::uint64_t seed) {
  if (n_authors < 1 || docs_per_author < 1 || doc_len < 1) throw ConfigError("synth_corpus: counts must be >= 1");
  if (!(separation >= 0.0 && separation <= 1.0)) throw ConfigError("synth_corpus: separation must be in [0,1]");
  constexpr std::size_t kSymbols = 27;
  auto symbol = [](std::size_t s) { return s == 26 ? ' ' : static_cast<char>('a' + s); };
  using Chain = std::array<std::array<double, kSymbols>, kSymbols>;
  auto random_chain = [&](Rng& rng) {
    Chain c{};
    for (auto& row : c) {
      double sum = 0.0;
      for (auto& v : row) {
        double u = rng.uniform();
        v = u * u * u * u;  // peaked rows
        sum += v;
      }
      for (auto& v : row) v /= sum;
    }
    return c;
  };
  Rng base_rng = Rng::substream(seed, "synth-base");
  const Chain base = random_chain(base_rng);
  std::vector<Document> docs;
  for (std::size_t a = 0; a < n_authors; ++a) {
    char author_id[32];
    std::snprintf(author_id, sizeof author_id, "author%02zu", a);
    Rng author_rng = Rng::substream(seed, std::string("synth-author:") + author_id);
    Chain own = random_chain(author_rng);
    Chain mix{};
    for (std::size_t i = 0; i < kSymbols; ++i) {
      for (std::size_t j = 0; j < kSymbols; ++j) mix[i][j] = (1.0 - separation) * base[i][j] + separation * own[i][j];
    }
    for (std::size_t d = 0; d < docs_per_author; ++d) {
      std::string text;
      text.reserve(doc_len);
      std::size_t state = author_rng.below(kSymbols);
      for (std::size_t k = 0; k < doc_len; ++k) {
        text.push_back(symbol(state));
        double u = author_rng.uniform();
        std::size_t next = kSymbols - 1;
        double acc = 0.0;
        for (std::size_t j = 0; j < kSymbols; ++j) {
          acc += mix[state][j];
          if (u < acc) {
            next = j;
            break;
          }
        }
        state = next;
      }
      // Documents must not be blank.
      if (text.find_first_not_of(' ') == std::string::npos) text[0] = 'a';
      char doc_id[48];
      std::snprintf(doc_id, sizeof doc_id, "%s_doc%03zu", author_id, d);
      docs.push_back({doc_id, author_id, std::move(text), "topic" + std::to_string(d % 4),
                      "genre" + std::to_string(d % 2)});
    }
  }
  return Corpus("synthetic", std::move(docs));
}

// ---------------------------------------------------------------------------
// Run records and reports

json RunRecord::to_json() const {
  return {{"name", name},
          {"dataset", dataset},
          {"task", task},
          {"method", method},
          {"config", config},
          {"split_hash", split_hash},
          {"duration_seconds", duration_seconds},
          {"report", json::parse(report.to_json())},
          {"version", version},
          {"predictions_path", predictions_path},
          {"audit",
           {{"passed", audit.passed},
            {"fit_ids", audit.fit_ids},
            {"test_ids_before_prediction", audit.test_ids_before_prediction},
            {"leaked_ids", audit.leaked_ids}}},
          {"tuning", tuning},
          {"warnings", warnings}};
}

RunRecord RunRecord::from_json(const json& j) {
  try {
    RunRecord r;
    r.name = j.at("name").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.config = j.at("config");
    r.split_hash = j.at("split_hash").get<std::string>();
    r.duration_seconds = j.at("duration_seconds").get<double>();
    r.report = EvalReport::from_json(j.at("report").dump());
    r.version = j.at("version").get<std::string>();
    r.predictions_path = j.at("predictions_path").get<std::string>();
    const auto& a = j.at("audit");
    r.audit.passed = a.at("passed").get<bool>();
    r.audit.fit_ids = a.at("fit_ids").get<std::size_t>();
    r.audit.test_ids_before_prediction = a.at("test_ids_before_prediction").get<std::size_t>();
    r.audit.leaked_ids = a.at("leaked_ids").get<std::vector<std::string>>();
    r.tuning = j.at("tuning").get<std::map<std::string, double>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("run record: ") + e.what());
  }
}

RunRecord RunRecord::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DataError("run record " + path.string() + ": " + e.what());
  }
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  if (name == "markdown" || name == "markdown_table") return ReportFormat::markdown_table;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

namespace {

void require_complete(const RunRecord& r) {
  if (r.report.metrics.empty() || r.split_hash.empty() || r.method.empty()) {
    throw DataError("report: run record is incomplete");
  }
}

}  // namespace

std::string report_render(const RunRecord& record, ReportFormat format) {
  require_complete(record);
  switch (format) {
    case ReportFormat::json:
      return record.to_json().dump(2) + "\n";
    case ReportFormat::csv: {
      std::string out = "metric,value\n";
      char buf[64];
      for (const auto& [k, v] : record.report.metrics) {
        std::snprintf(buf, sizeof buf, "%.6f", v);
        out += csv_escape(k) + "," + buf + "\n";
      }
      return out;
    }
    case ReportFormat::markdown_table:
      return report_render_markdown({record});
  }
  return {};
}

std::string report_render_markdown(const std::vector<RunRecord>& records) {
  if (records.empty()) throw DataError("report: no run records");
  std::vector<std::string> columns;
  for (const auto& r : records) {
    require_complete(r);
    for (const auto& [k, v] : r.report.metrics) {
      if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
    }
  }
  std::string out = "| Method | Dataset |";
  for (const auto& c : columns) out += " " + c + " |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
  out += "\n";
  char buf[64];
  for (const auto& r : records) {
    out += "| " + r.method + " | " + r.dataset + " |";
    for (const auto& c : columns) {
      auto it = r.report.metrics.find(c);
      if (it == r.report.metrics.end()) {
        out += " --- |";
      } else {
        std::snprintf(buf, sizeof buf, " %.4f |", it->second);
        out += buf;
      }
    }
    out += "\n";
  }
  out += "\n";
  for (const auto& r : records) out += "Split hash (" + r.dataset + ", " + r.method + "): " + r.split_hash + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Experiment runner

namespace {

struct RunContext {
  const ExperimentConfig& config;
  const Corpus& corpus;
  const Split& split;
  DocumentAccess& access;
  Warnings warnings;
  std::map<std::string, double> tuning;
};

TrainOptions linear_options(const json& params, std::uint64_t seed) {
  TrainOptions o;
  o.epochs = get_or<std::size_t>(params, "epochs", o.epochs);
  o.lr = get_or<double>(params, "lr", o.lr);
  o.balance_classes = get_or<bool>(params, "balance_classes", false);
  o.seed = seed;
  return o;
}

MetricTrainOptions metric_options(const json& params, std::uint64_t seed) {
  MetricTrainOptions o;
  o.embed_dim = get_or<std::size_t>(params, "embed_dim", o.embed_dim);
  o.margin = get_or<double>(params, "margin", o.margin);
  o.authors_per_batch = get_or<std::size_t>(params, "authors_per_batch", o.authors_per_batch);
  o.docs_per_author = get_or<std::size_t>(params, "docs_per_author", o.docs_per_author);
  o.epochs = get_or<std::size_t>(params, "epochs", o.epochs);
  o.lr = get_or<double>(params, "lr", o.lr);
  o.mining = parse_mining(get_or<std::string>(params, "mining", "batch_hard"));
  o.seed = seed;
  return o;
}

UnmaskOptions unmask_options(const json& params, std::uint64_t seed) {
  UnmaskOptions o;
  o.chunk_words = get_or<std::size_t>(params, "chunk_words", o.chunk_words);
  o.rounds = get_or<std::size_t>(params, "rounds", o.rounds);
  o.k_remove = get_or<std::size_t>(params, "k_remove", o.k_remove);
  o.n_features = get_or<std::size_t>(params, "n_features", o.n_features);
  o.folds = get_or<std::size_t>(params, "folds", o.folds);
  o.train.epochs = get_or<std::size_t>(params, "epochs", o.train.epochs);
  o.train.l2_lambda = get_or<double>(params, "l2", o.train.l2_lambda);
  o.seed = seed;
  return o;
}

ImpostersOptions imposters_options(const json& params) {
  ImpostersOptions o;
  o.chunk_words = get_or<std::size_t>(params, "chunk_words", o.chunk_words);
  o.rounds = get_or<std::size_t>(params, "rounds", o.rounds);
  o.k_remove = get_or<std::size_t>(params, "k_remove", o.k_remove);
  o.n_features = get_or<std::size_t>(params, "n_features", o.n_features);
  o.train.epochs = get_or<std::size_t>(params, "epochs", o.train.epochs);
  o.train.l2_lambda = get_or<double>(params, "l2", o.train.l2_lambda);
  return o;
}

// Keeps authors with at least two documents (metric learning needs positives).
Corpus with_positive_pairs(const Corpus& c, Warnings& warnings) {
  std::map<std::string, std::size_t> counts;
  for (const auto& d : c.documents()) ++counts[d.author_id];
  std::vector<std::string> keep;
  for (const auto& d : c.documents()) {
    if (counts[d.author_id] >= 2) keep.push_back(d.id);
  }
  if (keep.size() != c.size()) warnings.add("metric training skips authors with a single training document");
  return c.subset(keep, c.name());
}

AaPredictions run_aa(RunContext& ctx) {
  const auto& cfg = ctx.config;
  const json& params = cfg.params;
  Corpus train = ctx.access.partition(DocumentAccess::Part::train);
  Corpus validation = ctx.access.partition(DocumentAccess::Part::validation);
  if (train.empty()) throw DataError("training partition is empty");

  std::function<Ranking(const Document&)> predict;
  // Objects referenced by `predict` live in these holders.
  FeatureSchema schema;
  Ensemble ensemble;
  std::map<std::string, PpmModel> ppm_models;
  MetricModel metric;
  ProfileMap profiles;
  std::map<std::string, std::vector<std::string>> candidates;
  ImpostersOptions imp_opts;

  switch (cfg.method) {
    case Method::ngram_ensemble: {
      schema = fit_schema(train, parse_families(params), {}, &ctx.warnings);
      auto grid = get_or<std::vector<double>>(params, "l2_grid", {TrainOptions{}.l2_lambda});
      if (grid.empty()) throw ConfigError("l2_grid must be non-empty");
      TrainOptions opts = linear_options(params, cfg.seed);
      double best_score = -1.0;
      for (double l2 : grid) {
        opts.l2_lambda = l2;
        Ensemble candidate = train_ensemble(train, schema, opts);
        double score = 0.0;
        if (!validation.empty() && grid.size() > 1) {
          AaPredictions val;
          for (const auto& d : validation.documents()) {
            val.push_back({d.id, d.author_id, ensemble_predict(candidate, schema, d).front().first, {}});
          }
          score = macro_accuracy(val);
        }
        if (score > best_score) {
          best_score = score;
          ensemble = std::move(candidate);
          ctx.tuning["l2_lambda"] = l2;
        }
      }
      predict = [&](const Document& d) { return ensemble_predict(ensemble, schema, d); };
      break;
    }
    case Method::ppm: {
      ppm_models = train_author_models(train, get_or<std::size_t>(params, "order", PpmModel::kDefaultOrder));
      predict = [&](const Document& d) { return ppm_attribute(ppm_models, d.text); };
      break;
    }
    case Method::profile_metric: {
      schema = fit_schema(train, parse_families(params), {}, &ctx.warnings);
      metric = train_metric(with_positive_pairs(train, ctx.warnings), schema,
                            metric_options(params, Rng::substream(cfg.seed, "metric").next()));
      auto embed = [&](const Document& d) { return metric.embed(schema.vectorize(d).dense()); };
      profiles = build_profiles(train, embed, get_or<std::size_t>(params, "profile_size", kDefaultProfileSize),
                                Rng::substream(cfg.seed, "profiles").next());
      predict = [&, embed](const Document& d) { return profile_attribute(profiles, embed(d)); };
      break;
    }
    case Method::imposters: {
      for (const auto& d : train.documents()) candidates[d.author_id].push_back(d.text);
      imp_opts = imposters_options(params);
      predict = [&](const Document& d) { return imposters_attribute(candidates, d.text, imp_opts); };
      break;
    }
    case Method::unmasking:
      throw ConfigError("unmasking is an AV method");
  }

  ctx.access.begin_prediction();
  Corpus test = ctx.access.partition(DocumentAccess::Part::test);
  if (test.empty()) throw DataError("test partition is empty");
  const auto& docs = test.documents();
  AaPredictions preds(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) {
    Ranking r = predict(docs[i]);
    AaRow row{docs[i].id, docs[i].author_id, r.front().first, {}};
    for (const auto& [a, s] : r) row.ranking.push_back(a);
    preds[i] = std::move(row);
  });
  return preds;
}

// Maps raw similarity scores to [0,1] with a one-feature logistic fit.
struct Calibrator {
  double mean = 0.0;
  double inv_std = 1.0;
  LinearModel model;

  static Calibrator fit(const std::vector<double>& raw, const std::vector<bool>& same) {
    Calibrator c;
    c.mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(raw.size());
    double var = 0.0;
    for (double r : raw) var += (r - c.mean) * (r - c.mean);
    double sd = std::sqrt(var / static_cast<double>(raw.size()));
    c.inv_std = sd > 0.0 ? 1.0 / sd : 1.0;
    Matrix x;
    std::vector<std::string> y;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      double v = (raw[i] - c.mean) * c.inv_std;
      x.append_row(std::span<const double>(&v, 1));
      y.push_back(same[i] ? kSameLabel : kDifferentLabel);
    }
    c.model = train_logreg(x, y, TrainOptions{1e-4, 500, 1.0, 0, false});
    return c;
  }

  double operator()(double raw) const {
    double v = (raw - mean) * inv_std;
    return predict_proba(model, std::span<const double>(&v, 1))[model.class_index(kSameLabel)];
  }
};

bool both_labels(const std::vector<AvPair>& pairs) {
  bool s = false;
  bool d = false;
  for (const auto& p : pairs) (p.same ? s : d) = true;
  return s && d;
}

AvPredictions run_av(RunContext& ctx) {
  const auto& cfg = ctx.config;
  const json& params = cfg.params;
  const std::uint64_t pair_seed = Rng::substream(cfg.seed, "pairs").next();
  Corpus train = ctx.access.partition(DocumentAccess::Part::train);
  Corpus validation = ctx.access.partition(DocumentAccess::Part::validation);
  auto train_pairs = sample_pairs(train, ctx.split.train, cfg.pairs_per_class, pair_seed, "train", &ctx.warnings);
  auto val_pairs = validation.empty() ? std::vector<AvPair>{}
                                      : sample_pairs(validation, ctx.split.validation, cfg.pairs_per_class, pair_seed,
                                                     "validation", &ctx.warnings);
  if (!both_labels(train_pairs)) throw DataError("training partition cannot supply both same and different pairs");
  const bool val_usable = both_labels(val_pairs);
  if (!val_usable) ctx.warnings.add("validation pairs lack one label; tuning on training pairs");
  const auto& tune_pairs = val_usable ? val_pairs : train_pairs;
  const Corpus& tune_corpus = val_usable ? validation : train;

  // raw(a, b): higher means more likely the same author.
  std::function<double(const Document&, const Document&)> raw;
  bool calibrate = true;
  FeatureSchema schema;
  LinearModel av_model;
  MetricModel metric;
  LinearModel meta;
  UnmaskOptions um_opts;

  switch (cfg.method) {
    case Method::ngram_ensemble: {
      schema = fit_schema(train, parse_families(params), {}, &ctx.warnings);
      TrainOptions opts = linear_options(params, cfg.seed);
      auto grid = get_or<std::vector<double>>(params, "l2_grid", {opts.l2_lambda});
      opts.l2_lambda = grid.front();
      std::vector<LabeledPair> lp;
      for (const auto& p : train_pairs) lp.push_back({p.a, p.b, p.same});
      av_model = train_av_classifier(lp, train, schema, opts);
      ctx.tuning["l2_lambda"] = opts.l2_lambda;
      raw = [&](const Document& a, const Document& b) { return av_probability(av_model, schema, a, b); };
      calibrate = false;
      break;
    }
    case Method::ppm: {
      std::size_t order = get_or<std::size_t>(params, "order", PpmModel::kDefaultOrder);
      raw = [order](const Document& a, const Document& b) { return -ppm_verify_symmetric(a.text, b.text, order); };
      break;
    }
    case Method::profile_metric: {
      schema = fit_schema(train, parse_families(params), {}, &ctx.warnings);
      metric = train_metric(with_positive_pairs(train, ctx.warnings), schema,
                            metric_options(params, Rng::substream(cfg.seed, "metric").next()));
      raw = [&](const Document& a, const Document& b) {
        return av_score(metric, schema.vectorize(a).dense(), schema.vectorize(b).dense());
      };
      break;
    }
    case Method::unmasking: {
      um_opts = unmask_options(params, Rng::substream(cfg.seed, "unmask").next());
      std::vector<DegradationCurve> curves(train_pairs.size());
      parallel_for(train_pairs.size(), [&](std::size_t i) {
        curves[i] = unmask({train.at(train_pairs[i].a).text}, {train.at(train_pairs[i].b).text}, um_opts);
      });
      std::vector<bool> labels;
      for (const auto& p : train_pairs) labels.push_back(p.same);
      meta = train_unmask_meta(curves, labels);
      raw = [&](const Document& a, const Document& b) {
        return unmask_verify(unmask({a.text}, {b.text}, um_opts), meta).score;
      };
      calibrate = false;
      break;
    }
    case Method::imposters:
      throw ConfigError("imposters is an AA method");
  }

  auto score_pairs = [&](const std::vector<AvPair>& pairs, const Corpus& c) {
    std::vector<double> out(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) { out[i] = raw(c.at(pairs[i].a), c.at(pairs[i].b)); });
    return out;
  };
  std::vector<double> tune_raw = score_pairs(tune_pairs, tune_corpus);
  std::vector<bool> tune_labels;
  for (const auto& p : tune_pairs) tune_labels.push_back(p.same);
  std::optional<Calibrator> calibrator;
  if (calibrate) calibrator = Calibrator::fit(tune_raw, tune_labels);
  auto to_score = [&](double r) { return calibrator ? (*calibrator)(r) : r; };
  std::vector<double> tune_scores;
  for (double r : tune_raw) tune_scores.push_back(to_score(r));
  double theta = threshold_search(tune_scores, tune_labels, default_threshold_grid(tune_scores));
  ctx.tuning["threshold"] = theta;
  ctx.tuning["tuning_accuracy"] = binary_accuracy(tune_scores, tune_labels, theta);
  // Piecewise-linear and monotone: theta maps to 0.5, so PAN-style decisions
  // at 0.5 use the tuned threshold while ranking (AUC) is unchanged.
  auto recenter = [theta](double s) {
    if (theta <= 0.0 || theta >= 1.0) return s;
    return s <= theta ? 0.5 * s / theta : 0.5 + 0.5 * (s - theta) / (1.0 - theta);
  };

  ctx.access.begin_prediction();
  Corpus test = ctx.access.partition(DocumentAccess::Part::test);
  auto test_pairs = sample_pairs(test, ctx.split.test, cfg.pairs_per_class, pair_seed, "test", &ctx.warnings);
  if (!both_labels(test_pairs)) throw DataError("test partition cannot supply both same and different pairs");
  std::vector<double> test_raw = score_pairs(test_pairs, test);
  AvPredictions preds;
  for (std::size_t i = 0; i < test_pairs.size(); ++i) {
    preds.push_back({test_pairs[i].id, test_pairs[i].same, recenter(std::clamp(to_score(test_raw[i]), 0.0, 1.0)),
                     false});
  }
  return preds;
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  Corpus corpus = load_corpus(config.corpus_path, config.corpus_format);
  Warnings warnings;
  if (config.dedup) {
    auto d = dedup_exact(corpus);
    if (d.removed_count > 0) warnings.add("dedup removed " + std::to_string(d.removed_count) + " exact duplicates");
    corpus = std::move(d.corpus);
  }
  Split split;
  if (config.split_file) {
    split = load_split(*config.split_file);
    if (auto problem = check_split(corpus, split)) throw DataError("split file does not fit the corpus: " + *problem);
  } else {
    split = make_split(corpus, config.split_kind, config.fractions, config.split_seed.value_or(config.seed), &warnings);
  }
  std::filesystem::create_directories(config.output_dir);
  save_split(split, config.output_dir / "split.json");

  DocumentAccess access(corpus, split);
  RunContext ctx{config, corpus, split, access, std::move(warnings), {}};
  EvalReport report;
  report.config_hash = config.hash();
  report.split_hash = split_hash(split);
  report.version = kVersion;
  const auto predictions_path = config.output_dir / "predictions.csv";
  const auto metrics = config.effective_metrics();
  if (config.task == Task::aa) {
    AaPredictions preds = run_aa(ctx);
    write_aa_predictions(preds, predictions_path);
    report.n = preds.size();
    for (const auto& r : preds) ++report.per_class_n[r.true_author];
    for (const auto& m : metrics) report.metrics[m] = m == "accuracy" ? accuracy(preds) : macro_accuracy(preds);
  } else {
    AvPredictions preds = run_av(ctx);
    write_av_predictions(preds, predictions_path);
    report.n = preds.size();
    for (const auto& r : preds) ++report.per_class_n[r.true_same ? kSameLabel : kDifferentLabel];
    auto all = pan_metrics(preds, config.pan_compat).as_map();
    for (const auto& m : metrics) report.metrics[m] = all.at(m);
  }
  for (const auto& [k, v] : report.metrics) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvariantError("metric " + k + " outside [0,1]");
  }

  RunRecord record;
  record.audit = access.audit();
  if (!record.audit.passed) {
    throw InvariantError("leakage audit failed: " + std::to_string(record.audit.leaked_ids.size()) +
                         " test documents were read before prediction");
  }
  record.config = config.to_json();
  record.name = config.name;
  record.dataset = corpus.name();
  record.task = task_name(config.task);
  record.method = method_name(config.method);
  record.split_hash = report.split_hash;
  record.report = report;
  record.version = kVersion;
  record.predictions_path = predictions_path.filename().string();
  record.tuning = ctx.tuning;
  record.warnings = ctx.warnings.messages;
  record.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::ofstream(config.output_dir / "report.json", std::ios::binary) << report.to_json() << '\n';
  std::ofstream(config.output_dir / "run_record.json", std::ios::binary) << record.to_json().dump(2) << '\n';
  return record;
}

}  // namespace stylo
