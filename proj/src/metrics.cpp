#include "stylo/metrics.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "stylo/csv.hpp"

namespace stylo {

using nlohmann::json;

double accuracy(const AaPredictions& preds) {
  if (preds.empty()) throw DataError("accuracy: empty predictions");
  std::size_t correct = 0;
  for (const auto& r : preds) correct += r.predicted_author == r.true_author ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double macro_accuracy(const AaPredictions& preds) {
  if (preds.empty()) throw DataError("macro_accuracy: empty predictions");
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  for (const auto& r : preds) {
    auto& c = per_class[r.true_author];
    c.first += r.predicted_author == r.true_author ? 1 : 0;
    ++c.second;
  }
  double sum = 0.0;
  for (const auto& [a, c] : per_class) sum += static_cast<double>(c.first) / static_cast<double>(c.second);
  return sum / static_cast<double>(per_class.size());
}

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw DataError("auc: size mismatch");
  std::size_t n_pos = 0;
  for (bool l : labels) n_pos += l ? 1 : 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc: both labels must be present");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks (1-based) of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) rank_sum += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double auc(const AvPredictions& preds, bool pan_compat) {
  std::vector<double> scores;
  std::vector<bool> labels;
  for (const auto& r : preds) {
    if (pan_compat && (r.abstain || r.score == 0.5)) continue;
    scores.push_back(r.score);
    labels.push_back(r.true_same);
  }
  return auc(scores, labels);
}

std::map<std::string, double> PanMetrics::as_map() const {
  return {{"auc", auc}, {"f1", f1}, {"f05u", f05u}, {"c_at_1", c_at_1}, {"brier", brier}, {"overall", overall}};
}

PanMetrics pan_metrics(const AvPredictions& preds, bool pan_compat) {
  bool any_pos = false;
  bool any_neg = false;
  for (const auto& r : preds) (r.true_same ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) throw DataError("pan_metrics: both labels must be present");

  std::size_t tp = 0, fp = 0, tn = 0, fn = 0, unanswered = 0;
  double sq = 0.0;
  for (const auto& r : preds) {
    const double target = r.true_same ? 1.0 : 0.0;
    sq += (r.score - target) * (r.score - target);
    if (r.abstain || r.score == 0.5) {
      ++unanswered;
      continue;
    }
    const bool said_same = r.score > 0.5;
    if (said_same && r.true_same) ++tp;
    if (said_same && !r.true_same) ++fp;
    if (!said_same && !r.true_same) ++tn;
    if (!said_same && r.true_same) ++fn;
  }
  const double n = static_cast<double>(preds.size());
  PanMetrics m;
  m.auc = auc(preds, pan_compat);
  m.brier = sq / n;
  const double n_correct = static_cast<double>(tp + tn);
  m.c_at_1 = (n_correct + static_cast<double>(unanswered) * n_correct / n) / n;
  // F1 over answered rows, "same" as the positive class.
  const double f1_denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
  m.f1 = f1_denom > 0.0 ? 2.0 * static_cast<double>(tp) / f1_denom : 0.0;
  const double b2 = 0.25;
  const double f05_denom = (1.0 + b2) * static_cast<double>(tp) + b2 * static_cast<double>(fn + unanswered) +
                           static_cast<double>(fp);
  m.f05u = f05_denom > 0.0 ? (1.0 + b2) * static_cast<double>(tp) / f05_denom : 0.0;
  m.overall = (m.auc + m.f1 + m.f05u + m.c_at_1) / 4.0;
  return m;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile: no values");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::string EvalReport::to_json() const {
  json j = {{"metrics", metrics},         {"n", n},
            {"per_class_n", per_class_n}, {"config_hash", config_hash},
            {"split_hash", split_hash},   {"version", version}};
  return j.dump(2);
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    EvalReport r;
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.n = j.at("n").get<std::size_t>();
    r.per_class_n = j.at("per_class_n").get<std::map<std::string, std::size_t>>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.split_hash = j.at("split_hash").get<std::string>();
    r.version = j.at("version").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("eval report: ") + e.what());
  }
}

namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_aa_predictions(const AaPredictions& preds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "doc_id,true,pred\n";
  for (const auto& r : preds) {
    out << csv_escape(r.doc_id) << ',' << csv_escape(r.true_author) << ',' << csv_escape(r.predicted_author);
    for (const auto& a : r.ranking) out << ',' << csv_escape(a);
    out << '\n';
  }
}

AaPredictions read_aa_predictions(const std::filesystem::path& path) {
  auto records = parse_csv(read_all(path));
  if (records.empty() || records[0].fields.size() < 3 || records[0].fields[0] != "doc_id") {
    throw DataError(path.string() + ": missing AA predictions header");
  }
  AaPredictions preds;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() < 3) throw DataError("line " + std::to_string(records[i].line) + ": expected >= 3 fields");
    preds.push_back({f[0], f[1], f[2], std::vector<std::string>(f.begin() + 3, f.end())});
  }
  return preds;
}

void write_av_predictions(const AvPredictions& preds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "pair_id,true,score,abstain\n";
  for (const auto& r : preds) {
    out << csv_escape(r.pair_id) << ',' << (r.true_same ? 1 : 0) << ',' << format_score(r.score) << ','
        << (r.abstain ? 1 : 0) << '\n';
  }
}

AvPredictions read_av_predictions(const std::filesystem::path& path) {
  auto records = parse_csv(read_all(path));
  if (records.empty() || records[0].fields.size() < 3 || records[0].fields[0] != "pair_id") {
    throw DataError(path.string() + ": missing AV predictions header");
  }
  AvPredictions preds;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    const std::string where = "line " + std::to_string(records[i].line);
    if (f.size() < 3) throw DataError(where + ": expected >= 3 fields");
    AvRow r;
    r.pair_id = f[0];
    if (f[1] != "0" && f[1] != "1") throw DataError(where + ": true must be 0 or 1");
    r.true_same = f[1] == "1";
    try {
      r.score = std::stod(f[2]);
    } catch (const std::exception&) {
      throw DataError(where + ": bad score");
    }
    if (!(r.score >= 0.0 && r.score <= 1.0)) throw DataError(where + ": score outside [0,1]");
    r.abstain = f.size() > 3 && f[3] == "1";
    preds.push_back(std::move(r));
  }
  return preds;
}

}  // namespace stylo
