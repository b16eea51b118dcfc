#include "stylo/corpus.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "stylo/csv.hpp"
#include "stylo/features.hpp"
#include "stylo/hash.hpp"
#include "stylo/rng.hpp"

namespace stylo {

using nlohmann::json;

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<std::string> optional_label(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw DataError("line " + std::to_string(line) + ": field '" + key + "' must be a string");
  }
  std::string v = it->get<std::string>();
  if (v.empty()) return std::nullopt;
  return v;
}

std::string required_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw DataError("line " + std::to_string(line) + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

void check_text(const std::string& text, std::size_t line) {
  if (is_blank(text)) throw DataError("line " + std::to_string(line) + ": empty text");
}

std::vector<Document> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw DataError("line " + std::to_string(line_no) + ": record is not an object");
    Document d;
    d.id = required_string(obj, "id", line_no);
    d.author_id = required_string(obj, "author", line_no);
    d.text = required_string(obj, "text", line_no);
    check_text(d.text, line_no);
    d.topic = optional_label(obj, "topic", line_no);
    d.genre = optional_label(obj, "genre", line_no);
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> load_csv(const std::filesystem::path& path) {
  auto records = parse_csv(read_file(path));
  if (records.empty()) return {};
  const auto& header = records.front().fields;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* req : {"id", "author", "text"}) {
    if (!col.contains(req)) throw DataError("line 1: CSV header lacks column '" + std::string(req) + "'");
  }
  for (const auto& [name, idx] : col) {
    if (name != "id" && name != "author" && name != "text" && name != "topic" && name != "genre") {
      throw DataError("line 1: unknown CSV column '" + name + "'");
    }
  }
  std::vector<Document> docs;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw DataError("line " + std::to_string(rec.line) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(rec.fields.size()));
    }
    Document d;
    d.id = rec.fields[col["id"]];
    d.author_id = rec.fields[col["author"]];
    d.text = rec.fields[col["text"]];
    if (d.id.empty() || d.author_id.empty()) throw DataError("line " + std::to_string(rec.line) + ": empty id or author");
    check_text(d.text, rec.line);
    if (auto it = col.find("topic"); it != col.end() && !rec.fields[it->second].empty()) d.topic = rec.fields[it->second];
    if (auto it = col.find("genre"); it != col.end() && !rec.fields[it->second].empty()) d.genre = rec.fields[it->second];
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> load_tree(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DataError(root.string() + " is not a directory");
  std::vector<fs::path> author_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) author_dirs.push_back(e.path());
  }
  std::sort(author_dirs.begin(), author_dirs.end());
  std::vector<Document> docs;
  for (const auto& dir : author_dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Document d;
      d.id = f.stem().string();
      d.author_id = dir.filename().string();
      d.text = read_file(f);
      if (is_blank(d.text)) throw DataError(f.string() + ": empty text");
      docs.push_back(std::move(d));
    }
  }
  return docs;
}

}  // namespace

Corpus::Corpus(std::string name, std::vector<Document> documents)
    : name_(std::move(name)), documents_(std::move(documents)) {
  index_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    const auto& d = documents_[i];
    if (is_blank(d.text)) throw DataError("document '" + d.id + "' has empty text");
    if (!index_.emplace(d.id, i).second) throw DataError("duplicate document id '" + d.id + "'");
  }
}

const Document* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &documents_[it->second];
}

const Document& Corpus::at(std::string_view id) const {
  const Document* d = find(id);
  if (d == nullptr) throw DataError("unknown document id '" + std::string(id) + "'");
  return *d;
}

std::vector<std::string> Corpus::authors() const {
  std::set<std::string> s;
  for (const auto& d : documents_) s.insert(d.author_id);
  return {s.begin(), s.end()};
}

Corpus Corpus::subset(const std::vector<std::string>& ids, std::string name) const {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  for (const auto& id : wanted) {
    if (!index_.contains(id)) throw DataError("unknown document id '" + id + "'");
  }
  std::vector<Document> docs;
  for (const auto& d : documents_) {
    if (wanted.contains(d.id)) docs.push_back(d);
  }
  return Corpus(std::move(name), std::move(docs));
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "csv") return CorpusFormat::csv;
  if (name == "directory_tree" || name == "dir") return CorpusFormat::directory_tree;
  throw ConfigError("unknown corpus format '" + std::string(name) + "'");
}

std::string_view corpus_format_name(CorpusFormat format) {
  switch (format) {
    case CorpusFormat::jsonl:
      return "jsonl";
    case CorpusFormat::csv:
      return "csv";
    case CorpusFormat::directory_tree:
      return "directory_tree";
  }
  return "?";
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw DataError("corpus path does not exist: " + path.string());
  std::vector<Document> docs;
  switch (format) {
    case CorpusFormat::jsonl:
      docs = load_jsonl(path);
      break;
    case CorpusFormat::csv:
      docs = load_csv(path);
      break;
    case CorpusFormat::directory_tree:
      docs = load_tree(path);
      break;
  }
  if (docs.empty()) throw DataError("corpus is empty: " + path.string());
  return Corpus(path.stem().string(), std::move(docs));
}

void save_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& d : corpus.documents()) {
    json j = {{"id", d.id}, {"author", d.author_id}, {"text", d.text}};
    if (d.topic) j["topic"] = *d.topic;
    if (d.genre) j["genre"] = *d.genre;
    out << j.dump() << '\n';
  }
}

std::string nfc_normalize(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw InvariantError("ICU NFC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString dst = nfc->normalize(src, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

DedupResult dedup_exact(const Corpus& corpus) {
  std::unordered_set<std::string> seen;
  std::vector<Document> kept;
  for (const auto& d : corpus.documents()) {
    if (seen.insert(nfc_normalize(d.text)).second) kept.push_back(d);
  }
  DedupResult r;
  r.removed_count = corpus.size() - kept.size();
  r.corpus = Corpus(corpus.name(), std::move(kept));
  return r;
}

DatasetStats compute_stats(const Corpus& corpus, const Tokenizer& tokenizer) {
  if (corpus.empty()) throw DataError("compute_stats: empty corpus");
  std::map<std::string, std::uint64_t> per_author;
  DatasetStats s;
  for (const auto& d : corpus.documents()) {
    ++per_author[d.author_id];
    if (tokenizer.mode == TokenMode::word) {
      for (const auto& span : word_spans(d.text)) {
        if (span.kind == TokenKind::word) ++s.words;
      }
    } else {
      s.words += codepoint_count(d.text);
    }
  }
  s.documents = corpus.size();
  s.authors = per_author.size();
  s.docs_per_author = Ratio{s.documents, s.authors};
  s.words_per_doc = Ratio{s.words, s.documents};
  // Var = (A * sum c^2 - (sum c)^2) / A^2; the integer numerator is zero
  // exactly when all counts agree.
  unsigned __int128 sum_sq = 0;
  for (const auto& [a, c] : per_author) sum_sq += static_cast<unsigned __int128>(c) * c;
  unsigned __int128 a = s.authors;
  unsigned __int128 d = s.documents;
  unsigned __int128 num = a * sum_sq - d * d;
  s.imbalance = num == 0 ? 0.0 : std::sqrt(static_cast<double>(num)) / static_cast<double>(s.authors);
  return s;
}

DatasetStats compute_stats(const Corpus& corpus) { return compute_stats(corpus, Tokenizer{TokenMode::word, false}); }

std::string format_stats(const DatasetStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "D=%llu A=%llu W=%llu D/A=%.1f W/D=%.1f imb=%.1f",
                static_cast<unsigned long long>(s.documents), static_cast<unsigned long long>(s.authors),
                static_cast<unsigned long long>(s.words), s.docs_per_author.value(), s.words_per_doc.value(),
                s.imbalance);
  return buf;
}

SplitKind parse_split_kind(std::string_view name) {
  if (name == "iid") return SplitKind::iid;
  if (name == "cross_topic") return SplitKind::cross_topic;
  if (name == "cross_genre") return SplitKind::cross_genre;
  if (name == "unique_author") return SplitKind::unique_author;
  throw ConfigError("unknown split kind '" + std::string(name) + "'");
}

std::string_view split_kind_name(SplitKind kind) {
  switch (kind) {
    case SplitKind::iid:
      return "iid";
    case SplitKind::cross_topic:
      return "cross_topic";
    case SplitKind::cross_genre:
      return "cross_genre";
    case SplitKind::unique_author:
      return "unique_author";
  }
  return "?";
}

namespace {

std::string partition_key(const Document& d, SplitKind kind) {
  switch (kind) {
    case SplitKind::cross_topic:
      if (!d.topic) throw DataError("document '" + d.id + "' has no topic label");
      return *d.topic;
    case SplitKind::cross_genre:
      if (!d.genre) throw DataError("document '" + d.id + "' has no genre label");
      return *d.genre;
    case SplitKind::unique_author:
    case SplitKind::iid:
      return d.author_id;
  }
  return {};
}

void sort_split(Split& s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
}

// Group ids by key; groups and their members are in sorted order so the
// result depends only on corpus content, not document order.
std::map<std::string, std::vector<std::string>> group_ids(const Corpus& corpus, SplitKind kind) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& d : corpus.documents()) groups[partition_key(d, kind)].push_back(d.id);
  for (auto& [k, ids] : groups) std::sort(ids.begin(), ids.end());
  return groups;
}

Split iid_split(const Corpus& corpus, SplitFractions f, Rng& rng, Warnings* warnings) {
  Split s;
  s.kind = SplitKind::iid;
  for (auto& [author, ids] : group_ids(corpus, SplitKind::iid)) {
    rng.shuffle(std::span<std::string>(ids));
    std::size_t n = ids.size();
    if (n < 3) {
      warn(warnings, "author '" + author + "' has " + std::to_string(n) +
                         " document(s), fewer than the number of sets; placed in train");
      s.train.insert(s.train.end(), ids.begin(), ids.end());
      continue;
    }
    auto share = [n](double frac) {
      if (frac <= 0.0) return std::size_t{0};
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n))));
    };
    std::size_t n_val = share(f.validation);
    std::size_t n_test = share(f.test);
    while (n_val + n_test >= n) {
      if (n_val >= n_test && n_val > 0) {
        --n_val;
      } else {
        --n_test;
      }
    }
    s.test.insert(s.test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.validation.insert(s.validation.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                        ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    s.train.insert(s.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), ids.end());
  }
  return s;
}

Split grouped_split(const Corpus& corpus, SplitKind kind, SplitFractions f, Rng& rng) {
  auto groups = group_ids(corpus, kind);
  if (groups.size() < 2) {
    throw DataError(std::string("split ") + std::string(split_kind_name(kind)) +
                    " needs at least 2 distinct partition keys, found " + std::to_string(groups.size()));
  }
  std::vector<std::string> keys;
  for (const auto& [k, ids] : groups) keys.push_back(k);
  rng.shuffle(std::span<std::string>(keys));

  const double total = static_cast<double>(corpus.size());
  Split s;
  s.kind = kind;
  std::size_t next = 0;
  // Test takes whole key groups until its share is met, leaving at least
  // one key for train.
  std::size_t taken = 0;
  while (next < keys.size() - 1 && (next == 0 || static_cast<double>(taken) < f.test * total)) {
    const auto& ids = groups[keys[next++]];
    s.test.insert(s.test.end(), ids.begin(), ids.end());
    taken += ids.size();
  }
  if (f.validation > 0.0 && keys.size() - next >= 2) {
    taken = 0;
    std::size_t start = next;
    while (next < keys.size() - 1 && (next == start || static_cast<double>(taken) < f.validation * total)) {
      const auto& ids = groups[keys[next++]];
      s.validation.insert(s.validation.end(), ids.begin(), ids.end());
      taken += ids.size();
    }
  }
  std::vector<std::string> rest;
  for (; next < keys.size(); ++next) {
    const auto& ids = groups[keys[next]];
    rest.insert(rest.end(), ids.begin(), ids.end());
  }
  if (f.validation > 0.0 && s.validation.empty() && rest.size() >= 2) {
    // Too few keys for a held-out validation group: carve it from the
    // train-side documents instead.
    std::sort(rest.begin(), rest.end());
    rng.shuffle(std::span<std::string>(rest));
    double share = f.validation / (f.validation + f.train);
    std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(share * static_cast<double>(rest.size()))));
    n_val = std::min(n_val, rest.size() - 1);
    s.validation.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    rest.erase(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
  }
  s.train = std::move(rest);
  return s;
}

}  // namespace

Split make_split(const Corpus& corpus, SplitKind kind, SplitFractions fractions, std::uint64_t seed,
                 Warnings* warnings) {
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  if (corpus.empty()) throw DataError("cannot split an empty corpus");
  Rng rng = Rng::substream(seed, "split");
  Split s;
  if (kind == SplitKind::iid) {
    if (corpus.authors().size() < 2) throw DataError("iid split needs at least 2 authors");
    s = iid_split(corpus, fractions, rng, warnings);
  } else {
    s = grouped_split(corpus, kind, fractions, rng);
  }
  sort_split(s);
  if (auto problem = check_split(corpus, s)) throw InvariantError("make_split produced an invalid split: " + *problem);
  return s;
}

std::optional<std::string> check_split(const Corpus& corpus, const Split& split) {
  std::unordered_map<std::string, int> owner;
  const std::vector<std::string>* sets[] = {&split.train, &split.validation, &split.test};
  for (int i = 0; i < 3; ++i) {
    for (const auto& id : *sets[i]) {
      if (corpus.find(id) == nullptr) return "unknown id '" + id + "'";
      if (!owner.emplace(id, i).second) return "id '" + id + "' appears in two sets";
    }
  }
  auto keys_of = [&](const std::vector<std::string>& ids, SplitKind k) {
    std::set<std::string> out;
    for (const auto& id : ids) {
      const Document& d = corpus.at(id);
      if (k == SplitKind::cross_topic) {
        if (d.topic) out.insert(*d.topic);
      } else if (k == SplitKind::cross_genre) {
        if (d.genre) out.insert(*d.genre);
      } else {
        out.insert(d.author_id);
      }
    }
    return out;
  };
  auto train_keys = keys_of(split.train, split.kind);
  auto test_keys = keys_of(split.test, split.kind);
  if (split.kind == SplitKind::iid) {
    for (const auto& a : test_keys) {
      if (!train_keys.contains(a)) return "test author '" + a + "' missing from train";
    }
  } else {
    for (const auto& k : test_keys) {
      if (train_keys.contains(k)) return "partition key '" + k + "' in both train and test";
    }
  }
  return std::nullopt;
}

std::string split_hash(const Split& split) {
  std::string buf = "stylo-split-v1\nkind=" + std::string(split_kind_name(split.kind)) + "\n";
  auto add = [&](const char* name, std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    buf += "[";
    buf += name;
    buf += "]\n";
    for (const auto& id : ids) {
      buf += std::to_string(id.size());
      buf += ':';
      buf += id;
      buf += '\n';
    }
  };
  add("train", split.train);
  add("validation", split.validation);
  add("test", split.test);
  return sha256_hex(buf);
}

void save_split(const Split& split, const std::filesystem::path& path) {
  json j;
  j["kind"] = split_kind_name(split.kind);
  j["hash"] = split_hash(split);
  j["train"] = split.train;
  j["validation"] = split.validation;
  j["test"] = split.test;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Split load_split(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("split file " + path.string() + ": " + e.what());
  }
  Split s;
  try {
    s.kind = parse_split_kind(j.at("kind").get<std::string>());
    s.train = j.at("train").get<std::vector<std::string>>();
    s.validation = j.at("validation").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("split file " + path.string() + ": " + e.what());
  }
  if (j.contains("hash") && j["hash"].get<std::string>() != split_hash(s)) {
    throw DataError("split file " + path.string() + ": hash mismatch");
  }
  return s;
}

}  // namespace stylo
