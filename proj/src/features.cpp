#include "stylo/features.hpp"

#include <unicode/locid.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "stylo/rng.hpp"

namespace stylo {

using nlohmann::json;

namespace {

constexpr const char* kReplacement = "\xEF\xBF\xBD";

struct CodePoint {
  UChar32 cp;
  std::size_t begin;
  std::size_t end;
};

std::vector<CodePoint> decode(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  int32_t len = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < len) {
    int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, len, c);
    out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
  }
  return out;
}

bool is_word_cp(UChar32 c) {
  if (c < 0) return false;
  if (c == '*') return true;
  if (u_isalnum(c)) return true;
  int8_t t = u_charType(c);
  return t == U_NON_SPACING_MARK || t == U_ENCLOSING_MARK || t == U_COMBINING_SPACING_MARK;
}

bool is_apostrophe(UChar32 c) { return c == 0x27 || c == 0x2019; }

bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

// Code points as UTF-8 strings; malformed bytes become U+FFFD so every key
// is valid UTF-8.
std::vector<std::string> codepoint_strings(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& c : decode(s)) {
    if (c.cp < 0) {
      out.emplace_back(kReplacement);
    } else {
      out.emplace_back(s.substr(c.begin, c.end - c.begin));
    }
  }
  return out;
}

const char* const kSummaryKeys[kSummaryColumns - kHistogramBuckets] = {
    "hapax_rate", "type_token_ratio", "maas_a2", "herdan_vm", "punct_freq", "mean_sentence_len"};

std::vector<std::string> summary_keys() {
  std::vector<std::string> keys;
  for (std::size_t i = 1; i <= kHistogramBuckets; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, i < kHistogramBuckets ? "wordlen_%02zu" : "wordlen_%02zu+", i);
    keys.emplace_back(buf);
  }
  for (const char* k : kSummaryKeys) keys.emplace_back(k);
  return keys;
}

std::vector<std::string> ngrams(const std::vector<std::string>& units, std::size_t n, std::string_view sep) {
  std::vector<std::string> out;
  if (n == 0 || units.size() < n) return out;
  out.reserve(units.size() - n + 1);
  for (std::size_t i = 0; i + n <= units.size(); ++i) {
    std::string key = units[i];
    for (std::size_t j = 1; j < n; ++j) {
      key += sep;
      key += units[i + j];
    }
    out.push_back(std::move(key));
  }
  return out;
}

json distortion_to_json(const std::optional<DistortionScheme>& d) {
  if (!d) return nullptr;
  return json{{"variant", distortion_variant_name(d->variant)},
              {"vocabulary", std::vector<std::string>(d->vocabulary.begin(), d->vocabulary.end())}};
}

}  // namespace

std::string to_lower(std::string_view utf8) {
  icu::UnicodeString u =
      icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  u.toLower(icu::Locale::getRoot());
  std::string out;
  u.toUTF8String(out);
  return out;
}

std::size_t codepoint_count(std::string_view utf8) { return decode(utf8).size(); }

std::vector<TokenSpan> word_spans(std::string_view text) {
  std::vector<TokenSpan> spans;
  auto cps = decode(text);
  bool open = false;
  TokenSpan cur;
  auto close = [&] {
    if (open) spans.push_back(cur);
    open = false;
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const auto& c = cps[i];
    if (is_space(c.cp)) {
      close();
    } else if (is_word_cp(c.cp)) {
      if (open) {
        cur.end = c.end;
      } else {
        cur = {c.begin, c.end, TokenKind::word};
        open = true;
      }
    } else if (is_apostrophe(c.cp) && open && i + 1 < cps.size() && is_word_cp(cps[i + 1].cp)) {
      close();
      cur = {c.begin, c.end, TokenKind::suffix};
      open = true;
    } else {
      close();
      spans.push_back({c.begin, c.end, TokenKind::punct});
    }
  }
  close();
  return spans;
}

std::vector<std::string> tokenize(std::string_view text, const Tokenizer& tokenizer) {
  std::vector<std::string> out;
  if (tokenizer.mode == TokenMode::chr) {
    out = codepoint_strings(text);
  } else {
    for (const auto& s : word_spans(text)) out.emplace_back(text.substr(s.begin, s.end - s.begin));
  }
  if (tokenizer.lowercase) {
    for (auto& t : out) t = to_lower(t);
  }
  return out;
}

DistortionVariant parse_distortion_variant(std::string_view name) {
  if (name == "single_asterisk") return DistortionVariant::single_asterisk;
  if (name == "multiple_asterisk") return DistortionVariant::multiple_asterisk;
  if (name == "exterior_chars") return DistortionVariant::exterior_chars;
  if (name == "last_two_chars") return DistortionVariant::last_two_chars;
  throw ConfigError("unknown distortion variant '" + std::string(name) + "'");
}

std::string_view distortion_variant_name(DistortionVariant variant) {
  switch (variant) {
    case DistortionVariant::single_asterisk:
      return "single_asterisk";
    case DistortionVariant::multiple_asterisk:
      return "multiple_asterisk";
    case DistortionVariant::exterior_chars:
      return "exterior_chars";
    case DistortionVariant::last_two_chars:
      return "last_two_chars";
  }
  return "?";
}

DistortionScheme DistortionScheme::make(DistortionVariant variant, const std::vector<std::string>& words) {
  DistortionScheme s;
  s.variant = variant;
  for (const auto& w : words) s.vocabulary.insert(to_lower(w));
  return s;
}

std::string distort(std::string_view text, const DistortionScheme& scheme) {
  if (scheme.vocabulary.empty()) throw DataError("distort: vocabulary is empty");
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  for (const auto& span : word_spans(text)) {
    out.append(text.substr(pos, span.begin - pos));
    pos = span.end;
    std::string_view tok = text.substr(span.begin, span.end - span.begin);
    if (span.kind != TokenKind::word || scheme.vocabulary.contains(to_lower(tok))) {
      out.append(tok);
      continue;
    }
    auto cps = codepoint_strings(tok);
    const std::size_t len = cps.size();
    switch (scheme.variant) {
      case DistortionVariant::single_asterisk:
        out.push_back('*');
        break;
      case DistortionVariant::multiple_asterisk:
        out.append(len, '*');
        break;
      case DistortionVariant::exterior_chars:
        if (len <= 2) {
          out.append(tok);
        } else {
          out.append(cps.front());
          out.append(len - 2, '*');
          out.append(cps.back());
        }
        break;
      case DistortionVariant::last_two_chars:
        if (len <= 2) {
          out.append(tok);
        } else {
          out.append(len - 2, '*');
          out.append(cps[len - 2]);
          out.append(cps[len - 1]);
        }
        break;
    }
  }
  out.append(text.substr(pos));
  return out;
}

FeatureFamily parse_feature_family(std::string_view name) {
  if (name == "char_ngram") return FeatureFamily::char_ngram;
  if (name == "token_ngram") return FeatureFamily::token_ngram;
  if (name == "summary_stats") return FeatureFamily::summary_stats;
  throw ConfigError("unknown feature family '" + std::string(name) + "'");
}

std::string_view feature_family_name(FeatureFamily family) {
  switch (family) {
    case FeatureFamily::char_ngram:
      return "char_ngram";
    case FeatureFamily::token_ngram:
      return "token_ngram";
    case FeatureFamily::summary_stats:
      return "summary_stats";
  }
  return "?";
}

std::vector<FamilySpec> default_family_specs() {
  std::vector<FamilySpec> specs;
  for (std::size_t n : {2, 3, 4}) specs.push_back({FeatureFamily::char_ngram, n, 3000, false, "words", std::nullopt});
  for (std::size_t n : {1, 2}) specs.push_back({FeatureFamily::token_ngram, n, 2000, true, "words", std::nullopt});
  return specs;
}

PrecomputedStream PrecomputedStream::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::unordered_map<std::string, std::vector<std::string>> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      tokens[j.at("id").get<std::string>()] = j.at("tokens").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return PrecomputedStream(std::move(tokens));
}

std::vector<std::string> PrecomputedStream::operator()(const Document& doc) const {
  auto it = tokens_.find(doc.id);
  if (it == tokens_.end()) throw DataError("no precomputed tokens for document '" + doc.id + "'");
  return it->second;
}

std::array<double, kSummaryColumns> SummaryStats::as_array() const {
  std::array<double, kSummaryColumns> a{};
  std::copy(word_length_histogram.begin(), word_length_histogram.end(), a.begin());
  a[kHistogramBuckets + 0] = hapax_legomena_rate;
  a[kHistogramBuckets + 1] = type_token_ratio;
  a[kHistogramBuckets + 2] = maas_a2;
  a[kHistogramBuckets + 3] = herdan_vm;
  a[kHistogramBuckets + 4] = punctuation_frequency;
  a[kHistogramBuckets + 5] = mean_sentence_length_words;
  return a;
}

SummaryStats summary_stats(std::string_view text, const Tokenizer& tokenizer) {
  std::vector<std::string> words;
  std::size_t punct = 0;
  std::size_t sentences = 0;
  bool sentence_has_words = false;
  if (tokenizer.mode == TokenMode::chr) {
    for (auto& c : tokenize(text, tokenizer)) {
      if (c.find_first_not_of(" \t\r\n") != std::string::npos) words.push_back(std::move(c));
    }
  } else {
    for (const auto& span : word_spans(text)) {
      std::string_view tok = text.substr(span.begin, span.end - span.begin);
      if (span.kind == TokenKind::punct) {
        ++punct;
        if ((tok == "." || tok == "!" || tok == "?") && sentence_has_words) {
          ++sentences;
          sentence_has_words = false;
        }
      } else {
        words.emplace_back(tokenizer.lowercase ? to_lower(tok) : std::string(tok));
        sentence_has_words = true;
      }
    }
  }
  if (sentence_has_words) ++sentences;

  SummaryStats s;
  if (words.empty()) {
    s.empty = true;
    return s;
  }
  const double n = static_cast<double>(words.size());
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& w : words) {
    ++freq[w];
    std::size_t len = codepoint_count(w);
    std::size_t bucket = std::min(len, kHistogramBuckets) - 1;
    s.word_length_histogram[bucket] += 1.0;
  }
  for (auto& h : s.word_length_histogram) h /= n;

  const double v = static_cast<double>(freq.size());
  std::map<std::size_t, std::size_t> spectrum;  // i -> number of types seen i times
  std::size_t hapax = 0;
  for (const auto& [w, c] : freq) {
    ++spectrum[c];
    if (c == 1) ++hapax;
  }
  s.hapax_legomena_rate = static_cast<double>(hapax) / v;
  s.type_token_ratio = v / n;
  if (words.size() > 1) {
    double ln = std::log(n);
    s.maas_a2 = (ln - std::log(v)) / (ln * ln);
  }
  double acc = 0.0;
  for (const auto& [i, vi] : spectrum) acc += static_cast<double>(i) * static_cast<double>(i) * static_cast<double>(vi);
  double vm2 = acc / (n * n) - 1.0 / v;
  s.herdan_vm = vm2 > 0.0 ? std::sqrt(vm2) : 0.0;
  s.punctuation_frequency = static_cast<double>(punct) / (n + static_cast<double>(punct));
  s.mean_sentence_length_words = n / static_cast<double>(std::max<std::size_t>(1, sentences));
  return s;
}

FeatureVector::FeatureVector(std::size_t dim, std::uint64_t schema_tag, std::vector<Entry> entries, bool l2_normalized)
    : dim_(dim), schema_tag_(schema_tag), l2_normalized_(l2_normalized) {
  entries_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first >= dim) throw InvariantError("feature column out of range");
    if (i > 0 && entries[i].first <= entries[i - 1].first) throw InvariantError("feature entries not sorted");
    if (entries[i].second != 0.0) entries_.push_back(entries[i]);
  }
}

double FeatureVector::get(std::uint32_t column) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), column,
                             [](const Entry& e, std::uint32_t c) { return e.first < c; });
  return it != entries_.end() && it->first == column ? it->second : 0.0;
}

double FeatureVector::norm() const {
  double s = 0.0;
  for (const auto& [c, v] : entries_) s += v * v;
  return std::sqrt(s);
}

std::vector<double> FeatureVector::dense() const {
  std::vector<double> out(dim_, 0.0);
  for (const auto& [c, v] : entries_) out[c] = v;
  return out;
}

FeatureVector vector_diff(const FeatureVector& x, const FeatureVector& y) {
  if (x.dim() != y.dim() || x.schema_tag() != y.schema_tag()) throw DataError("vector_diff: schema mismatch");
  std::vector<FeatureVector::Entry> out;
  const auto& a = x.entries();
  const auto& b = y.entries();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      out.emplace_back(a[i].first, std::abs(a[i].second));
      ++i;
    } else if (i == a.size() || b[j].first < a[i].first) {
      out.emplace_back(b[j].first, std::abs(b[j].second));
      ++j;
    } else {
      out.emplace_back(a[i].first, std::abs(a[i].second - b[j].second));
      ++i;
      ++j;
    }
  }
  return FeatureVector(x.dim(), x.schema_tag(), std::move(out), false);
}

std::vector<std::string> family_keys(const Document& doc, const FamilySpec& spec, const TokenStream* stream) {
  if (spec.family == FeatureFamily::summary_stats) return {};
  std::string text = spec.distortion ? distort(doc.text, *spec.distortion) : doc.text;
  if (spec.family == FeatureFamily::char_ngram) {
    if (spec.lowercase) text = to_lower(text);
    return ngrams(codepoint_strings(text), spec.n, "");
  }
  std::vector<std::string> tokens;
  if (spec.stream == "words") {
    tokens = tokenize(text, Tokenizer{TokenMode::word, spec.lowercase});
  } else {
    if (stream == nullptr || !*stream) throw ConfigError("token stream '" + spec.stream + "' is not bound");
    tokens = (*stream)(doc);
    if (spec.lowercase) {
      for (auto& t : tokens) t = to_lower(t);
    }
  }
  return ngrams(tokens, spec.n, " ");
}

FeatureSchema::FeatureSchema(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  std::size_t offset = 0;
  lookup_.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& blk = blocks_[b];
    if (blk.spec.family != FeatureFamily::summary_stats && (blk.spec.n < 1 || blk.spec.top_k < 1)) {
      throw ConfigError("feature family needs n >= 1 and top_k >= 1");
    }
    blk.offset = offset;
    for (std::size_t i = 0; i < blk.keys.size(); ++i) {
      if (!lookup_[b].emplace(blk.keys[i], static_cast<std::uint32_t>(i)).second) {
        throw InvariantError("duplicate key in feature block");
      }
    }
    offset += blk.width();
  }
  dim_ = offset;
  tag_ = fnv1a64(to_json());
}

std::optional<std::uint32_t> FeatureSchema::column(std::size_t block, std::string_view key) const {
  auto it = lookup_.at(block).find(std::string(key));
  if (it == lookup_[block].end()) return std::nullopt;
  return static_cast<std::uint32_t>(blocks_[block].offset + it->second);
}

void FeatureSchema::bind_stream(const std::string& name, TokenStream stream) {
  streams_[name] = std::make_shared<const TokenStream>(std::move(stream));
}

const TokenStream* FeatureSchema::stream(const std::string& name) const {
  auto it = streams_.find(name);
  return it == streams_.end() ? nullptr : it->second.get();
}

std::vector<double> FeatureSchema::block_values(const Document& doc, std::size_t b) const {
  const Block& blk = blocks_.at(b);
  std::vector<double> values(blk.width(), 0.0);
  if (blk.spec.family == FeatureFamily::summary_stats) {
    auto a = summary_stats(doc.text).as_array();
    std::copy(a.begin(), a.end(), values.begin());
    return values;
  }
  auto keys = family_keys(doc, blk.spec, stream(blk.spec.stream));
  if (keys.empty()) return values;
  std::vector<std::size_t> counts(blk.width(), 0);
  for (const auto& k : keys) {
    auto it = lookup_[b].find(k);
    if (it != lookup_[b].end()) ++counts[it->second];
  }
  const double total = static_cast<double>(keys.size());
  for (std::size_t i = 0; i < counts.size(); ++i) values[i] = static_cast<double>(counts[i]) / total;
  return values;
}

namespace {

void normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (s == 0.0) return;
  double inv = 1.0 / std::sqrt(s);
  for (double& x : v) x *= inv;
}

}  // namespace

FeatureVector FeatureSchema::vectorize(const Document& doc, VectorizeOptions options) const {
  std::vector<FeatureVector::Entry> entries;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto values = block_values(doc, b);
    if (options.normalize) normalize(values);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] != 0.0) entries.emplace_back(static_cast<std::uint32_t>(blocks_[b].offset + i), values[i]);
    }
  }
  // Per-block normalization makes the full vector unit-norm only when there
  // is a single block.
  return FeatureVector(dim_, tag_, std::move(entries), options.normalize && blocks_.size() == 1);
}

FeatureVector FeatureSchema::vectorize_block(const Document& doc, std::size_t block, VectorizeOptions options) const {
  auto values = block_values(doc, block);
  if (options.normalize) normalize(values);
  std::vector<FeatureVector::Entry> entries;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) entries.emplace_back(static_cast<std::uint32_t>(i), values[i]);
  }
  std::uint64_t tag = tag_ ^ (0x9e3779b97f4a7c15ULL * (block + 1));
  return FeatureVector(blocks_[block].width(), tag, std::move(entries), options.normalize);
}

std::string FeatureSchema::to_json() const {
  json families = json::array();
  for (const auto& blk : blocks_) {
    std::vector<std::pair<std::string, std::size_t>> pairs;
    for (std::size_t i = 0; i < blk.keys.size(); ++i) pairs.emplace_back(blk.keys[i], blk.offset + i);
    std::sort(pairs.begin(), pairs.end());
    json vocab = json::array();
    for (const auto& [k, c] : pairs) vocab.push_back(json::array({k, c}));
    json top_k = blk.spec.top_k == kAllKeys ? json(nullptr) : json(blk.spec.top_k);
    families.push_back({{"family", feature_family_name(blk.spec.family)},
                        {"n", blk.spec.n},
                        {"top_k", top_k},
                        {"lowercase", blk.spec.lowercase},
                        {"stream", blk.spec.stream},
                        {"distortion", distortion_to_json(blk.spec.distortion)},
                        {"vocab", std::move(vocab)}});
  }
  json j = {{"format", "stylo-schema"}, {"version", 1}, {"families", std::move(families)}};
  return j.dump();
}

FeatureSchema FeatureSchema::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("schema: ") + e.what());
  }
  if (j.value("format", "") != "stylo-schema" || j.value("version", 0) != 1) {
    throw DataError("schema: unsupported format or version");
  }
  std::vector<Block> blocks;
  try {
    std::size_t offset = 0;
    for (const auto& f : j.at("families")) {
      Block blk;
      blk.spec.family = parse_feature_family(f.at("family").get<std::string>());
      blk.spec.n = f.at("n").get<std::size_t>();
      blk.spec.top_k = f.at("top_k").is_null() ? kAllKeys : f.at("top_k").get<std::size_t>();
      blk.spec.lowercase = f.at("lowercase").get<bool>();
      blk.spec.stream = f.at("stream").get<std::string>();
      if (!f.at("distortion").is_null()) {
        const auto& d = f.at("distortion");
        blk.spec.distortion = DistortionScheme::make(parse_distortion_variant(d.at("variant").get<std::string>()),
                                                     d.at("vocabulary").get<std::vector<std::string>>());
      }
      const auto& vocab = f.at("vocab");
      blk.keys.resize(vocab.size());
      for (const auto& pair : vocab) {
        std::size_t col = pair.at(1).get<std::size_t>();
        if (col < offset || col >= offset + vocab.size()) throw DataError("schema: column out of block range");
        blk.keys[col - offset] = pair.at(0).get<std::string>();
      }
      offset += vocab.size();
      blocks.push_back(std::move(blk));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("schema: ") + e.what());
  }
  return FeatureSchema(std::move(blocks));
}

void FeatureSchema::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json() << '\n';
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

FeatureSchema fit_schema(const Corpus& corpus, const std::vector<FamilySpec>& specs,
                         const std::map<std::string, TokenStream>& streams, Warnings* warnings) {
  if (corpus.empty()) throw DataError("fit_schema: empty corpus");
  if (specs.empty()) throw ConfigError("fit_schema: no feature families");
  std::vector<FeatureSchema::Block> blocks;
  for (const auto& spec : specs) {
    FeatureSchema::Block blk;
    blk.spec = spec;
    if (spec.family == FeatureFamily::summary_stats) {
      blk.keys = summary_keys();
      blocks.push_back(std::move(blk));
      continue;
    }
    if (spec.n < 1 || spec.top_k < 1) throw ConfigError("feature family needs n >= 1 and top_k >= 1");
    const TokenStream* stream = nullptr;
    if (spec.family == FeatureFamily::token_ngram && spec.stream != "words") {
      auto it = streams.find(spec.stream);
      if (it == streams.end()) throw ConfigError("token stream '" + spec.stream + "' is not bound");
      stream = &it->second;
    }
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& doc : corpus.documents()) {
      for (auto& k : family_keys(doc, spec, stream)) ++counts[std::move(k)];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (spec.top_k != kAllKeys && spec.top_k > ranked.size()) {
      warn(warnings, std::string(feature_family_name(spec.family)) + " n=" + std::to_string(spec.n) + ": top_k=" +
                         std::to_string(spec.top_k) + " exceeds " + std::to_string(ranked.size()) +
                         " distinct keys; using all");
    }
    std::size_t keep = std::min(spec.top_k, ranked.size());
    for (std::size_t i = 0; i < keep; ++i) blk.keys.push_back(std::move(ranked[i].first));
    blocks.push_back(std::move(blk));
  }
  FeatureSchema schema(std::move(blocks));
  for (const auto& [name, fn] : streams) schema.bind_stream(name, fn);
  return schema;
}

std::string dump_row(std::string_view doc_id, const FeatureVector& v) {
  std::string out(doc_id);
  char buf[64];
  for (const auto& [c, x] : v.entries()) {
    std::snprintf(buf, sizeof buf, " %u:%.17g", c, x);
    out += buf;
  }
  return out;
}

}  // namespace stylo
