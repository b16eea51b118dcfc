#include "stylo/ppm.hpp"

#include <algorithm>
#include <bitset>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "stylo/hash.hpp"
#include "stylo/parallel.hpp"

namespace stylo {

using nlohmann::json;

namespace {

void check_order(std::size_t order) {
  if (order > PpmModel::kMaxOrder) throw DataError("ppm order must be in [0, 8]");
}

std::string to_hex(std::string_view bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : bytes) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xf]);
  }
  return out;
}

std::string from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw DataError("ppm model: bad hex context");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw DataError("ppm model: bad hex context");
  };
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<char>(nibble(hex[i]) * 16 + nibble(hex[i + 1])));
  }
  return out;
}

// Keys for context lengths 0..longest ending just before `end`.
std::size_t context_keys(std::string_view text, std::size_t end, std::size_t order, std::uint64_t* keys) {
  std::size_t longest = std::min(order, end);
  std::uint64_t key = 0;
  keys[0] = 0;
  for (std::size_t len = 1; len <= longest; ++len) {
    key |= static_cast<std::uint64_t>(static_cast<unsigned char>(text[end - len])) << (8 * (len - 1));
    keys[len] = key;
  }
  return longest;
}

std::string unpack(std::uint64_t key, std::size_t len) {
  std::string out(len, '\0');
  for (std::size_t j = 0; j < len; ++j) out[len - 1 - j] = static_cast<char>((key >> (8 * j)) & 0xff);
  return out;
}

}  // namespace

std::uint32_t PpmModel::Context::count(std::uint8_t symbol) const {
  auto it = std::lower_bound(counts.begin(), counts.end(), symbol,
                             [](const auto& e, std::uint8_t s) { return e.first < s; });
  return it != counts.end() && it->first == symbol ? it->second : 0;
}

PpmModel::PpmModel(std::size_t order) : order_(order) {
  check_order(order);
  tables_.resize(order + 1);
}

std::vector<std::uint8_t> PpmModel::alphabet() const {
  std::vector<std::uint8_t> out;
  if (tables_.empty()) return out;
  auto it = tables_[0].find(0);
  if (it == tables_[0].end()) return out;
  for (const auto& [s, c] : it->second.counts) out.push_back(s);
  return out;
}

std::size_t PpmModel::context_count() const {
  std::size_t n = 0;
  for (const auto& t : tables_) n += t.size();
  return n;
}

const PpmModel::Context* PpmModel::context(std::string_view ctx) const {
  if (ctx.size() > order_ || tables_.empty()) return nullptr;
  std::uint64_t keys[kMaxOrder + 1];
  context_keys(ctx, ctx.size(), ctx.size(), keys);
  const auto& table = tables_[ctx.size()];
  auto it = table.find(keys[ctx.size()]);
  return it == table.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::string, const PpmModel::Context*>> PpmModel::contexts() const {
  std::vector<std::pair<std::string, const Context*>> out;
  for (std::size_t len = 0; len < tables_.size(); ++len) {
    std::vector<std::pair<std::string, const Context*>> level;
    for (const auto& [key, ctx] : tables_[len]) level.emplace_back(unpack(key, len), &ctx);
    std::sort(level.begin(), level.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

void PpmModel::train(std::string_view text) {
  if (tables_.empty()) tables_.resize(order_ + 1);
  std::uint64_t keys[kMaxOrder + 1];
  for (std::size_t i = 0; i < text.size(); ++i) {
    std::size_t longest = context_keys(text, i, order_, keys);
    auto symbol = static_cast<std::uint8_t>(text[i]);
    for (std::size_t len = 0; len <= longest; ++len) {
      Context& ctx = tables_[len][keys[len]];
      auto it = std::lower_bound(ctx.counts.begin(), ctx.counts.end(), symbol,
                                 [](const auto& e, std::uint8_t s) { return e.first < s; });
      if (it != ctx.counts.end() && it->first == symbol) {
        ++it->second;
      } else {
        ctx.counts.insert(it, {symbol, 1});
      }
      ++ctx.total;
    }
  }
  trained_chars_ += text.size();
}

double PpmModel::prob_keys(const std::uint64_t* keys, std::size_t longest, std::uint8_t symbol) const {
  std::bitset<kAlphabetSize> excluded;
  double escape_mass = 1.0;
  for (std::size_t l = longest + 1; l-- > 0;) {
    auto it = tables_[l].find(keys[l]);
    if (it == tables_[l].end()) continue;
    const Context& ctx = it->second;
    std::uint64_t total = 0;
    std::uint64_t distinct = 0;
    std::uint32_t hit = 0;
    for (const auto& [s, c] : ctx.counts) {
      if (excluded[s]) continue;
      total += c;
      ++distinct;
      if (s == symbol) hit = c;
    }
    if (distinct == 0) continue;
    const double denom = static_cast<double>(total + distinct);
    if (hit > 0) return escape_mass * static_cast<double>(hit) / denom;
    escape_mass *= static_cast<double>(distinct) / denom;
    for (const auto& [s, c] : ctx.counts) excluded[s] = true;
  }
  return escape_mass / static_cast<double>(kAlphabetSize - excluded.count());
}

double PpmModel::prob(std::string_view history, std::uint8_t symbol) const {
  if (tables_.empty()) return 1.0 / static_cast<double>(kAlphabetSize);
  std::uint64_t keys[kMaxOrder + 1];
  std::size_t longest = context_keys(history, history.size(), order_, keys);
  return prob_keys(keys, longest, symbol);
}

std::string PpmModel::to_json() const {
  json ctxs = json::array();
  for (const auto& [bytes, ctx] : contexts()) {
    json counts = json::array();
    for (const auto& [s, c] : ctx->counts) counts.push_back(json::array({s, c}));
    ctxs.push_back(json::array({to_hex(bytes), std::move(counts)}));
  }
  json j = {{"format", "stylo-ppm"},
            {"version", 1},
            {"order", order_},
            {"trained_chars", trained_chars_},
            {"contexts", std::move(ctxs)}};
  j["hash"] = sha256_hex(j.dump());
  return j.dump();
}

std::string PpmModel::content_hash() const { return json::parse(to_json()).at("hash").get<std::string>(); }

PpmModel PpmModel::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("ppm model: ") + e.what());
  }
  if (j.value("format", "") != "stylo-ppm" || j.value("version", 0) != 1) {
    throw DataError("ppm model: unsupported format or version");
  }
  std::string stored = j.value("hash", "");
  j.erase("hash");
  if (sha256_hex(j.dump()) != stored) throw DataError("ppm model: content hash mismatch");
  PpmModel m(j.at("order").get<std::size_t>());
  m.trained_chars_ = j.at("trained_chars").get<std::uint64_t>();
  for (const auto& entry : j.at("contexts")) {
    std::string bytes = from_hex(entry.at(0).get<std::string>());
    if (bytes.size() > m.order_) throw DataError("ppm model: context longer than order");
    std::uint64_t keys[kMaxOrder + 1];
    context_keys(bytes, bytes.size(), bytes.size(), keys);
    Context& ctx = m.tables_[bytes.size()][keys[bytes.size()]];
    for (const auto& sc : entry.at(1)) {
      auto s = sc.at(0).get<std::uint8_t>();
      auto c = sc.at(1).get<std::uint32_t>();
      if (c == 0) throw DataError("ppm model: zero count");
      ctx.counts.emplace_back(s, c);
      ctx.total += c;
    }
    std::sort(ctx.counts.begin(), ctx.counts.end());
  }
  return m;
}

void PpmModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json() << '\n';
}

PpmModel PpmModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

PpmModel ppm_train(const std::vector<std::string>& texts, std::size_t order) {
  check_order(order);
  std::size_t total = 0;
  for (const auto& t : texts) total += t.size();
  if (total == 0) throw DataError("ppm_train: empty training material");
  PpmModel m(order);
  for (const auto& t : texts) m.train(t);
  return m;
}

double ppm_prob(const PpmModel& model, std::string_view context, std::uint8_t symbol) {
  return model.prob(context, symbol);
}

CrossEntropyScore cross_entropy(const PpmModel& model, std::string_view text) {
  if (text.empty()) throw DataError("cross_entropy: empty text");
  double bits = 0.0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    std::size_t start = i > model.order() ? i - model.order() : 0;
    bits -= std::log2(model.prob(text.substr(start, i - start), static_cast<std::uint8_t>(text[i])));
  }
  return {bits / static_cast<double>(text.size()), text.size()};
}

std::vector<std::pair<std::string, double>> ppm_attribute(const std::map<std::string, PpmModel>& author_models,
                                                          std::string_view text) {
  if (author_models.empty()) throw DataError("ppm_attribute: no author models");
  if (text.empty()) throw DataError("ppm_attribute: empty text");
  std::vector<const std::pair<const std::string, PpmModel>*> entries;
  for (const auto& e : author_models) entries.push_back(&e);
  std::vector<std::pair<std::string, double>> ranked(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    ranked[i] = {entries[i]->first, cross_entropy(entries[i]->second, text).bits_per_char};
  });
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  return ranked;
}

std::map<std::string, PpmModel> train_author_models(const Corpus& corpus, std::size_t order) {
  std::map<std::string, std::vector<std::string>> texts;
  for (const auto& d : corpus.documents()) texts[d.author_id].push_back(d.text);
  std::vector<std::string> authors;
  for (const auto& [a, t] : texts) authors.push_back(a);
  std::vector<PpmModel> models(authors.size());
  parallel_for(authors.size(), [&](std::size_t i) { models[i] = ppm_train(texts[authors[i]], order); });
  std::map<std::string, PpmModel> out;
  for (std::size_t i = 0; i < authors.size(); ++i) out.emplace(authors[i], std::move(models[i]));
  return out;
}

double ppm_verify(std::string_view text_a, std::string_view text_b, std::size_t order) {
  if (text_a.empty() || text_b.empty()) throw DataError("ppm_verify: empty input text");
  return cross_entropy(ppm_train({std::string(text_a)}, order), text_b).bits_per_char;
}

double ppm_verify_symmetric(std::string_view text_a, std::string_view text_b, std::size_t order) {
  return 0.5 * (ppm_verify(text_a, text_b, order) + ppm_verify(text_b, text_a, order));
}

}  // namespace stylo
