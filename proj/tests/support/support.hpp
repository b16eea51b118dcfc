#pragma once

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/rng.hpp"

namespace stylo::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng = Rng::substream(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)), "tmp");
    path_ = std::filesystem::temp_directory_path() / ("stylo_test_" + tag + "_" + std::to_string(rng.next() % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Word list "w000".."w{n-1}".
inline std::vector<std::string> word_list(std::size_t n, const std::string& prefix = "w") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string num = std::to_string(i);
    if (num.size() < 3) num.insert(0, 3 - num.size(), '0');
    out.push_back(prefix + num);
  }
  return out;
}

/// Zipf-like unigram distribution over a vocabulary, randomly permuted.
struct Unigram {
  std::vector<std::string> words;
  std::vector<double> cdf;

  static Unigram make(const std::vector<std::string>& vocab, Rng& rng, double exponent = 1.0) {
    Unigram u;
    u.words = vocab;
    rng.shuffle(std::span<std::string>(u.words));
    double acc = 0.0;
    for (std::size_t i = 0; i < u.words.size(); ++i) {
      acc += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
      u.cdf.push_back(acc);
    }
    for (auto& c : u.cdf) c /= acc;
    return u;
  }

  const std::string& sample(Rng& rng) const {
    double r = rng.uniform();
    std::size_t i = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    return words[std::min(i, words.size() - 1)];
  }

  std::string text(Rng& rng, std::size_t n_words) const {
    std::string out;
    for (std::size_t i = 0; i < n_words; ++i) {
      if (i) out += ' ';
      out += sample(rng);
    }
    return out;
  }
};

/// Balanced corpus: `docs` documents per author, topics cycling over 4 labels.
inline Corpus balanced_corpus(std::size_t authors, std::size_t docs, const std::string& text = "some words here") {
  std::vector<Document> out;
  for (std::size_t a = 0; a < authors; ++a) {
    for (std::size_t d = 0; d < docs; ++d) {
      std::string author = "a" + std::to_string(a);
      out.push_back({author + "_" + std::to_string(d), author, text + " " + std::to_string(a * docs + d),
                     "t" + std::to_string(d % 4), "g" + std::to_string(d % 2)});
    }
  }
  return Corpus("balanced", std::move(out));
}

/// Two texts for an unmasking trial. Same-author sides share one word
/// distribution, with a handful of "topic" words boosted on side B; a
/// different-author pair uses two independent distributions.
struct UnmaskingPairOptions {
  std::size_t vocab = 200;
  std::size_t words_per_side = 1000;
  std::size_t topic_words = 6;
  double topic_mass = 0.15;
};

inline std::pair<std::string, std::string> unmasking_pair(Rng& rng, bool same, const UnmaskingPairOptions& o = {}) {
  auto vocab = word_list(o.vocab, "u");
  Unigram a = Unigram::make(vocab, rng);
  std::string text_a = a.text(rng, o.words_per_side);
  if (!same) {
    Unigram b = Unigram::make(vocab, rng);
    return {text_a, b.text(rng, o.words_per_side)};
  }
  std::vector<std::string> topic;
  for (std::size_t i = 0; i < o.topic_words; ++i) topic.push_back(a.words[rng.below(40)]);
  std::string text_b;
  for (std::size_t i = 0; i < o.words_per_side; ++i) {
    if (i) text_b += ' ';
    text_b += rng.uniform() < o.topic_mass ? topic[rng.below(topic.size())] : a.sample(rng);
  }
  return {text_a, text_b};
}

/// Gaussian blobs: `per_author` rows per author around random centers.
struct Blobs {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
};

inline Blobs gaussian_blobs(Rng& rng, std::size_t authors, std::size_t per_author, std::size_t dim, double spread,
                            double noise) {
  Blobs b;
  for (std::size_t a = 0; a < authors; ++a) {
    std::vector<double> center(dim);
    for (auto& c : center) c = rng.normal() * spread;
    for (std::size_t i = 0; i < per_author; ++i) {
      std::vector<double> row(dim);
      for (std::size_t d = 0; d < dim; ++d) row[d] = center[d] + rng.normal() * noise;
      b.rows.push_back(std::move(row));
      b.labels.push_back("author" + std::to_string(a));
    }
  }
  return b;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

}  // namespace stylo::testing
