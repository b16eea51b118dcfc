#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stylo/corpus.hpp"
#include "stylo/error.hpp"
#include "stylo/features.hpp"
#include "stylo/harness.hpp"
#include "stylo/ppm.hpp"
#include "stylo/version.hpp"

namespace {

using namespace stylo;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

void print_warnings(const Warnings& w) {
  for (const auto& m : w.messages) std::cerr << "warning: " << m << '\n';
}

struct CorpusArgs {
  std::string path;
  std::string format = "jsonl";

  void add(CLI::App* app) {
    app->add_option("--corpus", path, "Corpus path")->required();
    app->add_option("--format", format, "jsonl | csv | dir");
  }
  Corpus load() const { return load_corpus(path, parse_corpus_format(format)); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stylometry toolkit: authorship attribution and verification"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // stats
  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  CorpusArgs stats_corpus;
  stats_corpus.add(stats);
  bool stats_json = false;
  stats->add_flag("--json", stats_json, "Emit JSON");

  // dedup
  auto* dedup = app.add_subcommand("dedup", "Remove exact duplicates after NFC normalization");
  CorpusArgs dedup_corpus;
  dedup_corpus.add(dedup);
  std::string dedup_out;
  dedup->add_option("--out", dedup_out, "Output JSONL corpus")->required();

  // split
  auto* split = app.add_subcommand("split", "Build and save a train/validation/test split");
  CorpusArgs split_corpus;
  split_corpus.add(split);
  std::string split_kind = "iid";
  std::vector<double> split_fractions{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 0;
  std::string split_out;
  split->add_option("--kind", split_kind, "iid | cross_topic | cross_genre | unique_author");
  split->add_option("--fractions", split_fractions, "train validation test")->expected(3)->delimiter(',');
  split->add_option("--seed", split_seed, "Seed");
  split->add_option("--out", split_out, "Output split file")->required();

  // run
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  std::string run_config;
  std::optional<std::uint64_t> run_seed;
  std::string run_out;
  bool run_pan = false;
  run->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--seed", run_seed, "Override the global seed");
  run->add_option("--out", run_out, "Override the output directory");
  run->add_flag("--pan-compat", run_pan, "Exclude abstentions and 0.5 scores from AUC");

  // pairs
  auto* pairs = app.add_subcommand("pairs", "Sample AV pairs inside each split partition");
  CorpusArgs pairs_corpus;
  pairs_corpus.add(pairs);
  std::string pairs_split;
  std::size_t pairs_per_class = 50;
  std::uint64_t pairs_seed = 0;
  std::string pairs_out;
  pairs->add_option("--split", pairs_split, "Split file")->required();
  pairs->add_option("--pairs-per-class", pairs_per_class, "Pairs per label and partition");
  pairs->add_option("--seed", pairs_seed, "Seed");
  pairs->add_option("--out", pairs_out, "Output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic Markov-source corpus");
  std::size_t synth_authors = 5;
  std::size_t synth_docs = 20;
  std::size_t synth_len = 1000;
  double synth_sep = 1.0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--authors", synth_authors, "Number of authors");
  synth->add_option("--docs", synth_docs, "Documents per author");
  synth->add_option("--length", synth_len, "Characters per document");
  synth->add_option("--separation", synth_sep, "0 = shared source, 1 = independent sources");
  synth->add_option("--seed", synth_seed, "Seed");
  synth->add_option("--out", synth_out, "Output JSONL corpus")->required();

  // report
  auto* report = app.add_subcommand("report", "Render run records");
  std::vector<std::string> report_runs;
  std::string report_format = "markdown";
  std::string report_out;
  report->add_option("runs", report_runs, "run_record.json files")->required();
  report->add_option("--format", report_format, "json | csv | markdown");
  report->add_option("--out", report_out, "Output file (default stdout)");

  // ppm
  auto* ppm = app.add_subcommand("ppm", "PPM character models");
  ppm->require_subcommand(1);
  auto* ppm_train_cmd = ppm->add_subcommand("train", "Train a model on texts");
  CorpusArgs ppm_train_corpus;
  ppm_train_corpus.add(ppm_train_cmd);
  std::string ppm_author;
  std::size_t ppm_order = PpmModel::kDefaultOrder;
  std::string ppm_out;
  ppm_train_cmd->add_option("--author", ppm_author, "Restrict to one author");
  ppm_train_cmd->add_option("--order", ppm_order, "Context order (0-8)");
  ppm_train_cmd->add_option("--out", ppm_out, "Model file")->required();

  auto* ppm_score_cmd = ppm->add_subcommand("score", "Cross-entropy of a text under a model");
  std::string ppm_model;
  std::string ppm_text;
  ppm_score_cmd->add_option("--model", ppm_model, "Model file")->required();
  ppm_score_cmd->add_option("--text", ppm_text, "Text file")->required();

  auto* ppm_attr_cmd = ppm->add_subcommand("attribute", "Rank corpus authors for a text");
  CorpusArgs ppm_attr_corpus;
  ppm_attr_corpus.add(ppm_attr_cmd);
  std::string ppm_attr_text;
  std::size_t ppm_attr_order = PpmModel::kDefaultOrder;
  ppm_attr_cmd->add_option("--text", ppm_attr_text, "Text file")->required();
  ppm_attr_cmd->add_option("--order", ppm_attr_order, "Context order (0-8)");

  // distort
  auto* distort_cmd = app.add_subcommand("distort", "Mask out-of-vocabulary words");
  std::string distort_variant = "single_asterisk";
  std::string distort_vocab;
  std::string distort_text;
  distort_cmd->add_option("--variant", distort_variant,
                          "single_asterisk | multiple_asterisk | exterior_chars | last_two_chars");
  distort_cmd->add_option("--vocab", distort_vocab, "Vocabulary file, one word per line")->required();
  distort_cmd->add_option("--text", distort_text, "Text file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*stats) {
      auto s = compute_stats(stats_corpus.load());
      if (stats_json) {
        nlohmann::json j = {{"documents", s.documents},
                            {"authors", s.authors},
                            {"words", s.words},
                            {"docs_per_author", s.docs_per_author.value()},
                            {"words_per_doc", s.words_per_doc.value()},
                            {"imbalance", s.imbalance}};
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << format_stats(s);
      }
    } else if (*dedup) {
      auto result = dedup_exact(dedup_corpus.load());
      save_corpus_jsonl(result.corpus, dedup_out);
      std::cerr << "removed " << result.removed_count << " duplicates\n";
    } else if (*split) {
      Warnings w;
      SplitFractions f{split_fractions.at(0), split_fractions.at(1), split_fractions.at(2)};
      auto s = make_split(split_corpus.load(), parse_split_kind(split_kind), f, split_seed, &w);
      print_warnings(w);
      save_split(s, split_out);
      std::cout << split_hash(s) << '\n';
    } else if (*run) {
      auto config = ExperimentConfig::load(run_config);
      if (run_seed) config.seed = *run_seed;
      if (!run_out.empty()) config.output_dir = run_out;
      if (run_pan) config.pan_compat = true;
      auto record = run_experiment(config);
      for (const auto& m : record.warnings) std::cerr << "warning: " << m << '\n';
      std::cout << report_render(record, ReportFormat::markdown_table);
    } else if (*pairs) {
      Corpus corpus = pairs_corpus.load();
      Split s = load_split(pairs_split);
      if (auto problem = check_split(corpus, s)) throw DataError("split does not fit the corpus: " + *problem);
      Warnings w;
      auto p = av_pairs_from_split(corpus, s, pairs_per_class, pairs_seed, &w);
      print_warnings(w);
      std::filesystem::create_directories(pairs_out);
      write_pairs_csv(p.train, std::filesystem::path(pairs_out) / "pairs_train.csv");
      write_pairs_csv(p.validation, std::filesystem::path(pairs_out) / "pairs_validation.csv");
      write_pairs_csv(p.test, std::filesystem::path(pairs_out) / "pairs_test.csv");
    } else if (*synth) {
      save_corpus_jsonl(synth_corpus(synth_authors, synth_docs, synth_len, synth_sep, synth_seed), synth_out);
    } else if (*report) {
      std::vector<RunRecord> records;
      for (const auto& r : report_runs) records.push_back(RunRecord::load(r));
      auto fmt = parse_report_format(report_format);
      std::string text;
      if (fmt == ReportFormat::markdown_table) {
        text = report_render_markdown(records);
      } else {
        for (const auto& r : records) text += report_render(r, fmt);
      }
      write_output(report_out, text);
    } else if (*ppm_train_cmd) {
      Corpus corpus = ppm_train_corpus.load();
      std::vector<std::string> texts;
      for (const auto& d : corpus.documents()) {
        if (ppm_author.empty() || d.author_id == ppm_author) texts.push_back(d.text);
      }
      if (texts.empty()) throw DataError("no training texts for author '" + ppm_author + "'");
      auto model = ppm_train(texts, ppm_order);
      model.save(ppm_out);
      std::cout << model.content_hash() << '\n';
    } else if (*ppm_score_cmd) {
      auto model = PpmModel::load(ppm_model);
      auto score = cross_entropy(model, read_file(ppm_text));
      std::printf("%.6f\n", score.bits_per_char);
    } else if (*ppm_attr_cmd) {
      auto models = train_author_models(ppm_attr_corpus.load(), ppm_attr_order);
      for (const auto& [author, bpc] : ppm_attribute(models, read_file(ppm_attr_text))) {
        std::printf("%s\t%.6f\n", author.c_str(), bpc);
      }
    } else if (*distort_cmd) {
      std::vector<std::string> vocab;
      std::istringstream in(read_file(distort_vocab));
      for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) vocab.push_back(line);
      }
      auto scheme = DistortionScheme::make(parse_distortion_variant(distort_variant), vocab);
      std::cout << distort(read_file(distort_text), scheme);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
