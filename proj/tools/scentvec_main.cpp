// scentvec: train smell embeddings from perfume compositions, compare them
// against word embeddings with rank-biased overlap, analyze perfume geometry,
// and map word space onto smell space.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scentvec/corpus.hpp"
#include "scentvec/embedding.hpp"
#include "scentvec/experiments.hpp"
#include "scentvec/mapping.hpp"
#include "scentvec/rbo.hpp"
#include "scentvec/reports.hpp"
#include "scentvec/stats.hpp"
#include "scentvec/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 42;
  std::size_t threads = 1;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw scentvec::IoError("cannot open input file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw scentvec::IoError("cannot open output file: " + path);
  return out;
}

// The manifest echoes the fully resolved configuration (defaults included)
// in CLI11's TOML-style config format; `scentvec --config <manifest>` re-runs
// the same command.
void write_manifest(const std::string& path, const CLI::App& root, const CLI::App& command) {
  auto out = open_output(path);
  out << "# scentvec run manifest; re-run with: scentvec --config " << path << "\n";
  for (const CLI::Option* opt : root.get_options()) {
    if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "config") continue;
    if (opt->count() > 0 || !opt->get_default_str().empty()) {
      out << name << " = " << (opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str())
          << "\n";
    }
  }
  out << "\n[" << command.get_name() << "]\n";
  out << command.config_to_str(true, false);
}

scentvec::EmbeddingTable load_table(const std::string& path, const std::string& zip_member,
                                    bool lowercase) {
  std::size_t duplicates = 0;
  auto table = scentvec::load_embedding_file(path, zip_member, &duplicates, lowercase);
  if (duplicates > 0) {
    std::cerr << "warning: " << duplicates << " duplicate token(s) ignored in " << path << "\n";
  }
  return table;
}

std::vector<scentvec::PerfumeRecord> load_corpus_jsonl(const std::string& path) {
  auto in = open_input(path);
  return scentvec::parse_perfumes(in, scentvec::CorpusFormat::jsonl);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
  std::string input;
  std::string format = "jsonl";
  std::string output;
  std::string stats_path;
  std::size_t min_notes = 3;
  std::size_t top_k = 10;
};

void run_ingest(const IngestOptions& opt) {
  auto in = open_input(opt.input);
  const auto format =
      opt.format == "csv" ? scentvec::CorpusFormat::csv : scentvec::CorpusFormat::jsonl;
  const auto raw = scentvec::parse_perfumes(in, format);

  std::size_t dropped_notes = 0;
  auto records = scentvec::normalize_corpus(raw, &dropped_notes);
  records = scentvec::filter_corpus(std::move(records), opt.min_notes);
  if (dropped_notes > 0) {
    std::cerr << "warning: dropped " << dropped_notes
              << " note(s) that normalized to the empty string\n";
  }

  const auto stats = scentvec::corpus_stats(records, opt.top_k);
  {
    auto out = open_output(opt.output);
    scentvec::write_corpus_jsonl(out, records);
  }
  const std::string stats_path =
      opt.stats_path.empty() ? opt.output + ".stats.json" : opt.stats_path;
  {
    auto out = open_output(stats_path);
    out << json(stats).dump(2) << "\n";
  }

  std::cout << "perfumes: " << raw.size() << " parsed, " << records.size() << " kept\n";
  std::cout << "unique notes: " << stats.n_unique_notes << "\n";
  std::cout << "notes per perfume: mean " << stats.mean_notes_per_perfume << ", std "
            << stats.std_notes_per_perfume << "\n";
  for (const auto& [note, count] : stats.top_notes) {
    std::cout << "  " << note << "\t" << count << "\n";
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string corpus;
  std::string out_prefix;
  std::vector<std::size_t> dims = {10, 20, 50, 100};
  std::size_t seq_length = 100;
  std::size_t window = 5;
  std::size_t min_count = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr_start = 0.025;
  double lr_end = 1e-4;
  double subsample = 1e-3;
};

void run_train(const TrainOptions& opt, const GlobalOptions& global) {
  const auto records = load_corpus_jsonl(opt.corpus);
  if (records.empty()) throw scentvec::AnalysisError("train: corpus is empty");

  // One sequence per perfume, shared across all requested dimensionalities.
  std::vector<scentvec::NoteSequence> sequences;
  sequences.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    scentvec::Rng rng(scentvec::derive_seed(global.seed, 20, i));
    sequences.push_back(scentvec::build_sequence(records[i], opt.seq_length, rng));
  }

  for (const std::size_t dim : opt.dims) {
    scentvec::TrainConfig config;
    config.dim = dim;
    config.window = opt.window;
    config.min_count = opt.min_count;
    config.negatives = opt.negatives;
    config.epochs = opt.epochs;
    config.lr_start = opt.lr_start;
    config.lr_end = opt.lr_end;
    config.subsample_t = opt.subsample;
    config.seed = scentvec::derive_seed(global.seed, 21, dim);
    config.threads = global.threads;

    scentvec::TrainStats stats;
    const auto table = scentvec::train_embeddings(sequences, config, &stats);
    const std::string path = opt.out_prefix + "-d" + std::to_string(dim) + ".vec";
    scentvec::save_embedding_file(path, table);

    std::cout << path << ": vocab " << stats.vocab_size << ", epoch losses";
    for (const double loss : stats.epoch_mean_loss) std::cout << " " << loss;
    std::cout << "\n";
  }
}

// ---------------------------------------------------------------------------
// neighbors

struct NeighborsOptions {
  std::string table;
  std::string zip_member;
  std::string query;
  std::size_t k = 5;
  std::string output;
  bool lowercase = false;
};

void run_neighbors(const NeighborsOptions& opt) {
  const auto table = load_table(opt.table, opt.zip_member, opt.lowercase);
  const auto ranking = scentvec::neighbors(table, opt.query, opt.k);
  if (opt.output.empty()) {
    for (std::size_t i = 0; i < ranking.ranked.size(); ++i) {
      std::cout << (i + 1) << "\t" << ranking.ranked[i].first << "\t"
                << ranking.ranked[i].second << "\n";
    }
  } else {
    auto out = open_output(opt.output);
    scentvec::write_ranking_csv(out, ranking);
  }
}

// ---------------------------------------------------------------------------
// exp1a

struct Exp1aOptions {
  std::vector<std::string> smell_tables;
  std::vector<std::string> word_tables;
  double p = 0.9;
  std::size_t depth = 0;  // 0 = full list
  std::string variant = "ext";
  bool lowercase_words = true;
  std::string out_dir;
};

void run_exp1a(const Exp1aOptions& opt, const GlobalOptions& global) {
  std::vector<scentvec::EmbeddingTable> smell, word;
  for (const auto& path : opt.smell_tables) smell.push_back(load_table(path, "", false));
  for (const auto& path : opt.word_tables) word.push_back(load_table(path, "", opt.lowercase_words));

  scentvec::RboConfig rbo_config;
  rbo_config.p = opt.p;
  if (opt.depth > 0) rbo_config.depth = opt.depth;
  const auto variant =
      opt.variant == "min" ? scentvec::RboVariant::min : scentvec::RboVariant::ext;

  const auto report = scentvec::run_exp1a(smell, word, rbo_config, global.seed, variant);

  json config_echo{{"p", opt.p},
                   {"depth", opt.depth == 0 ? json("full") : json(opt.depth)},
                   {"variant", opt.variant},
                   {"seed", global.seed}};
  json j = report;
  j["config"] = std::move(config_echo);
  {
    auto out = open_output((fs::path(opt.out_dir) / "report.json").string());
    out << j.dump(2) << "\n";
  }
  {
    auto out = open_output((fs::path(opt.out_dir) / "grid.csv").string());
    scentvec::write_grid_csv(out, report);
  }
  {
    auto out = open_output((fs::path(opt.out_dir) / "per_word.csv").string());
    scentvec::write_per_word_csv(out, report);
  }
  for (const auto& row : report.rows) {
    std::cout << "dim " << row.smell_dim << " x " << row.word_corpus << ": mean RBO "
              << row.mean_rbo << " vs random " << row.mean_rbo_random << " (p = " << row.p_value
              << ")\n";
  }
}

// ---------------------------------------------------------------------------
// exp1b

struct Exp1bOptions {
  std::string report;
  std::string word_table;
  std::string seed_words_path;
  bool lowercase_words = true;
  std::string out_dir;
};

void run_exp1b(const Exp1bOptions& opt) {
  json exp1a_report;
  {
    auto in = open_input(opt.report);
    try {
      in >> exp1a_report;
    } catch (const json::parse_error& e) {
      throw scentvec::ParseError(1, std::string("exp1a report: ") + e.what());
    }
  }
  if (!exp1a_report.contains("per_word") || !exp1a_report["per_word"].is_object()) {
    throw scentvec::SchemaError("exp1a report: missing \"per_word\" object");
  }

  const auto word_table = load_table(opt.word_table, "", opt.lowercase_words);

  std::vector<std::string> seeds;
  if (opt.seed_words_path.empty()) {
    seeds = scentvec::default_olfaction_seeds();
  } else {
    auto in = open_input(opt.seed_words_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) seeds.push_back(line);
    }
    if (seeds.empty()) throw scentvec::SchemaError("seed-word file is empty");
  }

  std::vector<std::string> words;
  std::vector<double> rbo_values;
  std::size_t skipped_words = 0;
  for (const auto& [word, values] : exp1a_report["per_word"].items()) {
    if (!word_table.contains(word)) {
      ++skipped_words;
      continue;
    }
    words.push_back(word);
    rbo_values.push_back(values.at(0).get<double>());
  }
  if (skipped_words > 0) {
    std::cerr << "warning: " << skipped_words
              << " word(s) from the report are missing from the word table\n";
  }

  const auto association = scentvec::olfactory_association(word_table, seeds, words);
  const auto spearman_result = scentvec::run_exp1b(words, rbo_values, association);

  json j{{"spearman", spearman_result},
         {"association", association},
         {"n_words", words.size()},
         {"skipped_words", skipped_words},
         {"seed_words", seeds}};
  {
    auto out = open_output((fs::path(opt.out_dir) / "exp1b.json").string());
    out << j.dump(2) << "\n";
  }
  {
    auto out = open_output((fs::path(opt.out_dir) / "scores.csv").string());
    out << "word,rbo,association\n";
    std::map<std::string, double> assoc;
    for (const auto& [w, s] : association.scores) assoc[w] = s;
    for (std::size_t i = 0; i < words.size(); ++i) {
      out << words[i] << ',' << scentvec::detail::format_csv_value(rbo_values[i]) << ','
          << scentvec::detail::format_csv_value(assoc.at(words[i])) << "\n";
    }
  }
  std::cout << "spearman rho = " << spearman_result.rho << " (p = " << spearman_result.p_two_sided
            << ", n = " << spearman_result.n << ")\n";
}

// ---------------------------------------------------------------------------
// exp2

struct Exp2Options {
  std::string table;
  std::string zip_member;
  std::string corpus;
  std::size_t bins = 50;
  std::size_t kde_grid = 200;
  std::string out_dir;
};

void run_exp2(const Exp2Options& opt, const GlobalOptions& global) {
  const auto table = load_table(opt.table, opt.zip_member, false);
  const auto records = load_corpus_jsonl(opt.corpus);
  scentvec::Rng rng(scentvec::derive_seed(global.seed, 30));
  const auto report = scentvec::run_exp2(table, records, rng, opt.bins, opt.kde_grid);

  json j = report;
  j["config"] = {{"bins", opt.bins}, {"kde_grid", opt.kde_grid}, {"seed", global.seed}};
  {
    auto out = open_output((fs::path(opt.out_dir) / "report.json").string());
    out << j.dump(2) << "\n";
  }
  {
    auto out = open_output((fs::path(opt.out_dir) / "variances.csv").string());
    scentvec::write_variances_csv(out, report);
  }
  const auto write_hist = [&](const char* name, std::span<const scentvec::HistogramBin> bins) {
    auto out = open_output((fs::path(opt.out_dir) / name).string());
    scentvec::write_histogram_csv(out, bins);
  };
  const auto write_kde = [&](const char* name, std::span<const scentvec::KdePoint> points) {
    auto out = open_output((fs::path(opt.out_dir) / name).string());
    scentvec::write_kde_csv(out, points);
  };
  write_hist("real_hist.csv", report.real_hist);
  write_hist("random_hist.csv", report.random_hist);
  write_kde("real_kde.csv", report.real_kde);
  write_kde("random_kde.csv", report.random_kde);

  std::cout << "real perfumes: " << report.real_variances.size() << " analyzed, "
            << report.skipped_real << " skipped\n";
  std::cout << "mann-whitney p = " << report.utest.p_two_sided << " (U = " << report.utest.u
            << ")\n";
}

// ---------------------------------------------------------------------------
// map

struct MapOptions {
  std::string word_table;
  std::string smell_table;
  std::vector<std::string> kinds = {"linear", "mlp", "knn", "dummy"};
  std::size_t folds = 5;
  std::size_t pca_dims = 20;
  bool pca_full_vocab = false;
  bool lowercase_words = true;
  std::size_t knn_k = 5;
  std::size_t mlp_hidden = 100;
  std::size_t mlp_max_epochs = 200;
  std::string out_dir;
  std::string save_model;
  std::string model_kind = "linear";
};

void run_map(const MapOptions& opt, const GlobalOptions& global) {
  const auto word_table = load_table(opt.word_table, "", opt.lowercase_words);
  const auto smell_table = load_table(opt.smell_table, "", false);
  const auto vocab = scentvec::shared_vocab(word_table, smell_table);
  if (vocab.size() < std::max<std::size_t>(opt.folds, 2)) {
    throw scentvec::AnalysisError("map: shared vocabulary has " + std::to_string(vocab.size()) +
                                  " tokens; need at least " +
                                  std::to_string(std::max<std::size_t>(opt.folds, 2)));
  }
  auto [X, Y] = scentvec::aligned_matrices(word_table, smell_table, vocab);

  // By default the PCA is fitted on the shared-vocabulary word vectors, the
  // regressors' actual domain; --pca-full-vocab fits it on the whole table.
  Eigen::MatrixXd pca_input;
  if (opt.pca_full_vocab) {
    pca_input.resize(word_table.size(), word_table.dim());
    for (std::size_t i = 0; i < word_table.size(); ++i) {
      const auto row = word_table.row(i);
      for (std::size_t d = 0; d < word_table.dim(); ++d) {
        pca_input(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = row[d];
      }
    }
  } else {
    pca_input = X;
  }
  const std::size_t max_components = static_cast<std::size_t>(
      std::min<Eigen::Index>(pca_input.rows(), pca_input.cols()));
  const std::size_t n_components = std::min(opt.pca_dims, max_components);
  const auto pca = scentvec::pca_fit(pca_input, n_components);
  const Eigen::MatrixXd x_reduced = scentvec::pca_transform(pca, X);

  std::vector<scentvec::MapKind> kinds;
  for (const auto& name : opt.kinds) kinds.push_back(scentvec::map_kind_from_string(name));

  scentvec::MapHyper hyper;
  hyper.knn_k = opt.knn_k;
  hyper.mlp_hidden = opt.mlp_hidden;
  hyper.mlp_max_epochs = opt.mlp_max_epochs;

  const auto report = scentvec::cross_validate(kinds, x_reduced, Y, opt.folds, global.seed, hyper);

  json j = report;
  j["config"] = {{"pca_dims", n_components},
                 {"pca_full_vocab", opt.pca_full_vocab},
                 {"shared_vocab", vocab.size()},
                 {"knn_k", opt.knn_k},
                 {"mlp_hidden", opt.mlp_hidden},
                 {"mlp_max_epochs", opt.mlp_max_epochs},
                 {"seed", global.seed}};
  {
    auto out = open_output((fs::path(opt.out_dir) / "cv_report.json").string());
    out << j.dump(2) << "\n";
  }
  {
    auto out = open_output((fs::path(opt.out_dir) / "cv_report.csv").string());
    scentvec::write_cv_csv(out, report);
  }
  for (const auto& [kind, entry] : report.per_model) {
    std::cout << scentvec::to_string(kind) << ": mse " << entry.mse_mean << " +- "
              << entry.mse_std << "\n";
  }

  if (!opt.save_model.empty()) {
    scentvec::MapHyper fit_hyper = hyper;
    fit_hyper.seed = scentvec::derive_seed(global.seed, 17);
    auto model = scentvec::fit_map(scentvec::map_kind_from_string(opt.model_kind), x_reduced, Y,
                                   fit_hyper);
    model.pca = pca;
    auto out = open_output(opt.save_model);
    scentvec::save_mapping_model(out, model);
    std::cout << "saved " << opt.model_kind << " model to " << opt.save_model << "\n";
  }
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions {
  std::string model;
  std::string word_table;
  std::string smell_table;
  std::string word;
  std::size_t k = 5;
  bool lowercase_words = true;
  std::string output;
};

void run_predict(const PredictOptions& opt) {
  scentvec::MappingModel model;
  {
    auto in = open_input(opt.model);
    model = scentvec::load_mapping_model(in);
  }
  const auto word_table = load_table(opt.word_table, "", opt.lowercase_words);
  const auto smell_table = load_table(opt.smell_table, "", false);
  const auto prediction =
      scentvec::predict_smell(opt.word, word_table, model, smell_table, opt.k);

  std::ostringstream text;
  text << "word: " << opt.word << " (model: " << scentvec::to_string(model.kind) << ")\n";
  text << "most similar:\n";
  for (const auto& [token, score] : prediction.most_similar.ranked) {
    text << "  " << token << "\t" << score << "\n";
  }
  text << "least similar:\n";
  for (const auto& [token, score] : prediction.least_similar) {
    text << "  " << token << "\t" << score << "\n";
  }
  std::cout << text.str();
  if (!opt.output.empty()) {
    auto out = open_output(opt.output);
    out << "side,rank,token,cosine\n";
    for (std::size_t i = 0; i < prediction.most_similar.ranked.size(); ++i) {
      out << "most," << (i + 1) << ',' << prediction.most_similar.ranked[i].first << ','
          << scentvec::detail::format_csv_value(prediction.most_similar.ranked[i].second) << "\n";
    }
    for (std::size_t i = 0; i < prediction.least_similar.size(); ++i) {
      out << "least," << (i + 1) << ',' << prediction.least_similar[i].first << ','
          << scentvec::detail::format_csv_value(prediction.least_similar[i].second) << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::size_t n_perfumes = 2000;
  std::size_t clusters = 10;
  std::size_t notes_per_cluster = 12;
  std::size_t notes_per_perfume = 8;
  double noise = 0.1;
  std::string output;
  std::string labels;
};

void run_synth(const SynthOptions& opt, const GlobalOptions& global) {
  scentvec::Rng rng(scentvec::derive_seed(global.seed, 50));
  const auto corpus = scentvec::generate_synthetic_corpus(
      opt.n_perfumes, opt.clusters, opt.notes_per_cluster, opt.notes_per_perfume, opt.noise, rng);
  {
    auto out = open_output(opt.output);
    scentvec::write_corpus_jsonl(out, corpus.records);
  }
  if (!opt.labels.empty()) {
    auto out = open_output(opt.labels);
    out << "perfume_id,cluster\n";
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
      out << corpus.records[i].id << ',' << corpus.labels[i] << "\n";
    }
  }
  std::cout << "wrote " << corpus.records.size() << " synthetic perfumes over "
            << opt.clusters << " clusters to " << opt.output << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smell-embedding toolkit: train note embeddings from perfume compositions,\n"
               "compare them against word embeddings, and map between the two spaces"};
  app.set_version_flag("--version", "scentvec 0.1.0");
  app.set_config("--config", "", "read options from a TOML-style config file or run manifest");
  app.require_subcommand(0, 1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "run seed; all randomness derives from it")
      ->capture_default_str();
  app.add_option("--threads", global.threads,
                 "worker threads for training (more than 1 trades reproducibility for speed)")
      ->capture_default_str();

  auto ingest_opt = std::make_shared<IngestOptions>();
  CLI::App* ingest = app.add_subcommand("ingest", "parse, normalize, and filter a perfume corpus");
  ingest->configurable();
  ingest->add_option("--input", ingest_opt->input, "raw corpus file")->required();
  ingest->add_option("--format", ingest_opt->format, "input format")
      ->check(CLI::IsMember({"jsonl", "csv"}))
      ->capture_default_str();
  ingest->add_option("--output", ingest_opt->output, "normalized corpus (JSONL)")->required();
  ingest->add_option("--stats", ingest_opt->stats_path,
                     "stats JSON path (default: <output>.stats.json)");
  ingest->add_option("--min-notes", ingest_opt->min_notes, "minimum notes per perfume")
      ->capture_default_str();
  ingest->add_option("--top-k", ingest_opt->top_k, "number of most frequent notes to report")
      ->capture_default_str();

  auto train_opt = std::make_shared<TrainOptions>();
  CLI::App* train = app.add_subcommand("train", "train smell embeddings from a normalized corpus");
  train->configurable();
  train->add_option("--corpus", train_opt->corpus, "normalized corpus (JSONL)")->required();
  train->add_option("--out-prefix", train_opt->out_prefix,
                    "output prefix; writes <prefix>-d<dim>.vec per dimensionality")
      ->required();
  train->add_option("--dims", train_opt->dims, "embedding dimensionalities")
      ->delimiter(',')
      ->capture_default_str();
  train->add_option("--seq-length", train_opt->seq_length, "sampled sequence length per perfume")
      ->capture_default_str();
  train->add_option("--window", train_opt->window, "context window radius")->capture_default_str();
  train->add_option("--min-count", train_opt->min_count, "vocabulary frequency floor")
      ->capture_default_str();
  train->add_option("--negatives", train_opt->negatives, "negative samples per target")
      ->capture_default_str();
  train->add_option("--epochs", train_opt->epochs, "training epochs")->capture_default_str();
  train->add_option("--lr-start", train_opt->lr_start, "initial learning rate")
      ->capture_default_str();
  train->add_option("--lr-end", train_opt->lr_end, "final learning rate")->capture_default_str();
  train->add_option("--subsample", train_opt->subsample,
                    "subsampling threshold (0 disables subsampling)")
      ->capture_default_str();

  auto neighbors_opt = std::make_shared<NeighborsOptions>();
  CLI::App* neighbors_cmd =
      app.add_subcommand("neighbors", "most similar tokens by cosine similarity");
  neighbors_cmd->configurable();
  neighbors_cmd->add_option("--table", neighbors_opt->table, "embedding table")->required();
  neighbors_cmd->add_option("--zip-member", neighbors_opt->zip_member,
                            "member name when the table is a zip archive");
  neighbors_cmd->add_option("--query", neighbors_opt->query, "query token")->required();
  neighbors_cmd->add_option("--k", neighbors_opt->k, "neighbors to return")->capture_default_str();
  neighbors_cmd->add_option("--output", neighbors_opt->output, "CSV output (default: stdout)");
  neighbors_cmd->add_flag("--lowercase", neighbors_opt->lowercase,
                          "lowercase table tokens on load");

  auto exp1a_opt = std::make_shared<Exp1aOptions>();
  CLI::App* exp1a = app.add_subcommand(
      "exp1a", "per-word RBO between smell and word similarity rankings vs a shuffled baseline");
  exp1a->configurable();
  exp1a->add_option("--smell-tables", exp1a_opt->smell_tables, "smell embedding tables")
      ->required()
      ->delimiter(',');
  exp1a->add_option("--word-tables", exp1a_opt->word_tables, "word embedding tables")
      ->required()
      ->delimiter(',');
  exp1a->add_option("--p", exp1a_opt->p, "RBO persistence parameter")->capture_default_str();
  exp1a->add_option("--depth", exp1a_opt->depth, "RBO evaluation depth (0 = full list)")
      ->capture_default_str();
  exp1a->add_option("--rbo-variant", exp1a_opt->variant, "RBO variant")
      ->check(CLI::IsMember({"ext", "min"}))
      ->capture_default_str();
  exp1a->add_flag("--lowercase-words,!--no-lowercase-words", exp1a_opt->lowercase_words,
                  "lowercase word-table tokens on load")
      ->capture_default_str();
  exp1a->add_option("--out-dir", exp1a_opt->out_dir, "report directory")->required();

  auto exp1b_opt = std::make_shared<Exp1bOptions>();
  CLI::App* exp1b = app.add_subcommand(
      "exp1b", "correlate per-word RBO with olfactory association scores");
  exp1b->configurable();
  exp1b->add_option("--report", exp1b_opt->report, "exp1a report.json")->required();
  exp1b->add_option("--word-table", exp1b_opt->word_table, "word embedding table")->required();
  exp1b->add_option("--seed-words", exp1b_opt->seed_words_path,
                    "file with one olfaction seed word per line (default: built-in list)");
  exp1b->add_flag("--lowercase-words,!--no-lowercase-words", exp1b_opt->lowercase_words,
                  "lowercase word-table tokens on load")
      ->capture_default_str();
  exp1b->add_option("--out-dir", exp1b_opt->out_dir, "report directory")->required();

  auto exp2_opt = std::make_shared<Exp2Options>();
  CLI::App* exp2 = app.add_subcommand(
      "exp2", "compare note-spread variance of real vs random perfumes");
  exp2->configurable();
  exp2->add_option("--table", exp2_opt->table, "smell embedding table")->required();
  exp2->add_option("--zip-member", exp2_opt->zip_member,
                   "member name when the table is a zip archive");
  exp2->add_option("--corpus", exp2_opt->corpus, "normalized corpus (JSONL)")->required();
  exp2->add_option("--bins", exp2_opt->bins, "histogram bins")->capture_default_str();
  exp2->add_option("--kde-grid", exp2_opt->kde_grid, "KDE grid points")->capture_default_str();
  exp2->add_option("--out-dir", exp2_opt->out_dir, "report directory")->required();

  auto map_opt = std::make_shared<MapOptions>();
  CLI::App* map_cmd = app.add_subcommand(
      "map", "cross-validate word-space to smell-space regressors");
  map_cmd->configurable();
  map_cmd->add_option("--word-table", map_opt->word_table, "word embedding table")->required();
  map_cmd->add_option("--smell-table", map_opt->smell_table, "smell embedding table")->required();
  map_cmd->add_option("--kinds", map_opt->kinds, "regressor kinds")
      ->delimiter(',')
      ->capture_default_str();
  map_cmd->add_option("--folds", map_opt->folds, "cross-validation folds")->capture_default_str();
  map_cmd->add_option("--pca-dims", map_opt->pca_dims, "PCA output dimensionality")
      ->capture_default_str();
  map_cmd->add_flag("--pca-full-vocab", map_opt->pca_full_vocab,
                    "fit the PCA on the full word vocabulary instead of the shared one");
  map_cmd->add_flag("--lowercase-words,!--no-lowercase-words", map_opt->lowercase_words,
                    "lowercase word-table tokens on load")
      ->capture_default_str();
  map_cmd->add_option("--knn-k", map_opt->knn_k, "neighbors for the knn regressor")
      ->capture_default_str();
  map_cmd->add_option("--mlp-hidden", map_opt->mlp_hidden, "MLP hidden units")
      ->capture_default_str();
  map_cmd->add_option("--mlp-max-epochs", map_opt->mlp_max_epochs, "MLP epoch cap")
      ->capture_default_str();
  map_cmd->add_option("--out-dir", map_opt->out_dir, "report directory")->required();
  map_cmd->add_option("--save-model", map_opt->save_model,
                      "also fit --model-kind on all shared data and save it here");
  map_cmd->add_option("--model-kind", map_opt->model_kind, "kind for --save-model")
      ->check(CLI::IsMember({"linear", "mlp", "knn", "dummy"}))
      ->capture_default_str();

  auto predict_opt = std::make_shared<PredictOptions>();
  CLI::App* predict = app.add_subcommand(
      "predict", "predict the smell-space neighbors of a word through a saved mapping model");
  predict->configurable();
  predict->add_option("--model", predict_opt->model, "saved mapping model (JSON)")->required();
  predict->add_option("--word-table", predict_opt->word_table, "word embedding table")->required();
  predict->add_option("--smell-table", predict_opt->smell_table, "smell embedding table")
      ->required();
  predict->add_option("--word", predict_opt->word, "query word")->required();
  predict->add_option("--k", predict_opt->k, "list length")->capture_default_str();
  predict->add_flag("--lowercase-words,!--no-lowercase-words", predict_opt->lowercase_words,
                    "lowercase word-table tokens on load")
      ->capture_default_str();
  predict->add_option("--output", predict_opt->output, "CSV output (default: stdout only)");

  auto synth_opt = std::make_shared<SynthOptions>();
  CLI::App* synth = app.add_subcommand("synth", "generate a clustered synthetic corpus");
  synth->configurable();
  synth->add_option("--n-perfumes", synth_opt->n_perfumes, "number of perfumes")
      ->capture_default_str();
  synth->add_option("--clusters", synth_opt->clusters, "number of note clusters")
      ->capture_default_str();
  synth->add_option("--notes-per-cluster", synth_opt->notes_per_cluster, "notes per cluster")
      ->capture_default_str();
  synth->add_option("--notes-per-perfume", synth_opt->notes_per_perfume, "notes per perfume")
      ->capture_default_str();
  synth->add_option("--noise", synth_opt->noise, "cross-cluster note probability")
      ->capture_default_str();
  synth->add_option("--output", synth_opt->output, "corpus output (JSONL)")->required();
  synth->add_option("--labels", synth_opt->labels, "cluster label CSV output");

  ingest->callback([&] {
    run_ingest(*ingest_opt);
    write_manifest(ingest_opt->output + ".manifest.toml", app, *ingest);
  });
  train->callback([&] {
    run_train(*train_opt, global);
    write_manifest(train_opt->out_prefix + ".manifest.toml", app, *train);
  });
  neighbors_cmd->callback([&] {
    run_neighbors(*neighbors_opt);
    if (!neighbors_opt->output.empty()) {
      write_manifest(neighbors_opt->output + ".manifest.toml", app, *neighbors_cmd);
    }
  });
  exp1a->callback([&] {
    run_exp1a(*exp1a_opt, global);
    write_manifest((fs::path(exp1a_opt->out_dir) / "manifest.toml").string(), app, *exp1a);
  });
  exp1b->callback([&] {
    run_exp1b(*exp1b_opt);
    write_manifest((fs::path(exp1b_opt->out_dir) / "manifest.toml").string(), app, *exp1b);
  });
  exp2->callback([&] {
    run_exp2(*exp2_opt, global);
    write_manifest((fs::path(exp2_opt->out_dir) / "manifest.toml").string(), app, *exp2);
  });
  map_cmd->callback([&] {
    run_map(*map_opt, global);
    write_manifest((fs::path(map_opt->out_dir) / "manifest.toml").string(), app, *map_cmd);
  });
  predict->callback([&] {
    run_predict(*predict_opt);
    if (!predict_opt->output.empty()) {
      write_manifest(predict_opt->output + ".manifest.toml", app, *predict);
    }
  });
  synth->callback([&] {
    run_synth(*synth_opt, global);
    write_manifest(synth_opt->output + ".manifest.toml", app, *synth);
  });

  try {
    app.parse(argc, argv);
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const scentvec::AnalysisError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const scentvec::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
