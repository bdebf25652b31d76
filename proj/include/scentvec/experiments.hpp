#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scentvec/corpus.hpp"
#include "scentvec/embedding.hpp"
#include "scentvec/errors.hpp"
#include "scentvec/rbo.hpp"
#include "scentvec/rng.hpp"
#include "scentvec/stats.hpp"

namespace scentvec {

enum class RboVariant { ext, min };

struct RboGridRow {
  std::size_t smell_dim = 0;
  std::string smell_table;
  std::string word_corpus;
  double mean_rbo = 0.0;
  double mean_rbo_random = 0.0;
  double p_value = 1.0;
};

/// Grid results plus the per-word values of the best (highest mean RBO) cell.
/// best_words/best_rbo/best_rbo_random are aligned.
struct RboGridReport {
  std::vector<RboGridRow> rows;
  std::size_t best_row = 0;
  std::vector<std::string> best_words;
  std::vector<double> best_rbo;
  std::vector<double> best_rbo_random;
};

namespace detail {

// Cosine-similarity rankings inside a vocabulary subset: for every token,
// the other subset tokens ordered best-first, ties broken by token text.
// Rows hold indices into `vocab`.
inline std::vector<std::vector<std::uint32_t>> subset_rankings(
    const EmbeddingTable& table, std::span<const std::string> vocab) {
  const std::size_t n = vocab.size();
  const std::size_t dim = table.dim();
  std::vector<double> rows(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = table.vec(vocab[i]);
    double norm_sq = 0.0;
    for (const double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    if (norm < 1e-12) {
      throw AnalysisError("degenerate vector for token \"" + vocab[i] + "\"");
    }
    for (std::size_t d = 0; d < dim; ++d) rows[i * dim + d] = v[d] / norm;
  }

  std::vector<std::vector<std::uint32_t>> rankings(n);
  std::vector<double> scores(n);
  std::vector<std::uint32_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = &rows[i * dim];
    for (std::size_t j = 0; j < n; ++j) {
      const double* b = &rows[j * dim];
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += a[d] * b[d];
      scores[j] = dot;
    }
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(static_cast<std::uint32_t>(j));
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a_idx, std::uint32_t b_idx) {
      if (scores[a_idx] != scores[b_idx]) return scores[a_idx] > scores[b_idx];
      return vocab[a_idx] < vocab[b_idx];
    });
    rankings[i] = order;
  }
  return rankings;
}

inline double rbo_by_variant(std::span<const std::uint32_t> s, std::span<const std::uint32_t> t,
                             const RboConfig& config, RboVariant variant) {
  return variant == RboVariant::ext ? rbo_ext(s, t, config) : rbo_min(s, t, config);
}

}  // namespace detail

/// For every (smell table, word table) pair: per-word RBO between the two
/// full similarity rankings over the shared vocabulary, a shuffled-assignment
/// baseline on the smell side, and a Mann-Whitney U p-value between the two
/// RBO distributions. One shuffle permutation is drawn per smell table per
/// run seed.
inline RboGridReport run_exp1a(std::span<const EmbeddingTable> smell_tables,
                               std::span<const EmbeddingTable> word_tables,
                               const RboConfig& rbo_config, std::uint64_t seed,
                               RboVariant variant = RboVariant::ext) {
  if (smell_tables.empty() || word_tables.empty()) {
    throw ContractError("exp1a: need at least one smell table and one word table");
  }

  RboGridReport report;
  std::vector<std::vector<std::string>> cell_words;
  std::vector<std::vector<double>> cell_rbo;
  std::vector<std::vector<double>> cell_random;

  for (std::size_t si = 0; si < smell_tables.size(); ++si) {
    const EmbeddingTable& smell = smell_tables[si];
    Rng shuffle_rng(derive_seed(seed, 40, si));
    const EmbeddingTable shuffled = shuffle_assignment(smell, shuffle_rng);

    for (const EmbeddingTable& word : word_tables) {
      const auto vocab = shared_vocab(smell, word);
      if (vocab.size() < 2) {
        throw AnalysisError("exp1a: shared vocabulary of \"" + smell.name() + "\" and \"" +
                            word.name() + "\" has " + std::to_string(vocab.size()) +
                            " tokens; need at least 2");
      }
      const auto smell_rankings = detail::subset_rankings(smell, vocab);
      const auto word_rankings = detail::subset_rankings(word, vocab);
      const auto null_rankings = detail::subset_rankings(shuffled, vocab);

      std::vector<double> rbo_values(vocab.size());
      std::vector<double> random_values(vocab.size());
      double rbo_sum = 0.0;
      double random_sum = 0.0;
      for (std::size_t w = 0; w < vocab.size(); ++w) {
        rbo_values[w] =
            detail::rbo_by_variant(smell_rankings[w], word_rankings[w], rbo_config, variant);
        random_values[w] =
            detail::rbo_by_variant(null_rankings[w], word_rankings[w], rbo_config, variant);
        rbo_sum += rbo_values[w];
        random_sum += random_values[w];
      }
      const auto utest = mann_whitney_u(rbo_values, random_values);

      report.rows.push_back({smell.dim(), smell.name(), word.name(),
                             rbo_sum / static_cast<double>(vocab.size()),
                             random_sum / static_cast<double>(vocab.size()), utest.p_two_sided});
      cell_words.push_back(vocab);
      cell_rbo.push_back(std::move(rbo_values));
      cell_random.push_back(std::move(random_values));
    }
  }

  report.best_row = 0;
  for (std::size_t r = 1; r < report.rows.size(); ++r) {
    if (report.rows[r].mean_rbo > report.rows[report.best_row].mean_rbo) report.best_row = r;
  }
  report.best_words = std::move(cell_words[report.best_row]);
  report.best_rbo = std::move(cell_rbo[report.best_row]);
  report.best_rbo_random = std::move(cell_random[report.best_row]);
  return report;
}

/// Built-in olfaction cue words; replaceable from a file via the CLI.
inline const std::vector<std::string>& default_olfaction_seeds() {
  static const std::vector<std::string> seeds = {"smell", "odor",    "odour",     "scent",
                                                 "aroma", "fragrance", "stench",  "stink",
                                                 "perfume", "whiff"};
  return seeds;
}

struct AssociationScores {
  std::vector<std::string> seeds_used;
  std::size_t seeds_missing = 0;
  std::vector<std::pair<std::string, double>> scores;  // target order preserved
};

/// Cosine of each target word against the mean vector of the olfaction seed
/// words. Seeds missing from the table are skipped and counted; targets must
/// all be present.
inline AssociationScores olfactory_association(const EmbeddingTable& word_table,
                                               std::span<const std::string> seed_words,
                                               std::span<const std::string> targets) {
  AssociationScores result;
  std::vector<double> mean(word_table.dim(), 0.0);
  for (const auto& seed : seed_words) {
    if (!word_table.contains(seed)) {
      ++result.seeds_missing;
      continue;
    }
    const auto v = word_table.vec(seed);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += v[d];
    result.seeds_used.push_back(seed);
  }
  if (result.seeds_used.empty()) {
    throw AnalysisError("olfactory_association: none of the seed words is in the table");
  }
  const double inv = 1.0 / static_cast<double>(result.seeds_used.size());
  for (double& v : mean) v *= inv;

  result.scores.reserve(targets.size());
  for (const auto& target : targets) {
    result.scores.emplace_back(target, cosine(word_table.vec(target), mean));
  }
  return result;
}

/// Spearman correlation between per-word RBO values and olfactory-association
/// scores, over the words present in both.
inline SpearmanResult run_exp1b(std::span<const std::string> rbo_words,
                                std::span<const double> rbo_values,
                                const AssociationScores& association) {
  if (rbo_words.size() != rbo_values.size()) {
    throw ContractError("exp1b: word and RBO lists must be aligned");
  }
  std::map<std::string, double> score_by_word;
  for (const auto& [word, score] : association.scores) score_by_word.emplace(word, score);

  std::vector<double> x, y;
  for (std::size_t i = 0; i < rbo_words.size(); ++i) {
    const auto it = score_by_word.find(rbo_words[i]);
    if (it == score_by_word.end()) continue;
    x.push_back(rbo_values[i]);
    y.push_back(it->second);
  }
  if (x.size() < 3) {
    throw AnalysisError("exp1b: fewer than 3 words carry both an RBO and an association score");
  }
  return spearman(x, y);
}

struct NoteSpread {
  double variance = 0.0;
  std::size_t notes_used = 0;
  std::size_t notes_skipped = 0;  // notes absent from the embedding table
};

/// Population variance of the Euclidean distances from each embeddable note
/// vector to the perfume centroid. Duplicate notes count once.
inline NoteSpread perfume_variance(const EmbeddingTable& table, const PerfumeRecord& record) {
  const auto notes = note_union(record);
  std::vector<std::size_t> rows;
  rows.reserve(notes.size());
  for (const auto& note : notes) {
    if (table.contains(note)) rows.push_back(table.index_of(note));
  }
  NoteSpread spread;
  spread.notes_used = rows.size();
  spread.notes_skipped = notes.size() - rows.size();
  if (rows.size() < 2) {
    throw AnalysisError("perfume \"" + record.id + "\": fewer than 2 embeddable notes");
  }

  const std::size_t dim = table.dim();
  std::vector<double> centroid(dim, 0.0);
  for (const std::size_t row : rows) {
    const auto v = table.row(row);
    for (std::size_t d = 0; d < dim; ++d) centroid[d] += v[d];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : centroid) v *= inv;

  double dist_sum = 0.0;
  double dist_sq_sum = 0.0;
  for (const std::size_t row : rows) {
    const auto v = table.row(row);
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = v[d] - centroid[d];
      sq += diff * diff;
    }
    const double dist = std::sqrt(sq);
    dist_sum += dist;
    dist_sq_sum += dist * dist;
  }
  const double mean = dist_sum * inv;
  spread.variance = std::max(0.0, dist_sq_sum * inv - mean * mean);
  return spread;
}

namespace detail {

// Fenwick tree over nonnegative weights supporting O(log n) draws by
// cumulative weight and O(log n) weight removal/restore; the workhorse for
// weighted sampling without replacement.
class WeightedSampler {
 public:
  explicit WeightedSampler(std::span<const double> weights)
      : n_(weights.size()), tree_(weights.size() + 1, 0.0), weights_(weights.begin(), weights.end()) {
    for (std::size_t i = 0; i < n_; ++i) {
      if (weights_[i] < 0.0) throw ContractError("weighted sampler: negative weight");
      add(i, weights_[i]);
    }
    log2_floor_ = 1;
    while ((log2_floor_ << 1) <= n_) log2_floor_ <<= 1;
  }

  std::size_t draw_and_remove(Rng& rng) {
    const double total = prefix_total();
    if (total <= 0.0) throw ContractError("weighted sampler: distribution exhausted");
    const double target = uniform_unit(rng) * total;
    std::size_t idx = descend(target);
    if (idx >= n_ || weights_[idx] <= 0.0) {
      idx = last_positive();
    }
    removed_.emplace_back(idx, weights_[idx]);
    add(idx, -weights_[idx]);
    weights_[idx] = 0.0;
    return idx;
  }

  /// Puts back everything removed since construction or the last restore.
  void restore() {
    for (const auto& [idx, weight] : removed_) {
      add(idx, weight);
      weights_[idx] = weight;
    }
    removed_.clear();
  }

  std::size_t size() const noexcept { return n_; }

 private:
  void add(std::size_t i, double delta) {
    for (std::size_t pos = i + 1; pos <= n_; pos += pos & (~pos + 1)) tree_[pos] += delta;
  }

  double prefix_total() const {
    double total = 0.0;
    for (std::size_t pos = n_; pos > 0; pos -= pos & (~pos + 1)) total += tree_[pos];
    return total;
  }

  // Largest index whose cumulative weight is <= target, then one past it.
  std::size_t descend(double target) const {
    std::size_t pos = 0;
    for (std::size_t step = log2_floor_; step > 0; step >>= 1) {
      const std::size_t next = pos + step;
      if (next <= n_ && tree_[next] <= target) {
        target -= tree_[next];
        pos = next;
      }
    }
    return pos;
  }

  std::size_t last_positive() const {
    for (std::size_t i = n_; i-- > 0;) {
      if (weights_[i] > 0.0) return i;
    }
    throw ContractError("weighted sampler: distribution exhausted");
  }

  std::size_t n_;
  std::size_t log2_floor_ = 1;
  std::vector<double> tree_;
  std::vector<double> weights_;
  std::vector<std::pair<std::size_t, double>> removed_;
};

// Record shape for generated perfumes: first third top, second heart, rest base.
inline void split_note_list(std::vector<std::string> notes, PerfumeRecord& record) {
  const std::size_t k = notes.size();
  const std::size_t top_end = (k + 2) / 3;
  const std::size_t heart_end = top_end + (k - top_end + 1) / 2;
  record.top.assign(notes.begin(), notes.begin() + top_end);
  record.heart.assign(notes.begin() + top_end, notes.begin() + heart_end);
  record.base.assign(notes.begin() + heart_end, notes.end());
}

}  // namespace detail

/// Random perfumes with the given note counts: notes sampled without
/// replacement, probability proportional to the supplied weights.
inline std::vector<PerfumeRecord> generate_random_perfumes(
    std::span<const std::size_t> sizes,
    std::span<const std::pair<std::string, double>> note_weights, Rng& rng) {
  std::vector<std::string> tokens;
  std::vector<double> weights;
  for (const auto& [token, weight] : note_weights) {
    if (weight > 0.0) {
      tokens.push_back(token);
      weights.push_back(weight);
    }
  }
  if (tokens.empty()) throw ContractError("generate_random_perfumes: empty note distribution");

  detail::WeightedSampler sampler(weights);
  std::vector<PerfumeRecord> out;
  out.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::size_t k = sizes[i];
    if (k > tokens.size()) {
      throw ContractError("generate_random_perfumes: cannot draw " + std::to_string(k) +
                          " distinct notes from a vocabulary of " + std::to_string(tokens.size()));
    }
    std::vector<std::string> notes;
    notes.reserve(k);
    for (std::size_t draw = 0; draw < k; ++draw) {
      notes.push_back(tokens[sampler.draw_and_remove(rng)]);
    }
    sampler.restore();

    PerfumeRecord record;
    record.id = "random-" + std::to_string(i);
    record.name = "random perfume " + std::to_string(i);
    detail::split_note_list(std::move(notes), record);
    out.push_back(std::move(record));
  }
  return out;
}

/// One frequency-matched random perfume per real record (same note count).
inline std::vector<PerfumeRecord> generate_random_perfumes(
    std::span<const PerfumeRecord> real,
    std::span<const std::pair<std::string, double>> note_weights, Rng& rng) {
  std::vector<std::size_t> sizes;
  sizes.reserve(real.size());
  for (const auto& record : real) sizes.push_back(note_union(record).size());
  return generate_random_perfumes(sizes, note_weights, rng);
}

struct AestheticsReport {
  std::vector<double> real_variances;
  std::vector<double> random_variances;
  std::size_t skipped_real = 0;
  std::size_t skipped_random = 0;
  UTestResult utest;
  std::vector<HistogramBin> real_hist, random_hist;
  std::vector<KdePoint> real_kde, random_kde;  // empty when a group is degenerate
};

/// Compares how evenly real perfumes spread around their centroid against
/// frequency-matched random perfumes. Each analyzable real perfume gets one
/// random partner with the same number of embeddable notes, sampled from the
/// per-perfume note frequencies of the real corpus (restricted to notes the
/// table covers). Perfumes with fewer than 2 embeddable notes are skipped
/// and counted.
inline AestheticsReport run_exp2(const EmbeddingTable& table,
                                 std::span<const PerfumeRecord> real, Rng& rng,
                                 std::size_t hist_bins = 50, std::size_t kde_grid = 200,
                                 std::span<const PerfumeRecord> random_override = {}) {
  AestheticsReport report;
  std::vector<std::size_t> matched_sizes;
  for (const auto& record : real) {
    try {
      const auto spread = perfume_variance(table, record);
      report.real_variances.push_back(spread.variance);
      matched_sizes.push_back(spread.notes_used);
    } catch (const AnalysisError&) {
      ++report.skipped_real;
    }
  }
  if (report.real_variances.empty()) {
    throw AnalysisError("exp2: no perfume has at least 2 embeddable notes");
  }

  std::vector<PerfumeRecord> generated;
  std::span<const PerfumeRecord> random_records = random_override;
  if (random_override.empty()) {
    std::map<std::string, double> frequency;  // ordered: deterministic weight layout
    for (const auto& record : real) {
      for (const auto& note : note_union(record)) {
        if (table.contains(note)) frequency[note] += 1.0;
      }
    }
    std::vector<std::pair<std::string, double>> weights(frequency.begin(), frequency.end());
    generated = generate_random_perfumes(matched_sizes, weights, rng);
    random_records = generated;
  }

  for (const auto& record : random_records) {
    try {
      report.random_variances.push_back(perfume_variance(table, record).variance);
    } catch (const AnalysisError&) {
      ++report.skipped_random;
    }
  }
  if (report.random_variances.empty()) {
    throw AnalysisError("exp2: no random perfume has at least 2 embeddable notes");
  }

  report.utest = mann_whitney_u(report.real_variances, report.random_variances);
  report.real_hist = histogram(report.real_variances, hist_bins);
  report.random_hist = histogram(report.random_variances, hist_bins);
  const auto try_kde = [&](std::span<const double> values) -> std::vector<KdePoint> {
    try {
      return kde(values, kde_grid);
    } catch (const AnalysisError&) {
      return {};
    }
  };
  report.real_kde = try_kde(report.real_variances);
  report.random_kde = try_kde(report.random_variances);
  return report;
}

struct SyntheticCorpus {
  std::vector<PerfumeRecord> records;
  std::vector<std::size_t> labels;  // home cluster per record
  std::vector<std::string> notes;   // full universe, cluster-major
  std::size_t n_clusters = 0;
  std::size_t notes_per_cluster = 0;
};

/// Clustered corpus generator for desk-scale pipeline checks. Each perfume
/// samples distinct notes from one cluster's pool; every note independently
/// defects to a uniform out-of-cluster note with probability
/// `cross_cluster_noise`.
inline SyntheticCorpus generate_synthetic_corpus(std::size_t n_perfumes, std::size_t n_clusters,
                                                 std::size_t notes_per_cluster,
                                                 std::size_t notes_per_perfume,
                                                 double cross_cluster_noise, Rng& rng) {
  if (n_perfumes == 0 || n_clusters == 0 || notes_per_cluster == 0 || notes_per_perfume == 0) {
    throw ContractError("generate_synthetic_corpus: all counts must be positive");
  }
  if (!(cross_cluster_noise >= 0.0 && cross_cluster_noise < 1.0)) {
    throw ContractError("generate_synthetic_corpus: noise must lie in [0, 1)");
  }
  if (notes_per_perfume > notes_per_cluster) {
    throw ContractError("generate_synthetic_corpus: cannot draw " +
                        std::to_string(notes_per_perfume) +
                        " distinct notes from a cluster pool of " +
                        std::to_string(notes_per_cluster));
  }
  if (cross_cluster_noise > 0.0 && n_clusters < 2) {
    throw ContractError("generate_synthetic_corpus: cross-cluster noise needs >= 2 clusters");
  }

  SyntheticCorpus corpus;
  corpus.n_clusters = n_clusters;
  corpus.notes_per_cluster = notes_per_cluster;
  const std::size_t total_notes = n_clusters * notes_per_cluster;
  corpus.notes.reserve(total_notes);
  for (std::size_t c = 0; c < n_clusters; ++c) {
    for (std::size_t j = 0; j < notes_per_cluster; ++j) {
      corpus.notes.push_back("c" + std::to_string(c) + "n" + std::to_string(j));
    }
  }

  std::vector<std::size_t> pool(notes_per_cluster);
  for (std::size_t p = 0; p < n_perfumes; ++p) {
    const std::size_t cluster = static_cast<std::size_t>(uniform_index(rng, n_clusters));
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // partial Fisher-Yates: first notes_per_perfume entries become the draw
    for (std::size_t i = 0; i < notes_per_perfume; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(uniform_index(rng, notes_per_cluster - i));
      std::swap(pool[i], pool[j]);
    }

    std::vector<std::string> notes;
    notes.reserve(notes_per_perfume);
    for (std::size_t i = 0; i < notes_per_perfume; ++i) {
      std::size_t global = cluster * notes_per_cluster + pool[i];
      if (cross_cluster_noise > 0.0 && uniform_unit(rng) < cross_cluster_noise) {
        const std::size_t other = static_cast<std::size_t>(
            uniform_index(rng, total_notes - notes_per_cluster));
        global = other >= cluster * notes_per_cluster ? other + notes_per_cluster : other;
      }
      notes.push_back(corpus.notes[global]);
    }
    std::sort(notes.begin(), notes.end());
    notes.erase(std::unique(notes.begin(), notes.end()), notes.end());

    PerfumeRecord record;
    record.id = "synth-" + std::to_string(p);
    record.name = "synthetic " + std::to_string(p);
    detail::split_note_list(std::move(notes), record);
    corpus.records.push_back(std::move(record));
    corpus.labels.push_back(cluster);
  }
  return corpus;
}

struct ClusterCosines {
  double within = 0.0;
  double between = 0.0;
  std::size_t within_pairs = 0;
  std::size_t between_pairs = 0;
};

/// Mean cosine over same-cluster and cross-cluster note pairs, for notes the
/// table covers.
inline ClusterCosines cluster_cosines(const EmbeddingTable& table, const SyntheticCorpus& corpus) {
  std::vector<std::pair<std::size_t, std::size_t>> present;  // (table row, cluster)
  for (std::size_t i = 0; i < corpus.notes.size(); ++i) {
    if (table.contains(corpus.notes[i])) {
      present.emplace_back(table.index_of(corpus.notes[i]), i / corpus.notes_per_cluster);
    }
  }
  ClusterCosines result;
  double within_sum = 0.0;
  double between_sum = 0.0;
  for (std::size_t i = 0; i < present.size(); ++i) {
    for (std::size_t j = i + 1; j < present.size(); ++j) {
      const double c = cosine(table.row(present[i].first), table.row(present[j].first));
      if (present[i].second == present[j].second) {
        within_sum += c;
        ++result.within_pairs;
      } else {
        between_sum += c;
        ++result.between_pairs;
      }
    }
  }
  if (result.within_pairs > 0) result.within = within_sum / static_cast<double>(result.within_pairs);
  if (result.between_pairs > 0) {
    result.between = between_sum / static_cast<double>(result.between_pairs);
  }
  return result;
}

}  // namespace scentvec
