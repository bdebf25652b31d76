#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scentvec/corpus.hpp"
#include "scentvec/embedding.hpp"
#include "scentvec/errors.hpp"
#include "scentvec/rng.hpp"

namespace scentvec {

/// Vocabulary over note sequences plus the trainer bookkeeping: subsampling
/// keep-probabilities and the count^0.75 noise distribution.
struct Vocabulary {
  std::vector<std::string> tokens;  // count-descending, ties lexicographic
  std::vector<std::int64_t> counts;
  std::vector<double> keep_probs;  // in (0, 1]
  std::vector<double> noise_dist;  // sums to 1
  std::vector<double> noise_cdf;
  detail::TokenIndex index;
  std::int64_t total_count = 0;

  std::size_t size() const noexcept { return tokens.size(); }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(std::string_view token) const {
    const auto it = index.find(token);
    return it == index.end() ? npos : it->second;
  }
};

/// Counts tokens, drops those below `min_count`, and derives keep
/// probabilities and the unigram^0.75 noise distribution.
///
///   keep_prob(w) = min(1, (sqrt(f/t) + 1) * t / f)   with f = count/total
///
/// so tokens at or below the threshold frequency t are always kept.
/// subsample_t == 0 disables subsampling.
inline Vocabulary build_vocab(std::span<const NoteSequence> sequences, std::size_t min_count,
                              double subsample_t) {
  if (sequences.empty()) throw ContractError("build_vocab: no sequences");
  if (subsample_t < 0.0) throw ContractError("build_vocab: subsample threshold must be >= 0");

  std::unordered_map<std::string, std::int64_t> raw_counts;
  for (const auto& sequence : sequences) {
    for (const auto& token : sequence.tokens) ++raw_counts[token];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [token, count] : raw_counts) {
    if (count >= static_cast<std::int64_t>(min_count)) kept.emplace_back(token, count);
  }
  if (kept.empty()) {
    throw AnalysisError("build_vocab: no token reaches min_count=" + std::to_string(min_count));
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.tokens.reserve(kept.size());
  vocab.counts.reserve(kept.size());
  for (auto& [token, count] : kept) {
    vocab.index.emplace(token, vocab.tokens.size());
    vocab.tokens.push_back(std::move(token));
    vocab.counts.push_back(count);
    vocab.total_count += count;
  }

  vocab.keep_probs.resize(vocab.size());
  vocab.noise_dist.resize(vocab.size());
  vocab.noise_cdf.resize(vocab.size());
  const double total = static_cast<double>(vocab.total_count);
  double noise_total = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const double f = static_cast<double>(vocab.counts[i]) / total;
    vocab.keep_probs[i] =
        subsample_t == 0.0
            ? 1.0
            : std::min(1.0, (std::sqrt(f / subsample_t) + 1.0) * subsample_t / f);
    vocab.noise_dist[i] = std::pow(static_cast<double>(vocab.counts[i]), 0.75);
    noise_total += vocab.noise_dist[i];
  }
  double running = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    vocab.noise_dist[i] /= noise_total;
    running += vocab.noise_dist[i];
    vocab.noise_cdf[i] = running;
  }
  return vocab;
}

/// Trainer knobs. Defaults follow the usual word2vec defaults: window 5,
/// min_count 5, five negatives, five epochs, linear learning-rate decay from
/// 0.025 to 1e-4, subsampling threshold 1e-3, CBOW with mean-of-context.
struct TrainConfig {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t min_count = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr_start = 0.025;
  double lr_end = 1e-4;
  double subsample_t = 1e-3;
  std::uint64_t seed = 1;
  // threads > 1 applies updates lock-free; results then vary run to run even
  // with a fixed seed. threads == 1 is bit-reproducible.
  std::size_t threads = 1;

  void validate() const {
    if (dim < 1) throw ContractError("train: dim must be at least 1");
    if (window < 1) throw ContractError("train: window must be at least 1");
    if (epochs < 1) throw ContractError("train: epochs must be at least 1");
    if (!(lr_start > lr_end && lr_end > 0.0)) {
      throw ContractError("train: require lr_start > lr_end > 0");
    }
    if (threads < 1) throw ContractError("train: threads must be at least 1");
  }
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// Clipped context range around position i: [i - radius, i + radius] within
// the sentence, center excluded by the caller.
inline std::pair<std::size_t, std::size_t> context_bounds(std::size_t length, std::size_t i,
                                                          std::size_t radius) {
  const std::size_t lo = i > radius ? i - radius : 0;
  const std::size_t hi = std::min(length - 1, i + radius);
  return {lo, hi};
}

// Input vectors start uniform in [-0.5/dim, 0.5/dim]; output vectors at zero.
inline std::vector<double> init_input_vectors(std::size_t rows, std::size_t dim,
                                              std::uint64_t seed) {
  std::vector<double> vectors(rows * dim);
  Rng rng(derive_seed(seed, 0));
  const double bound = 0.5 / static_cast<double>(dim);
  for (double& v : vectors) v = uniform_real(rng, -bound, bound);
  return vectors;
}

}  // namespace detail

/// Context positions used for center `i` with effective radius `radius` in a
/// sentence of `length` tokens.
inline std::vector<std::size_t> context_positions(std::size_t length, std::size_t i,
                                                  std::size_t radius) {
  const auto [lo, hi] = detail::context_bounds(length, i, radius);
  std::vector<std::size_t> positions;
  positions.reserve(hi - lo);
  for (std::size_t j = lo; j <= hi; ++j) {
    if (j != i) positions.push_back(j);
  }
  return positions;
}

/// Loss and gradients of one CBOW step with negative sampling.
///
/// With h the mean of the context input vectors:
///   loss = -log sigmoid(out[center] . h) - sum_n log sigmoid(-out[n] . h)
///
/// Gradients come back accumulated per distinct parameter row, which is what
/// a finite-difference check needs when a token repeats in the context or in
/// the negative list.
struct CbowGradients {
  double loss = 0.0;
  std::vector<std::pair<std::size_t, std::vector<double>>> input;   // context rows
  std::vector<std::pair<std::size_t, std::vector<double>>> output;  // center + negative rows
};

inline CbowGradients cbow_loss_and_grads(std::size_t center, std::span<const std::size_t> context,
                                         std::span<const std::size_t> negatives,
                                         std::span<const double> input_vectors,
                                         std::span<const double> output_vectors, std::size_t dim) {
  if (context.empty()) throw ContractError("cbow_loss_and_grads: context must be non-empty");

  const double inv_c = 1.0 / static_cast<double>(context.size());
  std::vector<double> h(dim, 0.0);
  for (const std::size_t row : context) {
    const double* in = &input_vectors[row * dim];
    for (std::size_t d = 0; d < dim; ++d) h[d] += in[d];
  }
  for (double& v : h) v *= inv_c;

  std::vector<double> grad_h(dim, 0.0);
  std::vector<std::pair<std::size_t, double>> output_coeffs;  // row -> dL/d(dot)
  const auto add_coeff = [&](std::size_t row, double g) {
    for (auto& [r, c] : output_coeffs) {
      if (r == row) {
        c += g;
        return;
      }
    }
    output_coeffs.emplace_back(row, g);
  };

  CbowGradients result;
  const auto accumulate = [&](std::size_t row, double label) {
    const double* out = &output_vectors[row * dim];
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) dot += out[d] * h[d];
    result.loss -= detail::log_sigmoid(label > 0.5 ? dot : -dot);
    const double g = detail::sigmoid(dot) - label;
    add_coeff(row, g);
    for (std::size_t d = 0; d < dim; ++d) grad_h[d] += g * out[d];
  };
  accumulate(center, 1.0);
  for (const std::size_t negative : negatives) accumulate(negative, 0.0);

  for (const auto& [row, g] : output_coeffs) {
    std::vector<double> grad(dim);
    for (std::size_t d = 0; d < dim; ++d) grad[d] = g * h[d];
    result.output.emplace_back(row, std::move(grad));
  }

  std::vector<std::pair<std::size_t, double>> context_multiplicity;
  for (const std::size_t row : context) {
    bool found = false;
    for (auto& [r, c] : context_multiplicity) {
      if (r == row) {
        c += 1.0;
        found = true;
        break;
      }
    }
    if (!found) context_multiplicity.emplace_back(row, 1.0);
  }
  for (const auto& [row, multiplicity] : context_multiplicity) {
    std::vector<double> grad(dim);
    const double scale = multiplicity * inv_c;
    for (std::size_t d = 0; d < dim; ++d) grad[d] = scale * grad_h[d];
    result.input.emplace_back(row, std::move(grad));
  }
  return result;
}

struct TrainStats {
  std::size_t vocab_size = 0;
  std::size_t positions_per_epoch = 0;  // in-vocabulary token positions
  std::vector<double> epoch_mean_loss;
};

/// Trains CBOW embeddings with negative sampling over note sequences and
/// returns the input-vector table.
///
/// Sequence order reshuffles every epoch under the run seed; the learning
/// rate decays linearly from lr_start to lr_end over epochs * positions.
/// Negative samples that collide with the center token are redrawn. With
/// config.threads == 1 the result is bit-identical for a fixed seed.
inline EmbeddingTable train_embeddings(std::span<const NoteSequence> sequences,
                                       const TrainConfig& config, TrainStats* stats = nullptr) {
  config.validate();
  const Vocabulary vocab = build_vocab(sequences, config.min_count, config.subsample_t);
  const std::size_t dim = config.dim;
  const std::size_t vocab_size = vocab.size();

  std::vector<double> input = detail::init_input_vectors(vocab_size, dim, config.seed);
  std::vector<double> output(vocab_size * dim, 0.0);

  // Encode sequences as vocabulary rows once; out-of-vocabulary tokens drop.
  std::vector<std::vector<std::uint32_t>> encoded(sequences.size());
  std::size_t positions_per_epoch = 0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    encoded[i].reserve(sequences[i].tokens.size());
    for (const auto& token : sequences[i].tokens) {
      if (const std::size_t row = vocab.find(token); row != Vocabulary::npos) {
        encoded[i].push_back(static_cast<std::uint32_t>(row));
      }
    }
    positions_per_epoch += encoded[i].size();
  }
  const double total_scheduled =
      static_cast<double>(config.epochs) * static_cast<double>(positions_per_epoch);

  std::atomic<std::size_t> processed{0};
  std::vector<double> epoch_mean_loss;
  epoch_mean_loss.reserve(config.epochs);

  const auto run_chunk = [&](std::span<const std::size_t> order, Rng rng, double& loss_sum,
                             std::size_t& loss_terms) {
    std::vector<double> h(dim), grad_h(dim);
    std::vector<std::uint32_t> sentence;
    for (const std::size_t seq_idx : order) {
      const auto& seq = encoded[seq_idx];
      if (seq.empty()) continue;
      const double done = static_cast<double>(
          processed.fetch_add(seq.size(), std::memory_order_relaxed));
      const double frac = std::min(1.0, done / total_scheduled);
      const double alpha = config.lr_start + (config.lr_end - config.lr_start) * frac;

      sentence.clear();
      for (const std::uint32_t row : seq) {
        const double keep = vocab.keep_probs[row];
        if (keep >= 1.0 || uniform_unit(rng) < keep) sentence.push_back(row);
      }
      const std::size_t len = sentence.size();
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t radius = 1 + static_cast<std::size_t>(uniform_index(rng, config.window));
        const auto [lo, hi] = detail::context_bounds(len, i, radius);
        if (hi == lo) continue;  // no neighbors
        const double inv_c = 1.0 / static_cast<double>(hi - lo);

        std::fill(h.begin(), h.end(), 0.0);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const double* in = &input[sentence[j] * dim];
          for (std::size_t d = 0; d < dim; ++d) h[d] += in[d];
        }
        for (double& v : h) v *= inv_c;

        std::fill(grad_h.begin(), grad_h.end(), 0.0);
        double step_loss = 0.0;
        const auto learn_output = [&](std::size_t row, double label) {
          double* out = &output[row * dim];
          double dot = 0.0;
          for (std::size_t d = 0; d < dim; ++d) dot += out[d] * h[d];
          step_loss -= detail::log_sigmoid(label > 0.5 ? dot : -dot);
          const double g = detail::sigmoid(dot) - label;
          for (std::size_t d = 0; d < dim; ++d) {
            grad_h[d] += g * out[d];
            out[d] -= alpha * g * h[d];
          }
        };

        const std::size_t center = sentence[i];
        learn_output(center, 1.0);
        if (vocab_size > 1) {
          for (std::size_t negative = 0; negative < config.negatives; ++negative) {
            std::size_t row;
            do {
              row = sample_cdf(vocab.noise_cdf, rng);
            } while (row == center);
            learn_output(row, 0.0);
          }
        }

        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          double* in = &input[sentence[j] * dim];
          for (std::size_t d = 0; d < dim; ++d) in[d] -= alpha * inv_c * grad_h[d];
        }
        loss_sum += step_loss;
        ++loss_terms;
      }
    }
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(encoded.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng(derive_seed(config.seed, 1, epoch));
    shuffle_inplace(order, order_rng);

    double loss_sum = 0.0;
    std::size_t loss_terms = 0;
    if (config.threads <= 1) {
      run_chunk(order, Rng(derive_seed(config.seed, 2, epoch)), loss_sum, loss_terms);
    } else {
      const std::size_t workers = std::min(config.threads, order.size());
      std::vector<double> sums(workers, 0.0);
      std::vector<std::size_t> terms(workers, 0);
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (std::size_t t = 0; t < workers; ++t) {
        const std::size_t begin = t * order.size() / workers;
        const std::size_t end = (t + 1) * order.size() / workers;
        pool.emplace_back([&, t, begin, end] {
          run_chunk(std::span(order).subspan(begin, end - begin),
                    Rng(derive_seed(config.seed, 3, epoch * config.threads + t)), sums[t],
                    terms[t]);
        });
      }
      for (auto& worker : pool) worker.join();
      for (std::size_t t = 0; t < workers; ++t) {
        loss_sum += sums[t];
        loss_terms += terms[t];
      }
    }
    epoch_mean_loss.push_back(loss_terms > 0 ? loss_sum / static_cast<double>(loss_terms) : 0.0);
  }

  EmbeddingTable table(dim);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    table.insert(vocab.tokens[i], std::span<const double>(&input[i * dim], dim));
  }
  if (stats) {
    stats->vocab_size = vocab_size;
    stats->positions_per_epoch = positions_per_epoch;
    stats->epoch_mean_loss = std::move(epoch_mean_loss);
  }
  return table;
}

}  // namespace scentvec
