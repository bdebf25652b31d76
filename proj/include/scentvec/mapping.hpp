#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "scentvec/embedding.hpp"
#include "scentvec/errors.hpp"
#include "scentvec/rng.hpp"

namespace scentvec {

/// Centered principal-component basis. Component rows are orthonormal and
/// ordered by decreasing explained (sample) variance; the sign convention
/// makes the largest-magnitude coordinate of each component positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;          // n_components x D
  Eigen::VectorXd explained_variance;  // descending
  std::size_t rank = 0;                // numerical rank of the centered data

  std::size_t in_dim() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(components.rows()); }
  bool empty() const { return mean.size() == 0; }
};

inline PcaModel pca_fit(const Eigen::MatrixXd& X, std::size_t n_components) {
  const auto n = X.rows();
  const auto d = X.cols();
  if (n < 2) throw ContractError("pca_fit: need at least 2 rows");
  if (n_components < 1 ||
      n_components > static_cast<std::size_t>(std::min<Eigen::Index>(n, d))) {
    throw ContractError("pca_fit: n_components must lie in [1, min(n_samples, n_features)]");
  }

  PcaModel model;
  model.mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();

  const double tol = sv.size() > 0 ? sv(0) * static_cast<double>(std::max(n, d)) *
                                         std::numeric_limits<double>::epsilon()
                                   : 0.0;
  model.rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++model.rank;
  }

  const auto k = static_cast<Eigen::Index>(n_components);
  model.components = svd.matrixV().leftCols(k).transpose();
  model.explained_variance =
      sv.head(k).array().square() / static_cast<double>(n - 1);

  for (Eigen::Index r = 0; r < model.components.rows(); ++r) {
    Eigen::Index max_idx = 0;
    model.components.row(r).cwiseAbs().maxCoeff(&max_idx);
    if (model.components(r, max_idx) < 0.0) model.components.row(r) *= -1.0;
  }
  return model;
}

inline Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != model.in_dim()) {
    throw ContractError("pca_transform: expected " + std::to_string(model.in_dim()) +
                        " columns, got " + std::to_string(X.cols()));
  }
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

inline Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& T) {
  if (T.cols() != model.components.rows()) {
    throw ContractError("pca_inverse_transform: dimension mismatch");
  }
  return (T * model.components).rowwise() + model.mean.transpose();
}

enum class MapKind { linear, mlp, knn, dummy };

inline const char* to_string(MapKind kind) {
  switch (kind) {
    case MapKind::linear: return "linear";
    case MapKind::mlp: return "mlp";
    case MapKind::knn: return "knn";
    case MapKind::dummy: return "dummy";
  }
  return "unknown";
}

inline MapKind map_kind_from_string(std::string_view name) {
  if (name == "linear") return MapKind::linear;
  if (name == "mlp") return MapKind::mlp;
  if (name == "knn") return MapKind::knn;
  if (name == "dummy") return MapKind::dummy;
  throw ContractError("unknown mapping kind \"" + std::string(name) +
                      "\" (expected linear, mlp, knn, or dummy)");
}

/// Regressor knobs; the defaults mirror the usual library defaults: one
/// hidden layer of 100 rectified-linear units trained by Adam with batch
/// min(200, n) and an L2 penalty of 1e-4, and k = 5 uniform-weight neighbors.
struct MapHyper {
  std::size_t knn_k = 5;
  std::size_t mlp_hidden = 100;
  double mlp_lr = 1e-3;
  double mlp_beta1 = 0.9;
  double mlp_beta2 = 0.999;
  double mlp_eps = 1e-8;
  double mlp_l2 = 1e-4;
  double mlp_tol = 1e-4;
  std::size_t mlp_max_epochs = 200;
  std::size_t mlp_no_change = 10;
  std::size_t mlp_batch = 200;  // capped at the sample count
  std::uint64_t seed = 0;
};

/// A fitted word-space -> smell-space regressor plus the input-side PCA.
/// Only the members of the active kind are populated.
struct MappingModel {
  MapKind kind = MapKind::dummy;
  PcaModel pca;  // empty means the model consumes raw inputs

  Eigen::MatrixXd linear_weights;  // d_in x d_out
  Eigen::RowVectorXd linear_intercept;
  bool linear_ridge_fallback = false;

  Eigen::MatrixXd mlp_w1, mlp_w2;
  Eigen::RowVectorXd mlp_b1, mlp_b2;

  Eigen::MatrixXd knn_inputs, knn_targets;
  std::size_t knn_k = 5;

  Eigen::RowVectorXd dummy_mean;

  std::size_t out_dim() const {
    switch (kind) {
      case MapKind::linear: return static_cast<std::size_t>(linear_weights.cols());
      case MapKind::mlp: return static_cast<std::size_t>(mlp_w2.cols());
      case MapKind::knn: return static_cast<std::size_t>(knn_targets.cols());
      case MapKind::dummy: return static_cast<std::size_t>(dummy_mean.cols());
    }
    return 0;
  }

  /// Predicts from inputs already in the model's (reduced) input space.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const {
    switch (kind) {
      case MapKind::linear: {
        if (X.cols() != linear_weights.rows()) {
          throw ContractError("predict: input dimension mismatch");
        }
        return (X * linear_weights).rowwise() + linear_intercept;
      }
      case MapKind::mlp: {
        if (X.cols() != mlp_w1.rows()) throw ContractError("predict: input dimension mismatch");
        Eigen::MatrixXd hidden = ((X * mlp_w1).rowwise() + mlp_b1).cwiseMax(0.0);
        return (hidden * mlp_w2).rowwise() + mlp_b2;
      }
      case MapKind::knn: {
        if (X.cols() != knn_inputs.cols()) throw ContractError("predict: input dimension mismatch");
        Eigen::MatrixXd out(X.rows(), knn_targets.cols());
        const std::size_t n = static_cast<std::size_t>(knn_inputs.rows());
        std::vector<std::size_t> order(n);
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
          Eigen::VectorXd dist_sq =
              (knn_inputs.rowwise() - X.row(r)).rowwise().squaredNorm();
          std::iota(order.begin(), order.end(), std::size_t{0});
          std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(knn_k),
                            order.end(), [&](std::size_t a, std::size_t b) {
                              if (dist_sq(a) != dist_sq(b)) return dist_sq(a) < dist_sq(b);
                              return a < b;
                            });
          Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(knn_targets.cols());
          for (std::size_t j = 0; j < knn_k; ++j) mean += knn_targets.row(order[j]);
          out.row(r) = mean / static_cast<double>(knn_k);
        }
        return out;
      }
      case MapKind::dummy: {
        return dummy_mean.replicate(X.rows(), 1);
      }
    }
    throw ContractError("predict: invalid model kind");
  }

  /// Applies the stored PCA (when present) and predicts.
  Eigen::MatrixXd predict_raw(const Eigen::MatrixXd& X) const {
    return predict(pca.empty() ? X : pca_transform(pca, X));
  }
};

/// Loss and parameter gradients of the two-layer perceptron on one batch:
///
///   loss = ||relu(X W1 + b1) W2 + b2 - Y||_F^2 / (2 B)
///          + l2 (||W1||_F^2 + ||W2||_F^2) / (2 B)
struct MlpGradients {
  double loss = 0.0;
  Eigen::MatrixXd w1, w2;
  Eigen::RowVectorXd b1, b2;
};

inline MlpGradients mlp_loss_and_grads(const Eigen::MatrixXd& w1, const Eigen::RowVectorXd& b1,
                                       const Eigen::MatrixXd& w2, const Eigen::RowVectorXd& b2,
                                       const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                       double l2) {
  if (X.rows() == 0) throw ContractError("mlp_loss_and_grads: empty batch");
  const double inv_b = 1.0 / static_cast<double>(X.rows());
  const Eigen::MatrixXd z1 = (X * w1).rowwise() + b1;
  const Eigen::MatrixXd hidden = z1.cwiseMax(0.0);
  Eigen::MatrixXd err = ((hidden * w2).rowwise() + b2) - Y;

  MlpGradients grads;
  grads.loss = 0.5 * inv_b * (err.squaredNorm() + l2 * (w1.squaredNorm() + w2.squaredNorm()));
  err *= inv_b;
  grads.w2 = hidden.transpose() * err + (l2 * inv_b) * w2;
  grads.b2 = err.colwise().sum();
  const Eigen::MatrixXd dh =
      (err * w2.transpose()).array() * (z1.array() > 0.0).cast<double>();
  grads.w1 = X.transpose() * dh + (l2 * inv_b) * w1;
  grads.b1 = dh.colwise().sum();
  return grads;
}

namespace detail {

inline void fit_linear(MappingModel& model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  const auto n = X.rows();
  const auto d = X.cols();
  Eigen::MatrixXd design(n, d + 1);
  design.leftCols(d) = X;
  design.col(d).setOnes();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::MatrixXd weights;
  if (qr.rank() < d + 1) {
    // rank-deficient design: tiny-ridge normal equations instead of QR
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += 1e-8;
    weights = gram.ldlt().solve(design.transpose() * Y);
    model.linear_ridge_fallback = true;
  } else {
    weights = qr.solve(Y);
  }
  model.linear_weights = weights.topRows(d);
  model.linear_intercept = weights.row(d);
}

template <class Mat>
struct AdamState {
  Mat m, v;

  void init(const Mat& like) {
    m = Mat::Zero(like.rows(), like.cols());
    v = Mat::Zero(like.rows(), like.cols());
  }

  void step(Mat& param, const Mat& grad, double lr_t, const MapHyper& hyper) {
    m = hyper.mlp_beta1 * m + (1.0 - hyper.mlp_beta1) * grad;
    v = hyper.mlp_beta2 * v + (1.0 - hyper.mlp_beta2) * grad.cwiseProduct(grad);
    param.array() -= lr_t * m.array() / (v.array().sqrt() + hyper.mlp_eps);
  }
};

inline void fit_mlp(MappingModel& model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                    const MapHyper& hyper) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto d_in = X.cols();
  const auto d_out = Y.cols();
  const auto hidden = static_cast<Eigen::Index>(hyper.mlp_hidden);

  Rng rng(derive_seed(hyper.seed, 7));
  const double bound1 = std::sqrt(6.0 / static_cast<double>(d_in + hidden));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hidden + d_out));
  Eigen::MatrixXd w1(d_in, hidden), w2(hidden, d_out);
  Eigen::RowVectorXd b1(hidden), b2(d_out);
  for (Eigen::Index i = 0; i < d_in; ++i) {
    for (Eigen::Index j = 0; j < hidden; ++j) w1(i, j) = uniform_real(rng, -bound1, bound1);
  }
  for (Eigen::Index j = 0; j < hidden; ++j) b1(j) = uniform_real(rng, -bound1, bound1);
  for (Eigen::Index i = 0; i < hidden; ++i) {
    for (Eigen::Index j = 0; j < d_out; ++j) w2(i, j) = uniform_real(rng, -bound2, bound2);
  }
  for (Eigen::Index j = 0; j < d_out; ++j) b2(j) = uniform_real(rng, -bound2, bound2);

  AdamState<Eigen::MatrixXd> adam_w1, adam_w2;
  AdamState<Eigen::RowVectorXd> adam_b1, adam_b2;
  adam_w1.init(w1);
  adam_w2.init(w2);
  adam_b1.init(b1);
  adam_b2.init(b2);

  const std::size_t batch = std::min(hyper.mlp_batch, n);
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), std::size_t{0});

  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stall = 0;
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < hyper.mlp_max_epochs; ++epoch) {
    shuffle_inplace(indices, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t size = std::min(batch, n - start);
      Eigen::MatrixXd xb(size, d_in), yb(size, d_out);
      for (std::size_t r = 0; r < size; ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(indices[start + r]));
        yb.row(static_cast<Eigen::Index>(r)) = Y.row(static_cast<Eigen::Index>(indices[start + r]));
      }
      const auto grads = mlp_loss_and_grads(w1, b1, w2, b2, xb, yb, hyper.mlp_l2);
      epoch_loss += grads.loss * static_cast<double>(size);

      ++t;
      const double lr_t = hyper.mlp_lr *
                          std::sqrt(1.0 - std::pow(hyper.mlp_beta2, static_cast<double>(t))) /
                          (1.0 - std::pow(hyper.mlp_beta1, static_cast<double>(t)));
      adam_w1.step(w1, grads.w1, lr_t, hyper);
      adam_b1.step(b1, grads.b1, lr_t, hyper);
      adam_w2.step(w2, grads.w2, lr_t, hyper);
      adam_b2.step(b2, grads.b2, lr_t, hyper);
    }
    epoch_loss /= static_cast<double>(n);
    if (epoch_loss > best_loss - hyper.mlp_tol) {
      if (++stall >= hyper.mlp_no_change) break;
    } else {
      stall = 0;
    }
    best_loss = std::min(best_loss, epoch_loss);
  }

  model.mlp_w1 = std::move(w1);
  model.mlp_b1 = std::move(b1);
  model.mlp_w2 = std::move(w2);
  model.mlp_b2 = std::move(b2);
}

}  // namespace detail

/// Fits one regressor on already-reduced inputs. linear solves least squares
/// with an intercept (tiny-ridge fallback on singular designs); knn stores
/// the training pairs; dummy keeps the column means of Y.
inline MappingModel fit_map(MapKind kind, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                            const MapHyper& hyper = {}) {
  if (X.rows() != Y.rows()) throw ContractError("fit_map: X and Y row counts differ");
  if (X.rows() < 2) throw ContractError("fit_map: need at least 2 samples");

  MappingModel model;
  model.kind = kind;
  switch (kind) {
    case MapKind::linear:
      detail::fit_linear(model, X, Y);
      break;
    case MapKind::mlp:
      detail::fit_mlp(model, X, Y, hyper);
      break;
    case MapKind::knn:
      if (static_cast<std::size_t>(X.rows()) < hyper.knn_k) {
        throw ContractError("fit_map: knn needs at least k = " + std::to_string(hyper.knn_k) +
                            " samples");
      }
      model.knn_inputs = X;
      model.knn_targets = Y;
      model.knn_k = hyper.knn_k;
      break;
    case MapKind::dummy:
      model.dummy_mean = Y.colwise().mean();
      break;
  }
  return model;
}

struct CvEntry {
  double mse_mean = 0.0;
  double mse_std = 0.0;  // population std over folds
  std::vector<double> per_fold;
};

struct CvReport {
  std::vector<std::pair<MapKind, CvEntry>> per_model;  // requested kind order
  std::size_t folds = 0;
  std::uint64_t seed = 0;
};

/// Shuffled k-fold cross-validation. The score per fold is the mean squared
/// per-coordinate error over held-out samples.
inline CvReport cross_validate(std::span<const MapKind> kinds, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Y, std::size_t folds = 5,
                               std::uint64_t seed = 0, const MapHyper& hyper = {}) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (kinds.empty()) throw ContractError("cross_validate: no model kinds given");
  if (folds < 2) throw ContractError("cross_validate: need at least 2 folds");
  if (n < folds) throw ContractError("cross_validate: need at least as many samples as folds");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 11));
  shuffle_inplace(perm, rng);

  CvReport report;
  report.folds = folds;
  report.seed = seed;
  for (const MapKind kind : kinds) report.per_model.emplace_back(kind, CvEntry{});

  std::size_t cursor = 0;
  for (std::size_t fold = 0; fold < folds; ++fold) {
    const std::size_t fold_size = n / folds + (fold < n % folds ? 1 : 0);
    const std::size_t test_begin = cursor;
    const std::size_t test_end = cursor + fold_size;
    cursor = test_end;

    Eigen::MatrixXd x_train(n - fold_size, X.cols()), y_train(n - fold_size, Y.cols());
    Eigen::MatrixXd x_test(fold_size, X.cols()), y_test(fold_size, Y.cols());
    Eigen::Index train_row = 0, test_row = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = static_cast<Eigen::Index>(perm[i]);
      if (i >= test_begin && i < test_end) {
        x_test.row(test_row) = X.row(src);
        y_test.row(test_row) = Y.row(src);
        ++test_row;
      } else {
        x_train.row(train_row) = X.row(src);
        y_train.row(train_row) = Y.row(src);
        ++train_row;
      }
    }

    for (std::size_t k = 0; k < report.per_model.size(); ++k) {
      MapHyper fold_hyper = hyper;
      fold_hyper.seed = derive_seed(seed, 13, fold * 16 + k);
      const MappingModel model = fit_map(report.per_model[k].first, x_train, y_train, fold_hyper);
      const Eigen::MatrixXd pred = model.predict(x_test);
      const double mse = (pred - y_test).squaredNorm() /
                         static_cast<double>(y_test.rows() * y_test.cols());
      report.per_model[k].second.per_fold.push_back(mse);
    }
  }

  for (auto& [kind, entry] : report.per_model) {
    double sum = 0.0;
    for (const double v : entry.per_fold) sum += v;
    entry.mse_mean = sum / static_cast<double>(entry.per_fold.size());
    double ss = 0.0;
    for (const double v : entry.per_fold) ss += (v - entry.mse_mean) * (v - entry.mse_mean);
    entry.mse_std = std::sqrt(ss / static_cast<double>(entry.per_fold.size()));
  }
  return report;
}

/// Aligned input/target matrices over a shared vocabulary: X holds the word
/// vectors, Y the smell vectors, row i belonging to vocab[i].
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> aligned_matrices(
    const EmbeddingTable& word_table, const EmbeddingTable& smell_table,
    std::span<const std::string> vocab) {
  Eigen::MatrixXd X(vocab.size(), word_table.dim());
  Eigen::MatrixXd Y(vocab.size(), smell_table.dim());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto wv = word_table.vec(vocab[i]);
    const auto sv = smell_table.vec(vocab[i]);
    for (std::size_t d = 0; d < word_table.dim(); ++d) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = wv[d];
    }
    for (std::size_t d = 0; d < smell_table.dim(); ++d) {
      Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = sv[d];
    }
  }
  return {std::move(X), std::move(Y)};
}

struct SmellPrediction {
  SimilarityRanking most_similar;
  std::vector<std::pair<std::string, double>> least_similar;  // ascending cosine
};

/// Maps a word through the fitted model and ranks the smell vocabulary by
/// cosine similarity to the predicted vector.
inline SmellPrediction predict_smell(std::string_view word, const EmbeddingTable& word_table,
                                     const MappingModel& model, const EmbeddingTable& smell_table,
                                     std::size_t k) {
  const auto wv = word_table.vec(word);
  Eigen::MatrixXd x(1, wv.size());
  for (std::size_t d = 0; d < wv.size(); ++d) x(0, static_cast<Eigen::Index>(d)) = wv[d];
  const Eigen::MatrixXd pred = model.predict_raw(x);
  if (static_cast<std::size_t>(pred.cols()) != smell_table.dim()) {
    throw ContractError("predict_smell: model output dimensionality " +
                        std::to_string(pred.cols()) + " does not match the smell table (" +
                        std::to_string(smell_table.dim()) + ")");
  }
  std::vector<double> predicted(smell_table.dim());
  for (std::size_t d = 0; d < predicted.size(); ++d) {
    predicted[d] = pred(0, static_cast<Eigen::Index>(d));
  }

  std::vector<std::pair<std::size_t, double>> scored;
  scored.reserve(smell_table.size());
  for (std::size_t i = 0; i < smell_table.size(); ++i) {
    scored.emplace_back(i, cosine(predicted, smell_table.row(i)));
  }
  const auto by_token = [&](std::size_t a, std::size_t b) {
    return smell_table.tokens()[a] < smell_table.tokens()[b];
  };
  std::vector<std::pair<std::size_t, double>> ascending = scored;
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return by_token(a.first, b.first);
  });
  std::sort(ascending.begin(), ascending.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return by_token(a.first, b.first);
  });

  SmellPrediction result;
  result.most_similar.query = std::string(word);
  const std::size_t take = std::min(k, scored.size());
  for (std::size_t i = 0; i < take; ++i) {
    result.most_similar.ranked.emplace_back(smell_table.tokens()[scored[i].first],
                                            scored[i].second);
    result.least_similar.emplace_back(smell_table.tokens()[ascending[i].first],
                                      ascending[i].second);
  }
  return result;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw SchemaError("mapping model: malformed matrix field \"" + field + "\"");
  }
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw SchemaError("mapping model: matrix field \"" + field + "\" has wrong element count");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data.at(i++).get<double>();
  }
  return m;
}

inline nlohmann::json rowvec_to_json(const Eigen::RowVectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Eigen::RowVectorXd rowvec_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array()) throw SchemaError("mapping model: field \"" + field + "\" must be an array");
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

}  // namespace detail

inline constexpr const char* kMappingSchema = "scentvec.mapping";
inline constexpr int kMappingSchemaVersion = 1;

/// Persists a fitted model (including its PCA) as a versioned JSON document;
/// float arrays are row-major.
inline void save_mapping_model(std::ostream& out, const MappingModel& model) {
  nlohmann::json j{{"schema", kMappingSchema},
                   {"version", kMappingSchemaVersion},
                   {"kind", to_string(model.kind)}};
  if (!model.pca.empty()) {
    j["pca"] = {{"mean", detail::rowvec_to_json(model.pca.mean.transpose())},
                {"components", detail::matrix_to_json(model.pca.components)},
                {"explained_variance",
                 detail::rowvec_to_json(model.pca.explained_variance.transpose())},
                {"rank", model.pca.rank}};
  }
  switch (model.kind) {
    case MapKind::linear:
      j["linear"] = {{"weights", detail::matrix_to_json(model.linear_weights)},
                     {"intercept", detail::rowvec_to_json(model.linear_intercept)},
                     {"ridge_fallback", model.linear_ridge_fallback}};
      break;
    case MapKind::mlp:
      j["mlp"] = {{"w1", detail::matrix_to_json(model.mlp_w1)},
                  {"b1", detail::rowvec_to_json(model.mlp_b1)},
                  {"w2", detail::matrix_to_json(model.mlp_w2)},
                  {"b2", detail::rowvec_to_json(model.mlp_b2)}};
      break;
    case MapKind::knn:
      j["knn"] = {{"inputs", detail::matrix_to_json(model.knn_inputs)},
                  {"targets", detail::matrix_to_json(model.knn_targets)},
                  {"k", model.knn_k}};
      break;
    case MapKind::dummy:
      j["dummy"] = {{"mean", detail::rowvec_to_json(model.dummy_mean)}};
      break;
  }
  out << j.dump(2) << '\n';
}

inline MappingModel load_mapping_model(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("mapping model: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", std::string{}) != kMappingSchema) {
    throw SchemaError("mapping model: missing or unknown schema tag");
  }
  if (j.value("version", 0) != kMappingSchemaVersion) {
    throw SchemaError("mapping model: unsupported schema version");
  }

  MappingModel model;
  model.kind = map_kind_from_string(j.value("kind", std::string{}));
  if (j.contains("pca")) {
    const auto& p = j.at("pca");
    model.pca.mean = detail::rowvec_from_json(p.at("mean"), "pca.mean").transpose();
    model.pca.components = detail::matrix_from_json(p.at("components"), "pca.components");
    model.pca.explained_variance =
        detail::rowvec_from_json(p.at("explained_variance"), "pca.explained_variance")
            .transpose();
    model.pca.rank = p.value("rank", std::size_t{0});
  }
  const auto section = [&](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) {
      throw SchemaError("mapping model: missing section \"" + std::string(name) + "\"");
    }
    return j.at(name);
  };
  switch (model.kind) {
    case MapKind::linear: {
      const auto& s = section("linear");
      model.linear_weights = detail::matrix_from_json(s.at("weights"), "linear.weights");
      model.linear_intercept = detail::rowvec_from_json(s.at("intercept"), "linear.intercept");
      model.linear_ridge_fallback = s.value("ridge_fallback", false);
      break;
    }
    case MapKind::mlp: {
      const auto& s = section("mlp");
      model.mlp_w1 = detail::matrix_from_json(s.at("w1"), "mlp.w1");
      model.mlp_b1 = detail::rowvec_from_json(s.at("b1"), "mlp.b1");
      model.mlp_w2 = detail::matrix_from_json(s.at("w2"), "mlp.w2");
      model.mlp_b2 = detail::rowvec_from_json(s.at("b2"), "mlp.b2");
      break;
    }
    case MapKind::knn: {
      const auto& s = section("knn");
      model.knn_inputs = detail::matrix_from_json(s.at("inputs"), "knn.inputs");
      model.knn_targets = detail::matrix_from_json(s.at("targets"), "knn.targets");
      model.knn_k = s.value("k", std::size_t{5});
      break;
    }
    case MapKind::dummy: {
      model.dummy_mean = detail::rowvec_from_json(section("dummy").at("mean"), "dummy.mean");
      break;
    }
  }
  return model;
}

}  // namespace scentvec
