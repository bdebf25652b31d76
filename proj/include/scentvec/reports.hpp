#pragma once

#include <ostream>
#include <span>
#include <string>

#include <json.hpp>

#include "scentvec/experiments.hpp"
#include "scentvec/mapping.hpp"
#include "scentvec/stats.hpp"

namespace scentvec {

inline void to_json(nlohmann::json& j, const UTestResult& result) {
  j = nlohmann::json{
      {"u", result.u},
      {"z", result.z},
      {"p_two_sided", result.p_two_sided},
      {"method", result.method == UTestResult::Method::exact ? "exact" : "normal_approx"}};
}

inline void to_json(nlohmann::json& j, const SpearmanResult& result) {
  j = nlohmann::json{{"rho", result.rho}, {"p_two_sided", result.p_two_sided}, {"n", result.n}};
}

inline void to_json(nlohmann::json& j, const RboGridRow& row) {
  j = nlohmann::json{{"smell_dim", row.smell_dim},     {"smell_table", row.smell_table},
                     {"word_corpus", row.word_corpus}, {"mean_rbo", row.mean_rbo},
                     {"mean_rbo_random", row.mean_rbo_random}, {"p_value", row.p_value}};
}

inline void to_json(nlohmann::json& j, const RboGridReport& report) {
  nlohmann::json per_word = nlohmann::json::object();
  for (std::size_t i = 0; i < report.best_words.size(); ++i) {
    per_word[report.best_words[i]] = {report.best_rbo[i], report.best_rbo_random[i]};
  }
  j = nlohmann::json{{"rows", report.rows},
                     {"best_row", report.best_row},
                     {"per_word", std::move(per_word)}};
}

inline void write_grid_csv(std::ostream& out, const RboGridReport& report) {
  out << "smell_dim,smell_table,word_corpus,mean_rbo,mean_rbo_random,p_value\n";
  for (const auto& row : report.rows) {
    out << row.smell_dim << ',' << row.smell_table << ',' << row.word_corpus << ','
        << detail::format_csv_value(row.mean_rbo) << ','
        << detail::format_csv_value(row.mean_rbo_random) << ','
        << detail::format_csv_value(row.p_value) << '\n';
  }
}

inline void write_per_word_csv(std::ostream& out, const RboGridReport& report) {
  out << "word,rbo,rbo_random\n";
  for (std::size_t i = 0; i < report.best_words.size(); ++i) {
    out << report.best_words[i] << ',' << detail::format_csv_value(report.best_rbo[i]) << ','
        << detail::format_csv_value(report.best_rbo_random[i]) << '\n';
  }
}

inline void to_json(nlohmann::json& j, const AssociationScores& scores) {
  nlohmann::json by_word = nlohmann::json::object();
  for (const auto& [word, score] : scores.scores) by_word[word] = score;
  j = nlohmann::json{{"seeds_used", scores.seeds_used},
                     {"seeds_missing", scores.seeds_missing},
                     {"scores", std::move(by_word)}};
}

inline void to_json(nlohmann::json& j, const AestheticsReport& report) {
  j = nlohmann::json{{"n_real", report.real_variances.size()},
                     {"n_random", report.random_variances.size()},
                     {"skipped_real", report.skipped_real},
                     {"skipped_random", report.skipped_random},
                     {"utest", report.utest},
                     {"mean_real_variance", 0.0},
                     {"mean_random_variance", 0.0}};
  double real_sum = 0.0, random_sum = 0.0;
  for (const double v : report.real_variances) real_sum += v;
  for (const double v : report.random_variances) random_sum += v;
  j["mean_real_variance"] = real_sum / static_cast<double>(report.real_variances.size());
  j["mean_random_variance"] = random_sum / static_cast<double>(report.random_variances.size());
}

inline void write_variances_csv(std::ostream& out, const AestheticsReport& report) {
  out << "real_variance,random_variance\n";
  const std::size_t n =
      std::min(report.real_variances.size(), report.random_variances.size());
  for (std::size_t i = 0; i < n; ++i) {
    out << detail::format_csv_value(report.real_variances[i]) << ','
        << detail::format_csv_value(report.random_variances[i]) << '\n';
  }
}

inline void to_json(nlohmann::json& j, const CvReport& report) {
  nlohmann::json models = nlohmann::json::object();
  for (const auto& [kind, entry] : report.per_model) {
    models[to_string(kind)] = {{"mse_mean", entry.mse_mean},
                               {"mse_std", entry.mse_std},
                               {"per_fold", entry.per_fold}};
  }
  j = nlohmann::json{{"folds", report.folds}, {"seed", report.seed}, {"models", std::move(models)}};
}

inline void write_cv_csv(std::ostream& out, const CvReport& report) {
  out << "model,mse_mean,mse_std\n";
  for (const auto& [kind, entry] : report.per_model) {
    out << to_string(kind) << ',' << detail::format_csv_value(entry.mse_mean) << ','
        << detail::format_csv_value(entry.mse_std) << '\n';
  }
}

inline void write_ranking_csv(std::ostream& out, const SimilarityRanking& ranking) {
  out << "rank,token,cosine\n";
  for (std::size_t i = 0; i < ranking.ranked.size(); ++i) {
    out << (i + 1) << ',' << ranking.ranked[i].first << ','
        << detail::format_csv_value(ranking.ranked[i].second) << '\n';
  }
}

}  // namespace scentvec
