#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scentvec/errors.hpp"
#include "scentvec/rng.hpp"
#include "scentvec/zip.hpp"

namespace scentvec {

namespace detail {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

using TokenIndex = std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>>;

inline std::string ascii_lower_token(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

}  // namespace detail

/// Token-to-vector map with fixed dimensionality. Tokens keep insertion
/// order; rows live in one contiguous buffer.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  explicit EmbeddingTable(std::size_t dim, std::string name = {})
      : dim_(dim), name_(std::move(name)) {
    if (dim == 0) throw ContractError("EmbeddingTable: dimensionality must be positive");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool contains(std::string_view token) const { return index_.find(token) != index_.end(); }

  std::size_t index_of(std::string_view token) const {
    const auto it = index_.find(token);
    if (it == index_.end()) {
      throw ContractError("token \"" + std::string(token) + "\" is not in the vocabulary");
    }
    return it->second;
  }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> vec(std::string_view token) const { return row(index_of(token)); }

  /// Appends a token. Rejects dimension mismatches and duplicates; a
  /// default-constructed table adopts the dimensionality of the first insert.
  void insert(std::string token, std::span<const double> v) {
    if (dim_ == 0) {
      if (v.empty()) throw ContractError("EmbeddingTable: vectors must be non-empty");
      dim_ = v.size();
    }
    if (v.size() != dim_) {
      throw ContractError("EmbeddingTable: vector for \"" + token + "\" has length " +
                          std::to_string(v.size()) + ", expected " + std::to_string(dim_));
    }
    if (contains(token)) throw ContractError("EmbeddingTable: duplicate token \"" + token + "\"");
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    data_.insert(data_.end(), v.begin(), v.end());
  }

 private:
  std::size_t dim_ = 0;
  std::string name_;
  std::vector<std::string> tokens_;
  detail::TokenIndex index_;
  std::vector<double> data_;
};

/// Tokens ordered by descending cosine similarity to a query token.
struct SimilarityRanking {
  std::string query;
  std::vector<std::pair<std::string, double>> ranked;
};

inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ContractError("cosine: dimension mismatch");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const double nu = std::sqrt(uu);
  const double nv = std::sqrt(vv);
  if (nu < 1e-12 || nv < 1e-12) throw AnalysisError("cosine: vector norm is numerically zero");
  return dot / (nu * nv);
}

inline constexpr std::size_t kAllNeighbors = std::numeric_limits<std::size_t>::max();

/// Top-k tokens by cosine similarity to `query`, query excluded, ties broken
/// lexicographically.
inline SimilarityRanking neighbors(const EmbeddingTable& table, std::string_view query,
                                   std::size_t k = kAllNeighbors) {
  const std::size_t query_idx = table.index_of(query);
  const auto query_vec = table.vec(query);

  std::vector<std::pair<std::size_t, double>> scored;
  scored.reserve(table.size() > 0 ? table.size() - 1 : 0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (i == query_idx) continue;
    scored.emplace_back(i, cosine(query_vec, table.row(i)));
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return table.tokens()[a.first] < table.tokens()[b.first];
  });
  if (k < scored.size()) scored.resize(k);

  SimilarityRanking ranking{std::string(query), {}};
  ranking.ranked.reserve(scored.size());
  for (const auto& [i, score] : scored) ranking.ranked.emplace_back(table.tokens()[i], score);
  return ranking;
}

/// Sorted intersection of the two token sets.
inline std::vector<std::string> shared_vocab(const EmbeddingTable& a, const EmbeddingTable& b) {
  const EmbeddingTable& small = a.size() <= b.size() ? a : b;
  const EmbeddingTable& large = a.size() <= b.size() ? b : a;
  std::vector<std::string> out;
  for (const auto& token : small.tokens()) {
    if (large.contains(token)) out.push_back(token);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Reassigns the existing vectors to tokens by a uniformly random
/// permutation; the null model for ranking-agreement experiments.
inline EmbeddingTable shuffle_assignment(const EmbeddingTable& table, Rng& rng) {
  if (table.empty()) throw ContractError("shuffle_assignment: empty table");
  std::vector<std::size_t> perm(table.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  shuffle_inplace(perm, rng);
  EmbeddingTable out(table.dim(), table.name());
  for (std::size_t i = 0; i < table.size(); ++i) {
    out.insert(table.tokens()[i], table.row(perm[i]));
  }
  return out;
}

namespace detail {

inline std::string encode_token(std::string token) {
  for (char& c : token) {
    if (c == ' ') c = '_';
  }
  return token;
}

inline std::string decode_token(std::string token) {
  for (char& c : token) {
    if (c == '_') c = ' ';
  }
  return token;
}

inline std::string format_component(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

}  // namespace detail

/// Writes the table in word2vec text format: a "<count> <dim>" header, then
/// one whitespace-delimited line per token. Spaces inside note tokens are
/// stored as '_'.
inline void save_embedding_text(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dim() << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << detail::encode_token(table.tokens()[i]);
    for (const double v : table.row(i)) out << ' ' << detail::format_component(v);
    out << '\n';
  }
}

/// Parses word2vec text format. Duplicate tokens keep their first vector;
/// `duplicates` (when given) receives the number of lines ignored that way.
/// '_' decodes back to ' '; `lowercase_tokens` ASCII-lowercases tokens, for
/// pretrained word tables with cased vocabularies.
inline EmbeddingTable load_embedding_text(std::istream& in, std::size_t* duplicates = nullptr,
                                          bool lowercase_tokens = false) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing embedding header");
  std::size_t lineno = 1;
  std::size_t count = 0;
  std::size_t dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> count >> dim) || dim == 0) {
      throw ParseError(1, "malformed header: expected \"<count> <dim>\"");
    }
    std::string rest;
    if (header >> rest) throw ParseError(1, "malformed header: expected \"<count> <dim>\"");
  }

  EmbeddingTable table(dim);
  std::size_t dup_count = 0;
  std::vector<double> vec(dim);
  for (std::size_t entry = 0; entry < count; ++entry) {
    if (!std::getline(in, line)) {
      throw ParseError(lineno + 1,
                       "unexpected end of file: expected " + std::to_string(count) + " entries");
    }
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const char* p = line.c_str();
    while (*p == ' ' || *p == '\t') ++p;
    const char* token_begin = p;
    while (*p != '\0' && *p != ' ' && *p != '\t') ++p;
    if (p == token_begin) throw ParseError(lineno, "empty entry line");
    std::string token(token_begin, p);

    for (std::size_t d = 0; d < dim; ++d) {
      char* end = nullptr;
      const double value = std::strtod(p, &end);
      if (end == p) {
        throw ParseError(lineno, "expected " + std::to_string(dim) +
                                     " values after the token, found " + std::to_string(d));
      }
      vec[d] = value;
      p = end;
    }
    while (*p == ' ' || *p == '\t') ++p;
    if (*p != '\0') {
      throw ParseError(lineno, "trailing characters after " + std::to_string(dim) + " values");
    }

    token = detail::decode_token(std::move(token));
    if (lowercase_tokens) token = detail::ascii_lower_token(std::move(token));
    if (table.contains(token)) {
      ++dup_count;
      continue;
    }
    table.insert(std::move(token), vec);
  }
  if (duplicates) *duplicates = dup_count;
  return table;
}

/// Loads a table from a plain text file, an "<archive>.zip::<member>" path,
/// or an explicit zip member. The table name defaults to the file stem.
inline EmbeddingTable load_embedding_file(const std::string& path,
                                          const std::string& zip_member = {},
                                          std::size_t* duplicates = nullptr,
                                          bool lowercase_tokens = false) {
  std::string real_path = path;
  std::string member = zip_member;
  if (member.empty()) {
    if (const auto split = path.find("::"); split != std::string::npos) {
      real_path = path.substr(0, split);
      member = path.substr(split + 2);
    }
  }

  EmbeddingTable table;
  if (!member.empty()) {
    const std::string bytes = read_zip_member(real_path, member);
    std::istringstream in(bytes);
    table = load_embedding_text(in, duplicates, lowercase_tokens);
  } else {
    std::ifstream in(real_path);
    if (!in) throw IoError("cannot open embedding file: " + real_path);
    table = load_embedding_text(in, duplicates, lowercase_tokens);
  }
  table.set_name(std::filesystem::path(member.empty() ? real_path : member).stem().string());
  return table;
}

inline void save_embedding_file(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embedding file: " + path);
  save_embedding_text(out, table);
}

}  // namespace scentvec
