#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scentvec/errors.hpp"
#include "scentvec/rng.hpp"

namespace scentvec {

/// One perfume: identifier, display name, and the three note categories.
/// Category membership never matters downstream; analyses work on the union
/// of the three lists.
struct PerfumeRecord {
  std::string id;
  std::string name;
  std::vector<std::string> top;
  std::vector<std::string> heart;
  std::vector<std::string> base;
};

/// Sorted, duplicate-free union of the record's note lists.
inline std::vector<std::string> note_union(const PerfumeRecord& record) {
  std::vector<std::string> notes;
  notes.reserve(record.top.size() + record.heart.size() + record.base.size());
  notes.insert(notes.end(), record.top.begin(), record.top.end());
  notes.insert(notes.end(), record.heart.begin(), record.heart.end());
  notes.insert(notes.end(), record.base.begin(), record.base.end());
  std::sort(notes.begin(), notes.end());
  notes.erase(std::unique(notes.begin(), notes.end()), notes.end());
  return notes;
}

namespace detail {

// Decodes one UTF-8 codepoint starting at `i` and advances `i`. Bytes that
// do not form a valid sequence pass through one at a time.
inline char32_t next_codepoint(std::string_view text, std::size_t& i) {
  const auto byte = static_cast<unsigned char>(text[i]);
  if (byte < 0x80) {
    ++i;
    return byte;
  }
  std::size_t extra = 0;
  char32_t cp = 0;
  if ((byte & 0xE0) == 0xC0) {
    extra = 1;
    cp = byte & 0x1F;
  } else if ((byte & 0xF0) == 0xE0) {
    extra = 2;
    cp = byte & 0x0F;
  } else if ((byte & 0xF8) == 0xF0) {
    extra = 3;
    cp = byte & 0x07;
  } else {
    ++i;
    return byte;
  }
  if (i + extra >= text.size()) {
    ++i;
    return byte;
  }
  for (std::size_t k = 1; k <= extra; ++k) {
    const auto cont = static_cast<unsigned char>(text[i + k]);
    if ((cont & 0xC0) != 0x80) {
      ++i;
      return byte;
    }
    cp = (cp << 6) | (cont & 0x3F);
  }
  i += extra + 1;
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool is_space_cp(char32_t cp) {
  if (cp < 0x80) return std::isspace(static_cast<int>(cp)) != 0;
  return cp == 0x00A0 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x2028 || cp == 0x2029 ||
         cp == 0x202F || cp == 0x3000;
}

// ASCII punctuation plus the Latin-1 punctuation marks and the General
// Punctuation block: the hyphen/apostrophe/dash family note spellings use.
inline bool is_punct_cp(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  switch (cp) {
    case 0x00A1:
    case 0x00A7:
    case 0x00AB:
    case 0x00B6:
    case 0x00B7:
    case 0x00BB:
    case 0x00BF:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E);
}

inline char32_t lower_cp(char32_t cp) {
  if (cp < 0x80) return static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;  // Latin-1 capitals
  return cp;
}

inline std::string ascii_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Lowercases, deletes punctuation, and collapses whitespace runs to single
/// spaces: "Ylang-ylang" -> "ylangylang", "Sicilian Lemon" -> "sicilian lemon".
/// Multiword notes stay single tokens. Idempotent.
inline std::string normalize_note(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool saw_input = false;
  bool pending_space = false;
  std::size_t i = 0;
  while (i < raw.size()) {
    const char32_t cp = detail::next_codepoint(raw, i);
    if (detail::is_space_cp(cp)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    saw_input = true;
    if (detail::is_punct_cp(cp)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    detail::append_utf8(out, detail::lower_cp(cp));
  }
  if (!saw_input) throw ContractError("normalize_note: note is empty");
  if (out.empty()) {
    throw SchemaError("note \"" + std::string(raw) + "\" is empty after normalization");
  }
  return out;
}

/// Normalizes every note of a record. Notes that normalize to nothing (pure
/// punctuation) are dropped; `dropped` counts them when provided.
inline PerfumeRecord normalize_record(const PerfumeRecord& record, std::size_t* dropped = nullptr) {
  const auto normalize_list = [&](const std::vector<std::string>& in) {
    std::vector<std::string> out;
    out.reserve(in.size());
    for (const auto& raw : in) {
      try {
        out.push_back(normalize_note(raw));
      } catch (const Error&) {
        if (dropped) ++*dropped;
      }
    }
    return out;
  };
  return {record.id, record.name, normalize_list(record.top), normalize_list(record.heart),
          normalize_list(record.base)};
}

inline std::vector<PerfumeRecord> normalize_corpus(std::span<const PerfumeRecord> records,
                                                   std::size_t* dropped = nullptr) {
  std::vector<PerfumeRecord> out;
  out.reserve(records.size());
  for (const auto& record : records) out.push_back(normalize_record(record, dropped));
  return out;
}

enum class CorpusFormat { jsonl, csv };

namespace detail {

inline std::string field_error(std::size_t lineno, const std::string& message) {
  return "line " + std::to_string(lineno) + ": " + message;
}

inline std::string parse_string_field(const nlohmann::json& obj, const char* field,
                                      std::size_t lineno) {
  const auto it = obj.find(field);
  if (it == obj.end()) {
    throw SchemaError(field_error(lineno, "missing field \"" + std::string(field) + "\""));
  }
  if (it->is_string()) return it->get<std::string>();
  // some extractions carry bare numeric ids
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw SchemaError(field_error(lineno, "field \"" + std::string(field) + "\" must be a string"));
}

inline std::vector<std::string> parse_note_array(const nlohmann::json& obj, const char* field,
                                                 std::size_t lineno) {
  const auto it = obj.find(field);
  if (it == obj.end()) {
    throw SchemaError(field_error(lineno, "missing field \"" + std::string(field) + "\""));
  }
  if (!it->is_array()) {
    throw SchemaError(
        field_error(lineno, "field \"" + std::string(field) + "\" must be an array of strings"));
  }
  std::vector<std::string> notes;
  notes.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw SchemaError(
          field_error(lineno, "field \"" + std::string(field) + "\" must be an array of strings"));
    }
    notes.push_back(v.get<std::string>());
  }
  return notes;
}

// Field splitting for a single CSV record line (quotes and "" escapes).
inline std::vector<std::string> split_csv_row(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back().push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back().push_back(c);
    }
  }
  if (quoted) throw ParseError(lineno, "unterminated quote in CSV record");
  return fields;
}

inline std::string trim_ascii(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

// Notes inside a CSV cell are '|'-separated.
inline std::vector<std::string> split_notes_cell(const std::string& cell) {
  std::vector<std::string> notes;
  std::string current;
  for (const char c : cell) {
    if (c == '|') {
      if (auto t = trim_ascii(current); !t.empty()) notes.push_back(std::move(t));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (auto t = trim_ascii(current); !t.empty()) notes.push_back(std::move(t));
  return notes;
}

}  // namespace detail

/// Reads one record per line. Note strings come out exactly as written;
/// normalization is a separate step. Blank lines are skipped, and a CSV
/// header line "id,name,top,heart,base" is recognized and ignored.
inline std::vector<PerfumeRecord> parse_perfumes(std::istream& in, CorpusFormat format) {
  std::vector<PerfumeRecord> records;
  std::string line;
  std::size_t lineno = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    if (format == CorpusFormat::jsonl) {
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(lineno, e.what());
      }
      if (!obj.is_object()) throw ParseError(lineno, "expected a JSON object");
      PerfumeRecord record;
      record.id = detail::parse_string_field(obj, "id", lineno);
      record.name = detail::parse_string_field(obj, "name", lineno);
      record.top = detail::parse_note_array(obj, "top", lineno);
      record.heart = detail::parse_note_array(obj, "heart", lineno);
      record.base = detail::parse_note_array(obj, "base", lineno);
      records.push_back(std::move(record));
    } else {
      if (first_content_line && detail::ascii_lower(line) == "id,name,top,heart,base") {
        first_content_line = false;
        continue;
      }
      first_content_line = false;
      auto fields = detail::split_csv_row(line, lineno);
      if (fields.size() != 5) {
        throw SchemaError(detail::field_error(
            lineno, "expected 5 columns (id,name,top,heart,base), got " +
                        std::to_string(fields.size())));
      }
      records.push_back({std::move(fields[0]), std::move(fields[1]),
                         detail::split_notes_cell(fields[2]), detail::split_notes_cell(fields[3]),
                         detail::split_notes_cell(fields[4])});
    }
  }
  return records;
}

/// Keeps records whose note union has at least `min_notes` entries. All three
/// category lists always exist on a parsed record (possibly empty), so only
/// the union size can disqualify one. Order-preserving and idempotent.
inline std::vector<PerfumeRecord> filter_corpus(std::vector<PerfumeRecord> records,
                                                std::size_t min_notes = 3) {
  std::erase_if(records,
                [&](const PerfumeRecord& r) { return note_union(r).size() < min_notes; });
  return records;
}

struct CorpusStats {
  std::size_t n_perfumes = 0;
  std::size_t n_unique_notes = 0;
  double mean_notes_per_perfume = 0.0;
  double std_notes_per_perfume = 0.0;  // population standard deviation
  std::vector<std::pair<std::string, std::size_t>> top_notes;  // count-descending
};

/// Descriptive statistics over per-perfume note unions. A note counts once
/// per perfume no matter how many category lists mention it; frequency ties
/// break lexicographically.
inline CorpusStats corpus_stats(std::span<const PerfumeRecord> records, std::size_t top_k) {
  if (records.empty()) throw AnalysisError("corpus_stats: empty corpus");
  std::unordered_map<std::string, std::size_t> counts;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& record : records) {
    const auto notes = note_union(record);
    const double size = static_cast<double>(notes.size());
    sum += size;
    sum_sq += size * size;
    for (const auto& note : notes) ++counts[note];
  }
  const double n = static_cast<double>(records.size());
  const double mean = sum / n;
  const double variance = std::max(0.0, sum_sq / n - mean * mean);

  std::vector<std::pair<std::string, std::size_t>> top(counts.begin(), counts.end());
  std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  top.resize(std::min(top_k, top.size()));

  return {records.size(), counts.size(), mean, std::sqrt(variance), std::move(top)};
}

struct NoteSequence {
  std::string perfume_id;
  std::vector<std::string> tokens;
};

/// Draws `length` notes uniformly with replacement from the record's note
/// union. The union is sorted, so the output depends only on the seed.
inline NoteSequence build_sequence(const PerfumeRecord& record, std::size_t length, Rng& rng) {
  const auto notes = note_union(record);
  if (notes.empty()) {
    throw ContractError("build_sequence: perfume \"" + record.id + "\" has no notes");
  }
  NoteSequence sequence{record.id, {}};
  sequence.tokens.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    sequence.tokens.push_back(notes[uniform_index(rng, notes.size())]);
  }
  return sequence;
}

inline void to_json(nlohmann::json& j, const PerfumeRecord& record) {
  j = nlohmann::json{{"id", record.id},
                     {"name", record.name},
                     {"top", record.top},
                     {"heart", record.heart},
                     {"base", record.base}};
}

inline void to_json(nlohmann::json& j, const CorpusStats& stats) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& [note, count] : stats.top_notes) top.push_back({note, count});
  j = nlohmann::json{{"n_perfumes", stats.n_perfumes},
                     {"n_unique_notes", stats.n_unique_notes},
                     {"mean_notes_per_perfume", stats.mean_notes_per_perfume},
                     {"std_notes_per_perfume", stats.std_notes_per_perfume},
                     {"top_notes", std::move(top)}};
}

inline void write_corpus_jsonl(std::ostream& out, std::span<const PerfumeRecord> records) {
  for (const auto& record : records) {
    out << nlohmann::json(record).dump() << '\n';
  }
}

}  // namespace scentvec
