#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bbt/error.hpp"
#include "bbt/text.hpp"

namespace bbt {

// Training data subsets: authentic parallel data, backtranslated target-side
// monolingual data, and forward-translated source-side monolingual data.
enum class DatasetTag { auth, bt, ft };

inline constexpr std::array<DatasetTag, 3> kAllDatasets{DatasetTag::auth, DatasetTag::bt,
                                                        DatasetTag::ft};

inline constexpr std::size_t index_of(DatasetTag t) { return static_cast<std::size_t>(t); }

inline std::string_view to_string(DatasetTag t) {
  switch (t) {
    case DatasetTag::auth: return "auth";
    case DatasetTag::bt: return "bt";
    case DatasetTag::ft: return "ft";
  }
  return "?";
}

inline std::optional<DatasetTag> parse_dataset(std::string_view s) {
  for (auto t : kAllDatasets)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

using CheckpointId = std::string;

struct SentencePair {
  std::string source;
  std::string target;
  DatasetTag dataset = DatasetTag::auth;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

struct Corpus {
  std::string id;
  DatasetTag dataset = DatasetTag::auth;
  std::vector<SentencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct Hypothesis {
  std::size_t sentence_index = 0;
  std::string text;
  double model_score = 0.0;
  std::optional<CheckpointId> origin;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

// Hypotheses grouped by source sentence; sentences[i] holds the n-best for
// sentence i in file order.
struct NBestList {
  CheckpointId origin;
  std::vector<std::vector<Hypothesis>> sentences;

  std::size_t num_sentences() const { return sentences.size(); }
  std::size_t n() const {
    std::size_t m = 0;
    for (const auto& s : sentences) m = std::max(m, s.size());
    return m;
  }
  std::size_t num_hypotheses() const {
    std::size_t total = 0;
    for (const auto& s : sentences) total += s.size();
    return total;
  }
  friend bool operator==(const NBestList&, const NBestList&) = default;
};

struct NeTestCase {
  std::string source;
  std::string reference;
  std::string entity;

  friend bool operator==(const NeTestCase&, const NeTestCase&) = default;
};

// Checkpoint id derived from a file name: the stem up to the first '.'.
inline CheckpointId checkpoint_id_from_path(const std::string& path) {
  auto name = std::filesystem::path(path).filename().string();
  return name.substr(0, name.find('.'));
}

namespace detail {

inline std::vector<std::string_view> nonempty_lines(const std::string& path, std::string_view content) {
  auto ls = text::lines(content);
  if (ls.empty()) throw InputError(path + ": empty file");
  return ls;
}

inline std::vector<std::string_view> tab_fields(const std::string& path, std::size_t line_no,
                                                std::string_view line, std::size_t expected) {
  auto fields = text::split(line, "\t");
  if (fields.size() != expected)
    throw InputError(at_line(path, line_no) + "expected " + std::to_string(expected) +
                     " fields, got " + std::to_string(fields.size()));
  return fields;
}

}  // namespace detail

// Parses `source \t target` lines. `path` is only used in error messages.
inline Corpus parse_parallel(std::string_view content, DatasetTag tag, const std::string& path = "<input>") {
  text::require_utf8(content, path);
  Corpus corpus{checkpoint_id_from_path(path), tag, {}};
  const auto ls = detail::nonempty_lines(path, content);
  corpus.pairs.reserve(ls.size());
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const auto fields = detail::tab_fields(path, i + 1, ls[i], 2);
    if (text::trim(fields[0]).empty() || text::trim(fields[1]).empty())
      throw InputError(at_line(path, i + 1) + "empty source or target");
    corpus.pairs.push_back({std::string(fields[0]), std::string(fields[1]), tag});
  }
  return corpus;
}

inline Corpus load_parallel(const std::string& path, DatasetTag tag) {
  return parse_parallel(text::read_file(path), tag, path);
}

inline std::string format_parallel(const Corpus& corpus) {
  std::string out;
  for (const auto& p : corpus.pairs) out += p.source + "\t" + p.target + "\n";
  return out;
}

// Parses `index ||| text ||| score` lines. Indices must start at 0 and
// increase by at most one; scores must not increase within a sentence.
inline NBestList parse_nbest(std::string_view content, const std::string& path = "<input>") {
  text::require_utf8(content, path);
  NBestList list{checkpoint_id_from_path(path), {}};
  const auto ls = detail::nonempty_lines(path, content);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const auto where = at_line(path, i + 1);
    const auto fields = text::split(ls[i], " ||| ");
    if (fields.size() != 3)
      throw InputError(where + "expected `index ||| text ||| score`, got " + std::to_string(fields.size()) + " fields");
    const auto index = text::parse_number<std::size_t>(fields[0]);
    if (!index) throw InputError(where + "non-numeric sentence index '" + std::string(fields[0]) + "'");
    const auto score = text::parse_number<double>(fields[2]);
    if (!score || !std::isfinite(*score))
      throw InputError(where + "non-numeric score '" + std::string(fields[2]) + "'");

    const std::size_t expected = list.sentences.size();
    if (*index + 1 == expected) {
      if (*score > list.sentences.back().back().model_score)
        throw InputError(where + "score increases within sentence " + std::to_string(*index));
    } else if (*index == expected) {
      list.sentences.emplace_back();
    } else {
      throw InputError(where + "sentence index " + std::to_string(*index) + " out of sequence (expected " +
                       (expected == 0 ? std::string("0") : std::to_string(expected - 1) + " or " + std::to_string(expected)) + ")");
    }
    list.sentences.back().push_back({*index, std::string(fields[1]), *score, list.origin});
  }
  return list;
}

inline NBestList load_nbest(const std::string& path) { return parse_nbest(text::read_file(path), path); }

inline std::string format_nbest(const NBestList& list) {
  std::string out;
  for (const auto& sentence : list.sentences)
    for (const auto& h : sentence)
      out += std::to_string(h.sentence_index) + " ||| " + h.text + " ||| " + text::format_real(h.model_score) + "\n";
  return out;
}

inline std::vector<NeTestCase> parse_ne_testset(std::string_view content, const std::string& path = "<input>") {
  text::require_utf8(content, path);
  std::vector<NeTestCase> cases;
  const auto ls = detail::nonempty_lines(path, content);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const auto f = detail::tab_fields(path, i + 1, ls[i], 3);
    if (f[2].empty()) throw InputError(at_line(path, i + 1) + "empty entity");
    if (f[1].find(f[2]) == std::string_view::npos)
      throw InputError(at_line(path, i + 1) + "entity '" + std::string(f[2]) + "' does not occur in reference");
    cases.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
  }
  return cases;
}

inline std::vector<NeTestCase> load_ne_testset(const std::string& path) {
  return parse_ne_testset(text::read_file(path), path);
}

// Plain text, one sentence per line (hypotheses, references).
inline std::vector<std::string> load_lines(const std::string& path) {
  const auto content = text::read_utf8_file(path);
  std::vector<std::string> out;
  for (auto l : text::lines(content)) out.emplace_back(l);
  return out;
}

}  // namespace bbt
