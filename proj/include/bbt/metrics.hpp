#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "bbt/corpus.hpp"
#include "bbt/error.hpp"
#include "bbt/text.hpp"

namespace bbt {

// A sentence-level utility U(hypothesis, reference) in [0, 1] with
// U(x, x) = 1. Statistics are extracted once per sentence with prepare() so
// that pairwise scoring (MBR) does not re-tokenize.
template <class U>
concept Utility = requires(const U& u, std::string_view s, const typename U::Stats& st) {
  { u.prepare(s) } -> std::convertible_to<typename U::Stats>;
  { u.score(st, st) } -> std::convertible_to<double>;
  { u.name() } -> std::convertible_to<std::string>;
  { u.params() } -> std::convertible_to<std::string>;
  { U::kSymmetric } -> std::convertible_to<bool>;
};

namespace detail {

// Sorted (n-gram, count) table.
template <class Key>
using NgramCounts = std::vector<std::pair<Key, int>>;

template <class Key>
NgramCounts<Key> count_sorted(std::vector<Key> grams) {
  std::sort(grams.begin(), grams.end());
  NgramCounts<Key> out;
  for (auto& g : grams) {
    if (!out.empty() && out.back().first == g) {
      ++out.back().second;
    } else {
      out.emplace_back(std::move(g), 1);
    }
  }
  return out;
}

// Sum over shared n-grams of min(count_h, count_r).
template <class Key>
long clipped_matches(const NgramCounts<Key>& hyp, const NgramCounts<Key>& ref) {
  long matches = 0;
  auto h = hyp.begin();
  auto r = ref.begin();
  while (h != hyp.end() && r != ref.end()) {
    if (h->first < r->first) {
      ++h;
    } else if (r->first < h->first) {
      ++r;
    } else {
      matches += std::min(h->second, r->second);
      ++h, ++r;
    }
  }
  return matches;
}

}  // namespace detail

// ---------------------------------------------------------------- chrF

// Character n-gram F-score. Whitespace is removed before extraction;
// precision and recall are averaged over the orders for which both sides
// have n-grams, then combined into F_beta (sacreBLEU 2.x semantics).
struct ChrfUtility {
  static constexpr bool kSymmetric = false;

  int max_n = 6;
  double beta = 2.0;

  struct Stats {
    std::size_t length = 0;
    std::vector<detail::NgramCounts<std::u32string>> orders;
    std::vector<long> totals;
  };

  ChrfUtility() = default;
  ChrfUtility(int max_n_, double beta_) : max_n(max_n_), beta(beta_) {
    if (max_n < 1) throw InputError("chrf: max_n must be >= 1");
    if (!(beta > 0)) throw InputError("chrf: beta must be > 0");
  }

  std::string name() const { return "chrf"; }
  std::string params() const { return "max_n=" + std::to_string(max_n) + " beta=" + text::format_real(beta); }

  Stats prepare(std::string_view sentence) const {
    std::u32string chars;
    for (char32_t c : text::decode_utf8(sentence))
      if (!text::is_unicode_space(c)) chars.push_back(c);
    Stats st;
    st.length = chars.size();
    for (int n = 1; n <= max_n; ++n) {
      std::vector<std::u32string> grams;
      const auto un = static_cast<std::size_t>(n);
      for (std::size_t i = 0; i + un <= chars.size(); ++i) grams.push_back(chars.substr(i, un));
      st.totals.push_back(static_cast<long>(grams.size()));
      st.orders.push_back(detail::count_sorted(std::move(grams)));
    }
    return st;
  }

  struct Components {
    double precision = 0.0;
    double recall = 0.0;
    int effective_orders = 0;
  };

  // Precision and recall averaged over the effective orders.
  Components components(const Stats& hyp, const Stats& ref) const {
    Components c;
    for (std::size_t n = 0; n < hyp.orders.size(); ++n) {
      if (hyp.totals[n] == 0 || ref.totals[n] == 0) continue;
      const auto m = static_cast<double>(detail::clipped_matches(hyp.orders[n], ref.orders[n]));
      c.precision += m / static_cast<double>(hyp.totals[n]);
      c.recall += m / static_cast<double>(ref.totals[n]);
      ++c.effective_orders;
    }
    if (c.effective_orders > 0) {
      c.precision /= c.effective_orders;
      c.recall /= c.effective_orders;
    }
    return c;
  }

  double score(const Stats& hyp, const Stats& ref) const {
    if (hyp.length == 0 && ref.length == 0) return 1.0;
    if (hyp.length == 0 || ref.length == 0) return 0.0;
    const auto c = components(hyp, ref);
    if (c.effective_orders == 0 || c.precision + c.recall == 0.0) return 0.0;
    const double b2 = beta * beta;
    return (1 + b2) * c.precision * c.recall / (b2 * c.precision + c.recall);
  }
};

inline double chrf(std::string_view hypothesis, std::string_view reference, int max_n = 6, double beta = 2.0) {
  const ChrfUtility u{max_n, beta};
  return u.score(u.prepare(hypothesis), u.prepare(reference));
}

// ---------------------------------------------------------------- BLEU

// mteval-v13a tokenization as used by sacreBLEU's default tokenizer.
inline std::vector<std::string> tokenize_13a(std::string_view sentence) {
  std::string line(sentence);
  const auto replace_all = [&line](std::string_view from, std::string_view to) {
    for (std::size_t pos = 0; (pos = line.find(from, pos)) != std::string::npos; pos += to.size())
      line.replace(pos, from.size(), to);
  };
  replace_all("<skipped>", "");
  replace_all("-\n", "");
  replace_all("\n", " ");
  if (line.find('&') != std::string::npos) {
    replace_all("&quot;", "\"");
    replace_all("&amp;", "&");
    replace_all("&lt;", "<");
    replace_all("&gt;", ">");
  }
  line = " " + line + " ";

  static const std::array<std::pair<std::regex, const char*>, 4> rules{{
      {std::regex(R"(([{-~\[-` -&(-+:-@/]))"), " $1 "},
      {std::regex(R"(([^0-9])([.,]))"), "$1 $2 "},
      {std::regex(R"(([.,])([^0-9]))"), " $1 $2"},
      {std::regex(R"(([0-9])(-))"), "$1 $2 "},
  }};
  for (const auto& [re, replacement] : rules) line = std::regex_replace(line, re, replacement);

  std::vector<std::string> tokens;
  for (auto t : text::split_whitespace(line)) tokens.emplace_back(t);
  return tokens;
}

struct BleuStats {
  long hyp_length = 0;
  long ref_length = 0;
  std::vector<long> matches;
  std::vector<long> totals;
};

namespace detail {

inline std::vector<NgramCounts<std::string>> token_ngrams(const std::vector<std::string>& tokens, int max_n) {
  std::vector<NgramCounts<std::string>> out;
  for (int n = 1; n <= max_n; ++n) {
    std::vector<std::string> grams;
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (std::size_t k = 1; k < un; ++k) (g += '\x1f') += tokens[i + k];
      grams.push_back(std::move(g));
    }
    out.push_back(count_sorted(std::move(grams)));
  }
  return out;
}

}  // namespace detail

// Smoothed sentence-level BLEU: add-one smoothing on orders >= 2,
// brevity penalty, 13a tokenization.
struct SentenceBleuUtility {
  static constexpr bool kSymmetric = false;

  int max_n = 4;

  struct Stats {
    long length = 0;
    std::vector<detail::NgramCounts<std::string>> orders;
  };

  SentenceBleuUtility() = default;
  explicit SentenceBleuUtility(int max_n_) : max_n(max_n_) {
    if (max_n < 1) throw InputError("sentence_bleu: max_n must be >= 1");
  }

  std::string name() const { return "sbleu"; }
  std::string params() const { return "max_n=" + std::to_string(max_n) + " smoothing=add-one(n>=2)"; }

  Stats prepare(std::string_view sentence) const {
    const auto tokens = tokenize_13a(sentence);
    return {static_cast<long>(tokens.size()), detail::token_ngrams(tokens, max_n)};
  }

  double score(const Stats& hyp, const Stats& ref) const {
    if (hyp.length == 0 && ref.length == 0) return 1.0;
    if (hyp.length == 0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 0; n < hyp.orders.size(); ++n) {
      const auto m = static_cast<double>(detail::clipped_matches(hyp.orders[n], ref.orders[n]));
      const auto total = static_cast<double>(std::max<long>(hyp.length - static_cast<long>(n), 0));
      if (n == 0) {
        if (m == 0) return 0.0;
        log_sum += std::log(m / total);
      } else {
        log_sum += std::log((m + 1) / (total + 1));
      }
    }
    const double bp = hyp.length < ref.length
                          ? std::exp(1.0 - static_cast<double>(ref.length) / static_cast<double>(hyp.length))
                          : 1.0;
    return bp * std::exp(log_sum / static_cast<double>(hyp.orders.size()));
  }
};

inline double sentence_bleu(std::string_view hypothesis, std::string_view reference, int max_n = 4) {
  const SentenceBleuUtility u{max_n};
  return u.score(u.prepare(hypothesis), u.prepare(reference));
}

// U = 1 iff the texts are byte-identical.
struct ExactMatchUtility {
  static constexpr bool kSymmetric = true;
  using Stats = std::string;
  std::string name() const { return "exact"; }
  std::string params() const { return ""; }
  Stats prepare(std::string_view s) const { return std::string(s); }
  double score(const Stats& h, const Stats& r) const { return h == r ? 1.0 : 0.0; }
};

using UtilityMetric = std::variant<ChrfUtility, SentenceBleuUtility, ExactMatchUtility>;

inline UtilityMetric make_utility(std::string_view name) {
  if (name == "chrf") return ChrfUtility{};
  if (name == "sbleu") return SentenceBleuUtility{};
  if (name == "exact") return ExactMatchUtility{};
  throw InputError("unknown utility '" + std::string(name) + "' (expected chrf, sbleu or exact)");
}

inline BleuStats bleu_statistics(std::string_view hypothesis, std::string_view reference, int max_n = 4) {
  const auto hyp_tokens = tokenize_13a(hypothesis);
  const auto ref_tokens = tokenize_13a(reference);
  const auto h = detail::token_ngrams(hyp_tokens, max_n);
  const auto r = detail::token_ngrams(ref_tokens, max_n);
  BleuStats st;
  st.hyp_length = static_cast<long>(hyp_tokens.size());
  st.ref_length = static_cast<long>(ref_tokens.size());
  for (int n = 0; n < max_n; ++n) {
    st.matches.push_back(detail::clipped_matches(h[static_cast<std::size_t>(n)], r[static_cast<std::size_t>(n)]));
    st.totals.push_back(std::max<long>(st.hyp_length - n, 0));
  }
  return st;
}

// Corpus BLEU on a 0-100 scale. Orders without any hypothesis n-grams in the
// whole corpus are left out of the geometric mean.
inline double corpus_bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                          int max_n = 4) {
  if (hypotheses.size() != references.size())
    throw InputError("corpus_bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                     std::to_string(references.size()) + " references");
  if (hypotheses.empty()) throw InputError("corpus_bleu: empty corpus");
  BleuStats total;
  total.matches.assign(static_cast<std::size_t>(max_n), 0);
  total.totals.assign(static_cast<std::size_t>(max_n), 0);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto st = bleu_statistics(hypotheses[i], references[i], max_n);
    total.hyp_length += st.hyp_length;
    total.ref_length += st.ref_length;
    for (std::size_t n = 0; n < st.matches.size(); ++n) {
      total.matches[n] += st.matches[n];
      total.totals[n] += st.totals[n];
    }
  }
  if (total.hyp_length == 0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t n = 0; n < total.matches.size(); ++n) {
    if (total.totals[n] == 0) continue;
    if (total.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(total.matches[n]) / static_cast<double>(total.totals[n]));
    ++orders;
  }
  const double c = static_cast<double>(total.hyp_length);
  const double r = static_cast<double>(total.ref_length);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_sum / orders);
}

// ---------------------------------------------------------------- NE accuracy

namespace detail {

inline bool is_word_char(char32_t c) {
  if (c < 0x80) return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  if (text::is_unicode_space(c)) return false;
  if (c >= 0x2000 && c <= 0x206F) return false;  // general punctuation
  if (c >= 0x3000 && c <= 0x303F) return false;  // CJK punctuation
  switch (c) {
    case 0xA1: case 0xAB: case 0xB7: case 0xBB: case 0xBF: return false;
    default: return true;
  }
}

inline char32_t char_before(std::string_view s, std::size_t pos) {
  std::size_t start = pos - 1;
  while (start > 0 && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80 && pos - start < 4) --start;
  const auto d = text::decode_one(s, start);
  return d && start + d->length == pos ? d->code_point : char32_t{0xFFFD};
}

inline char32_t char_at(std::string_view s, std::size_t pos) {
  const auto d = text::decode_one(s, pos);
  return d ? d->code_point : char32_t{0xFFFD};
}

}  // namespace detail

// True if `entity` occurs in `hypothesis` as a case-sensitive substring whose
// neighbours (if any) are not word characters.
inline bool contains_entity(std::string_view hypothesis, std::string_view entity) {
  if (entity.empty()) return false;
  for (std::size_t pos = hypothesis.find(entity); pos != std::string_view::npos;
       pos = hypothesis.find(entity, pos + 1)) {
    const std::size_t end = pos + entity.size();
    const bool left_ok = pos == 0 || !detail::is_word_char(detail::char_before(hypothesis, pos));
    const bool right_ok = end == hypothesis.size() || !detail::is_word_char(detail::char_at(hypothesis, end));
    if (left_ok && right_ok) return true;
  }
  return false;
}

inline std::vector<bool> ne_matches(const std::vector<std::string>& hypotheses, const std::vector<NeTestCase>& cases) {
  if (hypotheses.size() != cases.size())
    throw InputError("ne_accuracy: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                     std::to_string(cases.size()) + " test cases");
  std::vector<bool> hits;
  hits.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) hits.push_back(contains_entity(hypotheses[i], cases[i].entity));
  return hits;
}

inline double ne_accuracy(const std::vector<std::string>& hypotheses, const std::vector<NeTestCase>& cases) {
  const auto hits = ne_matches(hypotheses, cases);
  if (hits.empty()) return 0.0;
  return static_cast<double>(std::count(hits.begin(), hits.end(), true)) / static_cast<double>(hits.size());
}

// ---------------------------------------------------------------- score files

struct ScoreReport {
  std::string metric;
  double corpus_score = 0.0;
  std::vector<double> per_sentence;
  std::optional<CheckpointId> checkpoint;
};

// One decimal per line; `#` lines are comments, `# metric=<name>` names the
// metric. corpus_score is the arithmetic mean.
inline ScoreReport parse_external_scores(std::string_view content, const std::string& path = "<input>") {
  ScoreReport report{"external", 0.0, {}, std::nullopt};
  const auto ls = text::lines(content);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const auto line = text::trim(ls[i]);
    if (!line.empty() && line.front() == '#') {
      auto body = text::trim(line.substr(1));
      if (body.starts_with("metric=")) report.metric = std::string(text::trim(body.substr(7)));
      continue;
    }
    const auto v = text::parse_number<double>(line);
    if (!v || !std::isfinite(*v)) throw InputError(at_line(path, i + 1) + "expected a number, got '" + std::string(line) + "'");
    report.per_sentence.push_back(*v);
  }
  if (report.per_sentence.empty()) throw InputError(path + ": no scores");
  double sum = 0.0;
  for (double v : report.per_sentence) sum += v;
  report.corpus_score = sum / static_cast<double>(report.per_sentence.size());
  return report;
}

inline ScoreReport load_external_scores(const std::string& path) {
  auto report = parse_external_scores(text::read_file(path), path);
  report.checkpoint = checkpoint_id_from_path(path);
  return report;
}

}  // namespace bbt
