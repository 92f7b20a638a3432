#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "bbt/corpus.hpp"
#include "bbt/error.hpp"
#include "bbt/metrics.hpp"
#include "bbt/schedule.hpp"

namespace bbt {

struct PoolOrigin {
  CheckpointId checkpoint;
  std::optional<BlockType> block_type;
  friend bool operator==(const PoolOrigin&, const PoolOrigin&) = default;
};

// Per-sentence concatenation of n-best lists from several checkpoints.
struct HypothesisPool {
  std::vector<PoolOrigin> origins;
  std::vector<std::vector<Hypothesis>> sentences;

  std::size_t num_sentences() const { return sentences.size(); }

  // Every sentence must be non-empty and contain hypotheses from every origin.
  void validate() const {
    std::set<CheckpointId> expected;
    for (const auto& o : origins) expected.insert(o.checkpoint);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (sentences[i].empty()) throw InputError("pool sentence " + std::to_string(i) + " is empty");
      if (origins.empty()) continue;
      std::set<CheckpointId> seen;
      for (const auto& h : sentences[i]) seen.insert(h.origin.value_or(""));
      if (seen != expected)
        throw InputError("pool sentence " + std::to_string(i) + " does not cover every checkpoint");
    }
  }
};

// Concatenates n-best lists in the given order; lists must cover the same
// sentences. Duplicates are retained.
inline HypothesisPool concatenate_nbest(std::span<const NBestList> lists,
                                        const std::map<CheckpointId, BlockType>& block_types = {}) {
  if (lists.empty()) throw InputError("no n-best lists to pool");
  HypothesisPool pool;
  pool.sentences.resize(lists.front().num_sentences());
  for (const auto& list : lists) {
    if (list.num_sentences() != pool.sentences.size())
      throw InputError("n-best list '" + list.origin + "' covers " + std::to_string(list.num_sentences()) +
                       " sentences, expected " + std::to_string(pool.sentences.size()));
    std::optional<BlockType> type;
    if (auto it = block_types.find(list.origin); it != block_types.end()) type = it->second;
    pool.origins.push_back({list.origin, type});
    for (std::size_t i = 0; i < list.num_sentences(); ++i)
      for (auto h : list.sentences[i]) {
        h.origin = list.origin;
        pool.sentences[i].push_back(std::move(h));
      }
  }
  pool.validate();
  return pool;
}

struct MbrChoice {
  std::size_t index = 0;
  double consensus = 0.0;
};

// Picks the hypothesis with the highest mean utility against all other pool
// members (never against itself). Ties go to the lowest index. A singleton
// pool yields index 0 with consensus 1. When `row` is given it receives the
// consensus of every hypothesis.
template <Utility U>
MbrChoice mbr_select(std::span<const Hypothesis> pool, const U& utility, std::vector<double>* row = nullptr) {
  if (pool.empty()) throw InputError("mbr_select: empty pool");
  const std::size_t n = pool.size();
  if (n == 1) {
    if (row) row->assign(1, 1.0);
    return {0, 1.0};
  }
  std::vector<typename U::Stats> stats;
  stats.reserve(n);
  for (const auto& h : pool) stats.push_back(utility.prepare(h.text));

  std::vector<double> sums(n, 0.0);
  if constexpr (U::kSymmetric) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double u = utility.score(stats[i], stats[j]);
        sums[i] += u;
        sums[j] += u;
      }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) sums[i] += utility.score(stats[i], stats[j]);
  }
  MbrChoice best{0, sums[0] / static_cast<double>(n - 1)};
  for (std::size_t i = 1; i < n; ++i) {
    const double c = sums[i] / static_cast<double>(n - 1);
    if (c > best.consensus) best = {i, c};
  }
  if (row) {
    row->resize(n);
    for (std::size_t i = 0; i < n; ++i) (*row)[i] = sums[i] / static_cast<double>(n - 1);
  }
  return best;
}

struct MbrSentenceResult {
  std::size_t pool_index = 0;
  Hypothesis chosen;
  double consensus = 0.0;
  std::vector<double> utility_row;  // filled only on request
};

struct MbrResult {
  std::vector<MbrSentenceResult> sentences;
  double mean_consensus = 0.0;

  std::vector<std::string> translations() const {
    std::vector<std::string> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(s.chosen.text);
    return out;
  }
};

template <Utility U>
MbrResult mbr_rerank(const HypothesisPool& pool, const U& utility, bool keep_rows = false) {
  pool.validate();
  MbrResult result;
  result.sentences.reserve(pool.num_sentences());
  double total = 0.0;
  for (const auto& sentence : pool.sentences) {
    MbrSentenceResult r;
    const auto choice = mbr_select(std::span<const Hypothesis>(sentence), utility, keep_rows ? &r.utility_row : nullptr);
    r.pool_index = choice.index;
    r.chosen = sentence[choice.index];
    r.consensus = choice.consensus;
    total += choice.consensus;
    result.sentences.push_back(std::move(r));
  }
  result.mean_consensus = pool.num_sentences() == 0 ? 0.0 : total / static_cast<double>(pool.num_sentences());
  return result;
}

inline MbrResult mbr_rerank(const HypothesisPool& pool, const UtilityMetric& utility, bool keep_rows = false) {
  return std::visit([&](const auto& u) { return mbr_rerank(pool, u, keep_rows); }, utility);
}

// ---------------------------------------------------------------- combinations

// Checkpoints of each block type (auth, bt, ft), best first.
using BlockCheckpoints = std::array<std::vector<CheckpointId>, 3>;

// How many n-best lists to take from each block type: (auth, bt, ft).
struct CombinationSpec {
  std::array<std::size_t, 3> counts{0, 0, 0};

  std::size_t total() const { return counts[0] + counts[1] + counts[2]; }
  std::size_t block_types_used() const {
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
  }
  friend auto operator<=>(const CombinationSpec&, const CombinationSpec&) = default;
};

inline std::string to_string(const CombinationSpec& s) {
  return "(" + std::to_string(s.counts[0]) + "," + std::to_string(s.counts[1]) + "," + std::to_string(s.counts[2]) + ")";
}

// Groups checkpoints by block type and orders each group by descending
// external score (stable for equal scores).
inline BlockCheckpoints sort_checkpoints(const std::vector<CheckpointTag>& tags, const std::map<CheckpointId, double>& scores) {
  std::array<std::vector<std::pair<double, CheckpointId>>, 3> grouped;
  for (const auto& t : tags) {
    const auto d = dataset_of(t.block_type);
    if (!d) throw InputError("checkpoint " + t.checkpoint_id + " has block type mixed; pools need auth/bt/ft");
    double s = 0.0;
    if (!scores.empty()) {
      auto it = scores.find(t.checkpoint_id);
      if (it == scores.end()) throw InputError("no external score for checkpoint " + t.checkpoint_id);
      s = it->second;
    }
    grouped[index_of(*d)].emplace_back(s, t.checkpoint_id);
  }
  BlockCheckpoints out;
  for (std::size_t b = 0; b < 3; ++b) {
    std::stable_sort(grouped[b].begin(), grouped[b].end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (auto& [s, id] : grouped[b]) out[b].push_back(id);
  }
  return out;
}

// Takes the top counts[b] checkpoints of each block type and concatenates
// their n-best lists in (auth, bt, ft; best-first) order.
inline HypothesisPool build_pool(const CombinationSpec& spec, const BlockCheckpoints& available,
                                 const std::map<CheckpointId, NBestList>& nbest_store) {
  if (spec.total() == 0) throw InputError("combination " + to_string(spec) + " selects no n-best lists");
  std::vector<NBestList> lists;
  std::map<CheckpointId, BlockType> types;
  for (std::size_t b = 0; b < 3; ++b) {
    if (spec.counts[b] > available[b].size())
      throw InputError("combination " + to_string(spec) + " needs " + std::to_string(spec.counts[b]) + " " +
                       std::string(to_string(kAllDatasets[b])) + " checkpoints, only " +
                       std::to_string(available[b].size()) + " available");
    for (std::size_t k = 0; k < spec.counts[b]; ++k) {
      const auto& id = available[b][k];
      auto it = nbest_store.find(id);
      if (it == nbest_store.end()) throw InputError("no n-best list for checkpoint " + id);
      NBestList list = it->second;
      list.origin = id;
      lists.push_back(std::move(list));
      types[id] = block_type_of(kAllDatasets[b]);
    }
  }
  return concatenate_nbest(lists, types);
}

// All (a, c, e) with a+c+e == total_k (or 1 <= a+c+e <= total_k when
// allow_fewer) and each part within availability, in lexicographic order.
inline std::vector<CombinationSpec> enumerate_combinations(std::size_t total_k, const std::array<std::size_t, 3>& available,
                                                           bool allow_fewer = false) {
  std::vector<CombinationSpec> out;
  for (std::size_t a = 0; a <= std::min(total_k, available[0]); ++a)
    for (std::size_t c = 0; c <= std::min(total_k - a, available[1]); ++c) {
      const std::size_t rest = total_k - a - c;
      if (allow_fewer) {
        for (std::size_t e = 0; e <= std::min(rest, available[2]); ++e)
          if (a + c + e >= 1) out.push_back({{a, c, e}});
      } else if (rest <= available[2]) {
        out.push_back({{a, c, rest}});
      }
    }
  return out;
}

struct RankedCombination {
  CombinationSpec spec;
  double score = 0.0;
};

// Evaluates every composition: builds its pool, reranks it, and scores the
// selection by mean utility against `references` (when given) or by mean
// consensus. Sorted by score descending, ties by ascending (a, c, e).
template <Utility U>
std::vector<RankedCombination> combination_search(const BlockCheckpoints& available, std::size_t total_k,
                                                  const std::map<CheckpointId, NBestList>& nbest_store, const U& utility,
                                                  const std::optional<std::vector<std::string>>& references = std::nullopt,
                                                  bool allow_fewer = false) {
  if (total_k == 0) throw InputError("total_k must be >= 1");
  const auto specs = enumerate_combinations(total_k, {available[0].size(), available[1].size(), available[2].size()}, allow_fewer);
  if (specs.empty()) throw InputError("no combination of " + std::to_string(total_k) + " checkpoints is available");
  std::vector<typename U::Stats> ref_stats;
  if (references)
    for (const auto& r : *references) ref_stats.push_back(utility.prepare(r));

  std::vector<RankedCombination> ranked;
  ranked.reserve(specs.size());
  for (const auto& spec : specs) {
    const auto pool = build_pool(spec, available, nbest_store);
    const auto result = mbr_rerank(pool, utility);
    double score = result.mean_consensus;
    if (references) {
      if (ref_stats.size() != pool.num_sentences())
        throw InputError(std::to_string(ref_stats.size()) + " references for " + std::to_string(pool.num_sentences()) + " sentences");
      double sum = 0.0;
      for (std::size_t i = 0; i < ref_stats.size(); ++i)
        sum += utility.score(utility.prepare(result.sentences[i].chosen.text), ref_stats[i]);
      score = sum / static_cast<double>(ref_stats.size());
    }
    ranked.push_back({spec, score});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedCombination& x, const RankedCombination& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.spec < y.spec;
  });
  return ranked;
}

inline std::vector<RankedCombination> combination_search(const BlockCheckpoints& available, std::size_t total_k,
                                                         const std::map<CheckpointId, NBestList>& nbest_store,
                                                         const UtilityMetric& utility,
                                                         const std::optional<std::vector<std::string>>& references = std::nullopt,
                                                         bool allow_fewer = false) {
  return std::visit(
      [&](const auto& u) { return combination_search(available, total_k, nbest_store, u, references, allow_fewer); },
      utility);
}

}  // namespace bbt
