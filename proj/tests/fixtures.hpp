#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "bbt/mbr.hpp"
#include "bbt/toytrain.hpp"

namespace bbt::testing {

// Random short sentences over a small vocabulary, so pools contain many
// near-duplicates and partial overlaps.
inline std::string synthetic_sentence(std::mt19937_64& rng) {
  static const std::vector<std::string> vocab{"the", "a",     "cat",   "dog",   "sat",  "on",   "mat",  "rug",
                                              "big", "small", "red",   "kočka", "pes",  "seděl", "na",  "koberci",
                                              "U",   "Karla", "near",  "river", "old",  "new",  ".",    ","};
  std::string s;
  const auto n = 3 + rng() % 7;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + vocab[rng() % vocab.size()];
  return s;
}

// One pool per sentence: `lists` checkpoints times `nbest` hypotheses,
// perturbed copies of a per-sentence base so hypotheses agree partially.
inline std::vector<std::vector<Hypothesis>> synthetic_pools(std::size_t sentences, std::size_t lists, std::size_t nbest,
                                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Hypothesis>> pools(sentences);
  for (std::size_t s = 0; s < sentences; ++s) {
    const auto base = synthetic_sentence(rng);
    for (std::size_t l = 0; l < lists; ++l)
      for (std::size_t k = 0; k < nbest; ++k) {
        std::string text = rng() % 3 == 0 ? synthetic_sentence(rng) : base;
        if (rng() % 2) text += " " + synthetic_sentence(rng).substr(0, 1 + rng() % 6);
        pools[s].push_back({s, text, -static_cast<double>(k), "ckpt_" + std::to_string(l)});
      }
  }
  return pools;
}

// Complementary-errors fixture: every checkpoint of a block type makes the
// same characteristic error. Each list is [one error, that error plus one
// more, correct]. A single-type pool's consensus centers on the shared
// error; pools mixing block types center on the correct sentence.
struct DiversityFixture {
  BlockCheckpoints available;
  std::map<CheckpointId, NBestList> store;
  std::vector<std::string> references;
};

inline DiversityFixture diversity_fixture(std::size_t per_type = 3) {
  struct Sentence {
    std::string correct;
    std::array<std::string, 3> err;   // per block type
    std::array<std::string, 3> err2;  // err plus a second mistake
  };
  const std::vector<Sentence> sentences{
      {"the quick brown fox jumps over the lazy dog",
       {"the quick brown cat jumps over the lazy dog", "the quick brown fox leaps over the lazy dog",
        "the quick brown fox jumps over the lazy cow"},
       {"the slow brown cat jumps over the lazy dog", "the quick brown fox leaps over a lazy dog",
        "the quick brown fox jumps under the lazy cow"}},
      {"we had dinner at U Karla near the old bridge",
       {"we had lunch at U Karla near the old bridge", "we had dinner at Karla near the old bridge",
        "we had dinner at U Karla near the new bridge"},
       {"we had lunch at U Karla by the old bridge", "we ate dinner at Karla near the old bridge",
        "we had dinner at U Karla near the new tower"}},
      {"kočka seděla na koberci u okna",
       {"pes seděla na koberci u okna", "kočka stála na koberci u okna", "kočka seděla na stole u okna"},
       {"pes seděla na koberci u dveří", "kočka stála na zemi u okna", "kočka ležela na stole u okna"}},
  };
  DiversityFixture f;
  for (const auto& s : sentences) f.references.push_back(s.correct);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t k = 0; k < per_type; ++k) {
      const std::string id = std::string(to_string(kAllDatasets[b])) + "_" + std::to_string(k);
      f.available[b].push_back(id);
      NBestList list;
      list.origin = id;
      for (std::size_t i = 0; i < sentences.size(); ++i)
        list.sentences.push_back({{i, sentences[i].err[b], -1.0, id},
                                  {i, sentences[i].err2[b], -2.0, id},
                                  {i, sentences[i].correct, -3.0, id}});
      f.store[id] = list;
    }
  return f;
}

// The toytrain CLI defaults: 8-dim domains at distance 1, blocks of 200
// updates, checkpoints every 25, avg8 (one block), alpha 0.001.
struct ToySetup {
  std::array<SyntheticDomain, 3> domains;
  ToyConfig config;
};

inline ToySetup toy_setup(std::uint64_t seed, Regime regime = Regime::block) {
  ToySetup s{make_domains(8, 1.0, 0.1, 2000, 500, seed), {}};
  s.config.manifest = regime == Regime::block ? compile_block_schedule(200, 8000, 25) : compile_mixed_schedule(8000, 25);
  s.config.lr = 0.05;
  s.config.batch_size = 8;
  s.config.alpha = 0.001;
  s.config.avg_k = 8;
  s.config.eval_every = 25;
  s.config.seed = seed;
  return s;
}

inline constexpr std::array<std::uint64_t, 10> kToySeeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

}  // namespace bbt::testing
