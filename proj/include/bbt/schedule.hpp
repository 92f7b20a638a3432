#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bbt/corpus.hpp"
#include "bbt/error.hpp"
#include "bbt/text.hpp"

namespace bbt {

enum class Regime { block, mixed };

// Dataset of a schedule entry; `mixed` is the shuffled concatenation of all
// three subsets.
enum class BlockType { auth, bt, ft, mixed };

inline std::string_view to_string(Regime r) { return r == Regime::block ? "block" : "mixed"; }

inline std::optional<Regime> parse_regime(std::string_view s) {
  if (s == "block") return Regime::block;
  if (s == "mixed") return Regime::mixed;
  return std::nullopt;
}

inline std::string_view to_string(BlockType b) {
  return b == BlockType::mixed ? std::string_view("mixed") : to_string(static_cast<DatasetTag>(b));
}

inline std::optional<BlockType> parse_block_type(std::string_view s) {
  if (s == "mixed") return BlockType::mixed;
  if (auto d = parse_dataset(s)) return static_cast<BlockType>(*d);
  return std::nullopt;
}

inline BlockType block_type_of(DatasetTag d) { return static_cast<BlockType>(d); }

inline std::optional<DatasetTag> dataset_of(BlockType b) {
  if (b == BlockType::mixed) return std::nullopt;
  return static_cast<DatasetTag>(b);
}

// Block regime visits the datasets in this order, repeating.
inline constexpr std::array<DatasetTag, 4> kBlockCycle{DatasetTag::auth, DatasetTag::bt, DatasetTag::auth,
                                                       DatasetTag::ft};

struct ScheduleEntry {
  std::int64_t start = 0;  // inclusive
  std::int64_t end = 0;    // exclusive
  BlockType dataset = BlockType::auth;
  std::int64_t block_index = 0;

  std::int64_t length() const { return end - start; }
  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

struct CheckpointTag {
  CheckpointId checkpoint_id;
  std::int64_t update = 0;
  BlockType block_type = BlockType::auth;
  std::int64_t block_index = 0;
  // Set on averaged snapshots whose window covers more than one block.
  bool spans_blocks = false;

  friend bool operator==(const CheckpointTag&, const CheckpointTag&) = default;
};

inline CheckpointId checkpoint_name(std::int64_t update) { return "ckpt_" + std::to_string(update); }

struct ScheduleManifest {
  Regime regime = Regime::block;
  std::int64_t block_size = 0;
  std::int64_t total_updates = 0;
  std::int64_t checkpoint_interval = 0;
  std::vector<ScheduleEntry> entries;
  std::vector<std::string> warnings;

  // Entry whose range [start, end) contains `update`. The final update
  // (== total_updates) belongs to the last entry.
  const ScheduleEntry& entry_at(std::int64_t update) const {
    if (update < 0 || update > total_updates || entries.empty())
      throw InputError("update " + std::to_string(update) + " outside schedule [0, " + std::to_string(total_updates) + "]");
    if (update == total_updates) return entries.back();
    auto it = std::upper_bound(entries.begin(), entries.end(), update,
                               [](std::int64_t u, const ScheduleEntry& e) { return u < e.start; });
    return *std::prev(it);
  }

  std::vector<CheckpointTag> checkpoints() const {
    std::vector<CheckpointTag> tags;
    for (std::int64_t u = checkpoint_interval; u <= total_updates; u += checkpoint_interval) {
      const auto& e = entry_at(u);
      tags.push_back({checkpoint_name(u), u, e.dataset, e.block_index, false});
    }
    return tags;
  }

  // Throws if the entries do not partition [0, total_updates).
  void validate() const {
    if (entries.empty()) throw InputError("schedule has no entries");
    std::int64_t at = 0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (e.start != at || e.end <= e.start)
        throw InputError("schedule entry " + std::to_string(k) + " breaks the partition at update " + std::to_string(at));
      if (e.block_index != static_cast<std::int64_t>(k))
        throw InputError("schedule entry " + std::to_string(k) + " has block_index " + std::to_string(e.block_index));
      if (regime == Regime::block) {
        if (e.dataset != block_type_of(kBlockCycle[k % kBlockCycle.size()]))
          throw InputError("schedule entry " + std::to_string(k) + " breaks the auth,bt,auth,ft cycle");
        if (e.length() != block_size && k + 1 != entries.size())
          throw InputError("schedule entry " + std::to_string(k) + " is shorter than the block size");
      } else if (e.dataset != BlockType::mixed) {
        throw InputError("mixed schedule entry " + std::to_string(k) + " is not tagged mixed");
      }
      at = e.end;
    }
    if (at != total_updates) throw InputError("schedule ends at " + std::to_string(at) + ", not " + std::to_string(total_updates));
  }

  friend bool operator==(const ScheduleManifest& a, const ScheduleManifest& b) {
    return a.regime == b.regime && a.block_size == b.block_size && a.total_updates == b.total_updates &&
           a.checkpoint_interval == b.checkpoint_interval && a.entries == b.entries;
  }
};

inline ScheduleManifest compile_block_schedule(std::int64_t block_size, std::int64_t total_updates,
                                               std::int64_t checkpoint_interval = 5000) {
  if (block_size <= 0) throw InputError("block_size must be > 0");
  if (total_updates <= 0) throw InputError("total_updates must be > 0");
  if (checkpoint_interval <= 0) throw InputError("checkpoint_interval must be > 0");
  ScheduleManifest m{Regime::block, block_size, total_updates, checkpoint_interval, {}, {}};
  if (checkpoint_interval > block_size)
    m.warnings.push_back("checkpoint_interval " + std::to_string(checkpoint_interval) + " exceeds block_size " +
                         std::to_string(block_size) + "; some blocks contain no checkpoint");
  for (std::int64_t start = 0, k = 0; start < total_updates; start += block_size, ++k) {
    m.entries.push_back({start, std::min(start + block_size, total_updates),
                         block_type_of(kBlockCycle[static_cast<std::size_t>(k) % kBlockCycle.size()]), k});
  }
  return m;
}

inline ScheduleManifest compile_mixed_schedule(std::int64_t total_updates, std::int64_t checkpoint_interval = 5000) {
  if (total_updates <= 0) throw InputError("total_updates must be > 0");
  if (checkpoint_interval <= 0) throw InputError("checkpoint_interval must be > 0");
  return {Regime::mixed, total_updates, total_updates, checkpoint_interval, {{0, total_updates, BlockType::mixed, 0}}, {}};
}

// ---------------------------------------------------------------- files

inline std::string format_manifest(const ScheduleManifest& m) {
  std::string out = "#regime=" + std::string(to_string(m.regime)) + " block_size=" + std::to_string(m.block_size) +
                    " ckpt_interval=" + std::to_string(m.checkpoint_interval) + "\n";
  for (const auto& e : m.entries)
    out += std::to_string(e.start) + "\t" + std::to_string(e.end) + "\t" + std::string(to_string(e.dataset)) + "\t" +
           std::to_string(e.block_index) + "\n";
  return out;
}

inline ScheduleManifest parse_manifest(std::string_view content, const std::string& path = "<input>") {
  const auto ls = text::lines(content);
  if (ls.empty()) throw InputError(path + ": empty file");
  ScheduleManifest m;
  std::map<std::string, std::string, std::less<>> header;
  if (!ls[0].starts_with("#")) throw InputError(at_line(path, 1) + "missing `#regime=... block_size=... ckpt_interval=...` header");
  for (auto kv : text::split_whitespace(ls[0].substr(1))) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw InputError(at_line(path, 1) + "malformed header field '" + std::string(kv) + "'");
    header[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
  }
  const auto field = [&](const char* key) -> std::string {
    auto it = header.find(key);
    if (it == header.end()) throw InputError(at_line(path, 1) + "header lacks " + key);
    return it->second;
  };
  const auto regime = parse_regime(field("regime"));
  const auto block_size = text::parse_number<std::int64_t>(field("block_size"));
  const auto interval = text::parse_number<std::int64_t>(field("ckpt_interval"));
  if (!regime || !block_size || !interval || *block_size <= 0 || *interval <= 0)
    throw InputError(at_line(path, 1) + "invalid header values");
  m.regime = *regime;
  m.block_size = *block_size;
  m.checkpoint_interval = *interval;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = detail::tab_fields(path, i + 1, ls[i], 4);
    const auto start = text::parse_number<std::int64_t>(f[0]);
    const auto end = text::parse_number<std::int64_t>(f[1]);
    const auto ds = parse_block_type(f[2]);
    const auto idx = text::parse_number<std::int64_t>(f[3]);
    if (!start || !end || !ds || !idx) throw InputError(at_line(path, i + 1) + "malformed manifest entry");
    m.entries.push_back({*start, *end, *ds, *idx});
  }
  m.total_updates = m.entries.empty() ? 0 : m.entries.back().end;
  m.validate();
  return m;
}

inline ScheduleManifest load_manifest(const std::string& path) { return parse_manifest(text::read_file(path), path); }

inline std::string format_tag_token(const CheckpointTag& t) {
  return t.checkpoint_id + "\t" + std::to_string(t.update) + "\t" + std::string(to_string(t.block_type)) + "\t" +
         std::to_string(t.block_index);
}

inline std::string format_checkpoint_tags(const std::vector<CheckpointTag>& tags) {
  std::string out;
  for (const auto& t : tags) out += format_tag_token(t) + "\n";
  return out;
}

inline std::vector<CheckpointTag> parse_checkpoint_tags(std::string_view content, const std::string& path = "<input>") {
  std::vector<CheckpointTag> tags;
  const auto ls = text::lines(content);
  if (ls.empty()) throw InputError(path + ": empty file");
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const auto f = detail::tab_fields(path, i + 1, ls[i], 4);
    const auto update = text::parse_number<std::int64_t>(f[1]);
    const auto type = parse_block_type(f[2]);
    const auto idx = text::parse_number<std::int64_t>(f[3]);
    if (f[0].empty() || !update || !type || !idx) throw InputError(at_line(path, i + 1) + "malformed checkpoint tag");
    tags.push_back({std::string(f[0]), *update, *type, *idx, false});
  }
  return tags;
}

inline std::vector<CheckpointTag> load_checkpoint_tags(const std::string& path) {
  return parse_checkpoint_tags(text::read_file(path), path);
}

// ---------------------------------------------------------------- sampling

// Fisher-Yates over [0, n) driven by mt19937_64 seeded with
// seed_seq{seed, epoch, stream}: j = engine() % (i + 1) for i = n-1 .. 1.
inline std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch,
                                                  std::uint64_t stream) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(stream)};
  std::mt19937_64 engine(seq);
  for (std::size_t i = n; i-- > 1;) {
    const auto j = static_cast<std::size_t>(engine() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

// Endless sampler over one index space: walks a seeded permutation and
// reshuffles at every epoch boundary.
class EpochSampler {
 public:
  EpochSampler(std::size_t size, std::uint64_t seed, std::uint64_t stream)
      : size_(size), seed_(seed), stream_(stream) {
    if (size_ == 0) throw InputError("cannot sample from an empty dataset");
    perm_ = epoch_permutation(size_, seed_, epoch_, stream_);
  }

  std::size_t next() {
    if (cursor_ == size_) {
      ++epoch_;
      cursor_ = 0;
      perm_ = epoch_permutation(size_, seed_, epoch_, stream_);
    }
    return perm_[cursor_++];
  }

  std::uint64_t epoch() const { return epoch_; }

 private:
  std::size_t size_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> perm_;
};

struct ItemRef {
  DatasetTag dataset;
  std::size_t index;
  friend bool operator==(const ItemRef&, const ItemRef&) = default;
};

struct IndexBatch {
  std::int64_t update = 0;
  BlockType block = BlockType::auth;
  std::vector<ItemRef> items;
};

// Stream of batch indices for updates 0 .. total_updates-1. In block regime
// each dataset keeps its own sampler (cursor persists across blocks); in
// mixed regime one sampler walks the concatenation auth ++ bt ++ ft.
class IndexStream {
 public:
  static constexpr std::uint64_t kMixedStream = 3;

  IndexStream(const ScheduleManifest& manifest, std::array<std::size_t, 3> dataset_sizes, std::size_t batch_size,
              std::uint64_t seed)
      : manifest_(manifest), sizes_(dataset_sizes), batch_size_(batch_size) {
    manifest_.validate();
    if (batch_size_ == 0) throw InputError("batch_size must be > 0");
    if (manifest_.regime == Regime::mixed) {
      for (auto t : kAllDatasets)
        if (sizes_[index_of(t)] == 0)
          throw InputError("mixed regime needs all three corpora; missing " + std::string(to_string(t)));
      mixed_.emplace(sizes_[0] + sizes_[1] + sizes_[2], seed, kMixedStream);
    } else {
      for (const auto& e : manifest_.entries) {
        const auto t = *dataset_of(e.dataset);
        if (sizes_[index_of(t)] == 0)
          throw InputError("schedule uses dataset " + std::string(to_string(t)) + " but no corpus was given");
      }
      for (auto t : kAllDatasets)
        if (sizes_[index_of(t)] > 0) per_dataset_[index_of(t)].emplace(sizes_[index_of(t)], seed, index_of(t));
    }
  }

  std::optional<IndexBatch> next() {
    if (update_ >= manifest_.total_updates) return std::nullopt;
    const auto& entry = manifest_.entry_at(update_);
    IndexBatch batch{update_, entry.dataset, {}};
    batch.items.reserve(batch_size_);
    for (std::size_t i = 0; i < batch_size_; ++i) {
      if (mixed_) {
        std::size_t k = mixed_->next();
        std::size_t d = 0;
        while (k >= sizes_[d]) k -= sizes_[d++];
        batch.items.push_back({static_cast<DatasetTag>(d), k});
      } else {
        const auto t = *dataset_of(entry.dataset);
        batch.items.push_back({t, per_dataset_[index_of(t)]->next()});
      }
    }
    ++update_;
    return batch;
  }

  const ScheduleManifest& manifest() const { return manifest_; }

 private:
  ScheduleManifest manifest_;
  std::array<std::size_t, 3> sizes_;
  std::size_t batch_size_;
  std::int64_t update_ = 0;
  std::optional<EpochSampler> mixed_;
  std::array<std::optional<EpochSampler>, 3> per_dataset_;
};

struct Batch {
  std::int64_t update = 0;
  BlockType block = BlockType::auth;
  std::vector<SentencePair> pairs;
};

// Batches of sentence pairs drawn according to a manifest. Single consumer.
class BatchStream {
 public:
  BatchStream(const ScheduleManifest& manifest, const std::map<DatasetTag, Corpus>& corpora, std::size_t batch_size,
              std::uint64_t seed)
      : corpora_(corpora), indices_(manifest, sizes_of(corpora), batch_size, seed) {}

  std::optional<Batch> next() {
    auto ib = indices_.next();
    if (!ib) return std::nullopt;
    Batch b{ib->update, ib->block, {}};
    b.pairs.reserve(ib->items.size());
    for (const auto& item : ib->items) b.pairs.push_back(corpora_.at(item.dataset).pairs[item.index]);
    return b;
  }

 private:
  static std::array<std::size_t, 3> sizes_of(const std::map<DatasetTag, Corpus>& corpora) {
    std::array<std::size_t, 3> sizes{0, 0, 0};
    for (const auto& [tag, corpus] : corpora) {
      if (corpus.dataset != tag)
        throw InputError("corpus '" + corpus.id + "' is tagged " + std::string(to_string(corpus.dataset)) +
                         " but supplied as " + std::string(to_string(tag)));
      sizes[index_of(tag)] = corpus.size();
    }
    return sizes;
  }

  std::map<DatasetTag, Corpus> corpora_;
  IndexStream indices_;
};

inline BatchStream batch_stream(const ScheduleManifest& manifest, const std::map<DatasetTag, Corpus>& corpora,
                                std::size_t batch_size, std::uint64_t seed) {
  return BatchStream(manifest, corpora, batch_size, seed);
}

}  // namespace bbt
