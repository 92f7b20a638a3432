#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbt/error.hpp"
#include "bbt/schedule.hpp"
#include "bbt/text.hpp"

namespace bbt {

// Flat parameter vector saved after `update` optimizer steps.
struct ParamSnapshot {
  std::vector<float> values;
  std::int64_t update = 0;
  std::optional<CheckpointTag> tag;

  std::size_t dim() const { return values.size(); }

  void validate() const {
    if (values.empty()) throw InputError("snapshot at update " + std::to_string(update) + " has dim 0");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i]))
        throw InputError("snapshot at update " + std::to_string(update) + ": non-finite value at index " + std::to_string(i));
  }

  friend bool operator==(const ParamSnapshot&, const ParamSnapshot&) = default;
};

enum class AlphaRange {
  open,      // 0 < alpha < 1
  allow_one  // 0 < alpha <= 1; degenerate, for tests
};

// Per-update exponential smoothing: smoothed' = alpha*theta + (1-alpha)*smoothed.
// The first step initializes smoothed := theta. With bias correction the
// accumulator starts at zero and value() divides by 1-(1-alpha)^t instead.
// Accumulation is double precision.
class SmoothingState {
 public:
  explicit SmoothingState(double alpha = 0.001, bool bias_correction = false, AlphaRange range = AlphaRange::open)
      : alpha_(alpha), bias_correction_(bias_correction) {
    const bool ok = range == AlphaRange::open ? (alpha > 0 && alpha < 1) : (alpha > 0 && alpha <= 1);
    if (!ok) throw InputError("smoothing alpha must be in (0,1), got " + text::format_real(alpha));
  }

  double alpha() const { return alpha_; }
  bool bias_correction() const { return bias_correction_; }
  std::int64_t updates_seen() const { return updates_seen_; }
  bool empty() const { return smoothed_.empty(); }
  std::size_t dim() const { return smoothed_.size(); }

  // Raw accumulator.
  const std::vector<double>& smoothed() const { return smoothed_; }

  std::vector<double> value() const {
    if (!bias_correction_) return smoothed_;
    const double scale = 1.0 - std::pow(1.0 - alpha_, static_cast<double>(updates_seen_));
    std::vector<double> out(smoothed_);
    for (auto& v : out) v /= scale;
    return out;
  }

  void step(const ParamSnapshot& theta) {
    theta.validate();
    if (smoothed_.empty()) {
      if (bias_correction_) {
        smoothed_.assign(theta.dim(), 0.0);
      } else {
        smoothed_.assign(theta.values.begin(), theta.values.end());
        ++updates_seen_;
        return;
      }
    }
    if (theta.dim() != smoothed_.size())
      throw InputError("smoothing: dim mismatch (state " + std::to_string(smoothed_.size()) + ", snapshot " +
                       std::to_string(theta.dim()) + ")");
    const double keep = 1.0 - alpha_;
    for (std::size_t i = 0; i < smoothed_.size(); ++i)
      smoothed_[i] = alpha_ * static_cast<double>(theta.values[i]) + keep * smoothed_[i];
    ++updates_seen_;
  }

  ParamSnapshot snapshot(std::int64_t update, std::optional<CheckpointTag> tag = std::nullopt) const {
    if (empty()) throw InputError("smoothing state is empty");
    const auto v = value();
    return {std::vector<float>(v.begin(), v.end()), update, std::move(tag)};
  }

 private:
  double alpha_;
  bool bias_correction_;
  std::vector<double> smoothed_;
  std::int64_t updates_seen_ = 0;
};

inline SmoothingState smooth_step(SmoothingState state, const ParamSnapshot& theta) {
  state.step(theta);
  return state;
}

// Elementwise mean of the last k snapshots. The result carries the update
// and tag of the newest snapshot; the tag is flagged when the window covers
// snapshots from more than one block.
inline ParamSnapshot average_consecutive(std::span<const ParamSnapshot> snapshots, std::size_t k) {
  if (k == 0) throw InputError("average_consecutive: k must be >= 1");
  if (snapshots.size() < k)
    throw InputError("average_consecutive: need " + std::to_string(k) + " snapshots, got " + std::to_string(snapshots.size()));
  const auto window = snapshots.last(k);
  const std::size_t dim = window.back().dim();
  std::vector<double> sum(dim, 0.0);
  bool spans = false;
  for (std::size_t j = 0; j < window.size(); ++j) {
    const auto& s = window[j];
    s.validate();
    if (s.dim() != dim)
      throw InputError("average_consecutive: dim mismatch at update " + std::to_string(s.update));
    if (j > 0 && s.update <= window[j - 1].update)
      throw InputError("average_consecutive: snapshots not ordered by update");
    if (s.tag && window.back().tag && s.tag->block_index != window.back().tag->block_index) spans = true;
    for (std::size_t i = 0; i < dim; ++i) sum[i] += s.values[i];
  }
  ParamSnapshot out{std::vector<float>(dim), window.back().update, window.back().tag};
  for (std::size_t i = 0; i < dim; ++i) out.values[i] = static_cast<float>(sum[i] / static_cast<double>(k));
  if (out.tag) out.tag->spans_blocks = spans;
  return out;
}

struct ReplayOptions {
  double alpha = 0.001;
  std::int64_t emit_every = 5000;
  bool bias_correction = false;
  AlphaRange alpha_range = AlphaRange::open;
};

// Applies smoothing to every snapshot of a consecutive-update stream and
// emits the smoothed parameters at each multiple of emit_every.
template <std::ranges::input_range Stream>
  requires std::convertible_to<std::ranges::range_reference_t<Stream>, const ParamSnapshot&>
std::vector<ParamSnapshot> replay_smoothing(Stream&& stream, const ReplayOptions& opt) {
  if (opt.emit_every <= 0) throw InputError("emit_every must be > 0");
  SmoothingState state(opt.alpha, opt.bias_correction, opt.alpha_range);
  std::vector<ParamSnapshot> emitted;
  std::optional<std::int64_t> last;
  for (const ParamSnapshot& s : stream) {
    if (last && s.update != *last + 1)
      throw InputError("replay: update " + std::to_string(s.update) + " follows " + std::to_string(*last) +
                       " (expected consecutive updates)");
    last = s.update;
    state.step(s);
    if (s.update % opt.emit_every == 0) emitted.push_back(state.snapshot(s.update, s.tag));
  }
  return emitted;
}

// ---------------------------------------------------------------- files
//
// PSNAP1\n
// dim=<d> update=<u> tag=<none | id:block_type:block_index[:span]>\n
// d little-endian IEEE-754 binary32 values

inline constexpr std::string_view kSnapshotMagic = "PSNAP1\n";

inline std::string format_snapshot_tag(const std::optional<CheckpointTag>& tag) {
  if (!tag) return "none";
  for (char c : tag->checkpoint_id)
    if (c == ':' || text::is_ascii_space(c)) throw InputError("checkpoint id '" + tag->checkpoint_id + "' cannot be stored in a snapshot header");
  std::string out = tag->checkpoint_id + ":" + std::string(to_string(tag->block_type)) + ":" + std::to_string(tag->block_index);
  if (tag->spans_blocks) out += ":span";
  return out;
}

inline std::string serialize_snapshot(const ParamSnapshot& s) {
  s.validate();
  std::string out(kSnapshotMagic);
  out += "dim=" + std::to_string(s.dim()) + " update=" + std::to_string(s.update) + " tag=" + format_snapshot_tag(s.tag) + "\n";
  for (float v : s.values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  return out;
}

inline ParamSnapshot deserialize_snapshot(std::string_view data, const std::string& path = "<input>") {
  if (!data.starts_with(kSnapshotMagic)) throw InputError(path + ": not a PSNAP1 snapshot");
  data.remove_prefix(kSnapshotMagic.size());
  const auto eol = data.find('\n');
  if (eol == std::string_view::npos) throw InputError(path + ": truncated header");
  std::optional<std::size_t> dim;
  std::optional<std::int64_t> update;
  std::optional<CheckpointTag> tag;
  bool have_tag = false;
  for (auto kv : text::split_whitespace(data.substr(0, eol))) {
    if (kv.starts_with("dim=")) {
      dim = text::parse_number<std::size_t>(kv.substr(4));
    } else if (kv.starts_with("update=")) {
      update = text::parse_number<std::int64_t>(kv.substr(7));
    } else if (kv.starts_with("tag=")) {
      have_tag = true;
      const auto t = kv.substr(4);
      if (t == "none") continue;
      const auto parts = text::split(t, ":");
      const auto type = parts.size() >= 3 ? parse_block_type(parts[1]) : std::nullopt;
      const auto idx = parts.size() >= 3 ? text::parse_number<std::int64_t>(parts[2]) : std::nullopt;
      if (parts.size() < 3 || parts.size() > 4 || !type || !idx || (parts.size() == 4 && parts[3] != "span"))
        throw InputError(path + ": malformed tag '" + std::string(t) + "'");
      tag = CheckpointTag{std::string(parts[0]), 0, *type, *idx, parts.size() == 4};
    } else {
      throw InputError(path + ": unknown header field '" + std::string(kv) + "'");
    }
  }
  if (!dim || !update || !have_tag || *dim == 0) throw InputError(path + ": header needs dim>0, update and tag");
  data.remove_prefix(eol + 1);
  if (data.size() != *dim * 4)
    throw InputError(path + ": expected " + std::to_string(*dim * 4) + " payload bytes, got " + std::to_string(data.size()));
  ParamSnapshot s{std::vector<float>(*dim), *update, tag};
  if (s.tag) s.tag->update = *update;
  for (std::size_t i = 0; i < *dim; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[4 * i + static_cast<std::size_t>(b)])) << (8 * b);
    s.values[i] = std::bit_cast<float>(bits);
  }
  s.validate();
  return s;
}

inline ParamSnapshot load_snapshot(const std::string& path) { return deserialize_snapshot(text::read_file(path), path); }

}  // namespace bbt
