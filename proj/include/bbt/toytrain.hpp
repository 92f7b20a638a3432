#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bbt/error.hpp"
#include "bbt/params.hpp"
#include "bbt/schedule.hpp"
#include "bbt/text.hpp"

namespace bbt {

// Linear-regression data source y = w*.x + noise, x ~ N(0, input_scale^2 I).
struct SyntheticDomain {
  DatasetTag id = DatasetTag::auth;
  std::vector<double> w_star;
  double input_scale = 1.0;
  double noise_sigma = 0.1;
  std::size_t train_size = 1000;
  std::size_t eval_size = 200;
  std::uint64_t seed = 0;
};

struct RegressionSet {
  std::size_t dim = 0;
  std::vector<double> x;  // row-major, size() rows of dim
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(x).subspan(i * dim, dim); }
};

namespace detail {

inline RegressionSet sample_regression(const SyntheticDomain& d, std::size_t n, std::uint64_t split) {
  std::seed_seq seq{static_cast<std::uint32_t>(d.seed), static_cast<std::uint32_t>(d.seed >> 32),
                    static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index_of(d.id))};
  std::mt19937_64 engine(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  RegressionSet set{d.w_star.size(), {}, {}};
  set.x.reserve(n * set.dim);
  set.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    for (std::size_t j = 0; j < set.dim; ++j) {
      const double v = d.input_scale * normal(engine);
      set.x.push_back(v);
      y += d.w_star[j] * v;
    }
    set.y.push_back(y + d.noise_sigma * normal(engine));
  }
  return set;
}

}  // namespace detail

// Train and eval sets come from separate seed streams.
inline RegressionSet training_set(const SyntheticDomain& d) { return detail::sample_regression(d, d.train_size, 0); }
inline RegressionSet evaluation_set(const SyntheticDomain& d) { return detail::sample_regression(d, d.eval_size, 1); }

// Three domains (auth, bt, ft) whose optima sit around a shared random
// centre at distance ~`shift`. shift = 0 gives identical domains.
inline std::array<SyntheticDomain, 3> make_domains(std::size_t dim, double shift, double noise_sigma, std::size_t train_size,
                                                   std::size_t eval_size, std::uint64_t seed) {
  if (dim == 0) throw InputError("dim must be > 0");
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centre(dim);
  for (auto& c : centre) c = normal(engine);
  std::array<SyntheticDomain, 3> out;
  for (auto t : kAllDatasets) {
    auto& d = out[index_of(t)];
    d.id = t;
    d.w_star = centre;
    const double scale = shift / std::sqrt(static_cast<double>(dim));
    for (auto& w : d.w_star) w += scale * normal(engine);
    d.noise_sigma = noise_sigma;
    d.train_size = train_size;
    d.eval_size = eval_size;
    d.seed = seed + 1 + index_of(t);
  }
  return out;
}

enum class Variant { raw, exp, avgk, exp_avgk };

inline constexpr std::array<Variant, 4> kAllVariants{Variant::raw, Variant::exp, Variant::avgk, Variant::exp_avgk};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::raw: return "raw";
    case Variant::exp: return "exp";
    case Variant::avgk: return "avgk";
    case Variant::exp_avgk: return "exp+avgk";
  }
  return "?";
}

struct CurvePoint {
  std::int64_t update = 0;
  Variant variant = Variant::raw;
  std::array<double, 3> loss{};  // indexed by DatasetTag

  double mean_loss() const { return (loss[0] + loss[1] + loss[2]) / 3.0; }
};

struct ToyConfig {
  ScheduleManifest manifest;
  double lr = 0.05;
  std::size_t batch_size = 8;
  double alpha = 0.001;
  std::size_t avg_k = 8;
  std::int64_t eval_every = 10;
  std::uint64_t seed = 0;
  AlphaRange alpha_range = AlphaRange::open;
  bool record_trajectory = false;
};

struct ToyResult {
  std::vector<CurvePoint> curve;
  std::vector<ParamSnapshot> checkpoints;           // raw weights at every checkpoint
  std::vector<ParamSnapshot> smoothed_checkpoints;  // smoothed weights at every checkpoint
  std::vector<ParamSnapshot> trajectory;            // raw weights after every update, on request

  std::vector<CurvePoint> variant(Variant v) const {
    std::vector<CurvePoint> out;
    for (const auto& p : curve)
      if (p.variant == v) out.push_back(p);
    return out;
  }
};

inline double mean_squared_error(std::span<const float> w, const RegressionSet& set) {
  double sum = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto x = set.row(i);
    double pred = 0.0;
    for (std::size_t j = 0; j < set.dim; ++j) pred += static_cast<double>(w[j]) * x[j];
    const double r = pred - set.y[i];
    sum += r * r;
  }
  return sum / static_cast<double>(set.size());
}

// SGD on squared loss following the manifest's data schedule. Every
// eval_every updates the eval loss of each domain is recorded for raw,
// smoothed, checkpoint-averaged, and smoothed-then-averaged weights.
inline ToyResult run_toy_experiment(const std::array<SyntheticDomain, 3>& domains, const ToyConfig& cfg) {
  const auto& m = cfg.manifest;
  m.validate();
  if (!(cfg.lr > 0)) throw InputError("lr must be > 0");
  if (cfg.batch_size == 0) throw InputError("batch_size must be > 0");
  if (cfg.avg_k == 0) throw InputError("avg_k must be >= 1");
  if (cfg.eval_every <= 0) throw InputError("eval_every must be > 0");
  if (cfg.eval_every % m.checkpoint_interval != 0 && m.checkpoint_interval % cfg.eval_every != 0)
    throw InputError("eval_every and checkpoint_interval must divide one another");
  const std::size_t dim = domains[0].w_star.size();
  for (auto t : kAllDatasets) {
    const auto& d = domains[index_of(t)];
    if (d.id != t) throw InputError("domains must be given in auth, bt, ft order");
    if (d.w_star.size() != dim || dim == 0) throw InputError("domains must share a positive dimension");
    if (d.train_size == 0 || d.eval_size == 0) throw InputError("domain sizes must be > 0");
  }

  std::array<RegressionSet, 3> train;
  std::array<RegressionSet, 3> eval;
  for (std::size_t d = 0; d < 3; ++d) {
    train[d] = training_set(domains[d]);
    eval[d] = evaluation_set(domains[d]);
  }

  IndexStream stream(m, {train[0].size(), train[1].size(), train[2].size()}, cfg.batch_size, cfg.seed);
  SmoothingState smoothing(cfg.alpha, false, cfg.alpha_range);
  std::vector<double> w(dim, 0.0);
  std::vector<double> grad(dim);
  ToyResult result;

  const auto losses = [&](const ParamSnapshot& s) {
    std::array<double, 3> out{};
    for (std::size_t d = 0; d < 3; ++d) out[d] = mean_squared_error(s.values, eval[d]);
    return out;
  };
  const auto averaged = [&](const std::vector<ParamSnapshot>& saved, const ParamSnapshot& fallback) {
    if (saved.empty()) return fallback;
    return average_consecutive(saved, std::min(cfg.avg_k, saved.size()));
  };

  while (auto batch = stream.next()) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& item : batch->items) {
      const auto& set = train[index_of(item.dataset)];
      const auto x = set.row(item.index);
      double pred = 0.0;
      for (std::size_t j = 0; j < dim; ++j) pred += w[j] * x[j];
      const double r = pred - set.y[item.index];
      for (std::size_t j = 0; j < dim; ++j) grad[j] += 2.0 * r * x[j];
    }
    const double scale = cfg.lr / static_cast<double>(batch->items.size());
    for (std::size_t j = 0; j < dim; ++j) {
      w[j] -= scale * grad[j];
      if (!std::isfinite(w[j]) || std::abs(w[j]) > 1e12)
        throw RuntimeError("training diverged at update " + std::to_string(batch->update + 1) + "; use a smaller lr");
    }

    const std::int64_t u = batch->update + 1;
    ParamSnapshot theta{std::vector<float>(w.begin(), w.end()), u, std::nullopt};
    smoothing.step(theta);
    if (cfg.record_trajectory) result.trajectory.push_back(theta);

    if (u % m.checkpoint_interval == 0) {
      const auto& e = m.entry_at(u);
      const CheckpointTag tag{checkpoint_name(u), u, e.dataset, e.block_index, false};
      result.checkpoints.push_back({theta.values, u, tag});
      result.smoothed_checkpoints.push_back(smoothing.snapshot(u, tag));
    }
    if (u % cfg.eval_every == 0) {
      const auto exp = smoothing.snapshot(u);
      const std::array<ParamSnapshot, 4> variants{theta, exp, averaged(result.checkpoints, theta),
                                                  averaged(result.smoothed_checkpoints, exp)};
      for (std::size_t v = 0; v < variants.size(); ++v) {
        const auto l = losses(variants[v]);
        for (double x : l)
          if (!std::isfinite(x) || x > 1e12)
            throw RuntimeError("eval loss diverged at update " + std::to_string(u) + "; use a smaller lr");
        result.curve.push_back({u, kAllVariants[v], l});
      }
    }
  }
  return result;
}

enum class StopMode { max, min };

// Index at which `patience` consecutive evaluations have failed to strictly
// improve on the best score so far, or nullopt.
inline std::optional<std::size_t> early_stop(std::span<const double> scores, std::size_t patience = 30,
                                             StopMode mode = StopMode::max) {
  if (patience == 0) throw InputError("patience must be >= 1");
  if (scores.empty()) return std::nullopt;
  double best = scores[0];
  std::size_t stale = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const bool better = mode == StopMode::max ? scores[i] > best : scores[i] < best;
    if (better) {
      best = scores[i];
      stale = 0;
    } else if (++stale == patience) {
      return i;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- analysis

struct BlockContrast {
  std::size_t wins = 0;
  std::size_t comparisons = 0;
  double fraction() const { return comparisons == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(comparisons); }
};

// For every pair of adjacent blocks (k, k+1) and each of their two datasets,
// checks that the mean eval loss on that dataset is lower during its own
// block than during the neighbouring one. A point at update u reflects
// training on update u-1, so it is attributed to entry_at(u-1).
inline BlockContrast block_contrast(const std::vector<CurvePoint>& points, const ScheduleManifest& m) {
  std::vector<std::array<double, 3>> sums(m.entries.size(), {0, 0, 0});
  std::vector<std::size_t> counts(m.entries.size(), 0);
  for (const auto& p : points) {
    const auto k = static_cast<std::size_t>(m.entry_at(p.update - 1).block_index);
    for (std::size_t d = 0; d < 3; ++d) sums[k][d] += p.loss[d];
    ++counts[k];
  }
  BlockContrast c;
  for (std::size_t k = 0; k + 1 < m.entries.size(); ++k) {
    if (counts[k] == 0 || counts[k + 1] == 0) continue;
    const auto a = dataset_of(m.entries[k].dataset);
    const auto b = dataset_of(m.entries[k + 1].dataset);
    if (!a || !b) continue;
    const auto mean = [&](std::size_t block, DatasetTag d) { return sums[block][index_of(d)] / static_cast<double>(counts[block]); };
    c.comparisons += 2;
    if (mean(k, *a) < mean(k + 1, *a)) ++c.wins;
    if (mean(k + 1, *b) < mean(k, *b)) ++c.wins;
  }
  return c;
}

// Sample variance of each domain's loss over points with update > from_update,
// averaged over the three domains.
inline double curve_variance(const std::vector<CurvePoint>& points, std::int64_t from_update) {
  double total = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    std::vector<double> xs;
    for (const auto& p : points)
      if (p.update > from_update) xs.push_back(p.loss[d]);
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    total += ss / static_cast<double>(xs.size() - 1);
  }
  return total / 3.0;
}

inline std::string format_curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "update,variant,domain,loss\n";
  for (const auto& p : curve)
    for (auto t : kAllDatasets)
      out += std::to_string(p.update) + "," + std::string(to_string(p.variant)) + "," + std::string(to_string(t)) + "," +
             text::format_real(p.loss[index_of(t)]) + "\n";
  return out;
}

}  // namespace bbt
