#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bbt/params.hpp"
#include "test_util.hpp"

namespace bbt {
namespace {

ParamSnapshot snap(std::vector<float> v, std::int64_t update = 0) { return {std::move(v), update, std::nullopt}; }

// theta_hat_T = (1-a)^T theta_hat_0 + a * sum_{u=1..T} (1-a)^(T-u) theta_u,
// evaluated term by term with explicit powers.
long double closed_form(double alpha, long double init, const std::vector<double>& thetas) {
  const long double a = alpha;
  const auto T = static_cast<long double>(thetas.size());
  long double out = std::pow(1.0L - a, T) * init;
  for (std::size_t u = 1; u <= thetas.size(); ++u)
    out += a * std::pow(1.0L - a, T - static_cast<long double>(u)) * thetas[u - 1];
  return out;
}

TEST(SmoothStep, TwoStepHandArithmetic) {
  SmoothingState s(0.5);
  s = smooth_step(s, snap({0.0f}));
  s = smooth_step(s, snap({1.0f}));
  EXPECT_DOUBLE_EQ(s.smoothed()[0], 0.5);
  s = smooth_step(s, snap({1.0f}));
  EXPECT_DOUBLE_EQ(s.smoothed()[0], 0.75);
  EXPECT_EQ(s.updates_seen(), 3);
}

TEST(SmoothStep, ConstantStreamIsFixedPoint) {
  for (double alpha : {0.001, 0.3, 0.9}) {
    SmoothingState s(alpha);
    for (int i = 0; i < 100; ++i) s.step(snap({2.5f, -1.0f}));
    EXPECT_EQ(s.smoothed(), (std::vector<double>{2.5, -1.0}));
  }
}

TEST(SmoothStep, AlternatingStreamMatchesClosedForm) {
  const double alpha = 0.001;
  SmoothingState s(alpha);
  s.step(snap({0.0f}));
  std::vector<double> thetas;
  for (int u = 1; u <= 10000; ++u) {
    thetas.push_back(u % 2);
    s.step(snap({static_cast<float>(u % 2)}));
  }
  const auto expected = closed_form(alpha, 0.0L, thetas);
  EXPECT_NEAR(s.smoothed()[0], static_cast<double>(expected), 1e-6 * std::abs(static_cast<double>(expected)));
}

TEST(SmoothStep, RandomStreamMatchesClosedForm) {
  const double alpha = 0.001;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<float> dist(-3.0f, 3.0f);
  SmoothingState s(alpha);
  const float init = dist(rng);
  s.step(snap({init}));
  std::vector<double> thetas;
  for (int u = 1; u <= 10000; ++u) {
    const float x = dist(rng);
    thetas.push_back(x);
    s.step(snap({x}));
  }
  const auto expected = static_cast<double>(closed_form(alpha, init, thetas));
  EXPECT_NEAR(s.smoothed()[0], expected, 1e-6 * std::abs(expected));
}

TEST(SmoothStep, Errors) {
  SmoothingState s(0.1);
  s.step(snap({1.0f, 2.0f}));
  EXPECT_THROW(s.step(snap({1.0f})), InputError);
  EXPECT_THROW(s.step(snap({1.0f, NAN})), InputError);
  EXPECT_THROW(s.step(snap({INFINITY, 1.0f})), InputError);
  EXPECT_THROW(SmoothingState(0.0), InputError);
  EXPECT_THROW(SmoothingState(1.0), InputError);
  EXPECT_NO_THROW(SmoothingState(1.0, false, AlphaRange::allow_one));
  EXPECT_THROW(SmoothingState(1.5, false, AlphaRange::allow_one), InputError);
}

TEST(SmoothStep, ContractsTowardInput) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<float> dist(-10.0f, 10.0f);
  const double alpha = 0.2;
  SmoothingState s(alpha);
  s.step(snap({dist(rng), dist(rng)}));
  for (int i = 0; i < 50; ++i) {
    const auto theta = snap({dist(rng), dist(rng)});
    const auto before = s.smoothed();
    s.step(theta);
    for (std::size_t d = 0; d < 2; ++d)
      EXPECT_NEAR(std::abs(s.smoothed()[d] - theta.values[d]), (1 - alpha) * std::abs(before[d] - theta.values[d]), 1e-9);
  }
}

TEST(SmoothStep, LinearInScaleAndShift) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  SmoothingState plain(0.05);
  SmoothingState mapped(0.05);
  for (int i = 0; i < 200; ++i) {
    // Powers of two keep the mapped inputs exact in f32.
    const float x = dist(rng);
    plain.step(snap({x}));
    mapped.step(snap({4.0f * x + 2.0f}));
  }
  EXPECT_NEAR(mapped.smoothed()[0], 4.0 * plain.smoothed()[0] + 2.0, 1e-12);
}

TEST(SmoothStep, BiasCorrection) {
  SmoothingState s(0.5, true);
  s.step(snap({4.0f}));
  EXPECT_DOUBLE_EQ(s.smoothed()[0], 2.0);
  EXPECT_DOUBLE_EQ(s.value()[0], 4.0);
  s.step(snap({4.0f}));
  EXPECT_DOUBLE_EQ(s.value()[0], 4.0);
  EXPECT_FLOAT_EQ(s.snapshot(2).values[0], 4.0f);
}

TEST(AverageConsecutive, Examples) {
  const std::vector<ParamSnapshot> two{snap({0.0f}, 1), snap({2.0f}, 2)};
  EXPECT_EQ(average_consecutive(two, 2).values, std::vector<float>{1.0f});
  EXPECT_EQ(average_consecutive(two, 1), two.back());
  std::vector<ParamSnapshot> eight;
  for (int i = 0; i < 8; ++i) eight.push_back(snap({static_cast<float>(i)}, i + 1));
  const auto avg = average_consecutive(eight, 8);
  EXPECT_EQ(avg.values[0], 3.5f);
  EXPECT_EQ(avg.update, 8);
}

TEST(AverageConsecutive, UsesLastKOnly) {
  std::vector<ParamSnapshot> s;
  for (int i = 0; i < 10; ++i) s.push_back(snap({static_cast<float>(i)}, i));
  EXPECT_EQ(average_consecutive(s, 2).values[0], 8.5f);
}

TEST(AverageConsecutive, IdenticalSnapshotsAreExact) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> dist(-1e6f, 1e6f);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> v(16);
    for (auto& x : v) x = dist(rng);
    const std::size_t k = 1 + rng() % 12;
    std::vector<ParamSnapshot> s;
    for (std::size_t i = 0; i < k; ++i) s.push_back(snap(v, static_cast<std::int64_t>(i)));
    EXPECT_EQ(average_consecutive(s, k).values, v);
  }
}

TEST(AverageConsecutive, LinearInScaleAndShift) {
  std::vector<ParamSnapshot> plain;
  std::vector<ParamSnapshot> mapped;
  for (int i = 0; i < 8; ++i) {
    const float x = 0.125f * static_cast<float>(i * i);
    plain.push_back(snap({x}, i));
    mapped.push_back(snap({2.0f * x - 1.0f}, i));
  }
  EXPECT_FLOAT_EQ(average_consecutive(mapped, 8).values[0], 2.0f * average_consecutive(plain, 8).values[0] - 1.0f);
}

TEST(AverageConsecutive, Errors) {
  const std::vector<ParamSnapshot> one{snap({1.0f}, 1)};
  EXPECT_THROW(average_consecutive(one, 2), InputError);
  EXPECT_THROW(average_consecutive(one, 0), InputError);
  const std::vector<ParamSnapshot> mismatch{snap({1.0f}, 1), snap({1.0f, 2.0f}, 2)};
  EXPECT_THROW(average_consecutive(mismatch, 2), InputError);
  const std::vector<ParamSnapshot> unordered{snap({1.0f}, 2), snap({1.0f}, 1)};
  EXPECT_THROW(average_consecutive(unordered, 2), InputError);
}

// With 20k blocks and a 5k interval a block holds only four checkpoints,
// so every 8-checkpoint window crosses a block boundary. With 40k blocks the
// window ending at a block's last checkpoint fits inside the block.
TEST(AverageConsecutive, WindowSpanFlag) {
  const auto window_flags = [](std::int64_t block) {
    const auto tags = compile_block_schedule(block, 160000, 5000).checkpoints();
    std::vector<ParamSnapshot> snaps;
    for (const auto& t : tags) snaps.push_back({{1.0f}, t.update, t});
    std::vector<bool> flags;
    for (std::size_t end = 8; end <= snaps.size(); ++end)
      flags.push_back(average_consecutive(std::span(snaps).first(end), 8).tag->spans_blocks);
    return flags;
  };
  for (bool f : window_flags(20000)) EXPECT_TRUE(f);
  // 40k blocks: block 0 holds 5k..35k (the 40k checkpoint opens block 1),
  // middle blocks hold eight each, and the final checkpoint joins the last
  // block, so the windows ending at 75k, 115k, 155k and 160k stay inside one
  // block.
  const auto f40 = window_flags(40000);
  std::vector<std::int64_t> unflagged;
  for (std::size_t i = 0; i < f40.size(); ++i)
    if (!f40[i]) unflagged.push_back(5000 * static_cast<std::int64_t>(i + 8));
  EXPECT_EQ(unflagged, (std::vector<std::int64_t>{75000, 115000, 155000, 160000}));
}

TEST(ReplaySmoothing, EmitsAtMultiples) {
  std::vector<ParamSnapshot> stream;
  for (int u = 1; u <= 10; ++u) stream.push_back(snap({static_cast<float>(u)}, u));
  const auto out = replay_smoothing(stream, {0.1, 5});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].update, 5);
  EXPECT_EQ(out[1].update, 10);
  EXPECT_EQ(replay_smoothing(stream, {0.1, 5})[1], out[1]);
}

TEST(ReplaySmoothing, AlphaOneReproducesInputs) {
  std::vector<ParamSnapshot> stream;
  for (int u = 1; u <= 20; ++u) stream.push_back(snap({static_cast<float>(u * u), -static_cast<float>(u)}, u));
  const auto out = replay_smoothing(stream, {1.0, 4, false, AlphaRange::allow_one});
  ASSERT_EQ(out.size(), 5u);
  for (const auto& e : out) EXPECT_EQ(e.values, stream[static_cast<std::size_t>(e.update - 1)].values);
  EXPECT_THROW(replay_smoothing(stream, {1.0, 4}), InputError);
}

TEST(ReplaySmoothing, MatchesBruteForceAtTenThousand) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<ParamSnapshot> stream;
  std::vector<double> thetas;
  for (int u = 1; u <= 10000; ++u) {
    stream.push_back(snap({dist(rng)}, u));
    thetas.push_back(stream.back().values[0]);
  }
  const auto out = replay_smoothing(stream, {0.001, 5000});
  ASSERT_EQ(out.size(), 2u);
  const double init = thetas.front();
  const auto expected = static_cast<double>(closed_form(0.001, init, std::vector<double>(thetas.begin() + 1, thetas.end())));
  EXPECT_NEAR(out[1].values[0], expected, 1e-6 * std::abs(expected));
}

TEST(ReplaySmoothing, RejectsOutOfOrder) {
  const std::vector<ParamSnapshot> stream{snap({1.0f}, 1), snap({1.0f}, 3)};
  EXPECT_THROW(replay_smoothing(stream, {0.1, 1}), InputError);
  const std::vector<ParamSnapshot> back{snap({1.0f}, 2), snap({1.0f}, 1)};
  EXPECT_THROW(replay_smoothing(back, {0.1, 1}), InputError);
}

TEST(SnapshotFile, RoundTripIsBitExact) {
  const CheckpointTag tag{"ckpt_5000", 5000, BlockType::bt, 1, true};
  const ParamSnapshot s{{0.1f, -0.0f, 3.4028235e38f, 1e-45f}, 5000, tag};
  const auto bytes = serialize_snapshot(s);
  EXPECT_TRUE(bytes.starts_with("PSNAP1\ndim=4 update=5000 tag=ckpt_5000:bt:1:span\n"));
  EXPECT_EQ(bytes.size(), std::string("PSNAP1\ndim=4 update=5000 tag=ckpt_5000:bt:1:span\n").size() + 16);
  const auto back = deserialize_snapshot(bytes);
  ASSERT_EQ(back.values.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.values[i]), std::bit_cast<std::uint32_t>(s.values[i]));
  EXPECT_EQ(back, s);
  testing::TempDir dir;
  EXPECT_EQ(load_snapshot(dir.write("s.psnap", bytes)), s);
  EXPECT_EQ(deserialize_snapshot(serialize_snapshot(snap({1.0f}, 7))).tag, std::nullopt);
}

TEST(SnapshotFile, LittleEndianPayload) {
  const auto bytes = serialize_snapshot(snap({1.0f}, 0));
  EXPECT_EQ(bytes.substr(bytes.size() - 4), std::string("\x00\x00\x80\x3f", 4));
}

TEST(SnapshotFile, RejectsCorruption) {
  const auto bytes = serialize_snapshot(snap({1.0f, 2.0f}, 3));
  EXPECT_THROW(deserialize_snapshot("PSNAP2\n" + bytes.substr(7)), InputError);
  EXPECT_THROW(deserialize_snapshot(bytes.substr(0, bytes.size() - 1)), InputError);
  EXPECT_THROW(deserialize_snapshot("PSNAP1\ndim=0 update=0 tag=none\n"), InputError);
  EXPECT_THROW(deserialize_snapshot("PSNAP1\ndim=1 update=0 tag=x:zz:0\nabcd"), InputError);
  EXPECT_THROW(serialize_snapshot(snap({NAN})), InputError);
}

}  // namespace
}  // namespace bbt
