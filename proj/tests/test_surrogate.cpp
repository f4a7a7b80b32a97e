#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "fptscale/surrogate.hpp"
#include "fptscale/synth.hpp"
#include "support.hpp"

using namespace fpt;
using fpt::testing::make_path;

namespace {

Duration sec(double s) { return from_seconds(s); }

std::vector<double> increments(const ReturnPath& p) {
  std::vector<double> d;
  for (std::size_t k = 1; k < p.size(); ++k) d.push_back(p.returns[k] - p.returns[k - 1]);
  return d;
}

std::vector<Duration> durations(const ReturnPath& p) {
  std::vector<Duration> d;
  for (std::size_t k = 1; k < p.size(); ++k) d.push_back(p.offsets[k] - p.offsets[k - 1]);
  return d;
}

template <class T>
std::vector<T> sorted(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Every path with 2..4 dyadic increments drawn from a small alphabet, with
// distinct integer-second durations.
std::vector<ReturnPath> constructed_paths() {
  const double alphabet[] = {-0.5, -0.125, 0.25, 0.75};
  std::vector<ReturnPath> out;
  for (std::size_t len = 2; len <= 4; ++len) {
    std::size_t combos = 1;
    for (std::size_t k = 0; k < len; ++k) combos *= 4;
    for (std::size_t code = 0; code < combos; ++code) {
      std::vector<double> off{0}, ret{0};
      std::size_t c = code;
      for (std::size_t k = 0; k < len; ++k) {
        ret.push_back(ret.back() + alphabet[c % 4]);
        off.push_back(off.back() + static_cast<double>(1 + (code + 3 * k) % 5));
        c /= 4;
      }
      out.push_back(make_path(off, ret, out.size()));
      out.back().anchor_time = Timestamp{std::chrono::hours{24 * static_cast<int>(out.size())}};
    }
  }
  return out;
}

}  // namespace

TEST(ShuffleReturns, SingleIncrementUnchanged) {
  std::vector<ReturnPath> p{make_path({0, 5}, {0, 0.25})};
  EXPECT_EQ(shuffle_returns(p, 1), p);
  EXPECT_EQ(shuffle_times(p, 1), p);
}

TEST(ShuffleTimes, EqualDurationsUnchanged) {
  std::vector<ReturnPath> p{make_path({0, 2, 4, 6, 8}, {0, 0.25, -0.5, 0.125, 1})};
  EXPECT_EQ(shuffle_times(p, 77), p);
}

TEST(Shuffles, ExhaustiveInvariantsOnConstructedPaths) {
  const auto paths = constructed_paths();
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto r = shuffle_returns(paths, seed);
    const auto t = shuffle_times(paths, seed);
    ASSERT_EQ(r.size(), paths.size());
    ASSERT_EQ(t.size(), paths.size());
    for (std::size_t k = 0; k < paths.size(); ++k) {
      const auto& p = paths[k];
      for (const auto* q : {&r[k], &t[k]}) {
        EXPECT_EQ(q->session_id, p.session_id);
        EXPECT_EQ(q->anchor_time, p.anchor_time);
        EXPECT_EQ(q->size(), p.size());
        EXPECT_EQ(q->returns.front(), 0.0);
        EXPECT_EQ(q->offsets.front(), Duration{0});
        EXPECT_EQ(sorted(increments(*q)), sorted(increments(p)));
        EXPECT_EQ(sorted(durations(*q)), sorted(durations(p)));
        EXPECT_EQ(q->returns.back(), p.returns.back());
        EXPECT_EQ(q->offsets.back(), p.offsets.back());
        EXPECT_NO_THROW(q->validate());
      }
      EXPECT_EQ(r[k].offsets, p.offsets);
      EXPECT_EQ(t[k].returns, p.returns);
    }
    EXPECT_EQ(shuffle_returns(paths, seed), r);
    EXPECT_EQ(shuffle_times(paths, seed), t);
  }
}

TEST(Shuffles, SeedChangesOutput) {
  const auto paths = constructed_paths();
  EXPECT_NE(shuffle_returns(paths, 1), shuffle_returns(paths, 2));
  EXPECT_NE(shuffle_times(paths, 1), shuffle_times(paths, 2));
}

TEST(Shuffles, PermutationsAreUniform) {
  std::vector<ReturnPath> p{make_path({0, 1, 3, 6}, {0, 1, 3, 7})};  // increments 1, 2, 4 and durations 1, 2, 3
  const int draws = 12000;
  std::map<std::vector<double>, int> by_returns;
  std::map<std::vector<Duration>, int> by_times;
  for (int s = 0; s < draws; ++s) {
    ++by_returns[increments(shuffle_returns(p, static_cast<std::uint64_t>(s))[0])];
    ++by_times[durations(shuffle_times(p, static_cast<std::uint64_t>(s))[0])];
  }
  ASSERT_EQ(by_returns.size(), 6u);
  ASSERT_EQ(by_times.size(), 6u);
  const double expect = draws / 6.0;
  const double se = std::sqrt(draws * (1.0 / 6) * (5.0 / 6));
  for (const auto& [_, n] : by_returns) EXPECT_NEAR(n, expect, 3 * se);
  for (const auto& [_, n] : by_times) EXPECT_NEAR(n, expect, 3 * se);
}

TEST(SurrogateKind, Parsing) {
  EXPECT_EQ(parse_surrogate_kind("shuffle_times"), SurrogateKind::shuffle_times);
  EXPECT_THROW(parse_surrogate_kind("phase"), ConfigError);
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_upper_quantile(0.025), 1.959963984540054, 1e-9);
  EXPECT_NEAR(normal_upper_quantile(0.5), 0.0, 1e-12);
  EXPECT_THROW(normal_upper_quantile(0.0), ConfigError);
}

TEST(TailShape, ExponentialTailIsLinear) {
  const auto h = HorizonGrid::from_seconds(std::vector<double>{100, 400});
  const auto s = fpt::testing::closed_form_surface(
      LevelGrid::log_spaced(0.1, 10, 15), h, [](double x, double t) { return std::exp(-x / std::sqrt(t / 100)); },
      {1.0, 2.0});
  const auto shape = tail_shape(s);
  EXPECT_EQ(shape.horizons_used, 2u);
  EXPECT_NEAR(shape.mean_r2, 1.0, 1e-12);
}

TEST(Experiment, IidWalkShowsNoSignificantChange) {
  synth::ProcessSpec spec;
  spec.family = synth::Family::iid_walk;
  spec.increments = synth::Increments::laplace;
  spec.clock = synth::ClockKind::exponential;
  spec.step = sec(5);
  spec.session_length = sec(1800);
  spec.paths = 4000;
  const auto paths = synth::generate(spec);
  const auto horizons = HorizonGrid::from_seconds(std::vector<double>{60, 300, 900, 1500});
  const auto levels = default_level_grid(stddev_at_horizon(paths, sec(900)), 9);
  for (auto kind : {SurrogateKind::shuffle_returns, SurrogateKind::shuffle_times}) {
    const auto ex = surrogate_experiment(paths, levels, horizons, {kind, 42}, 2);
    EXPECT_FALSE(ex.significant_change) << to_string(kind);
    EXPECT_EQ(ex.replicates.size(), 2u);
    EXPECT_EQ(ex.decay.size(), 3u);
    EXPECT_GT(ex.z_critical, 3.0);
    for (std::size_t c = 0; c < ex.pooled.n.size(); ++c) EXPECT_EQ(ex.pooled.n[c], 2 * ex.original.n[c]);
  }
}

TEST(Experiment, WienerEitherShuffleIsNoise) {
  synth::ProcessSpec spec;
  spec.session_length = sec(900);
  spec.step = sec(2);
  spec.paths = 3000;
  const auto paths = synth::generate(spec);
  const auto horizons = HorizonGrid::from_seconds(std::vector<double>{60, 300, 900});
  const auto levels = default_level_grid(stddev_at_horizon(paths, sec(900)), 9);
  ExperimentOptions eo;
  eo.reference_horizon = sec(900);
  for (auto kind : {SurrogateKind::shuffle_returns, SurrogateKind::shuffle_times})
    EXPECT_FALSE(surrogate_experiment(paths, levels, horizons, {kind, 8}, 1, eo).significant_change);
}

TEST(Experiment, MomentumIsDestroyedByReturnShuffle) {
  fpt::testing::MomentumSpec m;
  const auto paths = fpt::testing::momentum_paths(m, 8000, 3);
  const auto horizons = HorizonGrid::from_seconds(std::vector<double>{900});
  const double v = stddev_at_horizon(paths, sec(900));
  const LevelGrid levels(std::vector<double>{3 * v, 5 * v});
  ExperimentOptions eo;
  eo.reference_horizon = sec(900);
  const auto ex = surrogate_experiment(paths, levels, horizons, {SurrogateKind::shuffle_returns, 1}, 1, eo);
  EXPECT_LT(ex.difference[1], 0.0);
  EXPECT_TRUE(ex.significant_change);
}

TEST(Experiment, NeedsAReplicate) {
  std::vector<ReturnPath> p{make_path({0, 1, 2}, {0, 1, 0})};
  EXPECT_THROW(surrogate_experiment(p, LevelGrid(std::vector<double>{0.5}),
                                    HorizonGrid::from_seconds(std::vector<double>{1}), {}, 0),
               ConfigError);
}
