#include <gtest/gtest.h>

#include <cmath>

#include "fptscale/scaling.hpp"
#include "fptscale/synth.hpp"
#include "support.hpp"

using namespace fpt;
using fpt::testing::brownian_fpt;
using fpt::testing::closed_form_surface;

namespace {

Duration sec(double s) { return from_seconds(s); }

ScaledCurve curve(std::vector<double> axis, std::vector<double> values, Wing wing = Wing::positive) {
  ScaledCurve c;
  c.axis = std::move(axis);
  c.values = std::move(values);
  c.bin_width.assign(c.axis.size(), 1.0);
  c.label.wing = wing;
  return c;
}

constexpr double kSigma = 2e-4;

FptSurface wiener_surface(const HorizonGrid& horizons, std::size_t per_wing = 25) {
  const double v = kSigma * std::sqrt(horizons.seconds(0));
  std::vector<double> vt;
  for (std::size_t j = 0; j < horizons.size(); ++j) vt.push_back(kSigma * std::sqrt(horizons.seconds(j)));
  return closed_form_surface(LevelGrid::log_spaced(0.01 * v, 100 * v, per_wing), horizons,
                             [](double x, double t) { return brownian_fpt(x, t, kSigma); }, vt);
}

FptSurface mc_surface(synth::ProcessSpec spec, Duration horizon, std::size_t per_wing = 13) {
  const auto paths = synth::generate(spec);
  const double v = stddev_at_horizon(paths, horizon);
  return estimate_fpt(paths, default_level_grid(v, per_wing), HorizonGrid(std::vector<Duration>{horizon}));
}

}  // namespace

TEST(CommonGrid, LogSpacedPointsAndWidths) {
  const auto g = CommonGrid::log_spaced(0.01, 10, 7);
  ASSERT_EQ(g.points.size(), 7u);
  EXPECT_NEAR(g.points.front(), 0.01, 1e-15);
  EXPECT_NEAR(g.points.back(), 10, 1e-12);
  const double r = std::pow(1000.0, 1.0 / 6.0);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_NEAR(g.points[i + 1 < 7 ? i + 1 : i] / g.points[i + 1 < 7 ? i : i - 1], r, 1e-12);
    EXPECT_NEAR(g.widths[i], g.points[i] * (std::sqrt(r) - 1 / std::sqrt(r)), 1e-12 * g.points[i]);
  }
}

TEST(Resample, InterpolatesInLogAxisAndMarksGaps) {
  const auto c = curve({1, 100}, {0.0, 1.0});
  CommonGrid g;
  g.points = {0.5, 1, 10, 100, 200};
  g.widths = {1, 1, 1, 1, 1};
  const auto r = resample(c, g);
  EXPECT_TRUE(std::isnan(r.values[0]));
  EXPECT_EQ(r.values[1], 0.0);
  EXPECT_NEAR(r.values[2], 0.5, 1e-15);
  EXPECT_EQ(r.values[3], 1.0);
  EXPECT_TRUE(std::isnan(r.values[4]));
}

TEST(ScaleByVolatility, SingleCurveDividesByVt) {
  const auto h = HorizonGrid::from_seconds(std::vector<double>{900});
  const auto s = wiener_surface(h, 5);
  const auto curves = scale_by_volatility(s, Wing::positive, 0);
  ASSERT_EQ(curves.size(), 1u);
  const auto pos = s.levels.wing(Wing::positive);
  for (std::size_t k = 0; k < pos.size(); ++k) {
    EXPECT_DOUBLE_EQ(curves[0].axis[k], s.levels[pos[k]] / s.vt[0]);
    EXPECT_EQ(curves[0].values[k], s.value(pos[k], 0));
  }
  EXPECT_EQ(curves[0].label.key, CurveKey::horizon);
  EXPECT_EQ(curves[0].label.key_value, 900.0);
}

TEST(ScaleByVolatility, ExactWienerHorizonsCollapse) {
  const auto h = HorizonGrid::from_seconds(std::vector<double>{900, 3600});
  const auto curves = scale_by_volatility(wiener_surface(h, 41), Wing::positive);
  ASSERT_EQ(curves.size(), 2u);
  for (std::size_t i = 0; i < curves[0].axis.size(); ++i) {
    EXPECT_NEAR(curves[0].values[i], std::erfc(curves[0].axis[i] / std::sqrt(2.0)), 2e-3);
    EXPECT_NEAR(curves[0].values[i], curves[1].values[i], 2e-3);
  }
  EXPECT_LT(dispersion_theta(curves, AxisRole::level).theta, 1e-3);
}

TEST(ScaleByVolatility, DegenerateVtThrows) {
  const auto h = HorizonGrid::from_seconds(std::vector<double>{900});
  auto s = wiener_surface(h, 5);
  s.vt[0] = 0.0;
  EXPECT_THROW(scale_by_volatility(s, Wing::positive), DegenerateScaleError);
}

TEST(ScaleTime, TauDefinition) {
  const auto h = HorizonGrid::from_seconds(std::vector<double>{60, 600});
  FptSurface s = closed_form_surface(LevelGrid(std::vector<double>{0.01, 0.02}), h,
                                     [](double, double) { return 0.5; }, {0.01, 0.02});
  const auto curves = scale_time(s, 0.01, Wing::positive);
  ASSERT_EQ(curves.size(), 2u);
  EXPECT_EQ(curves[0].label.key, CurveKey::level);
  EXPECT_DOUBLE_EQ(curves[0].axis[0], 60.0);  // x = v0: tau = t
  EXPECT_DOUBLE_EQ(curves[0].axis[1], 600.0);
  EXPECT_DOUBLE_EQ(curves[1].axis[0], 15.0);  // doubled x quarters tau
  EXPECT_EQ(curves[0].values[0], 0.5);        // S = 1 - W
  const auto unit = scale_time(s, 0.01, Wing::positive, 60.0);
  EXPECT_DOUBLE_EQ(unit[0].axis[0], 1.0);
}

TEST(ScaleTime, ExactWienerLevelsCollapse) {
  const auto h = HorizonGrid::from_seconds(std::vector<double>{60, 300, 900, 1800, 3600, 5400, 7200});
  const auto s = wiener_surface(h, 7);
  const double v0 = kSigma * std::sqrt(1800.0);
  const auto raw = scale_time(s, v0, Wing::positive, 1800.0);
  for (const auto& c : raw)
    for (std::size_t k = 0; k < c.axis.size(); ++k)
      EXPECT_NEAR(c.values[k], std::erf(std::sqrt(1.0 / (2.0 * c.axis[k]))), 1e-12);
  const auto binned = resample_common(raw, 7, Coverage::union_range);
  EXPECT_LT(dispersion_theta(binned, AxisRole::time).theta, 5e-3);
}

TEST(Dispersion, IdenticalCurvesGiveZero) {
  std::vector<ScaledCurve> c{curve({1, 2, 3}, {0.9, 0.5, 0.1}), curve({1, 2, 3}, {0.9, 0.5, 0.1})};
  EXPECT_EQ(dispersion_theta(c, AxisRole::level).theta, 0.0);
}

TEST(Dispersion, ConstantZeroAndOne) {
  auto a = curve({1, 2}, {0, 0});
  auto b = curve({1, 2}, {1, 1});
  a.bin_width = b.bin_width = {0.25, 0.75};
  std::vector<ScaledCurve> c{a, b};
  const auto r = dispersion_theta(c, AxisRole::level);
  EXPECT_DOUBLE_EQ(r.theta, 0.5);
  EXPECT_EQ(r.spread, (std::vector<double>{0.5, 0.5}));
}

TEST(Dispersion, HandComputedThreeCurves) {
  std::vector<ScaledCurve> c{curve({1, 2}, {0.1, 0.4}), curve({1, 2}, {0.2, 0.4}), curve({1, 2}, {0.6, 0.1})};
  c[0].bin_width = c[1].bin_width = c[2].bin_width = {1.0, 3.0};
  auto pop_std = [](std::vector<double> v) {
    double m = 0;
    for (double x : v) m += x / static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m) / static_cast<double>(v.size());
    return std::sqrt(s);
  };
  const double expect = (1.0 * pop_std({0.1, 0.2, 0.6}) + 3.0 * pop_std({0.4, 0.4, 0.1})) / 4.0;
  EXPECT_NEAR(dispersion_theta(c, AxisRole::time).theta, expect, 1e-15);
}

TEST(Dispersion, Errors) {
  std::vector<ScaledCurve> one{curve({1, 2}, {0, 1})};
  EXPECT_THROW(dispersion_theta(one, AxisRole::level), GridError);
  std::vector<ScaledCurve> mismatch{curve({1, 2}, {0, 1}), curve({1, 3}, {0, 1})};
  EXPECT_THROW(dispersion_theta(mismatch, AxisRole::level), GridError);
  std::vector<ScaledCurve> wings{curve({1, 2}, {0, 1}), curve({1, 2}, {0, 1}, Wing::negative)};
  EXPECT_THROW(dispersion_theta(wings, AxisRole::level), GridError);
}

TEST(Dispersion, Properties) {
  std::vector<ScaledCurve> c{curve({1, 2, 3, 4}, {0.9, 0.6, 0.3, 0.1}), curve({1, 2, 3, 4}, {0.8, 0.65, 0.2, 0.05}),
                             curve({1, 2, 3, 4}, {0.95, 0.5, 0.35, 0.0})};
  const double theta = dispersion_theta(c, AxisRole::level).theta;
  EXPECT_GT(theta, 0.0);
  std::vector<ScaledCurve> perm{c[2], c[0], c[1]};
  EXPECT_NEAR(dispersion_theta(perm, AxisRole::level).theta, theta, 1e-15);
  auto shifted = c, scaled = c;
  for (auto& x : shifted)
    for (auto& v : x.values) v += 0.125;
  for (auto& x : scaled)
    for (auto& v : x.values) v *= -0.5;
  EXPECT_NEAR(dispersion_theta(shifted, AxisRole::level).theta, theta, 1e-15);
  EXPECT_NEAR(dispersion_theta(scaled, AxisRole::level).theta, 0.5 * theta, 1e-15);
  std::vector<ScaledCurve> same{c[0], c[0], c[0]};
  EXPECT_EQ(dispersion_theta(same, AxisRole::level).theta, 0.0);
  auto nudged = same;
  nudged[1].values[2] += 1e-9;
  EXPECT_GT(dispersion_theta(nudged, AxisRole::level).theta, 0.0);
}

TEST(Dispersion, UnionCoverageUsesBinsWithTwoCurves) {
  std::vector<ScaledCurve> c{curve({1, 10}, {0.0, 0.0}), curve({3, 100}, {1.0, 1.0})};
  const auto r = resample_common(c, 5, Coverage::union_range);
  EXPECT_TRUE(std::isnan(r[0].values.back()));
  EXPECT_TRUE(std::isnan(r[1].values.front()));
  const auto d = dispersion_theta(r, AxisRole::time);
  EXPECT_DOUBLE_EQ(d.theta, 0.5);
  EXPECT_TRUE(std::isnan(d.spread.front()));
}

TEST(DecayExponent, ExactPowerLaw) {
  ScaledCurve c;
  for (double t = 10; t < 1e5; t *= 1.5) {
    c.axis.push_back(t);
    c.values.push_back(1.0 / std::sqrt(t));
  }
  const auto f = decay_exponent(c);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_GE(f.points, 5u);
  for (auto& v : c.values) v = 0.3;
  EXPECT_NEAR(decay_exponent(c).slope, 0.0, 1e-12);
}

TEST(DecayExponent, TooFewPoints) {
  auto c = curve({200, 400, 800, 1600}, {0.1, 0.07, 0.05, 0.035});
  EXPECT_THROW(decay_exponent(c), FitError);
}

TEST(DecayExponent, WienerMonteCarlo) {
  synth::ProcessSpec spec;
  spec.sigma = kSigma;
  spec.step = sec(10);
  spec.session_length = sec(6000);
  spec.paths = 20000;
  const double x = kSigma * std::sqrt(0.6);  // tau = sigma^2 t / x^2 spans [100, 1e4]
  std::vector<double> hs;
  for (double t = 60; t <= 6000 * 1.0001; t *= std::pow(100.0, 1.0 / 15)) hs.push_back(std::round(t));
  const HorizonGrid horizons = HorizonGrid::from_seconds(hs);
  const LevelGrid levels(std::vector<double>{x});
  synth::Monitoring mon;
  mon.levels = levels.values();
  mon.checkpoints = horizons.values();
  FptAccumulator acc(levels, horizons);
  for (std::size_t k = 0; k < spec.paths; ++k) acc.add(synth::generate_monitored_path(spec, k, mon), k);
  const auto s = acc.finish();
  const double v0 = kSigma * std::sqrt(1.0);
  const auto curves = scale_time(s, v0, Wing::positive, 1.0);
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_NEAR(decay_exponent(curves[0]).slope, -0.5, 0.05);
}

TEST(ScaleMarkets, StudentMarketRaisesDispersion) {
  synth::ProcessSpec a;
  a.family = synth::Family::iid_walk;
  a.step = sec(60);
  a.session_length = sec(900);
  a.paths = 40000;
  a.seed = 1;
  auto b = a;
  b.seed = 2;
  auto st = a;
  st.seed = 3;
  st.increments = synth::Increments::student;
  st.nu = 3.5;
  const auto h = sec(900);
  std::vector<FptSurface> same{mc_surface(a, h), mc_surface(b, h)};
  std::vector<FptSurface> mixed{same[0], mc_surface(st, h)};
  const double t_same = dispersion_theta(scale_markets(same, h, Wing::positive), AxisRole::market).theta;
  const double t_mixed = dispersion_theta(scale_markets(mixed, h, Wing::positive), AxisRole::market).theta;
  EXPECT_LT(t_same, t_mixed);
}
