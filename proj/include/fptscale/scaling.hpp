#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fptscale/estimator.hpp"

namespace fpt {

enum class CurveKey { horizon, level };

struct CurveLabel {
  std::string market;
  Wing wing = Wing::positive;
  CurveKey key = CurveKey::horizon;
  double key_value = 0.0;  // horizon in seconds or signed level
};

// Probabilities against a scaled abscissa (x / v_t or tau). bin_width is the
// width of the log-spaced bin centred on each abscissa point.
struct ScaledCurve {
  std::vector<double> axis;
  std::vector<double> values;
  std::vector<double> bin_width;
  CurveLabel label;
};

// N log-spaced points over [lo, hi]; bin edges sit at geometric midpoints.
struct CommonGrid {
  std::vector<double> points;
  std::vector<double> widths;

  static CommonGrid log_spaced(double lo, double hi, std::size_t bins);
};

inline constexpr std::size_t kDefaultBins = 7;

// Linear interpolation of (log axis, value); NaN outside the curve's range.
ScaledCurve resample(const ScaledCurve& curve, const CommonGrid& grid);
enum class Coverage { shared, union_range };

// Resamples onto `bins` log-spaced points covering the abscissa range shared by
// all curves (or their union, leaving NaN where a curve has no support).
std::vector<ScaledCurve> resample_common(std::span<const ScaledCurve> curves, std::size_t bins = kDefaultBins,
                                         Coverage coverage = Coverage::shared);

// One curve per horizon with abscissa |x| / v_t; bins == 0 keeps raw abscissas.
std::vector<ScaledCurve> scale_by_volatility(const FptSurface& surface, Wing wing,
                                             std::size_t bins = kDefaultBins);

// One survival curve per level with abscissa tau = (v0 / x)^2 t / time_unit.
// FPT surfaces are converted to S = 1 - W first.
std::vector<ScaledCurve> scale_time(const FptSurface& surface, double v0, Wing wing, double time_unit = 1.0);

// Curves of several markets at one horizon, scaled by each market's own v_t and
// resampled onto their shared range.
std::vector<ScaledCurve> scale_markets(std::span<const FptSurface> surfaces, Duration horizon, Wing wing,
                                       std::size_t bins = kDefaultBins);

enum class AxisRole { level, time, market };

const char* axis_role_name(AxisRole r);

struct DispersionReport {
  AxisRole role = AxisRole::level;
  Wing wing = Wing::positive;
  double theta = 0.0;
  std::size_t curve_count = 0;
  std::vector<double> axis;
  std::vector<double> bin_width;
  std::vector<double> spread;  // cross-curve population std per bin (NaN = skipped)
};

// Theta = (1/L) sum_i width_i * std_j(curve_j(u_i)), L = sum of used widths.
// A bin is used when at least two curves have a value there.
DispersionReport dispersion_theta(std::span<const ScaledCurve> curves, AxisRole role);

struct DecayFit {
  double slope = 0.0;
  double stderr = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

struct FitWindow {
  double lo = 1e2;
  double hi = 1e4;
};

// Least-squares slope of log S against log tau over points inside `window`.
DecayFit decay_exponent(const ScaledCurve& curve, FitWindow window = {});

}  // namespace fpt
