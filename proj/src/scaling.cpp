#include "fptscale/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ScaledCurve raw_volatility_curve(const FptSurface& surface, std::size_t j, Wing wing) {
  const double v = surface.vt[j];
  if (!(v > 0.0)) throw DegenerateScaleError("scale_by_volatility: v_t is zero or undefined at horizon " +
                                             std::to_string(surface.horizons.seconds(j)) + " s");
  ScaledCurve c;
  c.label = {surface.market, wing, CurveKey::horizon, surface.horizons.seconds(j)};
  for (std::size_t i : surface.levels.wing(wing)) {
    if (surface.empty_cell(i, j)) continue;
    c.axis.push_back(std::abs(surface.levels[i]) / v);
    c.values.push_back(surface.value(i, j));
  }
  c.bin_width.assign(c.axis.size(), kNaN);
  return c;
}

}  // namespace

CommonGrid CommonGrid::log_spaced(double lo, double hi, std::size_t bins) {
  if (!(lo > 0.0) || !(hi >= lo) || bins < 1) throw GridError("common grid: need 0 < lo <= hi and bins >= 1");
  CommonGrid g;
  if (bins == 1 || hi == lo) {
    g.points.assign(1, lo);
    g.widths.assign(1, hi > lo ? hi - lo : lo);
    return g;
  }
  const double step = std::log(hi / lo) / static_cast<double>(bins - 1);
  const double half = std::exp(0.5 * step);
  for (std::size_t k = 0; k < bins; ++k) g.points.push_back(lo * std::exp(step * static_cast<double>(k)));
  g.points.back() = hi;
  for (std::size_t k = 0; k < bins; ++k) {
    const double left = k == 0 ? lo / half : std::sqrt(g.points[k - 1] * g.points[k]);
    const double right = k + 1 == bins ? hi * half : std::sqrt(g.points[k] * g.points[k + 1]);
    g.widths.push_back(right - left);
  }
  return g;
}

ScaledCurve resample(const ScaledCurve& curve, const CommonGrid& grid) {
  ScaledCurve out;
  out.label = curve.label;
  out.axis = grid.points;
  out.bin_width = grid.widths;
  out.values.assign(grid.points.size(), kNaN);
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < curve.axis.size(); ++k) {
    if (std::isnan(curve.values[k]) || !(curve.axis[k] > 0.0)) continue;
    lx.push_back(std::log(curve.axis[k]));
    ly.push_back(curve.values[k]);
  }
  for (std::size_t k = 1; k < lx.size(); ++k)
    if (!(lx[k] > lx[k - 1])) throw GridError("resample: curve abscissa must increase strictly");
  if (lx.empty()) return out;
  constexpr double kEdge = 1e-12;
  for (std::size_t p = 0; p < grid.points.size(); ++p) {
    const double q = std::log(grid.points[p]);
    if (q < lx.front() - kEdge || q > lx.back() + kEdge) continue;
    if (lx.size() == 1 || q <= lx.front()) {
      out.values[p] = ly.front();
      continue;
    }
    if (q >= lx.back()) {
      out.values[p] = ly.back();
      continue;
    }
    const auto it = std::upper_bound(lx.begin(), lx.end(), q);
    const std::size_t hi = static_cast<std::size_t>(it - lx.begin()), lo = hi - 1;
    const double f = (q - lx[lo]) / (lx[hi] - lx[lo]);
    out.values[p] = ly[lo] + f * (ly[hi] - ly[lo]);
  }
  return out;
}

std::vector<ScaledCurve> resample_common(std::span<const ScaledCurve> curves, std::size_t bins,
                                         Coverage coverage) {
  if (curves.empty()) return {};
  const bool shared = coverage == Coverage::shared;
  double lo = shared ? 0.0 : std::numeric_limits<double>::infinity();
  double hi = shared ? std::numeric_limits<double>::infinity() : 0.0;
  for (const auto& c : curves) {
    double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
    for (std::size_t k = 0; k < c.axis.size(); ++k) {
      if (std::isnan(c.values[k]) || !(c.axis[k] > 0.0)) continue;
      cmin = std::min(cmin, c.axis[k]);
      cmax = std::max(cmax, c.axis[k]);
    }
    if (!(cmax > 0.0)) throw GridError("resample: curve without usable points");
    lo = shared ? std::max(lo, cmin) : std::min(lo, cmin);
    hi = shared ? std::min(hi, cmax) : std::max(hi, cmax);
  }
  if (!(hi > lo)) throw GridError("resample: curves share no abscissa range");
  const auto grid = CommonGrid::log_spaced(lo, hi, bins);
  std::vector<ScaledCurve> out;
  out.reserve(curves.size());
  for (const auto& c : curves) out.push_back(resample(c, grid));
  return out;
}

std::vector<ScaledCurve> scale_by_volatility(const FptSurface& surface, Wing wing, std::size_t bins) {
  std::vector<ScaledCurve> raw;
  for (std::size_t j = 0; j < surface.cols(); ++j) {
    bool any = false;
    for (std::size_t i : surface.levels.wing(wing)) any = any || !surface.empty_cell(i, j);
    if (!any) continue;
    raw.push_back(raw_volatility_curve(surface, j, wing));
  }
  if (bins == 0) return raw;
  return resample_common(raw, bins);
}

std::vector<ScaledCurve> scale_time(const FptSurface& surface, double v0, Wing wing, double time_unit) {
  if (!(v0 > 0.0)) throw DegenerateScaleError("scale_time: reference volatility must be positive");
  if (!(time_unit > 0.0)) throw ConfigError("scale_time: time unit must be positive");
  const bool flip = surface.quantity == Quantity::fpt;
  std::vector<ScaledCurve> out;
  for (std::size_t i : surface.levels.wing(wing)) {
    const double x = surface.levels[i];
    const double ratio = v0 / x;
    ScaledCurve c;
    c.label = {surface.market, wing, CurveKey::level, x};
    for (std::size_t j = 0; j < surface.cols(); ++j) {
      if (surface.empty_cell(i, j)) continue;
      c.axis.push_back(ratio * ratio * surface.horizons.seconds(j) / time_unit);
      const double v = surface.value(i, j);
      c.values.push_back(flip ? 1.0 - v : v);
    }
    c.bin_width.assign(c.axis.size(), kNaN);
    if (!c.axis.empty()) out.push_back(std::move(c));
  }
  return out;
}

std::vector<ScaledCurve> scale_markets(std::span<const FptSurface> surfaces, Duration horizon, Wing wing,
                                       std::size_t bins) {
  std::vector<ScaledCurve> raw;
  for (const auto& s : surfaces) {
    const auto& hz = s.horizons.values();
    auto it = std::find(hz.begin(), hz.end(), horizon);
    if (it == hz.end())
      throw GridError("scale_markets: market '" + s.market + "' lacks horizon " +
                      std::to_string(to_seconds(horizon)) + " s");
    raw.push_back(raw_volatility_curve(s, static_cast<std::size_t>(it - hz.begin()), wing));
  }
  return resample_common(raw, bins);
}

const char* axis_role_name(AxisRole r) {
  switch (r) {
    case AxisRole::level: return "theta_x";
    case AxisRole::time: return "theta_t";
    case AxisRole::market: return "theta_mkt";
  }
  return "?";
}

DispersionReport dispersion_theta(std::span<const ScaledCurve> curves, AxisRole role) {
  if (curves.size() < 2) throw GridError("dispersion: need at least two curves");
  const auto& ref = curves.front();
  for (const auto& c : curves) {
    if (c.axis != ref.axis || c.bin_width != ref.bin_width || c.values.size() != ref.axis.size())
      throw GridError("dispersion: curves are not on a common grid (resample first)");
    if (c.label.wing != ref.label.wing) throw GridError("dispersion: wings must not be mixed");
  }
  DispersionReport r;
  r.role = role;
  r.wing = ref.label.wing;
  r.curve_count = curves.size();
  r.axis = ref.axis;
  r.bin_width = ref.bin_width;
  r.spread.assign(ref.axis.size(), kNaN);
  double weighted = 0.0, total_width = 0.0;
  for (std::size_t i = 0; i < ref.axis.size(); ++i) {
    if (!(ref.bin_width[i] > 0.0)) throw GridError("dispersion: bin widths must be positive");
    double mean = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t present = 0;
    for (const auto& c : curves) {
      if (std::isnan(c.values[i])) continue;
      mean += c.values[i];
      lo = std::min(lo, c.values[i]);
      hi = std::max(hi, c.values[i]);
      ++present;
    }
    if (present < 2) continue;
    const double m = static_cast<double>(present);
    mean /= m;
    double var = 0.0;
    for (const auto& c : curves)
      if (!std::isnan(c.values[i])) var += (c.values[i] - mean) * (c.values[i] - mean);
    const double sd = lo == hi ? 0.0 : std::sqrt(var / m);
    r.spread[i] = sd;
    weighted += ref.bin_width[i] * sd;
    total_width += ref.bin_width[i];
  }
  if (total_width == 0.0) throw GridError("dispersion: no bin is covered by two or more curves");
  r.theta = weighted / total_width;
  return r;
}

DecayFit decay_exponent(const ScaledCurve& curve, FitWindow window) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < curve.axis.size(); ++k) {
    const double tau = curve.axis[k], s = curve.values[k];
    if (!(tau >= window.lo && tau <= window.hi) || !(s > 0.0)) continue;
    lx.push_back(std::log(tau));
    ly.push_back(std::log(s));
  }
  const std::size_t n = lx.size();
  if (n < 5) throw FitError("decay_exponent: fewer than 5 positive points inside the fit window");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  if (!(sxx > 0.0)) throw FitError("decay_exponent: degenerate abscissa");
  DecayFit f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = ly[k] - (f.intercept + f.slope * lx[k]);
    rss += r * r;
  }
  f.stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  return f;
}

}  // namespace fpt
