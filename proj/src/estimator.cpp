#include "fptscale/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fptscale/parallel.hpp"

namespace fpt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_wing_order(const std::vector<double>& levels) {
  double last_pos = 0.0, last_neg = 0.0;
  for (double x : levels) {
    if (!std::isfinite(x) || x == 0.0) throw GridError("level grid: levels must be finite and non-zero");
    if (x > 0) {
      if (!(x > last_pos)) throw GridError("level grid: positive wing must increase strictly");
      last_pos = x;
    } else {
      if (!(x < last_neg)) throw GridError("level grid: negative wing must decrease strictly");
      last_neg = x;
    }
  }
}

}  // namespace

LevelGrid::LevelGrid(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw GridError("level grid: empty");
  check_wing_order(levels_);
}

LevelGrid LevelGrid::symmetric(std::span<const double> magnitudes) {
  std::vector<double> v(magnitudes.begin(), magnitudes.end());
  for (double m : magnitudes) v.push_back(-m);
  return LevelGrid(std::move(v));
}

LevelGrid LevelGrid::log_spaced(double lo, double hi, std::size_t count, bool both_wings) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) throw GridError("level grid: need 0 < lo < hi and count >= 2");
  std::vector<double> mags(count);
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) mags[k] = lo * std::exp(step * static_cast<double>(k));
  mags.back() = hi;
  if (!both_wings) return LevelGrid(std::move(mags));
  return symmetric(mags);
}

std::vector<std::size_t> LevelGrid::wing(Wing w) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if ((levels_[i] > 0) == (w == Wing::positive)) rows.push_back(i);
  return rows;
}

HorizonGrid::HorizonGrid(std::vector<Duration> horizons) : horizons_(std::move(horizons)) {
  if (horizons_.empty()) throw GridError("horizon grid: empty");
  for (std::size_t j = 0; j < horizons_.size(); ++j) {
    if (horizons_[j] <= Duration{0}) throw GridError("horizon grid: horizons must be positive");
    if (j > 0 && horizons_[j] <= horizons_[j - 1]) throw GridError("horizon grid: must increase strictly");
  }
}

HorizonGrid HorizonGrid::standard() {
  static constexpr double kSeconds[] = {60, 300, 900, 1800, 3600, 5400, 7200};
  return from_seconds(kSeconds);
}

HorizonGrid HorizonGrid::from_seconds(std::span<const double> seconds) {
  std::vector<Duration> h;
  h.reserve(seconds.size());
  for (double s : seconds) h.push_back(fpt::from_seconds(s));
  return HorizonGrid(std::move(h));
}

// ---------------------------------------------------------------------------

double FptSurface::stderr_at(std::size_t i, std::size_t j) const {
  auto c = index(i, j);
  if (n[c] == 0) return kNaN;
  double p = w[c];
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n[c]));
}

FptSurface FptSurface::without_batch(std::size_t b) const {
  if (b >= batches) throw GridError("surface: batch index out of range");
  FptSurface out = *this;
  const std::size_t cells = w.size();
  for (std::size_t c = 0; c < cells; ++c) {
    out.crossed[c] -= batch_crossed[b * cells + c];
    out.n[c] -= batch_n[b * cells + c];
    double k = static_cast<double>(out.crossed[c]);
    double m = static_cast<double>(out.n[c]);
    out.w[c] = out.n[c] == 0 ? kNaN : (quantity == Quantity::fpt ? k / m : 1.0 - k / m);
  }
  out.batches = 0;
  out.batch_crossed.clear();
  out.batch_n.clear();
  return out;
}

void FptSurface::validate() const {
  const std::size_t cells = rows() * cols();
  if (w.size() != cells || n.size() != cells || vt.size() != cols())
    throw DataQualityError("surface: matrix shape does not match grids");
  for (std::size_t c = 0; c < cells; ++c) {
    if (n[c] == 0) continue;
    if (!(w[c] >= 0.0 && w[c] <= 1.0)) throw DataQualityError("surface: probability outside [0, 1]");
  }
  const double sign = quantity == Quantity::fpt ? 1.0 : -1.0;
  // Non-decreasing in t (W) when the eligible population is nested.
  for (std::size_t i = 0; i < rows(); ++i)
    for (std::size_t j = 1; j < cols(); ++j) {
      auto a = index(i, j - 1), b = index(i, j);
      if (n[a] == 0 || n[b] == 0 || n[a] != n[b]) continue;
      if (sign * (w[b] - w[a]) < 0.0) throw DataQualityError("surface: not monotone in t");
    }
  for (Wing wing : {Wing::positive, Wing::negative}) {
    auto rws = levels.wing(wing);
    for (std::size_t k = 1; k < rws.size(); ++k)
      for (std::size_t j = 0; j < cols(); ++j) {
        auto a = index(rws[k - 1], j), b = index(rws[k], j);
        if (n[a] == 0 || n[b] == 0) continue;
        if (sign * (w[b] - w[a]) > 0.0) throw DataQualityError("surface: not monotone in |x|");
      }
  }
}

// ---------------------------------------------------------------------------

std::optional<Duration> first_crossing(const ReturnPath& path, double level) {
  if (level == 0.0) throw GridError("first_crossing: level must be non-zero");
  for (std::size_t k = 0; k < path.size(); ++k) {
    double x = path.returns[k];
    if (level > 0 ? x > level : x < level) return path.offsets[k];
  }
  return std::nullopt;
}

FptAccumulator::FptAccumulator(LevelGrid levels, HorizonGrid horizons, std::size_t batches)
    : levels_(std::move(levels)), horizons_(std::move(horizons)), batches_(std::max<std::size_t>(batches, 1)) {
  const std::size_t L = levels_.size(), H = horizons_.size();
  crossed_.assign(L * H, 0);
  n_.assign(L * H, 0);
  batch_crossed_.assign(batches_ * L * H, 0);
  batch_n_.assign(batches_ * L * H, 0);
  mcount_.assign(H, 0);
  mean_.assign(H, 0.0);
  m2_.assign(H, 0.0);
  pos_order_ = levels_.wing(Wing::positive);
  neg_order_ = levels_.wing(Wing::negative);
  cross_time_.assign(L, Duration::max());
  at_horizon_.assign(H, 0.0);
}

void FptAccumulator::add(const ReturnPath& path, std::uint64_t ordinal) {
  const std::size_t L = levels_.size(), H = horizons_.size();
  const auto& lv = levels_.values();
  const auto& hz = horizons_.values();
  const Duration last_h = hz.back();

  std::fill(cross_time_.begin(), cross_time_.end(), Duration::max());
  std::size_t next_pos = 0, next_neg = 0, next_h = 0;
  double running_max = 0.0, running_min = 0.0, current = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const Duration t = path.offsets[k];
    if (t > last_h) break;
    while (next_h < H && hz[next_h] < t) at_horizon_[next_h++] = current;
    current = path.returns[k];
    if (current > running_max) {
      running_max = current;
      while (next_pos < pos_order_.size() && running_max > lv[pos_order_[next_pos]])
        cross_time_[pos_order_[next_pos++]] = t;
    } else if (current < running_min) {
      running_min = current;
      while (next_neg < neg_order_.size() && running_min < lv[neg_order_[next_neg]])
        cross_time_[neg_order_[next_neg++]] = t;
    }
  }
  while (next_h < H) at_horizon_[next_h++] = current;

  // Horizons this path spans.
  const Duration span = path.span();
  std::size_t eligible = 0;
  while (eligible < H && hz[eligible] <= span) ++eligible;
  if (eligible == 0) {
    ++added_;
    return;
  }

  const std::size_t batch = static_cast<std::size_t>(ordinal % batches_);
  std::uint64_t* bc = batch_crossed_.data() + batch * L * H;
  std::uint64_t* bn = batch_n_.data() + batch * L * H;
  for (std::size_t i = 0; i < L; ++i) {
    const std::size_t row = i * H;
    for (std::size_t j = 0; j < eligible; ++j) {
      ++n_[row + j];
      ++bn[row + j];
    }
    const Duration tc = cross_time_[i];
    if (tc == Duration::max()) continue;
    std::size_t j0 = static_cast<std::size_t>(std::lower_bound(hz.begin(), hz.begin() + eligible, tc) - hz.begin());
    for (std::size_t j = j0; j < eligible; ++j) {
      ++crossed_[row + j];
      ++bc[row + j];
    }
  }
  for (std::size_t j = 0; j < eligible; ++j) {
    const double x = at_horizon_[j];
    ++mcount_[j];
    const double delta = x - mean_[j];
    mean_[j] += delta / static_cast<double>(mcount_[j]);
    m2_[j] += delta * (x - mean_[j]);
  }
  ++added_;
}

void FptAccumulator::merge(const FptAccumulator& other) {
  if (other.levels_.values() != levels_.values() || other.horizons_.values() != horizons_.values() ||
      other.batches_ != batches_)
    throw GridError("accumulator merge: grids differ");
  for (std::size_t c = 0; c < crossed_.size(); ++c) {
    crossed_[c] += other.crossed_[c];
    n_[c] += other.n_[c];
  }
  for (std::size_t c = 0; c < batch_crossed_.size(); ++c) {
    batch_crossed_[c] += other.batch_crossed_[c];
    batch_n_[c] += other.batch_n_[c];
  }
  for (std::size_t j = 0; j < mean_.size(); ++j) {
    const std::uint64_t na = mcount_[j], nb = other.mcount_[j];
    if (nb == 0) continue;
    if (na == 0) {
      mcount_[j] = nb;
      mean_[j] = other.mean_[j];
      m2_[j] = other.m2_[j];
      continue;
    }
    const double total = static_cast<double>(na + nb);
    const double delta = other.mean_[j] - mean_[j];
    mean_[j] += delta * static_cast<double>(nb) / total;
    m2_[j] += other.m2_[j] + delta * delta * static_cast<double>(na) * static_cast<double>(nb) / total;
    mcount_[j] = na + nb;
  }
  added_ += other.added_;
}

FptSurface FptAccumulator::finish(std::string market) const {
  FptSurface s;
  s.market = std::move(market);
  s.levels = levels_;
  s.horizons = horizons_;
  s.crossed = crossed_;
  s.n = n_;
  s.w.resize(crossed_.size());
  for (std::size_t c = 0; c < crossed_.size(); ++c)
    s.w[c] = n_[c] == 0 ? kNaN : static_cast<double>(crossed_[c]) / static_cast<double>(n_[c]);
  s.vt.resize(mean_.size());
  s.vt_count = mcount_;
  for (std::size_t j = 0; j < mean_.size(); ++j)
    s.vt[j] = mcount_[j] < 2 ? kNaN : std::sqrt(m2_[j] / static_cast<double>(mcount_[j]));
  s.batches = batches_;
  s.batch_crossed = batch_crossed_;
  s.batch_n = batch_n_;
  return s;
}

FptSurface estimate_fpt(std::span<const ReturnPath> paths, const LevelGrid& levels, const HorizonGrid& horizons,
                        const EstimateOptions& options, std::string market) {
  const std::size_t chunk = std::max<std::size_t>(options.chunk, 1);
  const std::size_t chunks = (paths.size() + chunk - 1) / chunk;
  std::vector<std::optional<FptAccumulator>> parts(chunks);
  for_each_chunk(chunks, options.threads, [&](std::size_t c) {
    FptAccumulator acc(levels, horizons, options.batches);
    const std::size_t end = std::min(paths.size(), (c + 1) * chunk);
    for (std::size_t k = c * chunk; k < end; ++k) acc.add(paths[k], k);
    parts[c].emplace(std::move(acc));
  });
  FptAccumulator total(levels, horizons, options.batches);
  for (const auto& p : parts) total.merge(*p);
  return total.finish(std::move(market));
}

FptSurface survival(const FptSurface& surface) {
  FptSurface s = surface;
  s.quantity = surface.quantity == Quantity::fpt ? Quantity::survival : Quantity::fpt;
  for (auto& v : s.w)
    if (!std::isnan(v)) v = 1.0 - v;
  return s;
}

double stddev_at_horizon(std::span<const ReturnPath> paths, Duration t) {
  std::uint64_t count = 0;
  double mean = 0.0, m2 = 0.0;
  for (const auto& p : paths) {
    if (p.span() < t) continue;
    const double x = p.value_at(t);
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  if (count < 2) throw InsufficientDataError("stddev_at_horizon: fewer than 2 paths span the horizon");
  return std::sqrt(m2 / static_cast<double>(count));
}

double wiener_fpt(double x, double t_seconds, double sigma) {
  if (!(t_seconds > 0.0) || !(sigma > 0.0)) throw ConfigError("wiener_fpt: t and sigma must be positive");
  return std::erfc(std::abs(x) / std::sqrt(2.0 * sigma * sigma * t_seconds));
}

GaussianGap gaussian_gap(const FptSurface& surface) {
  GaussianGap out;
  const std::size_t L = surface.rows(), H = surface.cols();
  out.gap.assign(L * H, kNaN);
  out.zscore.assign(L * H, kNaN);
  double sum_large = 0.0, sum_small = 0.0;
  for (std::size_t j = 0; j < H; ++j) {
    const double v = surface.vt[j];
    if (!(v > 0.0)) continue;
    const double t = surface.horizons.seconds(j);
    const double sigma = v / std::sqrt(t);
    for (std::size_t i = 0; i < L; ++i) {
      const auto c = surface.index(i, j);
      if (surface.n[c] == 0) continue;
      const double x = surface.levels[i];
      double wg = wiener_fpt(x, t, sigma);
      if (surface.quantity == Quantity::survival) wg = 1.0 - wg;
      const double w = surface.w[c];
      const double g = w - wg;
      out.gap[c] = g;
      const double var = std::max(w * (1.0 - w), wg * (1.0 - wg)) / static_cast<double>(surface.n[c]);
      out.zscore[c] = var > 0.0 ? g / std::sqrt(var) : 0.0;
      const double u = std::abs(x) / v;
      GapRegion* region = u >= 1.0 ? &out.large : (u <= 0.1 ? &out.small : nullptr);
      if (!region) continue;
      ++region->cells;
      if (g > 0) ++region->positive;
      if (g < 0) ++region->negative;
      (region == &out.large ? sum_large : sum_small) += g;
    }
  }
  if (out.large.cells) out.large.mean = sum_large / static_cast<double>(out.large.cells);
  if (out.small.cells) out.small.mean = sum_small / static_cast<double>(out.small.cells);
  return out;
}

LevelGrid default_level_grid(double v_ref, std::size_t per_wing) {
  if (!(v_ref > 0.0)) throw DegenerateScaleError("default level grid: reference volatility must be positive");
  return LevelGrid::log_spaced(0.01 * v_ref, 10.0 * v_ref, per_wing);
}

}  // namespace fpt
