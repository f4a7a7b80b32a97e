#include "fptscale/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fptscale/parallel.hpp"

namespace fpt {

namespace {

template <class T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

FptAccumulator accumulate(std::span<const ReturnPath> paths, const LevelGrid& levels, const HorizonGrid& horizons,
                          const ExperimentOptions& opt) {
  EstimateOptions eo;
  eo.threads = opt.threads;
  eo.batches = opt.batches;
  constexpr std::size_t kChunk = 512;
  const std::size_t chunks = (paths.size() + kChunk - 1) / kChunk;
  std::vector<std::optional<FptAccumulator>> parts(chunks);
  for_each_chunk(chunks, opt.threads, [&](std::size_t c) {
    FptAccumulator acc(levels, horizons, opt.batches);
    const std::size_t end = std::min(paths.size(), (c + 1) * kChunk);
    for (std::size_t k = c * kChunk; k < end; ++k) acc.add(paths[k], k);
    parts[c].emplace(std::move(acc));
  });
  FptAccumulator total(levels, horizons, opt.batches);
  for (const auto& p : parts) total.merge(*p);
  return total;
}

DecayCheck decay_check(const FptSurface& s, const std::string& label, const ExperimentOptions& opt) {
  DecayCheck d;
  d.label = label;
  try {
    const auto& hz = s.horizons.values();
    auto it = std::find(hz.begin(), hz.end(), opt.reference_horizon);
    if (it == hz.end()) throw GridError("reference horizon not on the horizon grid");
    const double v0 = s.vt[static_cast<std::size_t>(it - hz.begin())];
    if (!(v0 > 0.0)) throw DegenerateScaleError("v0 undefined");
    const auto rows = s.levels.wing(Wing::positive);
    if (rows.empty()) throw GridError("no positive levels");
    std::size_t best = rows.front();
    for (std::size_t i : rows)
      if (std::abs(std::log(s.levels[i] / (opt.decay_level * v0))) <
          std::abs(std::log(s.levels[best] / (opt.decay_level * v0))))
        best = i;
    d.level = s.levels[best];
    for (const auto& curve : scale_time(s, v0, Wing::positive, to_seconds(opt.reference_horizon))) {
      if (curve.label.key_value != d.level) continue;
      auto fit = decay_exponent(curve, opt.decay_window);
      d.slope = fit.slope;
      d.stderr = fit.stderr;
    }
  } catch (const Error& e) {
    d.error = e.what();
  }
  return d;
}

}  // namespace

SurrogateKind parse_surrogate_kind(const std::string& s) {
  if (s == "shuffle_returns" || s == "returns") return SurrogateKind::shuffle_returns;
  if (s == "shuffle_times" || s == "times") return SurrogateKind::shuffle_times;
  throw ConfigError("unknown surrogate kind '" + s + "'");
}

const char* to_string(SurrogateKind k) {
  return k == SurrogateKind::shuffle_returns ? "shuffle_returns" : "shuffle_times";
}

std::vector<ReturnPath> shuffle_returns(std::span<const ReturnPath> paths, std::uint64_t seed) {
  std::vector<ReturnPath> out(paths.begin(), paths.end());
  std::vector<double> inc;
  for (std::size_t p = 0; p < out.size(); ++p) {
    auto& path = out[p];
    if (path.size() < 3) continue;
    inc.resize(path.size() - 1);
    for (std::size_t k = 1; k < path.size(); ++k) inc[k - 1] = path.returns[k] - path.returns[k - 1];
    std::mt19937_64 rng(mix_seed(seed, p));
    fisher_yates(inc, rng);
    double x = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) {
      x += inc[k - 1];
      path.returns[k] = x;
    }
  }
  return out;
}

std::vector<ReturnPath> shuffle_times(std::span<const ReturnPath> paths, std::uint64_t seed) {
  std::vector<ReturnPath> out(paths.begin(), paths.end());
  std::vector<Duration> dur;
  for (std::size_t p = 0; p < out.size(); ++p) {
    auto& path = out[p];
    if (path.size() < 3) continue;
    dur.resize(path.size() - 1);
    for (std::size_t k = 1; k < path.size(); ++k) dur[k - 1] = path.offsets[k] - path.offsets[k - 1];
    std::mt19937_64 rng(mix_seed(seed, p));
    fisher_yates(dur, rng);
    Duration t{0};
    for (std::size_t k = 1; k < path.size(); ++k) {
      t += dur[k - 1];
      path.offsets[k] = t;
    }
  }
  return out;
}

std::vector<ReturnPath> apply_surrogate(std::span<const ReturnPath> paths, const SurrogateSpec& spec) {
  return spec.kind == SurrogateKind::shuffle_returns ? shuffle_returns(paths, spec.seed)
                                                     : shuffle_times(paths, spec.seed);
}

TailShape tail_shape(const FptSurface& s) {
  TailShape shape;
  double sum = 0.0;
  for (std::size_t j = 0; j < s.cols(); ++j) {
    const double v = s.vt[j];
    if (!(v > 0.0)) continue;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < s.rows(); ++i) {
      const double x = std::abs(s.levels[i]);
      if (x < v || s.empty_cell(i, j) || !(s.value(i, j) > 0.0)) continue;
      xs.push_back(x / v);
      ys.push_back(std::log(s.value(i, j)));
    }
    if (xs.size() < 3) continue;
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      mx += xs[k];
      my += ys[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxx += (xs[k] - mx) * (xs[k] - mx);
      syy += (ys[k] - my) * (ys[k] - my);
      sxy += (xs[k] - mx) * (ys[k] - my);
    }
    if (!(sxx > 0.0)) continue;
    sum += syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    ++shape.horizons_used;
  }
  if (shape.horizons_used) shape.mean_r2 = sum / static_cast<double>(shape.horizons_used);
  return shape;
}

double normal_upper_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal quantile: p must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

SurrogateExperiment surrogate_experiment(std::span<const ReturnPath> paths, const LevelGrid& levels,
                                         const HorizonGrid& horizons, const SurrogateSpec& spec,
                                         std::size_t replicates, const ExperimentOptions& options) {
  if (replicates < 1) throw ConfigError("surrogate experiment: need at least one replicate");
  SurrogateExperiment ex;
  ex.spec = spec;
  ex.replicate_count = replicates;
  ex.original = accumulate(paths, levels, horizons, options).finish("original");
  ex.decay.push_back(decay_check(ex.original, "original", options));

  FptAccumulator pooled(levels, horizons, options.batches);
  for (std::size_t r = 0; r < replicates; ++r) {
    SurrogateSpec rs{spec.kind, mix_seed(spec.seed, 0x50000ULL + r)};
    const auto shuffled = apply_surrogate(paths, rs);
    auto acc = accumulate(shuffled, levels, horizons, options);
    ex.replicates.push_back(acc.finish("replicate " + std::to_string(r)));
    ex.decay.push_back(decay_check(ex.replicates.back(), "replicate " + std::to_string(r), options));
    pooled.merge(acc);
  }
  ex.pooled = pooled.finish("pooled");

  const std::size_t cells = ex.original.w.size();
  ex.difference.assign(cells, std::numeric_limits<double>::quiet_NaN());
  ex.zscore.assign(cells, std::numeric_limits<double>::quiet_NaN());
  std::size_t tested = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (ex.original.n[c] == 0 || ex.pooled.n[c] == 0) continue;
    ++tested;
    const double a = ex.original.w[c], b = ex.pooled.w[c];
    ex.difference[c] = b - a;
    const double var = a * (1 - a) / static_cast<double>(ex.original.n[c]) +
                       b * (1 - b) / static_cast<double>(ex.pooled.n[c]);
    ex.zscore[c] = var > 0.0 ? (b - a) / std::sqrt(var) : 0.0;
  }
  ex.z_critical = tested ? normal_upper_quantile(0.025 / static_cast<double>(tested)) : 0.0;
  for (double z : ex.zscore)
    if (!std::isnan(z) && std::abs(z) > ex.z_critical) ex.significant_change = true;
  ex.original_tail = tail_shape(ex.original);
  ex.pooled_tail = tail_shape(ex.pooled);
  return ex;
}

}  // namespace fpt
