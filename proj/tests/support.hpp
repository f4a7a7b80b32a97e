#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fptscale/estimator.hpp"
#include "fptscale/path.hpp"

namespace fpt::testing {

inline ReturnPath make_path(std::vector<double> offsets_s, std::vector<double> returns, std::uint64_t session = 0) {
  ReturnPath p;
  for (double s : offsets_s) p.offsets.push_back(std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s)));
  p.returns = std::move(returns);
  p.session_id = session;
  return p;
}

inline Timestamp at(std::chrono::sys_days day, std::chrono::seconds tod) { return Timestamp{day} + tod; }

// Paths X(t') = Y sqrt(rate t') observed at the horizons, so that
// W(x, t) = P(Y > x / sqrt(rate t)). Weibull: P(Y > y) = exp(-y^shape);
// Student: P(Y > y) = (1 + y)^-shape.
enum class RayLaw { weibull, student };

inline std::vector<ReturnPath> ray_paths(RayLaw law, double shape, double rate, const HorizonGrid& horizons,
                                         std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<ReturnPath> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    const double y = law == RayLaw::weibull ? std::pow(-std::log(u), 1.0 / shape) : std::pow(u, -1.0 / shape) - 1.0;
    ReturnPath p;
    p.offsets.push_back(Duration{0});
    p.returns.push_back(0.0);
    for (auto h : horizons.values()) {
      p.offsets.push_back(h);
      p.returns.push_back(y * std::sqrt(rate * to_seconds(h)));
    }
    p.session_id = k;
    out.push_back(std::move(p));
  }
  return out;
}

// Noise-free surface with w = law(level, t), n = count, vt supplied.
template <class Law>
FptSurface closed_form_surface(const LevelGrid& levels, const HorizonGrid& horizons, Law law,
                               std::vector<double> vt, std::uint64_t count = 1000) {
  FptSurface s;
  s.levels = levels;
  s.horizons = horizons;
  s.vt = std::move(vt);
  s.vt_count.assign(horizons.size(), count);
  for (std::size_t i = 0; i < levels.size(); ++i)
    for (std::size_t j = 0; j < horizons.size(); ++j) {
      const double w = law(std::abs(levels[i]), horizons.seconds(j));
      s.w.push_back(w);
      s.n.push_back(count);
      s.crossed.push_back(static_cast<std::uint64_t>(std::llround(w * static_cast<double>(count))));
    }
  return s;
}

// Independent erfc-based oracle for driftless Brownian motion.
inline double brownian_fpt(double x, double t, double sigma) { return std::erfc(std::abs(x) / (sigma * std::sqrt(2.0 * t))); }

// Sign-persistent walk: mostly iid signs, with rare blocks in which each step
// repeats the previous sign with probability `persist`. Exponential clock.
struct MomentumSpec {
  double sigma = 1e-4;
  double mean_step = 2.0;
  double session = 7200.0;
  double burst_rate = 5e-5;  // per step, chance that a persistent block starts
  double burst_mean_steps = 200;
  double persist = 0.999;
};

inline std::vector<ReturnPath> momentum_paths(const MomentumSpec& spec, std::size_t count, std::uint64_t seed) {
  std::vector<ReturnPath> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::mt19937_64 rng(mix_seed(seed, k));
    std::exponential_distribution<double> clock(1.0 / spec.mean_step);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ReturnPath p;
    p.session_id = k;
    p.offsets.push_back(Duration{0});
    p.returns.push_back(0.0);
    double t = 0.0, x = 0.0;
    int sign = 1;
    double burst_left = 0.0;
    std::int64_t last_ns = 0;
    while (true) {
      const double dt = clock(rng);
      if (t + dt > spec.session) break;
      t += dt;
      if (burst_left <= 0.0 && unif(rng) < spec.burst_rate)
        burst_left = std::exponential_distribution<double>(1.0 / spec.burst_mean_steps)(rng);
      if (burst_left > 0.0) {
        if (unif(rng) > spec.persist) sign = -sign;
        burst_left -= 1.0;
      } else {
        sign = unif(rng) < 0.5 ? 1 : -1;
      }
      x += sign * spec.sigma * std::sqrt(spec.mean_step);
      const auto ns = static_cast<std::int64_t>(std::llround(t * 1e9));
      if (ns <= last_ns) continue;
      last_ns = ns;
      p.offsets.push_back(Duration{ns});
      p.returns.push_back(x);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace fpt::testing
