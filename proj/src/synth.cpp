#include "fptscale/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fptscale/parallel.hpp"

namespace fpt::synth {

namespace {

using Rng = std::mt19937_64;

class IncrementDraw {
 public:
  explicit IncrementDraw(const ProcessSpec& spec)
      : kind_(spec.family == Family::wiener ? Increments::gaussian : spec.increments),
        student_(spec.nu),
        student_scale_(std::sqrt((spec.nu - 2.0) / spec.nu)) {}

  // Unit-variance draw.
  double operator()(Rng& rng) {
    switch (kind_) {
      case Increments::gaussian: return normal_(rng);
      case Increments::laplace: {
        const double e = exponential_(rng) * std::sqrt(0.5);
        return (rng() & 1u) ? e : -e;
      }
      case Increments::student: return student_(rng) * student_scale_;
    }
    return 0.0;
  }

 private:
  Increments kind_;
  std::normal_distribution<double> normal_;
  std::exponential_distribution<double> exponential_;
  std::student_t_distribution<double> student_;
  double student_scale_;
};

class Clock {
 public:
  explicit Clock(const ProcessSpec& spec) : spec_(spec), exp_(1.0) {}

  Duration next(Rng& rng) {
    if (spec_.clock == ClockKind::uniform) return spec_.step;
    const double ns = exp_(rng) * static_cast<double>(spec_.step.count());
    return Duration{std::max<Duration::rep>(1, std::llround(ns))};
  }

 private:
  const ProcessSpec& spec_;
  std::exponential_distribution<double> exp_;
};

}  // namespace

void ProcessSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("process spec: sigma must be positive");
  if (family == Family::iid_walk && increments == Increments::student && !(nu > 2.0))
    throw ConfigError("process spec: student increments need nu > 2");
  if (step <= Duration{0}) throw ConfigError("process spec: clock step must be positive");
  if (session_length < step) throw ConfigError("process spec: session shorter than one clock step");
  if (paths < 1) throw ConfigError("process spec: need at least one path");
}

Family parse_family(const std::string& s) {
  if (s == "wiener") return Family::wiener;
  if (s == "iid_walk") return Family::iid_walk;
  throw ConfigError("unknown process family '" + s + "'");
}

Increments parse_increments(const std::string& s) {
  if (s == "gaussian") return Increments::gaussian;
  if (s == "laplace") return Increments::laplace;
  if (s == "student") return Increments::student;
  throw ConfigError("unknown increment distribution '" + s + "'");
}

ClockKind parse_clock(const std::string& s) {
  if (s == "uniform") return ClockKind::uniform;
  if (s == "exponential") return ClockKind::exponential;
  throw ConfigError("unknown clock '" + s + "'");
}

std::string to_string(Family f) { return f == Family::wiener ? "wiener" : "iid_walk"; }

std::string to_string(Increments i) {
  switch (i) {
    case Increments::gaussian: return "gaussian";
    case Increments::laplace: return "laplace";
    case Increments::student: return "student";
  }
  return "?";
}

std::string to_string(ClockKind c) { return c == ClockKind::uniform ? "uniform" : "exponential"; }

Timestamp session_anchor(std::size_t index) {
  using namespace std::chrono;
  // Weekday number `index` counted from Tuesday 2024-01-02; week 0 starts Monday 2024-01-01.
  const std::size_t pos = index % kAnchorCycle + 1;
  const sys_days monday = sys_days{year{2024} / January / 1};
  const sys_days day = monday + days{static_cast<int>(7 * (pos / 5) + pos % 5)};
  return time_point_cast<Duration>(day) + hours{9} + minutes{31};
}

ReturnPath generate_path(const ProcessSpec& spec, std::size_t index) {
  Rng rng(mix_seed(spec.seed, index));
  IncrementDraw draw(spec);
  Clock clock(spec);
  ReturnPath path;
  path.anchor_time = session_anchor(index);
  path.session_id = index;
  const auto expected = static_cast<std::size_t>(spec.session_length / spec.step) + 2;
  path.offsets.reserve(expected);
  path.returns.reserve(expected);
  path.offsets.push_back(Duration{0});
  path.returns.push_back(0.0);
  Duration t{0};
  double x = 0.0;
  while (true) {
    const Duration dt = clock.next(rng);
    if (t + dt > spec.session_length) break;
    t += dt;
    x += spec.sigma * std::sqrt(to_seconds(dt)) * draw(rng);
    path.offsets.push_back(t);
    path.returns.push_back(x);
  }
  return path;
}

std::vector<ReturnPath> generate(const ProcessSpec& spec, unsigned threads) {
  spec.validate();
  std::vector<ReturnPath> paths(spec.paths);
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (spec.paths + kChunk - 1) / kChunk;
  for_each_chunk(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(spec.paths, (c + 1) * kChunk);
    for (std::size_t k = c * kChunk; k < end; ++k) paths[k] = generate_path(spec, k);
  });
  return paths;
}

namespace {

class BridgeMonitor {
 public:
  BridgeMonitor(const ProcessSpec& spec, const Monitoring& mon, ReturnPath& out)
      : sigma2_(spec.sigma * spec.sigma), out_(out) {
    for (double x : mon.levels) (x > 0 ? up_ : down_).push_back(std::abs(x));
    std::sort(up_.begin(), up_.end());
    std::sort(down_.begin(), down_.end());
  }

  void emit(Duration t, double x) {
    out_.offsets.push_back(t);
    out_.returns.push_back(x);
    max_ = std::max(max_, x);
    min_ = std::min(min_, x);
    while (next_up_ < up_.size() && up_[next_up_] < max_) ++next_up_;
    while (next_down_ < down_.size() && down_[next_down_] < -min_) ++next_down_;
  }

  // Bridge extremes on (ta, tb) from P(max > m) = exp(-2 (m - a)(m - b) / (sigma^2 dt)).
  void bridge(Duration ta, double xa, Duration tb, double xb, Rng& rng) {
    const double dt = to_seconds(tb - ta);
    const double u_hi = 1.0 - uniform_(rng);
    const double u_lo = 1.0 - uniform_(rng);
    if (tb - ta < Duration{3}) return;
    const double spread = (xa - xb) * (xa - xb);
    const double hi = 0.5 * (xa + xb + std::sqrt(spread - 2.0 * sigma2_ * dt * std::log(u_hi)));
    const double lo = 0.5 * (xa + xb - std::sqrt(spread - 2.0 * sigma2_ * dt * std::log(u_lo)));
    const Duration third = (tb - ta) / 3;
    if (next_up_ < up_.size() && hi > up_[next_up_]) emit(ta + third, hi);
    if (next_down_ < down_.size() && -lo > down_[next_down_]) emit(ta + 2 * third, lo);
  }

 private:
  double sigma2_;
  ReturnPath& out_;
  std::uniform_real_distribution<double> uniform_;
  std::vector<double> up_, down_;
  std::size_t next_up_ = 0, next_down_ = 0;
  double max_ = 0.0, min_ = 0.0;
};

}  // namespace

ReturnPath generate_monitored_path(const ProcessSpec& spec, std::size_t index, const Monitoring& monitoring) {
  if (spec.family != Family::wiener) throw UnsupportedOracleError("bridge monitoring needs the wiener family");
  Rng rng(mix_seed(spec.seed, index));
  Rng bridge_rng(mix_seed(~spec.seed, index));
  Clock clock(spec);
  std::normal_distribution<double> normal;

  std::vector<Duration> checkpoints;
  for (Duration c : monitoring.checkpoints)
    if (c > Duration{0} && c <= spec.session_length) checkpoints.push_back(c);
  std::sort(checkpoints.begin(), checkpoints.end());
  std::size_t next_cp = 0;

  ReturnPath path;
  path.anchor_time = session_anchor(index);
  path.session_id = index;
  BridgeMonitor monitor(spec, monitoring, path);
  monitor.emit(Duration{0}, 0.0);

  Duration t{0};
  double x = 0.0;
  Duration next_tick = clock.next(rng);
  while (true) {
    while (next_cp < checkpoints.size() && checkpoints[next_cp] <= t) ++next_cp;
    Duration target = next_tick;
    if (next_cp < checkpoints.size() && checkpoints[next_cp] < target) target = checkpoints[next_cp];
    if (target > spec.session_length) break;
    const double xn = x + spec.sigma * std::sqrt(to_seconds(target - t)) * normal(rng);
    monitor.bridge(t, x, target, xn, bridge_rng);
    monitor.emit(target, xn);
    if (target == next_tick) next_tick = target + clock.next(rng);
    t = target;
    x = xn;
  }
  return path;
}

double analytic_fpt(const ProcessSpec& spec, double x, double t_seconds) {
  if (spec.family != Family::wiener) throw UnsupportedOracleError("analytic FPT exists only for the wiener family");
  return wiener_fpt(x, t_seconds, spec.sigma);
}

TickSeries to_tick_series(std::span<const ReturnPath> paths, const TickLayout& layout) {
  if (paths.size() > kAnchorCycle) throw ConfigError("too many synthetic sessions for one tick file");
  TickSeries series;
  series.symbol = layout.symbol;
  series.source_meta["source"] = "synthetic";
  std::size_t total = 0;
  for (const auto& p : paths) total += p.size();
  series.records.reserve(total);
  for (const auto& p : paths) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double price = layout.initial_price * std::exp(p.returns[k]);
      series.records.push_back({p.anchor_time + p.offsets[k], price, std::nullopt});
    }
  }
  std::stable_sort(series.records.begin(), series.records.end(),
                   [](const TickRecord& a, const TickRecord& b) { return a.time < b.time; });
  return series;
}

}  // namespace fpt::synth
