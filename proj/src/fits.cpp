#include "fptscale/fits.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fpt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Cell {
  double x;       // |level| / x_unit
  double t;       // seconds
  double logw;
  double weight;
  double u;       // |level| / v_t, NaN when v_t is unusable
  std::size_t col;
};

struct Bounds {
  double lo, hi;
};

Bounds shape_bounds(ModelFamily f) { return f == ModelFamily::weibull ? Bounds{0.1, 10.0} : Bounds{0.5, 20.0}; }

// log W and its derivatives with respect to (shape, log rate).
double log_model(ModelFamily f, double shape, double lrate, double x, double t, double* d_shape, double* d_lrate) {
  const double z = std::log(x) - 0.5 * (lrate + std::log(t));
  if (f == ModelFamily::weibull) {
    const double g = std::exp(shape * z);
    if (d_shape) *d_shape = -g * z;
    if (d_lrate) *d_lrate = 0.5 * shape * g;
    return -g;
  }
  const double y = std::exp(z);
  const double l1 = std::log1p(y);
  if (d_shape) *d_shape = -l1;
  if (d_lrate) *d_lrate = 0.5 * shape * y / (1.0 + y);
  return -shape * l1;
}

std::vector<Cell> collect(const FptSurface& s, Wing wing, const std::vector<std::size_t>& cols, double x_unit,
                          std::size_t* excluded) {
  std::vector<Cell> cells;
  for (std::size_t i : s.levels.wing(wing)) {
    for (std::size_t j : cols) {
      if (s.empty_cell(i, j)) continue;
      double w = s.value(i, j);
      if (s.quantity == Quantity::survival) w = 1.0 - w;
      if (!(w > 0.0 && w < 1.0)) {
        if (excluded) ++*excluded;
        continue;
      }
      const double v = j < s.vt.size() ? s.vt[j] : kNaN;
      cells.push_back({std::abs(s.levels[i]) / x_unit, s.horizons.seconds(j), std::log(w),
                       static_cast<double>(s.count(i, j)), v > 0.0 ? std::abs(s.levels[i]) / v : kNaN, j});
    }
  }
  return cells;
}

std::vector<std::size_t> all_cols(const FptSurface& s) {
  std::vector<std::size_t> c(s.cols());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = j;
  return c;
}

struct Solution {
  double shape, lrate, objective;
  std::size_t iterations;
  double jtj[3];  // symmetric 2x2 at the optimum: [00, 01, 11]
};

double objective(ModelFamily f, double shape, double lrate, const std::vector<Cell>& cells) {
  double sum = 0.0;
  for (const auto& c : cells) {
    const double r = c.logw - log_model(f, shape, lrate, c.x, c.t, nullptr, nullptr);
    sum += c.weight * r * r;
  }
  return sum;
}

Solution solve(ModelFamily f, const std::vector<Cell>& cells, double shape0, double lrate0, std::size_t max_iter) {
  const Bounds b = shape_bounds(f);
  double shape = std::clamp(shape0, b.lo, b.hi), lrate = lrate0;
  double obj = objective(f, shape, lrate, cells);
  double lambda = 1e-3;
  Solution sol{};
  std::size_t it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    double a00 = 0, a01 = 0, a11 = 0, g0 = 0, g1 = 0;
    for (const auto& c : cells) {
      double ds, dl;
      const double m = log_model(f, shape, lrate, c.x, c.t, &ds, &dl);
      const double r = c.logw - m;
      a00 += c.weight * ds * ds;
      a01 += c.weight * ds * dl;
      a11 += c.weight * dl * dl;
      g0 += c.weight * ds * r;
      g1 += c.weight * dl * r;
    }
    sol.jtj[0] = a00;
    sol.jtj[1] = a01;
    sol.jtj[2] = a11;
    bool improved = false;
    while (lambda < 1e20) {
      const double m00 = a00 * (1 + lambda), m11 = a11 * (1 + lambda);
      const double det = m00 * m11 - a01 * a01;
      if (!(det > 0.0) || !std::isfinite(det)) {
        lambda *= 10;
        continue;
      }
      double d0 = (m11 * g0 - a01 * g1) / det;
      double d1 = (m00 * g1 - a01 * g0) / det;
      if ((shape >= b.hi && d0 > 0) || (shape <= b.lo && d0 < 0)) {
        d0 = 0.0;
        d1 = g1 / m11;
      }
      const double ns = std::clamp(shape + d0, b.lo, b.hi), nl = lrate + d1;
      const double nobj = objective(f, ns, nl, cells);
      if (std::isfinite(nobj) && nobj <= obj) {
        const double change = obj - nobj;
        const bool small_step = std::abs(ns - shape) <= 1e-12 * (1 + std::abs(shape)) &&
                                std::abs(nl - lrate) <= 1e-12 * (1 + std::abs(lrate));
        shape = ns;
        lrate = nl;
        obj = nobj;
        lambda = std::max(lambda / 10, 1e-12);
        improved = true;
        if (change <= 1e-15 * (obj + 1e-300) || small_step) converged = true;
        break;
      }
      lambda *= 10;
    }
    if (!improved) {
      // No descent direction remains; accept when the gradient vanishes.
      const double gnorm = std::sqrt(g0 * g0 + g1 * g1);
      const double scale = std::sqrt(a00 + a11) * std::sqrt(obj + 1e-300) + 1e-300;
      converged = gnorm <= 1e-6 * scale || obj <= 1e-28;
      break;
    }
    if (converged) break;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "fit did not converge after " << it << " iterations (family " << to_string(f) << ", shape " << shape
        << ", rate " << std::exp(lrate) << ", objective " << obj << ")";
    throw FitError(msg.str());
  }
  sol.shape = shape;
  sol.lrate = lrate;
  sol.objective = obj;
  sol.iterations = it + 1;
  return sol;
}

// Rate from the abscissa where W crosses 1/2 at the median horizon.
double initial_log_rate(ModelFamily f, double shape0, const std::vector<Cell>& cells) {
  std::vector<std::size_t> cols;
  for (const auto& c : cells) cols.push_back(c.col);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  const std::size_t mid = cols[(cols.size() - 1) / 2];
  std::vector<const Cell*> at;
  for (const auto& c : cells)
    if (c.col == mid) at.push_back(&c);
  std::sort(at.begin(), at.end(), [](const Cell* a, const Cell* b) { return a->x < b->x; });
  const double half = std::log(0.5);
  double xh = at.front()->x;
  double best = std::abs(at.front()->logw - half);
  for (const Cell* c : at)
    if (std::abs(c->logw - half) < best) {
      best = std::abs(c->logw - half);
      xh = c->x;
    }
  for (std::size_t k = 1; k < at.size(); ++k) {
    const double a = at[k - 1]->logw, b = at[k]->logw;
    if ((a - half) * (b - half) <= 0.0 && a != b) {
      const double fr = (half - a) / (b - a);
      xh = std::exp(std::log(at[k - 1]->x) + fr * (std::log(at[k]->x) - std::log(at[k - 1]->x)));
      break;
    }
  }
  const double t = at.front()->t;
  const double y = f == ModelFamily::weibull ? std::pow(std::log(2.0), 1.0 / shape0)
                                             : std::pow(2.0, 1.0 / shape0) - 1.0;
  return std::log((xh / y) * (xh / y) / t);
}

void check_not_degenerate(const std::vector<Cell>& cells) {
  for (const auto& c : cells)
    if (c.logw != cells.front().logw) return;
  throw FitError("degenerate surface: every usable cell has the same probability");
}

Solution fit_cells(ModelFamily f, const std::vector<Cell>& cells, std::size_t max_iter) {
  check_not_degenerate(cells);
  const double shape0 = f == ModelFamily::weibull ? 1.0 : 3.0;
  return solve(f, cells, shape0, initial_log_rate(f, shape0, cells), max_iter);
}

double weighted_rmse(ModelFamily f, double shape, double lrate, const std::vector<Cell>& cells,
                     double u_lo, double u_hi) {
  double sum = 0.0, wsum = 0.0;
  for (const auto& c : cells) {
    if (!(c.u >= u_lo && c.u < u_hi)) continue;
    const double r = c.logw - log_model(f, shape, lrate, c.x, c.t, nullptr, nullptr);
    sum += c.weight * r * r;
    wsum += c.weight;
  }
  return wsum > 0.0 ? std::sqrt(sum / wsum) : kNaN;
}

FitResult make_result(const FptSurface& s, ModelFamily f, Wing wing, const FitOptions& opt,
                      const std::vector<std::size_t>& cols, std::size_t min_horizons, std::size_t min_levels) {
  std::size_t excluded = 0;
  const auto cells = collect(s, wing, cols, opt.x_unit, &excluded);
  {
    std::vector<std::size_t> hz, lv;
    for (const auto& c : cells) {
      hz.push_back(c.col);
      lv.push_back(static_cast<std::size_t>(std::llround(std::log(c.x) * 1e9)));
    }
    std::sort(hz.begin(), hz.end());
    std::sort(lv.begin(), lv.end());
    const auto nh = static_cast<std::size_t>(std::unique(hz.begin(), hz.end()) - hz.begin());
    const auto nl = static_cast<std::size_t>(std::unique(lv.begin(), lv.end()) - lv.begin());
    if (nh < min_horizons || nl < min_levels || cells.size() < 3)
      throw InsufficientDataError("fit: need at least " + std::to_string(min_horizons) + " horizons and " +
                                  std::to_string(min_levels) + " levels with usable cells (have " +
                                  std::to_string(nh) + " and " + std::to_string(nl) + ")");
  }
  const Solution sol = fit_cells(f, cells, opt.max_iterations);

  FitResult r;
  r.family = f;
  r.wing = wing;
  r.shape = sol.shape;
  r.rate = std::exp(sol.lrate);
  r.shape_at_bound = sol.shape <= shape_bounds(f).lo || sol.shape >= shape_bounds(f).hi;
  r.cells_used = cells.size();
  r.cells_excluded = excluded;
  r.iterations = sol.iterations;
  r.x_unit = opt.x_unit;
  r.crossover = opt.crossover;
  r.rmse = weighted_rmse(f, sol.shape, sol.lrate, cells, -INFINITY, INFINITY);
  r.rmse_small = weighted_rmse(f, sol.shape, sol.lrate, cells, -INFINITY, opt.crossover);
  r.rmse_tail = weighted_rmse(f, sol.shape, sol.lrate, cells, opt.crossover, INFINITY);

  double ssum = 0.0, swsum = 0.0;
  for (const auto& c : cells) {
    const double m = std::exp(log_model(f, sol.shape, sol.lrate, c.x, c.t, nullptr, nullptr));
    const double w = std::exp(c.logw);
    r.max_abs_w = std::max(r.max_abs_w, std::abs(w - m));
    r.max_abs_s = std::max(r.max_abs_s, std::abs((1.0 - w) - (1.0 - m)));
    const double rs = std::log1p(-w) - std::log1p(-m);
    if (std::isfinite(rs)) {
      ssum += c.weight * rs * rs;
      swsum += c.weight;
    }
  }
  if (swsum > 0.0) r.rmse_log_s = std::sqrt(ssum / swsum);

  // Quadratic approximation of the objective at the optimum.
  {
    const double dof = static_cast<double>(cells.size()) - 2.0;
    double wsum = 0.0;
    for (const auto& c : cells) wsum += c.weight;
    const double det = sol.jtj[0] * sol.jtj[2] - sol.jtj[1] * sol.jtj[1];
    if (dof > 0.0 && det > 0.0) {
      const double s2 = sol.objective / dof;
      const double var_shape = s2 * sol.jtj[2] / det;
      const double var_lrate = s2 * sol.jtj[0] / det;
      r.shape_stderr = std::sqrt(var_shape);
      r.rate_stderr = r.rate * std::sqrt(var_lrate);
      r.stderr_method = "quadratic";
    }
  }

  if (opt.jackknife && s.batches >= 2) {
    std::vector<double> shapes, rates;
    for (std::size_t b = 0; b < s.batches; ++b) {
      const FptSurface sub = s.without_batch(b);
      const auto sc = collect(sub, wing, cols, opt.x_unit, nullptr);
      if (sc.size() < 3) continue;
      try {
        check_not_degenerate(sc);
        const Solution js = solve(f, sc, sol.shape, sol.lrate, opt.max_iterations);
        shapes.push_back(js.shape);
        rates.push_back(std::exp(js.lrate));
      } catch (const FitError&) {
      }
    }
    if (shapes.size() >= 2) {
      auto jk = [](const std::vector<double>& v) {
        const double g = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= g;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::sqrt((g - 1.0) / g * ss);
      };
      r.shape_stderr = jk(shapes);
      r.rate_stderr = jk(rates);
      r.stderr_method = "jackknife";
    }
  }
  return r;
}

struct Regional {
  double rmse = kNaN;
  double sse = 0.0, wsum = 0.0;
};

Regional regional_fit(ModelFamily f, const std::vector<Cell>& cells, double shape0, double lrate0,
                      std::size_t max_iter) {
  Regional out;
  try {
    check_not_degenerate(cells);
    const Solution s = solve(f, cells, shape0, lrate0, max_iter);
    for (const auto& c : cells) out.wsum += c.weight;
    out.sse = s.objective;
    out.rmse = std::sqrt(s.objective / out.wsum);
  } catch (const FitError&) {
  }
  return out;
}

}  // namespace

ModelFamily parse_model_family(const std::string& s) {
  if (s == "weibull") return ModelFamily::weibull;
  if (s == "student") return ModelFamily::student;
  throw ConfigError("unknown model family '" + s + "' (expected weibull or student)");
}

const char* to_string(ModelFamily f) { return f == ModelFamily::weibull ? "weibull" : "student"; }

double eval_model(ModelFamily family, double shape, double rate, double x, double t_seconds) {
  const double y = std::abs(x) / std::sqrt(rate * t_seconds);
  if (family == ModelFamily::weibull) return std::exp(-std::pow(y, shape));
  return std::pow(1.0 + y, -shape);
}

FitResult fit_model(const FptSurface& surface, ModelFamily family, Wing wing, const FitOptions& options) {
  if (!(options.x_unit > 0.0)) throw ConfigError("fit: x_unit must be positive");
  return make_result(surface, family, wing, options, all_cols(surface), 2, 5);
}

std::vector<FitResult> fit_per_horizon(const FptSurface& surface, ModelFamily family, Wing wing,
                                       const FitOptions& options) {
  if (!(options.x_unit > 0.0)) throw ConfigError("fit: x_unit must be positive");
  std::vector<FitResult> out;
  for (std::size_t j = 0; j < surface.cols(); ++j) {
    try {
      auto r = make_result(surface, family, wing, options, {j}, 1, 3);
      r.horizon = surface.horizons.seconds(j);
      out.push_back(r);
    } catch (const InsufficientDataError&) {
    }
  }
  return out;
}

CrossoverReport crossover_report(const FptSurface& surface, const FitResult& weibull, const FitResult& student,
                                 const CrossoverOptions& options) {
  if (weibull.family != ModelFamily::weibull || student.family != ModelFamily::student)
    throw ConfigError("crossover: expected one Weibull and one Student fit");
  if (weibull.wing != student.wing) throw ConfigError("crossover: fits belong to different wings");
  if (!(options.step > 0.0) || !(options.hi >= options.lo)) throw ConfigError("crossover: invalid sweep");
  CrossoverReport rep;
  rep.wing = weibull.wing;
  const auto cells = collect(surface, rep.wing, all_cols(surface), weibull.x_unit, nullptr);
  const double lw = std::log(weibull.rate), ls = std::log(student.rate);
  const auto wei_x = weibull.x_unit, stu_x = student.x_unit;
  if (wei_x != stu_x) throw ConfigError("crossover: fits use different x units");

  double best = INFINITY;
  const auto steps = static_cast<std::size_t>(std::floor((options.hi - options.lo) / options.step + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    CrossoverRow row;
    row.c = options.lo + static_cast<double>(k) * options.step;
    std::vector<Cell> small, tail;
    for (const auto& c : cells) {
      if (std::isnan(c.u)) continue;
      (c.u < row.c ? small : tail).push_back(c);
    }
    row.small_cells = small.size();
    row.tail_cells = tail.size();
    row.small_skipped = small.size() < options.min_cells;
    row.tail_skipped = tail.size() < options.min_cells;
    Regional ws, wt, ss, st;
    if (!row.small_skipped) {
      ws = regional_fit(ModelFamily::weibull, small, weibull.shape, lw, 500);
      ss = regional_fit(ModelFamily::student, small, student.shape, ls, 500);
    }
    if (!row.tail_skipped) {
      wt = regional_fit(ModelFamily::weibull, tail, weibull.shape, lw, 500);
      st = regional_fit(ModelFamily::student, tail, student.shape, ls, 500);
    }
    row.weibull_small = ws.rmse;
    row.student_small = ss.rmse;
    row.weibull_tail = wt.rmse;
    row.student_tail = st.rmse;
    if (!std::isnan(ws.rmse) && !std::isnan(st.rmse)) {
      row.mixed = std::sqrt((ws.sse + st.sse) / (ws.wsum + st.wsum));
      if (row.mixed < best) {
        best = row.mixed;
        rep.crossover = row.c;
        rep.small_winner = !(ss.rmse < ws.rmse) ? ModelFamily::weibull : ModelFamily::student;
        rep.tail_winner = !(wt.rmse < st.rmse) ? ModelFamily::student : ModelFamily::weibull;
      }
    }
    rep.sweep.push_back(row);
  }
  if (std::isnan(rep.crossover)) throw FitError("crossover: no sweep value left both regions fittable");
  rep.weibull_small = weighted_rmse(ModelFamily::weibull, weibull.shape, lw, cells, -INFINITY, rep.crossover);
  rep.weibull_tail = weighted_rmse(ModelFamily::weibull, weibull.shape, lw, cells, rep.crossover, INFINITY);
  rep.student_small = weighted_rmse(ModelFamily::student, student.shape, ls, cells, -INFINITY, rep.crossover);
  rep.student_tail = weighted_rmse(ModelFamily::student, student.shape, ls, cells, rep.crossover, INFINITY);
  return rep;
}

}  // namespace fpt
