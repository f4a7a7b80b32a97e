#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fptscale/estimator.hpp"

namespace fpt {

enum class ModelFamily { weibull, student };

ModelFamily parse_model_family(const std::string& s);
const char* to_string(ModelFamily f);

// exp(-(x / sqrt(rate t))^shape) or (1 + x / sqrt(rate t))^-shape, using |x|.
double eval_model(ModelFamily family, double shape, double rate, double x, double t_seconds);

struct FitOptions {
  double x_unit = 1.0;          // levels are divided by this before evaluation
  double crossover = 5.0;       // rmse_small / rmse_tail split, in units of v_t
  std::size_t max_iterations = 500;
  bool jackknife = true;        // delete-one-batch stderr when batch counts exist
};

struct FitResult {
  ModelFamily family = ModelFamily::weibull;
  Wing wing = Wing::positive;
  double shape = 0.0;
  double rate = 0.0;  // per second
  bool shape_at_bound = false;  // stderr is then conditional on the bound
  double shape_stderr = std::numeric_limits<double>::quiet_NaN();
  double rate_stderr = std::numeric_limits<double>::quiet_NaN();
  std::string stderr_method;  // "jackknife" or "quadratic"
  double rmse = 0.0;          // count-weighted, log W
  double rmse_small = std::numeric_limits<double>::quiet_NaN();
  double rmse_tail = std::numeric_limits<double>::quiet_NaN();
  double rmse_log_s = std::numeric_limits<double>::quiet_NaN();  // same parameters against log S
  double max_abs_w = 0.0;     // largest |W - model| over used cells
  double max_abs_s = 0.0;     // largest |S - (1 - model)|, identical by construction
  std::size_t cells_used = 0;
  std::size_t cells_excluded = 0;  // w == 0 or w == 1
  std::size_t iterations = 0;
  double x_unit = 1.0;
  double crossover = 5.0;
  double horizon = std::numeric_limits<double>::quiet_NaN();  // seconds, per-horizon mode only
};

// Joint weighted least squares in log W across every horizon of one wing.
FitResult fit_model(const FptSurface& surface, ModelFamily family, Wing wing, const FitOptions& options = {});

// One fit per horizon that has at least three usable cells.
std::vector<FitResult> fit_per_horizon(const FptSurface& surface, ModelFamily family, Wing wing,
                                       const FitOptions& options = {});

struct CrossoverOptions {
  double lo = 1.0;
  double hi = 10.0;
  double step = 0.25;
  std::size_t min_cells = 3;
};

struct CrossoverRow {
  double c = 0.0;
  std::size_t small_cells = 0, tail_cells = 0;
  bool small_skipped = false, tail_skipped = false;
  // count-weighted log-W RMSE of each family refitted on each region
  double weibull_small = std::numeric_limits<double>::quiet_NaN();
  double weibull_tail = std::numeric_limits<double>::quiet_NaN();
  double student_small = std::numeric_limits<double>::quiet_NaN();
  double student_tail = std::numeric_limits<double>::quiet_NaN();
  double mixed = std::numeric_limits<double>::quiet_NaN();  // Weibull below c, Student above
};

struct CrossoverReport {
  Wing wing = Wing::positive;
  std::vector<CrossoverRow> sweep;
  double crossover = std::numeric_limits<double>::quiet_NaN();  // in units of v_t
  ModelFamily small_winner = ModelFamily::weibull;
  ModelFamily tail_winner = ModelFamily::student;
  // RMSE of the supplied joint fits on each side of the chosen crossover
  double weibull_small = std::numeric_limits<double>::quiet_NaN();
  double weibull_tail = std::numeric_limits<double>::quiet_NaN();
  double student_small = std::numeric_limits<double>::quiet_NaN();
  double student_tail = std::numeric_limits<double>::quiet_NaN();
};

// For each c in the sweep both families are refitted on |x| < c v_t and on
// |x| >= c v_t, starting from the supplied fits; the chosen c minimises the
// mixed RMSE.
CrossoverReport crossover_report(const FptSurface& surface, const FitResult& weibull, const FitResult& student,
                                 const CrossoverOptions& options = {});

}  // namespace fpt
