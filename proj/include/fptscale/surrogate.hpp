#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fptscale/estimator.hpp"
#include "fptscale/scaling.hpp"

namespace fpt {

enum class SurrogateKind { shuffle_returns, shuffle_times };

SurrogateKind parse_surrogate_kind(const std::string& s);
const char* to_string(SurrogateKind k);

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::shuffle_returns;
  std::uint64_t seed = 1;
};

// Permutes the increments of every path (Fisher-Yates, one mt19937_64 stream
// per path seeded from (seed, path index)); offsets are kept as they are.
std::vector<ReturnPath> shuffle_returns(std::span<const ReturnPath> paths, std::uint64_t seed);
// Permutes inter-trade durations; the return sequence is kept as it is.
std::vector<ReturnPath> shuffle_times(std::span<const ReturnPath> paths, std::uint64_t seed);
std::vector<ReturnPath> apply_surrogate(std::span<const ReturnPath> paths, const SurrogateSpec& spec);

struct TailShape {
  double mean_r2 = std::numeric_limits<double>::quiet_NaN();  // log W vs |x| linearity, |x| >= v_t
  std::size_t horizons_used = 0;
};

TailShape tail_shape(const FptSurface& surface);

struct DecayCheck {
  std::string label;  // "original" or "replicate <k>"
  double level = 0.0;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double stderr = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // non-empty when the fit was impossible
};

struct ExperimentOptions {
  unsigned threads = 1;
  std::size_t batches = 16;
  Duration reference_horizon = std::chrono::seconds{1800};  // v0 horizon
  double decay_level = 0.5;  // in units of v0; nearest positive grid level is used
  FitWindow decay_window{};  // in units of the reference horizon
};

struct SurrogateExperiment {
  SurrogateSpec spec;
  std::size_t replicate_count = 0;
  FptSurface original;
  std::vector<FptSurface> replicates;
  FptSurface pooled;
  std::vector<double> difference;  // pooled - original per cell
  std::vector<double> zscore;
  double z_critical = 0.0;         // two-sided 5%, Bonferroni over non-empty cells
  bool significant_change = false;
  TailShape original_tail, pooled_tail;
  std::vector<DecayCheck> decay;
};

SurrogateExperiment surrogate_experiment(std::span<const ReturnPath> paths, const LevelGrid& levels,
                                         const HorizonGrid& horizons, const SurrogateSpec& spec,
                                         std::size_t replicates, const ExperimentOptions& options = {});

// Inverse of the standard normal upper tail: returns z with P(Z > z) = p.
double normal_upper_quantile(double p);

}  // namespace fpt
