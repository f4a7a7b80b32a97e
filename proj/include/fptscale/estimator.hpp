#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fptscale/common.hpp"
#include "fptscale/path.hpp"

namespace fpt {

enum class Wing { positive, negative };

inline const char* wing_name(Wing w) { return w == Wing::positive ? "+" : "-"; }

// Signed return thresholds. Within each wing the levels are listed in order of
// strictly increasing magnitude; the two wings may interleave.
class LevelGrid {
 public:
  LevelGrid() = default;
  explicit LevelGrid(std::vector<double> levels);

  // +m_1 .. +m_k followed by -m_1 .. -m_k.
  static LevelGrid symmetric(std::span<const double> magnitudes);
  // `count` log-spaced magnitudes over [lo, hi] per wing.
  static LevelGrid log_spaced(double lo, double hi, std::size_t count, bool both_wings = true);

  const std::vector<double>& values() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  double operator[](std::size_t i) const { return levels_[i]; }
  // Row indices of one wing, in increasing magnitude.
  std::vector<std::size_t> wing(Wing w) const;

 private:
  std::vector<double> levels_;
};

class HorizonGrid {
 public:
  HorizonGrid() = default;
  explicit HorizonGrid(std::vector<Duration> horizons);

  // 1, 5, 15, 30, 60, 90 and 120 minutes.
  static HorizonGrid standard();
  static HorizonGrid from_seconds(std::span<const double> seconds);

  const std::vector<Duration>& values() const { return horizons_; }
  std::size_t size() const { return horizons_.size(); }
  Duration operator[](std::size_t j) const { return horizons_[j]; }
  double seconds(std::size_t j) const { return to_seconds(horizons_[j]); }
  Duration max() const { return horizons_.back(); }

 private:
  std::vector<Duration> horizons_;
};

enum class Quantity { fpt, survival };

// Estimated W(x, t) (or S = 1 - W) on a level x horizon grid. Matrices are
// row-major with one row per level. Cells with n == 0 are empty and hold NaN.
struct FptSurface {
  std::string market;
  Quantity quantity = Quantity::fpt;
  LevelGrid levels;
  HorizonGrid horizons;
  std::vector<double> w;
  std::vector<std::uint64_t> crossed;
  std::vector<std::uint64_t> n;
  std::vector<double> vt;                  // per horizon; NaN when < 2 paths
  std::vector<std::uint64_t> vt_count;     // paths contributing to vt

  // Per-batch crossing and eligibility counts (batch-major, then cell) used
  // for resampling-based uncertainties. Path k goes to batch k % batches.
  std::size_t batches = 0;
  std::vector<std::uint64_t> batch_crossed;
  std::vector<std::uint64_t> batch_n;

  std::size_t rows() const { return levels.size(); }
  std::size_t cols() const { return horizons.size(); }
  std::size_t index(std::size_t i, std::size_t j) const { return i * cols() + j; }
  double value(std::size_t i, std::size_t j) const { return w[index(i, j)]; }
  std::uint64_t count(std::size_t i, std::size_t j) const { return n[index(i, j)]; }
  bool empty_cell(std::size_t i, std::size_t j) const { return n[index(i, j)] == 0; }
  // Binomial standard error sqrt(w (1 - w) / n); NaN for empty cells.
  double stderr_at(std::size_t i, std::size_t j) const;

  // Surface rebuilt without batch `b` (delete-one-group jackknife replicate).
  FptSurface without_batch(std::size_t b) const;

  // Throws DataQualityError when range, shape or monotonicity invariants fail.
  void validate() const;
};

// Smallest trade offset with X > level (level > 0) or X < level (level < 0).
std::optional<Duration> first_crossing(const ReturnPath& path, double level);

// Streaming counterpart of estimate_fpt(); paths may arrive in any batching as
// long as the caller supplies their global ordinal.
class FptAccumulator {
 public:
  FptAccumulator(LevelGrid levels, HorizonGrid horizons, std::size_t batches = 16);

  void add(const ReturnPath& path, std::uint64_t ordinal);
  void add(const ReturnPath& path) { add(path, added_); }
  // Appends `other`; merge order must be fixed for bit-reproducible vt.
  void merge(const FptAccumulator& other);
  std::uint64_t paths_added() const { return added_; }

  FptSurface finish(std::string market = {}) const;

 private:
  LevelGrid levels_;
  HorizonGrid horizons_;
  std::size_t batches_;
  std::uint64_t added_ = 0;
  std::vector<std::uint64_t> crossed_, n_;
  std::vector<std::uint64_t> batch_crossed_, batch_n_;
  // Welford state per horizon for X(t)
  std::vector<std::uint64_t> mcount_;
  std::vector<double> mean_, m2_;
  // scratch
  std::vector<std::size_t> pos_order_, neg_order_;
  std::vector<Duration> cross_time_;
  std::vector<double> at_horizon_;
};

struct EstimateOptions {
  unsigned threads = 1;
  std::size_t batches = 16;
  std::size_t chunk = 512;  // paths per work unit; fixed so results ignore `threads`
};

FptSurface estimate_fpt(std::span<const ReturnPath> paths, const LevelGrid& levels, const HorizonGrid& horizons,
                        const EstimateOptions& options = {}, std::string market = {});

FptSurface survival(const FptSurface& surface);

// Population standard deviation of the carried-forward X(t) over paths spanning t.
double stddev_at_horizon(std::span<const ReturnPath> paths, Duration t);

// erfc(|x| / sqrt(2 sigma^2 t)) with t in seconds and sigma per sqrt(second).
double wiener_fpt(double x, double t_seconds, double sigma);

struct GapRegion {
  std::size_t cells = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  double mean = 0.0;
};

struct GaussianGap {
  std::vector<double> gap;     // W - W_G per cell, NaN where missing
  std::vector<double> zscore;  // gap / binomial stderr of W_G at n
  GapRegion large;             // |x| >= v_t
  GapRegion small;             // |x| <= 0.1 v_t
};

// W_G uses sigma chosen per horizon so that sigma * sqrt(t) = v_t.
GaussianGap gaussian_gap(const FptSurface& surface);

// Log-spaced magnitudes over [0.01 v_ref, 10 v_ref] on both wings.
LevelGrid default_level_grid(double v_ref, std::size_t per_wing = 13);

}  // namespace fpt
