#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fptscale/common.hpp"
#include "fptscale/estimator.hpp"
#include "fptscale/ingest.hpp"
#include "fptscale/path.hpp"

namespace fpt::synth {

enum class Family { wiener, iid_walk };
enum class Increments { gaussian, laplace, student };
enum class ClockKind { uniform, exponential };

struct ProcessSpec {
  Family family = Family::wiener;
  double sigma = 1e-4;  // per sqrt(second)
  Increments increments = Increments::gaussian;
  double nu = 4.0;      // student degrees of freedom, > 2
  ClockKind clock = ClockKind::uniform;
  Duration step = std::chrono::seconds{1};  // spacing (uniform) or mean (exponential)
  Duration session_length = std::chrono::seconds{7200};
  std::size_t paths = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

Family parse_family(const std::string& s);
Increments parse_increments(const std::string& s);
ClockKind parse_clock(const std::string& s);
std::string to_string(Family f);
std::string to_string(Increments i);
std::string to_string(ClockKind c);

// Path `index` of the ensemble; depends only on (spec, index).
ReturnPath generate_path(const ProcessSpec& spec, std::size_t index);
std::vector<ReturnPath> generate(const ProcessSpec& spec, unsigned threads = 1);

// Wiener path observed on the spec clock plus `checkpoints`. Between two
// observations the running maximum and minimum of the Brownian bridge are
// drawn exactly and inserted as extra observations whenever they reach a
// level of `levels` not yet crossed, so trade-sampled first crossings follow
// continuous monitoring. Checkpoint values are untouched.
struct Monitoring {
  std::vector<double> levels;
  std::vector<Duration> checkpoints;
};

ReturnPath generate_monitored_path(const ProcessSpec& spec, std::size_t index, const Monitoring& monitoring);

// Closed-form W(x, t) of the Wiener family; other families have no oracle.
double analytic_fpt(const ProcessSpec& spec, double x, double t_seconds);

// Lays path k on the k-th weekday from 2024-01-02, anchored one minute after
// the trimmed open of SessionCalendar::standard(), with prices p0 * exp(X).
struct TickLayout {
  double initial_price = 100.0;
  std::string symbol = "SYNTH";
};

// Anchors repeat every kAnchorCycle paths so timestamps stay inside the
// nanosecond range; to_tick_series refuses larger ensembles.
inline constexpr std::size_t kAnchorCycle = 50000;
Timestamp session_anchor(std::size_t index);
TickSeries to_tick_series(std::span<const ReturnPath> paths, const TickLayout& layout = {});

}  // namespace fpt::synth
