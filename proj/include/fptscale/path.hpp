#pragma once

#include <cstddef>
#include <vector>

#include "fptscale/common.hpp"

namespace fpt {

// Log-return trajectory X(t') = ln[S(t')/S_0] sampled at trade offsets from an
// anchor trade. offsets[0] == 0 and returns[0] == 0; offsets strictly increase.
struct ReturnPath {
  Timestamp anchor_time{};
  std::vector<Duration> offsets;
  std::vector<double> returns;
  std::size_t session_id = 0;

  std::size_t size() const { return returns.size(); }
  Duration span() const { return offsets.empty() ? Duration{0} : offsets.back(); }

  // Last observed return at or before `t` (piecewise-constant between trades).
  double value_at(Duration t) const;

  // Throws DataQualityError when the structural invariants do not hold.
  void validate() const;
};

bool operator==(const ReturnPath& a, const ReturnPath& b);

}  // namespace fpt
