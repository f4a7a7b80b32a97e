#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fpt {

using Duration = std::chrono::nanoseconds;
using Timestamp = std::chrono::sys_time<Duration>;

inline double to_seconds(Duration d) { return std::chrono::duration<double>(d).count(); }

inline Duration from_seconds(double s) {
  return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s));
}

// Failure classes map one-to-one onto CLI exit codes (2, 3, 4).
enum class ErrorKind { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct DataQualityError : Error {
  explicit DataQualityError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct EmptyDataError : Error {
  explicit EmptyDataError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct InsufficientDataError : Error {
  explicit InsufficientDataError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct GridError : Error {
  explicit GridError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct DegenerateScaleError : Error {
  explicit DegenerateScaleError(const std::string& w) : Error(ErrorKind::numerical, w) {}
};
struct FitError : Error {
  explicit FitError(const std::string& w) : Error(ErrorKind::numerical, w) {}
};
struct UnsupportedOracleError : Error {
  explicit UnsupportedOracleError(const std::string& w) : Error(ErrorKind::config, w) {}
};

// SplitMix64 finalizer; used to derive independent per-path / per-replicate
// seeds from a user seed so results do not depend on scheduling.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Name recorded in output metadata for every seeded computation.
inline constexpr const char* kRngName = "mt19937_64/splitmix64-derived-streams";

}  // namespace fpt
