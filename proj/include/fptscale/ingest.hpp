#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fptscale/common.hpp"
#include "fptscale/path.hpp"

namespace fpt {

struct TickRecord {
  Timestamp time{};
  double price = 0.0;
  std::optional<std::int64_t> volume;

  friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

// Contiguous run of records [begin, end) that belongs to one trimmed session
// and contains no roll split. Paths are never built across segments.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::int64_t session_day = 0;  // local calendar day, days since 1970-01-01

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct TickSeries {
  std::vector<TickRecord> records;
  std::string symbol;
  std::map<std::string, std::string> source_meta;
  // Empty until clean_sessions() runs; an empty list means "one segment".
  std::vector<Segment> segments;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// ---------------------------------------------------------------------------
// Parsing

using ColumnRef = std::variant<std::string, std::size_t>;

enum class TimestampUnit { automatic, seconds, millis, micros, nanos, iso8601 };

struct FormatConfig {
  char delimiter = '\0';  // '\0' sniffs ',' or '\t' from the first line
  bool has_header = true;
  ColumnRef timestamp = std::size_t{0};
  ColumnRef price = std::size_t{1};
  std::optional<ColumnRef> volume;
  TimestampUnit unit = TimestampUnit::automatic;
  double malformed_tolerance = 0.001;
  std::string symbol;

  // Reads the cleaned-tick file produced by write_ticks().
  static FormatConfig tick_file();
};

struct ParseReport {
  std::size_t rows = 0;
  std::size_t parsed = 0;
  std::size_t malformed = 0;
  std::size_t rejected_price = 0;
  std::size_t collapsed = 0;
  std::size_t reordered = 0;
  std::vector<std::string> diagnostics;  // first few problems, line-numbered
};

struct ParseResult {
  TickSeries series;
  ParseReport report;
};

// Lines starting with '#' are ignored. Simultaneous ticks collapse onto the
// last price seen at that timestamp.
ParseResult parse_ticks(std::istream& in, const FormatConfig& format);

TimestampUnit parse_timestamp_unit(const std::string& name);

// Parses one timestamp field; nullopt when the text is not a valid timestamp.
std::optional<Timestamp> parse_timestamp(std::string_view text, TimestampUnit unit);

// Columnar cleaned-tick file: header "timestamp_ns,price,volume,segment".
void write_ticks(std::ostream& out, const TickSeries& series);

// ---------------------------------------------------------------------------
// Session cleaning

struct SessionHours {
  std::chrono::seconds open{};
  std::chrono::seconds close{};
};

struct SessionCalendar {
  // Indexed by weekday c_encoding (0 = Sunday); nullopt marks a closed day.
  std::array<std::optional<SessionHours>, 7> hours{};
  std::chrono::minutes trim{30};
  std::chrono::minutes utc_offset{0};
  std::string timezone = "UTC";

  // Monday–Friday sessions with identical hours.
  static SessionCalendar weekdays(std::chrono::seconds open, std::chrono::seconds close,
                                  std::chrono::minutes trim = std::chrono::minutes{30});
  // 09:00–17:30 UTC, Monday–Friday, 30-minute trim.
  static SessionCalendar standard();

  void validate() const;
};

struct SplitPoint {
  std::size_t index = 0;  // first record of the new segment (output indexing)
  Timestamp time{};
  double log_jump = 0.0;
  bool overnight = false;
};

struct CleanReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t trimmed = 0;        // outside [open+trim, close-trim]
  std::size_t closed_day = 0;     // on a weekday without a session
  std::size_t sessions = 0;
  std::size_t segments = 0;
  std::vector<SplitPoint> splits;
};

struct CleanResult {
  TickSeries series;
  CleanReport report;
};

inline constexpr double kDefaultRollThreshold = 0.02;

CleanResult clean_sessions(const TickSeries& series, const SessionCalendar& calendar,
                           double roll_threshold = kDefaultRollThreshold);

// ---------------------------------------------------------------------------
// Return paths

struct AnchorPolicy {
  enum class Kind { every_trade, stride, session_start };
  Kind kind = Kind::stride;
  Duration stride{std::chrono::seconds{7200}};

  static AnchorPolicy every_trade() { return {Kind::every_trade, Duration{0}}; }
  static AnchorPolicy session_start() { return {Kind::session_start, Duration{0}}; }
  static AnchorPolicy every(Duration d) { return {Kind::stride, d}; }
};

struct BuildResult {
  std::vector<ReturnPath> paths;
  std::size_t skipped = 0;  // anchors with fewer than 2 ticks remaining
};

BuildResult build_return_paths(const TickSeries& series, const AnchorPolicy& policy);

}  // namespace fpt
