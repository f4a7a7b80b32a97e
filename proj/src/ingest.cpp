#include "fptscale/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "fptscale/text.hpp"

namespace fpt {

namespace {

constexpr std::size_t kMaxDiagnostics = 20;

void note(ParseReport& report, std::size_t line, const std::string& msg) {
  if (report.diagnostics.size() < kMaxDiagnostics)
    report.diagnostics.push_back("line " + std::to_string(line) + ": " + msg);
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<int> digits_to_int(std::string_view s) {
  if (!all_digits(s)) return std::nullopt;
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

// Exact decimal -> integer nanoseconds; `scale_digits` is log10(ns per unit).
std::optional<Timestamp> decimal_epoch(std::string_view s, int scale_digits) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  auto dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() && frac.empty()) return std::nullopt;
  if ((!whole.empty() && !all_digits(whole)) || (!frac.empty() && !all_digits(frac))) return std::nullopt;
  if (whole.size() > 19) return std::nullopt;
  std::int64_t unit = 1;
  for (int i = 0; i < scale_digits; ++i) unit *= 10;
  std::int64_t w = 0;
  for (char c : whole) w = w * 10 + (c - '0');
  if (w > std::numeric_limits<std::int64_t>::max() / unit) return std::nullopt;
  std::int64_t ns = w * unit;
  std::int64_t place = unit / 10;
  for (char c : frac) {
    if (place == 0) break;  // sub-nanosecond digits are truncated
    ns += (c - '0') * place;
    place /= 10;
  }
  return Timestamp{Duration{negative ? -ns : ns}};
}

std::optional<Timestamp> parse_iso8601(std::string_view s) {
  // YYYY-MM-DD[T ]hh:mm:ss[.fffffffff][Z|+hh:mm|-hh:mm|+hhmm]
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':')
    return std::nullopt;
  auto y = digits_to_int(s.substr(0, 4));
  auto mo = digits_to_int(s.substr(5, 2));
  auto d = digits_to_int(s.substr(8, 2));
  auto h = digits_to_int(s.substr(11, 2));
  auto mi = digits_to_int(s.substr(14, 2));
  auto se = digits_to_int(s.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
  using namespace std::chrono;
  year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok() || *h > 23 || *mi > 59 || *se > 60) return std::nullopt;
  std::size_t pos = 19;
  std::int64_t frac_ns = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::int64_t place = 100'000'000;
    std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      frac_ns += (s[pos] - '0') * place;
      place /= 10;
      ++pos;
    }
    if (pos == start) return std::nullopt;
  }
  minutes offset{0};
  if (pos < s.size()) {
    std::string_view zone = s.substr(pos);
    if (zone == "Z") {
      // UTC
    } else if (zone.front() == '+' || zone.front() == '-') {
      int sign = zone.front() == '-' ? -1 : 1;
      zone.remove_prefix(1);
      std::optional<int> oh, om;
      if (zone.size() == 5 && zone[2] == ':') {
        oh = digits_to_int(zone.substr(0, 2));
        om = digits_to_int(zone.substr(3, 2));
      } else if (zone.size() == 4) {
        oh = digits_to_int(zone.substr(0, 2));
        om = digits_to_int(zone.substr(2, 2));
      } else if (zone.size() == 2) {
        oh = digits_to_int(zone);
        om = 0;
      }
      if (!oh || !om) return std::nullopt;
      offset = minutes{sign * (*oh * 60 + *om)};
    } else {
      return std::nullopt;
    }
  }
  sys_days day_point{ymd};
  auto t = time_point_cast<Duration>(day_point) + hours{*h} + minutes{*mi} + seconds{*se} +
           Duration{frac_ns} - offset;
  return Timestamp{t};
}

TimestampUnit unit_from_header(std::string_view name) {
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() && name.substr(name.size() - suffix.size()) == suffix;
  };
  if (ends_with("_ns")) return TimestampUnit::nanos;
  if (ends_with("_us")) return TimestampUnit::micros;
  if (ends_with("_ms")) return TimestampUnit::millis;
  if (ends_with("_s")) return TimestampUnit::seconds;
  return TimestampUnit::automatic;
}

std::size_t resolve_column(const ColumnRef& ref, const std::vector<std::string>& header,
                           const char* role) {
  if (const auto* index = std::get_if<std::size_t>(&ref)) return *index;
  const auto& name = std::get<std::string>(ref);
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw FormatError(std::string("header has no ") + role + " column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

// ---------------------------------------------------------------------------

double ReturnPath::value_at(Duration t) const {
  auto it = std::upper_bound(offsets.begin(), offsets.end(), t);
  if (it == offsets.begin()) return 0.0;
  return returns[static_cast<std::size_t>(it - offsets.begin()) - 1];
}

void ReturnPath::validate() const {
  if (offsets.size() != returns.size()) throw DataQualityError("return path: offsets/returns size mismatch");
  if (offsets.empty()) throw DataQualityError("return path: empty");
  if (offsets.front() != Duration{0} || returns.front() != 0.0)
    throw DataQualityError("return path: must start at offset 0 with X = 0");
  for (std::size_t i = 1; i < offsets.size(); ++i)
    if (offsets[i] <= offsets[i - 1]) throw DataQualityError("return path: offsets not strictly increasing");
}

bool operator==(const ReturnPath& a, const ReturnPath& b) {
  return a.anchor_time == b.anchor_time && a.session_id == b.session_id && a.offsets == b.offsets &&
         a.returns == b.returns;
}

// ---------------------------------------------------------------------------

FormatConfig FormatConfig::tick_file() {
  FormatConfig f;
  f.delimiter = ',';
  f.timestamp = std::string("timestamp_ns");
  f.price = std::string("price");
  f.volume = std::string("volume");
  f.unit = TimestampUnit::nanos;
  return f;
}

TimestampUnit parse_timestamp_unit(const std::string& name) {
  if (name == "auto") return TimestampUnit::automatic;
  if (name == "s" || name == "seconds") return TimestampUnit::seconds;
  if (name == "ms" || name == "millis") return TimestampUnit::millis;
  if (name == "us" || name == "micros") return TimestampUnit::micros;
  if (name == "ns" || name == "nanos") return TimestampUnit::nanos;
  if (name == "iso" || name == "iso8601") return TimestampUnit::iso8601;
  throw ConfigError("unknown timestamp unit '" + name + "'");
}

std::optional<Timestamp> parse_timestamp(std::string_view text, TimestampUnit unit) {
  text = text::trim(text);
  if (text.empty()) return std::nullopt;
  switch (unit) {
    case TimestampUnit::seconds: return decimal_epoch(text, 9);
    case TimestampUnit::millis: return decimal_epoch(text, 6);
    case TimestampUnit::micros: return decimal_epoch(text, 3);
    case TimestampUnit::nanos: return decimal_epoch(text, 0);
    case TimestampUnit::iso8601: return parse_iso8601(text);
    case TimestampUnit::automatic: break;
  }
  if (text.size() >= 10 && text[4] == '-') return parse_iso8601(text);
  // Magnitude heuristic on the integral part: seconds < 1e11 <= millis < 1e14 <= micros < 1e17 <= nanos.
  auto digits = text.substr(0, text.find('.'));
  if (!digits.empty() && (digits.front() == '-' || digits.front() == '+')) digits.remove_prefix(1);
  if (digits.size() <= 11) return decimal_epoch(text, 9);
  if (digits.size() <= 14) return decimal_epoch(text, 6);
  if (digits.size() <= 17) return decimal_epoch(text, 3);
  return decimal_epoch(text, 0);
}

ParseResult parse_ticks(std::istream& in, const FormatConfig& format) {
  ParseResult result;
  result.series.symbol = format.symbol;
  ParseReport& report = result.report;

  std::string line;
  std::size_t line_no = 0;
  char delim = format.delimiter;
  std::vector<std::string> header;
  std::size_t ts_col = 0, price_col = 1;
  std::optional<std::size_t> vol_col;
  TimestampUnit unit = format.unit;
  bool configured = false;

  auto configure = [&](std::string_view first) {
    if (delim == '\0') delim = first.find('\t') != std::string_view::npos ? '\t' : ',';
    if (format.has_header) {
      for (auto f : text::split(first, delim)) header.emplace_back(text::trim(f));
      if (header.size() < 2) throw FormatError("unparsable header: fewer than two columns");
    }
    ts_col = resolve_column(format.timestamp, header, "timestamp");
    price_col = resolve_column(format.price, header, "price");
    if (format.volume) vol_col = resolve_column(*format.volume, header, "volume");
    if (format.has_header) {
      std::size_t width = header.size();
      if (ts_col >= width || price_col >= width || (vol_col && *vol_col >= width))
        throw FormatError("unparsable header: column index out of range");
      if (unit == TimestampUnit::automatic) unit = unit_from_header(header[ts_col]);
    }
    configured = true;
  };

  struct Row {
    TickRecord rec;
    std::size_t order;
  };
  std::vector<Row> rows;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (!view.empty() && view.front() == '#') continue;
    if (!configured) {
      if (view.empty()) continue;
      configure(view);
      if (format.has_header) continue;
    }
    if (view.empty()) continue;
    ++report.rows;
    auto fields = text::split(view, delim);
    std::size_t needed = std::max(ts_col, price_col) + 1;
    if (vol_col) needed = std::max(needed, *vol_col + 1);
    if (fields.size() < needed) {
      ++report.malformed;
      note(report, line_no, "expected at least " + std::to_string(needed) + " fields");
      continue;
    }
    auto ts = parse_timestamp(fields[ts_col], unit);
    auto price = text::parse_double(fields[price_col]);
    if (!ts || !price || !std::isfinite(*price)) {
      ++report.malformed;
      note(report, line_no, !ts ? "bad timestamp" : "bad price");
      continue;
    }
    TickRecord rec{*ts, *price, std::nullopt};
    if (vol_col) {
      auto vtext = text::trim(fields[*vol_col]);
      if (!vtext.empty()) {
        auto v = text::parse_int(vtext);
        if (!v || *v < 0) {
          ++report.malformed;
          note(report, line_no, "bad volume");
          continue;
        }
        rec.volume = *v;
      }
    }
    if (!(rec.price > 0.0)) {
      ++report.rejected_price;
      note(report, line_no, "non-positive price rejected");
      continue;
    }
    rows.push_back({rec, rows.size()});
  }
  if (!configured) throw FormatError("unparsable header: input is empty");

  if (report.rows > 0 &&
      static_cast<double>(report.malformed) > format.malformed_tolerance * static_cast<double>(report.rows))
    throw DataQualityError(std::to_string(report.malformed) + " of " + std::to_string(report.rows) +
                           " rows malformed (tolerance " + text::format_double(format.malformed_tolerance) +
                           ")");

  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].rec.time < rows[i - 1].rec.time) ++report.reordered;
  if (report.reordered > 0)
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.rec.time < b.rec.time; });

  auto& records = result.series.records;
  records.reserve(rows.size());
  for (const auto& r : rows) {
    if (!records.empty() && records.back().time == r.rec.time) {
      records.back() = r.rec;  // last price at a timestamp wins
      ++report.collapsed;
    } else {
      records.push_back(r.rec);
    }
  }
  report.parsed = records.size();
  return result;
}

void write_ticks(std::ostream& out, const TickSeries& series) {
  out << "timestamp_ns,price,volume,segment\n";
  std::size_t seg = 0;
  for (std::size_t i = 0; i < series.records.size(); ++i) {
    while (seg + 1 < series.segments.size() && i >= series.segments[seg].end) ++seg;
    const auto& r = series.records[i];
    out << r.time.time_since_epoch().count() << ',' << text::format_double(r.price) << ',';
    if (r.volume) out << *r.volume;
    out << ',' << (series.segments.empty() ? 0 : seg) << '\n';
  }
}

// ---------------------------------------------------------------------------

SessionCalendar SessionCalendar::weekdays(std::chrono::seconds open, std::chrono::seconds close,
                                          std::chrono::minutes trim) {
  SessionCalendar cal;
  for (unsigned wd = 1; wd <= 5; ++wd) cal.hours[wd] = SessionHours{open, close};
  cal.trim = trim;
  return cal;
}

SessionCalendar SessionCalendar::standard() {
  using namespace std::chrono;
  return weekdays(std::chrono::hours{9}, std::chrono::hours{17} + minutes{30});
}

void SessionCalendar::validate() const {
  if (trim.count() < 0) throw ConfigError("session calendar: trim must be non-negative");
  bool any = false;
  for (const auto& h : hours) {
    if (!h) continue;
    any = true;
    if (h->open.count() < 0 || h->close.count() > 86400)
      throw ConfigError("session calendar: hours must lie within one day");
    if (!(h->open + 2 * trim < h->close))
      throw ConfigError("session calendar: open + 2*trim must precede close");
  }
  if (!any) throw ConfigError("session calendar: no trading days");
}

CleanResult clean_sessions(const TickSeries& series, const SessionCalendar& calendar, double roll_threshold) {
  calendar.validate();
  if (!(roll_threshold > 0.0)) throw ConfigError("roll_threshold must be positive");
  using namespace std::chrono;

  CleanResult result;
  result.series.symbol = series.symbol;
  result.series.source_meta = series.source_meta;
  CleanReport& report = result.report;
  report.input = series.size();

  auto& out = result.series.records;
  auto& segments = result.series.segments;
  std::int64_t prev_day = 0;
  for (const auto& rec : series.records) {
    auto local = rec.time + duration_cast<Duration>(calendar.utc_offset);
    auto day = floor<days>(local);
    auto tod = local - day;
    const auto& hours = calendar.hours[weekday{sys_days{day}}.c_encoding()];
    if (!hours) {
      ++report.closed_day;
      continue;
    }
    if (tod < hours->open + calendar.trim || tod > hours->close - calendar.trim) {
      ++report.trimmed;
      continue;
    }
    std::int64_t day_index = day.time_since_epoch().count();
    bool new_segment = out.empty();
    if (!out.empty()) {
      double jump = std::log(rec.price / out.back().price);
      bool overnight = day_index != prev_day;
      if (std::abs(jump) > roll_threshold) {
        report.splits.push_back({out.size(), rec.time, jump, overnight});
        new_segment = true;
      }
      if (overnight) {
        new_segment = true;
        ++report.sessions;
      }
    } else {
      report.sessions = 1;
    }
    if (new_segment) {
      if (!segments.empty()) segments.back().end = out.size();
      segments.push_back({out.size(), out.size(), day_index});
    }
    out.push_back(rec);
    prev_day = day_index;
  }
  if (out.empty()) throw EmptyDataError("no ticks left after session cleaning");
  segments.back().end = out.size();
  report.kept = out.size();
  report.segments = segments.size();
  return result;
}

// ---------------------------------------------------------------------------

BuildResult build_return_paths(const TickSeries& series, const AnchorPolicy& policy) {
  if (policy.kind == AnchorPolicy::Kind::stride && policy.stride <= Duration{0})
    throw ConfigError("stride anchor policy needs a positive stride");
  BuildResult result;
  std::vector<Segment> segments = series.segments;
  if (segments.empty() && !series.empty()) segments.push_back({0, series.size(), 0});
  const auto& recs = series.records;

  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto [begin, end, day] = segments[s];
    std::vector<std::size_t> anchors;
    switch (policy.kind) {
      case AnchorPolicy::Kind::session_start:
        if (begin < end) anchors.push_back(begin);
        break;
      case AnchorPolicy::Kind::every_trade:
        for (std::size_t a = begin; a < end; ++a) anchors.push_back(a);
        break;
      case AnchorPolicy::Kind::stride:
        for (std::size_t a = begin; a < end;) {
          anchors.push_back(a);
          auto next_time = recs[a].time + policy.stride;
          while (a < end && recs[a].time < next_time) ++a;
        }
        break;
    }
    for (std::size_t a : anchors) {
      if (end - a < 2) {
        ++result.skipped;
        continue;
      }
      ReturnPath path;
      path.anchor_time = recs[a].time;
      path.session_id = s;
      path.offsets.reserve(end - a);
      path.returns.reserve(end - a);
      const double p0 = recs[a].price;
      for (std::size_t k = a; k < end; ++k) {
        path.offsets.push_back(recs[k].time - recs[a].time);
        path.returns.push_back(k == a ? 0.0 : std::log(recs[k].price / p0));
      }
      result.paths.push_back(std::move(path));
    }
  }
  return result;
}

}  // namespace fpt
