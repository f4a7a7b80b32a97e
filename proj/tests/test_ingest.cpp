#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fptscale/ingest.hpp"
#include "support.hpp"

using namespace fpt;
using namespace std::chrono;
using fpt::testing::at;

namespace {

ParseResult parse(const std::string& text, FormatConfig fc = {}) {
  std::istringstream in(text);
  return parse_ticks(in, fc);
}

TickSeries series_of(std::vector<std::pair<Timestamp, double>> ticks) {
  TickSeries s;
  for (auto [t, p] : ticks) s.records.push_back({t, p, std::nullopt});
  return s;
}

constexpr sys_days kTue = sys_days{2024y / January / 2};
constexpr sys_days kWed = sys_days{2024y / January / 3};

}  // namespace

TEST(ParseTicks, ThreeValidRows) {
  auto r = parse("t,price\n1700000000,100.5\n1700000001,100.25\n1700000002,101\n");
  ASSERT_EQ(r.series.size(), 3u);
  EXPECT_EQ(r.series.records[0].time, Timestamp{seconds{1700000000}});
  EXPECT_EQ(r.series.records[1].price, 100.25);
  EXPECT_EQ(r.series.records[2].price, 101.0);
  EXPECT_EQ(r.report.malformed, 0u);
}

TEST(ParseTicks, CommentLinesAreSkipped) {
  auto r = parse("# fptscale 1.0.0 config_hash=0 analysis_hash=0\nt,price\n1,100\n# note\n2,101\n");
  ASSERT_EQ(r.series.size(), 2u);
  EXPECT_EQ(r.report.rows, 2u);
  EXPECT_EQ(r.report.malformed, 0u);
}

TEST(ParseTicks, ZeroPriceRejected) {
  auto r = parse("t,price\n1,100\n2,0\n3,101\n");
  EXPECT_EQ(r.series.size(), 2u);
  EXPECT_EQ(r.report.rejected_price, 1u);
  EXPECT_FALSE(r.report.diagnostics.empty());
}

TEST(ParseTicks, NegativePriceRejected) {
  auto r = parse("t,price\n1,100\n2,-5\n");
  EXPECT_EQ(r.report.rejected_price, 1u);
  EXPECT_EQ(r.series.size(), 1u);
}

TEST(ParseTicks, SimultaneousTicksKeepLastPrice) {
  auto r = parse("t,price\n5,100\n5,102\n");
  ASSERT_EQ(r.series.size(), 1u);
  EXPECT_EQ(r.series.records[0].price, 102.0);
  EXPECT_EQ(r.report.collapsed, 1u);
}

TEST(ParseTicks, OutOfOrderRowsAreSortedAndCounted) {
  auto r = parse("t,price\n3,103\n1,101\n2,102\n");
  ASSERT_EQ(r.series.size(), 3u);
  EXPECT_EQ(r.series.records[0].price, 101.0);
  EXPECT_EQ(r.series.records[2].price, 103.0);
  EXPECT_GE(r.report.reordered, 1u);
}

TEST(ParseTicks, EmptyInputIsFormatError) { EXPECT_THROW(parse(""), FormatError); }

TEST(ParseTicks, MissingNamedColumnIsFormatError) {
  FormatConfig fc;
  fc.price = std::string("last");
  EXPECT_THROW(parse("time,price\n1,100\n", fc), FormatError);
}

TEST(ParseTicks, TooManyMalformedRows) {
  std::string text = "t,price\n";
  for (int i = 0; i < 100; ++i) text += std::to_string(i) + ",100\n";
  text += "garbage,row\n";
  EXPECT_THROW(parse(text), DataQualityError);
  FormatConfig loose;
  loose.malformed_tolerance = 0.05;
  auto r = parse(text, loose);
  EXPECT_EQ(r.report.malformed, 1u);
  EXPECT_EQ(r.series.size(), 100u);
}

TEST(ParseTicks, NamedColumnsTabsAndVolume) {
  FormatConfig fc;
  fc.timestamp = std::string("when");
  fc.price = std::string("px");
  fc.volume = std::string("qty");
  auto r = parse("qty\tpx\twhen\n7\t10.5\t1700000000\n", fc);
  ASSERT_EQ(r.series.size(), 1u);
  EXPECT_EQ(r.series.records[0].price, 10.5);
  EXPECT_EQ(r.series.records[0].volume, 7);
}

TEST(ParseTicks, TimestampUnits) {
  EXPECT_EQ(parse_timestamp("1700000000123", TimestampUnit::millis),
            Timestamp{milliseconds{1700000000123}});
  EXPECT_EQ(parse_timestamp("1700000000.5", TimestampUnit::seconds), Timestamp{milliseconds{1700000000500}});
  EXPECT_EQ(parse_timestamp("2024-01-02T09:45:00Z", TimestampUnit::iso8601), at(kTue, hours{9} + minutes{45}));
  EXPECT_EQ(parse_timestamp("2024-01-02T10:45:00+01:00", TimestampUnit::iso8601), at(kTue, hours{9} + minutes{45}));
  EXPECT_FALSE(parse_timestamp("yesterday", TimestampUnit::automatic));
  auto r = parse("timestamp_ms,price\n1700000000123,1\n");
  EXPECT_EQ(r.series.records[0].time, Timestamp{milliseconds{1700000000123}});
}

TEST(ParseTicks, RoundTripThroughTickFile) {
  auto s = series_of({{at(kTue, hours{10}), 100.125}, {at(kTue, hours{10}) + nanoseconds{7}, 99.875}});
  s.records[0].volume = 3;
  std::ostringstream out;
  write_ticks(out, s);
  std::istringstream in(out.str());
  auto back = parse_ticks(in, FormatConfig::tick_file());
  EXPECT_EQ(back.series.records, s.records);
  std::ostringstream again;
  write_ticks(again, back.series);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Calendar, RejectsTrimLongerThanSession) {
  auto cal = SessionCalendar::weekdays(hours{9}, hours{10}, minutes{30});
  EXPECT_THROW(cal.validate(), ConfigError);
  EXPECT_NO_THROW(SessionCalendar::standard().validate());
}

TEST(CleanSessions, InsideWindowIsNoOp) {
  auto s = series_of({{at(kTue, hours{10}), 100}, {at(kTue, hours{11}), 100.5}, {at(kTue, hours{12}), 100.2}});
  auto r = clean_sessions(s, SessionCalendar::standard());
  EXPECT_EQ(r.series.records, s.records);
  EXPECT_EQ(r.report.trimmed, 0u);
  EXPECT_EQ(r.report.segments, 1u);
}

TEST(CleanSessions, TrimsFirstThirtyMinutes) {
  auto s = series_of({{at(kTue, hours{9} + minutes{10}), 100}, {at(kTue, hours{10}), 100.5}});
  auto r = clean_sessions(s, SessionCalendar::standard());
  ASSERT_EQ(r.series.size(), 1u);
  EXPECT_EQ(r.series.records[0].time, at(kTue, hours{10}));
  EXPECT_EQ(r.report.trimmed, 1u);
}

TEST(CleanSessions, TrimsLastThirtyMinutesAndClosedDays) {
  const sys_days sat = sys_days{2024y / January / 6};
  auto s = series_of({{at(kTue, hours{10}), 100}, {at(kTue, hours{17} + minutes{5}), 100}, {at(sat, hours{10}), 100}});
  auto r = clean_sessions(s, SessionCalendar::standard());
  EXPECT_EQ(r.series.size(), 1u);
  EXPECT_EQ(r.report.trimmed, 1u);
  EXPECT_EQ(r.report.closed_day, 1u);
}

TEST(CleanSessions, RollJumpSplitsBetweenDays) {
  auto s = series_of({{at(kTue, hours{16}), 100}, {at(kWed, hours{10}), 120}});
  auto r = clean_sessions(s, SessionCalendar::standard(), 0.05);
  ASSERT_EQ(r.report.splits.size(), 1u);
  EXPECT_NEAR(r.report.splits[0].log_jump, std::log(1.2), 1e-15);
  EXPECT_TRUE(r.report.splits[0].overnight);
  EXPECT_EQ(r.report.splits[0].index, 1u);
  EXPECT_EQ(r.series.segments.size(), 2u);
}

TEST(CleanSessions, IntradayRollJumpSplits) {
  auto s = series_of({{at(kTue, hours{10}), 100}, {at(kTue, hours{11}), 110}, {at(kTue, hours{12}), 110.1}});
  auto r = clean_sessions(s, SessionCalendar::standard(), 0.05);
  ASSERT_EQ(r.series.segments.size(), 2u);
  EXPECT_FALSE(r.report.splits[0].overnight);
  auto paths = build_return_paths(r.series, AnchorPolicy::session_start()).paths;
  ASSERT_EQ(paths.size(), 1u);  // first segment has a single tick
  EXPECT_NEAR(paths[0].returns[1], std::log(110.1 / 110), 1e-15);
}

TEST(CleanSessions, Idempotent) {
  auto s = series_of({{at(kTue, hours{9}), 100},
                      {at(kTue, hours{10}), 101},
                      {at(kTue, hours{11}), 130},
                      {at(kWed, hours{10}), 129},
                      {at(kWed, hours{17}), 128}});
  auto once = clean_sessions(s, SessionCalendar::standard());
  auto twice = clean_sessions(once.series, SessionCalendar::standard());
  EXPECT_EQ(twice.series.records, once.series.records);
  EXPECT_EQ(twice.series.segments, once.series.segments);
}

TEST(CleanSessions, EmptyResultIsError) {
  auto s = series_of({{at(kTue, hours{8}), 100}});
  EXPECT_THROW(clean_sessions(s, SessionCalendar::standard()), EmptyDataError);
}

TEST(BuildPaths, ConstantPrice) {
  auto s = series_of({{at(kTue, hours{10}), 100}, {at(kTue, hours{10} + seconds{1}), 100}, {at(kTue, hours{10} + seconds{2}), 100}});
  auto p = build_return_paths(s, AnchorPolicy::session_start()).paths;
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].returns, (std::vector<double>{0, 0, 0}));
}

TEST(BuildPaths, LogReturn) {
  auto s = series_of({{at(kTue, hours{10}), 100}, {at(kTue, hours{10} + seconds{1}), 105}});
  auto p = build_return_paths(s, AnchorPolicy::session_start()).paths;
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].returns[0], 0.0);
  EXPECT_NEAR(p[0].returns[1], 0.04879016416943205, 1e-15);
}

TEST(BuildPaths, SessionStartGivesOnePathPerSession) {
  auto s = series_of({{at(kTue, hours{10}), 100},
                      {at(kTue, hours{11}), 100.1},
                      {at(kWed, hours{10}), 100.2},
                      {at(kWed, hours{11}), 100.3}});
  auto cleaned = clean_sessions(s, SessionCalendar::standard());
  auto r = build_return_paths(cleaned.series, AnchorPolicy::session_start());
  EXPECT_EQ(r.paths.size(), 2u);
  for (const auto& p : r.paths) {
    EXPECT_NO_THROW(p.validate());
    EXPECT_EQ(p.size(), 2u);
  }
}

TEST(BuildPaths, StrideAndSkippedAnchors) {
  auto s = series_of({{at(kTue, hours{10}), 100},
                      {at(kTue, hours{10} + minutes{30}), 101},
                      {at(kTue, hours{11}), 102},
                      {at(kTue, hours{12}), 103}});
  auto cleaned = clean_sessions(s, SessionCalendar::standard());
  auto r = build_return_paths(cleaned.series, AnchorPolicy::every(hours{1}));
  // anchors at 10:00 and 11:00 (4 and 2 ticks), then 12:00 with one tick
  EXPECT_EQ(r.paths.size(), 2u);
  EXPECT_EQ(r.skipped, 1u);
  auto every = build_return_paths(cleaned.series, AnchorPolicy::every_trade());
  EXPECT_EQ(every.paths.size(), 3u);
  EXPECT_EQ(every.skipped, 1u);
}

TEST(BuildPaths, PriceScaleInvariance) {
  std::vector<std::pair<Timestamp, double>> ticks;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  double p = 100;
  for (int k = 0; k < 200; ++k) {
    ticks.push_back({at(kTue, hours{10} + seconds{k}), p});
    p *= std::exp(1e-3 * z(rng));
  }
  auto base = build_return_paths(series_of(ticks), AnchorPolicy::every_trade()).paths;
  for (double c : {4.0, 0.125, 3.7}) {
    auto scaled_ticks = ticks;
    for (auto& t : scaled_ticks) t.second *= c;
    auto scaled = build_return_paths(series_of(scaled_ticks), AnchorPolicy::every_trade()).paths;
    ASSERT_EQ(scaled.size(), base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
      EXPECT_EQ(scaled[k].offsets, base[k].offsets);
      for (std::size_t i = 0; i < base[k].size(); ++i) {
        if (c == 4.0 || c == 0.125) EXPECT_EQ(scaled[k].returns[i], base[k].returns[i]);
        else EXPECT_NEAR(scaled[k].returns[i], base[k].returns[i], 1e-13);
      }
    }
  }
}

TEST(BuildPaths, OffsetsStayInsideTrimmedSession) {
  std::vector<std::pair<Timestamp, double>> ticks;
  for (int d = 0; d < 3; ++d)
    for (int m = 0; m < 600; m += 7) ticks.push_back({at(kTue + days{d}, hours{9} + minutes{m}), 100 + 0.001 * m});
  const auto cal = SessionCalendar::standard();
  auto cleaned = clean_sessions(series_of(ticks), cal);
  auto paths = build_return_paths(cleaned.series, AnchorPolicy::every_trade()).paths;
  ASSERT_FALSE(paths.empty());
  for (const auto& p : paths) {
    EXPECT_EQ(p.returns.front(), 0.0);
    EXPECT_EQ(p.offsets.front(), Duration{0});
    const auto end = p.anchor_time + p.offsets.back();
    EXPECT_EQ(floor<days>(p.anchor_time), floor<days>(end));
    const auto tod = end - floor<days>(end);
    EXPECT_LE(tod, hours{17});
    EXPECT_GE(p.anchor_time - floor<days>(p.anchor_time), hours{9} + minutes{30});
  }
}
