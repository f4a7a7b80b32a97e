#include "fptscale/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fptscale/estimator.hpp"
#include "fptscale/fits.hpp"
#include "fptscale/ingest.hpp"
#include "fptscale/scaling.hpp"
#include "fptscale/serialize.hpp"
#include "fptscale/surrogate.hpp"
#include "fptscale/synth.hpp"
#include "fptscale/text.hpp"

namespace fpt::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return kExitConfig;
    case ErrorKind::data: return kExitData;
    case ErrorKind::numerical: return kExitNumerical;
  }
  return kExitConfig;
}

// Every option is registered twice: with CLI11 for the command line and in a
// setter/getter table so the --config file can override it and the effective
// values can be hashed.
class Registry {
 public:
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& scope, const std::string& name, T& ref,
                      const std::string& help) {
    auto* o = app->add_option("--" + name, ref, help)->capture_default_str();
    bind(scope, name, ref);
    return o;
  }
  CLI::Option* flag(CLI::App* app, const std::string& scope, const std::string& name, bool& ref,
                    const std::string& help) {
    auto* o = app->add_flag("--" + name, ref, help);
    bind(scope, name, ref);
    return o;
  }

  void apply(const Json& config, const std::string& command) {
    if (!config.is_object()) throw ConfigError("config file: top level must be an object");
    for (const auto& [key, value] : config.items()) {
      if (value.is_object() && scopes_.count(key)) {
        if (key != command) continue;
        for (const auto& [k, v] : value.items()) set(key, k, v);
      } else {
        set("", key, value);
      }
    }
  }

  Json effective(const std::string& scope, const std::set<std::string>& skip = {}) const {
    Json j = Json::object();
    auto it = getters_.find(scope);
    if (it == getters_.end()) return j;
    for (const auto& [name, get] : it->second)
      if (!skip.count(name)) j[name] = get();
    return j;
  }

  void declare_scope(const std::string& scope) { scopes_.insert(scope); }

 private:
  template <class T>
  void bind(const std::string& scope, const std::string& name, T& ref) {
    setters_[scope][name] = [&ref, name](const Json& j) {
      try {
        ref = j.get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("config file: wrong type for '" + name + "'");
      }
    };
    getters_[scope][name] = [&ref] { return Json(ref); };
  }

  void set(const std::string& scope, const std::string& key, const Json& v) {
    auto s = setters_.find(scope);
    if (s == setters_.end() || !s->second.count(key))
      throw ConfigError("config file: unknown key '" + (scope.empty() ? key : scope + "." + key) + "'");
    s->second.at(key)(v);
  }

  std::map<std::string, std::map<std::string, std::function<void(const Json&)>>> setters_;
  std::map<std::string, std::map<std::string, std::function<Json()>>> getters_;
  std::set<std::string> scopes_;
};

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = "out";
  std::string config;
};

struct Source {
  std::vector<std::string> input;
  std::string symbol;
  std::string delimiter = "auto";
  bool no_header = false;
  std::string timestamp_col = "0";
  std::string price_col = "1";
  std::string volume_col;
  std::string unit = "auto";
  double tolerance = 0.001;
  std::string open = "09:00";
  std::string close = "17:30";
  int trim = 30;
  int utc_offset = 0;
  double roll_threshold = kDefaultRollThreshold;
  std::string process;
  double sigma = 1e-4;
  std::string increments = "gaussian";
  double nu = 4.0;
  std::string clock = "uniform";
  double step = 1.0;
  double session = 7200.0;
  std::size_t paths = 1000;
  std::string anchor = "stride:7200";
  std::string market;
};

struct Grid {
  std::string levels = "auto";
  std::size_t per_wing = 13;
  std::vector<double> level_range{0.01, 10.0};
  std::vector<double> horizons{60, 300, 900, 1800, 3600, 5400, 7200};
  double reference = 0.0;  // 0 means recorded in the --surface inputs, else kDefaultReference
  std::size_t batches = 16;
};

constexpr double kDefaultReference = 1800.0;

double recorded_reference(const std::vector<std::string>& surfaces) {
  if (surfaces.empty()) return kDefaultReference;
  std::ifstream f(surfaces.front(), std::ios::binary);
  const Json j = Json::parse(f, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return kDefaultReference;
  const Json::json_pointer ptr("/meta/config/options/reference-horizon");
  if (!j.contains(ptr) || !j.at(ptr).is_number()) return kDefaultReference;
  return j.at(ptr).get<double>();
}

struct Options {
  Globals g;
  Source src;
  Grid grid;
  std::vector<std::string> surfaces;
  std::size_t bins = kDefaultBins;
  double time_unit = 0.0;  // 0 means the reference horizon
  std::string wing = "both";
  double market_horizon = 0.0;  // 0 means the reference horizon
  std::string kind = "both";
  std::size_t replicates = 1;
  double decay_level = 0.5;
  std::vector<double> decay_window{1e2, 1e4};
  std::vector<std::string> families{"weibull", "student"};
  std::string x_unit = "v0";
  double crossover = 5.0;
  std::vector<double> sweep{1.0, 10.0, 0.25};
  bool per_horizon = false;
};

// Files are produced in memory and written only once the command succeeded.
class Outputs {
 public:
  Outputs(std::string config_hash, std::string analysis_hash)
      : config_hash_(std::move(config_hash)), analysis_hash_(std::move(analysis_hash)) {}

  void json(const std::string& name, const Json& j) { files_.emplace_back(name, j.dump(2) + "\n"); }
  void csv(const std::string& name, const std::string& body) {
    files_.emplace_back(name, std::string("# ") + kToolVersion + " config_hash=" + config_hash_ +
                                  " analysis_hash=" + analysis_hash_ + "\n" + body);
  }

  void commit(const fs::path& dir, std::ostream& log) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::vector<fs::path> written;
    for (const auto& [name, body] : files_) {
      const fs::path p = dir / name;
      std::ofstream f(p, std::ios::binary | std::ios::trunc);
      f << body;
      f.close();
      if (!f) {
        for (const auto& w : written) fs::remove(w, ec);
        fs::remove(p, ec);
        throw ConfigError("cannot write '" + p.string() + "'");
      }
      written.push_back(p);
      log << p.string() << '\n';
    }
  }

 private:
  std::string config_hash_, analysis_hash_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct Context {
  std::string command;
  Options opt;
  Json meta;
};

std::chrono::seconds parse_clock_time(const std::string& s) {
  const auto parts = text::split(s, ':');
  if (parts.size() != 2) throw ConfigError("expected HH:MM, got '" + s + "'");
  const auto h = text::parse_int(parts[0]), m = text::parse_int(parts[1]);
  if (!h || !m || *h < 0 || *h > 24 || *m < 0 || *m > 59) throw ConfigError("expected HH:MM, got '" + s + "'");
  return std::chrono::hours{*h} + std::chrono::minutes{*m};
}

ColumnRef column_ref(const std::string& s) {
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    return static_cast<std::size_t>(std::stoull(s));
  return s;
}

AnchorPolicy parse_anchor(const std::string& s) {
  if (s == "every_trade") return AnchorPolicy::every_trade();
  if (s == "session_start") return AnchorPolicy::session_start();
  if (s.rfind("stride:", 0) == 0) {
    const auto v = text::parse_double(s.substr(7));
    if (!v || !(*v > 0.0)) throw ConfigError("anchor stride must be a positive number of seconds");
    return AnchorPolicy::every(from_seconds(*v));
  }
  throw ConfigError("unknown anchor policy '" + s + "' (every_trade, session_start or stride:SECONDS)");
}

std::vector<Wing> parse_wings(const std::string& s) {
  if (s == "both") return {Wing::positive, Wing::negative};
  if (s == "+" || s == "positive") return {Wing::positive};
  if (s == "-" || s == "negative") return {Wing::negative};
  throw ConfigError("unknown wing '" + s + "' (positive, negative or both)");
}

SessionCalendar calendar_of(const Source& src) {
  auto cal = SessionCalendar::weekdays(parse_clock_time(src.open), parse_clock_time(src.close),
                                       std::chrono::minutes{src.trim});
  cal.utc_offset = std::chrono::minutes{src.utc_offset};
  cal.validate();
  return cal;
}

synth::ProcessSpec process_of(const Source& src, std::uint64_t seed) {
  synth::ProcessSpec spec;
  spec.family = synth::parse_family(src.process);
  spec.sigma = src.sigma;
  spec.increments = synth::parse_increments(src.increments);
  spec.nu = src.nu;
  spec.clock = synth::parse_clock(src.clock);
  if (!(src.step > 0.0) || !(src.session > 0.0)) throw ConfigError("step and session must be positive");
  spec.step = from_seconds(src.step);
  spec.session_length = from_seconds(src.session);
  spec.paths = src.paths;
  spec.seed = seed;
  spec.validate();
  return spec;
}

std::string market_of(const Source& src, const std::string& fallback) {
  if (!src.market.empty()) return src.market;
  if (!src.symbol.empty()) return src.symbol;
  return fallback;
}

struct Loaded {
  std::vector<ReturnPath> paths;
  std::string market;
  Json report;
};

TickSeries read_inputs(const Source& src, Json& report) {
  FormatConfig fc;
  if (src.delimiter == "tab") fc.delimiter = '\t';
  else if (src.delimiter != "auto") {
    if (src.delimiter.size() != 1) throw ConfigError("delimiter must be one character, 'tab' or 'auto'");
    fc.delimiter = src.delimiter[0];
  }
  fc.has_header = !src.no_header;
  fc.timestamp = column_ref(src.timestamp_col);
  fc.price = column_ref(src.price_col);
  if (!src.volume_col.empty()) fc.volume = column_ref(src.volume_col);
  fc.unit = parse_timestamp_unit(src.unit);
  fc.malformed_tolerance = src.tolerance;
  fc.symbol = src.symbol;

  TickSeries merged;
  Json parsed = Json::array();
  for (const auto& path : src.input) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open input '" + path + "'");
    auto r = parse_ticks(f, fc);
    Json pj = to_json(r.report);
    pj["file"] = path;
    parsed.push_back(pj);
    if (merged.symbol.empty()) merged.symbol = r.series.symbol;
    merged.records.insert(merged.records.end(), r.series.records.begin(), r.series.records.end());
  }
  if (src.input.size() > 1) {
    std::stable_sort(merged.records.begin(), merged.records.end(),
                     [](const TickRecord& a, const TickRecord& b) { return a.time < b.time; });
    std::vector<TickRecord> unique;
    for (const auto& r : merged.records) {
      if (!unique.empty() && unique.back().time == r.time) unique.back() = r;
      else unique.push_back(r);
    }
    merged.records = std::move(unique);
  }
  if (merged.symbol.empty() && !src.input.empty()) merged.symbol = fs::path(src.input.front()).stem().string();
  report["parse"] = parsed;
  return merged;
}

Loaded load(const Options& opt) {
  const Source& src = opt.src;
  const bool files = !src.input.empty();
  const bool synthetic = !src.process.empty();
  if (files == synthetic) throw ConfigError("give exactly one data source: --input files or --process");
  Loaded out;
  TickSeries series;
  if (files) {
    series = read_inputs(src, out.report);
    out.market = market_of(src, series.symbol);
  } else {
    const auto spec = process_of(src, opt.g.seed);
    const auto paths = synth::generate(spec, opt.g.threads);
    out.market = market_of(src, "synthetic-" + synth::to_string(spec.family));
    series = synth::to_tick_series(paths, {100.0, out.market});
  }
  auto cleaned = clean_sessions(series, calendar_of(src), src.roll_threshold);
  out.report["clean"] = to_json(cleaned.report);
  auto built = build_return_paths(cleaned.series, parse_anchor(src.anchor));
  out.report["paths"] = built.paths.size();
  out.report["skipped_anchors"] = built.skipped;
  if (built.paths.size() < 2) throw InsufficientDataError("fewer than two return paths after cleaning");
  out.paths = std::move(built.paths);
  return out;
}

HorizonGrid horizons_of(const Grid& g) { return HorizonGrid::from_seconds(g.horizons); }

LevelGrid levels_of(const Grid& g, std::span<const ReturnPath> paths) {
  if (g.levels == "auto") {
    if (g.level_range.size() != 2 || !(g.level_range[0] > 0.0) || !(g.level_range[1] > g.level_range[0]))
      throw ConfigError("level-range must be two increasing positive multiples of v0");
    const double v0 = stddev_at_horizon(paths, from_seconds(g.reference));
    if (!(v0 > 0.0)) throw DegenerateScaleError("v0 is zero; cannot scale the level grid");
    return LevelGrid::log_spaced(g.level_range[0] * v0, g.level_range[1] * v0, g.per_wing, true);
  }
  std::vector<double> v;
  for (auto part : text::split(g.levels, ',')) {
    const auto d = text::parse_double(text::trim(part));
    if (!d) throw ConfigError("levels must be 'auto' or a comma-separated list of numbers");
    v.push_back(*d);
  }
  return LevelGrid(std::move(v));
}

FptSurface estimate(const Options& opt, const Loaded& data) {
  EstimateOptions eo;
  eo.threads = opt.g.threads;
  eo.batches = opt.grid.batches;
  return estimate_fpt(data.paths, levels_of(opt.grid, data.paths), horizons_of(opt.grid), eo, data.market);
}

Json surface_doc(const FptSurface& s, const Json& meta) {
  Json j = to_json(s);
  j["meta"] = meta;
  return j;
}

std::string to_csv(const std::function<void(std::ostream&)>& body) {
  std::ostringstream os;
  body(os);
  return os.str();
}

std::size_t horizon_index(const FptSurface& s, double seconds) {
  const auto& hz = s.horizons.values();
  auto it = std::find(hz.begin(), hz.end(), from_seconds(seconds));
  if (it == hz.end()) throw GridError("horizon " + text::format_double(seconds) + " s is not on the horizon grid");
  return static_cast<std::size_t>(it - hz.begin());
}

struct Input {
  FptSurface surface;
  std::string analysis_hash;
};

std::vector<Input> surfaces_for(const Context& ctx, Json* report) {
  std::vector<Input> out;
  if (ctx.opt.surfaces.empty()) {
    const auto data = load(ctx.opt);
    if (report) *report = data.report;
    out.push_back({estimate(ctx.opt, data), ctx.meta.at("analysis_hash").get<std::string>()});
    return out;
  }
  for (const auto& path : ctx.opt.surfaces) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open surface '" + path + "'");
    Json j;
    try {
      j = Json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("surface '" + path + "': " + e.what());
    }
    Input in{surface_from_json(j), {}};
    if (j.contains("meta") && j["meta"].contains("analysis_hash"))
      in.analysis_hash = j["meta"]["analysis_hash"].get<std::string>();
    if (in.surface.quantity == Quantity::survival) in.surface = survival(in.surface);
    out.push_back(std::move(in));
  }
  for (const auto& in : out)
    if (in.analysis_hash != out.front().analysis_hash)
      throw ConfigError("surfaces were produced with different analysis configurations; refusing to mix them");
  return out;
}

// ---------------------------------------------------------------------------

void cmd_ingest(const Context& ctx, Outputs& files) {
  const Source& src = ctx.opt.src;
  if (src.input.empty()) throw ConfigError("ingest needs at least one --input file");
  Json report;
  const auto series = read_inputs(src, report);
  const auto cleaned = clean_sessions(series, calendar_of(src), src.roll_threshold);
  report["clean"] = to_json(cleaned.report);
  Json doc{{"schema", kIngestSchema}, {"symbol", cleaned.series.symbol}};
  doc["report"] = report;
  doc["meta"] = ctx.meta;
  files.csv("ticks.csv", to_csv([&](std::ostream& os) { write_ticks(os, cleaned.series); }));
  files.json("ingest.json", doc);
}

void cmd_synth(const Context& ctx, Outputs& files) {
  const auto spec = process_of(ctx.opt.src, ctx.opt.g.seed);
  const auto paths = synth::generate(spec, ctx.opt.g.threads);
  const auto series = synth::to_tick_series(paths, {100.0, market_of(ctx.opt.src, "SYNTH")});
  Json doc{{"schema", kIngestSchema}, {"symbol", series.symbol}, {"ticks", series.size()}, {"paths", paths.size()}};
  doc["meta"] = ctx.meta;
  files.csv("ticks.csv", to_csv([&](std::ostream& os) { write_ticks(os, series); }));
  files.json("synth.json", doc);
}

void cmd_estimate(const Context& ctx, Outputs& files) {
  const auto data = load(ctx.opt);
  const auto s = estimate(ctx.opt, data);
  const auto gap = gaussian_gap(s);
  files.json("surface.json", surface_doc(s, ctx.meta));
  files.csv("surface.csv", to_csv([&](std::ostream& os) { write_surface_csv(os, s); }));
  files.csv("gaussian_gap.csv", to_csv([&](std::ostream& os) { write_gap_csv(os, s, gap); }));
  Json region = {{"large", {{"cells", gap.large.cells}, {"positive", gap.large.positive},
                            {"negative", gap.large.negative}, {"mean_gap", gap.large.mean}}},
                 {"small", {{"cells", gap.small.cells}, {"positive", gap.small.positive},
                            {"negative", gap.small.negative}, {"mean_gap", gap.small.mean}}}};
  Json report = data.report;
  report["gaussian_gap"] = region;
  report["meta"] = ctx.meta;
  files.json("clean_report.json", report);
}

void cmd_collapse(const Context& ctx, Outputs& files) {
  const Options& opt = ctx.opt;
  const auto inputs = surfaces_for(ctx, nullptr);
  const double time_unit = opt.time_unit > 0.0 ? opt.time_unit : opt.grid.reference;
  const double mkt_horizon = opt.market_horizon > 0.0 ? opt.market_horizon : opt.grid.reference;

  std::string csv_x, csv_t, csv_m;
  Json table = Json::array(), details = Json::array(), mkt = Json::array();
  std::ostringstream disp;
  disp << "role,wing,market,theta,curve_count\n";
  for (Wing wing : parse_wings(opt.wing)) {
    for (const auto& in : inputs) {
      const auto& s = in.surface;
      const auto raw_x = scale_by_volatility(s, wing, 0);
      const auto binned_x = scale_by_volatility(s, wing, opt.bins);
      const auto rx = dispersion_theta(binned_x, AxisRole::level);
      const double v0 = s.vt[horizon_index(s, opt.grid.reference)];
      const auto raw_t = scale_time(s, v0, wing, time_unit);
      const auto binned_t = resample_common(raw_t, opt.bins, Coverage::union_range);
      const auto rt = dispersion_theta(binned_t, AxisRole::time);
      csv_x += to_csv([&](std::ostream& os) {
        write_curves_csv(os, "x_over_vt", raw_x);
        write_curves_csv(os, "x_over_vt_binned", binned_x);
      });
      csv_t += to_csv([&](std::ostream& os) {
        write_curves_csv(os, "tau", raw_t);
        write_curves_csv(os, "tau_binned", binned_t);
      });
      const std::string suffix = wing == Wing::positive ? "(+)" : "(-)";
      Json* row = nullptr;
      for (auto& r : table)
        if (r["market"] == s.market) row = &r;
      if (!row) {
        table.push_back({{"market", s.market}});
        row = &table.back();
      }
      (*row)["theta_x" + suffix] = rx.theta;
      (*row)["theta_t" + suffix] = rt.theta;
      for (const auto* r : {&rx, &rt}) {
        Json d = to_json(*r);
        d["market"] = s.market;
        details.push_back(d);
        disp << axis_role_name(r->role) << ',' << wing_name(wing) << ',' << s.market << ','
             << text::format_double(r->theta) << ',' << r->curve_count << '\n';
      }
    }
    if (inputs.size() >= 2) {
      std::vector<FptSurface> all;
      for (const auto& in : inputs) all.push_back(in.surface);
      const auto curves = scale_markets(all, from_seconds(mkt_horizon), wing, opt.bins);
      const auto rm = dispersion_theta(curves, AxisRole::market);
      csv_m += to_csv([&](std::ostream& os) { write_curves_csv(os, "market_x_over_vt", curves); });
      mkt.push_back({{"wing", wing_name(wing)}, {"theta_mkt", rm.theta}, {"curves", rm.curve_count},
                     {"horizon_s", mkt_horizon}});
      Json d = to_json(rm);
      d["market"] = "all";
      details.push_back(d);
      disp << "theta_mkt," << wing_name(wing) << ",all," << text::format_double(rm.theta) << ','
           << rm.curve_count << '\n';
    }
  }
  // Strip repeated headers produced by concatenating per-market tables.
  auto dedupe = [](const std::string& body) {
    std::istringstream in(body);
    std::string line, header, out;
    while (std::getline(in, line)) {
      if (header.empty()) header = line;
      else if (line == header) continue;
      out += line + '\n';
    }
    return out;
  };
  Json doc{{"schema", kDispersionSchema}, {"table", table}};
  if (inputs.size() >= 2) doc["theta_mkt"] = mkt;
  else doc["theta_mkt"] = {{"refused", "market dispersion needs at least two markets"}};
  doc["details"] = details;
  doc["meta"] = ctx.meta;
  files.csv("curves_x.csv", dedupe(csv_x));
  files.csv("curves_t.csv", dedupe(csv_t));
  if (!csv_m.empty()) files.csv("curves_mkt.csv", dedupe(csv_m));
  files.csv("dispersion.csv", disp.str());
  files.json("dispersion.json", doc);
}

void cmd_surrogate(const Context& ctx, Outputs& files) {
  const Options& opt = ctx.opt;
  std::vector<SurrogateKind> kinds;
  if (opt.kind == "both") kinds = {SurrogateKind::shuffle_returns, SurrogateKind::shuffle_times};
  else kinds = {parse_surrogate_kind(opt.kind)};
  if (opt.decay_window.size() != 2) throw ConfigError("decay-window needs two values");
  const auto data = load(opt);
  const auto levels = levels_of(opt.grid, data.paths);
  ExperimentOptions eo;
  eo.threads = opt.g.threads;
  eo.batches = opt.grid.batches;
  eo.reference_horizon = from_seconds(opt.grid.reference);
  eo.decay_level = opt.decay_level;
  eo.decay_window = {opt.decay_window[0], opt.decay_window[1]};

  Json summary{{"schema", kSurrogateSchema}, {"market", data.market}};
  Json experiments = Json::array();
  bool original_written = false;
  for (auto kind : kinds) {
    SurrogateSpec spec{kind, opt.g.seed};
    auto ex = surrogate_experiment(data.paths, levels, horizons_of(opt.grid), spec, opt.replicates, eo);
    if (!original_written) {
      ex.original.market = data.market;
      files.json("original.json", surface_doc(ex.original, ctx.meta));
      files.csv("original.csv", to_csv([&](std::ostream& os) { write_surface_csv(os, ex.original); }));
      original_written = true;
    }
    const std::string k = to_string(kind);
    for (std::size_t r = 0; r < ex.replicates.size(); ++r) {
      ex.replicates[r].market = data.market;
      Json doc = surface_doc(ex.replicates[r], ctx.meta);
      doc["surrogate"] = {{"kind", k}, {"seed", opt.g.seed}, {"replicate", r}};
      files.json(k + "_replicate_" + std::to_string(r) + ".json", doc);
    }
    ex.pooled.market = data.market;
    Json pooled = surface_doc(ex.pooled, ctx.meta);
    pooled["surrogate"] = {{"kind", k}, {"seed", opt.g.seed}, {"replicate", "pooled"}};
    files.json(k + "_pooled.json", pooled);
    files.csv(k + "_pooled.csv", to_csv([&](std::ostream& os) { write_surface_csv(os, ex.pooled); }));
    files.csv(k + "_comparison.csv", to_csv([&](std::ostream& os) { write_comparison_csv(os, ex); }));
    experiments.push_back(summary_json(ex));
  }
  summary["experiments"] = experiments;
  summary["meta"] = ctx.meta;
  files.json("surrogate_summary.json", summary);
}

void cmd_fit(const Context& ctx, Outputs& files) {
  const Options& opt = ctx.opt;
  std::vector<ModelFamily> families;
  for (const auto& f : opt.families) families.push_back(parse_model_family(f));
  if (families.empty()) throw ConfigError("fit needs at least one --family");
  if (opt.sweep.size() != 3) throw ConfigError("sweep needs three values: lo hi step");
  const auto inputs = surfaces_for(ctx, nullptr);

  std::vector<FitRow> rows;
  std::vector<FitResult> per_horizon_all;
  std::string per_horizon_csv, crossover_csv;
  Json fits = Json::array(), crossovers = Json::array();
  for (const auto& in : inputs) {
    const auto& s = in.surface;
    FitOptions fo;
    fo.crossover = opt.crossover;
    if (opt.x_unit == "v0") fo.x_unit = s.vt[horizon_index(s, opt.grid.reference)];
    else {
      const auto v = text::parse_double(opt.x_unit);
      if (!v) throw ConfigError("x-unit must be 'v0' or a positive number");
      fo.x_unit = *v;
    }
    if (!(fo.x_unit > 0.0)) throw DegenerateScaleError("x unit is not positive");
    for (Wing wing : parse_wings(opt.wing)) {
      FitRow row{s.market, wing, std::nullopt, std::nullopt};
      for (auto fam : families) {
        auto r = fit_model(s, fam, wing, fo);
        Json j = to_json(r);
        j["market"] = s.market;
        fits.push_back(j);
        (fam == ModelFamily::weibull ? row.weibull : row.student) = r;
        if (opt.per_horizon) {
          const auto ph = fit_per_horizon(s, fam, wing, fo);
          per_horizon_csv += to_csv([&](std::ostream& os) { write_per_horizon_csv(os, s.market, ph); });
        }
      }
      if (row.weibull && row.student) {
        CrossoverOptions co{opt.sweep[0], opt.sweep[1], opt.sweep[2]};
        const auto rep = crossover_report(s, *row.weibull, *row.student, co);
        Json j = to_json(rep);
        j["market"] = s.market;
        crossovers.push_back(j);
        crossover_csv += to_csv([&](std::ostream& os) { write_crossover_csv(os, rep); });
      }
      rows.push_back(row);
    }
  }
  auto dedupe = [](const std::string& body) {
    std::istringstream in(body);
    std::string line, header, out;
    while (std::getline(in, line)) {
      if (header.empty()) header = line;
      else if (line == header) continue;
      out += line + '\n';
    }
    return out;
  };
  Json doc{{"schema", kFitSchema}, {"objective", "count-weighted least squares in log W"}, {"fits", fits}};
  if (!crossovers.empty()) doc["crossover"] = crossovers;
  doc["meta"] = ctx.meta;
  files.json("fits.json", doc);
  files.csv("fits.csv", to_csv([&](std::ostream& os) { write_fit_table_csv(os, rows); }));
  if (!crossover_csv.empty()) files.csv("crossover.csv", dedupe(crossover_csv));
  if (opt.per_horizon) files.csv("per_horizon.csv", dedupe(per_horizon_csv));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  Registry reg;
  CLI::App app{"First-passage-time scaling analysis of tick data", "fptscale"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);
  reg.option(&app, "", "seed", opt.g.seed, "Seed for synthetic data and surrogates");
  reg.option(&app, "", "threads", opt.g.threads, "Worker threads; results do not depend on this")
      ->check(CLI::PositiveNumber);
  reg.option(&app, "", "out", opt.g.out, "Output directory");
  app.add_option("--config", opt.g.config, "JSON file whose values override command-line flags");

  auto add_source = [&](CLI::App* sub, bool synthetic_only) {
    const std::string sc = sub->get_name();
    Source& s = opt.src;
    if (!synthetic_only) {
      reg.option(sub, sc, "input", s.input, "Tick files (CSV or TSV)")->delimiter(',');
      reg.option(sub, sc, "symbol", s.symbol, "Symbol recorded for the input");
      reg.option(sub, sc, "delimiter", s.delimiter, "Field delimiter: auto, tab or a character");
      reg.flag(sub, sc, "no-header", s.no_header, "Input has no header row");
      reg.option(sub, sc, "timestamp-col", s.timestamp_col, "Timestamp column name or index");
      reg.option(sub, sc, "price-col", s.price_col, "Price column name or index");
      reg.option(sub, sc, "volume-col", s.volume_col, "Volume column name or index");
      reg.option(sub, sc, "unit", s.unit, "Timestamp unit: auto, s, ms, us, ns, iso8601");
      reg.option(sub, sc, "tolerance", s.tolerance, "Largest tolerated fraction of malformed rows");
      reg.option(sub, sc, "open", s.open, "Session open, HH:MM local time");
      reg.option(sub, sc, "close", s.close, "Session close, HH:MM local time");
      reg.option(sub, sc, "trim", s.trim, "Minutes trimmed after the open and before the close");
      reg.option(sub, sc, "utc-offset", s.utc_offset, "Exchange offset from UTC in minutes");
      reg.option(sub, sc, "roll-threshold", s.roll_threshold, "Absolute log jump that splits a segment");
    }
    reg.option(sub, sc, "process", s.process, "Synthetic process: wiener or iid_walk");
    reg.option(sub, sc, "sigma", s.sigma, "Volatility per square-root second");
    reg.option(sub, sc, "increments", s.increments, "iid_walk increments: gaussian, laplace or student");
    reg.option(sub, sc, "nu", s.nu, "Student degrees of freedom");
    reg.option(sub, sc, "clock", s.clock, "Trade clock: uniform or exponential");
    reg.option(sub, sc, "step", s.step, "Clock spacing or mean spacing in seconds");
    reg.option(sub, sc, "session", s.session, "Path length in seconds");
    reg.option(sub, sc, "paths", s.paths, "Number of synthetic paths");
    reg.option(sub, sc, "market", s.market, "Market label");
    if (!synthetic_only) reg.option(sub, sc, "anchor", s.anchor, "every_trade, session_start or stride:SECONDS");
  };
  auto add_grid = [&](CLI::App* sub) {
    const std::string sc = sub->get_name();
    reg.option(sub, sc, "levels", opt.grid.levels, "'auto' or comma-separated return levels");
    reg.option(sub, sc, "per-wing", opt.grid.per_wing, "Automatic levels per wing");
    reg.option(sub, sc, "level-range", opt.grid.level_range, "Automatic level range in units of v0")
        ->delimiter(',')->expected(2);
    reg.option(sub, sc, "horizons", opt.grid.horizons, "Horizons in seconds")->delimiter(',');
    reg.option(sub, sc, "reference-horizon", opt.grid.reference,
               "Horizon defining v0, in seconds (default 1800, or as recorded in --surface inputs)");
    reg.option(sub, sc, "batches", opt.grid.batches, "Path batches kept for jackknife errors");
  };
  auto add_surfaces = [&](CLI::App* sub) {
    reg.option(sub, sub->get_name(), "surface", opt.surfaces, "Surface JSON files from 'estimate'")
        ->delimiter(',');
  };

  std::map<std::string, std::function<void(const Context&, Outputs&)>> commands;
  auto* ingest = app.add_subcommand("ingest", "Parse and clean tick files");
  add_source(ingest, false);
  commands["ingest"] = cmd_ingest;
  auto* synth = app.add_subcommand("synth", "Write a synthetic tick file");
  add_source(synth, true);
  commands["synth"] = cmd_synth;
  auto* est = app.add_subcommand("estimate", "Estimate the FPT surface");
  add_source(est, false);
  add_grid(est);
  commands["estimate"] = cmd_estimate;
  auto* col = app.add_subcommand("collapse", "Scaled curves and dispersion measures");
  add_source(col, false);
  add_grid(col);
  add_surfaces(col);
  reg.option(col, "collapse", "bins", opt.bins, "Common-grid bins");
  reg.option(col, "collapse", "time-unit", opt.time_unit, "Unit of tau in seconds (default: reference horizon)");
  reg.option(col, "collapse", "wing", opt.wing, "positive, negative or both");
  reg.option(col, "collapse", "market-horizon", opt.market_horizon,
             "Horizon compared across markets (default: reference horizon)");
  commands["collapse"] = cmd_collapse;
  auto* sur = app.add_subcommand("surrogate", "Shuffle surrogates");
  add_source(sur, false);
  add_grid(sur);
  reg.option(sur, "surrogate", "kind", opt.kind, "shuffle_returns, shuffle_times or both");
  reg.option(sur, "surrogate", "replicates", opt.replicates, "Replicates per kind")->check(CLI::PositiveNumber);
  reg.option(sur, "surrogate", "decay-level", opt.decay_level, "Survival decay level in units of v0");
  reg.option(sur, "surrogate", "decay-window", opt.decay_window, "Tau window for the decay fit")
      ->delimiter(',')->expected(2);
  commands["surrogate"] = cmd_surrogate;
  auto* fit = app.add_subcommand("fit", "Weibull and Student fits");
  add_source(fit, false);
  add_grid(fit);
  add_surfaces(fit);
  reg.option(fit, "fit", "family", opt.families, "weibull, student or both (comma-separated)")->delimiter(',');
  reg.option(fit, "fit", "wing", opt.wing, "positive, negative or both");
  reg.option(fit, "fit", "x-unit", opt.x_unit, "Level unit: v0 or a number");
  reg.option(fit, "fit", "crossover", opt.crossover, "Split for rmse_small / rmse_tail in units of v_t");
  reg.option(fit, "fit", "sweep", opt.sweep, "Crossover sweep lo,hi,step in units of v_t")
      ->delimiter(',')->expected(3);
  reg.flag(fit, "fit", "per-horizon", opt.per_horizon, "Also fit each horizon separately");
  commands["fit"] = cmd_fit;
  for (const auto& [name, _] : commands) reg.declare_scope(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitConfig;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  Context ctx;
  ctx.command = chosen->get_name();
  try {
    if (!opt.g.config.empty()) {
      std::ifstream f(opt.g.config, std::ios::binary);
      if (!f) throw ConfigError("cannot open config file '" + opt.g.config + "'");
      Json cfg;
      try {
        cfg = Json::parse(f);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config file: ") + e.what());
      }
      reg.apply(cfg, ctx.command);
    }
    if (opt.g.threads == 0) throw ConfigError("threads must be positive");
    if (!(opt.grid.reference > 0.0)) opt.grid.reference = recorded_reference(opt.surfaces);
    ctx.opt = opt;

    Json effective = reg.effective(ctx.command);
    Json analysis = Json::object();
    for (const char* k : {"anchor", "levels", "per-wing", "level-range", "horizons", "reference-horizon", "batches",
                          "open", "close", "trim", "utc-offset", "roll-threshold"})
      if (effective.contains(k)) analysis[k] = effective[k];
    Json config{{"command", ctx.command}, {"seed", opt.g.seed}, {"options", effective}};
    ctx.meta = {{"tool", kToolVersion},
                {"command", ctx.command},
                {"config_hash", json_hash(config)},
                {"analysis_hash", json_hash(analysis)},
                {"seed", opt.g.seed},
                {"rng", kRngName},
                {"config", config}};
    Outputs files(ctx.meta["config_hash"].get<std::string>(), ctx.meta["analysis_hash"].get<std::string>());
    commands.at(ctx.command)(ctx, files);
    files.commit(opt.g.out, out);
    return 0;
  } catch (const Error& e) {
    err << "fptscale " << ctx.command << ": " << e.what() << '\n';
    if (e.kind() == ErrorKind::config) err << chosen->help();
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    err << "fptscale " << ctx.command << ": out of memory\n";
    return kExitNumerical;
  }
}

}  // namespace fpt::cli
