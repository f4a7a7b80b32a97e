#include "fptscale/serialize.hpp"

#include <cmath>
#include <ostream>

#include "fptscale/text.hpp"

using fpt::text::format_double;

namespace fpt {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

double read_number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw FormatError("surface: expected a number or null");
  return j.get<double>();
}

template <class T>
std::vector<T> read_array(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw FormatError(std::string("surface: missing array '") + key + "'");
  std::vector<T> out;
  for (const auto& e : j.at(key)) {
    if constexpr (std::is_same_v<T, double>)
      out.push_back(read_number(e));
    else
      out.push_back(e.get<T>());
  }
  return out;
}

const char* quantity_name(Quantity q) { return q == Quantity::fpt ? "fpt" : "survival"; }

}  // namespace

std::string json_hash(const Json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<std::size_t>(k)] = kHex[h & 0xf];
  return out;
}

std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

Json to_json(const FptSurface& s) {
  Json j;
  j["schema"] = kSurfaceSchema;
  j["market"] = s.market;
  j["quantity"] = quantity_name(s.quantity);
  j["levels"] = s.levels.values();
  Json hz = Json::array();
  for (auto h : s.horizons.values()) hz.push_back(h.count());
  j["horizons_ns"] = hz;
  j["vt"] = numbers(s.vt);
  j["vt_count"] = s.vt_count;
  j["w"] = numbers(s.w);
  j["crossed"] = s.crossed;
  j["n"] = s.n;
  j["batches"] = s.batches;
  j["batch_crossed"] = s.batch_crossed;
  j["batch_n"] = s.batch_n;
  return j;
}

FptSurface surface_from_json(const Json& j) {
  try {
    if (!j.is_object() || j.value("schema", "") != kSurfaceSchema)
      throw FormatError(std::string("surface: expected schema ") + kSurfaceSchema);
    FptSurface s;
    s.market = j.value("market", "");
    const std::string q = j.value("quantity", "fpt");
    if (q != "fpt" && q != "survival") throw FormatError("surface: unknown quantity '" + q + "'");
    s.quantity = q == "fpt" ? Quantity::fpt : Quantity::survival;
    s.levels = LevelGrid(read_array<double>(j, "levels"));
    std::vector<Duration> hz;
    for (auto ns : read_array<std::int64_t>(j, "horizons_ns")) hz.push_back(Duration{ns});
    s.horizons = HorizonGrid(std::move(hz));
    s.vt = read_array<double>(j, "vt");
    s.vt_count = read_array<std::uint64_t>(j, "vt_count");
    s.w = read_array<double>(j, "w");
    s.crossed = read_array<std::uint64_t>(j, "crossed");
    s.n = read_array<std::uint64_t>(j, "n");
    s.batches = j.value("batches", std::size_t{0});
    s.batch_crossed = read_array<std::uint64_t>(j, "batch_crossed");
    s.batch_n = read_array<std::uint64_t>(j, "batch_n");
    const std::size_t cells = s.rows() * s.cols();
    if (s.w.size() != cells || s.n.size() != cells || s.crossed.size() != cells || s.vt.size() != s.cols() ||
        s.vt_count.size() != s.cols() || s.batch_n.size() != s.batches * cells ||
        s.batch_crossed.size() != s.batches * cells)
      throw FormatError("surface: array sizes do not match the grid");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("surface: ") + e.what());
  } catch (const GridError& e) {
    throw FormatError(std::string("surface: ") + e.what());
  }
}

void write_surface_csv(std::ostream& out, const FptSurface& s) {
  out << "market,quantity,wing,level,horizon_s,value,crossed,n,stderr,vt\n";
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const Wing wing = s.levels[i] > 0 ? Wing::positive : Wing::negative;
    for (std::size_t j = 0; j < s.cols(); ++j) {
      const auto c = s.index(i, j);
      out << s.market << ',' << quantity_name(s.quantity) << ',' << wing_name(wing) << ','
          << format_double(s.levels[i]) << ',' << format_double(s.horizons.seconds(j)) << ','
          << csv_number(s.w[c]) << ',' << s.crossed[c] << ',' << s.n[c] << ',' << csv_number(s.stderr_at(i, j))
          << ',' << csv_number(s.vt[j]) << '\n';
    }
  }
}

void write_gap_csv(std::ostream& out, const FptSurface& s, const GaussianGap& gap) {
  out << "market,wing,level,horizon_s,u,w,w_gauss,gap,zscore\n";
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const Wing wing = s.levels[i] > 0 ? Wing::positive : Wing::negative;
    for (std::size_t j = 0; j < s.cols(); ++j) {
      const auto c = s.index(i, j);
      const double v = s.vt[j];
      const double u = v > 0.0 ? std::abs(s.levels[i]) / v : std::numeric_limits<double>::quiet_NaN();
      const double wg = v > 0.0 ? std::erfc(u / std::sqrt(2.0)) : std::numeric_limits<double>::quiet_NaN();
      out << s.market << ',' << wing_name(wing) << ',' << format_double(s.levels[i]) << ','
          << format_double(s.horizons.seconds(j)) << ',' << csv_number(u) << ',' << csv_number(s.w[c]) << ','
          << csv_number(wg) << ',' << csv_number(gap.gap[c]) << ',' << csv_number(gap.zscore[c]) << '\n';
    }
  }
}

Json to_json(const ParseReport& r) {
  Json j;
  j["rows"] = r.rows;
  j["parsed"] = r.parsed;
  j["malformed"] = r.malformed;
  j["rejected_price"] = r.rejected_price;
  j["collapsed"] = r.collapsed;
  j["reordered"] = r.reordered;
  j["diagnostics"] = r.diagnostics;
  return j;
}

Json to_json(const CleanReport& r) {
  Json j;
  j["input"] = r.input;
  j["kept"] = r.kept;
  j["trimmed"] = r.trimmed;
  j["closed_day"] = r.closed_day;
  j["sessions"] = r.sessions;
  j["segments"] = r.segments;
  Json splits = Json::array();
  for (const auto& s : r.splits)
    splits.push_back({{"index", s.index},
                      {"time_ns", s.time.time_since_epoch().count()},
                      {"log_jump", number(s.log_jump)},
                      {"overnight", s.overnight}});
  j["splits"] = splits;
  return j;
}

void write_curves_csv(std::ostream& out, const std::string& strategy, std::span<const ScaledCurve> curves) {
  out << "strategy,market,wing,key,key_value,axis,value,bin_width\n";
  for (const auto& c : curves)
    for (std::size_t k = 0; k < c.axis.size(); ++k)
      out << strategy << ',' << c.label.market << ',' << wing_name(c.label.wing) << ','
          << (c.label.key == CurveKey::horizon ? "horizon_s" : "level") << ',' << format_double(c.label.key_value)
          << ',' << csv_number(c.axis[k]) << ',' << csv_number(c.values[k]) << ','
          << csv_number(k < c.bin_width.size() ? c.bin_width[k] : std::numeric_limits<double>::quiet_NaN()) << '\n';
}

Json to_json(const DispersionReport& r) {
  Json j;
  j["role"] = axis_role_name(r.role);
  j["wing"] = wing_name(r.wing);
  j["theta"] = number(r.theta);
  j["curve_count"] = r.curve_count;
  j["axis"] = numbers(r.axis);
  j["bin_width"] = numbers(r.bin_width);
  j["spread"] = numbers(r.spread);
  return j;
}

Json to_json(const FitResult& r) {
  Json j;
  j["family"] = to_string(r.family);
  j["wing"] = wing_name(r.wing);
  j["shape"] = number(r.shape);
  j["shape_stderr"] = number(r.shape_stderr);
  if (r.shape_at_bound) j["shape_at_bound"] = true;
  j["rate_per_s"] = number(r.rate);
  j["rate_stderr"] = number(r.rate_stderr);
  j["stderr_method"] = r.stderr_method;
  j["rmse"] = number(r.rmse);
  j["rmse_small"] = number(r.rmse_small);
  j["rmse_tail"] = number(r.rmse_tail);
  j["rmse_log_s"] = number(r.rmse_log_s);
  j["max_abs_w"] = number(r.max_abs_w);
  j["max_abs_s"] = number(r.max_abs_s);
  j["cells_used"] = r.cells_used;
  j["cells_excluded"] = r.cells_excluded;
  j["iterations"] = r.iterations;
  j["x_unit"] = number(r.x_unit);
  j["crossover_vt"] = number(r.crossover);
  if (!std::isnan(r.horizon)) j["horizon_s"] = r.horizon;
  return j;
}

Json to_json(const CrossoverReport& r) {
  Json j;
  j["wing"] = wing_name(r.wing);
  j["crossover_vt"] = number(r.crossover);
  j["small_winner"] = to_string(r.small_winner);
  j["tail_winner"] = to_string(r.tail_winner);
  j["joint_fit_rmse"] = {{"weibull_small", number(r.weibull_small)},
                         {"weibull_tail", number(r.weibull_tail)},
                         {"student_small", number(r.student_small)},
                         {"student_tail", number(r.student_tail)}};
  Json sweep = Json::array();
  for (const auto& row : r.sweep)
    sweep.push_back({{"c", row.c},
                     {"small_cells", row.small_cells},
                     {"tail_cells", row.tail_cells},
                     {"small_skipped", row.small_skipped},
                     {"tail_skipped", row.tail_skipped},
                     {"weibull_small", number(row.weibull_small)},
                     {"weibull_tail", number(row.weibull_tail)},
                     {"student_small", number(row.student_small)},
                     {"student_tail", number(row.student_tail)},
                     {"mixed", number(row.mixed)}});
  j["sweep"] = sweep;
  return j;
}

void write_crossover_csv(std::ostream& out, const CrossoverReport& r) {
  out << "wing,c,small_cells,tail_cells,small_skipped,tail_skipped,weibull_small,weibull_tail,student_small,"
         "student_tail,mixed\n";
  for (const auto& row : r.sweep)
    out << wing_name(r.wing) << ',' << format_double(row.c) << ',' << row.small_cells << ',' << row.tail_cells << ','
        << row.small_skipped << ',' << row.tail_skipped << ',' << csv_number(row.weibull_small) << ','
        << csv_number(row.weibull_tail) << ',' << csv_number(row.student_small) << ','
        << csv_number(row.student_tail) << ',' << csv_number(row.mixed) << '\n';
}

void write_fit_table_csv(std::ostream& out, std::span<const FitRow> rows) {
  out << "market,wing,beta,beta_stderr,b_per_s,b_stderr,alpha,alpha_stderr,a_per_s,a_stderr,"
         "weibull_rmse_small,weibull_rmse_tail,student_rmse_small,student_rmse_tail,x_unit\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    const FitResult* w = r.weibull ? &*r.weibull : nullptr;
    const FitResult* s = r.student ? &*r.student : nullptr;
    const double x_unit = w ? w->x_unit : (s ? s->x_unit : nan);
    out << r.market << ',' << wing_name(r.wing) << ',' << csv_number(w ? w->shape : nan) << ','
        << csv_number(w ? w->shape_stderr : nan) << ',' << csv_number(w ? w->rate : nan) << ','
        << csv_number(w ? w->rate_stderr : nan) << ',' << csv_number(s ? s->shape : nan) << ','
        << csv_number(s ? s->shape_stderr : nan) << ',' << csv_number(s ? s->rate : nan) << ','
        << csv_number(s ? s->rate_stderr : nan) << ',' << csv_number(w ? w->rmse_small : nan) << ','
        << csv_number(w ? w->rmse_tail : nan) << ',' << csv_number(s ? s->rmse_small : nan) << ','
        << csv_number(s ? s->rmse_tail : nan) << ',' << csv_number(x_unit) << '\n';
  }
}

void write_per_horizon_csv(std::ostream& out, const std::string& market, std::span<const FitResult> fits) {
  out << "market,family,wing,horizon_s,shape,shape_stderr,rate_per_s,rate_stderr,rmse,cells_used\n";
  for (const auto& f : fits)
    out << market << ',' << to_string(f.family) << ',' << wing_name(f.wing) << ',' << csv_number(f.horizon) << ','
        << csv_number(f.shape) << ',' << csv_number(f.shape_stderr) << ',' << csv_number(f.rate) << ','
        << csv_number(f.rate_stderr) << ',' << csv_number(f.rmse) << ',' << f.cells_used << '\n';
}

void write_comparison_csv(std::ostream& out, const SurrogateExperiment& ex) {
  out << "kind,wing,level,horizon_s,w_original,n_original,w_pooled,n_pooled,difference,zscore\n";
  const auto& o = ex.original;
  for (std::size_t i = 0; i < o.rows(); ++i) {
    const Wing wing = o.levels[i] > 0 ? Wing::positive : Wing::negative;
    for (std::size_t j = 0; j < o.cols(); ++j) {
      const auto c = o.index(i, j);
      out << to_string(ex.spec.kind) << ',' << wing_name(wing) << ',' << format_double(o.levels[i]) << ','
          << format_double(o.horizons.seconds(j)) << ',' << csv_number(o.w[c]) << ',' << o.n[c] << ','
          << csv_number(ex.pooled.w[c]) << ',' << ex.pooled.n[c] << ',' << csv_number(ex.difference[c]) << ','
          << csv_number(ex.zscore[c]) << '\n';
    }
  }
}

Json summary_json(const SurrogateExperiment& ex) {
  Json j;
  j["kind"] = to_string(ex.spec.kind);
  j["seed"] = ex.spec.seed;
  j["replicates"] = ex.replicate_count;
  j["z_critical"] = number(ex.z_critical);
  j["significant_change"] = ex.significant_change;
  j["verdict"] = ex.significant_change ? "significant change" : "no significant change";
  double zmax = 0.0;
  for (double z : ex.zscore)
    if (!std::isnan(z)) zmax = std::max(zmax, std::abs(z));
  j["max_abs_zscore"] = zmax;
  j["tail_linearity_r2"] = {{"original", number(ex.original_tail.mean_r2)},
                            {"pooled", number(ex.pooled_tail.mean_r2)},
                            {"original_horizons", ex.original_tail.horizons_used},
                            {"pooled_horizons", ex.pooled_tail.horizons_used}};
  Json decay = Json::array();
  for (const auto& d : ex.decay) {
    Json e{{"surface", d.label}, {"level", number(d.level)}, {"slope", number(d.slope)}, {"stderr", number(d.stderr)}};
    if (!d.error.empty()) e["error"] = d.error;
    decay.push_back(e);
  }
  j["decay"] = decay;
  return j;
}

}  // namespace fpt
