#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fptscale/estimator.hpp"
#include "fptscale/fits.hpp"
#include "fptscale/ingest.hpp"
#include "fptscale/scaling.hpp"
#include "fptscale/surrogate.hpp"

namespace fpt {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "fptscale 1.0.0";
inline constexpr const char* kSurfaceSchema = "fptscale.surface/1";
inline constexpr const char* kDispersionSchema = "fptscale.dispersion/1";
inline constexpr const char* kFitSchema = "fptscale.fit/1";
inline constexpr const char* kSurrogateSchema = "fptscale.surrogate/1";
inline constexpr const char* kIngestSchema = "fptscale.ingest/1";

// Stable 64-bit FNV-1a digest of the compact dump, as 16 hex digits.
std::string json_hash(const Json& j);

// Doubles print in shortest round-trip form; NaN prints as an empty field.
std::string csv_number(double v);

Json to_json(const FptSurface& s);
// Throws FormatError on schema mismatch or malformed content.
FptSurface surface_from_json(const Json& j);
void write_surface_csv(std::ostream& out, const FptSurface& s);
void write_gap_csv(std::ostream& out, const FptSurface& s, const GaussianGap& gap);

Json to_json(const ParseReport& r);
Json to_json(const CleanReport& r);

void write_curves_csv(std::ostream& out, const std::string& strategy, std::span<const ScaledCurve> curves);
Json to_json(const DispersionReport& r);

Json to_json(const FitResult& r);
Json to_json(const CrossoverReport& r);
void write_crossover_csv(std::ostream& out, const CrossoverReport& r);

// One row per (market, wing) with Weibull and Student parameters side by side.
struct FitRow {
  std::string market;
  Wing wing = Wing::positive;
  std::optional<FitResult> weibull, student;
};
void write_fit_table_csv(std::ostream& out, std::span<const FitRow> rows);
void write_per_horizon_csv(std::ostream& out, const std::string& market, std::span<const FitResult> fits);

void write_comparison_csv(std::ostream& out, const SurrogateExperiment& ex);
Json summary_json(const SurrogateExperiment& ex);

}  // namespace fpt
