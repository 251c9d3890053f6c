#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "m3r/common.hpp"

// Weather-station series cleaning: cubic-spline gap filling, wind vector
// processing, contextual precipitation filling and physical-constraint
// validation.

namespace m3r::stationproc {

inline constexpr int kNumColumns = 20;

/// Canonical column order; fixed so binary containers and CSV files agree.
inline constexpr std::array<const char*, kNumColumns> kColumnNames = {
    "temp_max",       "temp_min",       "temp_avg",      "humidity_max",
    "humidity_min",   "humidity_avg",   "dewpoint_max",  "dewpoint_min",
    "dewpoint_avg",   "pressure_max",   "pressure_min",  "pressure_trend",
    "wind_dir_avg",   "wind_speed_max", "wind_speed_min", "wind_speed_avg",
    "wind_gust_max",  "wind_gust_min",  "wind_gust_avg", "precip_rate"};

/// Index of `name` in kColumnNames; throws Error(data) for unknown names.
int column_index(const std::string& name);

/// Irregular timestamped table of the 20 retained meteorological variables.
/// NaN encodes missing values.
struct StationSeries {
  std::vector<std::int64_t> timestamps;  // strictly increasing, seconds UTC
  std::array<std::vector<double>, kNumColumns> columns;

  std::size_t n_rows() const { return timestamps.size(); }
  std::vector<double>& column(const std::string& name) {
    return columns[static_cast<std::size_t>(column_index(name))];
  }
  const std::vector<double>& column(const std::string& name) const {
    return columns[static_cast<std::size_t>(column_index(name))];
  }

  /// Checks column lengths and timestamp monotonicity; throws on violation.
  void validate() const;
};

/// Natural cubic spline through the non-missing (ts, v) knots: zero second
/// derivative at the end knots, constant nearest-knot extension outside the
/// knot span. Non-missing entries pass through unchanged. Throws TooFewKnots
/// when fewer than two knots exist.
std::vector<double> spline_fill(const std::vector<std::int64_t>& ts,
                                const std::vector<double>& v);

/// (u, v) wind components: u = -speed*sin(dir), v = -speed*cos(dir), with
/// dir in meteorological degrees. Throws NegativeSpeed.
std::pair<double, double> wind_decompose(double speed_mph, double dir_deg);

/// Inverse of wind_decompose: speed = hypot(u, v), dir = atan2(-u, -v)
/// wrapped into [0, 360). Zero vector maps to (0, 0) by convention.
std::pair<double, double> wind_reconstitute(double u_mph, double v_mph);

/// Fills gaps in the (wind_speed_avg, wind_dir_avg) pair by decomposing the
/// rows where both are present, spline-filling the u/v components
/// independently and reconstituting. Only previously-missing entries are
/// replaced, so direction gaps interpolate through vector space instead of
/// wrapping across 0/360.
StationSeries wind_fill(const StationSeries& series);

/// Contextual fill of one precipitation column: a missing sample is linearly
/// interpolated from its nearest non-missing neighbours when any positive
/// rate lies within window_hours/2 of it, and set to 0 otherwise.
std::vector<double> fill_precip(const std::vector<std::int64_t>& ts,
                                const std::vector<double>& v,
                                double window_hours = 2.5);

/// fill_precip applied to the precip_rate column.
StationSeries precip_contextual_fill(const StationSeries& series,
                                     double window_hours = 2.5);

struct ViolationReport {
  struct Item {
    std::size_t row = 0;
    std::int64_t timestamp = 0;
    std::string constraint;  // e.g. "temp order", "gust_avg >= speed_avg"
  };
  std::vector<Item> items;

  std::size_t count() const { return items.size(); }
};

/// Reports rows violating max >= avg >= min for temperature and humidity,
/// gust >= speed per aggregate kind, and the humidity/[0,100],
/// wind_dir/[0,360), precip/>=0 range constraints. With repair=true the
/// returned series is fixed: ordering triples sorted descending, gust raised
/// to speed, ranges clamped (direction wrapped modulo 360).
std::pair<StationSeries, ViolationReport> validate_physical(
    const StationSeries& series, bool repair);

/// Full gap-fill pass in pipeline order: spline fill of the continuous
/// columns, wind vector fill, contextual precipitation fill.
StationSeries fill_all(const StationSeries& series,
                       double precip_window_hours = 2.5);

// CSV interface: header `ts_utc` plus the 20 column names; ISO-8601
// timestamps; empty cell = missing.
StationSeries read_pws_csv(const std::filesystem::path& path);
void write_pws_csv(const std::filesystem::path& path, const StationSeries& series);
void write_violation_report(const std::filesystem::path& path,
                            const ViolationReport& report);

}  // namespace m3r::stationproc
