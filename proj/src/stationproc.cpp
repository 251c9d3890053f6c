#include "m3r/stationproc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "m3r/timeutil.hpp"

namespace m3r::stationproc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = 3.14159265358979323846;

constexpr int kWindDir = 12;
constexpr int kWindSpeedAvg = 15;
constexpr int kPrecip = 19;

bool missing(double x) { return std::isnan(x); }

}  // namespace

int column_index(const std::string& name) {
  for (int c = 0; c < kNumColumns; ++c)
    if (name == kColumnNames[static_cast<std::size_t>(c)]) return c;
  throw Error(ErrorCategory::data, "unknown station column: " + name);
}

void StationSeries::validate() const {
  for (int c = 0; c < kNumColumns; ++c)
    if (columns[static_cast<std::size_t>(c)].size() != timestamps.size())
      throw Error(ErrorCategory::data,
                  std::string("column ") + kColumnNames[static_cast<std::size_t>(c)] +
                      " length differs from timestamps");
  for (std::size_t i = 1; i < timestamps.size(); ++i)
    if (timestamps[i] <= timestamps[i - 1])
      throw Error(ErrorCategory::data, "station timestamps not strictly increasing");
}

std::vector<double> spline_fill(const std::vector<std::int64_t>& ts,
                                const std::vector<double>& v) {
  if (ts.size() != v.size())
    throw LengthMismatch("spline_fill: timestamp/value lengths differ");

  std::vector<std::size_t> knot;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!missing(v[i])) knot.push_back(i);
  if (knot.size() < 2)
    throw TooFewKnots("spline fill needs at least 2 known samples, got " +
                      std::to_string(knot.size()));
  if (knot.size() == v.size()) return v;

  const std::size_t n = knot.size();
  std::vector<double> x(n), y(n), h(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = static_cast<double>(ts[knot[k]]);
    y[k] = v[knot[k]];
  }
  for (std::size_t k = 0; k + 1 < n; ++k) h[k] = x[k + 1] - x[k];

  // Natural spline: solve the tridiagonal system for the interior second
  // derivatives m[1..n-2]; m[0] = m[n-1] = 0.
  std::vector<double> m(n, 0.0);
  if (n > 2) {
    const std::size_t u = n - 2;  // unknown count
    std::vector<double> diag(u), rhs(u), upper(u);
    for (std::size_t k = 0; k < u; ++k) {
      diag[k] = 2.0 * (h[k] + h[k + 1]);
      upper[k] = h[k + 1];
      rhs[k] = 6.0 * ((y[k + 2] - y[k + 1]) / h[k + 1] - (y[k + 1] - y[k]) / h[k]);
    }
    for (std::size_t k = 1; k < u; ++k) {
      const double w = h[k] / diag[k - 1];  // subdiagonal of row k is h[k]
      diag[k] -= w * upper[k - 1];
      rhs[k] -= w * rhs[k - 1];
    }
    m[u] = rhs[u - 1] / diag[u - 1];
    for (std::size_t k = u - 1; k >= 1; --k)
      m[k] = (rhs[k - 1] - upper[k - 1] * m[k + 1]) / diag[k - 1];
  }

  std::vector<double> out = v;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!missing(v[i])) continue;
    const double t = static_cast<double>(ts[i]);
    if (t <= x.front()) {
      out[i] = y.front();
      continue;
    }
    if (t >= x.back()) {
      out[i] = y.back();
      continue;
    }
    const std::size_t s =
        static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) -
                                 x.begin()) - 1;  // x[s] <= t < x[s+1]
    const double dl = x[s + 1] - t, dr = t - x[s];
    out[i] = m[s] * dl * dl * dl / (6.0 * h[s]) +
             m[s + 1] * dr * dr * dr / (6.0 * h[s]) +
             (y[s] / h[s] - m[s] * h[s] / 6.0) * dl +
             (y[s + 1] / h[s] - m[s + 1] * h[s] / 6.0) * dr;
  }
  return out;
}

std::pair<double, double> wind_decompose(double speed_mph, double dir_deg) {
  if (speed_mph < 0)
    throw NegativeSpeed("wind speed must be non-negative, got " +
                        std::to_string(speed_mph));
  const double rad = dir_deg * kPi / 180.0;
  return {-speed_mph * std::sin(rad), -speed_mph * std::cos(rad)};
}

std::pair<double, double> wind_reconstitute(double u_mph, double v_mph) {
  const double speed = std::sqrt(u_mph * u_mph + v_mph * v_mph);
  if (speed == 0.0) return {0.0, 0.0};
  double deg = std::atan2(-u_mph, -v_mph) * 180.0 / kPi;
  deg = std::fmod(deg + 360.0, 360.0);
  if (deg == 360.0) deg = 0.0;
  return {speed, deg};
}

StationSeries wind_fill(const StationSeries& series) {
  const auto& speed = series.columns[kWindSpeedAvg];
  const auto& dir = series.columns[kWindDir];
  const std::size_t n = series.n_rows();

  bool any_gap = false;
  std::vector<double> u(n, kNaN), v(n, kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    if (missing(speed[i]) || missing(dir[i])) {
      any_gap = true;
      continue;
    }
    std::tie(u[i], v[i]) = wind_decompose(speed[i], dir[i]);
  }
  if (!any_gap) return series;

  u = spline_fill(series.timestamps, u);
  v = spline_fill(series.timestamps, v);

  StationSeries out = series;
  auto& out_speed = out.columns[kWindSpeedAvg];
  auto& out_dir = out.columns[kWindDir];
  for (std::size_t i = 0; i < n; ++i) {
    if (!missing(speed[i]) && !missing(dir[i])) continue;
    const auto [s, d] = wind_reconstitute(u[i], v[i]);
    if (missing(speed[i])) out_speed[i] = s;
    if (missing(dir[i])) out_dir[i] = d;
  }
  return out;
}

std::vector<double> fill_precip(const std::vector<std::int64_t>& ts,
                                const std::vector<double>& v,
                                double window_hours) {
  if (ts.size() != v.size())
    throw LengthMismatch("fill_precip: timestamp/value lengths differ");
  const auto half_window =
      static_cast<std::int64_t>(std::llround(window_hours * 3600.0 / 2.0));

  // wet_prefix[k] = count of non-missing positive samples among rows < k.
  std::vector<std::size_t> wet_prefix(v.size() + 1, 0);
  for (std::size_t i = 0; i < v.size(); ++i)
    wet_prefix[i + 1] = wet_prefix[i] + (!missing(v[i]) && v[i] > 0.0 ? 1u : 0u);

  std::vector<double> out = v;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!missing(v[i])) continue;
    const auto lo = static_cast<std::size_t>(
        std::lower_bound(ts.begin(), ts.end(), ts[i] - half_window) - ts.begin());
    const auto hi = static_cast<std::size_t>(
        std::upper_bound(ts.begin(), ts.end(), ts[i] + half_window) - ts.begin());
    const bool active = wet_prefix[hi] > wet_prefix[lo];
    if (!active) {
      out[i] = 0.0;
      continue;
    }
    std::size_t prev = i, next = i;
    while (prev > 0 && missing(v[prev - 1])) --prev;
    prev = (prev > 0) ? prev - 1 : v.size();
    while (next + 1 < v.size() && missing(v[next + 1])) ++next;
    next = (next + 1 < v.size()) ? next + 1 : v.size();
    if (prev == v.size() && next == v.size()) {
      out[i] = 0.0;  // unreachable when active, kept for safety
    } else if (prev == v.size()) {
      out[i] = v[next];
    } else if (next == v.size()) {
      out[i] = v[prev];
    } else {
      const double w = static_cast<double>(ts[i] - ts[prev]) /
                       static_cast<double>(ts[next] - ts[prev]);
      out[i] = v[prev] + (v[next] - v[prev]) * w;
    }
  }
  return out;
}

StationSeries precip_contextual_fill(const StationSeries& series,
                                     double window_hours) {
  StationSeries out = series;
  out.columns[kPrecip] = fill_precip(series.timestamps, series.columns[kPrecip],
                                     window_hours);
  return out;
}

namespace {

// max >= avg >= min triple at column indices (i_max, i_min, i_avg).
struct Triple {
  int i_max, i_min, i_avg;
  const char* label;
};
constexpr Triple kTriples[] = {
    {0, 1, 2, "temp order"},
    {3, 4, 5, "humidity order"},
};
// gust >= speed per aggregate kind: (gust column, speed column).
constexpr std::pair<int, int> kGustPairs[] = {{16, 13}, {17, 14}, {18, 15}};
constexpr const char* kGustLabels[] = {"gust_max >= speed_max",
                                       "gust_min >= speed_min",
                                       "gust_avg >= speed_avg"};

double wrap_degrees(double d) {
  double w = std::fmod(std::fmod(d, 360.0) + 360.0, 360.0);
  if (w == 360.0) w = 0.0;
  return w;
}

}  // namespace

std::pair<StationSeries, ViolationReport> validate_physical(
    const StationSeries& series, bool repair) {
  StationSeries out = series;
  ViolationReport report;
  const std::size_t n = series.n_rows();

  auto record = [&](std::size_t row, const std::string& constraint) {
    report.items.push_back({row, series.timestamps[row], constraint});
  };

  for (std::size_t r = 0; r < n; ++r) {
    for (const Triple& t : kTriples) {
      double& hi = out.columns[static_cast<std::size_t>(t.i_max)][r];
      double& lo = out.columns[static_cast<std::size_t>(t.i_min)][r];
      double& mid = out.columns[static_cast<std::size_t>(t.i_avg)][r];
      if (missing(hi) || missing(lo) || missing(mid)) continue;
      if (hi >= mid && mid >= lo) continue;
      record(r, t.label);
      if (repair) {
        double s[3] = {hi, mid, lo};
        std::sort(s, s + 3, std::greater<>());
        hi = s[0];
        mid = s[1];
        lo = s[2];
      }
    }
    for (std::size_t p = 0; p < 3; ++p) {
      double& gust = out.columns[static_cast<std::size_t>(kGustPairs[p].first)][r];
      const double speed =
          out.columns[static_cast<std::size_t>(kGustPairs[p].second)][r];
      if (missing(gust) || missing(speed) || gust >= speed) continue;
      record(r, kGustLabels[p]);
      if (repair) gust = std::max(gust, speed);
    }
    for (int c : {3, 4, 5}) {
      double& rh = out.columns[static_cast<std::size_t>(c)][r];
      if (missing(rh) || (rh >= 0.0 && rh <= 100.0)) continue;
      record(r, std::string(kColumnNames[static_cast<std::size_t>(c)]) + " range");
      if (repair) rh = std::clamp(rh, 0.0, 100.0);
    }
    {
      double& d = out.columns[kWindDir][r];
      if (!missing(d) && !(d >= 0.0 && d < 360.0)) {
        record(r, "wind_dir range");
        if (repair) d = wrap_degrees(d);
      }
    }
    {
      double& p = out.columns[kPrecip][r];
      if (!missing(p) && p < 0.0) {
        record(r, "precip range");
        if (repair) p = 0.0;
      }
    }
  }
  return {std::move(out), std::move(report)};
}

StationSeries fill_all(const StationSeries& series, double precip_window_hours) {
  series.validate();
  StationSeries out = series;
  for (int c = 0; c < kNumColumns; ++c) {
    if (c == kWindDir || c == kWindSpeedAvg || c == kPrecip) continue;
    auto& col = out.columns[static_cast<std::size_t>(c)];
    const bool has_gap = std::any_of(col.begin(), col.end(),
                                     [](double x) { return missing(x); });
    if (has_gap) col = spline_fill(out.timestamps, col);
  }
  out = wind_fill(out);
  out = precip_contextual_fill(out, precip_window_hours);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (s.empty()) return kNaN;
  std::size_t pos = 0;
  double val;
  try {
    val = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw IoError(where + ": cannot parse value '" + s + "'");
  }
  if (pos != s.size()) throw IoError(where + ": cannot parse value '" + s + "'");
  return val;
}

}  // namespace

StationSeries read_pws_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  const std::string where_base = path.string();

  std::string line;
  if (!std::getline(in, line)) throw IoError(where_base + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() != kNumColumns + 1)
    throw IoError(where_base + ": expected 21 header columns, got " +
                  std::to_string(header.size()));

  // Column order is free but the set must be exactly ts_utc + the 20 names.
  int ts_pos = -1;
  std::array<int, kNumColumns> col_pos;
  col_pos.fill(-1);
  for (std::size_t p = 0; p < header.size(); ++p) {
    const std::string name = trim(header[p]);
    if (name == "ts_utc") {
      if (ts_pos >= 0) throw IoError(where_base + ": duplicate ts_utc column");
      ts_pos = static_cast<int>(p);
      continue;
    }
    const int c = [&] {
      try {
        return column_index(name);
      } catch (const Error&) {
        throw IoError(where_base + ": unknown column '" + name + "'");
      }
    }();
    if (col_pos[static_cast<std::size_t>(c)] >= 0)
      throw IoError(where_base + ": duplicate column '" + name + "'");
    col_pos[static_cast<std::size_t>(c)] = static_cast<int>(p);
  }
  if (ts_pos < 0) throw IoError(where_base + ": missing ts_utc column");

  StationSeries series;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = where_base + ":" + std::to_string(lineno);
    if (fields.size() != header.size())
      throw IoError(where + ": expected " + std::to_string(header.size()) +
                    " fields, got " + std::to_string(fields.size()));
    std::int64_t ts;
    try {
      ts = timeutil::parse_iso8601(trim(fields[static_cast<std::size_t>(ts_pos)]));
    } catch (const Error& e) {
      throw IoError(where + ": " + e.what());
    }
    if (!series.timestamps.empty() && ts <= series.timestamps.back())
      throw IoError(where + ": timestamps not strictly increasing");
    series.timestamps.push_back(ts);
    for (int c = 0; c < kNumColumns; ++c)
      series.columns[static_cast<std::size_t>(c)].push_back(parse_cell(
          fields[static_cast<std::size_t>(col_pos[static_cast<std::size_t>(c)])],
          where));
  }
  return series;
}

void write_pws_csv(const std::filesystem::path& path, const StationSeries& series) {
  series.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  out << "ts_utc";
  for (const char* name : kColumnNames) out << ',' << name;
  out << '\n';

  char buf[64];
  for (std::size_t r = 0; r < series.n_rows(); ++r) {
    out << timeutil::format_iso8601(series.timestamps[r]);
    for (int c = 0; c < kNumColumns; ++c) {
      const double v = series.columns[static_cast<std::size_t>(c)][r];
      out << ',';
      if (!missing(v)) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_violation_report(const std::filesystem::path& path,
                            const ViolationReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "violations: " << report.count() << '\n';
  for (const auto& item : report.items)
    out << "row=" << item.row << " ts=" << timeutil::format_iso8601(item.timestamp)
        << " constraint=" << item.constraint << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace m3r::stationproc
