#include "m3r/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "m3r/common.hpp"
#include "m3r/evalkit.hpp"

namespace m3r::synth {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kElevationFactors[4] = {1.0, 0.9, 0.8, 0.7};
// Station noise is additive on the rainfall rate, scaled down from the
// reflectivity noise level so light rain is not drowned out.
constexpr double kPrecipNoiseFraction = 0.1;

// Explicit Box-Muller on top of mt19937_64 so streams are byte-identical
// across platforms and standard library versions.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// First-order autoregressive drift around zero.
struct Ar1 {
  double rho;
  double scale;
  double x = 0.0;

  double step(GaussianRng& rng) {
    x = rho * x + scale * rng.normal();
    return x;
  }
};

double wrap_cell(double c, int n) {
  double w = std::fmod(c, static_cast<double>(n));
  if (w < 0.0) w += static_cast<double>(n);
  return w;
}

// Shortest displacement on the wraparound axis.
double torus_dist(double a, double b, int n) {
  double d = std::fabs(a - b);
  return std::min(d, static_cast<double>(n) - d);
}

}  // namespace

void SynthSpec::validate() const {
  if (n_steps < 1) throw ConfigError("synth n_steps must be >= 1");
  if (grid_ny < 8 || grid_nx < 8)
    throw ConfigError("synth grid must be at least 8x8");
  if (grid_ny > 4000 || grid_nx > 4000)
    throw ConfigError("synth grid dimension exceeds 4000");
  if (storm_count < 0) throw ConfigError("synth storm_count must be >= 0");
  if (noise_std < 0.0) throw ConfigError("synth noise_std must be >= 0");
  if (pws_cadence_seconds < 1)
    throw ConfigError("synth pws_cadence_seconds must be >= 1");
  if (!(gap_fraction >= 0.0 && gap_fraction < 1.0))
    throw ConfigError("synth gap_fraction must be in [0, 1)");
}

double cell_lat(int i) { return 30.0 + 0.01 * i; }
double cell_lon(int j) { return -90.0 + 0.01 * j; }

std::vector<Storm> sample_storms(const SynthSpec& spec) {
  spec.validate();
  GaussianRng rng(spec.seed);
  std::vector<Storm> storms(static_cast<std::size_t>(spec.storm_count));
  for (Storm& s : storms) {
    s.cy0 = rng.uniform() * spec.grid_ny;
    s.cx0 = rng.uniform() * spec.grid_nx;
    s.amp = 30.0 + 15.0 * rng.uniform();
    s.sigma = 2.5 + 2.0 * rng.uniform();
    s.period = 24.0 + 32.0 * rng.uniform();
    s.phase = 2.0 * kPi * rng.uniform();
  }
  return storms;
}

std::vector<gridproc::GriddedVolume> gen_radar(const SynthSpec& spec) {
  const std::vector<Storm> storms = sample_storms(spec);
  // Noise gets its own stream so the storm population depends only on the
  // seed, not on how many noise draws preceded it.
  GaussianRng noise(spec.seed ^ 0x9e3779b97f4a7c15ULL);

  const int ny = spec.grid_ny;
  const int nx = spec.grid_nx;
  const std::size_t cells = static_cast<std::size_t>(ny) * nx;

  std::vector<double> lat(cells), lon(cells);
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < nx; ++j) {
      lat[static_cast<std::size_t>(i) * nx + j] = cell_lat(i);
      lon[static_cast<std::size_t>(i) * nx + j] = cell_lon(j);
    }

  std::vector<gridproc::GriddedVolume> out;
  out.reserve(static_cast<std::size_t>(spec.n_steps));
  std::vector<double> base(cells);

  for (int t = 0; t < spec.n_steps; ++t) {
    std::fill(base.begin(), base.end(), 0.0);
    for (const Storm& s : storms) {
      const double pulse =
          0.75 + 0.25 * std::sin(2.0 * kPi * t / s.period + s.phase);
      const double cy = wrap_cell(s.cy0 + spec.advect_vy * t, ny);
      const double cx = wrap_cell(s.cx0 + spec.advect_vx * t, nx);
      const double inv2s2 = 1.0 / (2.0 * s.sigma * s.sigma);
      for (int i = 0; i < ny; ++i) {
        const double dy = torus_dist(static_cast<double>(i), cy, ny);
        for (int j = 0; j < nx; ++j) {
          const double dx = torus_dist(static_cast<double>(j), cx, nx);
          base[static_cast<std::size_t>(i) * nx + j] +=
              s.amp * pulse * std::exp(-(dx * dx + dy * dy) * inv2s2);
        }
      }
    }

    gridproc::GriddedVolume vol;
    vol.timestamp = kStartTimestamp + static_cast<std::int64_t>(t) * kRadarCadenceSeconds;
    vol.n_elev = 4;
    vol.ny = ny;
    vol.nx = nx;
    vol.lat = lat;
    vol.lon = lon;
    vol.refl.resize(4 * cells);
    for (int e = 0; e < 4; ++e)
      for (std::size_t c = 0; c < cells; ++c) {
        const double n = noise.normal() * spec.noise_std;
        // Untouched cells stay exactly zero instead of picking up noise.
        double z = base[c] == 0.0 ? 0.0 : kElevationFactors[e] * base[c] + n;
        z = std::clamp(z, 0.0, 70.0);
        vol.refl[static_cast<std::size_t>(e) * cells + c] = static_cast<float>(z);
      }
    vol.validate();
    out.push_back(std::move(vol));
  }
  return out;
}

namespace {

// Composite (max over elevations) at one cell of one volume.
double cell_composite(const gridproc::GriddedVolume& vol, int i, int j) {
  double best = 0.0;
  for (int e = 0; e < vol.n_elev; ++e) {
    const float v = vol.refl_at(e, i, j);
    if (!std::isnan(v) && v > best) best = v;
  }
  return best;
}

}  // namespace

stationproc::StationSeries gen_pws(const SynthSpec& spec,
                                   const std::vector<gridproc::GriddedVolume>& radar,
                                   int cell_i, int cell_j) {
  spec.validate();
  if (radar.empty()) throw EmptyInput("gen_pws radar volumes");
  const gridproc::GriddedVolume& first = radar.front();
  if (cell_i < 0 || cell_i >= first.ny || cell_j < 0 || cell_j >= first.nx)
    throw CellOutOfBounds("station cell (" + std::to_string(cell_i) + ", " +
                          std::to_string(cell_j) + ") outside " +
                          std::to_string(first.ny) + "x" +
                          std::to_string(first.nx) + " grid");

  // Reflectivity trace at the station, one knot per volume.
  const std::size_t nv = radar.size();
  std::vector<double> zt(nv);
  for (std::size_t k = 0; k < nv; ++k) zt[k] = cell_composite(radar[k], cell_i, cell_j);

  GaussianRng rng(spec.seed + 1);
  const double phase_temp = 2.0 * kPi * rng.uniform();
  const double phase_hum = 2.0 * kPi * rng.uniform();
  const double phase_pres = 2.0 * kPi * rng.uniform();
  const double phase_dir = 2.0 * kPi * rng.uniform();
  const double phase_speed = 2.0 * kPi * rng.uniform();

  Ar1 ar_temp{0.95, 0.3};
  Ar1 ar_spread_hi{0.9, 0.4};
  Ar1 ar_spread_lo{0.9, 0.4};
  Ar1 ar_hum{0.95, 0.8};
  Ar1 ar_hum_spread{0.9, 0.5};
  Ar1 ar_dew{0.95, 0.3};
  Ar1 ar_pres{0.95, 0.5};
  Ar1 ar_dir{0.9, 1.0};
  Ar1 ar_speed{0.9, 0.5};
  Ar1 ar_speed_spread{0.9, 0.4};
  Ar1 ar_gust{0.9, 0.4};

  stationproc::StationSeries out;
  const std::int64_t t0 = radar.front().timestamp;
  const std::int64_t t_last = radar.back().timestamp;
  std::size_t bracket = 0;

  for (std::int64_t ts = t0 + kPwsPhaseSeconds; ts <= t_last;
       ts += spec.pws_cadence_seconds) {
    out.timestamps.push_back(ts);
    const std::size_t r = out.timestamps.size() - 1;
    for (auto& col : out.columns) col.resize(r + 1);

    // Piecewise-linear reflectivity at this instant.
    while (bracket + 2 < nv && radar[bracket + 1].timestamp <= ts) ++bracket;
    const double tl = static_cast<double>(radar[bracket].timestamp);
    const double tr = static_cast<double>(radar[bracket + 1 < nv ? bracket + 1 : bracket].timestamp);
    double z;
    if (tr == tl) {
      z = zt[bracket];
    } else {
      const double w = (static_cast<double>(ts) - tl) / (tr - tl);
      z = zt[bracket] + (zt[bracket + 1] - zt[bracket]) * w;
    }

    const double day = 2.0 * kPi * static_cast<double>(ts - kStartTimestamp) / 86400.0;

    const double temp_avg = 68.0 + 12.0 * std::sin(day + phase_temp) + ar_temp.step(rng);
    const double spread_hi = 1.0 + std::fabs(ar_spread_hi.step(rng));
    const double spread_lo = 1.0 + std::fabs(ar_spread_lo.step(rng));
    out.columns[0][r] = temp_avg + spread_hi;
    out.columns[1][r] = temp_avg - spread_lo;
    out.columns[2][r] = temp_avg;

    const double hum_avg = std::clamp(
        62.0 + 25.0 * std::sin(day + phase_hum) + ar_hum.step(rng), 2.0, 98.0);
    const double hum_off = 1.0 + std::fabs(ar_hum_spread.step(rng));
    out.columns[3][r] = std::min(100.0, hum_avg + hum_off);
    out.columns[4][r] = std::max(0.0, hum_avg - hum_off);
    out.columns[5][r] = hum_avg;

    const double dew_shift = -18.0 + ar_dew.step(rng);
    out.columns[6][r] = out.columns[0][r] + dew_shift;
    out.columns[7][r] = out.columns[1][r] + dew_shift;
    out.columns[8][r] = out.columns[2][r] + dew_shift;

    const double half_day = 2.0 * day;
    const double pres = 29.92 + 0.15 * std::sin(half_day + phase_pres) + 0.01 * ar_pres.step(rng);
    out.columns[9][r] = pres + 0.02;
    out.columns[10][r] = pres - 0.02;
    out.columns[11][r] = 0.3 * std::cos(half_day + phase_pres);

    const double six_hours = 4.0 * day;
    double dir = 210.0 + 50.0 * std::sin(six_hours + phase_dir) + 5.0 * ar_dir.step(rng);
    dir = std::fmod(dir, 360.0);
    if (dir < 0.0) dir += 360.0;
    out.columns[12][r] = dir;

    const double speed_avg =
        std::max(0.0, 9.0 + 5.0 * std::sin(six_hours + phase_speed) + ar_speed.step(rng));
    const double speed_off = 1.5 + std::fabs(ar_speed_spread.step(rng));
    const double gust_off = 2.0 + std::fabs(ar_gust.step(rng));
    out.columns[13][r] = speed_avg + speed_off;
    out.columns[14][r] = std::max(0.0, speed_avg - speed_off);
    out.columns[15][r] = speed_avg;
    out.columns[16][r] = out.columns[13][r] + gust_off;
    out.columns[17][r] = out.columns[14][r] + gust_off;
    out.columns[18][r] = out.columns[15][r] + gust_off;

    const double rain = evalkit::zr_rainfall(z) +
                        kPrecipNoiseFraction * spec.noise_std * rng.normal();
    out.columns[19][r] = std::max(0.0, rain);
  }

  // Blank whole rows to simulate station dropouts. A fresh stream keeps the
  // weather draws independent of the gap pattern.
  GaussianRng gaps(spec.seed + 2);
  for (std::size_t r = 0; r < out.timestamps.size(); ++r) {
    const double u = gaps.uniform();
    if (u < spec.gap_fraction)
      for (auto& col : out.columns) col[r] = std::numeric_limits<double>::quiet_NaN();
  }

  out.validate();
  return out;
}

}  // namespace m3r::synth
