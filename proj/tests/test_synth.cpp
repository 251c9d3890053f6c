#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "m3r/evalkit.hpp"
#include "m3r/stationproc.hpp"
#include "m3r/synth.hpp"

using namespace m3r;
using synth::SynthSpec;

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_cell(double c, int n) {
  double w = std::fmod(c, static_cast<double>(n));
  if (w < 0.0) w += n;
  return w;
}

double torus_dist(double a, double b, int n) {
  const double d = std::fabs(a - b);
  return std::min(d, n - d);
}

// Composite of one volume at one cell, recomputed here.
double composite_at(const gridproc::GriddedVolume& v, int i, int j) {
  double best = 0.0;
  for (int e = 0; e < v.n_elev; ++e) {
    const float z = v.refl_at(e, i, j);
    if (!std::isnan(z) && z > best) best = z;
  }
  return best;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

bool same_or_both_nan(double x, double y) {
  return (std::isnan(x) && std::isnan(y)) || x == y;
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("spec validation rejects out-of-range fields") {
  SynthSpec ok;
  CHECK_NOTHROW(ok.validate());

  auto bad = ok;
  bad.n_steps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.grid_ny = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.grid_nx = 4001;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.storm_count = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.noise_std = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.pws_cadence_seconds = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.gap_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.gap_fraction = -0.01;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("storm population is deterministic and within its documented ranges") {
  SynthSpec spec;
  spec.seed = 9;
  spec.storm_count = 50;
  const auto a = synth::sample_storms(spec);
  const auto b = synth::sample_storms(spec);
  REQUIRE(a.size() == 50);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].cy0 == b[k].cy0);
    CHECK(a[k].cx0 == b[k].cx0);
    CHECK(a[k].amp == b[k].amp);
    CHECK(a[k].sigma == b[k].sigma);
    CHECK(a[k].period == b[k].period);
    CHECK(a[k].phase == b[k].phase);

    CHECK(a[k].cy0 >= 0.0);
    CHECK(a[k].cy0 < spec.grid_ny);
    CHECK(a[k].cx0 >= 0.0);
    CHECK(a[k].cx0 < spec.grid_nx);
    CHECK(a[k].amp >= 30.0);
    CHECK(a[k].amp <= 45.0);
    CHECK(a[k].sigma >= 2.5);
    CHECK(a[k].sigma <= 4.5);
    CHECK(a[k].period >= 24.0);
    CHECK(a[k].period <= 56.0);
    CHECK(a[k].phase >= 0.0);
    CHECK(a[k].phase < 2.0 * kPi);
  }
}

TEST_CASE("zero storms produce an exactly silent scene") {
  SynthSpec spec;
  spec.storm_count = 0;
  spec.n_steps = 6;
  const auto vols = synth::gen_radar(spec);
  REQUIRE(vols.size() == 6);
  for (const auto& v : vols)
    for (float z : v.refl) CHECK(z == 0.0f);
}

TEST_CASE("radar volumes carry the fixed cadence, coordinates and shape") {
  SynthSpec spec;
  spec.n_steps = 5;
  const auto vols = synth::gen_radar(spec);
  REQUIRE(vols.size() == 5);
  for (std::size_t t = 0; t < vols.size(); ++t) {
    const auto& v = vols[t];
    CHECK(v.timestamp == synth::kStartTimestamp +
                             static_cast<std::int64_t>(t) *
                                 synth::kRadarCadenceSeconds);
    CHECK(v.n_elev == 4);
    CHECK(v.ny == 16);
    CHECK(v.nx == 16);
    CHECK_NOTHROW(v.validate());
    for (int i = 0; i < v.ny; ++i)
      for (int j = 0; j < v.nx; ++j) {
        CHECK(v.lat_at(i, j) == synth::cell_lat(i));
        CHECK(v.lon_at(i, j) == synth::cell_lon(j));
      }
    for (float z : v.refl) {
      CHECK(z >= 0.0f);
      CHECK(z <= 70.0f);
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  SynthSpec spec;
  spec.seed = 21;
  spec.n_steps = 12;
  const auto a = synth::gen_radar(spec);
  const auto b = synth::gen_radar(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].timestamp == b[t].timestamp);
    CHECK(a[t].refl == b[t].refl);
  }
  auto other = spec;
  other.seed = 22;
  const auto c = synth::gen_radar(other);
  bool differs = false;
  for (std::size_t t = 0; t < a.size() && !differs; ++t)
    differs = a[t].refl != c[t].refl;
  CHECK(differs);
}

TEST_CASE("noise-free fields equal the advecting Gaussian formula pointwise") {
  SynthSpec spec;
  spec.seed = 4;
  spec.storm_count = 1;
  spec.noise_std = 0.0;
  spec.advect_vx = 0.5;
  spec.advect_vy = 0.25;
  spec.n_steps = 20;
  const auto storms = synth::sample_storms(spec);
  REQUIRE(storms.size() == 1);
  const auto& s = storms[0];
  const auto vols = synth::gen_radar(spec);
  const double factors[4] = {1.0, 0.9, 0.8, 0.7};

  for (int t = 0; t < spec.n_steps; t += 3) {
    const auto& v = vols[static_cast<std::size_t>(t)];
    const double pulse = 0.75 + 0.25 * std::sin(2.0 * kPi * t / s.period + s.phase);
    const double cy = wrap_cell(s.cy0 + spec.advect_vy * t, spec.grid_ny);
    const double cx = wrap_cell(s.cx0 + spec.advect_vx * t, spec.grid_nx);
    for (int e = 0; e < 4; ++e)
      for (int i = 0; i < spec.grid_ny; ++i)
        for (int j = 0; j < spec.grid_nx; ++j) {
          const double dy = torus_dist(i, cy, spec.grid_ny);
          const double dx = torus_dist(j, cx, spec.grid_nx);
          const double blob =
              s.amp * pulse * std::exp(-(dx * dx + dy * dy) / (2.0 * s.sigma * s.sigma));
          const double expect = std::clamp(factors[e] * blob, 0.0, 70.0);
          CHECK(v.refl_at(e, i, j) ==
                doctest::Approx(expect).epsilon(1e-5));
        }
  }
}

TEST_CASE("elevation levels are scaled copies when noise is off") {
  SynthSpec spec;
  spec.seed = 13;
  spec.noise_std = 0.0;
  spec.n_steps = 4;
  const auto vols = synth::gen_radar(spec);
  const double factors[4] = {1.0, 0.9, 0.8, 0.7};
  for (const auto& v : vols)
    for (int e = 1; e < 4; ++e)
      for (int i = 0; i < v.ny; ++i)
        for (int j = 0; j < v.nx; ++j) {
          const double base = v.refl_at(0, i, j);
          if (base == 0.0 || base >= 70.0) continue;
          CHECK(v.refl_at(e, i, j) ==
                doctest::Approx(factors[e] * base).epsilon(1e-5));
        }
}

TEST_CASE("station rows follow the phased cadence over the radar span") {
  SynthSpec spec;
  spec.n_steps = 10;
  spec.pws_cadence_seconds = 300;
  spec.gap_fraction = 0.0;
  const auto radar = synth::gen_radar(spec);
  const auto pws = synth::gen_pws(spec, radar, 8, 8);

  const std::int64_t t0 = radar.front().timestamp;
  const std::int64_t t_last = radar.back().timestamp;
  const std::size_t expect_rows =
      static_cast<std::size_t>((t_last - t0 - synth::kPwsPhaseSeconds) / 300) + 1;
  REQUIRE(pws.n_rows() == expect_rows);
  for (std::size_t r = 0; r < pws.n_rows(); ++r) {
    CHECK(pws.timestamps[r] ==
          t0 + synth::kPwsPhaseSeconds + static_cast<std::int64_t>(r) * 300);
    CHECK(pws.timestamps[r] <= t_last);
  }
  CHECK_NOTHROW(pws.validate());
}

TEST_CASE("ungapped station output is physically consistent and complete") {
  SynthSpec spec;
  spec.seed = 31;
  spec.n_steps = 48;
  spec.gap_fraction = 0.0;
  const auto radar = synth::gen_radar(spec);
  const auto pws = synth::gen_pws(spec, radar, 5, 11);

  for (const auto& col : pws.columns)
    for (double v : col) CHECK_FALSE(std::isnan(v));

  const auto [repaired, report] = stationproc::validate_physical(pws, false);
  CHECK(report.count() == 0);
}

TEST_CASE("silent radar keeps station precipitation near zero") {
  SynthSpec spec;
  spec.storm_count = 0;
  spec.noise_std = 0.0;
  spec.n_steps = 12;
  spec.gap_fraction = 0.0;
  const auto radar = synth::gen_radar(spec);
  const auto pws = synth::gen_pws(spec, radar, 3, 3);
  // 0 dBZ converts to (1/200)^(1/1.6), about 0.036 mm/hr, and noise is off
  const double floor_rate = evalkit::zr_rainfall(0.0);
  for (double p : pws.column("precip_rate")) {
    CHECK(p == doctest::Approx(floor_rate).epsilon(1e-9));
    CHECK(p < 0.05);
  }
}

TEST_CASE("station precipitation tracks the local composite reflectivity") {
  SynthSpec spec;
  spec.seed = 5;
  spec.n_steps = 96;
  spec.gap_fraction = 0.0;
  const auto radar = synth::gen_radar(spec);
  const int ci = 8, cj = 8;
  const auto pws = synth::gen_pws(spec, radar, ci, cj);

  // reflectivity at each station row, re-interpolated here from the volumes
  std::vector<double> z_at_row;
  for (std::int64_t ts : pws.timestamps) {
    std::size_t k = 0;
    while (k + 2 < radar.size() && radar[k + 1].timestamp <= ts) ++k;
    const double tl = static_cast<double>(radar[k].timestamp);
    const double tr = static_cast<double>(radar[k + 1].timestamp);
    const double w = (static_cast<double>(ts) - tl) / (tr - tl);
    const double zl = composite_at(radar[k], ci, cj);
    const double zr = composite_at(radar[k + 1], ci, cj);
    z_at_row.push_back(zl + (zr - zl) * w);
  }
  CHECK(pearson(pws.column("precip_rate"), z_at_row) > 0.5);
}

TEST_CASE("gap blanking hits whole rows at roughly the requested rate") {
  SynthSpec spec;
  spec.seed = 17;
  spec.n_steps = 64;
  spec.gap_fraction = 0.5;
  const auto radar = synth::gen_radar(spec);
  const auto pws = synth::gen_pws(spec, radar, 8, 8);

  std::size_t blanked = 0;
  for (std::size_t r = 0; r < pws.n_rows(); ++r) {
    bool any_nan = false, all_nan = true;
    for (const auto& col : pws.columns) {
      if (std::isnan(col[r]))
        any_nan = true;
      else
        all_nan = false;
    }
    CHECK(any_nan == all_nan);  // dropouts blank the entire row
    if (all_nan) ++blanked;
  }
  const double rate = static_cast<double>(blanked) /
                      static_cast<double>(pws.n_rows());
  CHECK(rate > 0.3);
  CHECK(rate < 0.7);

  // the gap pattern is part of the deterministic output
  const auto again = synth::gen_pws(spec, radar, 8, 8);
  REQUIRE(again.n_rows() == pws.n_rows());
  for (std::size_t r = 0; r < pws.n_rows(); ++r)
    for (int c = 0; c < stationproc::kNumColumns; ++c)
      CHECK(same_or_both_nan(pws.columns[static_cast<std::size_t>(c)][r],
                             again.columns[static_cast<std::size_t>(c)][r]));
}

TEST_CASE("station generation rejects bad cells and empty input") {
  SynthSpec spec;
  spec.n_steps = 10;
  const auto radar = synth::gen_radar(spec);
  CHECK_THROWS_AS(synth::gen_pws(spec, radar, -1, 0), CellOutOfBounds);
  CHECK_THROWS_AS(synth::gen_pws(spec, radar, 16, 0), CellOutOfBounds);
  CHECK_THROWS_AS(synth::gen_pws(spec, radar, 0, 16), CellOutOfBounds);
  CHECK_THROWS_AS(synth::gen_pws(spec, {}, 0, 0), EmptyInput);
}

TEST_SUITE_END();
