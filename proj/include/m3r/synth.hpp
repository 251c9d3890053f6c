#pragma once

#include <cstdint>
#include <vector>

#include "m3r/gridproc.hpp"
#include "m3r/stationproc.hpp"

// Seeded synthetic radar/station scenes with a recoverable radar-to-rainfall
// relationship, used for pipeline demos and the end-to-end training tests.

namespace m3r::synth {

/// First radar timestamp (2022-06-01T00:00:00Z), a multiple of the radar
/// cadence so regularized series start exactly here.
inline constexpr std::int64_t kStartTimestamp = 1654041600;
inline constexpr std::int64_t kRadarCadenceSeconds = 900;
/// Station rows are offset from the radar clock so synchronization distances
/// are nonzero but well inside the matching tolerance.
inline constexpr std::int64_t kPwsPhaseSeconds = 120;

struct SynthSpec {
  std::uint64_t seed = 0;
  int n_steps = 64;
  int grid_ny = 16;
  int grid_nx = 16;
  int storm_count = 3;
  double advect_vx = 0.35;  // cells per radar step, columns
  double advect_vy = 0.20;  // cells per radar step, rows
  double noise_std = 1.0;   // dBZ, per cell per elevation
  std::int64_t pws_cadence_seconds = 300;
  double gap_fraction = 0.1;  // fraction of station rows blanked

  void validate() const;
};

/// One advecting Gaussian blob. Intensity pulses between 50% and 100% of
/// amp with the given period (radar steps) and phase.
struct Storm {
  double cy0 = 0.0, cx0 = 0.0;  // start center, cells
  double amp = 0.0;             // peak dBZ
  double sigma = 0.0;           // cells
  double period = 0.0;          // steps
  double phase = 0.0;           // radians
};

/// The storm population drawn for a spec; gen_radar uses exactly these, so
/// callers can check generated fields against the closed-form blob shape.
std::vector<Storm> sample_storms(const SynthSpec& spec);

/// Synthetic cell coordinates shared by generator and consumers.
double cell_lat(int i);
double cell_lon(int j);

/// n_steps volumes at the radar cadence: summed storm Gaussians with torus
/// wraparound, four elevation levels scaled by {1.0, 0.9, 0.8, 0.7} plus
/// seeded noise, clamped to [0, 70] dBZ. Cells untouched by any storm stay
/// exactly zero.
std::vector<gridproc::GriddedVolume> gen_radar(const SynthSpec& spec);

/// Station series covering the radar span at the station cadence:
/// precip_rate is the rainfall conversion of the composite reflectivity at
/// the station cell (time-interpolated) plus clipped noise; the other 19
/// variables are smooth seeded processes that satisfy the physical
/// constraints by construction. gap_fraction of the rows are fully blanked.
stationproc::StationSeries gen_pws(const SynthSpec& spec,
                                   const std::vector<gridproc::GriddedVolume>& radar,
                                   int cell_i, int cell_j);

}  // namespace m3r::synth
