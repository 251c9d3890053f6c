#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "m3r/common.hpp"

// Gridded-radar processing: nearest-cell lookup, ROI extraction, composite
// reflectivity and temporal regularization of irregular volume series.

namespace m3r::gridproc {

/// Multi-elevation Cartesian reflectivity snapshot. Reflectivity is dBZ with
/// NaN encoding missing cells; lat/lon are per-cell coordinate arrays.
struct GriddedVolume {
  std::int64_t timestamp = 0;  // seconds since Unix epoch (UTC), > 0
  int n_elev = 0;
  int ny = 0;
  int nx = 0;
  std::vector<double> lat;  // [ny*nx] row-major, degrees
  std::vector<double> lon;  // [ny*nx] row-major, degrees
  std::vector<float> refl;  // [n_elev*ny*nx] row-major, dBZ, NaN = missing

  double lat_at(int i, int j) const { return lat[static_cast<std::size_t>(i) * nx + j]; }
  double lon_at(int i, int j) const { return lon[static_cast<std::size_t>(i) * nx + j]; }
  float refl_at(int k, int i, int j) const {
    return refl[(static_cast<std::size_t>(k) * ny + i) * nx + j];
  }
  float& refl_at(int k, int i, int j) {
    return refl[(static_cast<std::size_t>(k) * ny + i) * nx + j];
  }

  /// Checks dimension consistency, coordinate ranges and the positive
  /// timestamp invariant; throws IoError on violation.
  void validate() const;
};

/// Single 2-D composite reflectivity field; NaN = missing.
struct CompositeFrame {
  std::int64_t timestamp = 0;
  int ny = 0;
  int nx = 0;
  std::vector<float> z;  // [ny*nx] row-major, dBZ

  float at(int i, int j) const { return z[static_cast<std::size_t>(i) * nx + j]; }
  float& at(int i, int j) { return z[static_cast<std::size_t>(i) * nx + j]; }
};

/// Time-ordered composite frames; step_seconds > 0 once regularized.
struct FrameSeries {
  std::vector<CompositeFrame> frames;
  std::int64_t step_seconds = 0;
};

struct GridIndex {
  int i = 0;
  int j = 0;
  bool operator==(const GridIndex&) const = default;
};

/// Index of the grid cell minimizing sqrt((lon-lon_t)^2 + (lat-lat_t)^2) in
/// raw degrees. Ties break toward the smallest i, then smallest j. Throws
/// TargetOutsideGrid when the target lies outside the coordinate bounding box.
GridIndex nearest_grid_point(const GriddedVolume& vol, double target_lat,
                             double target_lon);

/// Sub-volume of rows [center.i - size/2, center.i + size/2) and the same
/// column range; coordinate arrays are sliced identically. Throws
/// RoiOutOfBounds when the margin is insufficient.
GriddedVolume extract_roi(const GriddedVolume& vol, GridIndex center,
                          int size = 100);

/// Cell-wise maximum over the four lowest elevation levels (all levels when
/// fewer than four exist). NaN cells are skipped; a cell is NaN only if every
/// contributing level is NaN.
CompositeFrame composite_reflectivity(const GriddedVolume& vol);

/// Piecewise-linear resampling of an irregular frame sequence onto a regular
/// grid. The output grid starts at the first input timestamp rounded up to a
/// multiple of step_seconds from the epoch and ends at the last input
/// timestamp; NaN in either bracketing cell propagates. Throws
/// InsufficientFrames when fewer than two inputs are given.
FrameSeries temporal_regularize(const std::vector<CompositeFrame>& frames,
                                std::int64_t step_seconds = 900);

// GVOL container: "GVOL", u32 version=1, i64 timestamp, u32 n_elev/ny/nx,
// f64 lat[ny*nx], f64 lon[ny*nx], f32 refl[n_elev*ny*nx]; little-endian, one
// volume per file.
GriddedVolume read_gvol(const std::filesystem::path& path);
void write_gvol(const std::filesystem::path& path, const GriddedVolume& vol);

}  // namespace m3r::gridproc
