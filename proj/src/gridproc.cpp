#include "m3r/gridproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "m3r/binio.hpp"

namespace m3r::gridproc {

void GriddedVolume::validate() const {
  if (n_elev < 1 || ny < 1 || nx < 1)
    throw ShapeMismatch("volume dimensions must be positive");
  const auto cells = static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx);
  if (lat.size() != cells || lon.size() != cells)
    throw ShapeMismatch("coordinate arrays do not match ny*nx");
  if (refl.size() != static_cast<std::size_t>(n_elev) * cells)
    throw ShapeMismatch("reflectivity array does not match n_elev*ny*nx");
  if (timestamp <= 0) throw Error(ErrorCategory::data, "timestamp must be positive");
  for (std::size_t c = 0; c < cells; ++c) {
    if (!(lat[c] >= -90.0 && lat[c] <= 90.0))
      throw Error(ErrorCategory::data, "latitude outside [-90, 90]");
    if (!(lon[c] >= -180.0 && lon[c] <= 180.0))
      throw Error(ErrorCategory::data, "longitude outside [-180, 180]");
  }
}

GridIndex nearest_grid_point(const GriddedVolume& vol, double target_lat,
                             double target_lon) {
  const auto cells = static_cast<std::size_t>(vol.ny) * vol.nx;
  if (cells == 0) throw TargetOutsideGrid("empty grid");

  double lat_lo = vol.lat[0], lat_hi = vol.lat[0];
  double lon_lo = vol.lon[0], lon_hi = vol.lon[0];
  for (std::size_t c = 1; c < cells; ++c) {
    lat_lo = std::min(lat_lo, vol.lat[c]);
    lat_hi = std::max(lat_hi, vol.lat[c]);
    lon_lo = std::min(lon_lo, vol.lon[c]);
    lon_hi = std::max(lon_hi, vol.lon[c]);
  }
  if (target_lat < lat_lo || target_lat > lat_hi || target_lon < lon_lo ||
      target_lon > lon_hi)
    throw TargetOutsideGrid("target (" + std::to_string(target_lat) + ", " +
                            std::to_string(target_lon) +
                            ") outside grid bounding box");

  // Row-major scan with strict improvement keeps the smallest i, then
  // smallest j, on exact distance ties.
  GridIndex best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < vol.ny; ++i) {
    for (int j = 0; j < vol.nx; ++j) {
      const double dlat = vol.lat_at(i, j) - target_lat;
      const double dlon = vol.lon_at(i, j) - target_lon;
      const double d2 = dlon * dlon + dlat * dlat;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = {i, j};
      }
    }
  }
  return best;
}

GriddedVolume extract_roi(const GriddedVolume& vol, GridIndex center, int size) {
  if (size < 1) throw RoiOutOfBounds("roi size must be positive");
  const int half = size / 2;
  const int i0 = center.i - half;
  const int j0 = center.j - half;
  if (i0 < 0 || j0 < 0 || i0 + size > vol.ny || j0 + size > vol.nx)
    throw RoiOutOfBounds("roi of size " + std::to_string(size) + " at (" +
                         std::to_string(center.i) + ", " +
                         std::to_string(center.j) + ") exceeds " +
                         std::to_string(vol.ny) + "x" + std::to_string(vol.nx) +
                         " grid");

  GriddedVolume out;
  out.timestamp = vol.timestamp;
  out.n_elev = vol.n_elev;
  out.ny = size;
  out.nx = size;
  out.lat.resize(static_cast<std::size_t>(size) * size);
  out.lon.resize(static_cast<std::size_t>(size) * size);
  out.refl.resize(static_cast<std::size_t>(vol.n_elev) * size * size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * size + j;
      out.lat[c] = vol.lat_at(i0 + i, j0 + j);
      out.lon[c] = vol.lon_at(i0 + i, j0 + j);
    }
  }
  for (int k = 0; k < vol.n_elev; ++k)
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        out.refl_at(k, i, j) = vol.refl_at(k, i0 + i, j0 + j);
  return out;
}

CompositeFrame composite_reflectivity(const GriddedVolume& vol) {
  const int levels = std::min(vol.n_elev, 4);
  if (vol.n_elev < 4)
    log_warn("compositing over " + std::to_string(vol.n_elev) +
             " elevation level(s); expected at least 4");

  CompositeFrame out;
  out.timestamp = vol.timestamp;
  out.ny = vol.ny;
  out.nx = vol.nx;
  out.z.assign(static_cast<std::size_t>(vol.ny) * vol.nx,
               std::numeric_limits<float>::quiet_NaN());
  for (int k = 0; k < levels; ++k) {
    for (int i = 0; i < vol.ny; ++i) {
      for (int j = 0; j < vol.nx; ++j) {
        const float v = vol.refl_at(k, i, j);
        if (std::isnan(v)) continue;
        float& z = out.at(i, j);
        if (std::isnan(z) || v > z) z = v;
      }
    }
  }
  return out;
}

FrameSeries temporal_regularize(const std::vector<CompositeFrame>& frames,
                                std::int64_t step_seconds) {
  if (frames.size() < 2)
    throw InsufficientFrames("temporal regularization needs at least 2 frames, got " +
                             std::to_string(frames.size()));
  if (step_seconds <= 0)
    throw Error(ErrorCategory::data, "step_seconds must be positive");
  const int ny = frames[0].ny, nx = frames[0].nx;
  const std::size_t cells = static_cast<std::size_t>(ny) * nx;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].ny != ny || frames[f].nx != nx || frames[f].z.size() != cells)
      throw ShapeMismatch("frame " + std::to_string(f) + " dimensions differ");
    if (f > 0 && frames[f].timestamp <= frames[f - 1].timestamp)
      throw Error(ErrorCategory::data, "frame timestamps not strictly increasing");
  }

  // First output time: first input timestamp rounded up to a multiple of
  // step_seconds from the epoch, so series from separate files share a grid.
  const std::int64_t t_first = frames.front().timestamp;
  const std::int64_t t_last = frames.back().timestamp;
  std::int64_t q = t_first / step_seconds;
  if (q * step_seconds < t_first) ++q;
  const std::int64_t start = q * step_seconds;

  FrameSeries out;
  out.step_seconds = step_seconds;
  std::size_t lo = 0;  // invariant: frames[lo].timestamp <= t < frames[lo+1].timestamp
  for (std::int64_t t = start; t <= t_last; t += step_seconds) {
    while (lo + 2 < frames.size() && frames[lo + 1].timestamp <= t) ++lo;

    // Exact hits copy the input frame, preserving values and NaN pattern.
    const bool hit_lo = frames[lo].timestamp == t;
    const bool hit_hi = frames[lo + 1].timestamp == t;
    if (hit_lo || hit_hi) {
      out.frames.push_back(frames[hit_lo ? lo : lo + 1]);
      out.frames.back().timestamp = t;
      continue;
    }

    const CompositeFrame& a = frames[lo];
    const CompositeFrame& b = frames[lo + 1];
    const double w = static_cast<double>(t - a.timestamp) /
                     static_cast<double>(b.timestamp - a.timestamp);
    CompositeFrame g;
    g.timestamp = t;
    g.ny = ny;
    g.nx = nx;
    g.z.resize(cells);
    for (std::size_t c = 0; c < cells; ++c) {
      const float z0 = a.z[c], z1 = b.z[c];
      g.z[c] = (std::isnan(z0) || std::isnan(z1))
                   ? std::numeric_limits<float>::quiet_NaN()
                   : static_cast<float>(z0 + (z1 - z0) * w);
    }
    out.frames.push_back(std::move(g));
  }
  return out;
}

GriddedVolume read_gvol(const std::filesystem::path& path) {
  binio::Reader in(path);
  in.expect_magic("GVOL");
  const std::uint32_t version = in.u32();
  if (version != 1)
    throw IoError("unsupported GVOL version " + std::to_string(version) +
                  " in " + in.path());
  GriddedVolume vol;
  vol.timestamp = in.i64();
  const std::uint32_t n_elev = in.u32();
  const std::uint32_t ny = in.u32();
  const std::uint32_t nx = in.u32();
  if (n_elev == 0 || ny == 0 || nx == 0 ||
      static_cast<std::uint64_t>(n_elev) * ny * nx > (1ull << 31))
    throw IoError("implausible dimensions in " + in.path());
  vol.n_elev = static_cast<int>(n_elev);
  vol.ny = static_cast<int>(ny);
  vol.nx = static_cast<int>(nx);
  const std::size_t cells = static_cast<std::size_t>(ny) * nx;
  vol.lat = in.f64_array(cells);
  vol.lon = in.f64_array(cells);
  vol.refl = in.f32_array(static_cast<std::size_t>(n_elev) * cells);
  if (!in.at_eof()) throw IoError("trailing bytes in " + in.path());
  try {
    vol.validate();
  } catch (const Error& e) {
    throw IoError(in.path() + ": " + e.what());
  }
  return vol;
}

void write_gvol(const std::filesystem::path& path, const GriddedVolume& vol) {
  vol.validate();
  binio::Writer out(path);
  out.magic("GVOL");
  out.u32(1);
  out.i64(vol.timestamp);
  out.u32(static_cast<std::uint32_t>(vol.n_elev));
  out.u32(static_cast<std::uint32_t>(vol.ny));
  out.u32(static_cast<std::uint32_t>(vol.nx));
  out.f64_array(vol.lat);
  out.f64_array(vol.lon);
  out.f32_array(vol.refl);
  out.finish();
}

}  // namespace m3r::gridproc
