#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "m3r/common.hpp"
#include "m3r/gridproc.hpp"
#include "m3r/stationproc.hpp"

// Event selection, radar/station synchronization, reflectivity quantization
// and chronological dataset partitioning.

namespace m3r::aligner {

inline constexpr int kWindowFrames = 8;    // offsets -4..+3 around the center
inline constexpr int kCenterOffset = 4;    // window index of the center frame
inline constexpr std::int64_t kMatchToleranceSeconds = 450;
inline constexpr std::uint8_t kMissingCode = 255;

/// One significant-weather candidate: the frame window [center-4, center+4)
/// with per-frame spatial means and their sum (kept as metadata; selection
/// never gates on it).
struct EventCandidate {
  std::size_t center_index = 0;
  std::array<double, kWindowFrames> spatial_means{};
  double cumulative_significance = 0.0;
};

/// One aligned training sample: 8 quantized frames, the synchronized station
/// rows and the per-frame precipitation targets. Frame dimensions live on
/// the owning Dataset.
struct EventSequence {
  std::array<std::int64_t, kWindowFrames> radar_timestamps{};
  std::array<std::int64_t, kWindowFrames> pws_timestamps{};
  std::vector<std::uint8_t> frames;  // [8*ny*nx] row-major codes
  std::vector<float> pws;            // [8*20] in canonical column order
  std::array<float, kWindowFrames> target{};  // precip_rate mm/hr
};

struct DatasetSplit {
  std::vector<EventSequence> train;
  std::vector<EventSequence> test;
  int frame_ny = 100;
  int frame_nx = 100;

  std::size_t size() const { return train.size() + test.size(); }
};

struct BuildReport {
  std::size_t candidates = 0;
  std::size_t dropped_no_match = 0;
  std::size_t train = 0;
  std::size_t test = 0;
};

/// Arithmetic mean over every cell with NaN contributing 0 dBZ, keeping the
/// fixed 1/(ny*nx) denominator.
double spatial_mean(const gridproc::CompositeFrame& frame);

/// Reflectivity code map: z<8 -> 0, 8<=z<16 -> 8, 16<=z<20 -> 16,
/// 20<=z<70 -> floor(z), z>=70 -> 70, NaN -> 255.
std::uint8_t quantize(float z);

/// Inverse scaling for model input: code/70 in [0,1]; 255 flags missing and
/// maps to 0. Throws InvalidCode for codes the quantizer never emits.
std::pair<float, bool> dequantize(std::uint8_t code);

/// Stride-4 scan for significant frames: i starts at 4 and advances by 4
/// whether or not frame i's spatial mean exceeds the threshold; each hit
/// emits the 8-frame window around i. Throws SeriesTooShort when the series
/// has 8 frames or fewer.
std::vector<EventCandidate> select_events(const gridproc::FrameSeries& series,
                                          double threshold = 3.0);

/// Row whose timestamp is nearest to radar_ts, ties toward the earlier row.
/// Throws NoMatchWithinWindow when the nearest row is more than 450 s away.
std::size_t match_pws(std::int64_t radar_ts, const stationproc::StationSeries& pws);

/// Chronological split: first floor(train_frac * N) sequences train, rest
/// test. Input must be sorted by center radar timestamp.
DatasetSplit partition(std::vector<EventSequence> sequences,
                       double train_frac = 0.85);

/// Full alignment pass: select events, quantize each window frame, match
/// every frame to a station row and take its precip_rate as target; windows
/// with any unmatched frame are dropped. Partition is applied last.
std::pair<DatasetSplit, BuildReport> build_dataset(
    const gridproc::FrameSeries& frames, const stationproc::StationSeries& pws,
    double threshold = 3.0, double train_frac = 0.85);

// M3RD container: "M3RD", u32 version=1, u32 n_seq, u32 split_point,
// u32 frame_ny, u32 frame_nx; per sequence i64 radar_ts[8], i64 pws_ts[8],
// u8 frames[8*ny*nx], f32 pws[8*20], f32 target[8]. Little-endian.
void write_m3rd(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_m3rd(const std::filesystem::path& path);

}  // namespace m3r::aligner
