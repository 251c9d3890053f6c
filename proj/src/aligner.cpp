#include "m3r/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "m3r/binio.hpp"

namespace m3r::aligner {

double spatial_mean(const gridproc::CompositeFrame& frame) {
  double sum = 0.0;
  for (float z : frame.z)
    if (!std::isnan(z)) sum += z;
  return sum / (static_cast<double>(frame.ny) * frame.nx);
}

std::uint8_t quantize(float z) {
  if (std::isnan(z)) return kMissingCode;
  if (z < 8.0f) return 0;
  if (z < 16.0f) return 8;
  if (z < 20.0f) return 16;
  if (z < 70.0f) return static_cast<std::uint8_t>(std::floor(z));
  return 70;
}

std::pair<float, bool> dequantize(std::uint8_t code) {
  if (code == kMissingCode) return {0.0f, true};
  const bool valid = code == 0 || code == 8 || code == 16 ||
                     (code >= 20 && code <= 70);
  if (!valid)
    throw InvalidCode("reflectivity code " + std::to_string(code) +
                      " is never produced by the quantizer");
  return {static_cast<float>(code) / 70.0f, false};
}

std::vector<EventCandidate> select_events(const gridproc::FrameSeries& series,
                                          double threshold) {
  const std::size_t T = series.frames.size();
  if (T <= static_cast<std::size_t>(kWindowFrames))
    throw SeriesTooShort("event selection needs more than 8 frames, got " +
                         std::to_string(T));

  std::vector<double> means(T);
  for (std::size_t i = 0; i < T; ++i) means[i] = spatial_mean(series.frames[i]);

  std::vector<EventCandidate> out;
  for (std::size_t i = kCenterOffset; i + kCenterOffset < T; i += 4) {
    if (!(means[i] > threshold)) continue;
    EventCandidate c;
    c.center_index = i;
    c.cumulative_significance = 0.0;
    for (int w = 0; w < kWindowFrames; ++w) {
      c.spatial_means[static_cast<std::size_t>(w)] =
          means[i - kCenterOffset + static_cast<std::size_t>(w)];
      c.cumulative_significance += c.spatial_means[static_cast<std::size_t>(w)];
    }
    out.push_back(c);
  }
  return out;
}

std::size_t match_pws(std::int64_t radar_ts,
                      const stationproc::StationSeries& pws) {
  const auto& ts = pws.timestamps;
  if (ts.empty()) throw NoMatchWithinWindow("station series is empty");

  const auto it = std::lower_bound(ts.begin(), ts.end(), radar_ts);
  std::size_t best;
  if (it == ts.begin()) {
    best = 0;
  } else if (it == ts.end()) {
    best = ts.size() - 1;
  } else {
    const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
    const std::size_t lo = hi - 1;
    // <= keeps the earlier row on exact distance ties.
    best = (radar_ts - ts[lo] <= ts[hi] - radar_ts) ? lo : hi;
  }
  const std::int64_t dist = std::llabs(radar_ts - ts[best]);
  if (dist > kMatchToleranceSeconds)
    throw NoMatchWithinWindow("nearest station row is " + std::to_string(dist) +
                              " s from radar frame, tolerance " +
                              std::to_string(kMatchToleranceSeconds) + " s");
  return best;
}

namespace {

std::int64_t center_ts(const EventSequence& s) {
  return s.radar_timestamps[kCenterOffset];
}

}  // namespace

DatasetSplit partition(std::vector<EventSequence> sequences, double train_frac) {
  if (sequences.empty()) throw EmptyDataset("no sequences to partition");
  for (std::size_t i = 1; i < sequences.size(); ++i)
    if (center_ts(sequences[i]) < center_ts(sequences[i - 1]))
      throw Error(ErrorCategory::data,
                  "sequences not sorted by center timestamp");

  // The epsilon keeps exact fractions exact: 0.85*100 must floor to 85 even
  // though 0.85 has no exact binary representation.
  const auto split = static_cast<std::size_t>(
      std::floor(train_frac * static_cast<double>(sequences.size()) + 1e-9));

  DatasetSplit out;
  out.train.assign(std::make_move_iterator(sequences.begin()),
                   std::make_move_iterator(sequences.begin() +
                                           static_cast<std::ptrdiff_t>(split)));
  out.test.assign(std::make_move_iterator(sequences.begin() +
                                          static_cast<std::ptrdiff_t>(split)),
                  std::make_move_iterator(sequences.end()));
  return out;
}

std::pair<DatasetSplit, BuildReport> build_dataset(
    const gridproc::FrameSeries& frames, const stationproc::StationSeries& pws,
    double threshold, double train_frac) {
  pws.validate();
  const auto candidates = select_events(frames, threshold);
  const int ny = frames.frames.front().ny;
  const int nx = frames.frames.front().nx;
  const std::size_t cells = static_cast<std::size_t>(ny) * nx;

  BuildReport report;
  report.candidates = candidates.size();

  std::vector<EventSequence> sequences;
  for (const EventCandidate& c : candidates) {
    EventSequence seq;
    seq.frames.resize(static_cast<std::size_t>(kWindowFrames) * cells);
    seq.pws.resize(static_cast<std::size_t>(kWindowFrames) *
                   stationproc::kNumColumns);
    bool matched = true;
    for (int w = 0; w < kWindowFrames; ++w) {
      const auto& frame =
          frames.frames[c.center_index - kCenterOffset + static_cast<std::size_t>(w)];
      seq.radar_timestamps[static_cast<std::size_t>(w)] = frame.timestamp;
      for (std::size_t cell = 0; cell < cells; ++cell)
        seq.frames[static_cast<std::size_t>(w) * cells + cell] =
            quantize(frame.z[cell]);
      std::size_t row;
      try {
        row = match_pws(frame.timestamp, pws);
      } catch (const NoMatchWithinWindow&) {
        matched = false;
        break;
      }
      seq.pws_timestamps[static_cast<std::size_t>(w)] = pws.timestamps[row];
      for (int col = 0; col < stationproc::kNumColumns; ++col)
        seq.pws[static_cast<std::size_t>(w) * stationproc::kNumColumns +
                static_cast<std::size_t>(col)] =
            static_cast<float>(pws.columns[static_cast<std::size_t>(col)][row]);
      seq.target[static_cast<std::size_t>(w)] = static_cast<float>(
          pws.column("precip_rate")[row]);
    }
    if (!matched) {
      ++report.dropped_no_match;
      continue;
    }
    sequences.push_back(std::move(seq));
  }

  if (sequences.empty())
    throw EmptyDataset("no aligned sequences (candidates: " +
                       std::to_string(report.candidates) + ", dropped: " +
                       std::to_string(report.dropped_no_match) + ")");

  DatasetSplit split = partition(std::move(sequences), train_frac);
  split.frame_ny = ny;
  split.frame_nx = nx;
  report.train = split.train.size();
  report.test = split.test.size();
  return {std::move(split), report};
}

namespace {

void write_sequence(binio::Writer& out, const EventSequence& s) {
  for (std::int64_t t : s.radar_timestamps) out.i64(t);
  for (std::int64_t t : s.pws_timestamps) out.i64(t);
  out.u8_array(s.frames);
  out.f32_array(s.pws);
  out.f32_array(s.target);
}

EventSequence read_sequence(binio::Reader& in, std::size_t cells) {
  EventSequence s;
  for (auto& t : s.radar_timestamps) t = in.i64();
  for (auto& t : s.pws_timestamps) t = in.i64();
  s.frames = in.u8_array(static_cast<std::size_t>(kWindowFrames) * cells);
  s.pws = in.f32_array(static_cast<std::size_t>(kWindowFrames) *
                       stationproc::kNumColumns);
  const auto target = in.f32_array(kWindowFrames);
  std::copy(target.begin(), target.end(), s.target.begin());
  return s;
}

}  // namespace

void write_m3rd(const std::filesystem::path& path, const DatasetSplit& split) {
  binio::Writer out(path);
  out.magic("M3RD");
  out.u32(1);
  out.u32(static_cast<std::uint32_t>(split.size()));
  out.u32(static_cast<std::uint32_t>(split.train.size()));
  out.u32(static_cast<std::uint32_t>(split.frame_ny));
  out.u32(static_cast<std::uint32_t>(split.frame_nx));
  for (const auto& s : split.train) write_sequence(out, s);
  for (const auto& s : split.test) write_sequence(out, s);
  out.finish();
}

DatasetSplit read_m3rd(const std::filesystem::path& path) {
  binio::Reader in(path);
  in.expect_magic("M3RD");
  const std::uint32_t version = in.u32();
  if (version != 1)
    throw IoError("unsupported M3RD version " + std::to_string(version) +
                  " in " + in.path());
  const std::uint32_t n_seq = in.u32();
  const std::uint32_t split_point = in.u32();
  const std::uint32_t ny = in.u32();
  const std::uint32_t nx = in.u32();
  if (split_point > n_seq)
    throw IoError("split point exceeds sequence count in " + in.path());
  if (ny == 0 || nx == 0 || static_cast<std::uint64_t>(ny) * nx > (1ull << 28))
    throw IoError("implausible frame dimensions in " + in.path());

  DatasetSplit split;
  split.frame_ny = static_cast<int>(ny);
  split.frame_nx = static_cast<int>(nx);
  const std::size_t cells = static_cast<std::size_t>(ny) * nx;
  for (std::uint32_t i = 0; i < n_seq; ++i) {
    auto s = read_sequence(in, cells);
    (i < split_point ? split.train : split.test).push_back(std::move(s));
  }
  if (!in.at_eof()) throw IoError("trailing bytes in " + in.path());
  return split;
}

}  // namespace m3r::aligner
