// Command line front end for the nowcasting toolkit. Every subcommand maps
// onto the library pipeline; outputs are byte-identical for identical
// inputs, seeds and job counts.

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "m3r/aligner.hpp"
#include "m3r/binio.hpp"
#include "m3r/common.hpp"
#include "m3r/evalkit.hpp"
#include "m3r/gridproc.hpp"
#include "m3r/kvconfig.hpp"
#include "m3r/nn/train.hpp"
#include "m3r/stationproc.hpp"
#include "m3r/synth.hpp"
#include "m3r/timeutil.hpp"

namespace fs = std::filesystem;
using namespace m3r;

namespace {

// Every key a settings file may define. Unknown keys are rejected up front.
const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "seed", "jobs",
      "synth.steps", "synth.grid_ny", "synth.grid_nx", "synth.storms",
      "synth.advect_vx", "synth.advect_vy", "synth.noise_std",
      "synth.pws_cadence_seconds", "synth.gap_fraction", "synth.station_i",
      "synth.station_j",
      "ingest.roi_size", "ingest.target_lat", "ingest.target_lon",
      "ingest.step_seconds",
      "fill.window_hours", "fill.repair",
      "align.threshold", "align.train_frac",
      "model.t_in", "model.patch", "model.d_model", "model.enc_heads",
      "model.enc_head_dim", "model.dec_heads", "model.dec_head_dim",
      "model.mlp_dim", "model.enc_layers", "model.mm_layers",
      "model.ts_layers", "model.dec_layers", "model.variant",
      "model.pe_per_token",
      "train.epochs", "train.batch_size", "train.base_lr",
      "train.warmup_epochs", "train.weight_decay",
      "audit.tolerance_seconds",
  };
  return keys;
}

// Settings layering: defaults < config file < explicit flags.
struct Layered {
  const CLI::App* cmd = nullptr;
  kvconfig::KeyValueFile cfg;

  bool flag_given(const std::string& flag) const {
    for (const CLI::App* a = cmd; a != nullptr; a = a->get_parent()) {
      const CLI::Option* opt = a->get_option_no_throw(flag);
      if (opt != nullptr) return opt->count() > 0;
    }
    return false;
  }
  void apply(const std::string& flag, const std::string& key, int& var) const {
    if (!flag_given(flag) && cfg.has(key))
      var = static_cast<int>(cfg.get_int(key, var));
  }
  void apply(const std::string& flag, const std::string& key, std::int64_t& var) const {
    if (!flag_given(flag) && cfg.has(key)) var = cfg.get_int(key, var);
  }
  void apply(const std::string& flag, const std::string& key, std::uint64_t& var) const {
    if (!flag_given(flag) && cfg.has(key)) var = cfg.get_uint(key, var);
  }
  void apply(const std::string& flag, const std::string& key, double& var) const {
    if (!flag_given(flag) && cfg.has(key)) var = cfg.get_double(key, var);
  }
  void apply(const std::string& flag, const std::string& key, std::string& var) const {
    if (!flag_given(flag) && cfg.has(key)) var = cfg.get_string(key, var);
  }
  void apply(const std::string& flag, const std::string& key, bool& var) const {
    if (!flag_given(flag) && cfg.has(key)) var = cfg.get_int(key, var ? 1 : 0) != 0;
  }
};

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 1;

  Layered layered(const CLI::App* cmd) {
    Layered l;
    l.cmd = cmd;
    if (!config_path.empty())
      l.cfg = kvconfig::KeyValueFile::parse_file(config_path, known_config_keys());
    l.apply("--seed", "seed", seed);
    l.apply("--jobs", "jobs", jobs);
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
    return l;
  }
};

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p))
    throw IoError(p.string() + ": " + what + " not found");
}

// ---------------------------------------------------------------- frame IO

// Regularized composite store: "M3RF", u32 version, u32 n_frames, u32 ny,
// u32 nx, i64 step_seconds, then per frame an i64 timestamp and f32 z grid.
void write_m3rf(const fs::path& path, const gridproc::FrameSeries& series) {
  binio::Writer w(path);
  w.magic("M3RF");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(series.frames.size()));
  const int ny = series.frames.empty() ? 0 : series.frames.front().ny;
  const int nx = series.frames.empty() ? 0 : series.frames.front().nx;
  w.u32(static_cast<std::uint32_t>(ny));
  w.u32(static_cast<std::uint32_t>(nx));
  w.i64(series.step_seconds);
  for (const auto& f : series.frames) {
    w.i64(f.timestamp);
    w.f32_array(f.z);
  }
  w.finish();
}

gridproc::FrameSeries read_m3rf(const fs::path& path) {
  binio::Reader r(path);
  r.expect_magic("M3RF");
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw IoError(r.path() + ": unsupported frame store version " + std::to_string(version));
  const std::uint32_t n = r.u32();
  const std::uint32_t ny = r.u32();
  const std::uint32_t nx = r.u32();
  if (static_cast<std::uint64_t>(ny) * nx > (1u << 28))
    throw IoError(r.path() + ": frame dimensions out of range");
  gridproc::FrameSeries series;
  series.step_seconds = r.i64();
  series.frames.resize(n);
  for (auto& f : series.frames) {
    f.timestamp = r.i64();
    f.ny = static_cast<int>(ny);
    f.nx = static_cast<int>(nx);
    f.z = r.f32_array(static_cast<std::size_t>(ny) * nx);
  }
  if (!r.at_eof()) throw IoError(r.path() + ": trailing bytes");
  return series;
}

// ---------------------------------------------------------------- commands

struct SynthCmd {
  std::string out_dir;
  synth::SynthSpec spec;
  int station_i = -1;  // -1 selects the grid center
  int station_j = -1;

  int run(GlobalOpts& g, const Layered& l) {
    l.apply("--steps", "synth.steps", spec.n_steps);
    l.apply("--grid-ny", "synth.grid_ny", spec.grid_ny);
    l.apply("--grid-nx", "synth.grid_nx", spec.grid_nx);
    l.apply("--storms", "synth.storms", spec.storm_count);
    l.apply("--advect-vx", "synth.advect_vx", spec.advect_vx);
    l.apply("--advect-vy", "synth.advect_vy", spec.advect_vy);
    l.apply("--noise-std", "synth.noise_std", spec.noise_std);
    l.apply("--pws-cadence", "synth.pws_cadence_seconds", spec.pws_cadence_seconds);
    l.apply("--gap-fraction", "synth.gap_fraction", spec.gap_fraction);
    l.apply("--station-i", "synth.station_i", station_i);
    l.apply("--station-j", "synth.station_j", station_j);
    spec.seed = g.seed;
    spec.validate();
    if (station_i < 0) station_i = spec.grid_ny / 2;
    if (station_j < 0) station_j = spec.grid_nx / 2;

    fs::create_directories(out_dir);
    const auto radar = synth::gen_radar(spec);
    for (std::size_t k = 0; k < radar.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "radar_%06zu.gvol", k);
      gridproc::write_gvol(fs::path(out_dir) / name, radar[k]);
    }
    const auto pws = synth::gen_pws(spec, radar, station_i, station_j);
    stationproc::write_pws_csv(fs::path(out_dir) / "pws.csv", pws);

    std::printf("volumes=%zu pws_rows=%zu station_lat=%.6f station_lon=%.6f\n",
                radar.size(), pws.n_rows(), synth::cell_lat(station_i),
                synth::cell_lon(station_j));
    return 0;
  }
};

struct IngestCmd {
  std::string in_dir;
  std::string out_path;
  double lat = 0.0, lon = 0.0;
  int roi = 100;
  std::int64_t step = 900;

  int run(GlobalOpts& g, const Layered& l) {
    l.apply("--roi", "ingest.roi_size", roi);
    l.apply("--lat", "ingest.target_lat", lat);
    l.apply("--lon", "ingest.target_lon", lon);
    l.apply("--step", "ingest.step_seconds", step);
    require_exists(in_dir, "input directory");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".gvol")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw EmptyInput("no .gvol files in " + in_dir);

    // Each file is independent, so volumes are processed in parallel chunks
    // into preassigned slots; the result order never depends on timing.
    std::vector<gridproc::CompositeFrame> frames(files.size());
    std::vector<std::string> errors(files.size());
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        try {
          const auto vol = gridproc::read_gvol(files[k]);
          const auto center = gridproc::nearest_grid_point(vol, lat, lon);
          const auto roi_vol = gridproc::extract_roi(vol, center, roi);
          frames[k] = gridproc::composite_reflectivity(roi_vol);
        } catch (const std::exception& e) {
          errors[k] = e.what();
        }
      }
    };
    const int jobs = std::min<int>(g.jobs, static_cast<int>(files.size()));
    if (jobs <= 1) {
      work(0, files.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (files.size() + jobs - 1) / jobs;
      for (int t = 0; t < jobs; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(files.size(), b + chunk);
        if (b < e) pool.emplace_back(work, b, e);
      }
      for (auto& th : pool) th.join();
    }
    for (std::size_t k = 0; k < files.size(); ++k)
      if (!errors[k].empty())
        throw Error(ErrorCategory::data,
                    files[k].string() + ": " + errors[k]);

    std::sort(frames.begin(), frames.end(),
              [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    const auto series = gridproc::temporal_regularize(frames, step);
    write_m3rf(out_path, series);
    std::printf("volumes=%zu frames=%zu step=%" PRId64 "\n", files.size(),
                series.frames.size(), series.step_seconds);
    return 0;
  }
};

struct FillCmd {
  std::string in_path;
  std::string out_path;
  std::string report_path;
  double window_hours = 2.5;
  bool repair = true;

  int run(GlobalOpts&, const Layered& l) {
    l.apply("--window-hours", "fill.window_hours", window_hours);
    l.apply("--repair", "fill.repair", repair);
    require_exists(in_path, "station file");
    const auto raw = stationproc::read_pws_csv(in_path);
    const auto filled = stationproc::fill_all(raw, window_hours);
    auto [checked, report] = stationproc::validate_physical(filled, repair);
    stationproc::write_pws_csv(out_path, checked);
    const fs::path rp = report_path.empty()
                            ? fs::path(out_path + ".violations.txt")
                            : fs::path(report_path);
    stationproc::write_violation_report(rp, report);
    std::printf("rows=%zu violations=%zu repaired=%d\n", checked.n_rows(),
                report.count(), repair ? 1 : 0);
    return 0;
  }
};

struct AlignCmd {
  std::string frames_path;
  std::string pws_path;
  std::string out_path;
  double threshold = 3.0;
  double train_frac = 0.85;

  int run(GlobalOpts&, const Layered& l) {
    l.apply("--threshold", "align.threshold", threshold);
    l.apply("--train-frac", "align.train_frac", train_frac);
    require_exists(frames_path, "frame store");
    require_exists(pws_path, "station file");
    const auto frames = read_m3rf(frames_path);
    const auto pws = stationproc::read_pws_csv(pws_path);
    auto [split, report] = aligner::build_dataset(frames, pws, threshold, train_frac);
    aligner::write_m3rd(out_path, split);
    std::printf("candidates=%zu dropped_no_match=%zu train=%zu test=%zu\n",
                report.candidates, report.dropped_no_match, report.train,
                report.test);
    return 0;
  }
};

// Shared model-geometry options for train/ablate.
struct ModelOpts {
  nn::ModelConfig cfg;
  std::string variant = "full";

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--t-in", cfg.t_in, "input frames (horizon matches)");
    cmd->add_option("--patch", cfg.patch, "patch edge length");
    cmd->add_option("--d-model", cfg.d_model, "token width");
    cmd->add_option("--enc-heads", cfg.enc_heads, "encoder heads");
    cmd->add_option("--enc-head-dim", cfg.enc_head_dim, "encoder head width");
    cmd->add_option("--dec-heads", cfg.dec_heads, "decoder heads");
    cmd->add_option("--dec-head-dim", cfg.dec_head_dim, "decoder head width");
    cmd->add_option("--mlp-dim", cfg.mlp_dim, "feed-forward width");
    cmd->add_option("--enc-layers", cfg.enc_layers, "vision encoder depth");
    cmd->add_option("--mm-layers", cfg.mm_layers, "fusion depth");
    cmd->add_option("--ts-layers", cfg.ts_layers, "series encoder depth");
    cmd->add_option("--dec-layers", cfg.dec_layers, "decoder depth");
    cmd->add_option("--variant", variant, "full | no_decoder | ts_only");
    cmd->add_flag("--pe-per-token", cfg.pe_per_token,
                  "distinct radar positions per (frame, patch)");
  }

  void layer(const Layered& l) {
    l.apply("--t-in", "model.t_in", cfg.t_in);
    l.apply("--patch", "model.patch", cfg.patch);
    l.apply("--d-model", "model.d_model", cfg.d_model);
    l.apply("--enc-heads", "model.enc_heads", cfg.enc_heads);
    l.apply("--enc-head-dim", "model.enc_head_dim", cfg.enc_head_dim);
    l.apply("--dec-heads", "model.dec_heads", cfg.dec_heads);
    l.apply("--dec-head-dim", "model.dec_head_dim", cfg.dec_head_dim);
    l.apply("--mlp-dim", "model.mlp_dim", cfg.mlp_dim);
    l.apply("--enc-layers", "model.enc_layers", cfg.enc_layers);
    l.apply("--mm-layers", "model.mm_layers", cfg.mm_layers);
    l.apply("--ts-layers", "model.ts_layers", cfg.ts_layers);
    l.apply("--dec-layers", "model.dec_layers", cfg.dec_layers);
    l.apply("--variant", "model.variant", variant);
    l.apply("--pe-per-token", "model.pe_per_token", cfg.pe_per_token);
    cfg.variant = nn::variant_from_name(variant);
    cfg.horizon = cfg.t_in;
  }

  // Frame geometry always comes from the dataset container.
  void bind_dataset(const aligner::DatasetSplit& data) {
    cfg.height = data.frame_ny;
    cfg.width = data.frame_nx;
    cfg.channels = 1;
    cfg.met_dim = stationproc::kNumColumns;
  }
};

struct TrainFlags {
  nn::TrainOptions opt;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--epochs", opt.epochs, "training epochs");
    cmd->add_option("--batch", opt.batch_size, "batch size");
    cmd->add_option("--lr", opt.base_lr, "base learning rate");
    cmd->add_option("--warmup", opt.warmup_epochs, "warmup epochs");
    cmd->add_option("--weight-decay", opt.weight_decay, "decoupled decay");
  }
  void layer(const Layered& l, const GlobalOpts& g) {
    l.apply("--epochs", "train.epochs", opt.epochs);
    l.apply("--batch", "train.batch_size", opt.batch_size);
    l.apply("--lr", "train.base_lr", opt.base_lr);
    l.apply("--warmup", "train.warmup_epochs", opt.warmup_epochs);
    l.apply("--weight-decay", "train.weight_decay", opt.weight_decay);
    opt.seed = g.seed;
    opt.jobs = g.jobs;
  }
};

void write_loss_csv(const fs::path& path, const nn::TrainResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "epoch,lr,train_loss\n";
  char line[96];
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g\n", e + 1,
                  result.epoch_lr[e], result.epoch_loss[e]);
    out << line;
  }
  if (!out.good()) throw IoError(path.string() + ": write failed");
}

struct TrainCmd {
  std::string data_path;
  std::string out_path;
  std::string loss_csv;
  ModelOpts model;
  TrainFlags tf;

  int run(GlobalOpts& g, const Layered& l) {
    model.layer(l);
    tf.layer(l, g);
    require_exists(data_path, "dataset");
    const auto data = aligner::read_m3rd(data_path);
    model.bind_dataset(data);
    nn::Model<float> net(model.cfg);
    log_info("training " + nn::variant_name(model.cfg.variant) + " model, " +
             std::to_string(net.params().scalar_count()) + " parameters, " +
             std::to_string(data.train.size()) + " train sequences");
    const auto result = nn::train(net, data, tf.opt);
    nn::save_checkpoint(out_path, net, result.standardizer);
    if (!loss_csv.empty()) write_loss_csv(loss_csv, result);
    std::printf("epochs=%zu final_loss=%.9g checkpoint=%s\n",
                result.epoch_loss.size(),
                result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back(),
                out_path.c_str());
    return 0;
  }
};

void write_prediction_csv(const fs::path& path, const nn::EvalArrays& arrays) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "index,pred,target,persistence\n";
  char line[128];
  for (std::size_t i = 0; i < arrays.pred.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g\n", i,
                  arrays.pred[i], arrays.target[i], arrays.persistence[i]);
    out << line;
  }
  if (!out.good()) throw IoError(path.string() + ": write failed");
}

struct EvalCmd {
  std::string data_path;
  std::string model_path;
  std::string out_path;
  std::string dump_path;
  std::string split = "test";
  bool baseline = true;

  int run(GlobalOpts&, const Layered&) {
    require_exists(data_path, "dataset");
    require_exists(model_path, "checkpoint");
    const auto data = aligner::read_m3rd(data_path);
    const auto& seqs = split == "train" ? data.train : data.test;
    if (split != "train" && split != "test")
      throw ConfigError("--split must be train or test");
    if (seqs.empty()) throw EmptyDataset("selected split is empty");

    auto loaded = nn::load_checkpoint(model_path);
    const auto arrays = nn::predict_sequences(loaded.model, loaded.standardizer,
                                              seqs, data.frame_ny, data.frame_nx);
    std::vector<std::pair<std::string, evalkit::MetricReport>> rows;
    rows.emplace_back(nn::variant_name(loaded.model.config().variant),
                      evalkit::compute_metrics(arrays.pred, arrays.target));
    if (baseline)
      rows.emplace_back("persistence",
                        evalkit::compute_metrics(arrays.persistence, arrays.target));
    evalkit::write_metrics_csv(out_path, rows);
    if (!dump_path.empty()) write_prediction_csv(dump_path, arrays);
    for (const auto& [name, rep] : rows)
      std::printf("%s rmse=%.6g mae=%.6g r2=%.6g cc=%.6g\n", name.c_str(),
                  rep.rmse, rep.mae, rep.r2, rep.cc);
    return 0;
  }
};

struct AblateCmd {
  std::string data_path;
  std::string out_path;
  ModelOpts model;
  TrainFlags tf;

  int run(GlobalOpts& g, const Layered& l) {
    model.layer(l);
    tf.layer(l, g);
    require_exists(data_path, "dataset");
    const auto data = aligner::read_m3rd(data_path);
    model.bind_dataset(data);
    const auto rows = evalkit::run_ablation(data, model.cfg, tf.opt);
    evalkit::write_metrics_csv(out_path, rows);
    for (const auto& [name, rep] : rows)
      std::printf("%s rmse=%.6g csi@0.1=%.6g\n", name.c_str(), rep.rmse,
                  rep.csi_at(0.1));
    return 0;
  }
};

struct AuditCmd {
  std::string data_path;
  std::int64_t tolerance = aligner::kMatchToleranceSeconds;

  int run(GlobalOpts&, const Layered& l) {
    l.apply("--tolerance", "audit.tolerance_seconds", tolerance);
    require_exists(data_path, "dataset");
    const auto data = aligner::read_m3rd(data_path);

    std::int64_t max_desync = 0;
    std::size_t n_cells = 0;
    auto check = [&](const std::vector<aligner::EventSequence>& seqs,
                     const char* which) {
      std::int64_t prev_center = INT64_MIN;
      for (std::size_t s = 0; s < seqs.size(); ++s) {
        const auto& seq = seqs[s];
        for (int k = 0; k < aligner::kWindowFrames; ++k) {
          const std::int64_t d =
              std::abs(seq.radar_timestamps[k] - seq.pws_timestamps[k]);
          max_desync = std::max(max_desync, d);
          if (d > tolerance)
            throw Error(ErrorCategory::data,
                        std::string(which) + " sequence " + std::to_string(s) +
                            " frame " + std::to_string(k) + " desync " +
                            std::to_string(d) + "s exceeds tolerance");
          if (k > 0 && seq.radar_timestamps[k] <= seq.radar_timestamps[k - 1])
            throw Error(ErrorCategory::data,
                        std::string(which) + " sequence " + std::to_string(s) +
                            " has non-increasing radar timestamps");
        }
        const std::int64_t center =
            seq.radar_timestamps[aligner::kCenterOffset];
        if (center < prev_center)
          throw Error(ErrorCategory::data,
                      std::string(which) + " split is not chronological");
        prev_center = center;
        for (std::uint8_t code : seq.frames) {
          aligner::dequantize(code);  // throws on invalid codes
          ++n_cells;
        }
        for (float t : seq.target)
          if (!(t >= 0.0f) || !std::isfinite(t))
            throw Error(ErrorCategory::data,
                        std::string(which) + " sequence " + std::to_string(s) +
                            " has an invalid target rate");
      }
    };
    check(data.train, "train");
    check(data.test, "test");
    if (!data.train.empty() && !data.test.empty()) {
      const std::int64_t last_train =
          data.train.back().radar_timestamps[aligner::kCenterOffset];
      const std::int64_t first_test =
          data.test.front().radar_timestamps[aligner::kCenterOffset];
      if (first_test < last_train)
        throw Error(ErrorCategory::data, "test split precedes train split");
    }
    std::printf("audit OK: train=%zu test=%zu cells=%zu max_desync=%" PRId64 "s\n",
                data.train.size(), data.test.size(), n_cells, max_desync);
    return 0;
  }
};

// ------------------------------------------------------------------- plots

struct Polyline {
  std::string label;
  std::string color;
  std::vector<double> x, y;
};

// Minimal static line chart; axes, ticks, legend, nothing interactive.
void write_svg_chart(const fs::path& path, const std::string& x_label,
                     const std::string& y_label,
                     const std::vector<Polyline>& lines, bool scatter) {
  const double width = 760, height = 480;
  const double ml = 70, mr = 20, mt = 20, mb = 50;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& ln : lines)
    for (std::size_t i = 0; i < ln.x.size(); ++i) {
      if (first) {
        xmin = xmax = ln.x[i];
        ymin = ymax = ln.y[i];
        first = false;
      }
      xmin = std::min(xmin, ln.x[i]);
      xmax = std::max(xmax, ln.x[i]);
      ymin = std::min(ymin, ln.y[i]);
      ymax = std::max(ymax, ln.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"480\" "
         "viewBox=\"0 0 760 480\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"760\" height=\"480\" fill=\"white\"/>\n";

  // axes with 5 ticks each
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                ml, height - mb, width - mr, height - mb);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                ml, mt, ml, height - mb);
  out << buf;
  for (int t = 0; t <= 5; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 5.0;
    const double fy = ymin + (ymax - ymin) * t / 5.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%.4g</text>\n",
                  px(fx), height - mb + 18, fx);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.4g</text>\n",
                  ml - 6, py(fy) + 4, fy);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n",
                (ml + width - mr) / 2, height - 12, x_label.c_str());
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"16\" y=\"%g\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 16 %g)\">%s</text>\n",
                (mt + height - mb) / 2, (mt + height - mb) / 2, y_label.c_str());
  out << buf;

  double legend_y = mt + 14;
  for (const auto& ln : lines) {
    if (scatter) {
      for (std::size_t i = 0; i < ln.x.size(); ++i) {
        std::snprintf(buf, sizeof(buf),
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"%s\"/>\n",
                      px(ln.x[i]), py(ln.y[i]), ln.color.c_str());
        out << buf;
      }
    } else {
      out << "<polyline fill=\"none\" stroke=\"" << ln.color
          << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < ln.x.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(ln.x[i]), py(ln.y[i]));
        out << buf;
      }
      out << "\"/>\n";
    }
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%g\" y=\"%g\" width=\"12\" height=\"12\" fill=\"%s\"/>"
                  "<text x=\"%g\" y=\"%g\">%s</text>\n",
                  width - mr - 150, legend_y - 10, ln.color,
                  width - mr - 132, legend_y, ln.label.c_str());
    out << buf;
    legend_y += 18;
  }
  out << "</svg>\n";
  if (!out.good()) throw IoError(path.string() + ": write failed");
}

// Loose numeric CSV reader for the plot command: first line is the header.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>>
read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  std::vector<std::vector<double>> cols;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t comma = line.find(',', pos);
    const std::size_t end = comma == std::string::npos ? line.size() : comma;
    header.push_back(line.substr(pos, end - pos));
    pos = end + 1;
    if (comma == std::string::npos) break;
  }
  cols.resize(header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t p = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::size_t comma = line.find(',', p);
      const std::size_t end = comma == std::string::npos ? line.size() : comma;
      const std::string cell = line.substr(p, end - p);
      try {
        cols[c].push_back(std::stod(cell));
      } catch (const std::exception&) {
        cols[c].push_back(std::numeric_limits<double>::quiet_NaN());
      }
      p = end + 1;
    }
  }
  (void)line_no;
  return {header, cols};
}

struct PlotCmd {
  std::string in_path;
  std::string out_path;
  std::string kind = "loss";

  int run(GlobalOpts&, const Layered&) {
    require_exists(in_path, "input csv");
    const auto [header, cols] = read_numeric_csv(in_path);
    auto col = [&](const std::string& name) -> const std::vector<double>& {
      for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return cols[i];
      throw Error(ErrorCategory::data, "column not found: " + name);
    };

    if (kind == "loss") {
      Polyline ln{"train loss", "#1f77b4", col("epoch"), col("train_loss")};
      write_svg_chart(out_path, "epoch", "mean squared error", {ln}, false);
    } else if (kind == "series") {
      Polyline pred{"predicted", "#d62728", col("index"), col("pred")};
      Polyline target{"observed", "#1f77b4", col("index"), col("target")};
      write_svg_chart(out_path, "sample", "rain rate (mm/hr)", {pred, target},
                      false);
    } else if (kind == "scatter") {
      Polyline pts{"predicted vs observed", "#2ca02c", col("target"), col("pred")};
      write_svg_chart(out_path, "observed (mm/hr)", "predicted (mm/hr)", {pts},
                      true);
    } else {
      throw ConfigError("--kind must be loss, series or scatter");
    }
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal radar + weather-station rainfall nowcasting toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key=value settings file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for all stochastic steps");
  app.add_option("--jobs", g.jobs, "worker threads for parallel stages");

  SynthCmd synth_cmd;
  auto* sc = app.add_subcommand("synth", "generate a synthetic radar + station scene");
  sc->fallthrough();
  sc->add_option("--out-dir", synth_cmd.out_dir, "output directory")->required();
  sc->add_option("--steps", synth_cmd.spec.n_steps, "radar frames to generate");
  sc->add_option("--grid-ny", synth_cmd.spec.grid_ny, "grid rows");
  sc->add_option("--grid-nx", synth_cmd.spec.grid_nx, "grid columns");
  sc->add_option("--storms", synth_cmd.spec.storm_count, "number of storm cells");
  sc->add_option("--advect-vx", synth_cmd.spec.advect_vx, "column drift, cells/step");
  sc->add_option("--advect-vy", synth_cmd.spec.advect_vy, "row drift, cells/step");
  sc->add_option("--noise-std", synth_cmd.spec.noise_std, "reflectivity noise (dBZ)");
  sc->add_option("--pws-cadence", synth_cmd.spec.pws_cadence_seconds,
                 "station sampling period (s)");
  sc->add_option("--gap-fraction", synth_cmd.spec.gap_fraction,
                 "fraction of station rows blanked");
  sc->add_option("--station-i", synth_cmd.station_i, "station row (default center)");
  sc->add_option("--station-j", synth_cmd.station_j, "station column (default center)");

  IngestCmd ingest_cmd;
  auto* ic = app.add_subcommand("ingest", "volumes -> regularized composite frames");
  ic->fallthrough();
  ic->add_option("--in-dir", ingest_cmd.in_dir, "directory of .gvol volumes")->required();
  ic->add_option("--out", ingest_cmd.out_path, "output frame store")->required();
  ic->add_option("--lat", ingest_cmd.lat, "station latitude");
  ic->add_option("--lon", ingest_cmd.lon, "station longitude");
  ic->add_option("--roi", ingest_cmd.roi, "region edge length, grid points");
  ic->add_option("--step", ingest_cmd.step, "output cadence (s)");

  FillCmd fill_cmd;
  auto* fc = app.add_subcommand("fill", "gap-fill and validate a station series");
  fc->fallthrough();
  fc->add_option("--in", fill_cmd.in_path, "input station csv")->required();
  fc->add_option("--out", fill_cmd.out_path, "filled output csv")->required();
  fc->add_option("--report", fill_cmd.report_path,
                 "violation report path (default <out>.violations.txt)");
  fc->add_option("--window-hours", fill_cmd.window_hours,
                 "precipitation context window");
  fc->add_flag("!--no-repair", fill_cmd.repair, "report violations without repairing");

  AlignCmd align_cmd;
  auto* ac = app.add_subcommand("align", "frames + station series -> event dataset");
  ac->fallthrough();
  ac->add_option("--frames", align_cmd.frames_path, "frame store from ingest")->required();
  ac->add_option("--pws", align_cmd.pws_path, "filled station csv")->required();
  ac->add_option("--out", align_cmd.out_path, "output dataset")->required();
  ac->add_option("--threshold", align_cmd.threshold, "event mean-dBZ threshold");
  ac->add_option("--train-frac", align_cmd.train_frac, "chronological train fraction");

  TrainCmd train_cmd;
  auto* tc = app.add_subcommand("train", "fit the nowcasting model");
  tc->fallthrough();
  tc->add_option("--data", train_cmd.data_path, "event dataset")->required();
  tc->add_option("--out", train_cmd.out_path, "checkpoint path")->required();
  tc->add_option("--loss-csv", train_cmd.loss_csv, "per-epoch loss table");
  train_cmd.model.add_flags(tc);
  train_cmd.tf.add_flags(tc);

  EvalCmd eval_cmd;
  auto* ec = app.add_subcommand("eval", "score a checkpoint against a split");
  ec->fallthrough();
  ec->add_option("--data", eval_cmd.data_path, "event dataset")->required();
  ec->add_option("--model", eval_cmd.model_path, "checkpoint")->required();
  ec->add_option("--out", eval_cmd.out_path, "metrics csv")->required();
  ec->add_option("--split", eval_cmd.split, "train or test (default test)");
  ec->add_option("--dump", eval_cmd.dump_path, "write per-sample predictions csv");
  ec->add_flag("!--no-baseline", eval_cmd.baseline, "omit the persistence row");

  AblateCmd ablate_cmd;
  auto* bc = app.add_subcommand("ablate", "train and score all model variants");
  bc->fallthrough();
  bc->add_option("--data", ablate_cmd.data_path, "event dataset")->required();
  bc->add_option("--out", ablate_cmd.out_path, "metrics csv")->required();
  ablate_cmd.model.add_flags(bc);
  ablate_cmd.tf.add_flags(bc);

  AuditCmd audit_cmd;
  auto* uc = app.add_subcommand("audit", "verify dataset synchronization invariants");
  uc->fallthrough();
  uc->add_option("--data", audit_cmd.data_path, "event dataset")->required();
  uc->add_option("--tolerance", audit_cmd.tolerance, "max |radar - station| (s)");

  PlotCmd plot_cmd;
  auto* pc = app.add_subcommand("plot", "render a csv as a static svg chart");
  pc->fallthrough();
  pc->add_option("--in", plot_cmd.in_path, "input csv")->required();
  pc->add_option("--out", plot_cmd.out_path, "output svg")->required();
  pc->add_option("--kind", plot_cmd.kind, "loss | series | scatter");

  try {
    app.parse(argc, argv);
    const CLI::App* active = app.get_subcommands().front();
    Layered l = g.layered(active);
    if (active == sc) return synth_cmd.run(g, l);
    if (active == ic) return ingest_cmd.run(g, l);
    if (active == fc) return fill_cmd.run(g, l);
    if (active == ac) return align_cmd.run(g, l);
    if (active == tc) return train_cmd.run(g, l);
    if (active == ec) return eval_cmd.run(g, l);
    if (active == bc) return ablate_cmd.run(g, l);
    if (active == uc) return audit_cmd.run(g, l);
    if (active == pc) return plot_cmd.run(g, l);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    log_error(e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    log_error(std::string("unexpected: ") + e.what());
    return static_cast<int>(ErrorCategory::internal);
  }
}
