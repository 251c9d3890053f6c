#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "m3r/aligner.hpp"
#include "m3r/nn/train.hpp"

// Verification metrics, the persistence baseline, dBZ-to-rainfall
// conversion and the three-variant ablation runner.

namespace m3r::evalkit {

struct ContingencyTable {
  long long hits = 0;
  long long misses = 0;
  long long false_alarms = 0;
  long long correct_negatives = 0;

  long long total() const {
    return hits + misses + false_alarms + correct_negatives;
  }
  bool csi_defined() const { return hits + misses + false_alarms > 0; }
  double csi() const {
    const long long denom = hits + misses + false_alarms;
    return denom > 0 ? static_cast<double>(hits) / static_cast<double>(denom)
                     : 0.0;
  }
};

/// Event = value >= threshold for both prediction and target.
ContingencyTable contingency(const std::vector<double>& pred,
                             const std::vector<double>& target,
                             double threshold);

struct MetricReport {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double cc = 0.0;
  std::vector<double> thresholds;
  std::vector<double> csi;  // aligned with thresholds
  // Degenerate-denominator markers: "constant_target", "constant_pred",
  // "csi_undefined@<threshold>". The affected metric is reported as 0.
  std::vector<std::string> flags;

  double csi_at(double threshold) const;
  bool has_flag(const std::string& flag) const;
};

inline const std::vector<double> kDefaultThresholds = {0.1, 5.0, 10.0};

/// RMSE, MAE, R^2 (about the target mean), Pearson correlation and CSI per
/// threshold. Throws LengthMismatch/EmptyInput.
MetricReport compute_metrics(const std::vector<double>& pred,
                             const std::vector<double>& target,
                             const std::vector<double>& thresholds =
                                 kDefaultThresholds);

/// Marshall-Palmer style conversion: R = (10^(z/10) / a)^(1/b) mm/hr.
double zr_rainfall(double z_dbz, double a = 200.0, double b = 1.6);

/// Every horizon step repeats the last observed precipitation rate.
std::vector<double> persistence_baseline(
    const std::vector<nn::Sample<float>>& samples, int horizon);

/// One CSV row per (variant name, report); flags joined with ';'. All rows
/// must share the same threshold list.
void write_metrics_csv(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, MetricReport>>& rows);

/// Trains full, no_decoder and ts_only with identical options and evaluates
/// each on the test split; rows come back in that order.
std::vector<std::pair<std::string, MetricReport>> run_ablation(
    const aligner::DatasetSplit& data, const nn::ModelConfig& base_config,
    const nn::TrainOptions& opt);

}  // namespace m3r::evalkit
