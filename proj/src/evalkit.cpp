#include "m3r/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace m3r::evalkit {

ContingencyTable contingency(const std::vector<double>& pred,
                             const std::vector<double>& target,
                             double threshold) {
  if (pred.size() != target.size())
    throw LengthMismatch("contingency: array lengths differ");
  ContingencyTable t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] >= threshold;
    const bool o = target[i] >= threshold;
    if (p && o)
      ++t.hits;
    else if (!p && o)
      ++t.misses;
    else if (p && !o)
      ++t.false_alarms;
    else
      ++t.correct_negatives;
  }
  return t;
}

double MetricReport::csi_at(double threshold) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (thresholds[i] == threshold) return csi[i];
  throw Error(ErrorCategory::internal,
              "csi_at: threshold was not evaluated");
}

bool MetricReport::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

namespace {

std::string format_threshold(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", tau);
  return buf;
}

}  // namespace

MetricReport compute_metrics(const std::vector<double>& pred,
                             const std::vector<double>& target,
                             const std::vector<double>& thresholds) {
  if (pred.size() != target.size())
    throw LengthMismatch("compute_metrics: array lengths differ (" +
                         std::to_string(pred.size()) + " vs " +
                         std::to_string(target.size()) + ")");
  if (pred.empty()) throw EmptyInput("compute_metrics: empty arrays");

  const auto n = static_cast<double>(pred.size());
  MetricReport r;

  double sse = 0.0, sae = 0.0, sum_p = 0.0, sum_t = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    sse += e * e;
    sae += std::abs(e);
    sum_p += pred[i];
    sum_t += target[i];
  }
  r.rmse = std::sqrt(sse / n);
  r.mae = sae / n;

  const double mean_p = sum_p / n;
  const double mean_t = sum_t / n;
  double sst = 0.0, var_p = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dt = target[i] - mean_t;
    const double dp = pred[i] - mean_p;
    sst += dt * dt;
    var_p += dp * dp;
    cov += dp * dt;
  }

  bool constant_target = false;
  if (sst > 0.0) {
    r.r2 = 1.0 - sse / sst;
  } else {
    r.r2 = 0.0;
    constant_target = true;
  }
  if (sst > 0.0 && var_p > 0.0) {
    r.cc = cov / std::sqrt(var_p * sst);
  } else {
    r.cc = 0.0;
    constant_target = constant_target || sst <= 0.0;
    if (var_p <= 0.0) r.flags.push_back("constant_pred");
  }
  if (constant_target)
    r.flags.insert(r.flags.begin(), "constant_target");

  for (double tau : thresholds) {
    const ContingencyTable t = contingency(pred, target, tau);
    r.thresholds.push_back(tau);
    r.csi.push_back(t.csi());
    if (!t.csi_defined())
      r.flags.push_back("csi_undefined@" + format_threshold(tau));
  }
  return r;
}

double zr_rainfall(double z_dbz, double a, double b) {
  return std::pow(std::pow(10.0, z_dbz / 10.0) / a, 1.0 / b);
}

std::vector<double> persistence_baseline(
    const std::vector<nn::Sample<float>>& samples, int horizon) {
  std::vector<double> out;
  out.reserve(samples.size() * static_cast<std::size_t>(horizon));
  for (const auto& s : samples)
    for (int k = 0; k < horizon; ++k)
      out.push_back(static_cast<double>(s.last_precip));
  return out;
}

void write_metrics_csv(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, MetricReport>>& rows) {
  if (rows.empty()) throw EmptyInput("write_metrics_csv: no rows");
  const auto& thresholds = rows.front().second.thresholds;
  for (const auto& [name, report] : rows)
    if (report.thresholds != thresholds)
      throw LengthMismatch("write_metrics_csv: rows use different thresholds");

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  out << "variant,rmse,mae,r2,cc";
  for (double tau : thresholds) out << ",csi_" << format_threshold(tau);
  out << ",flags\n";

  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out << ',' << buf;
  };
  for (const auto& [name, report] : rows) {
    out << name;
    put(report.rmse);
    put(report.mae);
    put(report.r2);
    put(report.cc);
    for (double c : report.csi) put(c);
    out << ',';
    for (std::size_t i = 0; i < report.flags.size(); ++i) {
      if (i > 0) out << ';';
      out << report.flags[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::pair<std::string, MetricReport>> run_ablation(
    const aligner::DatasetSplit& data, const nn::ModelConfig& base_config,
    const nn::TrainOptions& opt) {
  if (data.test.empty())
    throw EmptyDataset("ablation needs a non-empty test split");

  std::vector<std::pair<std::string, MetricReport>> rows;
  for (nn::Variant v :
       {nn::Variant::full, nn::Variant::no_decoder, nn::Variant::ts_only}) {
    nn::ModelConfig cfg = base_config;
    cfg.variant = v;
    nn::Model<float> model(cfg);
    const nn::TrainResult result = nn::train(model, data, opt);
    const nn::EvalArrays eval =
        nn::predict_sequences(model, result.standardizer, data.test,
                              data.frame_ny, data.frame_nx);
    log_info("ablation " + nn::variant_name(v) + ": final train loss " +
             std::to_string(result.epoch_loss.back()));
    rows.emplace_back(nn::variant_name(v),
                      compute_metrics(eval.pred, eval.target));
  }
  return rows;
}

}  // namespace m3r::evalkit
