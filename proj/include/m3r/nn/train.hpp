#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "m3r/aligner.hpp"
#include "m3r/nn/model.hpp"

// Batch assembly, feature standardization, the AdamW loop and checkpoint
// serialization.

namespace m3r::nn {

/// Per-column z-score statistics, fitted on the training split only and
/// persisted inside checkpoints.
struct Standardizer {
  Eigen::RowVectorXf mean;
  Eigen::RowVectorXf stdev;  // exact zeros replaced by 1

  /// Statistics over the input-frame rows (0..t_in-1) of every sequence.
  void fit(const std::vector<aligner::EventSequence>& seqs, int t_in,
           int met_dim);

  /// Standardized [t_in x met_dim] block of one sequence.
  Mat<float> apply(const aligner::EventSequence& seq, int t_in) const;
};

template <typename T>
struct Sample {
  Mat<T> radar;   // [t_in x H*W] rescaled codes in [0,1]
  Mat<T> met;     // [t_in x met_dim] standardized
  Mat<T> target;  // [horizon x 1] mm/hr
  T last_precip;  // raw rate at the last input frame, for the baseline
};

/// Converts aligned sequences to model inputs: frames 0..t_in-1 feed the
/// model, frames t_in..t_in+horizon-1 are targets. Throws ShapeMismatch when
/// the config disagrees with the dataset geometry.
std::vector<Sample<float>> make_samples(
    const std::vector<aligner::EventSequence>& seqs, const ModelConfig& cfg,
    const Standardizer& standardizer, int frame_ny, int frame_nx);

/// Mean squared error over all elements.
template <typename T>
T loss_mse(const Mat<T>& pred, const Mat<T>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeMismatch("loss_mse: shapes differ");
  return (pred - target).array().square().mean();
}

struct TrainOptions {
  int epochs = 200;
  int batch_size = 64;
  double base_lr = 1e-3;
  int warmup_epochs = 20;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  int jobs = 1;  // parallel sample evaluation inside a batch
};

/// Epoch is 1-based: linear ramp to base_lr across the warmup epochs, then
/// cosine decay reaching exactly 0 at the final epoch.
double learning_rate(int epoch, const TrainOptions& opt);

/// Decoupled weight decay applied uniformly to every parameter array.
class AdamW {
 public:
  AdamW(ModelParams<float>& params, const TrainOptions& opt);
  void step(double lr);

 private:
  ModelParams<float>& params_;
  double beta1_, beta2_, eps_, weight_decay_;
  long step_count_ = 0;
  std::vector<Mat<float>> m_, v_;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // per-epoch mean squared error
  std::vector<double> epoch_lr;
  Standardizer standardizer;
};

/// Initializes the model from opt.seed and runs the full schedule over the
/// train split. Seeded shuffling; with jobs > 1 the samples of a batch are
/// evaluated in parallel chunks whose gradients reduce in chunk order, so a
/// given jobs value is deterministic.
TrainResult train(Model<float>& model, const aligner::DatasetSplit& data,
                  const TrainOptions& opt);

struct EvalArrays {
  std::vector<double> pred;         // [n*horizon] row-major
  std::vector<double> target;       // [n*horizon]
  std::vector<double> persistence;  // [n*horizon] last observed rate repeated
};

/// Model and persistence-baseline predictions over a sequence list.
EvalArrays predict_sequences(Model<float>& model,
                             const Standardizer& standardizer,
                             const std::vector<aligner::EventSequence>& seqs,
                             int frame_ny, int frame_nx);

// Checkpoint container: "M3RC", u32 version=1, the 17 config dims as u32 in
// fixed order, u32 n_arrays, per array (u16 name length, name bytes, u8
// rank=2, u32 rows, u32 cols, f32 data row-major), then f32 mean[met_dim]
// and f32 std[met_dim]. Variant and positional-table mode are inferred from
// the stored array names/shapes on load.
void save_checkpoint(const std::filesystem::path& path,
                     const Model<float>& model,
                     const Standardizer& standardizer);

struct LoadedModel {
  Model<float> model;
  Standardizer standardizer;
};
LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace m3r::nn
