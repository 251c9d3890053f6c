#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "m3r/nn/graph.hpp"

// The nowcasting network: patch/series embeddings, self-attention encoders,
// cross-modal attention fusion, temporal decoder and linear head, plus the
// reduced wirings used by the ablation study.

namespace m3r::nn {

enum class Variant { full, no_decoder, ts_only };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
  int t_in = 4;          // input frames; also the prediction horizon
  int height = 100;
  int width = 100;
  int channels = 1;
  int met_dim = 20;
  int patch = 10;
  int d_model = 128;
  int enc_heads = 4;
  int enc_head_dim = 64;
  int dec_heads = 6;
  int dec_head_dim = 128;
  int mlp_dim = 512;
  int enc_layers = 2;    // vision encoder depth
  int mm_layers = 2;     // cross-modal fusion depth
  int ts_layers = 2;     // series encoder depth
  int dec_layers = 2;    // temporal decoder depth
  int horizon = 4;

  // Wiring options; inferred from the stored arrays when loading, never
  // serialized.
  Variant variant = Variant::full;
  bool pe_per_token = false;  // radar positional rows per (frame, patch)

  int n_patches() const { return (height / patch) * (width / patch); }
  int patch_vec() const { return channels * patch * patch; }

  /// Throws ConfigError unless dimensions are positive, the patch size
  /// tiles the frame exactly and horizon equals t_in (the head emits one
  /// scalar per input position).
  void validate() const;

  bool operator==(const ModelConfig& o) const;
};

template <typename T>
struct ParamEntry {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
};

template <typename T>
class ModelParams {
 public:
  ParamEntry<T>& add(const std::string& name, Eigen::Index rows,
                     Eigen::Index cols) {
    if (index_.count(name) > 0)
      throw Error(ErrorCategory::internal, "duplicate parameter: " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, Mat<T>::Zero(rows, cols), Mat<T>::Zero(rows, cols)});
    return entries_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  ParamEntry<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw Error(ErrorCategory::internal, "unknown parameter: " + name);
    return entries_[it->second];
  }
  const ParamEntry<T>& at(const std::string& name) const {
    return const_cast<ModelParams*>(this)->at(name);
  }

  /// Entries in creation order; optimizer state and checkpoints rely on it.
  std::vector<ParamEntry<T>>& entries() { return entries_; }
  const std::vector<ParamEntry<T>>& entries() const { return entries_; }

  void zero_grad() {
    for (auto& e : entries_) e.grad.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

 private:
  std::vector<ParamEntry<T>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Deterministic standard normal truncated to |z| <= 2 (resampled), built on
/// mt19937_64 with an explicit Box-Muller so results do not depend on the
/// standard library's distribution implementation.
class TruncatedNormal {
 public:
  explicit TruncatedNormal(std::uint64_t seed) : rng_(seed) {}
  double next();

 private:
  double uniform();
  std::mt19937_64 rng_;
};

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig config) : cfg_(config) {
    cfg_.validate();
    create_params();
  }

  const ModelConfig& config() const { return cfg_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  /// Truncated-normal(std 0.02) for projection weights, ones for norm gains,
  /// zeros for biases and positional tables; deterministic in `seed`.
  void init_params(std::uint64_t seed);

  /// Gradient sinks aligned with params().entries(); pass to build_forward
  /// to accumulate into private buffers instead of the shared grad slots.
  std::vector<Mat<T>> make_grad_buffers() const {
    std::vector<Mat<T>> out;
    out.reserve(params_.entries().size());
    for (const auto& e : params_.entries())
      out.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
    return out;
  }

  /// Builds the forward graph for one sample and returns the node holding
  /// the [horizon x 1] prediction. radar is [t_in x H*W*C] (ignored by the
  /// series-only variant), met is [t_in x met_dim]. With grad_buffers set,
  /// backward() accumulates there instead of the shared grad slots, so
  /// concurrent callers can share one model.
  int build_forward(Graph<T>& g, const Mat<T>& radar, const Mat<T>& met,
                    std::vector<Mat<T>>* grad_buffers = nullptr);

  /// Convenience forward without gradient accumulation.
  Mat<T> predict(const Mat<T>& radar, const Mat<T>& met) {
    Graph<T> g;
    return g.value(build_forward(g, radar, met));
  }

  // Exposed sub-graph builders (also used by tests).
  int patch_embed(Graph<T>& g, const Mat<T>& radar,
                  std::vector<Mat<T>>* bufs = nullptr);
  int ts_embed(Graph<T>& g, const Mat<T>& met,
               std::vector<Mat<T>>* bufs = nullptr);
  int mhsa(Graph<T>& g, int x, const std::string& prefix, int heads,
           int head_dim, std::vector<Mat<T>>* bufs = nullptr);
  int encoder_block(Graph<T>& g, int x, const std::string& prefix, int heads,
                    int head_dim, std::vector<Mat<T>>* bufs = nullptr);
  int multimodal_block(Graph<T>& g, int tokens, int context,
                       const std::string& prefix,
                       std::vector<Mat<T>>* bufs = nullptr);

 private:
  void create_params();
  void add_attention_params(const std::string& prefix, int heads, int head_dim);
  void add_block_params(const std::string& prefix, int heads, int head_dim,
                        bool pre_attention_norm);
  int pnode(Graph<T>& g, const std::string& name, std::vector<Mat<T>>* bufs);

  ModelConfig cfg_;
  ModelParams<T> params_;
};

/// Splits each frame row of `radar` ([t_in x H*W*C], channel-minor pixels)
/// into non-overlapping P x P patches in row-major patch order and flattens
/// each patch row-major, channel-minor: output [t_in*n_patches x C*P*P].
template <typename T>
Mat<T> make_patch_matrix(const Mat<T>& radar, const ModelConfig& cfg);

extern template class Model<float>;
extern template class Model<double>;
extern template Mat<float> make_patch_matrix<float>(const Mat<float>&,
                                                    const ModelConfig&);
extern template Mat<double> make_patch_matrix<double>(const Mat<double>&,
                                                      const ModelConfig&);

}  // namespace m3r::nn
