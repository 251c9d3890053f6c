#include "m3r/nn/model.hpp"

#include <cmath>

namespace m3r::nn {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_decoder: return "no_decoder";
    case Variant::ts_only: return "ts_only";
  }
  throw Error(ErrorCategory::internal, "unreachable variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no_decoder") return Variant::no_decoder;
  if (name == "ts_only") return Variant::ts_only;
  throw ConfigError("unknown model variant: " + name +
                    " (expected full, no_decoder or ts_only)");
}

void ModelConfig::validate() const {
  const int dims[] = {t_in,      height,      width,      channels,
                      met_dim,   patch,       d_model,    enc_heads,
                      enc_head_dim, dec_heads, dec_head_dim, mlp_dim,
                      enc_layers, mm_layers,  ts_layers,  dec_layers,
                      horizon};
  for (int d : dims)
    if (d < 1) throw ConfigError("model dimensions must all be >= 1");
  if (height % patch != 0 || width % patch != 0)
    throw ConfigError("patch size " + std::to_string(patch) +
                      " does not tile a " + std::to_string(height) + "x" +
                      std::to_string(width) + " frame");
  if (horizon != t_in)
    throw ConfigError(
        "horizon must equal t_in: the head emits one scalar per input "
        "position");
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  return t_in == o.t_in && height == o.height && width == o.width &&
         channels == o.channels && met_dim == o.met_dim && patch == o.patch &&
         d_model == o.d_model && enc_heads == o.enc_heads &&
         enc_head_dim == o.enc_head_dim && dec_heads == o.dec_heads &&
         dec_head_dim == o.dec_head_dim && mlp_dim == o.mlp_dim &&
         enc_layers == o.enc_layers && mm_layers == o.mm_layers &&
         ts_layers == o.ts_layers && dec_layers == o.dec_layers &&
         horizon == o.horizon && variant == o.variant &&
         pe_per_token == o.pe_per_token;
}

double TruncatedNormal::uniform() {
  // 53 random mantissa bits: uniform on [0, 1).
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

double TruncatedNormal::next() {
  for (;;) {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(2.0 * 3.14159265358979323846 * u2);
    if (std::abs(z) <= 2.0) return z;
  }
}

template <typename T>
void Model<T>::add_attention_params(const std::string& prefix, int heads,
                                    int head_dim) {
  const Eigen::Index d = cfg_.d_model;
  const Eigen::Index hd = static_cast<Eigen::Index>(heads) * head_dim;
  params_.add(prefix + "attn_q_w", d, hd);
  params_.add(prefix + "attn_k_w", d, hd);
  params_.add(prefix + "attn_v_w", d, hd);
  params_.add(prefix + "attn_out_w", hd, d);
}

template <typename T>
void Model<T>::add_block_params(const std::string& prefix, int heads,
                                int head_dim, bool pre_attention_norm) {
  const Eigen::Index d = cfg_.d_model;
  if (pre_attention_norm) {
    params_.add(prefix + "ln1_g", 1, d);
    params_.add(prefix + "ln1_b", 1, d);
  }
  add_attention_params(prefix, heads, head_dim);
  params_.add(prefix + "ln2_g", 1, d);
  params_.add(prefix + "ln2_b", 1, d);
  params_.add(prefix + "mlp_w1", d, cfg_.mlp_dim);
  params_.add(prefix + "mlp_b1", 1, cfg_.mlp_dim);
  params_.add(prefix + "mlp_w2", cfg_.mlp_dim, d);
  params_.add(prefix + "mlp_b2", 1, d);
}

template <typename T>
void Model<T>::create_params() {
  const Eigen::Index d = cfg_.d_model;
  const bool vision = cfg_.variant != Variant::ts_only;

  if (vision) {
    params_.add("patch_proj_w", cfg_.patch_vec(), d);
    params_.add("patch_proj_b", 1, d);
    const Eigen::Index pe_rows =
        cfg_.pe_per_token
            ? static_cast<Eigen::Index>(cfg_.t_in) * cfg_.n_patches()
            : cfg_.n_patches();
    params_.add("pos_ctx", pe_rows, d);
  }
  params_.add("ts_proj_w", cfg_.met_dim, d);
  params_.add("ts_proj_b", 1, d);
  params_.add("pos_ts", cfg_.t_in, d);

  if (vision)
    for (int l = 0; l < cfg_.enc_layers; ++l)
      add_block_params("venc" + std::to_string(l) + ".", cfg_.enc_heads,
                       cfg_.enc_head_dim, true);
  for (int l = 0; l < cfg_.ts_layers; ++l)
    add_block_params("tenc" + std::to_string(l) + ".", cfg_.enc_heads,
                     cfg_.enc_head_dim, true);
  if (vision)
    for (int l = 0; l < cfg_.mm_layers; ++l)
      // The fusion layers have no norm before the attention sub-layer; the
      // residual consumes the tokens as-is and only the MLP sub-layer is
      // normalized.
      add_block_params("mm" + std::to_string(l) + ".", cfg_.enc_heads,
                       cfg_.enc_head_dim, false);
  if (cfg_.variant == Variant::full)
    for (int l = 0; l < cfg_.dec_layers; ++l)
      add_block_params("dec" + std::to_string(l) + ".", cfg_.dec_heads,
                       cfg_.dec_head_dim, true);

  params_.add("head_w", d, 1);
  params_.add("head_b", 1, 1);
}

template <typename T>
void Model<T>::init_params(std::uint64_t seed) {
  TruncatedNormal rng(seed);
  for (auto& e : params_.entries()) {
    if (e.name.size() >= 2 && e.name.compare(e.name.size() - 2, 2, "_w") == 0) {
      for (Eigen::Index r = 0; r < e.value.rows(); ++r)
        for (Eigen::Index c = 0; c < e.value.cols(); ++c)
          e.value(r, c) = static_cast<T>(0.02 * rng.next());
    } else if (e.name.size() >= 2 &&
               e.name.compare(e.name.size() - 2, 2, "_g") == 0) {
      e.value.setOnes();
    } else {
      e.value.setZero();  // biases and positional tables
    }
    e.grad.setZero();
  }
}

template <typename T>
int Model<T>::pnode(Graph<T>& g, const std::string& name,
                    std::vector<Mat<T>>* bufs) {
  auto& e = params_.at(name);
  Mat<T>* sink = &e.grad;
  if (bufs != nullptr) {
    // entries() order matches buffer order by construction
    const auto idx = static_cast<std::size_t>(&e - params_.entries().data());
    sink = &(*bufs)[idx];
  }
  return g.param(&e.value, sink);
}

template <typename T>
Mat<T> make_patch_matrix(const Mat<T>& radar, const ModelConfig& cfg) {
  const int P = cfg.patch;
  const int C = cfg.channels;
  const int rows_of_patches = cfg.height / P;
  const int cols_of_patches = cfg.width / P;
  if (radar.rows() != cfg.t_in ||
      radar.cols() != static_cast<Eigen::Index>(cfg.height) * cfg.width * C)
    throw ShapeMismatch("radar input must be [t_in x H*W*C]");

  Mat<T> out(static_cast<Eigen::Index>(cfg.t_in) * cfg.n_patches(),
             cfg.patch_vec());
  for (int t = 0; t < cfg.t_in; ++t) {
    for (int pi = 0; pi < rows_of_patches; ++pi) {
      for (int pj = 0; pj < cols_of_patches; ++pj) {
        const Eigen::Index row =
            static_cast<Eigen::Index>(t) * cfg.n_patches() +
            static_cast<Eigen::Index>(pi) * cols_of_patches + pj;
        Eigen::Index col = 0;
        for (int r = 0; r < P; ++r)
          for (int c = 0; c < P; ++c)
            for (int ch = 0; ch < C; ++ch)
              out(row, col++) = radar(
                  t, (static_cast<Eigen::Index>(pi * P + r) * cfg.width +
                      (pj * P + c)) * C + ch);
      }
    }
  }
  return out;
}

template <typename T>
int Model<T>::patch_embed(Graph<T>& g, const Mat<T>& radar,
                          std::vector<Mat<T>>* bufs) {
  const int x = g.input(make_patch_matrix(radar, cfg_));
  int e = g.matmul(x, pnode(g, "patch_proj_w", bufs));
  e = g.add_row_vector(e, pnode(g, "patch_proj_b", bufs));
  // Positional rows are shared across frames unless configured per token;
  // either way add_tiled_rows covers it (tile count 1 in the per-token case).
  return g.add_tiled_rows(e, pnode(g, "pos_ctx", bufs));
}

template <typename T>
int Model<T>::ts_embed(Graph<T>& g, const Mat<T>& met,
                       std::vector<Mat<T>>* bufs) {
  if (met.rows() != cfg_.t_in || met.cols() != cfg_.met_dim)
    throw ShapeMismatch("met input must be [t_in x met_dim]");
  const int x = g.input(met);
  int e = g.matmul(x, pnode(g, "ts_proj_w", bufs));
  e = g.add_row_vector(e, pnode(g, "ts_proj_b", bufs));
  return g.add(e, pnode(g, "pos_ts", bufs));
}

template <typename T>
int Model<T>::mhsa(Graph<T>& g, int x, const std::string& prefix, int heads,
                   int head_dim, std::vector<Mat<T>>* bufs) {
  const int q = g.matmul(x, pnode(g, prefix + "attn_q_w", bufs));
  const int k = g.matmul(x, pnode(g, prefix + "attn_k_w", bufs));
  const int v = g.matmul(x, pnode(g, prefix + "attn_v_w", bufs));
  const int att = g.attention(q, k, v, heads, head_dim);
  return g.matmul(att, pnode(g, prefix + "attn_out_w", bufs));
}

template <typename T>
int Model<T>::encoder_block(Graph<T>& g, int x, const std::string& prefix,
                            int heads, int head_dim,
                            std::vector<Mat<T>>* bufs) {
  const int normed = g.layer_norm(x, pnode(g, prefix + "ln1_g", bufs),
                                  pnode(g, prefix + "ln1_b", bufs));
  const int h1 = g.add(x, mhsa(g, normed, prefix, heads, head_dim, bufs));

  const int normed2 = g.layer_norm(h1, pnode(g, prefix + "ln2_g", bufs),
                                   pnode(g, prefix + "ln2_b", bufs));
  int m = g.matmul(normed2, pnode(g, prefix + "mlp_w1", bufs));
  m = g.add_row_vector(m, pnode(g, prefix + "mlp_b1", bufs));
  m = g.gelu(m);
  m = g.matmul(m, pnode(g, prefix + "mlp_w2", bufs));
  m = g.add_row_vector(m, pnode(g, prefix + "mlp_b2", bufs));
  return g.add(h1, m);
}

template <typename T>
int Model<T>::multimodal_block(Graph<T>& g, int tokens, int context,
                               const std::string& prefix,
                               std::vector<Mat<T>>* bufs) {
  const int q = g.matmul(tokens, pnode(g, prefix + "attn_q_w", bufs));
  const int k = g.matmul(context, pnode(g, prefix + "attn_k_w", bufs));
  const int v = g.matmul(context, pnode(g, prefix + "attn_v_w", bufs));
  const int att = g.attention(q, k, v, cfg_.enc_heads, cfg_.enc_head_dim);
  const int h1 =
      g.add(tokens, g.matmul(att, pnode(g, prefix + "attn_out_w", bufs)));

  const int normed = g.layer_norm(h1, pnode(g, prefix + "ln2_g", bufs),
                                  pnode(g, prefix + "ln2_b", bufs));
  int m = g.matmul(normed, pnode(g, prefix + "mlp_w1", bufs));
  m = g.add_row_vector(m, pnode(g, prefix + "mlp_b1", bufs));
  m = g.gelu(m);
  m = g.matmul(m, pnode(g, prefix + "mlp_w2", bufs));
  m = g.add_row_vector(m, pnode(g, prefix + "mlp_b2", bufs));
  return g.add(h1, m);
}

template <typename T>
int Model<T>::build_forward(Graph<T>& g, const Mat<T>& radar, const Mat<T>& met,
                            std::vector<Mat<T>>* grad_buffers) {
  int tokens = ts_embed(g, met, grad_buffers);
  for (int l = 0; l < cfg_.ts_layers; ++l)
    tokens = encoder_block(g, tokens, "tenc" + std::to_string(l) + ".",
                           cfg_.enc_heads, cfg_.enc_head_dim, grad_buffers);

  if (cfg_.variant != Variant::ts_only) {
    int context = patch_embed(g, radar, grad_buffers);
    for (int l = 0; l < cfg_.enc_layers; ++l)
      context = encoder_block(g, context, "venc" + std::to_string(l) + ".",
                              cfg_.enc_heads, cfg_.enc_head_dim, grad_buffers);
    for (int l = 0; l < cfg_.mm_layers; ++l)
      tokens = multimodal_block(g, tokens, context,
                                "mm" + std::to_string(l) + ".", grad_buffers);
  }

  if (cfg_.variant == Variant::full)
    for (int l = 0; l < cfg_.dec_layers; ++l)
      tokens = encoder_block(g, tokens, "dec" + std::to_string(l) + ".",
                             cfg_.dec_heads, cfg_.dec_head_dim, grad_buffers);

  return g.add_row_vector(g.matmul(tokens, pnode(g, "head_w", grad_buffers)),
                          pnode(g, "head_b", grad_buffers));
}

template class Model<float>;
template class Model<double>;
template Mat<float> make_patch_matrix<float>(const Mat<float>&,
                                             const ModelConfig&);
template Mat<double> make_patch_matrix<double>(const Mat<double>&,
                                               const ModelConfig&);

}  // namespace m3r::nn
