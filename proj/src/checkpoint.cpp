#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "m3r/binio.hpp"
#include "m3r/nn/train.hpp"

namespace m3r::nn {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void write_config(binio::Writer& out, const ModelConfig& c) {
  const int fields[] = {c.t_in,      c.height,       c.width,      c.channels,
                        c.met_dim,   c.patch,        c.d_model,    c.enc_heads,
                        c.enc_head_dim, c.dec_heads, c.dec_head_dim, c.mlp_dim,
                        c.enc_layers, c.mm_layers,   c.ts_layers,  c.dec_layers,
                        c.horizon};
  for (int f : fields) out.u32(static_cast<std::uint32_t>(f));
}

ModelConfig read_config(binio::Reader& in) {
  ModelConfig c;
  int* fields[] = {&c.t_in,      &c.height,       &c.width,      &c.channels,
                   &c.met_dim,   &c.patch,        &c.d_model,    &c.enc_heads,
                   &c.enc_head_dim, &c.dec_heads, &c.dec_head_dim, &c.mlp_dim,
                   &c.enc_layers, &c.mm_layers,   &c.ts_layers,  &c.dec_layers,
                   &c.horizon};
  for (int* f : fields) *f = static_cast<int>(in.u32());
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Model<float>& model,
                     const Standardizer& standardizer) {
  const ModelConfig& cfg = model.config();
  if (standardizer.mean.cols() != cfg.met_dim ||
      standardizer.stdev.cols() != cfg.met_dim)
    throw ShapeMismatch("standardizer dimension differs from met_dim");

  binio::Writer out(path);
  out.magic("M3RC");
  out.u32(kCheckpointVersion);
  write_config(out, cfg);

  const auto& entries = model.params().entries();
  out.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    out.u16(static_cast<std::uint16_t>(e.name.size()));
    out.bytes(e.name);
    out.u8(2);
    out.u32(static_cast<std::uint32_t>(e.value.rows()));
    out.u32(static_cast<std::uint32_t>(e.value.cols()));
    out.f32_array({e.value.data(), static_cast<std::size_t>(e.value.size())});
  }
  for (int c = 0; c < cfg.met_dim; ++c) out.f32(standardizer.mean(c));
  for (int c = 0; c < cfg.met_dim; ++c) out.f32(standardizer.stdev(c));
  out.finish();
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  binio::Reader in(path);
  in.expect_magic("M3RC");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) +
                  " in " + in.path());
  ModelConfig cfg = read_config(in);

  struct StoredArray {
    Eigen::Index rows = 0, cols = 0;
    std::vector<float> data;
  };
  std::map<std::string, StoredArray> stored;
  const std::uint32_t n_arrays = in.u32();
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    const std::uint16_t name_len = in.u16();
    const std::string name = in.bytes(name_len);
    const std::uint8_t rank = in.u8();
    if (rank != 2)
      throw IoError("array '" + name + "' has rank " + std::to_string(rank) +
                    " in " + in.path() + ", expected 2");
    StoredArray a;
    a.rows = static_cast<Eigen::Index>(in.u32());
    a.cols = static_cast<Eigen::Index>(in.u32());
    if (a.rows <= 0 || a.cols <= 0 ||
        static_cast<std::uint64_t>(a.rows) * static_cast<std::uint64_t>(a.cols) >
            (1ull << 30))
      throw IoError("implausible array shape for '" + name + "' in " +
                    in.path());
    a.data = in.f32_array(static_cast<std::size_t>(a.rows * a.cols));
    if (stored.count(name) > 0)
      throw IoError("duplicate array '" + name + "' in " + in.path());
    stored.emplace(name, std::move(a));
  }

  // Wiring is recoverable from what was stored: decoder arrays only exist in
  // the full variant, fusion arrays vanish in the series-only one, and the
  // radar positional table row count distinguishes shared vs per-token rows.
  if (stored.count("dec0.ln1_g") > 0)
    cfg.variant = Variant::full;
  else if (stored.count("mm0.ln2_g") > 0)
    cfg.variant = Variant::no_decoder;
  else
    cfg.variant = Variant::ts_only;
  const auto pos_ctx = stored.find("pos_ctx");
  if (pos_ctx != stored.end()) {
    cfg.validate();
    const Eigen::Index shared_rows = cfg.n_patches();
    const Eigen::Index per_token_rows =
        static_cast<Eigen::Index>(cfg.t_in) * cfg.n_patches();
    if (pos_ctx->second.rows == per_token_rows &&
        per_token_rows != shared_rows)
      cfg.pe_per_token = true;
    else if (pos_ctx->second.rows != shared_rows)
      throw IoError("pos_ctx row count matches neither shared nor per-token "
                    "layout in " + in.path());
  }

  LoadedModel loaded{Model<float>(cfg), Standardizer{}};
  auto& entries = loaded.model.params().entries();
  if (entries.size() != stored.size())
    throw IoError("checkpoint stores " + std::to_string(stored.size()) +
                  " arrays, model defines " + std::to_string(entries.size()) +
                  " in " + in.path());
  for (auto& e : entries) {
    const auto it = stored.find(e.name);
    if (it == stored.end())
      throw IoError("checkpoint is missing array '" + e.name + "' in " +
                    in.path());
    const StoredArray& a = it->second;
    if (a.rows != e.value.rows() || a.cols != e.value.cols())
      throw IoError("array '" + e.name + "' has shape " +
                    std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                    " in " + in.path() + ", expected " +
                    std::to_string(e.value.rows()) + "x" +
                    std::to_string(e.value.cols()));
    std::copy(a.data.begin(), a.data.end(), e.value.data());
  }

  loaded.standardizer.mean.resize(cfg.met_dim);
  loaded.standardizer.stdev.resize(cfg.met_dim);
  for (int c = 0; c < cfg.met_dim; ++c) loaded.standardizer.mean(c) = in.f32();
  for (int c = 0; c < cfg.met_dim; ++c) loaded.standardizer.stdev(c) = in.f32();
  if (!in.at_eof()) throw IoError("trailing bytes in " + in.path());
  return loaded;
}

}  // namespace m3r::nn
