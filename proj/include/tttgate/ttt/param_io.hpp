#pragma once

// TTT parameter file, little-endian:
//   "TTTGPRM1"  8-byte magic
//   u32 version (= 1)
//   u64 model_dim, n_heads, head_dim, conv_width, chunk_size
//   i64 mask_diagonal
//   f64 base_inner_lr, recon_weight_beta, ln_eps
//   matrices, each (u64 rows, u64 cols, f64 row-major):
//     wq_base, conv_q, conv_k, wv, lr_gate_weight (1 x D), lr_gate_bias (1 x 1),
//     ln_gamma (1 x hd), ln_beta (1 x hd), w_out, w0[0..H), b0[0..H) (1 x hd)
// A JSON sidecar (<file>.json) mirrors the config fields.

#include <filesystem>

#include "json.hpp"
#include "tttgate/ttt/layer.hpp"

namespace tttgate::ttt {

inline constexpr std::uint32_t kParamFileVersion = 1;

struct ParamFile {
  TttConfig config;
  ProjectionParams params;
};

nlohmann::ordered_json config_to_json(const TttConfig& config);
TttConfig config_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> encode_params(const TttConfig& config, const ProjectionParams& params);
ParamFile decode_params(std::vector<std::uint8_t> bytes);

// Writes the binary file and its JSON sidecar.
void save_params(const std::filesystem::path& path, const TttConfig& config,
                 const ProjectionParams& params);
ParamFile load_params(const std::filesystem::path& path);

}  // namespace tttgate::ttt
