#include "tttgate/ttt/param_io.hpp"

#include "tttgate/error.hpp"
#include "tttgate/io/binary.hpp"

namespace tttgate::ttt {

namespace {
constexpr std::string_view kMagic = "TTTGPRM1";
}

nlohmann::ordered_json config_to_json(const TttConfig& c) {
  nlohmann::ordered_json j;
  j["model_dim"] = c.model_dim;
  j["n_heads"] = c.n_heads;
  j["head_dim"] = c.head_dim;
  j["conv_width"] = c.conv_width;
  j["base_inner_lr"] = c.base_inner_lr;
  j["recon_weight_beta"] = c.recon_weight_beta;
  j["chunk_size"] = c.chunk_size;
  j["mask_diagonal"] = c.mask_diagonal;
  j["ln_eps"] = c.ln_eps;
  return j;
}

TttConfig config_from_json(const nlohmann::json& j) {
  TttConfig c;
  try {
    c.model_dim = j.at("model_dim").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.head_dim = j.at("head_dim").get<std::size_t>();
    c.conv_width = j.at("conv_width").get<std::size_t>();
    c.base_inner_lr = j.at("base_inner_lr").get<Real>();
    c.recon_weight_beta = j.at("recon_weight_beta").get<Real>();
    c.chunk_size = j.at("chunk_size").get<std::size_t>();
    c.mask_diagonal = j.at("mask_diagonal").get<int>();
    c.ln_eps = j.value("ln_eps", kLayerNormEps);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("TTT config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::uint8_t> encode_params(const TttConfig& config, const ProjectionParams& params) {
  params.validate(config);
  io::BinaryWriter w;
  w.magic(kMagic);
  w.u32(kParamFileVersion);
  w.u64(config.model_dim);
  w.u64(config.n_heads);
  w.u64(config.head_dim);
  w.u64(config.conv_width);
  w.u64(config.chunk_size);
  w.i64(config.mask_diagonal);
  w.f64(config.base_inner_lr);
  w.f64(config.recon_weight_beta);
  w.f64(config.ln_eps);
  w.matrix(params.wq_base);
  w.matrix(params.conv_q);
  w.matrix(params.conv_k);
  w.matrix(params.wv);
  w.vector(params.lr_gate_weight);
  w.vector(std::span<const Real>(&params.lr_gate_bias, 1));
  w.vector(params.ln_gamma);
  w.vector(params.ln_beta);
  w.matrix(params.w_out);
  for (const Matrix& m : params.w0) w.matrix(m);
  for (const auto& b : params.b0) w.vector(b);
  return w.buffer();
}

ParamFile decode_params(std::vector<std::uint8_t> bytes) {
  io::BinaryReader r(std::move(bytes));
  r.expect_magic(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kParamFileVersion)
    throw IoError("unsupported TTT parameter file version " + std::to_string(version));
  ParamFile f;
  f.config.model_dim = r.u64();
  f.config.n_heads = r.u64();
  f.config.head_dim = r.u64();
  f.config.conv_width = r.u64();
  f.config.chunk_size = r.u64();
  f.config.mask_diagonal = static_cast<int>(r.i64());
  f.config.base_inner_lr = r.f64();
  f.config.recon_weight_beta = r.f64();
  f.config.ln_eps = r.f64();
  f.config.validate();
  f.params.wq_base = r.matrix();
  f.params.conv_q = r.matrix();
  f.params.conv_k = r.matrix();
  f.params.wv = r.matrix();
  f.params.lr_gate_weight = r.vector();
  const auto bias = r.vector();
  if (bias.size() != 1) throw IoError("lr_gate_bias record must hold one value");
  f.params.lr_gate_bias = bias[0];
  f.params.ln_gamma = r.vector();
  f.params.ln_beta = r.vector();
  f.params.w_out = r.matrix();
  for (std::size_t h = 0; h < f.config.n_heads; ++h) f.params.w0.push_back(r.matrix());
  for (std::size_t h = 0; h < f.config.n_heads; ++h) f.params.b0.push_back(r.vector());
  if (r.remaining() != 0) throw IoError("trailing bytes after TTT parameters");
  try {
    f.params.validate(f.config);
  } catch (const ConfigError& e) {
    throw IoError(std::string("invalid TTT parameter file: ") + e.what());
  }
  return f;
}

void save_params(const std::filesystem::path& path, const TttConfig& config,
                 const ProjectionParams& params) {
  const auto bytes = encode_params(config, params);
  io::write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  nlohmann::ordered_json sidecar;
  sidecar["format"] = "tttgate-params";
  sidecar["version"] = kParamFileVersion;
  sidecar["config"] = config_to_json(config);
  std::filesystem::path side = path;
  side += ".json";
  io::write_file_atomic(side, sidecar.dump(2) + "\n");
}

ParamFile load_params(const std::filesystem::path& path) {
  return decode_params(io::read_file_bytes(path));
}

}  // namespace tttgate::ttt
