#include "tttgate/backbone/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "tttgate/error.hpp"
#include "tttgate/io/binary.hpp"
#include "tttgate/numerics/kernels.hpp"
#include "tttgate/numerics/ops.hpp"
#include "tttgate/numerics/random.hpp"

namespace tttgate::backbone {

namespace {

constexpr std::string_view kMagic = "TTTGBBN1";

std::vector<Real> ones(std::size_t n) { return std::vector<Real>(n, 1.0); }
std::vector<Real> zeros(std::size_t n) { return std::vector<Real>(n, 0.0); }

Matrix layer_norm_rows(const Matrix& x, std::span<const Real> gamma, std::span<const Real> beta) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto y = layer_norm_forward(x.row(r), gamma, beta).y;
    std::copy(y.begin(), y.end(), out.row(r).begin());
  }
  return out;
}

Real gelu(Real x) {
  constexpr Real c = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

Matrix causal_attention(const Matrix& x, const BlockWeights& b, std::size_t n_heads) {
  const std::size_t T = x.rows();
  const std::size_t D = x.cols();
  const std::size_t hd = D / n_heads;
  const Matrix qkv = matmul(x, b.w_qkv);
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(hd));
  Matrix ctx(T, D);
  std::vector<Real> p(T);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Matrix q = qkv.slice_cols(h * hd, hd);
    const Matrix k = qkv.slice_cols(D + h * hd, hd);
    const Matrix v = qkv.slice_cols(2 * D + h * hd, hd);
    for (std::size_t t = 0; t < T; ++t) {
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t s = 0; s <= t; ++s) {
        p[s] = simd::dot(q.row(t), k.row(s)) * scale;
        mx = std::max(mx, p[s]);
      }
      Real z = 0.0;
      for (std::size_t s = 0; s <= t; ++s) z += (p[s] = std::exp(p[s] - mx));
      auto out = ctx.row(t).subspan(h * hd, hd);
      for (std::size_t s = 0; s <= t; ++s) simd::axpy(p[s] / z, v.row(s), out);
    }
  }
  return matmul(ctx, b.w_o);
}

Matrix mlp(const Matrix& x, const BlockWeights& b) {
  Matrix h = matmul(x, b.w_fc);
  for (auto& e : h.values()) e = gelu(e);
  return matmul(h, b.w_proj);
}

}  // namespace

void BackboneConfig::validate() const {
  if (vocab_size == 0 || vocab_size > kVocabSize) throw ConfigError("backbone: vocab_size must be in [1, 256]");
  if (model_dim < 2 || model_dim % 2 != 0) throw ConfigError("backbone: model_dim must be even and >= 2");
  if (n_heads == 0 || model_dim % n_heads != 0) throw ConfigError("backbone: n_heads must divide model_dim");
  if (mlp_mult == 0 || max_positions == 0) throw ConfigError("backbone: mlp_mult and max_positions must be >= 1");
  if (!(block_init_std >= 0.0) || !(position_init_std >= 0.0) || !std::isfinite(readout_scale))
    throw ConfigError("backbone: init scales must be finite and non-negative");
}

BackboneWeights BackboneWeights::initialize(const BackboneConfig& config) {
  config.validate();
  const std::size_t D = config.model_dim;
  const std::size_t V = config.vocab_size;
  const std::size_t half = D / 2;
  Rng rng(Rng::derive(config.seed, 0x62626f6e65ULL));

  BackboneWeights w;
  w.config = config;
  w.token_embedding = Matrix(V, D);
  for (std::size_t t = 0; t < V; ++t)
    for (std::size_t i = 0; i < half; ++i) w.token_embedding(t, i) = rng.normal();
  w.position_embedding = random_normal(rng, config.max_positions, D, config.position_init_std);

  for (std::size_t l = 0; l < config.n_blocks; ++l) {
    BlockWeights b;
    b.ln1_gamma = ones(D);
    b.ln1_beta = zeros(D);
    b.w_qkv = random_normal(rng, D, 3 * D, config.block_init_std);
    b.w_o = random_normal(rng, D, D, config.block_init_std);
    b.ln2_gamma = ones(D);
    b.ln2_beta = zeros(D);
    b.w_fc = random_normal(rng, D, config.mlp_mult * D, config.block_init_std);
    b.w_proj = random_normal(rng, config.mlp_mult * D, D, config.block_init_std);
    w.blocks.push_back(std::move(b));
  }
  w.lnf_gamma = ones(D);
  w.lnf_beta = zeros(D);

  w.lm_head = Matrix(D, V);
  const Real s = config.readout_scale / std::sqrt(static_cast<Real>(half));
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t t = 0; t < V; ++t) w.lm_head(half + i, t) = s * w.token_embedding(t, i);
  return w;
}

void BackboneWeights::validate() const {
  config.validate();
  const std::size_t D = config.model_dim;
  const std::size_t V = config.vocab_size;
  const std::size_t F = config.mlp_mult * D;
  auto shape = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c) throw ConfigError(std::string("backbone: bad shape for ") + name);
    if (!m.all_finite()) throw ConfigError(std::string("backbone: non-finite ") + name);
  };
  auto vec = [](const std::vector<Real>& v, std::size_t n, const char* name) {
    if (v.size() != n) throw ConfigError(std::string("backbone: bad length for ") + name);
  };
  shape(token_embedding, V, D, "token_embedding");
  shape(position_embedding, config.max_positions, D, "position_embedding");
  if (blocks.size() != config.n_blocks) throw ConfigError("backbone: block count mismatch");
  for (const auto& b : blocks) {
    vec(b.ln1_gamma, D, "ln1_gamma");
    vec(b.ln1_beta, D, "ln1_beta");
    vec(b.ln2_gamma, D, "ln2_gamma");
    vec(b.ln2_beta, D, "ln2_beta");
    shape(b.w_qkv, D, 3 * D, "w_qkv");
    shape(b.w_o, D, D, "w_o");
    shape(b.w_fc, D, F, "w_fc");
    shape(b.w_proj, F, D, "w_proj");
  }
  vec(lnf_gamma, D, "lnf_gamma");
  vec(lnf_beta, D, "lnf_beta");
  shape(lm_head, D, V, "lm_head");
}

std::vector<std::uint8_t> encode_backbone(const BackboneWeights& w) {
  w.validate();
  const auto& c = w.config;
  io::BinaryWriter out;
  out.magic(kMagic);
  out.u32(kBackboneFileVersion);
  out.u64(c.vocab_size);
  out.u64(c.model_dim);
  out.u64(c.n_blocks);
  out.u64(c.n_heads);
  out.u64(c.mlp_mult);
  out.u64(c.max_positions);
  out.f64(c.block_init_std);
  out.f64(c.position_init_std);
  out.f64(c.readout_scale);
  out.u64(c.seed);
  out.matrix(w.token_embedding);
  out.matrix(w.position_embedding);
  for (const auto& b : w.blocks) {
    out.vector(b.ln1_gamma);
    out.vector(b.ln1_beta);
    out.matrix(b.w_qkv);
    out.matrix(b.w_o);
    out.vector(b.ln2_gamma);
    out.vector(b.ln2_beta);
    out.matrix(b.w_fc);
    out.matrix(b.w_proj);
  }
  out.vector(w.lnf_gamma);
  out.vector(w.lnf_beta);
  out.matrix(w.lm_head);
  return out.buffer();
}

BackboneWeights decode_backbone(std::vector<std::uint8_t> bytes) {
  io::BinaryReader in(std::move(bytes));
  in.expect_magic(kMagic);
  if (const auto v = in.u32(); v != kBackboneFileVersion)
    throw IoError("backbone: unsupported version " + std::to_string(v));
  BackboneWeights w;
  auto& c = w.config;
  c.vocab_size = in.u64();
  c.model_dim = in.u64();
  c.n_blocks = in.u64();
  c.n_heads = in.u64();
  c.mlp_mult = in.u64();
  c.max_positions = in.u64();
  c.block_init_std = in.f64();
  c.position_init_std = in.f64();
  c.readout_scale = in.f64();
  c.seed = in.u64();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("backbone file: ") + e.what());
  }
  w.token_embedding = in.matrix();
  w.position_embedding = in.matrix();
  for (std::size_t l = 0; l < c.n_blocks; ++l) {
    BlockWeights b;
    b.ln1_gamma = in.vector();
    b.ln1_beta = in.vector();
    b.w_qkv = in.matrix();
    b.w_o = in.matrix();
    b.ln2_gamma = in.vector();
    b.ln2_beta = in.vector();
    b.w_fc = in.matrix();
    b.w_proj = in.matrix();
    w.blocks.push_back(std::move(b));
  }
  w.lnf_gamma = in.vector();
  w.lnf_beta = in.vector();
  w.lm_head = in.matrix();
  if (in.remaining() != 0) throw IoError("backbone file: trailing bytes");
  try {
    w.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("backbone file: ") + e.what());
  }
  return w;
}

void save_backbone(const std::filesystem::path& path, const BackboneWeights& w) {
  const auto buf = encode_backbone(w);
  io::write_file_atomic(path, {reinterpret_cast<const char*>(buf.data()), buf.size()});
}

BackboneWeights load_backbone(const std::filesystem::path& path) {
  return decode_backbone(io::read_file_bytes(path));
}

std::uint64_t BackboneWeights::content_hash() const {
  // FNV-1a over the serialized form.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto byte : encode_backbone(*this)) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Backbone::Backbone(BackboneWeights weights) : weights_(std::move(weights)) { weights_.validate(); }

Matrix Backbone::forward(std::span<const Token> tokens) const {
  const auto& c = weights_.config;
  if (tokens.empty()) throw ConfigError("backbone: empty input");
  if (tokens.size() > c.max_positions)
    throw ConfigError("backbone: sequence longer than max_positions");
  Matrix x(tokens.size(), c.model_dim);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] >= c.vocab_size) throw ConfigError("backbone: token id out of vocabulary");
    auto row = x.row(t);
    const auto e = weights_.token_embedding.row(tokens[t]);
    const auto p = weights_.position_embedding.row(t);
    for (std::size_t i = 0; i < c.model_dim; ++i) row[i] = e[i] + p[i];
  }
  for (const auto& b : weights_.blocks) {
    x += causal_attention(layer_norm_rows(x, b.ln1_gamma, b.ln1_beta), b, c.n_heads);
    x += mlp(layer_norm_rows(x, b.ln2_gamma, b.ln2_beta), b);
  }
  if (!x.all_finite()) throw NumericError("backbone: non-finite hidden state");
  return x;
}

Matrix Backbone::logits(const Matrix& residual) const {
  return matmul(layer_norm_rows(residual, weights_.lnf_gamma, weights_.lnf_beta), weights_.lm_head);
}

CrossEntropy cross_entropy(const Matrix& logits, std::span<const Token> labels) {
  if (logits.rows() != labels.size()) throw ConfigError("cross_entropy: label count mismatch");
  if (labels.empty()) throw ConfigError("cross_entropy: empty chunk");
  CrossEntropy ce;
  ce.per_token.resize(labels.size());
  Real total = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] >= logits.cols()) throw ConfigError("cross_entropy: label out of vocabulary");
    const auto row = logits.row(t);
    Real mx = -std::numeric_limits<Real>::infinity();
    for (const Real v : row) mx = std::max(mx, v);
    Real z = 0.0;
    for (const Real v : row) z += std::exp(v - mx);
    const Real loss = std::log(z) + mx - row[labels[t]];
    if (!std::isfinite(loss)) {
      NumericLocation where;
      where.token = t;
      throw NumericError("cross_entropy: non-finite loss", where);
    }
    ce.per_token[t] = std::max(loss, 0.0);
    total += ce.per_token[t];
  }
  ce.mean = total / static_cast<Real>(labels.size());
  return ce;
}

CrossEntropy ce_loss(const Backbone& backbone, const Matrix& residual, const Matrix& ttt_output,
                     std::span<const Token> labels) {
  if (ttt_output.empty()) return cross_entropy(backbone.logits(residual), labels);
  if (ttt_output.rows() != residual.rows() || ttt_output.cols() != residual.cols())
    throw ConfigError("ce_loss: TTT output shape mismatch");
  return cross_entropy(backbone.logits(residual + ttt_output), labels);
}

}  // namespace tttgate::backbone
