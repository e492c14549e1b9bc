#pragma once

// TTT-Linear fast-weight layer.
//
// Per head h and token t (row vectors, head_dim d):
//   z_t   = k_t W + b
//   loss_t = || LN(z_t) - (v_t - k_t) ||^2
//   out_t = LN(q_t W_t + b_t) + q_t
// The chunk-mean loss is the self-supervised objective. Inside a chunk every
// token's gradient is taken at the chunk-start weights (W_0, b_0) and scaled by
// 1/T, so the per-token recurrence
//   W_t = W_0 - sum_{i in mask(t)} eta_i k_i^T g_i,  g_i = dL/dz_i
// has the closed-form dual
//   Z = Q W_0 + b_0 - (tril_k(Q K^T + 1) * eta) G.
// mask(t) is {i <= t} for k = 0 and {i < t} for k = -1; the end-of-chunk state
// always includes every token of the chunk.

#include <cstdint>
#include <span>
#include <vector>

#include "tttgate/numerics/matrix.hpp"
#include "tttgate/numerics/ops.hpp"

namespace tttgate::ttt {

struct TttConfig {
  std::size_t model_dim = 64;
  std::size_t n_heads = 2;
  std::size_t head_dim = 32;
  std::size_t conv_width = 2;
  Real base_inner_lr = 1.0;
  Real recon_weight_beta = 0.1;  // outer-loop weight; carried for reporting only
  std::size_t chunk_size = 64;
  int mask_diagonal = 0;  // 0 or -1
  Real ln_eps = kLayerNormEps;

  void validate() const;
};

enum class InitScheme {
  // Recall-oriented construction: K sees the previous token, Q the current
  // one, so fast weights store "token -> successor" associations.
  kAssociative,
  // Orthogonal-like random projections, identity conv taps (Q == K).
  kRandom,
};

struct ProjectionParams {
  Matrix wq_base;                   // D x D, shared base for Q and K
  Matrix conv_q;                    // conv_width x D
  Matrix conv_k;                    // conv_width x D
  Matrix wv;                        // D x D
  std::vector<Real> lr_gate_weight; // D
  Real lr_gate_bias = 0.0;
  std::vector<Real> ln_gamma;       // head_dim
  std::vector<Real> ln_beta;        // head_dim
  Matrix w_out;                     // D x D, applied after the residual add
  std::vector<Matrix> w0;           // per head, head_dim x head_dim
  std::vector<std::vector<Real>> b0;  // per head, head_dim

  static ProjectionParams initialize(const TttConfig& config, std::uint64_t seed,
                                     InitScheme scheme = InitScheme::kAssociative);

  void validate(const TttConfig& config) const;
};

struct FastWeightState {
  std::vector<Matrix> w;
  std::vector<std::vector<Real>> b;
  std::uint64_t chunks_seen = 0;

  static FastWeightState initial(const ProjectionParams& params);

  bool all_finite() const noexcept;
  friend bool operator==(const FastWeightState&, const FastWeightState&) = default;
};

// Q, K, V projections of one chunk (T x model_dim) and per-token inner rates.
struct ChunkViews {
  Matrix q;
  Matrix k;
  Matrix v;
  std::vector<Real> eta;

  std::size_t tokens() const noexcept { return q.rows(); }
  Real eta_mean() const;
};

// One head's slice of the views, T x head_dim each.
struct HeadViews {
  Matrix q;
  Matrix k;
  Matrix v;
};

std::vector<Matrix> split_heads(const Matrix& x, std::size_t n_heads);
Matrix merge_heads(std::span<const Matrix> heads);
HeadViews head_views(const ChunkViews& views, std::size_t head, std::size_t n_heads);

// Inner LayerNorm parameters shared by all heads.
struct InnerNorm {
  std::span<const Real> gamma;
  std::span<const Real> beta;
  Real eps = kLayerNormEps;
};

struct ReconLoss {
  std::vector<Real> per_token;
  Real mean = 0.0;
};

ReconLoss recon_loss(const Matrix& w, std::span<const Real> b, const Matrix& k, const Matrix& v,
                     const InnerNorm& norm);

struct InnerGradient {
  Matrix dw;
  std::vector<Real> db;
};

// Gradient of the chunk-mean reconstruction loss with respect to (W, b).
InnerGradient inner_gradient(const Matrix& w, std::span<const Real> b, const Matrix& k,
                             const Matrix& v, const InnerNorm& norm);

struct HeadForward {
  Matrix outputs;  // T x head_dim, LN(q W_t + b_t) + q
  std::vector<Real> per_token_recon;
  Matrix w;  // end-of-chunk fast weight
  std::vector<Real> b;
};

// Sequential reference: walks the chunk token by token, materialising W_t.
HeadForward primal_head_forward(const Matrix& w0, std::span<const Real> b0, const HeadViews& views,
                                std::span<const Real> eta, const InnerNorm& norm, int mask_diagonal);

// Parallel form via masked batched products; equal to the primal up to rounding.
HeadForward dual_head_forward(const Matrix& w0, std::span<const Real> b0, const HeadViews& views,
                              std::span<const Real> eta, const InnerNorm& norm, int mask_diagonal);

struct ChunkForwardResult {
  Matrix outputs;  // T x model_dim, after w_out
  Real recon_loss_scalar = 0.0;
  std::vector<Real> per_token_recon;  // mean over heads
  std::vector<Real> eta;
};

struct ChunkStep {
  ChunkForwardResult result;
  FastWeightState state;
};

struct Improvement {
  Real delta = 0.0;
  Real loss0 = 0.0;
  Real loss1 = 0.0;
};

class TttLayer {
 public:
  TttLayer(TttConfig config, ProjectionParams params);

  const TttConfig& config() const noexcept { return config_; }
  const ProjectionParams& params() const noexcept { return params_; }
  InnerNorm norm() const noexcept { return {params_.ln_gamma, params_.ln_beta, config_.ln_eps}; }

  FastWeightState initial_state() const { return FastWeightState::initial(params_); }

  // `left_context` holds hidden rows that precede the chunk in its sequence
  // (may be empty); only the last conv_width - 1 rows are used.
  ChunkViews project_views(const Matrix& hidden, const Matrix& left_context = {}) const;

  ChunkStep primal_forward_update(const FastWeightState& state, const ChunkViews& views) const;
  ChunkStep primal_forward_update(const FastWeightState& state, const ChunkViews& views,
                                  int mask_diagonal) const;
  ChunkStep dual_forward(const FastWeightState& state, const ChunkViews& views) const;
  ChunkStep dual_forward(const FastWeightState& state, const ChunkViews& views,
                         int mask_diagonal) const;

  // Mean over tokens and heads of the reconstruction loss at `state`.
  ReconLoss recon_loss(const FastWeightState& state, const ChunkViews& views) const;

  // One chunk-level gradient step on every head: W <- W - eta_mean * dW.
  FastWeightState apply_chunk_update(const FastWeightState& state, const ChunkViews& views,
                                     Real eta_mean) const;

  // Reconstruction-loss reduction from one apply_chunk_update; `state` is untouched.
  Improvement ttt_improvement(const FastWeightState& state, const ChunkViews& views,
                              Real eta_mean) const;

 private:
  ChunkStep forward_impl(const FastWeightState& state, const ChunkViews& views, int mask_diagonal,
                         bool dual) const;
  void check_views(const ChunkViews& views) const;
  void check_state(const FastWeightState& state) const;

  TttConfig config_;
  ProjectionParams params_;
};

}  // namespace tttgate::ttt
