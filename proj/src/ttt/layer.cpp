#include "tttgate/ttt/layer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "tttgate/error.hpp"
#include "tttgate/numerics/kernels.hpp"
#include "tttgate/numerics/random.hpp"

namespace tttgate::ttt {

namespace {

// Loss and dL/dz for one token at (w, b); `scale` multiplies the gradient
// (1/T for the chunk mean).
struct TokenTerm {
  Real loss = 0.0;
  std::vector<Real> grad_z;
};

TokenTerm token_term(const Matrix& w, std::span<const Real> b, std::span<const Real> k,
                     std::span<const Real> v, const InnerNorm& norm, Real scale) {
  std::vector<Real> z = vecmat(k, w);
  for (std::size_t j = 0; j < z.size(); ++j) z[j] += b[j];
  LayerNormResult ln = layer_norm_forward(z, norm.gamma, norm.beta, norm.eps);
  TokenTerm term;
  std::vector<Real> grad_y(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    const Real err = ln.y[j] - (v[j] - k[j]);
    term.loss += err * err;
    grad_y[j] = 2.0 * err * scale;
  }
  term.grad_z = layer_norm_backward(grad_y, ln.cache);
  return term;
}

void require_finite(std::span<const Real> values, const char* what, std::size_t token) {
  for (Real v : values) {
    if (!std::isfinite(v)) {
      NumericLocation where;
      where.token = token;
      throw NumericError(std::string("non-finite ") + what, where);
    }
  }
}

void check_head_shapes(const Matrix& w, std::span<const Real> b, const Matrix& k, const Matrix& v) {
  const std::size_t d = w.rows();
  if (w.cols() != d || b.size() != d) throw ConfigError("fast weight / bias shape mismatch");
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows())
    throw ConfigError("head view shape mismatch");
}

Matrix tap_kernel(std::size_t width, std::size_t dim, std::size_t tap) {
  Matrix m(width, dim);
  for (std::size_t c = 0; c < dim; ++c) m(tap, c) = 1.0;
  return m;
}

}  // namespace

void TttConfig::validate() const {
  if (model_dim == 0 || n_heads == 0 || head_dim == 0 || conv_width == 0 || chunk_size == 0)
    throw ConfigError("TttConfig: all counts must be >= 1");
  if (model_dim != n_heads * head_dim)
    throw ConfigError("TttConfig: model_dim must equal n_heads * head_dim");
  if (!(base_inner_lr > 0) || !std::isfinite(base_inner_lr))
    throw ConfigError("TttConfig: base_inner_lr must be > 0");
  if (!(recon_weight_beta >= 0)) throw ConfigError("TttConfig: recon_weight_beta must be >= 0");
  if (mask_diagonal != 0 && mask_diagonal != -1)
    throw ConfigError("TttConfig: mask_diagonal must be 0 or -1");
  if (!(ln_eps > 0)) throw ConfigError("TttConfig: ln_eps must be > 0");
}

ProjectionParams ProjectionParams::initialize(const TttConfig& config, std::uint64_t seed,
                                              InitScheme scheme) {
  config.validate();
  const std::size_t dim = config.model_dim;
  const std::size_t hd = config.head_dim;
  Rng rng(Rng::derive(seed, 0x7474'7400));

  ProjectionParams p;
  const Matrix orth = random_orthogonal(rng, dim);
  p.lr_gate_weight.assign(dim, 0.0);
  p.lr_gate_bias = 0.0;
  p.ln_gamma.assign(hd, 1.0);
  p.ln_beta.assign(hd, 0.0);
  p.conv_q = tap_kernel(config.conv_width, dim, 0);

  if (scheme == InitScheme::kAssociative) {
    if (dim % 2 != 0) throw ConfigError("associative init needs an even model_dim");
    const Real inv_sqrt2 = 1.0 / std::sqrt(2.0);
    p.wq_base = orth * inv_sqrt2;
    p.wv = orth * inv_sqrt2;
    // K_t = base_{t-1} when the kernel is wide enough for a one-step shift.
    p.conv_k = tap_kernel(config.conv_width, dim, config.conv_width >= 2 ? 1 : 0);
    // Token subspace [0, D/2) of the residual stream moves to the readout
    // subspace [D/2, D): w_out = sqrt(2) * O^T * J.
    Matrix shift(dim, dim);
    for (std::size_t i = 0; i < dim / 2; ++i) shift(i, i + dim / 2) = 1.0;
    p.w_out = matmul(transpose(orth), shift) * std::sqrt(2.0);
  } else {
    p.wq_base = orth;
    p.wv = random_orthogonal(rng, dim);
    p.conv_k = tap_kernel(config.conv_width, dim, 0);
    p.w_out = random_orthogonal(rng, dim);
  }

  const Real w0_scale = 0.1 / std::sqrt(static_cast<Real>(hd));
  for (std::size_t h = 0; h < config.n_heads; ++h) {
    p.w0.push_back(random_normal(rng, hd, hd, w0_scale));
    p.b0.emplace_back(hd, 0.0);
  }
  return p;
}

void ProjectionParams::validate(const TttConfig& config) const {
  config.validate();
  const std::size_t dim = config.model_dim;
  const std::size_t hd = config.head_dim;
  auto shape = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c)
      throw ConfigError(std::string("ProjectionParams: bad shape for ") + name);
    if (!m.all_finite()) throw ConfigError(std::string("ProjectionParams: non-finite ") + name);
  };
  shape(wq_base, dim, dim, "wq_base");
  shape(conv_q, config.conv_width, dim, "conv_q");
  shape(conv_k, config.conv_width, dim, "conv_k");
  shape(wv, dim, dim, "wv");
  shape(w_out, dim, dim, "w_out");
  if (lr_gate_weight.size() != dim) throw ConfigError("ProjectionParams: bad lr_gate_weight");
  if (ln_gamma.size() != hd || ln_beta.size() != hd)
    throw ConfigError("ProjectionParams: bad inner LayerNorm parameters");
  if (w0.size() != config.n_heads || b0.size() != config.n_heads)
    throw ConfigError("ProjectionParams: per-head initial state count mismatch");
  for (std::size_t h = 0; h < config.n_heads; ++h) {
    shape(w0[h], hd, hd, "w0");
    if (b0[h].size() != hd) throw ConfigError("ProjectionParams: bad b0");
  }
}

FastWeightState FastWeightState::initial(const ProjectionParams& params) {
  FastWeightState s;
  s.w = params.w0;
  s.b = params.b0;
  return s;
}

bool FastWeightState::all_finite() const noexcept {
  for (const auto& m : w)
    if (!m.all_finite()) return false;
  for (const auto& v : b)
    for (Real x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

Real ChunkViews::eta_mean() const {
  if (eta.empty()) throw ConfigError("ChunkViews: no tokens");
  return std::accumulate(eta.begin(), eta.end(), 0.0) / static_cast<Real>(eta.size());
}

std::vector<Matrix> split_heads(const Matrix& x, std::size_t n_heads) {
  if (n_heads == 0 || x.cols() % n_heads != 0) throw ConfigError("split_heads: bad head count");
  const std::size_t hd = x.cols() / n_heads;
  std::vector<Matrix> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) heads.push_back(x.slice_cols(h * hd, hd));
  return heads;
}

Matrix merge_heads(std::span<const Matrix> heads) {
  if (heads.empty()) throw ConfigError("merge_heads: no heads");
  const std::size_t rows = heads.front().rows();
  const std::size_t hd = heads.front().cols();
  Matrix out(rows, hd * heads.size());
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (heads[h].rows() != rows || heads[h].cols() != hd)
      throw ConfigError("merge_heads: ragged heads");
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < hd; ++c) out(r, h * hd + c) = heads[h](r, c);
  }
  return out;
}

HeadViews head_views(const ChunkViews& views, std::size_t head, std::size_t n_heads) {
  if (n_heads == 0 || views.q.cols() % n_heads != 0 || head >= n_heads)
    throw ConfigError("head_views: bad head index");
  const std::size_t hd = views.q.cols() / n_heads;
  return {views.q.slice_cols(head * hd, hd), views.k.slice_cols(head * hd, hd),
          views.v.slice_cols(head * hd, hd)};
}

ReconLoss recon_loss(const Matrix& w, std::span<const Real> b, const Matrix& k, const Matrix& v,
                     const InnerNorm& norm) {
  check_head_shapes(w, b, k, v);
  if (k.rows() == 0) throw ConfigError("recon_loss: empty chunk");
  ReconLoss out;
  out.per_token.resize(k.rows());
  for (std::size_t t = 0; t < k.rows(); ++t) {
    std::vector<Real> z = vecmat(k.row(t), w);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += b[j];
    const LayerNormResult ln = layer_norm_forward(z, norm.gamma, norm.beta, norm.eps);
    Real loss = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const Real err = ln.y[j] - (v(t, j) - k(t, j));
      loss += err * err;
    }
    out.per_token[t] = loss;
    out.mean += loss;
  }
  out.mean /= static_cast<Real>(k.rows());
  return out;
}

InnerGradient inner_gradient(const Matrix& w, std::span<const Real> b, const Matrix& k,
                             const Matrix& v, const InnerNorm& norm) {
  check_head_shapes(w, b, k, v);
  const std::size_t steps = k.rows();
  if (steps == 0) throw ConfigError("inner_gradient: empty chunk");
  const std::size_t d = w.rows();
  InnerGradient g{Matrix(d, d), std::vector<Real>(d, 0.0)};
  const Real scale = 1.0 / static_cast<Real>(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const TokenTerm term = token_term(w, b, k.row(t), v.row(t), norm, scale);
    const auto kt = k.row(t);
    for (std::size_t i = 0; i < d; ++i)
      if (kt[i] != 0.0) simd::axpy(kt[i], term.grad_z, g.dw.row(i));
    for (std::size_t j = 0; j < d; ++j) g.db[j] += term.grad_z[j];
  }
  return g;
}

HeadForward primal_head_forward(const Matrix& w0, std::span<const Real> b0, const HeadViews& views,
                                std::span<const Real> eta, const InnerNorm& norm,
                                int mask_diagonal) {
  check_head_shapes(w0, b0, views.k, views.v);
  const std::size_t steps = views.k.rows();
  const std::size_t d = w0.rows();
  if (views.q.rows() != steps || views.q.cols() != d) throw ConfigError("query view shape mismatch");
  if (eta.size() != steps) throw ConfigError("eta length mismatch");
  if (mask_diagonal != 0 && mask_diagonal != -1) throw ConfigError("mask_diagonal must be 0 or -1");

  const Real scale = 1.0 / static_cast<Real>(steps);
  HeadForward out{Matrix(steps, d), std::vector<Real>(steps), w0, {b0.begin(), b0.end()}};
  for (std::size_t t = 0; t < steps; ++t) {
    // Mini-batch convention: the gradient is evaluated at the chunk-start weights.
    const TokenTerm term = token_term(w0, b0, views.k.row(t), views.v.row(t), norm, scale);
    out.per_token_recon[t] = term.loss;
    auto step = [&] {
      const auto kt = views.k.row(t);
      for (std::size_t i = 0; i < d; ++i)
        if (kt[i] != 0.0) simd::axpy(-eta[t] * kt[i], term.grad_z, out.w.row(i));
      for (std::size_t j = 0; j < d; ++j) out.b[j] -= eta[t] * term.grad_z[j];
    };
    if (mask_diagonal == 0) step();
    std::vector<Real> z = vecmat(views.q.row(t), out.w);
    for (std::size_t j = 0; j < d; ++j) z[j] += out.b[j];
    const LayerNormResult ln = layer_norm_forward(z, norm.gamma, norm.beta, norm.eps);
    for (std::size_t j = 0; j < d; ++j) out.outputs(t, j) = ln.y[j] + views.q(t, j);
    if (mask_diagonal == -1) step();
    require_finite(out.outputs.row(t), "TTT output", t);
    require_finite(std::span<const Real>(&out.per_token_recon[t], 1), "reconstruction loss", t);
  }
  if (!out.w.all_finite()) throw NumericError("non-finite fast weight after chunk");
  require_finite(out.b, "fast-weight bias", steps - 1);
  return out;
}

HeadForward dual_head_forward(const Matrix& w0, std::span<const Real> b0, const HeadViews& views,
                              std::span<const Real> eta, const InnerNorm& norm, int mask_diagonal) {
  check_head_shapes(w0, b0, views.k, views.v);
  const std::size_t steps = views.k.rows();
  const std::size_t d = w0.rows();
  if (views.q.rows() != steps || views.q.cols() != d) throw ConfigError("query view shape mismatch");
  if (eta.size() != steps) throw ConfigError("eta length mismatch");

  const Real scale = 1.0 / static_cast<Real>(steps);
  HeadForward out{Matrix(steps, d), std::vector<Real>(steps), w0, {b0.begin(), b0.end()}};

  // G: per-token gradients at the chunk-start weights.
  Matrix grads(steps, d);
  for (std::size_t t = 0; t < steps; ++t) {
    TokenTerm term = token_term(w0, b0, views.k.row(t), views.v.row(t), norm, scale);
    out.per_token_recon[t] = term.loss;
    std::copy(term.grad_z.begin(), term.grad_z.end(), grads.row(t).begin());
  }

  // A = tril_k(Q K^T + 1) with column i scaled by eta_i.
  Matrix scores = matmul_nt(views.q, views.k);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < steps; ++i) scores(t, i) = (scores(t, i) + 1.0) * eta[i];
  const Matrix attn = tril_weighted_sum(scores, TriangularMask(steps, mask_diagonal));

  Matrix z = matmul(views.q, w0);
  z -= matmul(attn, grads);
  for (std::size_t t = 0; t < steps; ++t) {
    auto zt = z.row(t);
    for (std::size_t j = 0; j < d; ++j) zt[j] += b0[j];
    const LayerNormResult ln = layer_norm_forward(zt, norm.gamma, norm.beta, norm.eps);
    for (std::size_t j = 0; j < d; ++j) out.outputs(t, j) = ln.y[j] + views.q(t, j);
    require_finite(out.outputs.row(t), "TTT output", t);
    require_finite(std::span<const Real>(&out.per_token_recon[t], 1), "reconstruction loss", t);
  }

  // W_T = W_0 - K^T diag(eta) G,  b_T = b_0 - sum_t eta_t g_t
  Matrix scaled = grads;
  for (std::size_t t = 0; t < steps; ++t)
    for (Real& g : scaled.row(t)) g *= eta[t];
  out.w -= matmul_tn(views.k, scaled);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < d; ++j) out.b[j] -= scaled(t, j);
  if (!out.w.all_finite()) throw NumericError("non-finite fast weight after chunk");
  require_finite(out.b, "fast-weight bias", steps - 1);
  return out;
}

TttLayer::TttLayer(TttConfig config, ProjectionParams params)
    : config_(config), params_(std::move(params)) {
  params_.validate(config_);
}

void TttLayer::check_views(const ChunkViews& views) const {
  const std::size_t steps = views.q.rows();
  if (steps == 0) throw ConfigError("empty chunk");
  for (const Matrix* m : {&views.q, &views.k, &views.v})
    if (m->rows() != steps || m->cols() != config_.model_dim)
      throw ConfigError("chunk views do not match model_dim");
  if (views.eta.size() != steps) throw ConfigError("eta length mismatch");
}

void TttLayer::check_state(const FastWeightState& state) const {
  if (state.w.size() != config_.n_heads || state.b.size() != config_.n_heads)
    throw ConfigError("fast-weight state head count mismatch");
}

ChunkViews TttLayer::project_views(const Matrix& hidden, const Matrix& left_context) const {
  if (hidden.rows() == 0) throw ConfigError("project_views: empty chunk");
  if (hidden.cols() != config_.model_dim) throw ConfigError("project_views: hidden width mismatch");
  if (!left_context.empty() && left_context.cols() != config_.model_dim)
    throw ConfigError("project_views: context width mismatch");

  const std::size_t steps = hidden.rows();
  const std::size_t keep = std::min(left_context.rows(), config_.conv_width - 1);
  const Matrix context = left_context.slice_rows(left_context.rows() - keep, keep);
  const Matrix full = vstack(context, hidden);
  const Matrix base = matmul(full, params_.wq_base);

  ChunkViews views;
  views.q = causal_conv1d(base, params_.conv_q).slice_rows(keep, steps);
  views.k = causal_conv1d(base, params_.conv_k).slice_rows(keep, steps);
  views.v = matmul(hidden, params_.wv);
  views.eta.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Real logit = simd::dot(hidden.row(t), params_.lr_gate_weight) + params_.lr_gate_bias;
    views.eta[t] = config_.base_inner_lr * sigmoid(logit);
  }
  return views;
}

ChunkStep TttLayer::forward_impl(const FastWeightState& state, const ChunkViews& views,
                                 int mask_diagonal, bool dual) const {
  check_views(views);
  check_state(state);
  const std::size_t steps = views.tokens();
  const InnerNorm inner = norm();

  ChunkStep step;
  step.state.chunks_seen = state.chunks_seen + 1;
  step.result.eta = views.eta;
  step.result.per_token_recon.assign(steps, 0.0);
  std::vector<Matrix> head_out;
  head_out.reserve(config_.n_heads);
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    const HeadViews hv = head_views(views, h, config_.n_heads);
    HeadForward hf;
    try {
      hf = dual ? dual_head_forward(state.w[h], state.b[h], hv, views.eta, inner, mask_diagonal)
                : primal_head_forward(state.w[h], state.b[h], hv, views.eta, inner, mask_diagonal);
    } catch (const NumericError& e) {
      NumericLocation where;
      where.head = h;
      throw e.located(where);
    }
    for (std::size_t t = 0; t < steps; ++t) step.result.per_token_recon[t] += hf.per_token_recon[t];
    head_out.push_back(std::move(hf.outputs));
    step.state.w.push_back(std::move(hf.w));
    step.state.b.push_back(std::move(hf.b));
  }
  const Real inv_heads = 1.0 / static_cast<Real>(config_.n_heads);
  Real total = 0.0;
  for (Real& v : step.result.per_token_recon) {
    v *= inv_heads;
    total += v;
  }
  step.result.recon_loss_scalar = total / static_cast<Real>(steps);
  step.result.outputs = matmul(merge_heads(head_out), params_.w_out);
  if (!step.result.outputs.all_finite()) throw NumericError("non-finite projected TTT output");
  return step;
}

ChunkStep TttLayer::primal_forward_update(const FastWeightState& state,
                                          const ChunkViews& views) const {
  return forward_impl(state, views, config_.mask_diagonal, false);
}

ChunkStep TttLayer::primal_forward_update(const FastWeightState& state, const ChunkViews& views,
                                          int mask_diagonal) const {
  return forward_impl(state, views, mask_diagonal, false);
}

ChunkStep TttLayer::dual_forward(const FastWeightState& state, const ChunkViews& views) const {
  return forward_impl(state, views, config_.mask_diagonal, true);
}

ChunkStep TttLayer::dual_forward(const FastWeightState& state, const ChunkViews& views,
                                 int mask_diagonal) const {
  return forward_impl(state, views, mask_diagonal, true);
}

ReconLoss TttLayer::recon_loss(const FastWeightState& state, const ChunkViews& views) const {
  check_views(views);
  check_state(state);
  const InnerNorm inner = norm();
  ReconLoss total;
  total.per_token.assign(views.tokens(), 0.0);
  const Real inv_heads = 1.0 / static_cast<Real>(config_.n_heads);
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    const HeadViews hv = head_views(views, h, config_.n_heads);
    const ReconLoss head = ttt::recon_loss(state.w[h], state.b[h], hv.k, hv.v, inner);
    for (std::size_t t = 0; t < head.per_token.size(); ++t)
      total.per_token[t] += head.per_token[t] * inv_heads;
  }
  for (Real v : total.per_token) total.mean += v;
  total.mean /= static_cast<Real>(views.tokens());
  return total;
}

FastWeightState TttLayer::apply_chunk_update(const FastWeightState& state, const ChunkViews& views,
                                             Real eta_mean) const {
  check_views(views);
  check_state(state);
  if (!std::isfinite(eta_mean) || eta_mean < 0) throw ConfigError("eta_mean must be finite, >= 0");
  FastWeightState next = state;
  if (eta_mean == 0.0) return next;
  const InnerNorm inner = norm();
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    const HeadViews hv = head_views(views, h, config_.n_heads);
    const InnerGradient g = inner_gradient(state.w[h], state.b[h], hv.k, hv.v, inner);
    next.w[h] -= g.dw * eta_mean;
    for (std::size_t j = 0; j < g.db.size(); ++j) next.b[h][j] -= eta_mean * g.db[j];
  }
  if (!next.all_finite()) throw NumericError("non-finite fast weights after chunk update");
  return next;
}

Improvement TttLayer::ttt_improvement(const FastWeightState& state, const ChunkViews& views,
                                      Real eta_mean) const {
  Improvement imp;
  imp.loss0 = recon_loss(state, views).mean;
  imp.loss1 = recon_loss(apply_chunk_update(state, views, eta_mean), views).mean;
  imp.delta = imp.loss0 - imp.loss1;
  return imp;
}

}  // namespace tttgate::ttt
