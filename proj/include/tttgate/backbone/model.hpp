#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tttgate/backbone/tokens.hpp"
#include "tttgate/numerics/matrix.hpp"

namespace tttgate::backbone {

struct BackboneConfig {
  std::size_t vocab_size = kVocabSize;
  std::size_t model_dim = 64;
  std::size_t n_blocks = 2;
  std::size_t n_heads = 2;
  std::size_t mlp_mult = 4;
  std::size_t max_positions = 1024;
  Real block_init_std = 0.02;
  Real position_init_std = 0.1;
  // Scale of the recall readout in the LM head.
  Real readout_scale = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct BlockWeights {
  std::vector<Real> ln1_gamma, ln1_beta;
  Matrix w_qkv;  // D x 3D
  Matrix w_o;    // D x D
  std::vector<Real> ln2_gamma, ln2_beta;
  Matrix w_fc;    // D x (mlp_mult D)
  Matrix w_proj;  // (mlp_mult D) x D
};

// Frozen toy causal LM. Token embeddings live in the first half of the
// residual stream; the untied LM head reads the second half, which the
// blocks barely touch, so next-token quality comes from what is written there.
struct BackboneWeights {
  BackboneConfig config;
  Matrix token_embedding;     // V x D
  Matrix position_embedding;  // max_positions x D
  std::vector<BlockWeights> blocks;
  std::vector<Real> lnf_gamma, lnf_beta;
  Matrix lm_head;  // D x V

  static BackboneWeights initialize(const BackboneConfig& config);

  void validate() const;
  std::uint64_t content_hash() const;
};

inline constexpr std::uint32_t kBackboneFileVersion = 1;

std::vector<std::uint8_t> encode_backbone(const BackboneWeights& w);
BackboneWeights decode_backbone(std::vector<std::uint8_t> bytes);
void save_backbone(const std::filesystem::path& path, const BackboneWeights& w);
BackboneWeights load_backbone(const std::filesystem::path& path);

class Backbone {
 public:
  explicit Backbone(BackboneWeights weights);

  const BackboneWeights& weights() const noexcept { return weights_; }
  const BackboneConfig& config() const noexcept { return weights_.config; }

  // Residual stream after the final block, one row per input position.
  Matrix forward(std::span<const Token> tokens) const;

  // LM logits for residual rows: LN_f(residual) * lm_head.
  Matrix logits(const Matrix& residual) const;

 private:
  BackboneWeights weights_;
};

struct CrossEntropy {
  std::vector<Real> per_token;
  Real mean = 0.0;
};

// Mean of -log softmax(logits[t])[labels[t]], in nats.
CrossEntropy cross_entropy(const Matrix& logits, std::span<const Token> labels);

// Teacher-forced CE of a chunk with the TTT output added to the residual
// stream after the final block (ttt_output may be empty for the bare backbone).
CrossEntropy ce_loss(const Backbone& backbone, const Matrix& residual, const Matrix& ttt_output,
                     std::span<const Token> labels);

}  // namespace tttgate::backbone
