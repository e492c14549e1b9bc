#pragma once

#include <span>

#include "tttgate/harness/metrics.hpp"

namespace tttgate::harness {

struct Run {
  SuiteResult result;
  ReportSummary summary;
};

Run evaluate(const Model& model, std::span<const backbone::Sequence> sequences,
             const SuiteConfig& config);

struct ShuffledAblation {
  Run normal;
  Run shuffled;
  Real improvement_normal = 0.0;    // (skip - gate) / skip
  Real improvement_shuffled = 0.0;
};

// Same config and seeds on the corpus and on its per-sequence shuffle.
// Requires the gate policy.
ShuffledAblation sanity_shuffled(const Model& model, std::span<const backbone::Sequence> sequences,
                                 const SuiteConfig& config);

struct DiagonalAblation {
  Run include_diagonal;  // k = 0
  Run strict_causal;     // k = -1
};

// Identical runs that differ only in the layer's mask diagonal.
DiagonalAblation ablate_diagonal(const backbone::Backbone& backbone, const ttt::TttConfig& ttt_config,
                                 const ttt::ProjectionParams& params,
                                 std::span<const backbone::Sequence> sequences,
                                 const SuiteConfig& config);

}  // namespace tttgate::harness
