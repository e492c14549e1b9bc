#include "tttgate/harness/ablation.hpp"

#include <algorithm>

#include "tttgate/error.hpp"

namespace tttgate::harness {

Run evaluate(const Model& model, std::span<const backbone::Sequence> sequences,
             const SuiteConfig& config) {
  Run run;
  run.result = run_policy_suite(model, sequences, config);
  run.summary = summarize(run.result, config);
  return run;
}

ShuffledAblation sanity_shuffled(const Model& model, std::span<const backbone::Sequence> sequences,
                                 const SuiteConfig& config) {
  if (std::find(config.policies.begin(), config.policies.end(), PolicyKind::kGate) ==
      config.policies.end())
    throw ConfigError("shuffled ablation needs the gate policy");
  ShuffledAblation out;
  out.normal = evaluate(model, sequences, config);
  const auto shuffled = backbone::shuffle_sequences(sequences, config.seed);
  out.shuffled = evaluate(model, shuffled, config);
  out.improvement_normal = gate_improvement(out.normal.summary);
  out.improvement_shuffled = gate_improvement(out.shuffled.summary);
  return out;
}

DiagonalAblation ablate_diagonal(const backbone::Backbone& backbone, const ttt::TttConfig& ttt_config,
                                 const ttt::ProjectionParams& params,
                                 std::span<const backbone::Sequence> sequences,
                                 const SuiteConfig& config) {
  auto with_k = [&](int k) {
    auto cfg = ttt_config;
    cfg.mask_diagonal = k;
    const ttt::TttLayer layer(cfg, params);
    return evaluate(Model{backbone, layer}, sequences, config);
  };
  DiagonalAblation out;
  out.include_diagonal = with_k(0);
  out.strict_causal = with_k(-1);
  return out;
}

}  // namespace tttgate::harness
