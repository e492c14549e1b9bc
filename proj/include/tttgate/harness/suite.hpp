#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tttgate/backbone/model.hpp"
#include "tttgate/backbone/tokens.hpp"
#include "tttgate/gating/controller.hpp"
#include "tttgate/ttt/layer.hpp"

namespace tttgate::harness {

enum class PolicyKind { kSkip, kUpdate1, kGate, kRandom, kOracle };
enum class SignalMode { kRecon, kDelta };
enum class OracleScope { kGlobal, kPerSequence };

std::string_view to_string(PolicyKind p) noexcept;
std::string_view to_string(SignalMode s) noexcept;
std::string_view to_string(OracleScope s) noexcept;
PolicyKind parse_policy(std::string_view name);
SignalMode parse_signal(std::string_view name);
std::vector<PolicyKind> parse_policies(std::string_view comma_list);

struct SuiteConfig {
  std::size_t seq_len = 256;
  std::size_t chunk_size = 64;
  Real rho = 0.5;
  Real alpha = 0.1;
  std::size_t n_cal = 16;
  std::uint64_t seed = 42;
  SignalMode signal = SignalMode::kRecon;
  std::vector<PolicyKind> policies{PolicyKind::kSkip, PolicyKind::kUpdate1, PolicyKind::kGate,
                                   PolicyKind::kRandom, PolicyKind::kOracle};
  OracleScope oracle_scope = OracleScope::kGlobal;
  // Keep fast weights across sequence boundaries instead of resetting.
  bool carry_state = false;

  void validate() const;
};

struct EvalRecord {
  std::size_t sequence_id = 0;
  std::size_t chunk_index = 0;
  Real recon_loss = 0.0;
  Real ttt_delta = 0.0;
  Real ce_skip = 0.0;
  Real ce_update = 0.0;
  std::map<PolicyKind, bool> decisions;
  std::map<PolicyKind, Real> ce_realized;
  std::map<PolicyKind, Real> flops_charged;

  Real advantage() const noexcept { return ce_skip - ce_update; }
  Real signal(SignalMode mode) const noexcept {
    return mode == SignalMode::kDelta ? ttt_delta : recon_loss;
  }
};

struct PolicyCost {
  std::size_t update_count = 0;
  Real relative_flops = 1.0;
};

struct CostLedger {
  std::size_t chunk_count = 0;
  std::map<PolicyKind, PolicyCost> policies;
  // Per-chunk cost of always measuring the update branch (backward + re-forward).
  Real instrumentation_overhead = 2.0;
  // Extra per-chunk cost of computing the delta signal (0 in recon mode).
  Real measurement_overhead = 0.0;
};

enum class CostModel { kSkip, kUpdateN, kGated };

// SKIP -> 1; UPDATE_N -> 1 + 2N; gated at rate r -> 1 + 2r.
Real relative_flops(CostModel model, Real rate_or_steps);

struct SuiteResult {
  std::vector<EvalRecord> records;
  CostLedger ledger;
};

// Everything the policies need: the frozen backbone and TTT layer.
struct Model {
  const backbone::Backbone& backbone;
  const ttt::TttLayer& layer;
};

// Measurement pass only (no policy decisions): one record per chunk in
// global order (sequence-major, chunk-minor).
std::vector<EvalRecord> measure(const Model& model, std::span<const backbone::Sequence> sequences,
                                const SuiteConfig& config);

// Fills decisions / realized CE / charged flops on measured records.
CostLedger apply_policies(std::vector<EvalRecord>& records, const SuiteConfig& config);

SuiteResult run_policy_suite(const Model& model, std::span<const backbone::Sequence> sequences,
                             const SuiteConfig& config);

// Seeds used by the stochastic policies; fixed streams of the run seed.
std::uint64_t random_policy_seed(std::uint64_t seed);

}  // namespace tttgate::harness
