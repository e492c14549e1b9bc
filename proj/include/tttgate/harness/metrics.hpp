#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tttgate/harness/suite.hpp"
#include "tttgate/numerics/stats.hpp"

namespace tttgate::harness {

// (skip - ours) / (skip - oracle); throws NumericError unless skip > oracle.
Real oracle_recovery(Real mean_skip, Real mean_ours, Real mean_oracle);

struct Correlations {
  Real pearson_r = 0.0;
  Real spearman_rho = 0.0;
  Real topk_overlap = 0.0;
};

// |top-m by signal  intersect  top-m by advantage| / m, m = budget_count(K, rho).
Real topk_overlap(std::span<const Real> signal, std::span<const Real> advantage, Real rho);

Correlations correlation_suite(std::span<const Real> signal, std::span<const Real> advantage,
                               Real rho);
Correlations correlation_suite(std::span<const EvalRecord> records, SignalMode mode, Real rho);

struct DecisionMetrics {
  std::map<PolicyKind, Real> accuracy;
  std::optional<stats::McNemarResult> mcnemar;  // gate vs random, against the oracle
};

// Accuracy of each policy against `reference`; McNemar of a vs b when both
// are present and discordant counts are non-zero.
DecisionMetrics decision_metrics(std::span<const EvalRecord> records,
                                 std::span<const PolicyKind> policies,
                                 PolicyKind reference = PolicyKind::kOracle,
                                 PolicyKind a = PolicyKind::kGate, PolicyKind b = PolicyKind::kRandom);

struct PolicySummary {
  Real mean_ce = 0.0;
  Real perplexity = 0.0;
  std::size_t update_count = 0;
  Real realized_rate = 0.0;
  Real relative_flops = 1.0;
  std::optional<Real> decision_accuracy;
  std::optional<Real> recovery;
};

struct ReportSummary {
  SuiteConfig config;
  std::size_t chunk_count = 0;
  std::size_t sequence_count = 0;
  Real mean_ce_skip = 0.0;
  Real mean_ce_update = 0.0;
  std::map<PolicyKind, PolicySummary> policies;
  std::optional<Real> oracle_recovery;  // gate policy
  std::optional<Correlations> correlations;
  std::optional<Correlations> delta_correlations;
  std::optional<stats::McNemarResult> mcnemar;
  CostLedger ledger;
};

ReportSummary summarize(const SuiteResult& result, const SuiteConfig& config);

// Relative CE improvement of the gate policy over SKIP.
Real gate_improvement(const ReportSummary& s);

}  // namespace tttgate::harness
