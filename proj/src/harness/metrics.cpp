#include "tttgate/harness/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tttgate/error.hpp"

namespace tttgate::harness {

Real oracle_recovery(Real mean_skip, Real mean_ours, Real mean_oracle) {
  const Real denom = mean_skip - mean_oracle;
  if (!(denom > 0.0)) throw NumericError("oracle recovery undefined: SKIP loss does not exceed oracle loss");
  return (mean_skip - mean_ours) / denom;
}

Real topk_overlap(std::span<const Real> signal, std::span<const Real> advantage, Real rho) {
  if (signal.size() != advantage.size()) throw ConfigError("topk_overlap: length mismatch");
  const auto m = gating::budget_count(signal.size(), rho);
  if (m == 0) throw NumericError("topk_overlap: empty budget");
  const auto a = gating::oracle_select(signal, rho);
  const auto b = gating::oracle_select(advantage, rho);
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) both += (a[i] && b[i]) ? 1 : 0;
  return static_cast<Real>(both) / static_cast<Real>(m);
}

Correlations correlation_suite(std::span<const Real> signal, std::span<const Real> advantage, Real rho) {
  Correlations c;
  c.pearson_r = stats::pearson(signal, advantage);
  c.spearman_rho = stats::spearman(signal, advantage);
  c.topk_overlap = topk_overlap(signal, advantage, rho);
  return c;
}

Correlations correlation_suite(std::span<const EvalRecord> records, SignalMode mode, Real rho) {
  std::vector<Real> s, a;
  s.reserve(records.size());
  a.reserve(records.size());
  for (const auto& r : records) {
    s.push_back(r.signal(mode));
    a.push_back(r.advantage());
  }
  return correlation_suite(s, a, rho);
}

DecisionMetrics decision_metrics(std::span<const EvalRecord> records,
                                 std::span<const PolicyKind> policies, PolicyKind reference,
                                 PolicyKind pa, PolicyKind pb) {
  if (records.empty()) throw ConfigError("decision_metrics: no records");
  auto decision = [](const EvalRecord& r, PolicyKind p) {
    const auto it = r.decisions.find(p);
    if (it == r.decisions.end())
      throw ConfigError("decision_metrics: missing decisions for policy " + std::string(to_string(p)));
    return it->second;
  };
  DecisionMetrics out;
  for (const auto p : policies) {
    std::size_t agree = 0;
    for (const auto& r : records) agree += decision(r, p) == decision(r, reference) ? 1 : 0;
    out.accuracy[p] = static_cast<Real>(agree) / static_cast<Real>(records.size());
  }
  const bool have_pair = std::find(policies.begin(), policies.end(), pa) != policies.end() &&
                         std::find(policies.begin(), policies.end(), pb) != policies.end();
  if (have_pair) {
    std::size_t b = 0, c = 0;
    for (const auto& r : records) {
      const bool ref = decision(r, reference);
      const bool a_ok = decision(r, pa) == ref;
      const bool b_ok = decision(r, pb) == ref;
      b += (a_ok && !b_ok) ? 1 : 0;
      c += (!a_ok && b_ok) ? 1 : 0;
    }
    if (b + c > 0) out.mcnemar = stats::mcnemar(b, c);
  }
  return out;
}

namespace {

bool contains(const std::vector<PolicyKind>& v, PolicyKind p) {
  return std::find(v.begin(), v.end(), p) != v.end();
}

std::optional<Real> try_recovery(Real skip, Real ours, Real oracle) {
  if (!(skip - oracle > 0.0)) return std::nullopt;
  return oracle_recovery(skip, ours, oracle);
}

std::optional<Correlations> try_correlations(std::span<const EvalRecord> records, SignalMode mode, Real rho) {
  try {
    return correlation_suite(records, mode, rho);
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

}  // namespace

ReportSummary summarize(const SuiteResult& result, const SuiteConfig& config) {
  const auto& records = result.records;
  if (records.empty()) throw ConfigError("summarize: no records");
  const auto K = static_cast<Real>(records.size());

  ReportSummary s;
  s.config = config;
  s.chunk_count = records.size();
  s.ledger = result.ledger;
  // Summation in record order for reproducibility.
  for (const auto& r : records) {
    s.mean_ce_skip += r.ce_skip;
    s.mean_ce_update += r.ce_update;
  }
  s.mean_ce_skip /= K;
  s.mean_ce_update /= K;
  std::size_t last_seq = records.front().sequence_id;
  s.sequence_count = 1;
  for (const auto& r : records)
    if (r.sequence_id != last_seq) {
      ++s.sequence_count;
      last_seq = r.sequence_id;
    }

  for (const auto p : config.policies) {
    PolicySummary ps;
    for (const auto& r : records) ps.mean_ce += r.ce_realized.at(p);
    ps.mean_ce /= K;
    ps.perplexity = std::exp(ps.mean_ce);
    ps.update_count = result.ledger.policies.at(p).update_count;
    ps.realized_rate = static_cast<Real>(ps.update_count) / K;
    ps.relative_flops = result.ledger.policies.at(p).relative_flops;
    s.policies[p] = ps;
  }

  const bool has_oracle = contains(config.policies, PolicyKind::kOracle);
  if (has_oracle) {
    const auto dm = decision_metrics(records, config.policies);
    for (const auto& [p, acc] : dm.accuracy) s.policies[p].decision_accuracy = acc;
    s.mcnemar = dm.mcnemar;
    const Real oracle_ce = s.policies[PolicyKind::kOracle].mean_ce;
    for (auto& [p, ps] : s.policies) ps.recovery = try_recovery(s.mean_ce_skip, ps.mean_ce, oracle_ce);
    if (contains(config.policies, PolicyKind::kGate))
      s.oracle_recovery = s.policies[PolicyKind::kGate].recovery;
  }
  if (contains(config.policies, PolicyKind::kGate) || has_oracle) {
    s.correlations = try_correlations(records, SignalMode::kRecon, config.rho);
    s.delta_correlations = try_correlations(records, SignalMode::kDelta, config.rho);
  }
  return s;
}

Real gate_improvement(const ReportSummary& s) {
  const auto it = s.policies.find(PolicyKind::kGate);
  if (it == s.policies.end()) throw ConfigError("gate policy was not run");
  return (s.mean_ce_skip - it->second.mean_ce) / s.mean_ce_skip;
}

}  // namespace tttgate::harness
