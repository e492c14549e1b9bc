#include "tttgate/harness/suite.hpp"

#include <cmath>

#include "tttgate/error.hpp"
#include "tttgate/numerics/random.hpp"

namespace tttgate::harness {

std::string_view to_string(PolicyKind p) noexcept {
  switch (p) {
    case PolicyKind::kSkip: return "skip";
    case PolicyKind::kUpdate1: return "update1";
    case PolicyKind::kGate: return "gate";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kOracle: return "oracle";
  }
  return "?";
}

std::string_view to_string(SignalMode s) noexcept {
  return s == SignalMode::kDelta ? "delta" : "recon";
}

std::string_view to_string(OracleScope s) noexcept {
  return s == OracleScope::kPerSequence ? "per_sequence" : "global";
}

PolicyKind parse_policy(std::string_view name) {
  for (auto p : {PolicyKind::kSkip, PolicyKind::kUpdate1, PolicyKind::kGate, PolicyKind::kRandom,
                 PolicyKind::kOracle})
    if (to_string(p) == name) return p;
  throw ConfigError("unknown policy '" + std::string(name) +
                    "' (skip|update1|gate|random|oracle)");
}

SignalMode parse_signal(std::string_view name) {
  if (name == "recon") return SignalMode::kRecon;
  if (name == "delta") return SignalMode::kDelta;
  throw ConfigError("unknown signal mode '" + std::string(name) + "' (recon|delta)");
}

std::vector<PolicyKind> parse_policies(std::string_view list) {
  std::vector<PolicyKind> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto end = std::min(list.find(',', start), list.size());
    const auto name = list.substr(start, end - start);
    if (name.empty()) throw ConfigError("empty policy name in --policies");
    const auto p = parse_policy(name);
    if (std::find(out.begin(), out.end(), p) != out.end())
      throw ConfigError("duplicate policy '" + std::string(name) + "'");
    out.push_back(p);
    start = end + 1;
  }
  return out;
}

void SuiteConfig::validate() const {
  if (seq_len == 0) throw ConfigError("seq_len must be >= 1");
  if (chunk_size == 0 || seq_len % chunk_size != 0)
    throw ConfigError("chunk_size must be >= 1 and divide seq_len");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (policies.empty()) throw ConfigError("at least one policy is required");
  const bool has_gate = std::find(policies.begin(), policies.end(), PolicyKind::kGate) != policies.end();
  if (has_gate) {
    gating::ControllerConfig c{rho, alpha, n_cal};
    c.validate();
  } else if (!(alpha > 0.0 && alpha <= 1.0) || n_cal == 0) {
    throw ConfigError("alpha must lie in (0, 1] and n_cal must be >= 1");
  }
}

Real relative_flops(CostModel model, Real v) {
  switch (model) {
    case CostModel::kSkip: return 1.0;
    case CostModel::kUpdateN:
      if (!(v >= 0.0)) throw ConfigError("relative_flops: N must be >= 0");
      return 1.0 + 2.0 * v;
    case CostModel::kGated:
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("relative_flops: rate must lie in [0, 1]");
      return 1.0 + 2.0 * v;
  }
  return 1.0;
}

std::uint64_t random_policy_seed(std::uint64_t seed) { return Rng::derive(seed, 0x72616e646f6dULL); }

std::vector<EvalRecord> measure(const Model& model, std::span<const backbone::Sequence> sequences,
                                const SuiteConfig& config) {
  config.validate();
  if (sequences.empty()) throw ConfigError("corpus holds no complete sequence");
  const auto& layer = model.layer;
  const std::size_t C = config.chunk_size;
  const std::size_t ctx = layer.config().conv_width - 1;

  std::vector<EvalRecord> records;
  records.reserve(sequences.size() * (config.seq_len / C));
  auto state = layer.initial_state();
  for (const auto& seq : sequences) {
    if (seq.window.size() != config.seq_len + 1)
      throw ConfigError("sequence window does not match seq_len");
    if (!config.carry_state) state = layer.initial_state();
    const auto inputs = seq.inputs();
    const auto labels = seq.labels();
    const Matrix hidden = model.backbone.forward(inputs);
    for (std::size_t j = 0; j < config.seq_len / C; ++j) {
      const std::size_t begin = j * C;
      try {
        const Matrix hc = hidden.slice_rows(begin, C);
        const std::size_t left = std::min(ctx, begin);
        const Matrix before = left ? hidden.slice_rows(begin - left, left) : Matrix{};
        const auto views = layer.project_views(hc, before);
        const auto chunk_labels = labels.subspan(begin, C);

        auto initial = layer.dual_forward(state, views);
        const Real eta = views.eta_mean();
        const auto updated = layer.apply_chunk_update(state, views, eta);
        const auto reforward = layer.dual_forward(updated, views);

        EvalRecord r;
        r.sequence_id = seq.sequence_id;
        r.chunk_index = j;
        r.recon_loss = initial.result.recon_loss_scalar;
        r.ttt_delta = r.recon_loss - layer.recon_loss(updated, views).mean;
        r.ce_skip = backbone::ce_loss(model.backbone, hc, initial.result.outputs, chunk_labels).mean;
        r.ce_update = backbone::ce_loss(model.backbone, hc, reforward.result.outputs, chunk_labels).mean;
        records.push_back(std::move(r));
        state = std::move(initial.state);
      } catch (const NumericError& e) {
        NumericLocation where;
        where.sequence = seq.sequence_id;
        where.chunk = j;
        throw e.located(where);
      }
    }
  }
  return records;
}

namespace {

std::vector<bool> oracle_decisions(const std::vector<EvalRecord>& records, const SuiteConfig& config) {
  std::vector<Real> adv(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) adv[i] = records[i].advantage();
  if (config.oracle_scope == OracleScope::kGlobal) return gating::oracle_select(adv, config.rho);
  std::vector<bool> out(records.size(), false);
  std::size_t begin = 0;
  while (begin < records.size()) {
    std::size_t end = begin;
    while (end < records.size() && records[end].sequence_id == records[begin].sequence_id) ++end;
    const auto sel = gating::oracle_select(std::span(adv).subspan(begin, end - begin), config.rho);
    for (std::size_t i = begin; i < end; ++i) out[i] = sel[i - begin];
    begin = end;
  }
  return out;
}

}  // namespace

CostLedger apply_policies(std::vector<EvalRecord>& records, const SuiteConfig& config) {
  config.validate();
  if (records.empty()) throw ConfigError("no chunks to evaluate");
  const std::size_t K = records.size();

  CostLedger ledger;
  ledger.chunk_count = K;
  ledger.measurement_overhead = config.signal == SignalMode::kDelta ? 2.0 : 0.0;

  for (const auto policy : config.policies) {
    std::vector<bool> d(K, false);
    switch (policy) {
      case PolicyKind::kSkip: break;
      case PolicyKind::kUpdate1: d.assign(K, true); break;
      case PolicyKind::kGate: {
        gating::ThresholdController ctl({config.rho, config.alpha, config.n_cal});
        for (std::size_t i = 0; i < K; ++i)
          d[i] = ctl.observe_and_decide(records[i].signal(config.signal)).decision ==
                 gating::Decision::kUpdate;
        break;
      }
      case PolicyKind::kRandom: d = gating::random_select(K, config.rho, random_policy_seed(config.seed)); break;
      case PolicyKind::kOracle: d = oracle_decisions(records, config); break;
    }
    PolicyCost cost;
    for (std::size_t i = 0; i < K; ++i) {
      auto& r = records[i];
      r.decisions[policy] = d[i];
      r.ce_realized[policy] = d[i] ? r.ce_update : r.ce_skip;
      r.flops_charged[policy] = d[i] ? 3.0 : 1.0;
      cost.update_count += d[i] ? 1 : 0;
    }
    const Real rate = static_cast<Real>(cost.update_count) / static_cast<Real>(K);
    cost.relative_flops = policy == PolicyKind::kSkip      ? relative_flops(CostModel::kSkip, 0.0)
                          : policy == PolicyKind::kUpdate1 ? relative_flops(CostModel::kUpdateN, 1.0)
                                                           : relative_flops(CostModel::kGated, rate);
    ledger.policies[policy] = cost;
  }
  return ledger;
}

SuiteResult run_policy_suite(const Model& model, std::span<const backbone::Sequence> sequences,
                             const SuiteConfig& config) {
  SuiteResult out;
  out.records = measure(model, sequences, config);
  out.ledger = apply_policies(out.records, config);
  return out;
}

}  // namespace tttgate::harness
