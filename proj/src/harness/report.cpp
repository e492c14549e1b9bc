#include "tttgate/harness/report.hpp"

#include <cstdio>

#include "tttgate/error.hpp"
#include "tttgate/io/binary.hpp"
#include "tttgate/numerics/kernels.hpp"

namespace tttgate::harness {

using nlohmann::ordered_json;

namespace {

ordered_json optional_real(const std::optional<Real>& v) { return v ? ordered_json(*v) : ordered_json(); }

ordered_json correlations_json(const std::optional<Correlations>& c) {
  if (!c) return nullptr;
  ordered_json j;
  j["pearson_r"] = c->pearson_r;
  j["spearman_rho"] = c->spearman_rho;
  j["topk_overlap"] = c->topk_overlap;
  return j;
}

}  // namespace

std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json report_json(const ReportSummary& s, const ordered_json& run_echo, const ordered_json& model) {
  ordered_json j;
  j["format"] = "tttgate-report";
  j["format_version"] = kReportFormatVersion;
  j["tool_version"] = kToolVersion;
  j["run_config"] = run_echo;
  if (!model.is_null()) j["model"] = model;

  ordered_json suite;
  suite["seq_len"] = s.config.seq_len;
  suite["chunk_size"] = s.config.chunk_size;
  suite["rho"] = s.config.rho;
  suite["alpha"] = s.config.alpha;
  suite["n_cal"] = s.config.n_cal;
  suite["seed"] = s.config.seed;
  suite["signal"] = to_string(s.config.signal);
  suite["oracle_scope"] = to_string(s.config.oracle_scope);
  suite["carry_state"] = s.config.carry_state;
  ordered_json pol = ordered_json::array();
  for (const auto p : s.config.policies) pol.push_back(to_string(p));
  suite["policies"] = pol;
  j["suite"] = suite;

  j["chunk_count"] = s.chunk_count;
  j["sequence_count"] = s.sequence_count;
  j["mean_ce_skip_branch"] = s.mean_ce_skip;
  j["mean_ce_update_branch"] = s.mean_ce_update;

  ordered_json policies = ordered_json::object();
  for (const auto p : s.config.policies) {
    const auto& ps = s.policies.at(p);
    ordered_json e;
    e["mean_ce"] = ps.mean_ce;
    e["perplexity"] = ps.perplexity;
    e["update_count"] = ps.update_count;
    e["realized_update_rate"] = ps.realized_rate;
    e["relative_flops"] = ps.relative_flops;
    e["decision_accuracy"] = optional_real(ps.decision_accuracy);
    e["recovery"] = optional_real(ps.recovery);
    policies[std::string(to_string(p))] = e;
  }
  j["policies"] = policies;

  j["oracle_recovery"] = optional_real(s.oracle_recovery);
  j["correlations"] = correlations_json(s.correlations);
  j["delta_correlations"] = correlations_json(s.delta_correlations);
  if (s.mcnemar) {
    ordered_json m;
    m["policy_a"] = "gate";
    m["policy_b"] = "random";
    m["reference"] = "oracle";
    m["b"] = s.mcnemar->b;
    m["c"] = s.mcnemar->c;
    m["statistic"] = s.mcnemar->statistic;
    m["p_value"] = s.mcnemar->p_value;
    j["mcnemar"] = m;
  } else {
    j["mcnemar"] = nullptr;
  }

  ordered_json ledger;
  ledger["chunk_count"] = s.ledger.chunk_count;
  ordered_json lp = ordered_json::object();
  for (const auto p : s.config.policies) {
    const auto& c = s.ledger.policies.at(p);
    lp[std::string(to_string(p))] = {{"update_count", c.update_count}, {"relative_flops", c.relative_flops}};
  }
  ledger["policies"] = lp;
  ledger["instrumentation_overhead_per_chunk"] = s.ledger.instrumentation_overhead;
  ledger["measurement_overhead_per_chunk"] = s.ledger.measurement_overhead;
  ledger["measurement_overhead_note"] =
      s.config.signal == SignalMode::kDelta
          ? "delta signal needs a gradient step and a loss re-evaluation on every chunk; not included in relative_flops"
          : "none";
  j["cost_ledger"] = ledger;
  return j;
}

std::string records_csv(std::span<const EvalRecord> records, std::span<const PolicyKind> policies) {
  std::string out = "sequence_id,chunk_index,recon_loss,ttt_delta,ce_skip,ce_update";
  for (const auto p : policies) {
    out += ',';
    out += to_string(p);
    out += "_decision,";
    out += to_string(p);
    out += "_ce";
  }
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.sequence_id) + ',' + std::to_string(r.chunk_index) + ',' +
           format_real(r.recon_loss) + ',' + format_real(r.ttt_delta) + ',' + format_real(r.ce_skip) +
           ',' + format_real(r.ce_update);
    for (const auto p : policies) {
      out += r.decisions.at(p) ? ",UPDATE," : ",SKIP,";
      out += format_real(r.ce_realized.at(p));
    }
    out += '\n';
  }
  return out;
}

void emit_report(const ReportSummary& summary, std::span<const EvalRecord> records,
                 const ordered_json& run_echo, const std::filesystem::path& dir,
                 const ordered_json& model) {
  const auto json = report_json(summary, run_echo, model).dump(2) + "\n";
  const auto csv = records_csv(records, summary.config.policies);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  io::write_file_atomic(dir / "report.json", json);
  io::write_file_atomic(dir / "records.csv", csv);
}

}  // namespace tttgate::harness
