#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "json.hpp"
#include "tttgate/harness/metrics.hpp"

namespace tttgate::harness {

inline constexpr int kReportFormatVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

// report.json body. `run_echo` is embedded verbatim under "run_config".
// `model`, when not null, describes the weights used.
nlohmann::ordered_json report_json(const ReportSummary& summary,
                                   const nlohmann::ordered_json& run_echo,
                                   const nlohmann::ordered_json& model = nullptr);

// sequence_id,chunk_index,recon_loss,ttt_delta,ce_skip,ce_update, then
// <policy>_decision,<policy>_ce per policy in run order; reals as %.17g.
std::string records_csv(std::span<const EvalRecord> records, std::span<const PolicyKind> policies);

std::string format_real(Real v);

// Writes <dir>/report.json and <dir>/records.csv (creating dir).
void emit_report(const ReportSummary& summary, std::span<const EvalRecord> records,
                 const nlohmann::ordered_json& run_echo, const std::filesystem::path& dir,
                 const nlohmann::ordered_json& model = nullptr);

}  // namespace tttgate::harness
