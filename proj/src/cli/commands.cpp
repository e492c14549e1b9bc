#include "tttgate/cli/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <ostream>

#include "CLI11.hpp"
#include "tttgate/backbone/corpus.hpp"
#include "tttgate/error.hpp"
#include "tttgate/gating/controller.hpp"
#include "tttgate/harness/ablation.hpp"
#include "tttgate/harness/report.hpp"
#include "tttgate/io/binary.hpp"
#include "tttgate/numerics/ops.hpp"
#include "tttgate/ttt/param_io.hpp"

namespace tttgate::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kBackboneFile = "backbone.bin";
constexpr const char* kTttFile = "ttt.bin";

fs::path output_path(const RunConfig& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return kDefaultOut;
}

std::vector<backbone::Sequence> load_sequences(const RunConfig& c) {
  if (c.corpus.empty()) throw ConfigError("--corpus is required");
  const auto tokens = backbone::load_corpus(c.corpus);
  auto seqs = backbone::split_sequences(tokens, c.seq_len);
  if (seqs.empty())
    throw ConfigError("corpus has " + std::to_string(tokens.size()) + " tokens, fewer than seq_len + 1");
  return seqs;
}

ordered_json model_json(const LoadedModel& m) {
  ordered_json j;
  j["source"] = m.source;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(m.backbone.weights().content_hash()));
  j["backbone_hash"] = hash;
  j["ttt"] = ttt::config_to_json(m.ttt_config);
  return j;
}

}  // namespace

void RunConfig::validate() const {
  suite().validate();
  if (mask_k != 0 && mask_k != -1) throw ConfigError("--mask-k must be 0 or -1");
}

harness::SuiteConfig RunConfig::suite() const {
  harness::SuiteConfig s;
  s.seq_len = seq_len;
  s.chunk_size = chunk_size;
  s.rho = rho;
  s.alpha = alpha;
  s.n_cal = n_cal;
  s.seed = seed;
  s.signal = harness::parse_signal(signal);
  s.policies = harness::parse_policies(policies);
  s.oracle_scope = oracle_per_sequence ? harness::OracleScope::kPerSequence : harness::OracleScope::kGlobal;
  s.carry_state = carry_state;
  return s;
}

ordered_json RunConfig::echo() const {
  ordered_json j;
  j["command"] = command;
  if (!ablation.empty()) j["ablation"] = ablation;
  j["corpus"] = corpus;
  j["weights"] = weights;
  j["seed"] = seed;
  j["seq_len"] = seq_len;
  j["chunk_size"] = chunk_size;
  j["rho"] = rho;
  j["alpha"] = alpha;
  j["n_cal"] = n_cal;
  j["mask_k"] = mask_k;
  j["policies"] = policies;
  j["signal"] = signal;
  j["carry_state"] = carry_state;
  j["oracle_per_sequence"] = oracle_per_sequence;
  return j;
}

LoadedModel load_model(const std::string& dir, std::size_t chunk_size, int mask_k) {
  if (dir.empty()) {
    ttt::TttConfig tc;
    tc.chunk_size = chunk_size;
    tc.mask_diagonal = mask_k;
    return {backbone::Backbone(backbone::BackboneWeights::initialize({})), tc,
            ttt::ProjectionParams::initialize(tc, 42), "default"};
  }
  auto bb = backbone::load_backbone(fs::path(dir) / kBackboneFile);
  auto pf = ttt::load_params(fs::path(dir) / kTttFile);
  pf.config.chunk_size = chunk_size;
  pf.config.mask_diagonal = mask_k;
  if (pf.config.model_dim != bb.config.model_dim)
    throw ConfigError("weights: TTT model_dim does not match the backbone");
  return {backbone::Backbone(std::move(bb)), pf.config, std::move(pf.params), dir};
}

void save_model(const fs::path& dir, const backbone::BackboneWeights& bb, const ttt::TttConfig& config,
                const ttt::ProjectionParams& params) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  backbone::save_backbone(dir / kBackboneFile, bb);
  ttt::save_params(dir / kTttFile, config, params);
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  c.validate();
  const auto suite = c.suite();
  const auto seqs = load_sequences(c);
  const auto model = load_model(c.weights, c.chunk_size, c.mask_k);
  const ttt::TttLayer layer(model.ttt_config, model.params);
  const auto run = harness::evaluate({model.backbone, layer}, seqs, suite);
  const auto dir = output_path(c);
  harness::emit_report(run.summary, run.result.records, c.echo(), dir, model_json(model));
  out << "chunks " << run.summary.chunk_count << '\n';
  for (const auto p : suite.policies) {
    const auto& ps = run.summary.policies.at(p);
    out << harness::to_string(p) << " mean_ce " << harness::format_real(ps.mean_ce) << " rate "
        << ps.realized_rate << " flops " << ps.relative_flops << '\n';
  }
  if (run.summary.oracle_recovery) out << "oracle_recovery " << *run.summary.oracle_recovery << '\n';
  out << "wrote " << (dir / "report.json").string() << '\n';
  return kExitOk;
}

int cmd_calibrate(const RunConfig& c, std::ostream& out) {
  c.validate();
  auto suite = c.suite();
  const auto seqs = load_sequences(c);
  const std::size_t per_seq = c.seq_len / c.chunk_size;
  const std::size_t need = (c.n_cal + per_seq - 1) / per_seq;
  if (seqs.size() < need)
    throw ConfigError("corpus holds " + std::to_string(seqs.size() * per_seq) +
                      " chunks, fewer than n_cal = " + std::to_string(c.n_cal));
  const auto model = load_model(c.weights, c.chunk_size, c.mask_k);
  const ttt::TttLayer layer(model.ttt_config, model.params);
  const auto records = harness::measure({model.backbone, layer}, std::span(seqs).first(need), suite);

  gating::ThresholdController ctl({c.rho, c.alpha, c.n_cal});
  for (std::size_t i = 0; i < c.n_cal; ++i) ctl.observe_and_decide(records[i].signal(suite.signal));
  const auto& buf = ctl.calibration_buffer();
  out << "tau " << harness::format_real(ctl.tau()) << '\n';
  for (const double q : {0.1, 0.25, 0.5, 0.75, 0.9})
    out << "p" << static_cast<int>(std::lround(q * 100)) << ' '
        << harness::format_real(nearest_rank_percentile(buf, q)) << '\n';

  const auto dir = output_path(c);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  ordered_json j = ctl.to_json();
  j["signal"] = c.signal;
  j["run_config"] = c.echo();
  io::write_file_atomic(dir / "controller.json", j.dump(2) + "\n");
  out << "wrote " << (dir / "controller.json").string() << '\n';
  return kExitOk;
}

int cmd_ablate(const RunConfig& c, std::ostream& out) {
  if (c.ablation != "diagonal" && c.ablation != "shuffled" && c.ablation != "delta")
    throw ConfigError("unknown ablation '" + c.ablation + "' (diagonal|shuffled|delta)");
  c.validate();
  const auto seqs = load_sequences(c);
  const auto model = load_model(c.weights, c.chunk_size, c.mask_k);
  const auto dir = output_path(c) / c.ablation;
  ordered_json summary;
  summary["ablation"] = c.ablation;
  summary["seed"] = c.seed;

  auto write = [&](const harness::Run& run, const RunConfig& variant, const LoadedModel& m,
                   const std::string& name) {
    harness::emit_report(run.summary, run.result.records, variant.echo(), dir / name, model_json(m));
  };
  auto mean_ces = [](const harness::ReportSummary& s) {
    ordered_json j = ordered_json::object();
    for (const auto p : s.config.policies) j[std::string(harness::to_string(p))] = s.policies.at(p).mean_ce;
    return j;
  };

  if (c.ablation == "diagonal") {
    const auto suite = c.suite();
    const auto ab = harness::ablate_diagonal(model.backbone, model.ttt_config, model.params, seqs, suite);
    RunConfig k0 = c, k1 = c;
    k0.mask_k = 0;
    k1.mask_k = -1;
    const auto m0 = load_model(c.weights, c.chunk_size, 0);
    const auto m1 = load_model(c.weights, c.chunk_size, -1);
    write(ab.include_diagonal, k0, m0, "k0");
    write(ab.strict_causal, k1, m1, "k-1");
    ordered_json deltas = ordered_json::object();
    for (const auto p : suite.policies)
      deltas[std::string(harness::to_string(p))] = ab.include_diagonal.summary.policies.at(p).mean_ce -
                                                   ab.strict_causal.summary.policies.at(p).mean_ce;
    summary["mean_ce_k0"] = mean_ces(ab.include_diagonal.summary);
    summary["mean_ce_k-1"] = mean_ces(ab.strict_causal.summary);
    summary["ce_delta_k0_minus_k-1"] = deltas;
  } else if (c.ablation == "shuffled") {
    const auto suite = c.suite();
    const ttt::TttLayer layer(model.ttt_config, model.params);
    const auto ab = harness::sanity_shuffled({model.backbone, layer}, seqs, suite);
    write(ab.normal, c, model, "normal");
    write(ab.shuffled, c, model, "shuffled");
    summary["improvement_normal"] = ab.improvement_normal;
    summary["improvement_shuffled"] = ab.improvement_shuffled;
    summary["mean_ce_normal"] = mean_ces(ab.normal.summary);
    summary["mean_ce_shuffled"] = mean_ces(ab.shuffled.summary);
  } else {
    RunConfig rc = c, dc = c;
    rc.signal = "recon";
    dc.signal = "delta";
    const ttt::TttLayer layer(model.ttt_config, model.params);
    const auto rr = harness::evaluate({model.backbone, layer}, seqs, rc.suite());
    const auto dr = harness::evaluate({model.backbone, layer}, seqs, dc.suite());
    write(rr, rc, model, "recon");
    write(dr, dc, model, "delta");
    summary["mean_ce_recon"] = mean_ces(rr.summary);
    summary["mean_ce_delta"] = mean_ces(dr.summary);
    summary["measurement_overhead_per_chunk_delta"] = dr.summary.ledger.measurement_overhead;
  }
  io::write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  backbone::SynthOptions o;
  o.seed = c.seed;
  o.sequences = c.sequences;
  o.seq_len = c.seq_len;
  o.pattern = backbone::parse_pattern(c.pattern);
  if (c.out.empty()) throw ConfigError("synth needs --out <file.bin>");
  const auto tokens = backbone::synth_corpus(o);
  backbone::save_corpus(c.out, tokens);
  out << "wrote " << tokens.size() << " tokens to " << c.out << '\n';
  return kExitOk;
}

int cmd_init_weights(const RunConfig& c, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("init-weights needs --out <dir>");
  const auto m = load_model("", c.chunk_size, c.mask_k);
  save_model(c.out, m.backbone.weights(), m.ttt_config, m.params);
  out << "wrote " << (fs::path(c.out) / kBackboneFile).string() << " and "
      << (fs::path(c.out) / kTttFile).string() << '\n';
  return kExitOk;
}

namespace {

void add_run_flags(CLI::App* cmd, RunConfig& c, bool needs_policies) {
  cmd->add_option("--corpus", c.corpus, "Corpus: .bin token stream, text file, or directory of text files")
      ->required();
  cmd->add_option("--weights", c.weights, "Directory with backbone.bin and ttt.bin (default: built-in seed-42 weights)");
  cmd->add_option("--seed", c.seed, "Run seed (random policy, shuffles)")->capture_default_str();
  cmd->add_option("--seq-len", c.seq_len, "Tokens per sequence")->capture_default_str();
  cmd->add_option("--chunk-size", c.chunk_size, "Tokens per gating chunk")->capture_default_str();
  cmd->add_option("--rho", c.rho, "Target update rate")->capture_default_str();
  cmd->add_option("--alpha", c.alpha, "Controller smoothing")->capture_default_str();
  cmd->add_option("--ncal", c.n_cal, "Calibration chunks")->capture_default_str();
  cmd->add_option("--mask-k", c.mask_k, "Dual-form mask diagonal (0 or -1)")->capture_default_str();
  if (needs_policies) {
    cmd->add_option("--policies", c.policies, "Comma list of skip,update1,gate,random,oracle")
        ->capture_default_str();
    cmd->add_flag("--carry-state", c.carry_state, "Keep fast weights across sequences");
    cmd->add_flag("--oracle-per-sequence", c.oracle_per_sequence, "Oracle budget per sequence");
  }
  cmd->add_option("--signal", c.signal, "Gate signal: recon or delta")->capture_default_str();
  cmd->add_option("--out", c.out, std::string("Output directory (default: $") + kOutEnv + " or " + kDefaultOut + ")");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reconstruction-gated test-time training evaluator", "tttgate"};
  app.require_subcommand(1);
  RunConfig c;

  auto* eval = app.add_subcommand("eval", "Run gating policies over a corpus and write report.json + records.csv");
  add_run_flags(eval, c, true);
  auto* cal = app.add_subcommand("calibrate", "Calibrate the gate threshold on the first n_cal chunks");
  add_run_flags(cal, c, false);
  auto* abl = app.add_subcommand("ablate", "Paired runs: diagonal, shuffled or delta");
  abl->add_option("which", c.ablation, "diagonal | shuffled | delta")->required();
  add_run_flags(abl, c, true);
  auto* syn = app.add_subcommand("synth", "Write a synthetic patterned corpus (.bin)");
  syn->add_option("--seed", c.seed, "Generator seed")->capture_default_str();
  syn->add_option("--sequences", c.sequences, "Number of sequences")->capture_default_str();
  syn->add_option("--seq-len", c.seq_len, "Tokens per sequence")->capture_default_str();
  syn->add_option("--pattern", c.pattern, "mixed | constant | random")->capture_default_str();
  syn->add_option("--out", c.out, "Output .bin file")->required();
  auto* init = app.add_subcommand("init-weights", "Write the built-in deterministic weights to a directory");
  init->add_option("--out", c.out, "Output directory")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (eval->parsed()) return c.command = "eval", cmd_eval(c, out);
    if (cal->parsed()) return c.command = "calibrate", cmd_calibrate(c, out);
    if (abl->parsed()) return c.command = "ablate", cmd_ablate(c, out);
    if (syn->parsed()) return c.command = "synth", cmd_synth(c, out);
    if (init->parsed()) return c.command = "init-weights", cmd_init_weights(c, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitFailure;
}

}  // namespace tttgate::cli
