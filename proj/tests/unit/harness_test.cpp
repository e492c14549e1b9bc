#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "schema_check.hpp"
#include "tttgate/backbone/corpus.hpp"
#include "tttgate/error.hpp"
#include "tttgate/harness/ablation.hpp"
#include "tttgate/harness/report.hpp"

namespace tttgate::harness {
namespace {

namespace fs = std::filesystem;

struct Fixture {
  backbone::Backbone bb{backbone::BackboneWeights::initialize({})};
  ttt::TttConfig tc{};
  ttt::TttLayer layer{tc, ttt::ProjectionParams::initialize(tc, 42)};
  Model model() const { return {bb, layer}; }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

std::vector<backbone::Sequence> corpus(std::size_t sequences, std::size_t seq_len, std::uint64_t seed = 1) {
  backbone::SynthOptions o;
  o.seed = seed;
  o.sequences = sequences;
  o.seq_len = seq_len;
  return backbone::split_sequences(backbone::synth_corpus(o), seq_len);
}

SuiteConfig small_config() {
  SuiteConfig c;
  c.seq_len = 32;
  c.chunk_size = 8;
  c.n_cal = 4;
  return c;
}

EvalRecord record(std::size_t seq, std::size_t chunk, Real recon, Real skip, Real update) {
  EvalRecord r;
  r.sequence_id = seq;
  r.chunk_index = chunk;
  r.recon_loss = recon;
  r.ce_skip = skip;
  r.ce_update = update;
  return r;
}

TEST(CostModelTest, Values) {
  EXPECT_EQ(relative_flops(CostModel::kSkip, 0), 1.0);
  EXPECT_EQ(relative_flops(CostModel::kUpdateN, 1), 3.0);
  EXPECT_EQ(relative_flops(CostModel::kGated, 0.5), 2.0);
  EXPECT_EQ(relative_flops(CostModel::kGated, 0.0), 1.0);
  for (int n : {0, 1, 2, 4}) EXPECT_EQ(relative_flops(CostModel::kUpdateN, n), 1.0 + 2.0 * n);
  EXPECT_THROW(relative_flops(CostModel::kGated, 1.5), ConfigError);
}

TEST(RecoveryTest, TableArithmetic) {
  EXPECT_NEAR(oracle_recovery(2.324, 1.977, 1.935), 0.892, 0.001);
  EXPECT_NEAR(oracle_recovery(1.909, 1.697, 1.653), 0.828, 0.001);
  EXPECT_NEAR(oracle_recovery(2.005, 1.656, 1.580), 0.821, 0.001);
  EXPECT_NEAR(oracle_recovery(1.875, 1.576, 1.518), 0.838, 0.001);
  EXPECT_EQ(oracle_recovery(2.0, 1.5, 1.5), 1.0);
  EXPECT_EQ(oracle_recovery(2.0, 2.0, 1.5), 0.0);
  EXPECT_THROW(oracle_recovery(1.5, 1.5, 1.5), NumericError);
  EXPECT_THROW(oracle_recovery(1.5, 1.5, 1.6), NumericError);
}

TEST(CorrelationSuiteTest, PerfectCases) {
  const std::vector<Real> a{0.1, 0.5, -0.2, 0.9, 0.3, 0.0};
  std::vector<Real> neg(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) neg[i] = -a[i];
  const auto c = correlation_suite(a, a, 0.5);
  EXPECT_NEAR(c.pearson_r, 1.0, 1e-15);
  EXPECT_NEAR(c.spearman_rho, 1.0, 1e-15);
  EXPECT_EQ(c.topk_overlap, 1.0);
  EXPECT_NEAR(correlation_suite(neg, a, 0.5).pearson_r, -1.0, 1e-15);
  EXPECT_THROW(correlation_suite(std::vector<Real>(6, 1.0), a, 0.5), NumericError);
  EXPECT_THROW(correlation_suite(std::vector<Real>{1, 2}, std::vector<Real>{1, 2}, 0.5), NumericError);
}

TEST(CorrelationSuiteTest, MatchesDefinitionalReference) {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = testing::random_vector(rng, 50);
    const auto a = testing::random_vector(rng, 50);
    const auto c = correlation_suite(s, a, 0.5);
    EXPECT_NEAR(c.pearson_r, testing::ref_pearson(s, a), 1e-10);
    EXPECT_NEAR(c.spearman_rho, testing::ref_spearman(s, a), 1e-10);
    const auto ts = testing::ref_top(s, 25), ta = testing::ref_top(a, 25);
    std::vector<std::size_t> both;
    std::set_intersection(ts.begin(), ts.end(), ta.begin(), ta.end(), std::back_inserter(both));
    EXPECT_NEAR(c.topk_overlap, both.size() / 25.0, 1e-10);
  }
}

TEST(DecisionMetricsTest, AccuracyAndMcNemar) {
  std::vector<EvalRecord> recs(30);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const bool oracle = i % 2 == 0;
    recs[i].decisions[PolicyKind::kOracle] = oracle;
    // gate right on 0..19, wrong on 20..29; random right on 0..9 and 20..29.
    recs[i].decisions[PolicyKind::kGate] = i < 20 ? oracle : !oracle;
    recs[i].decisions[PolicyKind::kRandom] = (i < 10 || i >= 20) ? oracle : !oracle;
  }
  const std::vector<PolicyKind> pol{PolicyKind::kGate, PolicyKind::kRandom, PolicyKind::kOracle};
  const auto m = decision_metrics(recs, pol);
  EXPECT_EQ(m.accuracy.at(PolicyKind::kOracle), 1.0);
  EXPECT_NEAR(m.accuracy.at(PolicyKind::kGate), 20.0 / 30, 1e-15);
  ASSERT_TRUE(m.mcnemar.has_value());
  EXPECT_EQ(m.mcnemar->b, 10u);
  EXPECT_EQ(m.mcnemar->c, 10u);
  EXPECT_EQ(m.mcnemar->statistic, 0.05);
  const std::vector<PolicyKind> missing{PolicyKind::kUpdate1};
  EXPECT_THROW(decision_metrics(recs, missing), ConfigError);
}

TEST(ParseTest, PoliciesAndSignals) {
  EXPECT_EQ(parse_policies("skip,gate"), (std::vector<PolicyKind>{PolicyKind::kSkip, PolicyKind::kGate}));
  EXPECT_THROW(parse_policies("skip,,gate"), ConfigError);
  EXPECT_THROW(parse_policies("skip,skip"), ConfigError);
  EXPECT_THROW(parse_policies("dense"), ConfigError);
  EXPECT_EQ(parse_signal("delta"), SignalMode::kDelta);
  EXPECT_THROW(parse_signal("loss"), ConfigError);
}

TEST(SuiteTest, SingleChunkFullBudget) {
  auto c = small_config();
  c.seq_len = 8;
  c.rho = 1.0;
  c.n_cal = 1;
  const auto seqs = corpus(1, 8);
  const auto r = run_policy_suite(fixture().model(), seqs, c);
  ASSERT_EQ(r.records.size(), 1u);
  for (auto p : {PolicyKind::kGate, PolicyKind::kRandom, PolicyKind::kOracle, PolicyKind::kUpdate1}) {
    EXPECT_TRUE(r.records[0].decisions.at(p));
    EXPECT_EQ(r.records[0].ce_realized.at(p), r.records[0].ce_update);
  }
}

TEST(SuiteTest, RecordInvariantsAndLedger) {
  const auto c = small_config();
  const auto seqs = corpus(3, 32);
  const auto r = run_policy_suite(fixture().model(), seqs, c);
  ASSERT_EQ(r.records.size(), 12u);
  for (const auto& rec : r.records) {
    EXPECT_GE(rec.recon_loss, 0.0);
    EXPECT_GE(rec.ce_skip, 0.0);
    for (const auto p : c.policies) {
      EXPECT_EQ(rec.ce_realized.at(p), rec.decisions.at(p) ? rec.ce_update : rec.ce_skip);
      EXPECT_EQ(rec.flops_charged.at(p), rec.decisions.at(p) ? 3.0 : 1.0);
    }
  }
  for (const auto p : c.policies) {
    std::size_t n = 0;
    Real charged = 0;
    for (const auto& rec : r.records) {
      n += rec.decisions.at(p);
      charged += rec.flops_charged.at(p);
    }
    EXPECT_EQ(r.ledger.policies.at(p).update_count, n);
    EXPECT_EQ(r.ledger.policies.at(p).relative_flops, 1.0 + 2.0 * n / 12.0);
    EXPECT_NEAR(charged / 12.0, r.ledger.policies.at(p).relative_flops, 1e-15);
  }
  EXPECT_EQ(r.ledger.policies.at(PolicyKind::kRandom).update_count, 6u);
  EXPECT_EQ(r.ledger.policies.at(PolicyKind::kOracle).update_count, 6u);

  const auto s = summarize(r, c);
  Real skip_total = 0;
  for (const auto& rec : r.records) skip_total += rec.ce_skip;
  EXPECT_EQ(s.policies.at(PolicyKind::kSkip).mean_ce, skip_total / 12.0);
  EXPECT_EQ(s.policies.at(PolicyKind::kSkip).perplexity, std::exp(skip_total / 12.0));
  EXPECT_LE(s.policies.at(PolicyKind::kOracle).mean_ce, s.policies.at(PolicyKind::kRandom).mean_ce);
}

TEST(SuiteTest, OracleBeatsEveryEqualBudgetSubset) {
  const auto c = small_config();
  const auto seqs = corpus(3, 32, 9);
  const auto r = run_policy_suite(fixture().model(), seqs, c);
  const std::size_t K = r.records.size();
  Real oracle = 0;
  for (const auto& rec : r.records) oracle += rec.ce_realized.at(PolicyKind::kOracle);
  const std::size_t m = gating::budget_count(K, c.rho);
  for (unsigned mask = 0; mask < (1u << K); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
    Real total = 0;
    for (std::size_t i = 0; i < K; ++i) total += (mask >> i) & 1 ? r.records[i].ce_update : r.records[i].ce_skip;
    EXPECT_LE(oracle, total + 1e-12);
  }
}

TEST(SuiteTest, PolicyIsolation) {
  auto c = small_config();
  const auto seqs = corpus(3, 32, 4);
  const auto all = run_policy_suite(fixture().model(), seqs, c);
  c.policies = {PolicyKind::kRandom, PolicyKind::kGate};
  const auto some = run_policy_suite(fixture().model(), seqs, c);
  for (std::size_t i = 0; i < all.records.size(); ++i)
    for (const auto p : c.policies) {
      EXPECT_EQ(all.records[i].decisions.at(p), some.records[i].decisions.at(p));
      EXPECT_EQ(all.records[i].ce_realized.at(p), some.records[i].ce_realized.at(p));
    }
}

TEST(SuiteTest, RecoveryBracketing) {
  std::vector<EvalRecord> recs;
  Rng rng(5);
  for (std::size_t i = 0; i < 40; ++i) {
    const Real skip = 3 + rng.uniform();
    recs.push_back(record(i / 4, i % 4, rng.uniform() * 10, skip, skip - rng.uniform()));
  }
  auto c = small_config();
  const auto ledger = apply_policies(recs, c);
  const auto s = summarize({recs, ledger}, c);
  Real full_oracle = 0;
  for (const auto& r : recs) full_oracle += r.ce_update;
  full_oracle /= 40;
  for (const auto& [p, ps] : s.policies) {
    EXPECT_GE(ps.mean_ce, full_oracle - 1e-12);
    EXPECT_LE(ps.mean_ce, s.mean_ce_skip + 1e-12);
  }
}

TEST(SuiteTest, PerSequenceOracleScope) {
  std::vector<EvalRecord> recs;
  // Sequence 0 has all the advantage; a global oracle spends the whole budget there.
  for (std::size_t i = 0; i < 4; ++i) recs.push_back(record(0, i, 1, 5, 1));
  for (std::size_t i = 0; i < 4; ++i) recs.push_back(record(1, i, 1, 5, 4.9 + 0.01 * i));
  auto c = small_config();
  c.policies = {PolicyKind::kOracle};
  auto global = recs;
  apply_policies(global, c);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(global[i].decisions.at(PolicyKind::kOracle), i < 4);
  c.oracle_scope = OracleScope::kPerSequence;
  apply_policies(recs, c);
  std::size_t per_seq1 = 0;
  for (std::size_t i = 4; i < 8; ++i) per_seq1 += recs[i].decisions.at(PolicyKind::kOracle);
  EXPECT_EQ(per_seq1, 2u);
}

TEST(SuiteTest, GateFollowsControllerInGlobalOrder) {
  auto c = small_config();
  const auto seqs = corpus(4, 32, 3);
  const auto r = run_policy_suite(fixture().model(), seqs, c);
  gating::ThresholdController ctl({c.rho, c.alpha, c.n_cal});
  for (const auto& rec : r.records)
    EXPECT_EQ(rec.decisions.at(PolicyKind::kGate),
              ctl.observe_and_decide(rec.recon_loss).decision == gating::Decision::kUpdate);
  c.signal = SignalMode::kDelta;
  const auto d = run_policy_suite(fixture().model(), seqs, c);
  gating::ThresholdController ctl2({c.rho, c.alpha, c.n_cal});
  for (const auto& rec : d.records)
    EXPECT_EQ(rec.decisions.at(PolicyKind::kGate),
              ctl2.observe_and_decide(rec.ttt_delta).decision == gating::Decision::kUpdate);
  EXPECT_EQ(d.ledger.measurement_overhead, 2.0);
  EXPECT_EQ(r.ledger.measurement_overhead, 0.0);
}

TEST(SuiteTest, DeltaMatchesLayerImprovement) {
  const auto& f = fixture();
  const auto c = small_config();
  const auto seqs = corpus(1, 32, 6);
  const auto recs = measure(f.model(), seqs, c);
  const auto hidden = f.bb.forward(seqs[0].inputs());
  const auto views = f.layer.project_views(hidden.slice_rows(0, 8));
  const auto imp = f.layer.ttt_improvement(f.layer.initial_state(), views, views.eta_mean());
  EXPECT_NEAR(recs[0].ttt_delta, imp.delta, 1e-12);
  EXPECT_NEAR(recs[0].recon_loss, imp.loss0, 1e-12);
}

TEST(SuiteTest, StateResetAndCarry) {
  auto c = small_config();
  const auto seqs = corpus(2, 32, 8);
  const auto reset = measure(fixture().model(), seqs, c);
  const auto single = measure(fixture().model(), std::span(seqs).subspan(1, 1), c);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(reset[4 + j].ce_skip, single[j].ce_skip);
  c.carry_state = true;
  const auto carried = measure(fixture().model(), seqs, c);
  EXPECT_NE(carried[4].recon_loss, reset[4].recon_loss);
  EXPECT_EQ(carried[0].recon_loss, reset[0].recon_loss);
}

TEST(SuiteTest, BackboneStaysFrozen) {
  const auto& f = fixture();
  const auto before = f.bb.weights().content_hash();
  run_policy_suite(f.model(), corpus(2, 32), small_config());
  EXPECT_EQ(f.bb.weights().content_hash(), before);
}

TEST(SuiteTest, RejectsBadConfig) {
  auto c = small_config();
  c.chunk_size = 5;
  EXPECT_THROW(run_policy_suite(fixture().model(), corpus(1, 32), c), ConfigError);
  c = small_config();
  EXPECT_THROW(run_policy_suite(fixture().model(), {}, c), ConfigError);
  c.policies.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  EXPECT_THROW(run_policy_suite(fixture().model(), corpus(1, 16), c), ConfigError);
}

TEST(AblationTest, DiagonalIrrelevantWithoutSteps) {
  const auto& f = fixture();
  auto params = ttt::ProjectionParams::initialize(f.tc, 42);
  params.lr_gate_bias = -1000.0;  // sigmoid underflows to 0: eta = 0
  const auto ab = ablate_diagonal(f.bb, f.tc, params, corpus(2, 32), small_config());
  for (std::size_t i = 0; i < ab.include_diagonal.result.records.size(); ++i)
    EXPECT_EQ(ab.include_diagonal.result.records[i].ce_skip, ab.strict_causal.result.records[i].ce_skip);
}

TEST(AblationTest, DiagonalRunsDiffer) {
  const auto& f = fixture();
  const auto ab = ablate_diagonal(f.bb, f.tc, f.layer.params(), corpus(2, 32), small_config());
  EXPECT_NE(ab.include_diagonal.summary.mean_ce_skip, ab.strict_causal.summary.mean_ce_skip);
}

TEST(AblationTest, ShuffledPairUsesSameConfig) {
  const auto ab = sanity_shuffled(fixture().model(), corpus(2, 32), small_config());
  EXPECT_EQ(ab.normal.summary.chunk_count, ab.shuffled.summary.chunk_count);
  EXPECT_EQ(ab.normal.summary.config.seed, ab.shuffled.summary.config.seed);
  EXPECT_NEAR(ab.improvement_normal, gate_improvement(ab.normal.summary), 0.0);
  auto c = small_config();
  c.policies = {PolicyKind::kSkip};
  EXPECT_THROW(sanity_shuffled(fixture().model(), corpus(2, 32), c), ConfigError);
}

TEST(ReportTest, CsvLayout) {
  const auto c = small_config();
  const auto r = run_policy_suite(fixture().model(), corpus(2, 32), c);
  const auto csv = records_csv(r.records, c.policies);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "sequence_id,chunk_index,recon_loss,ttt_delta,ce_skip,ce_update,skip_decision,skip_ce,"
            "update1_decision,update1_ce,gate_decision,gate_ce,random_decision,random_ce,oracle_decision,"
            "oracle_ce");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) {
    ++rows;
    std::istringstream cells(line);
    std::string cell;
    std::vector<std::string> v;
    while (std::getline(cells, cell, ',')) v.push_back(cell);
    ASSERT_EQ(v.size(), 16u);
    EXPECT_EQ(std::stod(v[4]), r.records[rows - 1].ce_skip);  // 17 digits round-trip
  }
  EXPECT_EQ(rows, r.records.size());
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
}

TEST(ReportTest, SchemaAndDeterminism) {
  const auto c = small_config();
  const auto seqs = corpus(3, 32);
  const auto dir = fs::temp_directory_path() / "tttgate_report_test";
  fs::remove_all(dir);
  std::string first;
  for (int rep = 0; rep < 2; ++rep) {
    const auto run = evaluate(fixture().model(), seqs, c);
    emit_report(run.summary, run.result.records, {{"command", "test"}}, dir / std::to_string(rep));
    std::ifstream f(dir / std::to_string(rep) / "report.json");
    std::stringstream ss;
    ss << f.rdbuf();
    if (rep == 0) first = ss.str();
    else EXPECT_EQ(ss.str(), first);
  }
  std::ifstream sf(fs::path(TTTGATE_SOURCE_DIR) / "schema" / "report.schema.json");
  const testing::SchemaChecker checker(nlohmann::json::parse(sf));
  const auto errors = checker.validate(nlohmann::json::parse(first));
  EXPECT_TRUE(errors.empty()) << errors.front();

  auto broken = nlohmann::json::parse(first);
  broken["policies"]["gate"]["realized_update_rate"] = 1.5;
  broken.erase("cost_ledger");
  EXPECT_EQ(checker.validate(broken).size(), 2u);
}

TEST(ReportTest, SkipOnlyReport) {
  auto c = small_config();
  c.policies = {PolicyKind::kSkip};
  const auto run = evaluate(fixture().model(), corpus(2, 32), c);
  const auto j = report_json(run.summary, nlohmann::ordered_json::object());
  EXPECT_EQ(j["policies"].size(), 1u);
  EXPECT_TRUE(j["oracle_recovery"].is_null());
  EXPECT_TRUE(j["correlations"].is_null());
  EXPECT_TRUE(j["mcnemar"].is_null());
}

}  // namespace
}  // namespace tttgate::harness
