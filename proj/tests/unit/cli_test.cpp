#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tttgate/backbone/corpus.hpp"
#include "tttgate/cli/commands.hpp"
#include "tttgate/gating/controller.hpp"
#include "tttgate/numerics/ops.hpp"

namespace tttgate::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tttgate_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    corpus_ = (dir_ / "corpus.bin").string();
    ASSERT_EQ(call({"synth", "--seed", "3", "--sequences", "6", "--seq-len", "32", "--out", corpus_}), 0);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int call(std::vector<std::string> args) {
    args.insert(args.begin(), "tttgate");
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }
  int eval(const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"eval", "--corpus", corpus_, "--seq-len", "32", "--chunk-size", "8",
                                  "--ncal", "4", "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return call(args);
  }

  fs::path dir_;
  std::string corpus_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, SkipOnlyReport) {
  ASSERT_EQ(eval(dir_ / "r", {"--policies", "skip"}), 0) << err_.str();
  const auto j = nlohmann::json::parse(slurp(dir_ / "r" / "report.json"));
  EXPECT_EQ(j["policies"].size(), 1u);
  EXPECT_TRUE(j["policies"].contains("skip"));
  EXPECT_EQ(j["policies"]["skip"]["realized_update_rate"], 0.0);
  EXPECT_TRUE(j["oracle_recovery"].is_null());
  EXPECT_EQ(j["run_config"]["policies"], "skip");
}

TEST_F(CliTest, FullReportAndEcho) {
  ASSERT_EQ(eval(dir_ / "r", {"--rho", "0.5"}), 0) << err_.str();
  const auto j = nlohmann::json::parse(slurp(dir_ / "r" / "report.json"));
  EXPECT_TRUE(j["oracle_recovery"].is_number());
  EXPECT_EQ(j["policies"]["oracle"]["decision_accuracy"], 1.0);
  EXPECT_TRUE(j["policies"]["gate"]["decision_accuracy"].is_number());
  EXPECT_EQ(j["chunk_count"], 24);
  EXPECT_EQ(j["run_config"]["seq_len"], 32);
  EXPECT_EQ(j["run_config"]["chunk_size"], 8);
  EXPECT_EQ(j["run_config"]["n_cal"], 4);
  EXPECT_EQ(j["run_config"]["seed"], 42);
  EXPECT_EQ(j["run_config"]["command"], "eval");
  EXPECT_EQ(j["format_version"], 1);
}

TEST_F(CliTest, Deterministic) {
  ASSERT_EQ(eval(dir_ / "a"), 0);
  ASSERT_EQ(eval(dir_ / "b"), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "b" / "report.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "records.csv"), slurp(dir_ / "b" / "records.csv"));
  ASSERT_EQ(eval(dir_ / "c", {"--seed", "7"}), 0);
  EXPECT_NE(slurp(dir_ / "a" / "records.csv"), slurp(dir_ / "c" / "records.csv"));
}

TEST_F(CliTest, ExitCodesAndNoPartialOutput) {
  const auto out = dir_ / "bad";
  EXPECT_EQ(eval(out, {"--rho", "1.5"}), kExitConfig);
  EXPECT_EQ(eval(out, {"--chunk-size", "5"}), kExitConfig);
  EXPECT_EQ(eval(out, {"--mask-k", "1"}), kExitConfig);
  EXPECT_EQ(eval(out, {"--policies", "skip,dense"}), kExitConfig);
  EXPECT_EQ(eval(out, {"--signal", "loss"}), kExitConfig);
  EXPECT_EQ(eval(out, {"--bogus"}), kExitConfig);
  EXPECT_EQ(call({"ablate", "sideways", "--corpus", corpus_, "--out", out.string()}), kExitConfig);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(call({"eval", "--corpus", (dir_ / "missing.bin").string(), "--out", out.string()}), kExitIo);
  EXPECT_EQ(call({"eval", "--corpus", corpus_, "--weights", (dir_ / "nowhere").string(), "--seq-len", "32",
                  "--chunk-size", "8", "--out", out.string()}),
            kExitIo);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(err_.str().empty());
  EXPECT_EQ(call({"--help"}), 0);
  for (const char* flag : {"--corpus", "--weights", "--seed", "--seq-len", "--chunk-size", "--rho", "--alpha",
                           "--ncal", "--mask-k", "--policies", "--signal", "--out", "TTTGATE_OUT"}) {
    call({"eval", "--help"});
    EXPECT_NE(out_.str().find(flag), std::string::npos) << flag;
  }
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  const auto env_dir = dir_ / "from_env";
  ::setenv(kOutEnv, env_dir.string().c_str(), 1);
  const int code = call({"eval", "--corpus", corpus_, "--seq-len", "32", "--chunk-size", "8", "--ncal", "4",
                         "--policies", "skip"});
  ::unsetenv(kOutEnv);
  ASSERT_EQ(code, 0);
  EXPECT_TRUE(fs::exists(env_dir / "report.json"));
  EXPECT_TRUE(fs::exists(env_dir / "records.csv"));
}

TEST_F(CliTest, CalibrateMatchesPercentileAndReloads) {
  const auto out = dir_ / "cal";
  ASSERT_EQ(call({"calibrate", "--corpus", corpus_, "--seq-len", "32", "--chunk-size", "8", "--ncal", "16",
                  "--out", out.string()}),
            0)
      << err_.str();
  const auto cj = nlohmann::json::parse(slurp(out / "controller.json"));
  auto ctl = gating::ThresholdController::from_json(cj);
  const auto buf = ctl.calibration_buffer();
  ASSERT_EQ(buf.size(), 16u);
  std::vector<Real> sorted(buf.begin(), buf.end());
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(ctl.tau(), sorted[7]);  // ceil(0.5 * 16) - 1

  // The calibration buffer equals the recon losses of the first 16 chunks of the eval records.
  ASSERT_EQ(eval(dir_ / "r", {"--policies", "gate"}), 0);
  std::istringstream csv(slurp(dir_ / "r" / "records.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<Real> recon;
  std::vector<std::string> gate;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    recon.push_back(std::stod(cells[2]));
    gate.push_back(cells[6]);
  }
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(recon[i], buf[i]);

  // A fresh controller over the same stream and the reloaded checkpoint agree from chunk 16 on.
  gating::ThresholdController fresh({0.5, 0.1, 16});
  for (std::size_t i = 0; i < 16; ++i) fresh.observe_and_decide(recon[i]);
  auto reloaded = gating::ThresholdController::from_json(cj);
  for (std::size_t i = 16; i < recon.size(); ++i) {
    const auto d = reloaded.observe_and_decide(recon[i]).decision;
    EXPECT_EQ(d, fresh.observe_and_decide(recon[i]).decision);
    EXPECT_EQ(std::string(gating::to_string(d)), gate[i]);
  }

  ASSERT_EQ(call({"calibrate", "--corpus", corpus_, "--seq-len", "32", "--chunk-size", "8", "--ncal", "1",
                  "--out", out.string()}),
            0);
  const auto one = gating::ThresholdController::from_json(nlohmann::json::parse(slurp(out / "controller.json")));
  EXPECT_EQ(one.tau(), recon[0]);
  EXPECT_EQ(call({"calibrate", "--corpus", corpus_, "--seq-len", "32", "--chunk-size", "8", "--ncal", "25",
                  "--out", out.string()}),
            kExitConfig);
}

TEST_F(CliTest, AblateDiagonal) {
  const auto out = dir_ / "ab";
  ASSERT_EQ(call({"ablate", "diagonal", "--corpus", corpus_, "--seq-len", "32", "--chunk-size", "8", "--ncal", "4",
                  "--out", out.string()}),
            0)
      << err_.str();
  auto a = nlohmann::json::parse(slurp(out / "diagonal" / "k0" / "report.json"));
  auto b = nlohmann::json::parse(slurp(out / "diagonal" / "k-1" / "report.json"));
  EXPECT_EQ(a["run_config"]["mask_k"], 0);
  EXPECT_EQ(b["run_config"]["mask_k"], -1);
  a["run_config"].erase("mask_k");
  b["run_config"].erase("mask_k");
  EXPECT_EQ(a["run_config"], b["run_config"]);
  EXPECT_TRUE(fs::exists(out / "diagonal" / "summary.json"));
}

TEST_F(CliTest, AblateShuffled) {
  const auto out = dir_ / "ab";
  ASSERT_EQ(call({"ablate", "shuffled", "--corpus", corpus_, "--seq-len", "32", "--chunk-size", "8", "--ncal", "4",
                  "--out", out.string()}),
            0)
      << err_.str();
  const auto a = nlohmann::json::parse(slurp(out / "shuffled" / "normal" / "report.json"));
  const auto b = nlohmann::json::parse(slurp(out / "shuffled" / "shuffled" / "report.json"));
  EXPECT_EQ(a["run_config"]["seed"], b["run_config"]["seed"]);
  EXPECT_NE(a["mean_ce_skip_branch"], b["mean_ce_skip_branch"]);
}

TEST_F(CliTest, AblateDeltaLedger) {
  const auto out = dir_ / "ab";
  ASSERT_EQ(call({"ablate", "delta", "--corpus", corpus_, "--seq-len", "32", "--chunk-size", "8", "--ncal", "4",
                  "--out", out.string()}),
            0)
      << err_.str();
  const auto d = nlohmann::json::parse(slurp(out / "delta" / "delta" / "report.json"));
  const auto r = nlohmann::json::parse(slurp(out / "delta" / "recon" / "report.json"));
  EXPECT_EQ(d["run_config"]["signal"], "delta");
  EXPECT_EQ(r["run_config"]["signal"], "recon");
  const auto& ledger = d["cost_ledger"];
  EXPECT_EQ(ledger["measurement_overhead_per_chunk"], 2.0);
  EXPECT_EQ(r["cost_ledger"]["measurement_overhead_per_chunk"], 0.0);
  const Real rate = d["policies"]["gate"]["realized_update_rate"];
  EXPECT_EQ(d["policies"]["gate"]["relative_flops"], 1.0 + 2.0 * rate);
}

TEST_F(CliTest, SynthDeterministicAndChunkable) {
  const auto a = (dir_ / "a.bin").string(), b = (dir_ / "b.bin").string(), c = (dir_ / "c.bin").string();
  ASSERT_EQ(call({"synth", "--seed", "11", "--sequences", "4", "--seq-len", "64", "--out", a}), 0);
  ASSERT_EQ(call({"synth", "--seed", "11", "--sequences", "4", "--seq-len", "64", "--out", b}), 0);
  ASSERT_EQ(call({"synth", "--seed", "12", "--sequences", "4", "--seq-len", "64", "--out", c}), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
  const auto tokens = backbone::load_corpus(a);
  EXPECT_EQ(tokens.size(), 4u * 65);
  EXPECT_EQ(backbone::split_sequences(tokens, 64).size(), 4u);
  EXPECT_EQ(call({"synth", "--sequences", "0", "--out", a}), kExitConfig);
  EXPECT_EQ(call({"synth", "--pattern", "zigzag", "--out", a}), kExitConfig);
  EXPECT_EQ(call({"synth", "--out", (dir_ / "no" / "such" / "dir" / "x.bin").string()}), kExitIo);
}

TEST_F(CliTest, WeightsRoundTrip) {
  const auto w = dir_ / "weights";
  ASSERT_EQ(call({"init-weights", "--out", w.string()}), 0);
  ASSERT_EQ(eval(dir_ / "a"), 0);
  ASSERT_EQ(eval(dir_ / "b", {"--weights", w.string()}), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "records.csv"), slurp(dir_ / "b" / "records.csv"));
}

TEST_F(CliTest, TextCorpusDirectory) {
  const auto d = dir_ / "texts";
  fs::create_directories(d / "sub");
  std::ofstream(d / "b.txt") << std::string(40, 'b');
  std::ofstream(d / "sub" / "a.txt") << std::string(40, 'a');
  const auto tokens = backbone::load_corpus(d);
  ASSERT_EQ(tokens.size(), 80u);
  EXPECT_EQ(tokens.front(), 'b');
  EXPECT_EQ(tokens.back(), 'a');
  EXPECT_EQ(call({"eval", "--corpus", d.string(), "--seq-len", "32", "--chunk-size", "8", "--ncal", "2",
                  "--out", (dir_ / "r").string()}),
            0)
      << err_.str();
}

}  // namespace
}  // namespace tttgate::cli
