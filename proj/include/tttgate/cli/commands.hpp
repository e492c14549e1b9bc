#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "tttgate/backbone/model.hpp"
#include "tttgate/harness/suite.hpp"
#include "tttgate/ttt/layer.hpp"

namespace tttgate::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitIo = 4,
};

// Environment variable naming the default output location.
inline constexpr const char* kOutEnv = "TTTGATE_OUT";
inline constexpr const char* kDefaultOut = "tttgate_out";

struct RunConfig {
  std::string command;
  std::string ablation;  // diagonal | shuffled | delta
  std::string corpus;
  std::string weights;  // directory holding backbone.bin + ttt.bin, or empty
  std::uint64_t seed = 42;
  std::size_t seq_len = 256;
  std::size_t chunk_size = 64;
  double rho = 0.5;
  double alpha = 0.1;
  std::size_t n_cal = 16;
  int mask_k = 0;
  std::string policies = "skip,update1,gate,random,oracle";
  std::string signal = "recon";
  std::string out;
  bool carry_state = false;
  bool oracle_per_sequence = false;
  // synth
  std::size_t sequences = 128;
  std::string pattern = "mixed";

  void validate() const;
  harness::SuiteConfig suite() const;
  nlohmann::ordered_json echo() const;
};

struct LoadedModel {
  backbone::Backbone backbone;
  ttt::TttConfig ttt_config;
  ttt::ProjectionParams params;
  std::string source;  // "default" or the weights directory
};

// Default seed-42 weights, or the pair stored under `dir`.
LoadedModel load_model(const std::string& dir, std::size_t chunk_size, int mask_k);
void save_model(const std::filesystem::path& dir, const backbone::BackboneWeights& bb,
                const ttt::TttConfig& config, const ttt::ProjectionParams& params);

int cmd_eval(const RunConfig& config, std::ostream& out);
int cmd_calibrate(const RunConfig& config, std::ostream& out);
int cmd_ablate(const RunConfig& config, std::ostream& out);
int cmd_synth(const RunConfig& config, std::ostream& out);
int cmd_init_weights(const RunConfig& config, std::ostream& out);

// Full command line (argv[0] first). Maps errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tttgate::cli
