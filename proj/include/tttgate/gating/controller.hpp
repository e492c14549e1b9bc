#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tttgate/numerics/matrix.hpp"

namespace tttgate::gating {

enum class Decision : unsigned char { kSkip = 0, kUpdate = 1 };
enum class ControllerPhase : unsigned char { kCalibrating, kOnline };

std::string_view to_string(Decision d) noexcept;
std::string_view to_string(ControllerPhase p) noexcept;

struct ControllerConfig {
  Real target_rate = 0.5;  // rho
  Real alpha = 0.1;        // EMA smoothing / controller gain
  std::size_t n_cal = 16;
  Decision warmup_decision = Decision::kUpdate;

  void validate() const;
};

struct GateDecision {
  Decision decision = Decision::kSkip;
  Real signal = 0.0;
  Real tau_at_decision = 0.0;
  ControllerPhase phase = ControllerPhase::kCalibrating;
};

// Streaming threshold gate.
//
// Calibrating: signals are buffered and answered with the warmup decision.
// The n_cal-th signal sets tau to the nearest-rank (1 - rho) percentile of the
// buffer and the rate EMA to rho.
//
// Online, for each signal s:
//   d    = [s > tau]                         (decided against the current tau)
//   tau <- tau + alpha * (r_hat - rho) * |tau|   (uses r_hat before absorbing d)
//   r_hat <- (1 - alpha) * r_hat + alpha * d
class ThresholdController {
 public:
  explicit ThresholdController(ControllerConfig config);

  GateDecision observe_and_decide(Real signal);

  const ControllerConfig& config() const noexcept { return config_; }
  ControllerPhase phase() const noexcept { return phase_; }
  Real tau() const noexcept { return tau_; }
  Real ema_rate() const noexcept { return ema_rate_; }
  const std::vector<Real>& calibration_buffer() const noexcept { return buffer_; }
  std::size_t decisions_made() const noexcept { return decisions_; }

  nlohmann::ordered_json to_json() const;
  static ThresholdController from_json(const nlohmann::json& j);

 private:
  ControllerConfig config_;
  ControllerPhase phase_ = ControllerPhase::kCalibrating;
  Real tau_ = 0.0;
  Real ema_rate_ = 0.0;
  std::vector<Real> buffer_;
  std::size_t decisions_ = 0;
};

// Half-up rounding of rho * count, the budget cardinality used everywhere.
std::size_t budget_count(std::size_t count, Real rho);

Real oracle_advantage(Real ce_skip, Real ce_update) noexcept;

// Exactly budget_count(K, rho) entries set: the largest advantages, ties to
// the lower index.
std::vector<bool> oracle_select(std::span<const Real> advantages, Real rho);

// Exactly budget_count(K, rho) entries set at seeded uniformly random positions.
std::vector<bool> random_select(std::size_t count, Real rho, std::uint64_t seed);

}  // namespace tttgate::gating
