#include "tttgate/gating/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tttgate/error.hpp"
#include "tttgate/numerics/ops.hpp"
#include "tttgate/numerics/random.hpp"

namespace tttgate::gating {

std::string_view to_string(Decision d) noexcept {
  return d == Decision::kUpdate ? "UPDATE" : "SKIP";
}

std::string_view to_string(ControllerPhase p) noexcept {
  return p == ControllerPhase::kOnline ? "online" : "calibrating";
}

void ControllerConfig::validate() const {
  if (!(target_rate > 0.0 && target_rate <= 1.0))
    throw ConfigError("controller: target rate must lie in (0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("controller: alpha must lie in (0, 1]");
  if (n_cal == 0) throw ConfigError("controller: n_cal must be >= 1");
}

ThresholdController::ThresholdController(ControllerConfig config) : config_(config) {
  config_.validate();
  buffer_.reserve(config_.n_cal);
}

GateDecision ThresholdController::observe_and_decide(Real signal) {
  if (!std::isfinite(signal)) throw NumericError("gate signal is not finite");
  GateDecision out;
  out.signal = signal;
  ++decisions_;

  if (phase_ == ControllerPhase::kCalibrating) {
    buffer_.push_back(signal);
    out.decision = config_.warmup_decision;
    out.tau_at_decision = tau_;
    out.phase = ControllerPhase::kCalibrating;
    if (buffer_.size() >= config_.n_cal) {
      tau_ = nearest_rank_percentile(buffer_, 1.0 - config_.target_rate);
      ema_rate_ = config_.target_rate;
      phase_ = ControllerPhase::kOnline;
    }
    return out;
  }

  out.phase = ControllerPhase::kOnline;
  out.tau_at_decision = tau_;
  out.decision = signal > tau_ ? Decision::kUpdate : Decision::kSkip;
  const Real d = out.decision == Decision::kUpdate ? 1.0 : 0.0;
  tau_ += config_.alpha * (ema_rate_ - config_.target_rate) * std::abs(tau_);
  ema_rate_ = std::clamp((1.0 - config_.alpha) * ema_rate_ + config_.alpha * d, 0.0, 1.0);
  return out;
}

nlohmann::ordered_json ThresholdController::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "tttgate-controller";
  j["version"] = 1;
  j["target_rate"] = config_.target_rate;
  j["alpha"] = config_.alpha;
  j["n_cal"] = config_.n_cal;
  j["warmup_decision"] = to_string(config_.warmup_decision);
  j["phase"] = to_string(phase_);
  j["tau"] = tau_;
  j["ema_rate"] = ema_rate_;
  j["decisions_made"] = decisions_;
  j["buffer"] = buffer_;
  return j;
}

ThresholdController ThresholdController::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "tttgate-controller" || j.at("version").get<int>() != 1)
      throw ConfigError("controller checkpoint: unsupported format/version");
    ControllerConfig cfg;
    cfg.target_rate = j.at("target_rate").get<Real>();
    cfg.alpha = j.at("alpha").get<Real>();
    cfg.n_cal = j.at("n_cal").get<std::size_t>();
    const auto warm = j.at("warmup_decision").get<std::string>();
    if (warm != "UPDATE" && warm != "SKIP") throw ConfigError("controller checkpoint: bad warmup");
    cfg.warmup_decision = warm == "UPDATE" ? Decision::kUpdate : Decision::kSkip;
    ThresholdController c(cfg);
    const auto phase = j.at("phase").get<std::string>();
    if (phase != "online" && phase != "calibrating")
      throw ConfigError("controller checkpoint: bad phase");
    c.phase_ = phase == "online" ? ControllerPhase::kOnline : ControllerPhase::kCalibrating;
    c.tau_ = j.at("tau").get<Real>();
    c.ema_rate_ = j.at("ema_rate").get<Real>();
    c.decisions_ = j.at("decisions_made").get<std::size_t>();
    c.buffer_ = j.at("buffer").get<std::vector<Real>>();
    const bool calibrating = c.buffer_.size() < cfg.n_cal;
    if (calibrating != (c.phase_ == ControllerPhase::kCalibrating))
      throw ConfigError("controller checkpoint: phase inconsistent with buffer length");
    if (!(c.ema_rate_ >= 0.0 && c.ema_rate_ <= 1.0) || !std::isfinite(c.tau_))
      throw ConfigError("controller checkpoint: state out of range");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("controller checkpoint: ") + e.what());
  }
}

std::size_t budget_count(std::size_t count, Real rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("budget fraction must lie in [0, 1]");
  const auto m = static_cast<std::size_t>(std::floor(rho * static_cast<Real>(count) + 0.5));
  return std::min(m, count);
}

Real oracle_advantage(Real ce_skip, Real ce_update) noexcept { return ce_skip - ce_update; }

std::vector<bool> oracle_select(std::span<const Real> advantages, Real rho) {
  if (advantages.empty()) throw ConfigError("oracle_select: no chunks");
  const std::size_t m = budget_count(advantages.size(), rho);
  std::vector<std::size_t> order(advantages.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return advantages[a] > advantages[b];
  });
  std::vector<bool> chosen(advantages.size(), false);
  for (std::size_t i = 0; i < m; ++i) chosen[order[i]] = true;
  return chosen;
}

std::vector<bool> random_select(std::size_t count, Real rho, std::uint64_t seed) {
  if (count == 0) throw ConfigError("random_select: no chunks");
  const std::size_t m = budget_count(count, rho);
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<bool> chosen(count, false);
  for (std::size_t i = 0; i < m; ++i) chosen[idx[i]] = true;
  return chosen;
}

}  // namespace tttgate::gating
