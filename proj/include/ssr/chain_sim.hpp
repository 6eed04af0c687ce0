#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ssr/gateway.hpp"

namespace ssr {

/// Knobs of the synthetic arithmetic-chain solver.
struct ChainSimConfig {
  // 0-based step whose computation can go wrong; every other step is exact.
  int error_step = 1;
  // Per-sample probability that the designated step is off by one.
  double error_rate = 0.3;
  // Probability the judge scores a wrong final answer below 5.
  double judge_recall = 0.5;
  // Probability the judge scores a correct final answer below 5.
  double judge_false_alarm = 0.0;
  std::uint64_t seed = 0;

  static ChainSimConfig from_json(const nlohmann::json& doc);
};

/// A simulated model for arithmetic-chain tasks. It recognises each prompt
/// family by its template wording, recomputes the chain from whatever context
/// the prompt carries, and errs only on the designated step. Every draw is a
/// pure function of (seed, prompt, sample_index, attempt), so runs replay
/// exactly.
class ChainSimulator final : public Backend {
 public:
  explicit ChainSimulator(ChainSimConfig config);

  ChatResponse send(const ChatRequest& request, int retry) override;
  std::string id() const override { return "chain-sim"; }

  const ChainSimConfig& config() const noexcept { return config_; }

 private:
  ChainSimConfig config_;
};

}  // namespace ssr
