#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "sevi/choice.hpp"

namespace sevi {

// iid N(0, pi^2/6) errors, matching the scale of the extreme-value families
struct GhkConfig {
  int draws = 500;
  std::uint64_t seed = 20240417;
  bool antithetic = true;
};

// GHK-simulated choice probabilities, renormalized to sum to one per vector.
// Deterministic given (cfg, v): the simulator reuses one uniform panel drawn
// from cfg.seed for every alternative and every call (common random numbers).
Eigen::VectorXd prob_norm_all(const UtilityVector& v, const GhkConfig& cfg);
double prob_norm(const UtilityVector& v, int j, const GhkConfig& cfg);

// the raw GHK estimate for one alternative, before renormalization
double prob_norm_raw(const UtilityVector& v, int j, const GhkConfig& cfg);

}  // namespace sevi
