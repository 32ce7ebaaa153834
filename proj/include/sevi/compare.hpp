#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sevi/estimate.hpp"

namespace sevi {

enum class VuongDecision { FavorSEVI, FavorLEVI, Indistinguishable };

std::string to_string(VuongDecision d);

// non-nested likelihood comparison of two fits on the same data; by
// convention the first slot holds the SEVI fit and the second the LEVI fit,
// and the statistic is negative when the first model fits better
struct VuongReport {
  double lr = 0.0;         // sum of per-situation nll differences (first - second)
  double statistic = 0.0;  // standardized V_n, N(0,1) under equivalence
  VuongDecision decision_5pct = VuongDecision::Indistinguishable;
  Eigen::VectorXd per_obs_diffs;
};

VuongReport vuong(const FitResult& fit_a, const FitResult& fit_b);

struct IcRow {
  std::string label;
  int n_params = 0;
  double nll = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int rank = 0;  // 1 = best AIC
};

std::vector<IcRow> ic_table(const std::vector<FitResult>& fits);

// Hausman-McFadden IIA diagnostic: refit the conditional logit on a menu
// subset and compare with the full-menu fit
struct HausmanResult {
  double wald = 0.0;
  int dof = 0;
  double p_value = 1.0;
  bool negative_directions = false;  // covariance difference not psd
  int n_full = 0;
  int n_subset = 0;
};

HausmanResult hausman_mcfadden(const DesignBatch& batch,
                               std::uint64_t subset_mask,
                               const FitOptions& options = {});

}  // namespace sevi
