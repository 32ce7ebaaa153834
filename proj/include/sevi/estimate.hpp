#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "sevi/choice.hpp"
#include "sevi/data.hpp"
#include "sevi/probit.hpp"

namespace sevi {

enum class SeKind { Plain, Sandwich, Cluster };
std::string to_string(SeKind kind);
SeKind parse_se(const std::string& text);

struct FitOptions {
  Eigen::VectorXd start;  // empty = zeros (or the LEVI warm start below)
  int max_iter = 200;
  double grad_tol = 1e-6;
  double nll_rel_tol = 1e-10;
  std::optional<TruncationPolicy> policy;  // default: auto for the menu size
  GhkConfig ghk;                           // NORM likelihoods only
  bool warm_start_from_levi = true;        // SEVI and mixed starts
  unsigned threads = 0;                    // 0 = library default
};

struct FitResult {
  ErrorFamily family = ErrorFamily::sevi();
  Eigen::VectorXd beta;   // preference coefficients (length L)
  Eigen::MatrixXd vcov;   // plain (S'S)^-1 at fit time; empty for NORM
  SeKind se_kind = SeKind::Plain;
  double nll = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::string stop_reason;
  Eigen::MatrixXd scores;  // n x p per-situation scores; empty for NORM
  Eigen::VectorXd per_obs_nll;
  int floored = 0;  // situations whose probability hit the 1e-12 floor
  std::uint64_t data_fingerprint = 0;
  TruncationPolicy policy;
  GhkConfig ghk;  // simulator settings the fit used (NORM only)
  int n_obs = 0;
  int n_params = 0;  // L, or L+1 when the mixing weight is estimated

  // filled by fit_mixed: the mixing weight on the logit scale and its
  // delta-method standard error (interior estimates only)
  bool rho_estimated = false;
  double theta = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  double rho_se = std::numeric_limits<double>::quiet_NaN();
  bool rho_boundary = false;
};

// negative log-likelihood, probabilities floored at 1e-12 before the log
double nll(const DesignBatch& batch, const Eigen::VectorXd& beta,
           const ErrorFamily& family, const TruncationPolicy& policy,
           unsigned threads = 0);

// per-situation gradients of the negative log-likelihood (closed-form
// families only); column sums equal the nll gradient
Eigen::MatrixXd score(const DesignBatch& batch, const Eigen::VectorXd& beta,
                      const ErrorFamily& family, const TruncationPolicy& policy,
                      unsigned threads = 0);

// throws IdentificationError when the differenced design is rank-deficient
void check_identification(const DesignBatch& batch);

FitResult fit(const DesignBatch& batch, const ErrorFamily& family,
              const FitOptions& options = {});

// estimates the SEVI/LEVI mixing weight jointly with the coefficients
FitResult fit_mixed(const DesignBatch& batch, const FitOptions& options = {});

// Plain (S'S)^-1, Sandwich H^-1 S'S H^-1, or Cluster with scores summed
// within cluster; the Hessian comes from central differences of the gradient
Eigen::MatrixXd vcov(const FitResult& fit, const DesignBatch& batch,
                     SeKind kind);

struct WaldResult {
  double stat = 0.0;
  int dof = 0;
  double p_value = 1.0;
};
// tests R beta = r against the fit's stored covariance
WaldResult wald(const FitResult& fit, const Eigen::MatrixXd& r_mat,
                const Eigen::VectorXd& r_vec);

}  // namespace sevi
