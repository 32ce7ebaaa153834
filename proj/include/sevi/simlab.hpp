#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sevi/data.hpp"
#include "sevi/estimate.hpp"

namespace sevi {

// standardized alternative index: mean 0, variance 1 across j = 1..J
double omega(int j, int n_alternatives);

struct DgpSpec {
  enum class AttrLaw { Heteroskedastic, Homoskedastic, FixedUtilities };

  int n_alternatives = 5;
  int n_obs = 500;
  Eigen::VectorXd beta0;            // empty = (1, 2, 1), or (1) for fixed v
  AttrLaw attr_law = AttrLaw::Heteroskedastic;
  Eigen::VectorXd fixed_utilities;  // only read when attr_law = FixedUtilities
  ErrorFamily family = ErrorFamily::sevi();
  std::uint64_t seed = 1;

  Eigen::VectorXd effective_beta0() const;
};

// draws covariates and taste shocks, records the utility-maximizing choice
DesignBatch generate(const DgpSpec& spec);

struct ReplicateConfig {
  DgpSpec dgp;
  std::vector<ErrorFamily> estimators;  // families fitted on every replication
  bool fit_rho_free = false;            // also estimate the mixing weight
  bool vuong_sevi_levi = false;         // per-replication V_n (needs both fits)
  std::uint64_t hausman_subset = 0;     // nonzero mask: per-replication IIA test
  int reps = 500;
  unsigned workers = 0;                 // 0 = library default
  FitOptions fit_options;
};

struct EstimatorSummary {
  std::string label;
  Eigen::VectorXd bias;      // mean(beta_hat) - beta0, converged reps
  Eigen::VectorXd sd;        // empirical standard deviation
  Eigen::VectorXd mean_se;   // average plain standard error
  Eigen::VectorXd coverage;  // fraction with |beta_hat - beta0| <= 1.96 se
  int converged = 0;
  int nonconverged = 0;
  Eigen::MatrixXd estimates;   // reps x L, NaN rows where not converged
  std::vector<double> rho_hat;  // mixing-weight draws (rho-free fits only)
};

struct ReplicateSummary {
  Eigen::VectorXd beta0;
  int reps = 0;
  std::vector<EstimatorSummary> estimators;
  std::vector<double> vuong_stats;      // per converged pair, rep order
  std::vector<double> hausman_pvalues;  // per successful test, rep order
};

ReplicateSummary replicate(const ReplicateConfig& config);

struct BenchConfig {
  std::vector<int> j_values = {5, 8, 12};
  int n_obs = 250;
  std::vector<ErrorFamily> families = {ErrorFamily::sevi(),
                                       ErrorFamily::levi()};
  int repeats = 3;
  std::uint64_t seed = 99;
  unsigned threads = 0;
  GhkConfig ghk;
};

struct BenchRow {
  int n_alternatives = 0;
  std::string family;
  int n_obs = 0;
  int repeats = 0;
  double median_seconds = 0.0;
  double best_seconds = 0.0;
  bool converged = false;
};

struct BenchReport {
  std::string hardware;
  std::vector<BenchRow> rows;
};

BenchReport timing_bench(const BenchConfig& config);

}  // namespace sevi
