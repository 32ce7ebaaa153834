#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "sevi/errors.hpp"

namespace sevi {

struct GhkConfig;

// Systematic utilities plus an availability mask (bit j set = alternative j
// is on the menu). Unavailable entries are ignored by every kernel.
struct UtilityVector {
  Eigen::VectorXd values;
  std::uint64_t available = 0;

  UtilityVector() = default;
  explicit UtilityVector(Eigen::VectorXd v);
  UtilityVector(Eigen::VectorXd v, std::uint64_t avail);

  int size() const { return static_cast<int>(values.size()); }
  bool is_available(int j) const {
    return j >= 0 && j < size() && (available >> j & 1u);
  }
  int n_available() const;
  // throws ValidationError on non-finite available entries or fewer than
  // min_avail available alternatives; CapacityError above 63 alternatives
  void require_valid(int min_avail = 2) const;
};

struct ErrorFamily {
  enum class Kind { SEVI, LEVI, NORM, Mixed };
  Kind kind = Kind::SEVI;
  double rho = 1.0;  // Mixed only: weight on the SEVI branch

  static ErrorFamily sevi() { return {Kind::SEVI, 1.0}; }
  static ErrorFamily levi() { return {Kind::LEVI, 0.0}; }
  static ErrorFamily norm() { return {Kind::NORM, 0.0}; }
  static ErrorFamily mixed(double rho);
};

std::string to_string(const ErrorFamily& family);
ErrorFamily parse_family(const std::string& text);

// How deep the alternating-sum expansion goes. MaxCardinality(M) keeps the
// layers below cardinality M; ToleranceDriven stops once a whole layer's
// absolute sum drops under tol, which bounds the truncation error by tol.
struct TruncationPolicy {
  enum class Mode { Full, MaxCardinality, ToleranceDriven };
  Mode mode = Mode::Full;
  unsigned max_cardinality = 0;
  double tol = 0.0;

  static TruncationPolicy full() { return {}; }
  static TruncationPolicy max_card(unsigned m);
  static TruncationPolicy tolerance_driven(double tol);
  // default: Full through 14 available alternatives, ToleranceDriven(1e-8) above
  static TruncationPolicy auto_for(int n_available);

  std::string describe() const;
};
TruncationPolicy parse_truncation(const std::string& text);

struct ProbGrad {
  double p = 0.0;
  Eigen::VectorXd dp;  // dP(j)/dv_k for every k, zero at unavailable k
};

double prob_sevi(const UtilityVector& v, int j, const TruncationPolicy& policy);
double prob_sevi(const UtilityVector& v, int j);

double prob_levi(const UtilityVector& v, int j);

double prob(const UtilityVector& v, int j, const ErrorFamily& family,
            const TruncationPolicy& policy);
double prob(const UtilityVector& v, int j, const ErrorFamily& family,
            const TruncationPolicy& policy, const GhkConfig& ghk);

// probabilities for every alternative (zeros at unavailable slots)
Eigen::VectorXd prob_all(const UtilityVector& v, const ErrorFamily& family,
                         const TruncationPolicy& policy);
Eigen::VectorXd prob_all(const UtilityVector& v, const ErrorFamily& family,
                         const TruncationPolicy& policy, const GhkConfig& ghk);

// upper bound on |P_full - P_M|: the absolute sum of the first omitted layer
double truncation_bound(const UtilityVector& v, int j, unsigned m);

ProbGrad prob_sevi_grad(const UtilityVector& v, int j,
                        const TruncationPolicy& policy);
ProbGrad prob_levi_grad(const UtilityVector& v, int j);

// dP(j)/dv for SEVI, LEVI, or Mixed (NORM has no closed-form gradient here)
Eigen::VectorXd dprob_dv(const UtilityVector& v, int j,
                         const ErrorFamily& family,
                         const TruncationPolicy& policy);

// J x J Jacobian of the probability map, row j = dP(j)/dv
Eigen::MatrixXd dprob_matrix(const UtilityVector& v, const ErrorFamily& family,
                             const TruncationPolicy& policy);

// alternating sum of prob_sevi over menus D ∪ S, S outside the anchor set D;
// nonnegative for every (j, D) under an additive random utility model
double block_marschak(const UtilityVector& v, int j, std::uint64_t anchor_set);

// cost-minimization duality: LEVI costs route to prob_sevi(-d), SEVI costs
// to prob_levi(-d)
double prob_min(const UtilityVector& cost, int j, const ErrorFamily& family,
                const TruncationPolicy& policy);

namespace detail {

// layered Gosper-order reference evaluator with compensated accumulation;
// handles every policy and is the baseline the fast paths are tested against
double prob_sevi_reference(const UtilityVector& v, int j,
                           const TruncationPolicy& policy);
ProbGrad prob_sevi_grad_reference(const UtilityVector& v, int j,
                                  const TruncationPolicy& policy);

// batched depth-first fast path over W observations in lockstep; exposed for
// the equivalence tests. e is interleaved: e[k*w + lane].
void sevi_dfs_batch(const double* e, int u, int max_depth, int w, double* p_out,
                    double* dpj_out, double* cross_out);
void sevi_dfs_batch_prob(const double* e, int u, int max_depth, int w,
                         double* p_out);

// building blocks for callers that drive the batch kernel directly
int make_exponents(const UtilityVector& v, int j, int* alt, double* e);
int layers_for_policy(const TruncationPolicy& policy, int u);
double clamp_probability(double p);

}  // namespace detail

}  // namespace sevi
