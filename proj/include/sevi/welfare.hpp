#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sevi/choice.hpp"
#include "sevi/data.hpp"

namespace sevi {

// expected maximum utility net of the zero-utility benchmark, so W(0) = 0,
// W(v + c) = W(v) + c, and dW/dv equals the choice-probability vector
double surplus(const UtilityVector& v, const ErrorFamily& family);

// un-centered E[max of J error draws]
double raw_expected_max(int n_alternatives, const ErrorFamily& family);

// a batch of utility rows sharing one marginal utility of income
struct WelfareQuery {
  std::vector<UtilityVector> rows;
  double lambda = 1.0;  // utils per currency unit, > 0
};

// compensation for a price change of delta on alternative m (currency);
// positive when the price rises
double cv_price(const UtilityVector& v, double lambda, int m, double delta,
                const ErrorFamily& family);
double cv_price_mean(const WelfareQuery& q, int m, double delta,
                     const ErrorFamily& family);

// compensation for removing alternative k from the menu; never negative
double cv_removal(const UtilityVector& v, double lambda, int k,
                  const ErrorFamily& family);
double cv_removal_mean(const WelfareQuery& q, int k, const ErrorFamily& family);

// sample-average own-probability response to one attribute, per alternative
Eigen::VectorXd ape(const DesignBatch& batch, const ErrorFamily& family,
                    const Eigen::VectorXd& beta, int attr_index,
                    const TruncationPolicy& policy);

// recover systematic utilities (last one normalized to zero) whose
// probabilities reproduce the target shares
Eigen::VectorXd invert_shares(const Eigen::VectorXd& target);

}  // namespace sevi
