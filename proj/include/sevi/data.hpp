#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sevi/choice.hpp"

namespace sevi {

// one choice situation: J x L attribute matrix, the chosen alternative, the
// availability mask, and a cluster id for grouped standard errors
struct ChoiceSituation {
  std::int64_t id = 0;
  Eigen::MatrixXd x;  // J x L
  int chosen = -1;
  std::uint64_t available = 0;
  std::int64_t cluster = 0;
};

struct DesignBatch {
  int n_alternatives = 0;
  int n_coefficients = 0;
  std::vector<ChoiceSituation> obs;
  std::vector<std::string> coef_names;
  std::vector<std::string> alt_names;

  int n() const { return static_cast<int>(obs.size()); }

  // structural checks; throws ValidationError naming the offending situation
  void validate() const;

  // systematic utilities X beta for one situation; throws NumericError if an
  // available entry overflows to a non-finite value
  UtilityVector utilities(int i, const Eigen::VectorXd& beta) const;

  // order-independent hash of (ids, chosen, availability); guards against
  // comparing fits from different datasets
  std::uint64_t fingerprint() const;
};

}  // namespace sevi
