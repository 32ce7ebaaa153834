#pragma once

#include <cstddef>
#include <vector>

#include "sevi/rng.hpp"

namespace sevi {

// Extreme-value, logistic and normal primitives shared by the choice kernels
// and the simulation lab. SEVI is the smallest extreme value type I law with
// CDF 1 - exp(-exp(a)); LEVI (the Gumbel) is its mirror image.
class Evd {
 public:
  enum class Family { SEVI, LEVI, Logistic, Normal };

  static Evd sevi() { return Evd(Family::SEVI, 0.0); }
  static Evd levi() { return Evd(Family::LEVI, 0.0); }
  static Evd logistic() { return Evd(Family::Logistic, 0.0); }
  static Evd normal(double variance);

  Family family() const { return family_; }

  double cdf(double a) const;
  double pdf(double a) const;
  double quantile(double p) const;

  double mean() const;
  double variance() const;

 private:
  Evd(Family f, double var) : family_(f), normal_variance_(var) {}
  Family family_;
  double normal_variance_;
};

double sample_one(const Evd& d, RngStream& rng);
std::vector<double> sample(const Evd& d, RngStream& rng, std::size_t n);

}  // namespace sevi
