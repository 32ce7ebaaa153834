#include "sevi/evd.hpp"

#include <cmath>
#include <stdexcept>

#include "sevi/stats.hpp"

namespace sevi {

namespace {
// keep exp() arguments representable; beyond this the CDF is exactly 0 or 1
constexpr double kExpClamp = 700.0;

double clamped_exp(double a) { return std::exp(a < kExpClamp ? a : kExpClamp); }
}  // namespace

Evd Evd::normal(double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("Evd::normal: variance must be positive");
  return Evd(Family::Normal, variance);
}

double Evd::cdf(double a) const {
  if (!std::isfinite(a)) throw std::invalid_argument("Evd::cdf: non-finite argument");
  switch (family_) {
    case Family::SEVI:
      return -std::expm1(-clamped_exp(a));
    case Family::LEVI:
      return std::exp(-clamped_exp(-a));
    case Family::Logistic:
      return 1.0 / (1.0 + clamped_exp(-a));
    case Family::Normal:
      return norm_cdf(a / std::sqrt(normal_variance_));
  }
  return 0.0;
}

double Evd::pdf(double a) const {
  if (!std::isfinite(a)) throw std::invalid_argument("Evd::pdf: non-finite argument");
  switch (family_) {
    case Family::SEVI:
      return std::exp(std::min(a, kExpClamp) - clamped_exp(a));
    case Family::LEVI:
      return std::exp(std::min(-a, kExpClamp) - clamped_exp(-a));
    case Family::Logistic: {
      double e = clamped_exp(-std::fabs(a));
      double s = 1.0 + e;
      return e / (s * s);
    }
    case Family::Normal: {
      double s2 = normal_variance_;
      return std::exp(-0.5 * a * a / s2) / std::sqrt(2.0 * kPi * s2);
    }
  }
  return 0.0;
}

double Evd::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("Evd::quantile: p must be in (0,1)");
  switch (family_) {
    case Family::SEVI:
      return std::log(-std::log1p(-p));
    case Family::LEVI:
      return -std::log(-std::log(p));
    case Family::Logistic:
      return std::log(p) - std::log1p(-p);
    case Family::Normal:
      return std::sqrt(normal_variance_) * norm_quantile(p);
  }
  return 0.0;
}

double Evd::mean() const {
  switch (family_) {
    case Family::SEVI:
      return -kEulerGamma;
    case Family::LEVI:
      return kEulerGamma;
    default:
      return 0.0;
  }
}

double Evd::variance() const {
  switch (family_) {
    case Family::SEVI:
    case Family::LEVI:
      return kPi * kPi / 6.0;
    case Family::Logistic:
      return kPi * kPi / 3.0;
    case Family::Normal:
      return normal_variance_;
  }
  return 0.0;
}

double sample_one(const Evd& d, RngStream& rng) { return d.quantile(rng.uniform()); }

std::vector<double> sample(const Evd& d, RngStream& rng, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = d.quantile(rng.uniform());
  return out;
}

}  // namespace sevi
