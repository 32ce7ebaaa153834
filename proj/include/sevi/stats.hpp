#pragma once

namespace sevi {

inline constexpr double kEulerGamma = 0.577215664901532860606512090082;
inline constexpr double kPi = 3.141592653589793238462643383280;

double norm_cdf(double x);       // standard normal CDF
double norm_sf(double x);        // 1 - norm_cdf(x), accurate in the tail
double norm_quantile(double p);  // inverse CDF, p in (0,1)

double gamma_p(double a, double x);  // regularized lower incomplete gamma
double gamma_q(double a, double x);  // regularized upper incomplete gamma

double chi2_sf(double x, double dof);  // survival function of chi-squared

}  // namespace sevi
