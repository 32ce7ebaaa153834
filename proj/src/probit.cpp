#include "sevi/probit.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sevi/rng.hpp"
#include "sevi/stats.hpp"

namespace sevi {

namespace {

constexpr double kErrVariance = kPi * kPi / 6.0;

void validate(const UtilityVector& v, const GhkConfig& cfg) {
  v.require_valid(2);
  if (cfg.draws < 100)
    throw ValidationError("GHK needs at least 100 draws");
}

// one uniform panel per config, reused across alternatives so the simulated
// probabilities share their randomness (and stay smooth in v)
std::vector<double> uniform_panel(const GhkConfig& cfg, int base_draws,
                                  int stages) {
  RngStream rng(cfg.seed);
  std::vector<double> u(static_cast<std::size_t>(base_draws) * stages);
  for (auto& x : u) x = rng.uniform();
  return u;
}

// raw GHK estimate of P(all differences <= b) for covariance chol L
double ghk_rectangle(const Eigen::VectorXd& b, const Eigen::MatrixXd& chol,
                     const std::vector<double>& panel, int base_draws,
                     bool antithetic) {
  const int m = static_cast<int>(b.size());
  double total = 0.0;
  int used = 0;
  Eigen::VectorXd eta(m);
  for (int r = 0; r < base_draws; ++r) {
    for (int rep = 0; rep < (antithetic ? 2 : 1); ++rep) {
      double w = 1.0;
      for (int t = 0; t < m; ++t) {
        double mu = 0.0;
        for (int s = 0; s < t; ++s) mu += chol(t, s) * eta[s];
        const double ub = (b[t] - mu) / chol(t, t);
        const double pt = norm_cdf(ub);
        double ur = panel[static_cast<std::size_t>(r) * m + t];
        if (rep == 1) ur = 1.0 - ur;
        eta[t] = norm_quantile(std::clamp(ur * pt, 1e-300, 1.0 - 1e-16));
        w *= pt;
      }
      total += w;
      ++used;
    }
  }
  return std::clamp(total / used, 0.0, 1.0);
}

}  // namespace

Eigen::VectorXd prob_norm_all(const UtilityVector& v, const GhkConfig& cfg) {
  validate(v, cfg);
  const int n = v.size();
  const int m = v.n_available() - 1;

  // differenced covariance sigma^2 (I + 11') is shared by every alternative
  Eigen::MatrixXd sigma =
      kErrVariance *
      (Eigen::MatrixXd::Identity(m, m) + Eigen::MatrixXd::Ones(m, m));
  const Eigen::MatrixXd chol = sigma.llt().matrixL();

  const int base_draws = cfg.antithetic ? (cfg.draws + 1) / 2 : cfg.draws;
  const std::vector<double> panel = uniform_panel(cfg, base_draws, m);

  Eigen::VectorXd raw = Eigen::VectorXd::Zero(n);
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    if (!v.is_available(j)) continue;
    Eigen::VectorXd b(m);
    int t = 0;
    for (int k = 0; k < n; ++k)
      if (k != j && v.is_available(k)) b[t++] = v.values[j] - v.values[k];
    raw[j] = ghk_rectangle(b, chol, panel, base_draws, cfg.antithetic);
    total += raw[j];
  }
  if (total <= 0.0) {
    const double share = 1.0 / v.n_available();
    for (int j = 0; j < n; ++j) raw[j] = v.is_available(j) ? share : 0.0;
    return raw;
  }
  return raw / total;
}

double prob_norm(const UtilityVector& v, int j, const GhkConfig& cfg) {
  if (!v.is_available(j))
    throw ValidationError("alternative " + std::to_string(j) +
                          " is not available");
  return prob_norm_all(v, cfg)[j];
}

double prob_norm_raw(const UtilityVector& v, int j, const GhkConfig& cfg) {
  validate(v, cfg);
  if (!v.is_available(j))
    throw ValidationError("alternative " + std::to_string(j) +
                          " is not available");
  const int n = v.size();
  const int m = v.n_available() - 1;
  Eigen::MatrixXd sigma =
      kErrVariance *
      (Eigen::MatrixXd::Identity(m, m) + Eigen::MatrixXd::Ones(m, m));
  const Eigen::MatrixXd chol = sigma.llt().matrixL();
  const int base_draws = cfg.antithetic ? (cfg.draws + 1) / 2 : cfg.draws;
  const std::vector<double> panel = uniform_panel(cfg, base_draws, m);
  Eigen::VectorXd b(m);
  int t = 0;
  for (int k = 0; k < n; ++k)
    if (k != j && v.is_available(k)) b[t++] = v.values[j] - v.values[k];
  return ghk_rectangle(b, chol, panel, base_draws, cfg.antithetic);
}

}  // namespace sevi
