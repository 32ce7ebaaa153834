#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "sevi/evd.hpp"
#include "sevi/probit.hpp"
#include "sevi/rng.hpp"
#include "sevi/stats.hpp"

using namespace sevi;

namespace {

// brute-force argmax simulation with iid normal taste shocks
Eigen::VectorXd mc_normal_shares(const Eigen::VectorXd& v, int draws,
                                 std::uint64_t seed) {
  RngStream rng(seed);
  const Evd law = Evd::normal(kPi * kPi / 6.0);
  Eigen::VectorXd tally = Eigen::VectorXd::Zero(v.size());
  for (int d = 0; d < draws; ++d) {
    int best = 0;
    double top = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < v.size(); ++j) {
      const double u = v[j] + law.quantile(rng.uniform());
      if (u > top) {
        top = u;
        best = j;
      }
    }
    tally[best] += 1.0;
  }
  return tally / draws;
}

}  // namespace

TEST_SUITE("probit") {

TEST_CASE("simulated probabilities sum to one and are deterministic") {
  Eigen::VectorXd v(5);
  v << 0.25, 0.5, 0.75, 1.5, 2.0;
  const UtilityVector uv(v);
  GhkConfig cfg;
  cfg.draws = 300;
  cfg.seed = 42;
  const Eigen::VectorXd a = prob_norm_all(uv, cfg);
  const Eigen::VectorXd b = prob_norm_all(uv, cfg);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(a.sum() - 1.0) < 1e-12);
  for (int j = 0; j < 5; ++j) CHECK(a[j] > 0.0);
  GhkConfig other = cfg;
  other.seed = 43;
  const Eigen::VectorXd c = prob_norm_all(uv, other);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("two alternatives reduce to a univariate normal comparison") {
  // P(1 beats 2) = Phi((v1 - v2) / sqrt(2 * pi^2 / 6))
  GhkConfig cfg;
  cfg.draws = 4000;
  for (double d : {-1.5, -0.4, 0.0, 0.7, 2.0}) {
    Eigen::VectorXd v(2);
    v << d, 0.0;
    const double p = prob_norm(UtilityVector(v), 0, cfg);
    const double exact = norm_cdf(d / std::sqrt(2.0 * kPi * kPi / 6.0));
    CHECK(p == doctest::Approx(exact).epsilon(0.02));
  }
}

TEST_CASE("ghk matches crude monte carlo argmax frequencies") {
  Eigen::VectorXd v(4);
  v << 0.2, -0.3, 0.9, 0.0;
  GhkConfig cfg;
  cfg.draws = 5000;
  const Eigen::VectorXd ghk = prob_norm_all(UtilityVector(v), cfg);
  const int draws = 400000;
  const Eigen::VectorXd mc = mc_normal_shares(v, draws, 777);
  for (int j = 0; j < 4; ++j) {
    const double se = std::sqrt(ghk[j] * (1 - ghk[j]) / draws);
    // GHK noise dominates the tolerance; 3.5 crude-MC SEs plus a GHK margin
    CHECK(std::abs(ghk[j] - mc[j]) < 3.5 * se + 0.004);
  }
}

TEST_CASE("availability masks restrict the competition") {
  Eigen::VectorXd v(4);
  v << 1.0, 5.0, 0.5, 0.2;
  GhkConfig cfg;
  cfg.draws = 2000;
  const UtilityVector masked(v, 0b1101);  // alternative 1 off the menu
  const Eigen::VectorXd p = prob_norm_all(masked, cfg);
  CHECK(p[1] == 0.0);
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  CHECK(p[0] > p[2]);
  CHECK(p[2] > p[3]);
}

TEST_CASE("antithetic draws cut the simulation error") {
  Eigen::VectorXd v(5);
  v << 0.1, 0.4, -0.2, 0.8, 0.0;
  const UtilityVector uv(v);
  GhkConfig fine;
  fine.draws = 60000;
  fine.antithetic = true;
  const Eigen::VectorXd truth = prob_norm_all(uv, fine);
  auto rmse = [&](bool anti) {
    double acc = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      GhkConfig cfg;
      cfg.draws = 200;
      cfg.antithetic = anti;
      cfg.seed = 1000 + rep;
      const Eigen::VectorXd p = prob_norm_all(uv, cfg);
      acc += (p - truth).squaredNorm();
    }
    return std::sqrt(acc / 20);
  };
  CHECK(rmse(true) < rmse(false));
}

TEST_CASE("raw estimates renormalize to the reported probabilities") {
  Eigen::VectorXd v(3);
  v << 0.3, -0.1, 0.6;
  const UtilityVector uv(v);
  GhkConfig cfg;
  cfg.draws = 800;
  Eigen::VectorXd raw(3);
  for (int j = 0; j < 3; ++j) raw[j] = prob_norm_raw(uv, j, cfg);
  const Eigen::VectorXd p = prob_norm_all(uv, cfg);
  for (int j = 0; j < 3; ++j)
    CHECK(p[j] == doctest::Approx(raw[j] / raw.sum()).epsilon(1e-12));
}

}  // TEST_SUITE
