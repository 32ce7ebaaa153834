#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "sevi/evd.hpp"
#include "sevi/rng.hpp"
#include "sevi/stats.hpp"
#include "sevi/welfare.hpp"

using namespace sevi;

namespace {

Eigen::VectorXd random_v(int n, RngStream& rng, double spread = 2.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = spread * (2.0 * rng.uniform() - 1.0);
  return v;
}

// Monte Carlo E[max_j (v_j + eps_j)] - E[max_j eps_j under v = 0]
double mc_surplus(const Eigen::VectorXd& v, const Evd& law, int draws,
                  std::uint64_t seed) {
  RngStream rng(seed);
  double acc = 0.0, base = 0.0;
  for (int d = 0; d < draws; ++d) {
    double top = -std::numeric_limits<double>::infinity();
    double top0 = top;
    for (int j = 0; j < v.size(); ++j) {
      const double e = law.quantile(rng.uniform());
      top = std::max(top, v[j] + e);
      top0 = std::max(top0, e);
    }
    acc += top;
    base += top0;
  }
  return (acc - base) / draws;
}

}  // namespace

TEST_SUITE("welfare") {

TEST_CASE("logsum formula under largest-extreme errors") {
  RngStream rng(201);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd v = random_v(5, rng);
    double lse = 0.0;
    for (int j = 0; j < 5; ++j) lse += std::exp(v[j]);
    const double expect = std::log(lse) - std::log(5.0);
    CHECK(surplus(UtilityVector(v), ErrorFamily::levi()) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("surplus is zero on a flat menu and shifts with constants") {
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    for (int n : {2, 4, 9}) {
      const UtilityVector flat(Eigen::VectorXd::Zero(n));
      CHECK(std::abs(surplus(flat, fam)) < 1e-12);
      RngStream rng(202);
      const Eigen::VectorXd v = random_v(n, rng);
      const Eigen::VectorXd w = v.array() + 2.25;
      CHECK(surplus(UtilityVector(w), fam) ==
            doctest::Approx(surplus(UtilityVector(v), fam) + 2.25)
                .epsilon(1e-10));
    }
  }
}

TEST_CASE("surplus matches monte carlo expected maxima") {
  RngStream rng(203);
  const int draws = 400000;
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    const Evd law =
        fam.kind == ErrorFamily::Kind::SEVI ? Evd::sevi() : Evd::levi();
    for (int t = 0; t < 3; ++t) {
      const Eigen::VectorXd v = random_v(5, rng);
      const double exact = surplus(UtilityVector(v), fam);
      const double mc = mc_surplus(v, law, draws, 500 + t);
      // max of 5 draws has sd ~ 1; paired differences shrink it further
      CHECK(std::abs(exact - mc) < 3.0 * 1.5 / std::sqrt(draws) + 1e-3);
    }
  }
}

TEST_CASE("surplus gradient is the probability vector") {
  RngStream rng(204);
  const double h = 1e-6;
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    const Eigen::VectorXd v = random_v(6, rng);
    const Eigen::VectorXd p =
        prob_all(UtilityVector(v), fam, TruncationPolicy::full());
    for (int k = 0; k < 6; ++k) {
      Eigen::VectorXd vp = v, vm = v;
      vp[k] += h;
      vm[k] -= h;
      const double fd = (surplus(UtilityVector(vp), fam) -
                         surplus(UtilityVector(vm), fam)) /
                        (2 * h);
      CHECK(fd == doctest::Approx(p[k]).epsilon(5e-5));
    }
  }
}

TEST_CASE("expected maxima of error draws grow with the menu") {
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    double prev = raw_expected_max(1, fam);
    for (int n = 2; n <= 12; ++n) {
      const double cur = raw_expected_max(n, fam);
      CHECK(cur > prev);
      prev = cur;
    }
  }
  // one draw: just the mean of the law
  CHECK(raw_expected_max(1, ErrorFamily::levi()) ==
        doctest::Approx(kEulerGamma).epsilon(1e-9));
  CHECK(raw_expected_max(1, ErrorFamily::sevi()) ==
        doctest::Approx(-kEulerGamma).epsilon(1e-9));
  // largest extreme value: E max = gamma + log n
  CHECK(raw_expected_max(7, ErrorFamily::levi()) ==
        doctest::Approx(kEulerGamma + std::log(7.0)).epsilon(1e-9));
}

TEST_CASE("price compensation has the right sign and scale") {
  RngStream rng(205);
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    const Eigen::VectorXd v = random_v(5, rng);
    const UtilityVector uv(v);
    for (int m = 0; m < 5; ++m) {
      const double up = cv_price(uv, 1.0, m, 0.5, fam);
      const double down = cv_price(uv, 1.0, m, -0.5, fam);
      CHECK(up > 0.0);
      CHECK(down < 0.0);
      // a price rise can never cost more than paying it outright
      CHECK(up <= 0.5 + 1e-12);
      // lambda rescales currency, not utility
      CHECK(cv_price(uv, 2.0, m, 0.5, fam) < up);
    }
  }
}

TEST_CASE("removal compensation is positive and matches the surplus gap") {
  RngStream rng(206);
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    const Eigen::VectorXd v = random_v(5, rng);
    const UtilityVector uv(v);
    for (int k = 0; k < 5; ++k) {
      const double cv = cv_removal(uv, 1.0, k, fam);
      CHECK(cv > 0.0);
      const UtilityVector rest(v, 0b11111u & ~(std::uint64_t{1} << k));
      const double gap = surplus(uv, fam) - surplus(rest, fam) +
                         raw_expected_max(5, fam) - raw_expected_max(4, fam);
      CHECK(cv == doctest::Approx(gap).epsilon(1e-9));
    }
  }
}

TEST_CASE("query means average the per-row compensations") {
  RngStream rng(207);
  WelfareQuery q;
  q.lambda = 1.7;
  for (int i = 0; i < 6; ++i) q.rows.emplace_back(random_v(4, rng));
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    double acc_p = 0.0, acc_r = 0.0;
    for (const auto& row : q.rows) {
      acc_p += cv_price(row, q.lambda, 2, 0.3, fam);
      acc_r += cv_removal(row, q.lambda, 1, fam);
    }
    CHECK(cv_price_mean(q, 2, 0.3, fam) ==
          doctest::Approx(acc_p / q.rows.size()).epsilon(1e-12));
    CHECK(cv_removal_mean(q, 1, fam) ==
          doctest::Approx(acc_r / q.rows.size()).epsilon(1e-12));
  }
}

TEST_CASE("compensation against monte carlo willingness to pay") {
  // CV for removal solves E max over full menu = E max over reduced menu + CV
  // (lambda = 1); simulate both maxima with common draws
  Eigen::VectorXd v(4);
  v << 0.8, 0.1, -0.3, 0.5;
  const int draws = 400000;
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    const Evd law =
        fam.kind == ErrorFamily::Kind::SEVI ? Evd::sevi() : Evd::levi();
    RngStream rng(208);
    double full = 0.0, reduced = 0.0;
    for (int d = 0; d < draws; ++d) {
      double top = -std::numeric_limits<double>::infinity();
      double top_r = top;
      for (int j = 0; j < 4; ++j) {
        const double u = v[j] + law.quantile(rng.uniform());
        top = std::max(top, u);
        if (j != 0) top_r = std::max(top_r, u);
      }
      full += top;
      reduced += top_r;
    }
    const double mc_cv = (full - reduced) / draws;
    const double exact = cv_removal(UtilityVector(v), 1.0, 0, fam);
    CHECK(std::abs(exact - mc_cv) < 3.0 * 1.5 / std::sqrt(draws) + 1e-3);
  }
}

TEST_CASE("share inversion reproduces its target") {
  Eigen::VectorXd target(5);
  target << 0.05, 0.15, 0.2, 0.25, 0.35;
  const Eigen::VectorXd v = invert_shares(target);
  CHECK(v.size() == 5);
  CHECK(std::abs(v[4]) < 1e-12);  // last pinned to zero
  const Eigen::VectorXd p =
      prob_all(UtilityVector(v), ErrorFamily::sevi(), TruncationPolicy::full());
  CHECK((p - target).cwiseAbs().maxCoeff() < 1e-8);

  Eigen::VectorXd bad(3);
  bad << 0.5, 0.5, 0.0;
  CHECK_THROWS_AS((void)invert_shares(bad), ValidationError);
}

TEST_CASE("average probability response to an attribute") {
  DesignBatch batch;
  batch.n_alternatives = 3;
  batch.n_coefficients = 2;
  batch.coef_names = {"a", "b"};
  batch.alt_names = {"alt1", "alt2", "alt3"};
  RngStream rng(209);
  for (int i = 0; i < 40; ++i) {
    ChoiceSituation s;
    s.id = i;
    s.x = Eigen::MatrixXd(3, 2);
    for (int j = 0; j < 3; ++j)
      for (int c = 0; c < 2; ++c) s.x(j, c) = 2.0 * rng.uniform() - 1.0;
    s.chosen = 0;
    s.available = 0b111;
    batch.obs.push_back(std::move(s));
  }
  batch.validate();
  Eigen::VectorXd beta(2);
  beta << 1.0, -0.5;
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    const Eigen::VectorXd eff =
        ape(batch, fam, beta, 0, TruncationPolicy::full());
    REQUIRE(eff.size() == 3);
    // raising a positively-priced attribute raises the own probability
    for (int j = 0; j < 3; ++j) CHECK(eff[j] > 0.0);
    // finite-difference cross-check on the sample mean
    const double h = 1e-5;
    for (int j = 0; j < 3; ++j) {
      double up = 0.0, dn = 0.0;
      for (const auto& s : batch.obs) {
        Eigen::MatrixXd xp = s.x, xm = s.x;
        xp(j, 0) += h;
        xm(j, 0) -= h;
        up += prob(UtilityVector(xp * beta), j, fam, TruncationPolicy::full());
        dn += prob(UtilityVector(xm * beta), j, fam, TruncationPolicy::full());
      }
      const double fd = (up - dn) / (2 * h * batch.n());
      CHECK(eff[j] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

}  // TEST_SUITE
