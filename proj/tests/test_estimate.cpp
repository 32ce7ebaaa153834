#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "sevi/choice.hpp"
#include "sevi/errors.hpp"
#include "sevi/estimate.hpp"
#include "sevi/simlab.hpp"

using namespace sevi;

namespace {

DesignBatch small_batch(ErrorFamily fam, int j, int n, std::uint64_t seed) {
  DgpSpec spec;
  spec.n_alternatives = j;
  spec.n_obs = n;
  spec.family = fam;
  spec.seed = seed;
  return generate(spec);
}

double fd_nll_grad(const DesignBatch& batch, const Eigen::VectorXd& beta,
                   const ErrorFamily& fam, const TruncationPolicy& pol, int k,
                   double h = 1e-6) {
  Eigen::VectorXd bp = beta, bm = beta;
  bp[k] += h;
  bm[k] -= h;
  return (nll(batch, bp, fam, pol) - nll(batch, bm, fam, pol)) / (2 * h);
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("likelihood matches a direct per-situation computation") {
  const DesignBatch batch = small_batch(ErrorFamily::sevi(), 4, 60, 11);
  Eigen::VectorXd beta(3);
  beta << 0.8, 1.6, 0.9;
  const TruncationPolicy pol = TruncationPolicy::full();
  for (const ErrorFamily& fam :
       {ErrorFamily::sevi(), ErrorFamily::levi(), ErrorFamily::mixed(0.4)}) {
    double manual = 0.0;
    for (const auto& s : batch.obs) {
      const UtilityVector v(s.x * beta, s.available);
      manual -= std::log(prob(v, s.chosen, fam, pol));
    }
    CHECK(nll(batch, beta, fam, pol) ==
          doctest::Approx(manual).epsilon(1e-11));
  }
}

TEST_CASE("score columns sum to the likelihood gradient") {
  const DesignBatch batch = small_batch(ErrorFamily::sevi(), 5, 80, 12);
  Eigen::VectorXd beta(3);
  beta << 0.5, 1.0, -0.2;
  const TruncationPolicy pol = TruncationPolicy::full();
  for (const ErrorFamily& fam :
       {ErrorFamily::sevi(), ErrorFamily::levi(), ErrorFamily::mixed(0.6)}) {
    const Eigen::MatrixXd s = score(batch, beta, fam, pol);
    REQUIRE(s.rows() == batch.n());
    REQUIRE(s.cols() == 3);
    const Eigen::VectorXd g = s.colwise().sum();
    for (int k = 0; k < 3; ++k)
      CHECK(g[k] == doctest::Approx(fd_nll_grad(batch, beta, fam, pol, k))
                        .epsilon(2e-5));
  }
}

TEST_CASE("logit scores equal the classical residual form") {
  const DesignBatch batch = small_batch(ErrorFamily::levi(), 4, 50, 13);
  Eigen::VectorXd beta(3);
  beta << 0.3, 0.9, 0.1;
  const TruncationPolicy pol = TruncationPolicy::full();
  const Eigen::MatrixXd s = score(batch, beta, ErrorFamily::levi(), pol);
  for (int i = 0; i < batch.n(); ++i) {
    const auto& o = batch.obs[i];
    const UtilityVector v(o.x * beta, o.available);
    // general route: -(X' dP(chosen)/dv) / P(chosen)
    const ProbGrad g = prob_levi_grad(v, o.chosen);
    const Eigen::VectorXd general = -(o.x.transpose() * g.dp) / g.p;
    for (int k = 0; k < 3; ++k)
      CHECK(s(i, k) == doctest::Approx(general[k]).epsilon(1e-10));
  }
}

TEST_CASE("fits recover the coefficients that generated the data") {
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    const DesignBatch batch = small_batch(fam, 5, 3000, 14);
    const FitResult fr = fit(batch, fam);
    REQUIRE(fr.converged);
    // converged may mean the nll stopped moving; gradient is small, not zero
    CHECK(fr.grad_norm < 1e-3);
    Eigen::VectorXd beta0(3);
    beta0 << 1.0, 2.0, 1.0;
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(fr.beta[k] - beta0[k]) < 0.25);
      CHECK(fr.vcov(k, k) > 0.0);
    }
    CHECK(fr.n_obs == 3000);
    CHECK(fr.n_params == 3);
    CHECK(fr.per_obs_nll.size() == 3000);
    CHECK(fr.scores.rows() == 3000);
  }
}

TEST_CASE("threading does not change the result") {
  const DesignBatch batch = small_batch(ErrorFamily::sevi(), 6, 700, 15);
  Eigen::VectorXd beta(3);
  beta << 0.7, 1.2, 0.4;
  const TruncationPolicy pol = TruncationPolicy::full();
  const double n1 = nll(batch, beta, ErrorFamily::sevi(), pol, 1);
  const double n4 = nll(batch, beta, ErrorFamily::sevi(), pol, 4);
  CHECK(n1 == n4);  // bitwise: fixed chunking, ordered reduction
  const Eigen::MatrixXd s1 = score(batch, beta, ErrorFamily::sevi(), pol, 1);
  const Eigen::MatrixXd s4 = score(batch, beta, ErrorFamily::sevi(), pol, 4);
  CHECK((s1 - s4).cwiseAbs().maxCoeff() == 0.0);

  FitOptions o1, o4;
  o1.threads = 1;
  o4.threads = 4;
  const FitResult f1 = fit(batch, ErrorFamily::sevi(), o1);
  const FitResult f4 = fit(batch, ErrorFamily::sevi(), o4);
  CHECK(f1.nll == f4.nll);
  CHECK((f1.beta - f4.beta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rank-deficient designs are rejected up front") {
  DesignBatch batch = small_batch(ErrorFamily::sevi(), 4, 40, 16);
  for (auto& s : batch.obs) {
    Eigen::MatrixXd x(4, 4);
    x.leftCols(3) = s.x;
    x.col(3) = 2.0 * s.x.col(0);  // exact collinearity
    s.x = x;
  }
  batch.n_coefficients = 4;
  batch.coef_names.push_back("x1_copy");
  batch.validate();
  CHECK_THROWS_AS(check_identification(batch), IdentificationError);
  CHECK_THROWS_AS((void)fit(batch, ErrorFamily::levi()), IdentificationError);

  // a column constant across alternatives cancels out of every difference
  DesignBatch batch2 = small_batch(ErrorFamily::sevi(), 4, 40, 17);
  for (auto& s : batch2.obs) {
    Eigen::MatrixXd x(4, 4);
    x.leftCols(3) = s.x;
    x.col(3).setConstant(1.0);
    s.x = x;
  }
  batch2.n_coefficients = 4;
  batch2.coef_names.push_back("intercept");
  batch2.validate();
  CHECK_THROWS_AS(check_identification(batch2), IdentificationError);
}

TEST_CASE("covariance estimators broadly agree on well-specified data") {
  const DesignBatch batch = small_batch(ErrorFamily::levi(), 4, 2500, 18);
  const FitResult fr = fit(batch, ErrorFamily::levi());
  REQUIRE(fr.converged);
  const Eigen::MatrixXd plain = vcov(fr, batch, SeKind::Plain);
  const Eigen::MatrixXd sandw = vcov(fr, batch, SeKind::Sandwich);
  for (int k = 0; k < 3; ++k) {
    const double a = std::sqrt(plain(k, k));
    const double b = std::sqrt(sandw(k, k));
    CHECK(b == doctest::Approx(a).epsilon(0.2));
  }
  CHECK((plain - fr.vcov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cluster covariance pools scores within clusters") {
  DesignBatch batch = small_batch(ErrorFamily::levi(), 4, 600, 19);
  for (int i = 0; i < batch.n(); ++i) batch.obs[i].cluster = i % 40;
  const FitResult fr = fit(batch, ErrorFamily::levi());
  REQUIRE(fr.converged);
  const Eigen::MatrixXd cl = vcov(fr, batch, SeKind::Cluster);
  for (int k = 0; k < 3; ++k) CHECK(cl(k, k) > 0.0);

  // every situation its own cluster: must match the sandwich exactly
  DesignBatch solo = batch;
  for (int i = 0; i < solo.n(); ++i) solo.obs[i].cluster = i;
  const Eigen::MatrixXd cs = vcov(fr, solo, SeKind::Sandwich);
  const Eigen::MatrixXd cc = vcov(fr, solo, SeKind::Cluster);
  CHECK((cs - cc).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("wald tests the stored covariance") {
  const DesignBatch batch = small_batch(ErrorFamily::levi(), 4, 1500, 20);
  const FitResult fr = fit(batch, ErrorFamily::levi());
  REQUIRE(fr.converged);
  // H0 at the estimate itself: statistic 0, p-value 1
  const WaldResult at_hat =
      wald(fr, Eigen::MatrixXd::Identity(3, 3), fr.beta);
  CHECK(at_hat.stat == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(at_hat.dof == 3);
  CHECK(at_hat.p_value == doctest::Approx(1.0));
  // H0: all coefficients zero is overwhelmingly rejected here
  const WaldResult at_zero =
      wald(fr, Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3));
  CHECK(at_zero.stat > 100.0);
  CHECK(at_zero.p_value < 1e-10);
}

TEST_CASE("mixing weight estimation leans the right way") {
  FitOptions opts;
  opts.threads = 1;
  {
    const DesignBatch batch = small_batch(ErrorFamily::sevi(), 4, 1200, 21);
    const FitResult fr = fit_mixed(batch, opts);
    REQUIRE(fr.converged);
    CHECK(fr.rho_estimated);
    CHECK(fr.n_params == 4);
    CHECK(fr.rho > 0.5);
    CHECK(fr.rho <= 1.0);
  }
  {
    const DesignBatch batch = small_batch(ErrorFamily::levi(), 4, 1200, 22);
    const FitResult fr = fit_mixed(batch, opts);
    REQUIRE(fr.converged);
    CHECK(fr.rho < 0.5);
    CHECK(fr.rho >= 0.0);
  }
}

TEST_CASE("normal baseline is simulated likelihood with numeric gradients") {
  const DesignBatch batch = small_batch(ErrorFamily::norm(), 3, 400, 23);
  CHECK_THROWS_AS(
      (void)score(batch, Eigen::VectorXd::Zero(3), ErrorFamily::norm(),
                  TruncationPolicy::full()),
      ValidationError);
  FitOptions opts;
  opts.ghk.draws = 120;
  opts.max_iter = 80;
  const FitResult fr = fit(batch, ErrorFamily::norm(), opts);
  REQUIRE(fr.converged);
  CHECK(fr.beta[0] > 0.0);
  CHECK(fr.beta[1] > fr.beta[0]);  // true ordering 1 < 2
  CHECK(fr.scores.size() == 0);
  CHECK_THROWS_AS((void)vcov(fr, batch, SeKind::Sandwich), ValidationError);
  const Eigen::MatrixXd plain = vcov(fr, batch, SeKind::Plain);
  for (int k = 0; k < 3; ++k) CHECK(plain(k, k) > 0.0);
}

TEST_CASE("covariance refuses a batch that is not the fitted one") {
  const DesignBatch batch = small_batch(ErrorFamily::levi(), 4, 300, 24);
  const DesignBatch other = small_batch(ErrorFamily::levi(), 4, 300, 25);
  const FitResult fr = fit(batch, ErrorFamily::levi());
  CHECK_THROWS_AS((void)vcov(fr, other, SeKind::Plain), ValidationError);
}

TEST_CASE("warm and cold starts land on the same optimum") {
  const DesignBatch batch = small_batch(ErrorFamily::sevi(), 5, 900, 26);
  FitOptions warm, cold;
  cold.warm_start_from_levi = false;
  const FitResult a = fit(batch, ErrorFamily::sevi(), warm);
  const FitResult b = fit(batch, ErrorFamily::sevi(), cold);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(a.nll == doctest::Approx(b.nll).epsilon(1e-9));
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("iteration caps surface as non-convergence, not exceptions") {
  const DesignBatch batch = small_batch(ErrorFamily::sevi(), 5, 600, 27);
  FitOptions opts;
  opts.max_iter = 1;
  opts.warm_start_from_levi = false;
  const FitResult fr = fit(batch, ErrorFamily::sevi(), opts);
  CHECK_FALSE(fr.converged);
  CHECK(fr.stop_reason == "max_iter");
  CHECK(std::isfinite(fr.nll));
}

}  // TEST_SUITE
