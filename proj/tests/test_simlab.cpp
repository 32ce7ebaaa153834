#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "sevi/choice.hpp"
#include "sevi/errors.hpp"
#include "sevi/probit.hpp"
#include "sevi/simlab.hpp"
#include "sevi/stats.hpp"

using namespace sevi;

TEST_SUITE("simlab") {

TEST_CASE("standardized alternative positions") {
  for (int n : {2, 5, 12}) {
    double sum = 0.0, sumsq = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double w = omega(j, n);
      sum += w;
      sumsq += w * w;
    }
    CHECK(std::abs(sum) < 1e-12);
    CHECK(sumsq / n == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(omega(1, n) < omega(n, n));  // increasing in j
  }
  CHECK_THROWS_AS((void)omega(0, 5), ValidationError);
  CHECK_THROWS_AS((void)omega(6, 5), ValidationError);
  CHECK_THROWS_AS((void)omega(1, 1), ValidationError);
}

TEST_CASE("generation is a pure function of the spec") {
  DgpSpec spec;
  spec.n_alternatives = 4;
  spec.n_obs = 200;
  spec.seed = 77;
  const DesignBatch a = generate(spec);
  const DesignBatch b = generate(spec);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.n() == 200);
  CHECK(a.n_alternatives == 4);
  CHECK(a.n_coefficients == 3);
  spec.seed = 78;
  const DesignBatch c = generate(spec);
  CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("attribute scales follow the declared law") {
  DgpSpec spec;
  spec.n_alternatives = 5;
  spec.n_obs = 8000;
  spec.seed = 79;
  spec.attr_law = DgpSpec::AttrLaw::Heteroskedastic;
  const DesignBatch het = generate(spec);
  spec.attr_law = DgpSpec::AttrLaw::Homoskedastic;
  const DesignBatch hom = generate(spec);
  for (int j = 0; j < 5; ++j) {
    double ss_het = 0.0, ss_hom = 0.0;
    for (int i = 0; i < spec.n_obs; ++i) {
      ss_het += het.obs[i].x(j, 0) * het.obs[i].x(j, 0);
      ss_hom += hom.obs[i].x(j, 0) * hom.obs[i].x(j, 0);
    }
    const double sd_het = std::sqrt(ss_het / spec.n_obs);
    const double sd_hom = std::sqrt(ss_hom / spec.n_obs);
    const double expect_het = kPi * std::abs(omega(j + 1, 5)) / 6.0;
    CHECK(sd_het == doctest::Approx(expect_het).epsilon(0.06));
    CHECK(sd_hom == doctest::Approx(kPi / 6.0).epsilon(0.06));
  }
}

TEST_CASE("fixed utilities reproduce the theoretical choice shares") {
  Eigen::VectorXd v(5);
  v << 0.25, 0.5, 0.75, 1.5, 2.0;
  DgpSpec spec;
  spec.n_alternatives = 5;
  spec.n_obs = 60000;
  spec.attr_law = DgpSpec::AttrLaw::FixedUtilities;
  spec.fixed_utilities = v;
  spec.seed = 80;
  for (const ErrorFamily& fam : {ErrorFamily::sevi(), ErrorFamily::levi()}) {
    spec.family = fam;
    const DesignBatch batch = generate(spec);
    CHECK(batch.n_coefficients == 1);
    CHECK(batch.obs[0].x(3, 0) == doctest::Approx(1.5));
    Eigen::VectorXd tally = Eigen::VectorXd::Zero(5);
    for (const auto& s : batch.obs) tally[s.chosen] += 1.0;
    tally /= spec.n_obs;
    const Eigen::VectorXd p =
        prob_all(UtilityVector(v), fam, TruncationPolicy::full());
    for (int j = 0; j < 5; ++j) {
      const double se = std::sqrt(p[j] * (1 - p[j]) / spec.n_obs);
      CHECK(std::abs(tally[j] - p[j]) < 3.5 * se + 1e-9);
    }
  }
}

TEST_CASE("normal taste shocks land between the simulator and the formula") {
  Eigen::VectorXd v(4);
  v << 0.2, 0.9, -0.1, 0.5;
  DgpSpec spec;
  spec.n_alternatives = 4;
  spec.n_obs = 60000;
  spec.attr_law = DgpSpec::AttrLaw::FixedUtilities;
  spec.fixed_utilities = v;
  spec.family = ErrorFamily::norm();
  spec.seed = 81;
  const DesignBatch batch = generate(spec);
  Eigen::VectorXd tally = Eigen::VectorXd::Zero(4);
  for (const auto& s : batch.obs) tally[s.chosen] += 1.0;
  tally /= spec.n_obs;
  GhkConfig cfg;
  cfg.draws = 20000;
  const Eigen::VectorXd p = prob_norm_all(UtilityVector(v), cfg);
  for (int j = 0; j < 4; ++j) {
    const double se = std::sqrt(p[j] * (1 - p[j]) / spec.n_obs);
    CHECK(std::abs(tally[j] - p[j]) < 3.5 * se + 0.004);
  }
}

TEST_CASE("mixed populations sit between the pure families") {
  Eigen::VectorXd v(5);
  v << 0.25, 0.5, 0.75, 1.5, 2.0;
  DgpSpec spec;
  spec.n_alternatives = 5;
  spec.n_obs = 60000;
  spec.attr_law = DgpSpec::AttrLaw::FixedUtilities;
  spec.fixed_utilities = v;
  spec.family = ErrorFamily::mixed(0.5);
  spec.seed = 82;
  const DesignBatch batch = generate(spec);
  Eigen::VectorXd tally = Eigen::VectorXd::Zero(5);
  for (const auto& s : batch.obs) tally[s.chosen] += 1.0;
  tally /= spec.n_obs;
  const UtilityVector uv(v);
  for (int j = 0; j < 5; ++j) {
    const double expect = 0.5 * prob_sevi(uv, j) + 0.5 * prob_levi(uv, j);
    const double se = std::sqrt(expect * (1 - expect) / spec.n_obs);
    CHECK(std::abs(tally[j] - expect) < 3.5 * se + 1e-9);
  }
}

TEST_CASE("replication studies summarize every requested estimator") {
  ReplicateConfig cfg;
  cfg.dgp.n_alternatives = 3;
  cfg.dgp.n_obs = 200;
  cfg.dgp.family = ErrorFamily::sevi();
  cfg.dgp.seed = 83;
  cfg.estimators = {ErrorFamily::sevi(), ErrorFamily::levi()};
  cfg.vuong_sevi_levi = true;
  cfg.hausman_subset = 0b011;
  cfg.reps = 8;
  const ReplicateSummary sum = replicate(cfg);
  CHECK(sum.reps == 8);
  CHECK(sum.beta0.size() == 3);
  REQUIRE(sum.estimators.size() == 2);
  for (const auto& e : sum.estimators) {
    CHECK(e.converged + e.nonconverged == 8);
    CHECK(e.estimates.rows() == 8);
    CHECK(e.estimates.cols() == 3);
    if (e.converged > 0) {
      for (int k = 0; k < 3; ++k) {
        CHECK(std::isfinite(e.bias[k]));
        CHECK(e.sd[k] >= 0.0);
        CHECK(e.coverage[k] >= 0.0);
        CHECK(e.coverage[k] <= 1.0);
      }
    }
  }
  CHECK(sum.estimators[0].label == "sevi");
  CHECK(sum.estimators[1].label == "levi");
  CHECK(sum.vuong_stats.size() <= 8);
  CHECK(!sum.vuong_stats.empty());
  CHECK(sum.hausman_pvalues.size() <= 8);
}

TEST_CASE("replication results do not depend on the worker count") {
  ReplicateConfig cfg;
  cfg.dgp.n_alternatives = 3;
  cfg.dgp.n_obs = 150;
  cfg.dgp.seed = 84;
  cfg.estimators = {ErrorFamily::levi()};
  cfg.reps = 6;
  cfg.workers = 1;
  const ReplicateSummary a = replicate(cfg);
  cfg.workers = 4;
  const ReplicateSummary b = replicate(cfg);
  CHECK((a.estimators[0].estimates.array() == b.estimators[0].estimates.array())
            .all());
  CHECK(a.estimators[0].bias == b.estimators[0].bias);
}

TEST_CASE("free mixing weight is tracked across replications") {
  ReplicateConfig cfg;
  cfg.dgp.n_alternatives = 3;
  cfg.dgp.n_obs = 300;
  cfg.dgp.family = ErrorFamily::mixed(0.5);
  cfg.dgp.seed = 85;
  cfg.estimators = {};
  cfg.fit_rho_free = true;
  cfg.reps = 4;
  const ReplicateSummary sum = replicate(cfg);
  REQUIRE(sum.estimators.size() == 1);
  const auto& e = sum.estimators[0];
  CHECK(e.label == "mixed-free");
  CHECK(static_cast<int>(e.rho_hat.size()) == e.converged);
  for (double r : e.rho_hat) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("timing harness reports medians per family and menu size") {
  BenchConfig cfg;
  cfg.j_values = {3, 4};
  cfg.n_obs = 80;
  cfg.repeats = 1;
  cfg.families = {ErrorFamily::sevi(), ErrorFamily::levi()};
  cfg.seed = 86;
  const BenchReport rep = timing_bench(cfg);
  CHECK(!rep.hardware.empty());
  REQUIRE(rep.rows.size() == 4);
  for (const auto& r : rep.rows) {
    CHECK(r.median_seconds > 0.0);
    CHECK(r.best_seconds > 0.0);
    CHECK(r.best_seconds <= r.median_seconds + 1e-12);
    CHECK(r.repeats == 1);
    CHECK(r.n_obs == 80);
  }
  CHECK(rep.rows[0].n_alternatives == 3);
  CHECK(rep.rows[0].family == "sevi");
}

}  // TEST_SUITE
