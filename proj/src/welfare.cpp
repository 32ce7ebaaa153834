#include "sevi/welfare.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>

#include "sevi/accum.hpp"
#include "sevi/stats.hpp"
#include "sevi/subsets.hpp"

namespace sevi {

namespace {

double layer_sign(int card) { return (card & 1) ? -1.0 : 1.0; }

void require_family(const ErrorFamily& family) {
  if (family.kind != ErrorFamily::Kind::SEVI &&
      family.kind != ErrorFamily::Kind::LEVI)
    throw ValidationError("welfare formulas cover the SEVI and LEVI families");
}

double surplus_levi(const UtilityVector& v) {
  double vmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < v.size(); ++k)
    if (v.is_available(k)) vmax = std::max(vmax, v.values[k]);
  double acc = 0.0;
  for (int k = 0; k < v.size(); ++k)
    if (v.is_available(k)) acc += std::exp(v.values[k] - vmax);
  return vmax + std::log(acc / v.n_available());
}

// alternating sum over menus S of ln[(1/|S|) sum_k exp(-v_k)], each log
// stabilized by the subset's own max exponent
double surplus_sevi(const UtilityVector& v) {
  std::array<int, 64> alt;
  std::array<double, 64> negv;
  int u = 0;
  for (int k = 0; k < v.size(); ++k) {
    if (!v.is_available(k)) continue;
    alt[u] = k;
    negv[u] = -v.values[k];
    ++u;
  }
  NeumaierSum total;
  for (int card = 1; card <= u; ++card) {
    NeumaierSum layer;
    std::uint64_t mask = (std::uint64_t(1) << card) - 1;
    const std::uint64_t limit = std::uint64_t(1) << u;
    while (mask < limit) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::uint64_t mm = mask; mm != 0; mm &= mm - 1)
        m = std::max(m, negv[std::countr_zero(mm)]);
      double acc = 0.0;
      for (std::uint64_t mm = mask; mm != 0; mm &= mm - 1)
        acc += std::exp(negv[std::countr_zero(mm)] - m);
      layer.add(m + std::log(acc / card));
      const std::uint64_t c = mask & (~mask + 1);
      const std::uint64_t r = mask + c;
      mask = r | (((mask ^ r) >> 2) / c);
    }
    total.add(layer_sign(card) * layer.value());
  }
  return total.value();
}

}  // namespace

double surplus(const UtilityVector& v, const ErrorFamily& family) {
  require_family(family);
  v.require_valid(1);
  return family.kind == ErrorFamily::Kind::SEVI ? surplus_sevi(v)
                                                : surplus_levi(v);
}

double raw_expected_max(int n_alternatives, const ErrorFamily& family) {
  require_family(family);
  if (n_alternatives < 1)
    throw ValidationError("expected maximum needs at least one alternative");
  if (family.kind == ErrorFamily::Kind::LEVI)
    return kEulerGamma + std::log(static_cast<double>(n_alternatives));
  NeumaierSum acc;
  acc.add(-kEulerGamma);
  double binom = 1.0;
  for (int l = 1; l <= n_alternatives; ++l) {
    binom = binom * (n_alternatives - l + 1) / l;
    acc.add(layer_sign(l) * binom * std::log(static_cast<double>(l)));
  }
  return acc.value();
}

double cv_price(const UtilityVector& v, double lambda, int m, double delta,
                const ErrorFamily& family) {
  if (!(lambda > 0.0))
    throw ValidationError("marginal utility of income must be positive");
  if (!v.is_available(m))
    throw ValidationError("price-change alternative is not available");
  UtilityVector post = v;
  post.values[m] -= lambda * delta;
  return (surplus(v, family) - surplus(post, family)) / lambda;
}

double cv_price_mean(const WelfareQuery& q, int m, double delta,
                     const ErrorFamily& family) {
  if (q.rows.empty()) throw ValidationError("welfare query has no rows");
  NeumaierSum acc;
  for (const auto& row : q.rows)
    acc.add(cv_price(row, q.lambda, m, delta, family));
  return acc.value() / static_cast<double>(q.rows.size());
}

double cv_removal(const UtilityVector& v, double lambda, int k,
                  const ErrorFamily& family) {
  if (!(lambda > 0.0))
    throw ValidationError("marginal utility of income must be positive");
  if (!v.is_available(k))
    throw ValidationError("removal alternative is not available");
  if (v.n_available() < 2)
    throw ValidationError("removal would leave an empty menu");
  UtilityVector rest(v.values, v.available & ~(std::uint64_t(1) << k));
  const int na = v.n_available();
  double cv = (surplus(v, family) - surplus(rest, family) +
               raw_expected_max(na, family) - raw_expected_max(na - 1, family)) /
              lambda;
  if (cv < 0.0 && cv > -1e-9) cv = 0.0;
  return cv;
}

double cv_removal_mean(const WelfareQuery& q, int k, const ErrorFamily& family) {
  if (q.rows.empty()) throw ValidationError("welfare query has no rows");
  NeumaierSum acc;
  for (const auto& row : q.rows)
    acc.add(cv_removal(row, q.lambda, k, family));
  return acc.value() / static_cast<double>(q.rows.size());
}

Eigen::VectorXd ape(const DesignBatch& batch, const ErrorFamily& family,
                    const Eigen::VectorXd& beta, int attr_index,
                    const TruncationPolicy& policy) {
  if (family.kind == ErrorFamily::Kind::NORM)
    throw ValidationError("partial effects need a closed-form gradient family");
  if (attr_index < 0 || attr_index >= batch.n_coefficients)
    throw ValidationError("attribute index out of range");
  if (batch.n() == 0) throw ValidationError("empty design batch");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(batch.n_alternatives);
  for (int i = 0; i < batch.n(); ++i) {
    const UtilityVector v = batch.utilities(i, beta);
    for (int j = 0; j < batch.n_alternatives; ++j)
      if (v.is_available(j)) acc[j] += dprob_dv(v, j, family, policy)[j];
  }
  return acc * (beta[attr_index] / batch.n());
}

Eigen::VectorXd invert_shares(const Eigen::VectorXd& target) {
  const int n = static_cast<int>(target.size());
  if (n < 2) throw ValidationError("share inversion needs at least 2 shares");
  for (int j = 0; j < n; ++j)
    if (!(target[j] > 0.0 && target[j] < 1.0))
      throw ValidationError("target shares must lie strictly in (0, 1)");
  if (std::abs(target.sum() - 1.0) > 1e-6)
    throw ValidationError("target shares must sum to 1");
  const Eigen::VectorXd goal = target / target.sum();

  const TruncationPolicy policy = TruncationPolicy::auto_for(n);
  const ErrorFamily fam = ErrorFamily::sevi();

  // warm start at the LEVI inverse, exact for two alternatives
  Eigen::VectorXd v(n);
  for (int j = 0; j < n; ++j)
    v[j] = std::log(goal[j]) - std::log(goal[n - 1]);

  const auto residual = [&](const Eigen::VectorXd& vv) {
    UtilityVector uv(vv);
    Eigen::VectorXd r(n - 1);
    for (int j = 0; j < n - 1; ++j) r[j] = prob_sevi(uv, j, policy) - goal[j];
    return r;
  };

  Eigen::VectorXd r = residual(v);
  const double tol = 1e-11;
  for (int it = 0; it < 200; ++it) {
    if (r.lpNorm<Eigen::Infinity>() < tol) return v;
    const Eigen::MatrixXd jac =
        dprob_matrix(UtilityVector(v), fam, policy).topLeftCorner(n - 1, n - 1);
    Eigen::VectorXd step = jac.ldlt().solve(r);
    if (!step.allFinite()) step = jac.fullPivLu().solve(r);
    double scale = 1.0;
    for (int half = 0; half < 40; ++half) {
      Eigen::VectorXd cand = v;
      cand.head(n - 1) -= scale * step;
      const Eigen::VectorXd rc = residual(cand);
      if (rc.lpNorm<Eigen::Infinity>() < r.lpNorm<Eigen::Infinity>() ||
          half == 39) {
        v = cand;
        r = rc;
        break;
      }
      scale *= 0.5;
    }
  }
  if (r.lpNorm<Eigen::Infinity>() < tol) return v;
  throw NumericError("share inversion did not converge; residual " +
                     std::to_string(r.lpNorm<Eigen::Infinity>()));
}

}  // namespace sevi
