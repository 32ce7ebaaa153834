#include "sevi/compare.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "sevi/accum.hpp"
#include "sevi/errors.hpp"
#include "sevi/stats.hpp"

namespace sevi {

std::string to_string(VuongDecision d) {
  switch (d) {
    case VuongDecision::FavorSEVI:
      return "favor-sevi";
    case VuongDecision::FavorLEVI:
      return "favor-levi";
    case VuongDecision::Indistinguishable:
      return "indistinguishable";
  }
  return "indistinguishable";
}

VuongReport vuong(const FitResult& fit_a, const FitResult& fit_b) {
  if (fit_a.data_fingerprint != fit_b.data_fingerprint)
    throw ValidationError("vuong comparison requires fits on identical data");
  if (fit_a.n_params != fit_b.n_params)
    throw ValidationError(
        "vuong comparison requires equal parameter counts; use ic_table for "
        "models of different size");
  const int n = static_cast<int>(fit_a.per_obs_nll.size());
  if (n == 0 || fit_b.per_obs_nll.size() != n)
    throw ValidationError("fits carry no comparable per-situation likelihoods");

  VuongReport rep;
  rep.per_obs_diffs = fit_a.per_obs_nll - fit_b.per_obs_nll;
  NeumaierSum total;
  for (int i = 0; i < n; ++i) total.add(rep.per_obs_diffs[i]);
  rep.lr = total.value();
  const double mean = rep.lr / n;
  NeumaierSum ssq;
  for (int i = 0; i < n; ++i) {
    const double d = rep.per_obs_diffs[i] - mean;
    ssq.add(d * d);
  }
  const double ssd = ssq.value();
  if (ssd < 1e-12) {
    rep.statistic = 0.0;
    rep.decision_5pct = VuongDecision::Indistinguishable;
    return rep;
  }
  rep.statistic = rep.lr / std::sqrt(ssd);
  if (rep.statistic < -1.645)
    rep.decision_5pct = VuongDecision::FavorSEVI;
  else if (rep.statistic > 1.645)
    rep.decision_5pct = VuongDecision::FavorLEVI;
  else
    rep.decision_5pct = VuongDecision::Indistinguishable;
  return rep;
}

std::vector<IcRow> ic_table(const std::vector<FitResult>& fits) {
  if (fits.empty()) throw ValidationError("ic_table needs at least one fit");
  for (const auto& f : fits)
    if (f.data_fingerprint != fits.front().data_fingerprint)
      throw ValidationError("ic_table requires fits on identical data");

  std::vector<IcRow> rows(fits.size());
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const FitResult& f = fits[i];
    rows[i].label = to_string(f.family);
    rows[i].n_params = f.n_params;
    rows[i].nll = f.nll;
    rows[i].aic = 2.0 * f.nll + 2.0 * f.n_params;
    rows[i].bic = 2.0 * f.nll + f.n_params * std::log(static_cast<double>(f.n_obs));
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a].aic < rows[b].aic;
  });
  for (std::size_t r = 0; r < order.size(); ++r)
    rows[order[r]].rank = static_cast<int>(r) + 1;
  return rows;
}

HausmanResult hausman_mcfadden(const DesignBatch& batch,
                               std::uint64_t subset_mask,
                               const FitOptions& options) {
  batch.validate();
  if (batch.n_alternatives < 3)
    throw ValidationError(
        "the IIA diagnostic needs at least three alternatives; with two the "
        "statistic is identically zero");
  const std::uint64_t full =
      batch.n_alternatives >= 64
          ? ~std::uint64_t{0}
          : ((std::uint64_t{1} << batch.n_alternatives) - 1);
  subset_mask &= full;
  if (std::popcount(subset_mask) < 2)
    throw ValidationError("menu subset must keep at least two alternatives");
  if (subset_mask == full)
    throw ValidationError("menu subset must drop at least one alternative");

  DesignBatch sub;
  sub.n_alternatives = batch.n_alternatives;
  sub.n_coefficients = batch.n_coefficients;
  sub.coef_names = batch.coef_names;
  sub.alt_names = batch.alt_names;
  for (const auto& s : batch.obs) {
    if (!(subset_mask >> s.chosen & 1u)) continue;
    const std::uint64_t avail = s.available & subset_mask;
    if (std::popcount(avail) < 2) continue;
    ChoiceSituation kept = s;
    kept.available = avail;
    sub.obs.push_back(std::move(kept));
  }
  if (sub.obs.empty())
    throw ValidationError("no situations remain after restricting the menu");

  FitOptions opts = options;
  opts.start.resize(0);
  const FitResult full_fit = fit(batch, ErrorFamily::levi(), opts);
  const FitResult sub_fit = fit(sub, ErrorFamily::levi(), opts);
  if (full_fit.vcov.rows() == 0 || sub_fit.vcov.rows() == 0)
    throw NumericError("IIA diagnostic needs both covariances; one fit is "
                       "numerically singular");

  const Eigen::VectorXd q = sub_fit.beta - full_fit.beta;
  const Eigen::MatrixXd diff = sub_fit.vcov - full_fit.vcov;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
  const auto& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  const double tol = std::max(scale * 1e-10, 1e-300);

  HausmanResult out;
  out.n_full = batch.n();
  out.n_subset = sub.n();
  out.negative_directions = ev.minCoeff() < -1e-8;
  double stat = 0.0;
  int rank = 0;
  for (int k = 0; k < ev.size(); ++k) {
    if (ev[k] <= tol) continue;
    const double proj = es.eigenvectors().col(k).dot(q);
    stat += proj * proj / ev[k];
    ++rank;
  }
  out.wald = stat;
  out.dof = rank;
  out.p_value = rank > 0 ? chi2_sf(std::max(stat, 0.0), rank) : 1.0;
  return out;
}

}  // namespace sevi
