#include "sevi/simlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>

#include "sevi/compare.hpp"
#include "sevi/errors.hpp"
#include "sevi/evd.hpp"
#include "sevi/rng.hpp"
#include "sevi/stats.hpp"
#include "sevi/util.hpp"

namespace sevi {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

template <class F>
void run_indexed(std::size_t n, unsigned workers, F&& body) {
  std::mutex mu;
  std::exception_ptr err;
  parallel_for(
      n, workers,
      [&](std::size_t b, std::size_t e) {
        try {
          for (std::size_t i = b; i < e; ++i) body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      },
      1);
  if (err) std::rethrow_exception(err);
}

std::string cpu_description() {
  std::ifstream in("/proc/cpuinfo");
  std::string line, model;
  int cores = 0;
  while (std::getline(in, line)) {
    if (line.rfind("processor", 0) == 0) ++cores;
    if (model.empty() && line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        model = line.substr(colon + 1);
        const auto first = model.find_first_not_of(" \t");
        model = first == std::string::npos ? "" : model.substr(first);
      }
    }
  }
  if (model.empty()) model = "unknown cpu";
  std::ostringstream out;
  out << model << " x " << std::max(cores, 1);
  return out.str();
}

}  // namespace

double omega(int j, int n_alternatives) {
  if (n_alternatives < 2)
    throw ValidationError("the standardized index needs at least two "
                          "alternatives");
  if (j < 1 || j > n_alternatives)
    throw ValidationError("alternative index out of range");
  const double nj = n_alternatives;
  return (j - (nj + 1.0) / 2.0) / std::sqrt((nj * nj - 1.0) / 12.0);
}

Eigen::VectorXd DgpSpec::effective_beta0() const {
  if (beta0.size() > 0) return beta0;
  if (attr_law == AttrLaw::FixedUtilities) {
    Eigen::VectorXd b(1);
    b << 1.0;
    return b;
  }
  Eigen::VectorXd b(3);
  b << 1.0, 2.0, 1.0;
  return b;
}

DesignBatch generate(const DgpSpec& spec) {
  if (spec.n_alternatives < 2)
    throw ValidationError("a choice problem needs at least two alternatives");
  if (spec.n_obs < 1) throw ValidationError("sample size must be positive");
  const int nj = spec.n_alternatives;
  const Eigen::VectorXd beta = spec.effective_beta0();
  const int nl = static_cast<int>(beta.size());
  const bool fixed = spec.attr_law == DgpSpec::AttrLaw::FixedUtilities;
  if (fixed) {
    if (spec.fixed_utilities.size() != nj)
      throw ValidationError("fixed utilities must list one value per "
                            "alternative");
    if (nl != 1)
      throw ValidationError("fixed-utility designs carry a single coefficient");
  }

  Eigen::VectorXd sigma(nj);
  if (!fixed) {
    for (int j = 0; j < nj; ++j)
      sigma[j] = spec.attr_law == DgpSpec::AttrLaw::Homoskedastic
                     ? kPi / 6.0
                     : kPi * std::abs(omega(j + 1, nj)) / 6.0;
  }

  const bool mixed = spec.family.kind == ErrorFamily::Kind::Mixed;
  const Evd sevi_law = Evd::sevi();
  const Evd levi_law = Evd::levi();

  DesignBatch batch;
  batch.n_alternatives = nj;
  batch.n_coefficients = nl;
  for (int l = 0; l < nl; ++l)
    batch.coef_names.push_back(fixed ? "v" : "x" + std::to_string(l + 1));
  for (int j = 0; j < nj; ++j)
    batch.alt_names.push_back("alt" + std::to_string(j + 1));
  const std::uint64_t full = (std::uint64_t{1} << nj) - 1;

  RngStream rng(spec.seed);
  batch.obs.reserve(spec.n_obs);
  for (int i = 0; i < spec.n_obs; ++i) {
    ChoiceSituation s;
    s.id = i;
    s.cluster = i;
    s.available = full;
    s.x.resize(nj, nl);
    if (fixed) {
      s.x.col(0) = spec.fixed_utilities;
    } else {
      for (int j = 0; j < nj; ++j)
        for (int l = 0; l < nl; ++l)
          s.x(j, l) = sigma[j] * norm_quantile(rng.uniform());
    }
    const Evd* law = nullptr;
    Evd norm_law = Evd::normal(kPi * kPi / 6.0);
    if (mixed) {
      law = rng.uniform() < spec.family.rho ? &sevi_law : &levi_law;
    } else if (spec.family.kind == ErrorFamily::Kind::NORM) {
      law = &norm_law;
    } else {
      law = spec.family.kind == ErrorFamily::Kind::SEVI ? &sevi_law
                                                        : &levi_law;
    }
    const Eigen::VectorXd v = s.x * beta;
    int best = 0;
    double best_u = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < nj; ++j) {
      const double u = v[j] + law->quantile(rng.uniform());
      if (u > best_u) {
        best_u = u;
        best = j;
      }
    }
    s.chosen = best;
    batch.obs.push_back(std::move(s));
  }
  batch.validate();
  return batch;
}

ReplicateSummary replicate(const ReplicateConfig& config) {
  if (config.reps < 1) throw ValidationError("need at least one replication");
  const int n_est = static_cast<int>(config.estimators.size()) +
                    (config.fit_rho_free ? 1 : 0);
  if (n_est == 0 && !config.vuong_sevi_levi && config.hausman_subset == 0)
    throw ValidationError("replication study has nothing to estimate");

  const Eigen::VectorXd beta0 = config.dgp.effective_beta0();
  const int nl = static_cast<int>(beta0.size());
  const int reps = config.reps;
  const unsigned workers =
      config.workers ? config.workers : default_threads();

  FitOptions base_opts = config.fit_options;
  base_opts.start.resize(0);
  base_opts.threads = 1;

  struct RepCell {
    Eigen::VectorXd beta, se;
    bool ok = false;
    double rho = kNan;
  };
  std::vector<std::vector<RepCell>> cells(
      n_est, std::vector<RepCell>(reps));
  std::vector<double> vuong_raw(reps, kNan), hausman_raw(reps, kNan);

  run_indexed(reps, workers, [&](std::size_t r) {
    DgpSpec draw = config.dgp;
    draw.seed = hash_combine(config.dgp.seed, static_cast<std::uint64_t>(r));
    const DesignBatch batch = generate(draw);

    auto se_from = [&](const FitResult& fr) {
      Eigen::VectorXd se = Eigen::VectorXd::Constant(nl, kNan);
      if (fr.vcov.rows() >= nl)
        for (int l = 0; l < nl; ++l)
          se[l] = fr.vcov(l, l) > 0 ? std::sqrt(fr.vcov(l, l)) : kNan;
      return se;
    };

    FitResult levi_fit, sevi_fit;
    bool have_levi = false, have_sevi = false;
    auto fit_family = [&](const ErrorFamily& fam) {
      FitOptions opts = base_opts;
      if (fam.kind == ErrorFamily::Kind::SEVI && have_levi &&
          levi_fit.converged)
        opts.start = levi_fit.beta;
      FitResult fr = fit(batch, fam, opts);
      if (fam.kind == ErrorFamily::Kind::LEVI) {
        levi_fit = fr;
        have_levi = true;
      }
      if (fam.kind == ErrorFamily::Kind::SEVI) {
        sevi_fit = fr;
        have_sevi = true;
      }
      return fr;
    };

    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      try {
        const FitResult fr = fit_family(config.estimators[e]);
        if (fr.converged) {
          cells[e][r].beta = fr.beta;
          cells[e][r].se = se_from(fr);
          cells[e][r].ok = true;
        }
      } catch (const std::exception&) {
      }
    }
    if (config.fit_rho_free) {
      const std::size_t e = config.estimators.size();
      try {
        const FitResult fr = fit_mixed(batch, base_opts);
        if (fr.converged) {
          cells[e][r].beta = fr.beta;
          cells[e][r].se = se_from(fr);
          cells[e][r].ok = true;
          cells[e][r].rho = fr.rho;
        }
      } catch (const std::exception&) {
      }
    }
    if (config.vuong_sevi_levi) {
      try {
        if (!have_levi) levi_fit = fit_family(ErrorFamily::levi());
        if (!have_sevi) sevi_fit = fit_family(ErrorFamily::sevi());
        if (levi_fit.converged && sevi_fit.converged)
          vuong_raw[r] = vuong(sevi_fit, levi_fit).statistic;
      } catch (const std::exception&) {
      }
    }
    if (config.hausman_subset != 0) {
      try {
        hausman_raw[r] =
            hausman_mcfadden(batch, config.hausman_subset, base_opts).p_value;
      } catch (const std::exception&) {
      }
    }
  });

  ReplicateSummary out;
  out.beta0 = beta0;
  out.reps = reps;
  for (int e = 0; e < n_est; ++e) {
    EstimatorSummary es;
    es.label = e < static_cast<int>(config.estimators.size())
                   ? to_string(config.estimators[e])
                   : "mixed-free";
    es.estimates = Eigen::MatrixXd::Constant(reps, nl, kNan);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(nl);
    Eigen::VectorXd se_sum = Eigen::VectorXd::Zero(nl);
    Eigen::VectorXd cover = Eigen::VectorXd::Zero(nl);
    Eigen::VectorXi se_count = Eigen::VectorXi::Zero(nl);
    int m = 0;
    for (int r = 0; r < reps; ++r) {
      const RepCell& c = cells[e][r];
      if (!c.ok) continue;
      es.estimates.row(r) = c.beta.transpose();
      mean += c.beta;
      ++m;
      for (int l = 0; l < nl; ++l) {
        if (!std::isfinite(c.se[l])) continue;
        se_sum[l] += c.se[l];
        se_count[l] += 1;
        if (std::abs(c.beta[l] - beta0[l]) <= 1.96 * c.se[l]) cover[l] += 1.0;
      }
      if (std::isfinite(c.rho)) es.rho_hat.push_back(c.rho);
    }
    es.converged = m;
    es.nonconverged = reps - m;
    if (m > 0) {
      mean /= m;
      es.bias = mean - beta0;
      Eigen::VectorXd ssq = Eigen::VectorXd::Zero(nl);
      for (int r = 0; r < reps; ++r) {
        if (!cells[e][r].ok) continue;
        const Eigen::VectorXd d = cells[e][r].beta - mean;
        ssq += d.cwiseProduct(d);
      }
      if (m > 1)
        es.sd = (ssq / (m - 1)).cwiseSqrt();
      else
        es.sd = Eigen::VectorXd::Zero(nl);
    } else {
      es.bias = Eigen::VectorXd::Constant(nl, kNan);
      es.sd = Eigen::VectorXd::Constant(nl, kNan);
    }
    es.mean_se.resize(nl);
    es.coverage.resize(nl);
    for (int l = 0; l < nl; ++l) {
      es.mean_se[l] = se_count[l] > 0 ? se_sum[l] / se_count[l] : kNan;
      es.coverage[l] = se_count[l] > 0 ? cover[l] / se_count[l] : kNan;
    }
    out.estimators.push_back(std::move(es));
  }
  for (int r = 0; r < reps; ++r) {
    if (std::isfinite(vuong_raw[r])) out.vuong_stats.push_back(vuong_raw[r]);
    if (std::isfinite(hausman_raw[r]))
      out.hausman_pvalues.push_back(hausman_raw[r]);
  }
  return out;
}

BenchReport timing_bench(const BenchConfig& config) {
  if (config.repeats < 1) throw ValidationError("need at least one repeat");
  BenchReport report;
  report.hardware = cpu_description();
  for (int nj : config.j_values) {
    DgpSpec spec;
    spec.n_alternatives = nj;
    spec.n_obs = config.n_obs;
    spec.attr_law = DgpSpec::AttrLaw::Heteroskedastic;
    spec.family = ErrorFamily::sevi();
    spec.seed = hash_combine(config.seed, static_cast<std::uint64_t>(nj));
    const DesignBatch batch = generate(spec);
    for (const ErrorFamily& fam : config.families) {
      FitOptions opts;
      opts.threads = config.threads;
      opts.ghk = config.ghk;
      std::vector<double> times;
      bool converged = false;
      for (int rep = 0; rep < config.repeats; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        const FitResult fr = fit(batch, fam, opts);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
        converged = fr.converged;
      }
      std::sort(times.begin(), times.end());
      BenchRow row;
      row.n_alternatives = nj;
      row.family = to_string(fam);
      row.n_obs = config.n_obs;
      row.repeats = config.repeats;
      row.median_seconds =
          times.size() % 2 == 1
              ? times[times.size() / 2]
              : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
      row.best_seconds = times.front();
      row.converged = converged;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace sevi
