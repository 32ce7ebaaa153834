#include "sevi/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "sevi/accum.hpp"
#include "sevi/rng.hpp"
#include "sevi/stats.hpp"
#include "sevi/util.hpp"

namespace sevi {

namespace {

constexpr double kProbFloor = 1e-12;

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// parallel_for with worker exceptions captured and rethrown
template <class F>
void chunked_run(std::size_t n, unsigned threads, F&& body) {
  std::mutex mu;
  std::exception_ptr err;
  parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
    try {
      body(b, e);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!err) err = std::current_exception();
    }
  });
  if (err) std::rethrow_exception(err);
}

enum class EvalMode { Value, Grad, Scores };

struct Eval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd scores;
  Eigen::VectorXd per_obs;
  int floored = 0;
};

// negative log-likelihood (and optionally its per-situation gradients) for
// the closed-form families: SEVI, LEVI, and the fixed-weight mixture
Eval eval_closed(const DesignBatch& batch, const Eigen::VectorXd& beta,
                 const ErrorFamily& family, const TruncationPolicy& policy,
                 unsigned threads, EvalMode mode) {
  const int n = batch.n();
  const int nj = batch.n_alternatives;
  const int np = batch.n_coefficients;
  const bool want_grad = mode != EvalMode::Value;
  const bool want_rows = mode == EvalMode::Scores;
  const bool need_sevi = family.kind == ErrorFamily::Kind::SEVI ||
                         family.kind == ErrorFamily::Kind::Mixed;
  const bool need_levi = family.kind == ErrorFamily::Kind::LEVI ||
                         family.kind == ErrorFamily::Kind::Mixed;
  const double rho = family.kind == ErrorFamily::Kind::SEVI
                         ? 1.0
                         : (family.kind == ErrorFamily::Kind::LEVI ? 0.0
                                                                   : family.rho);
  const bool tol_policy =
      policy.mode == TruncationPolicy::Mode::ToleranceDriven;

  Eval out;
  out.per_obs.resize(n);
  if (want_rows) out.scores.resize(n, np);
  const std::size_t n_chunks = (static_cast<std::size_t>(n) + kParallelChunk - 1) /
                               kParallelChunk;
  std::vector<Eigen::VectorXd> chunk_grad(
      want_grad && !want_rows ? n_chunks : 0);
  std::vector<int> chunk_floored(n_chunks, 0);

  chunked_run(n, threads, [&](std::size_t cb, std::size_t ce) {
    const std::size_t chunk_id = cb / kParallelChunk;
    const int nn = static_cast<int>(ce - cb);
    Eigen::VectorXd grad_part;
    if (want_grad && !want_rows) grad_part = Eigen::VectorXd::Zero(np);
    int floored = 0;

    // per-observation staging
    std::vector<UtilityVector> vs(nn);
    std::vector<double> ps(need_sevi ? nn : 0), dpj(0);
    std::vector<double> ebuf, crossbuf;
    std::vector<int> altbuf, ubuf;
    if (need_sevi) {
      ebuf.resize(static_cast<std::size_t>(nn) * 64);
      altbuf.resize(static_cast<std::size_t>(nn) * 64);
      ubuf.resize(nn);
      if (want_grad) {
        dpj.resize(nn);
        crossbuf.resize(static_cast<std::size_t>(nn) * 64);
      }
    }

    for (int li = 0; li < nn; ++li) {
      const int i = static_cast<int>(cb) + li;
      vs[li] = batch.utilities(i, beta);
      if (need_sevi && !tol_policy)
        ubuf[li] = detail::make_exponents(vs[li], batch.obs[i].chosen,
                                          altbuf.data() + li * 64,
                                          ebuf.data() + li * 64);
    }

    if (need_sevi) {
      if (tol_policy) {
        for (int li = 0; li < nn; ++li) {
          const int i = static_cast<int>(cb) + li;
          if (want_grad) {
            const ProbGrad pg =
                detail::prob_sevi_grad_reference(vs[li], batch.obs[i].chosen,
                                                 policy);
            ps[li] = pg.p;
            dpj[li] = pg.dp[batch.obs[i].chosen];
            ubuf[li] = detail::make_exponents(vs[li], batch.obs[i].chosen,
                                              altbuf.data() + li * 64,
                                              ebuf.data() + li * 64);
            for (int k = 0; k < ubuf[li]; ++k)
              crossbuf[li * 64 + k] = pg.dp[altbuf[li * 64 + k]];
          } else {
            ps[li] = detail::prob_sevi_reference(vs[li], batch.obs[i].chosen,
                                                 policy);
          }
        }
      } else {
        // group the chunk by universe size and run the lockstep kernel
        std::vector<std::vector<int>> groups(64);
        for (int li = 0; li < nn; ++li) groups[ubuf[li]].push_back(li);
        double einter[4 * 64], pout[4], dpjout[4], crossinter[4 * 64];
        for (int u = 1; u < 64; ++u) {
          const auto& g = groups[u];
          if (g.empty()) continue;
          const int depth = detail::layers_for_policy(policy, u);
          std::size_t pos = 0;
          while (pos < g.size()) {
            const int w = (g.size() - pos >= 4) ? 4 : 1;
            for (int lane = 0; lane < w; ++lane) {
              const int li = g[pos + lane];
              for (int k = 0; k < u; ++k)
                einter[k * w + lane] = ebuf[li * 64 + k];
            }
            if (want_grad)
              detail::sevi_dfs_batch(einter, u, depth, w, pout, dpjout,
                                     crossinter);
            else
              detail::sevi_dfs_batch_prob(einter, u, depth, w, pout);
            for (int lane = 0; lane < w; ++lane) {
              const int li = g[pos + lane];
              ps[li] = pout[lane];
              if (want_grad) {
                dpj[li] = dpjout[lane];
                for (int k = 0; k < u; ++k)
                  crossbuf[li * 64 + k] = crossinter[k * w + lane];
              }
            }
            pos += w;
          }
        }
        for (int li = 0; li < nn; ++li)
          ps[li] = detail::clamp_probability(ps[li]);
      }
    }

    Eigen::VectorXd probs_levi(nj), dp(nj), yvec(nj);
    for (int li = 0; li < nn; ++li) {
      const int i = static_cast<int>(cb) + li;
      const UtilityVector& v = vs[li];
      const int ch = batch.obs[i].chosen;

      double pl = 0.0;
      if (need_levi) {
        double vmax = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < nj; ++k)
          if (v.is_available(k)) vmax = std::max(vmax, v.values[k]);
        double denom = 0.0;
        probs_levi.setZero();
        for (int k = 0; k < nj; ++k)
          if (v.is_available(k)) {
            probs_levi[k] = std::exp(v.values[k] - vmax);
            denom += probs_levi[k];
          }
        probs_levi /= denom;
        pl = detail::clamp_probability(probs_levi[ch]);
      }

      const double p_used = need_sevi
                                ? (need_levi ? rho * ps[li] + (1.0 - rho) * pl
                                             : ps[li])
                                : pl;
      out.per_obs[i] = -std::log(p_used);
      if (p_used <= kProbFloor) ++floored;

      if (want_grad) {
        dp.setZero();
        if (need_sevi) {
          const int u = ubuf[li];
          for (int k = 0; k < u; ++k)
            dp[altbuf[li * 64 + k]] = crossbuf[li * 64 + k];
          dp[ch] = dpj[li];
        }
        Eigen::RowVectorXd srow(np);
        if (family.kind == ErrorFamily::Kind::LEVI) {
          // classical conditional-logit score
          yvec.setZero();
          yvec[ch] = 1.0;
          srow = (probs_levi - yvec).transpose() * batch.obs[i].x;
        } else {
          if (need_levi) {
            Eigen::VectorXd dpl(nj);
            for (int k = 0; k < nj; ++k)
              dpl[k] = v.is_available(k)
                           ? (k == ch ? probs_levi[ch] * (1.0 - probs_levi[ch])
                                      : -probs_levi[ch] * probs_levi[k])
                           : 0.0;
            dp = rho * dp + (1.0 - rho) * dpl;
          }
          srow = -(dp.transpose() * batch.obs[i].x) / p_used;
        }
        if (want_rows)
          out.scores.row(i) = srow;
        else
          grad_part += srow.transpose();
      }
    }
    if (want_grad && !want_rows) chunk_grad[chunk_id] = std::move(grad_part);
    chunk_floored[chunk_id] = floored;
  });

  NeumaierSum total;
  for (int i = 0; i < n; ++i) total.add(out.per_obs[i]);
  out.value = total.value();
  for (std::size_t c = 0; c < n_chunks; ++c) out.floored += chunk_floored[c];
  if (want_grad) {
    if (want_rows) {
      out.grad = Eigen::VectorXd::Zero(np);
      for (int i = 0; i < n; ++i) out.grad += out.scores.row(i).transpose();
    } else {
      out.grad = Eigen::VectorXd::Zero(np);
      for (std::size_t c = 0; c < n_chunks; ++c) out.grad += chunk_grad[c];
    }
  }
  return out;
}

// simulated likelihood for the NORM family (value and per-situation parts)
Eval eval_norm(const DesignBatch& batch, const Eigen::VectorXd& beta,
               const GhkConfig& ghk, unsigned threads) {
  const int n = batch.n();
  Eval out;
  out.per_obs.resize(n);
  const std::size_t n_chunks = (static_cast<std::size_t>(n) + kParallelChunk - 1) /
                               kParallelChunk;
  std::vector<int> chunk_floored(n_chunks, 0);
  chunked_run(n, threads, [&](std::size_t cb, std::size_t ce) {
    int floored = 0;
    for (std::size_t i = cb; i < ce; ++i) {
      const UtilityVector v = batch.utilities(static_cast<int>(i), beta);
      GhkConfig cfg = ghk;
      cfg.seed = hash_combine(ghk.seed,
                              static_cast<std::uint64_t>(batch.obs[i].id));
      const double p =
          std::max(prob_norm_all(v, cfg)[batch.obs[i].chosen], kProbFloor);
      out.per_obs[static_cast<int>(i)] = -std::log(p);
      if (p <= kProbFloor) ++floored;
    }
    chunk_floored[cb / kParallelChunk] = floored;
  });
  NeumaierSum total;
  for (int i = 0; i < n; ++i) total.add(out.per_obs[i]);
  out.value = total.value();
  for (std::size_t c = 0; c < n_chunks; ++c) out.floored += chunk_floored[c];
  return out;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double scale = 1e-6) {
  const int p = static_cast<int>(x.size());
  Eigen::VectorXd g(p);
  for (int k = 0; k < p; ++k) {
    const double h = scale * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_jacobian_of_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
    const Eigen::VectorXd& x, double scale = 1e-5) {
  const int p = static_cast<int>(x.size());
  Eigen::MatrixXd h_mat(p, p);
  for (int k = 0; k < p; ++k) {
    const double h = scale * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    h_mat.col(k) = (grad(xp) - grad(xm)) / (2.0 * h);
  }
  return 0.5 * (h_mat + h_mat.transpose());
}

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd g;
  int iterations = 0;
  bool converged = false;
  std::string reason = "max_iter";
  Eigen::MatrixXd h_inv;  // inverse-Hessian approximation, if any update ran
};

BfgsResult bfgs_minimize(
    const std::function<double(const Eigen::VectorXd&)>& f_only,
    const std::function<void(const Eigen::VectorXd&, double&, Eigen::VectorXd&)>& fg,
    Eigen::VectorXd x0, int max_iter, double grad_tol, double rel_tol,
    const std::function<void(Eigen::VectorXd&)>& project = {},
    const Eigen::MatrixXd* h0 = nullptr) {
  const int p = static_cast<int>(x0.size());
  if (project) project(x0);
  BfgsResult res;
  res.x = x0;
  fg(res.x, res.f, res.g);
  Eigen::MatrixXd h_inv = h0 ? *h0 : Eigen::MatrixXd::Identity(p, p);
  bool first_step = h0 == nullptr;

  for (res.iterations = 0; res.iterations < max_iter;) {
    if (res.g.lpNorm<Eigen::Infinity>() < grad_tol) {
      res.converged = true;
      res.reason = "gradient";
      if (!first_step) res.h_inv = h_inv;
      return res;
    }
    Eigen::VectorXd d = -(h_inv * res.g);
    double dd = d.dot(res.g);
    if (!(dd < 0.0)) {
      h_inv.setIdentity();
      d = -res.g;
      dd = d.dot(res.g);
    }

    bool accepted = false;
    bool reset_tried = false;
    Eigen::VectorXd xn;
    double fn = 0.0;
    for (;;) {
      double alpha = 1.0;
      for (int half = 0; half < 60; ++half) {
        xn = res.x + alpha * d;
        if (project) project(xn);
        fn = f_only(xn);
        if (std::isfinite(fn) && fn <= res.f + 1e-4 * alpha * dd) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (accepted || reset_tried) break;
      // retry once along steepest descent
      reset_tried = true;
      h_inv.setIdentity();
      d = -res.g;
      dd = d.dot(res.g);
    }
    if (!accepted) {
      res.reason = "line_search";
      if (!first_step) res.h_inv = h_inv;
      return res;
    }

    Eigen::VectorXd gn(p);
    double fn2;
    fg(xn, fn2, gn);
    const Eigen::VectorXd s = xn - res.x;
    const Eigen::VectorXd y = gn - res.g;
    const double rel_change = std::abs(res.f - fn2) / std::max(1.0, std::abs(fn2));
    res.x = xn;
    res.f = fn2;
    res.g = gn;
    ++res.iterations;
    if (rel_change < rel_tol) {
      res.converged = true;
      res.reason = "nll_change";
      if (!first_step) res.h_inv = h_inv;
      return res;
    }
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first_step) {
        h_inv *= sy / y.squaredNorm();
        first_step = false;
      }
      const double r = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      h_inv += (sy + y.dot(hy)) * r * r * (s * s.transpose()) -
               r * (hy * s.transpose() + s * hy.transpose());
    }
  }
  if (!first_step) res.h_inv = h_inv;
  return res;
}

Eigen::MatrixXd plain_vcov_from_scores(const Eigen::MatrixXd& scores) {
  const int p = static_cast<int>(scores.cols());
  const Eigen::MatrixXd m = scores.transpose() * scores;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const auto& ev = es.eigenvalues();
  if (!(ev.minCoeff() > ev.maxCoeff() * 1e-12) || !(ev.maxCoeff() > 0.0))
    throw NumericError(
        "score outer product is numerically singular; consider rescaling "
        "covariates");
  return m.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
}

Eigen::VectorXd mixed_params(const FitResult& fit) {
  Eigen::VectorXd x(fit.beta.size() + 1);
  x.head(fit.beta.size()) = fit.beta;
  x[fit.beta.size()] = fit.theta;
  return x;
}

}  // namespace

std::string to_string(SeKind kind) {
  switch (kind) {
    case SeKind::Plain:
      return "plain";
    case SeKind::Sandwich:
      return "sandwich";
    case SeKind::Cluster:
      return "cluster";
  }
  return "plain";
}

SeKind parse_se(const std::string& text) {
  if (text == "plain") return SeKind::Plain;
  if (text == "sandwich") return SeKind::Sandwich;
  if (text == "cluster") return SeKind::Cluster;
  throw ValidationError("unknown standard-error kind '" + text +
                        "' (expected plain, sandwich, or cluster)");
}

double nll(const DesignBatch& batch, const Eigen::VectorXd& beta,
           const ErrorFamily& family, const TruncationPolicy& policy,
           unsigned threads) {
  batch.validate();
  if (batch.n() == 0) throw ValidationError("empty design batch");
  if (beta.size() != batch.n_coefficients)
    throw ValidationError("coefficient vector length does not match design");
  const unsigned t = threads ? threads : default_threads();
  if (family.kind == ErrorFamily::Kind::NORM)
    return eval_norm(batch, beta, GhkConfig{}, t).value;
  return eval_closed(batch, beta, family, policy, t, EvalMode::Value).value;
}

Eigen::MatrixXd score(const DesignBatch& batch, const Eigen::VectorXd& beta,
                      const ErrorFamily& family, const TruncationPolicy& policy,
                      unsigned threads) {
  batch.validate();
  if (batch.n() == 0) throw ValidationError("empty design batch");
  if (beta.size() != batch.n_coefficients)
    throw ValidationError("coefficient vector length does not match design");
  if (family.kind == ErrorFamily::Kind::NORM)
    throw ValidationError("the NORM family has no analytic score");
  const unsigned t = threads ? threads : default_threads();
  return eval_closed(batch, beta, family, policy, t, EvalMode::Scores).scores;
}

void check_identification(const DesignBatch& batch) {
  const int np = batch.n_coefficients;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(np, np);
  for (const auto& s : batch.obs) {
    int base = -1;
    for (int j = batch.n_alternatives - 1; j >= 0; --j)
      if (s.available >> j & 1u) {
        base = j;
        break;
      }
    for (int j = 0; j < batch.n_alternatives; ++j) {
      if (j == base || !(s.available >> j & 1u)) continue;
      const Eigen::RowVectorXd d = s.x.row(j) - s.x.row(base);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(d.transpose());
    }
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const auto& ev = es.eigenvalues();
  const double tol = std::max(ev.maxCoeff() * 1e-10, 1e-30);
  std::vector<int> weak;
  for (int k = 0; k < np; ++k) {
    if (ev[k] > tol) continue;
    const Eigen::VectorXd dir = es.eigenvectors().col(k);
    const double top = dir.cwiseAbs().maxCoeff();
    for (int c = 0; c < np; ++c)
      if (std::abs(dir[c]) > 0.3 * top &&
          std::find(weak.begin(), weak.end(), c) == weak.end())
        weak.push_back(c);
  }
  if (!weak.empty()) {
    std::sort(weak.begin(), weak.end());
    std::string names;
    for (int c : weak) {
      if (!names.empty()) names += ", ";
      names += c < static_cast<int>(batch.coef_names.size())
                   ? batch.coef_names[c]
                   : ("column " + std::to_string(c));
    }
    throw IdentificationError(
        "differenced design is rank-deficient; dependent columns: " + names);
  }
}

FitResult fit(const DesignBatch& batch, const ErrorFamily& family,
              const FitOptions& options) {
  batch.validate();
  if (batch.n() == 0) throw ValidationError("empty design batch");
  check_identification(batch);
  const TruncationPolicy policy = options.policy.value_or(
      TruncationPolicy::auto_for(batch.n_alternatives));
  const unsigned threads = options.threads ? options.threads : default_threads();
  const int np = batch.n_coefficients;

  // full enumeration on wide menus is expensive per evaluation; a strided
  // subsample stage lands closer to the optimum than a LEVI warm start and
  // costs a fraction of one full-sample iteration
  const bool subsample_stage =
      (family.kind == ErrorFamily::Kind::SEVI ||
       family.kind == ErrorFamily::Kind::Mixed) &&
      policy.mode == TruncationPolicy::Mode::Full &&
      batch.n_alternatives >= 10 && batch.n() >= 64;

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(np);
  if (options.start.size() != 0) {
    if (options.start.size() != np)
      throw ValidationError("start vector length does not match design");
    x0 = options.start;
  } else if (!subsample_stage && options.warm_start_from_levi &&
             (family.kind == ErrorFamily::Kind::SEVI ||
              family.kind == ErrorFamily::Kind::Mixed)) {
    FitOptions lo = options;
    lo.start.resize(0);
    lo.warm_start_from_levi = false;
    const FitResult lf = fit(batch, ErrorFamily::levi(), lo);
    if (lf.converged) x0 = lf.beta;
  }

  std::function<double(const Eigen::VectorXd&)> f_only;
  std::function<void(const Eigen::VectorXd&, double&, Eigen::VectorXd&)> fg;
  Eval last_eval;     // most recent full evaluation with per-situation parts,
  Eigen::VectorXd last_x;  // reused when the optimizer stops at that point
  if (family.kind == ErrorFamily::Kind::NORM) {
    f_only = [&](const Eigen::VectorXd& x) {
      return eval_norm(batch, x, options.ghk, threads).value;
    };
    fg = [&](const Eigen::VectorXd& x, double& f, Eigen::VectorXd& g) {
      f = f_only(x);
      g = fd_gradient(f_only, x);
    };
  } else {
    f_only = [&](const Eigen::VectorXd& x) {
      return eval_closed(batch, x, family, policy, threads, EvalMode::Value)
          .value;
    };
    fg = [&](const Eigen::VectorXd& x, double& f, Eigen::VectorXd& g) {
      Eval e =
          eval_closed(batch, x, family, policy, threads, EvalMode::Scores);
      f = e.value;
      g = e.grad;
      last_eval = std::move(e);
      last_x = x;
    };
  }

  Eigen::MatrixXd h0;
  bool have_h0 = false;
  if (subsample_stage) {
    DesignBatch sub;
    sub.n_alternatives = batch.n_alternatives;
    sub.n_coefficients = batch.n_coefficients;
    const int stride = batch.n() / 32;
    for (int i = 0; i < batch.n(); i += stride) sub.obs.push_back(batch.obs[i]);
    const auto f_s = [&](const Eigen::VectorXd& x) {
      return eval_closed(sub, x, family, policy, threads, EvalMode::Value)
          .value;
    };
    const auto fg_s = [&](const Eigen::VectorXd& x, double& f,
                          Eigen::VectorXd& g) {
      Eval e = eval_closed(sub, x, family, policy, threads, EvalMode::Grad);
      f = e.value;
      g = std::move(e.grad);
    };
    const BfgsResult pre =
        bfgs_minimize(f_s, fg_s, x0, std::min(60, options.max_iter),
                      std::max(1e-3, options.grad_tol),
                      std::max(1e-8, options.nll_rel_tol));
    // keep the staged point only if it helps on the full sample; the
    // curvature carries over after rescaling to the full observation count
    if (f_only(pre.x) < f_only(x0)) {
      x0 = pre.x;
      if (pre.h_inv.size() != 0) {
        h0 = pre.h_inv * (static_cast<double>(sub.n()) / batch.n());
        have_h0 = true;
      }
    }
  }

  const BfgsResult opt =
      bfgs_minimize(f_only, fg, x0, options.max_iter, options.grad_tol,
                    options.nll_rel_tol, {}, have_h0 ? &h0 : nullptr);

  FitResult res;
  res.family = family;
  res.beta = opt.x;
  res.nll = opt.f;
  res.converged = opt.converged;
  res.iterations = opt.iterations;
  res.grad_norm = opt.g.lpNorm<Eigen::Infinity>();
  res.stop_reason = opt.reason;
  res.data_fingerprint = batch.fingerprint();
  res.policy = policy;
  res.ghk = options.ghk;
  res.n_obs = batch.n();
  res.n_params = np;

  if (family.kind == ErrorFamily::Kind::NORM) {
    const Eval e = eval_norm(batch, opt.x, options.ghk, threads);
    res.per_obs_nll = e.per_obs;
    res.floored = e.floored;
  } else {
    Eval e = (last_x.size() == opt.x.size() &&
              (last_x.array() == opt.x.array()).all())
                 ? std::move(last_eval)
                 : eval_closed(batch, opt.x, family, policy, threads,
                               EvalMode::Scores);
    res.per_obs_nll = std::move(e.per_obs);
    res.scores = std::move(e.scores);
    res.floored = e.floored;
    try {
      res.vcov = plain_vcov_from_scores(res.scores);
    } catch (const NumericError&) {
      // covariance left empty; vcov() will rethrow with context
    }
  }
  return res;
}

FitResult fit_mixed(const DesignBatch& batch, const FitOptions& options) {
  batch.validate();
  if (batch.n() == 0) throw ValidationError("empty design batch");
  check_identification(batch);
  const TruncationPolicy policy = options.policy.value_or(
      TruncationPolicy::auto_for(batch.n_alternatives));
  const unsigned threads = options.threads ? options.threads : default_threads();
  const int nl = batch.n_coefficients;
  const int np = nl + 1;
  constexpr double kThetaCap = 15.0;
  constexpr double kBoundaryEdge = 14.999;

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(np);
  if (options.start.size() == np) {
    x0 = options.start;
  } else if (options.start.size() == nl) {
    x0.head(nl) = options.start;
  } else if (options.start.size() != 0) {
    throw ValidationError("start vector length does not match design");
  } else if (options.warm_start_from_levi) {
    FitOptions lo = options;
    lo.start.resize(0);
    lo.warm_start_from_levi = false;
    const FitResult lf = fit(batch, ErrorFamily::levi(), lo);
    if (lf.converged) x0.head(nl) = lf.beta;
  }

  const auto eval_at = [&](const Eigen::VectorXd& x, EvalMode mode) {
    const double rho = logistic(std::clamp(x[nl], -kThetaCap, kThetaCap));
    return eval_closed(batch, x.head(nl), ErrorFamily::mixed(rho), policy,
                       threads, mode);
  };
  const auto f_only = [&](const Eigen::VectorXd& x) {
    return eval_at(x, EvalMode::Value).value;
  };
  const auto fg = [&](const Eigen::VectorXd& x, double& f, Eigen::VectorXd& g) {
    f = f_only(x);
    g = fd_gradient(f_only, x);
  };
  const auto project = [&](Eigen::VectorXd& x) {
    x[nl] = std::clamp(x[nl], -kThetaCap, kThetaCap);
  };

  const BfgsResult opt = bfgs_minimize(f_only, fg, x0, options.max_iter,
                                       options.grad_tol, options.nll_rel_tol,
                                       project);

  FitResult res;
  res.family = ErrorFamily::mixed(logistic(opt.x[nl]));
  res.rho_estimated = true;
  res.beta = opt.x.head(nl);
  res.theta = opt.x[nl];
  res.rho = logistic(opt.x[nl]);
  res.rho_boundary = std::abs(opt.x[nl]) >= kBoundaryEdge;
  res.nll = opt.f;
  res.converged = opt.converged;
  res.iterations = opt.iterations;
  res.grad_norm = opt.g.lpNorm<Eigen::Infinity>();
  res.stop_reason = opt.reason;
  res.data_fingerprint = batch.fingerprint();
  res.policy = policy;
  res.ghk = options.ghk;
  res.n_obs = batch.n();
  res.n_params = np;

  const Eval base = eval_at(opt.x, EvalMode::Value);
  res.per_obs_nll = base.per_obs;
  res.floored = base.floored;

  // per-situation scores by central differences of the per-situation parts
  res.scores.resize(batch.n(), np);
  for (int k = 0; k < np; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(opt.x[k]));
    Eigen::VectorXd xp = opt.x, xm = opt.x;
    xp[k] += h;
    xm[k] -= h;
    res.scores.col(k) =
        (eval_at(xp, EvalMode::Value).per_obs - eval_at(xm, EvalMode::Value).per_obs) /
        (2.0 * h);
  }
  try {
    res.vcov = plain_vcov_from_scores(res.scores);
    if (!res.rho_boundary && res.vcov.rows() == np)
      res.rho_se = res.rho * (1.0 - res.rho) * std::sqrt(res.vcov(nl, nl));
  } catch (const NumericError&) {
  }
  return res;
}

Eigen::MatrixXd vcov(const FitResult& fit, const DesignBatch& batch,
                     SeKind kind) {
  if (batch.fingerprint() != fit.data_fingerprint)
    throw ValidationError("covariance requested on a different dataset than "
                          "the fit");
  const unsigned threads = default_threads();

  if (kind == SeKind::Plain) {
    if (fit.scores.rows() > 0) return plain_vcov_from_scores(fit.scores);
    if (fit.family.kind == ErrorFamily::Kind::NORM) {
      // simulated likelihood: covariance from the finite-difference Hessian
      const auto f = [&](const Eigen::VectorXd& x) {
        return eval_norm(batch, x, fit.ghk, threads).value;
      };
      const auto g = [&](const Eigen::VectorXd& x) {
        return fd_gradient(f, x, 1e-4);
      };
      const Eigen::MatrixXd h_mat = fd_jacobian_of_gradient(g, fit.beta, 1e-4);
      return h_mat.ldlt().solve(
          Eigen::MatrixXd::Identity(h_mat.rows(), h_mat.cols()));
    }
    throw ValidationError("fit carries no scores for a plain covariance");
  }

  if (fit.family.kind == ErrorFamily::Kind::NORM)
    throw ValidationError(
        "sandwich and cluster covariances need an analytic score; "
        "the NORM family has none");
  if (fit.scores.rows() != batch.n())
    throw ValidationError("fit scores do not match the dataset");

  const Eigen::VectorXd at =
      fit.rho_estimated ? mixed_params(fit) : fit.beta;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_fn;
  if (fit.rho_estimated) {
    const int nl = static_cast<int>(fit.beta.size());
    grad_fn = [&, nl](const Eigen::VectorXd& x) {
      const auto f = [&](const Eigen::VectorXd& xx) {
        const double rho = logistic(std::clamp(xx[nl], -15.0, 15.0));
        return eval_closed(batch, xx.head(nl), ErrorFamily::mixed(rho),
                           fit.policy, threads, EvalMode::Value)
            .value;
      };
      return fd_gradient(f, x);
    };
  } else {
    grad_fn = [&](const Eigen::VectorXd& x) {
      return eval_closed(batch, x, fit.family, fit.policy, threads,
                         EvalMode::Grad)
          .grad;
    };
  }
  const Eigen::MatrixXd h_mat = fd_jacobian_of_gradient(grad_fn, at);

  Eigen::MatrixXd meat;
  if (kind == SeKind::Sandwich) {
    meat = fit.scores.transpose() * fit.scores;
  } else {
    std::unordered_map<std::int64_t, int> slot;
    std::vector<Eigen::VectorXd> sums;
    for (int i = 0; i < batch.n(); ++i) {
      const std::int64_t c = batch.obs[i].cluster;
      auto it = slot.find(c);
      if (it == slot.end()) {
        slot.emplace(c, static_cast<int>(sums.size()));
        sums.push_back(fit.scores.row(i).transpose());
      } else {
        sums[it->second] += fit.scores.row(i).transpose();
      }
    }
    meat = Eigen::MatrixXd::Zero(fit.scores.cols(), fit.scores.cols());
    for (const auto& gsum : sums)
      meat.selfadjointView<Eigen::Lower>().rankUpdate(gsum);
    meat = meat.selfadjointView<Eigen::Lower>();
  }

  Eigen::LDLT<Eigen::MatrixXd> hd(h_mat);
  if (hd.info() != Eigen::Success)
    throw NumericError("Hessian factorization failed; consider rescaling "
                       "covariates");
  const Eigen::MatrixXd hinv_meat = hd.solve(meat);
  Eigen::MatrixXd v = hd.solve(hinv_meat.transpose());
  return 0.5 * (v + v.transpose());
}

WaldResult wald(const FitResult& fit, const Eigen::MatrixXd& r_mat,
                const Eigen::VectorXd& r_vec) {
  const int nl = static_cast<int>(fit.beta.size());
  if (r_mat.cols() != nl || r_vec.size() != r_mat.rows())
    throw ValidationError("restriction dimensions do not match the fit");
  if (fit.vcov.rows() < nl)
    throw ValidationError("fit carries no covariance; compute vcov first");
  const int q = static_cast<int>(r_mat.rows());
  const Eigen::VectorXd diff = r_mat * fit.beta - r_vec;
  const Eigen::MatrixXd m = r_mat * fit.vcov.topLeftCorner(nl, nl) *
                            r_mat.transpose();
  const Eigen::VectorXd sol = m.ldlt().solve(diff);
  WaldResult out;
  out.stat = diff.dot(sol);
  out.dof = q;
  out.p_value = chi2_sf(std::max(out.stat, 0.0), q);
  return out;
}

}  // namespace sevi
