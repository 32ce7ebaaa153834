#include "sevi/choice.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include "sevi/accum.hpp"
#include "sevi/probit.hpp"
#include "sevi/subsets.hpp"

namespace sevi {

namespace {

constexpr double kExpClamp = 700.0;
constexpr double kProbFloor = 1e-12;
constexpr unsigned kAutoFullLimit = 14;

double clamped_exp(double x) {
  return std::exp(std::clamp(x, -kExpClamp, kExpClamp));
}

double clamp_prob(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

void warn_large_full_enumeration(int universe) {
  static std::atomic<bool> warned{false};
  if (universe > static_cast<int>(kFullEnumerationComfortLimit) &&
      !warned.exchange(true)) {
    std::fprintf(stderr,
                 "sevi: full subset enumeration over %d alternatives; "
                 "consider a truncation policy beyond %u\n",
                 universe + 1, kFullEnumerationComfortLimit + 1);
  }
}

// the enumeration universe for alternative j: every other available
// alternative, with its exponent exp(v_j - v_k)
struct AltUniverse {
  int u = 0;
  std::array<int, 64> alt;
  std::array<double, 64> e;
};

AltUniverse make_universe(const UtilityVector& v, int j) {
  v.require_valid(2);
  if (!v.is_available(j))
    throw ValidationError("alternative " + std::to_string(j) +
                          " is not available");
  AltUniverse ctx;
  const double vj = v.values[j];
  for (int k = 0; k < v.size(); ++k) {
    if (k == j || !v.is_available(k)) continue;
    ctx.alt[ctx.u] = k;
    ctx.e[ctx.u] = clamped_exp(vj - v.values[k]);
    ++ctx.u;
  }
  return ctx;
}

// layers of the expansion to include beyond the leading 1
int layers_for(const TruncationPolicy& policy, int u) {
  switch (policy.mode) {
    case TruncationPolicy::Mode::Full:
      return u;
    case TruncationPolicy::Mode::MaxCardinality:
      return std::min<int>(static_cast<int>(policy.max_cardinality) - 1, u);
    case TruncationPolicy::Mode::ToleranceDriven:
      return u;
  }
  return u;
}

double layer_sign(int card) { return (card & 1) ? -1.0 : 1.0; }

// ---------------------------------------------------------------------------
// batched depth-first enumeration, W observations in lockstep
//
// Subsets form a tree whose children append a higher-indexed element; each
// node carries the running denominator D = 1 + sum of its exponents. The
// probability contribution of a subset is handled by per-cardinality partial
// sums combined at the end, matching the reference's cardinality-major order.
// Cross-derivatives use subtree sums: every subset containing element k lives
// in a subtree hanging off an edge labelled k, so adding a finished subtree's
// sum of sign * Q^2 onto k's accumulator costs O(1) per node.
// ---------------------------------------------------------------------------

template <int W, bool WithGrad>
void sevi_dfs(const double* e, int u, int max_depth, double* p_out,
              double* dpj_out, double* cross_out) {
  double layer[64][W];
  for (int d = 0; d <= max_depth; ++d)
    for (int w = 0; w < W; ++w) layer[d][w] = 0.0;
  for (int w = 0; w < W; ++w) layer[0][w] = 1.0;

  double g[W];
  if constexpr (WithGrad) {
    for (int w = 0; w < W; ++w) g[w] = 0.0;
    for (int k = 0; k < u; ++k)
      for (int w = 0; w < W; ++w) cross_out[k * W + w] = 0.0;
  }

  if (max_depth > 0) {
    double dstack[64][W], sub[64][W];
    int kst[64], nxt[64];
    int d = 0;
    for (int w = 0; w < W; ++w) {
      dstack[0][w] = 1.0;
      sub[0][w] = 0.0;
    }
    nxt[0] = 0;
    kst[0] = -1;
    for (;;) {
      if (nxt[d] < u) {
        const int k = nxt[d]++;
        const int cd = d + 1;
        double q[W], dc[W];
        for (int w = 0; w < W; ++w) dc[w] = dstack[d][w] + e[k * W + w];
        for (int w = 0; w < W; ++w) q[w] = 1.0 / dc[w];
        for (int w = 0; w < W; ++w) layer[cd][w] += q[w];
        const bool leaf = (cd == max_depth) || (k == u - 1);
        if constexpr (WithGrad) {
          const double s = layer_sign(cd);
          double wv[W];
          for (int w = 0; w < W; ++w) g[w] += s * q[w] * (1.0 - q[w]);
          for (int w = 0; w < W; ++w) wv[w] = s * q[w] * q[w];
          if (leaf) {
            for (int w = 0; w < W; ++w) cross_out[k * W + w] += wv[w];
            for (int w = 0; w < W; ++w) sub[d][w] += wv[w];
          } else {
            ++d;
            kst[d] = k;
            nxt[d] = k + 1;
            for (int w = 0; w < W; ++w) {
              dstack[d][w] = dc[w];
              sub[d][w] = wv[w];
            }
          }
        } else {
          if (!leaf) {
            ++d;
            nxt[d] = k + 1;
            for (int w = 0; w < W; ++w) dstack[d][w] = dc[w];
          }
        }
      } else {
        if (d == 0) break;
        if constexpr (WithGrad) {
          for (int w = 0; w < W; ++w) cross_out[kst[d] * W + w] += sub[d][w];
          for (int w = 0; w < W; ++w) sub[d - 1][w] += sub[d][w];
        }
        --d;
      }
    }
  }

  for (int w = 0; w < W; ++w) {
    NeumaierSum total;
    for (int d = 0; d <= max_depth; ++d)
      total.add(layer_sign(d) * layer[d][w]);
    p_out[w] = total.value();
  }
  if constexpr (WithGrad) {
    for (int w = 0; w < W; ++w) dpj_out[w] = -g[w];
    for (int k = 0; k < u; ++k)
      for (int w = 0; w < W; ++w) cross_out[k * W + w] *= e[k * W + w];
  }
}

// ---------------------------------------------------------------------------
// layered Gosper-order reference with compensated accumulation
// ---------------------------------------------------------------------------

struct ReferenceOut {
  double p = 0.0;
  int layers_used = 0;
  bool want_grad = false;
  double g = 0.0;                  // sum of sign * Q(1-Q)
  std::array<double, 64> cross{};  // per universe slot: sum over T containing
                                   // k of sign * Q^2
};

void reference_eval(const AltUniverse& ctx, const TruncationPolicy& policy,
                    ReferenceOut& out) {
  const int u = ctx.u;
  if (policy.mode == TruncationPolicy::Mode::Full)
    warn_large_full_enumeration(u);
  const int max_layers = layers_for(policy, u);
  NeumaierSum total;
  total.add(1.0);
  NeumaierSum gsum;
  std::array<NeumaierSum, 64> cross{};
  int used = 0;
  for (int card = 1; card <= u; ++card) {
    if (policy.mode != TruncationPolicy::Mode::ToleranceDriven &&
        card > max_layers)
      break;
    NeumaierSum layer;
    NeumaierSum layer_g;
    std::array<NeumaierSum, 64> layer_cross{};
    std::uint64_t mask = (std::uint64_t(1) << card) - 1;
    const std::uint64_t limit = std::uint64_t(1) << u;
    while (mask < limit) {
      double d = 1.0;
      for (std::uint64_t m = mask; m != 0; m &= m - 1) {
        const int k = std::countr_zero(m);
        d += ctx.e[k];
      }
      const double q = 1.0 / d;
      layer.add(q);
      if (out.want_grad) {
        layer_g.add(q * (1.0 - q));
        const double q2 = q * q;
        for (std::uint64_t m = mask; m != 0; m &= m - 1)
          layer_cross[std::countr_zero(m)].add(q2);
      }
      const std::uint64_t c = mask & (~mask + 1);
      const std::uint64_t r = mask + c;
      mask = r | (((mask ^ r) >> 2) / c);
    }
    const double layer_sum = layer.value();
    if (policy.mode == TruncationPolicy::Mode::ToleranceDriven &&
        layer_sum <= policy.tol)
      break;
    const double s = layer_sign(card);
    total.add(s * layer_sum);
    used = card;
    if (out.want_grad) {
      gsum.add(s * layer_g.value());
      for (int k = 0; k < u; ++k) cross[k].add(s * layer_cross[k].value());
    }
  }
  out.p = total.value();
  out.layers_used = used;
  if (out.want_grad) {
    out.g = gsum.value();
    for (int k = 0; k < u; ++k) out.cross[k] = cross[k].value();
  }
}

void validate_policy(const TruncationPolicy& policy) {
  switch (policy.mode) {
    case TruncationPolicy::Mode::Full:
      return;
    case TruncationPolicy::Mode::MaxCardinality:
      if (policy.max_cardinality < 2)
        throw ValidationError("truncation cardinality must be at least 2");
      return;
    case TruncationPolicy::Mode::ToleranceDriven:
      if (!(policy.tol > 0.0) || policy.tol > 0.01)
        throw ValidationError("truncation tolerance must lie in (0, 0.01]");
      return;
  }
}

ProbGrad grad_from_universe(const UtilityVector& v, int j,
                            const AltUniverse& ctx, double p, double dpj,
                            const double* cross) {
  ProbGrad out;
  out.p = clamp_prob(p);
  out.dp = Eigen::VectorXd::Zero(v.size());
  out.dp[j] = dpj;
  for (int k = 0; k < ctx.u; ++k) out.dp[ctx.alt[k]] = cross[k];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// UtilityVector
// ---------------------------------------------------------------------------

UtilityVector::UtilityVector(Eigen::VectorXd v) : values(std::move(v)) {
  const int n = size();
  if (n > 63)
    throw CapacityError("at most 63 alternatives are supported");
  available = n == 64 ? ~std::uint64_t(0)
                      : (std::uint64_t(1) << n) - 1;
}

UtilityVector::UtilityVector(Eigen::VectorXd v, std::uint64_t avail)
    : values(std::move(v)), available(avail) {
  if (size() > 63)
    throw CapacityError("at most 63 alternatives are supported");
  available &= size() == 0 ? 0 : (std::uint64_t(1) << size()) - 1;
}

int UtilityVector::n_available() const {
  return std::popcount(available);
}

void UtilityVector::require_valid(int min_avail) const {
  if (size() > 63)
    throw CapacityError("at most 63 alternatives are supported");
  if (n_available() < min_avail)
    throw ValidationError("need at least " + std::to_string(min_avail) +
                          " available alternatives, have " +
                          std::to_string(n_available()));
  for (int k = 0; k < size(); ++k)
    if (is_available(k) && !std::isfinite(values[k]))
      throw ValidationError("non-finite utility for available alternative " +
                            std::to_string(k));
}

// ---------------------------------------------------------------------------
// ErrorFamily / TruncationPolicy
// ---------------------------------------------------------------------------

ErrorFamily ErrorFamily::mixed(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw ValidationError("mixing weight must lie in [0, 1]");
  return {Kind::Mixed, rho};
}

std::string to_string(const ErrorFamily& family) {
  switch (family.kind) {
    case ErrorFamily::Kind::SEVI:
      return "sevi";
    case ErrorFamily::Kind::LEVI:
      return "levi";
    case ErrorFamily::Kind::NORM:
      return "norm";
    case ErrorFamily::Kind::Mixed: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "mixed=%.17g", family.rho);
      return buf;
    }
  }
  return "sevi";
}

ErrorFamily parse_family(const std::string& text) {
  if (text == "sevi") return ErrorFamily::sevi();
  if (text == "levi") return ErrorFamily::levi();
  if (text == "norm") return ErrorFamily::norm();
  auto sep = text.find_first_of("=:");
  if (text.substr(0, sep) == "mixed") {
    if (sep == std::string::npos)
      throw ValidationError("mixed family needs a weight, e.g. mixed=0.5");
    std::size_t pos = 0;
    double rho;
    try {
      rho = std::stod(text.substr(sep + 1), &pos);
    } catch (const std::exception&) {
      throw ValidationError("cannot parse mixing weight in '" + text + "'");
    }
    if (pos != text.size() - sep - 1)
      throw ValidationError("cannot parse mixing weight in '" + text + "'");
    return ErrorFamily::mixed(rho);
  }
  throw ValidationError("unknown error family '" + text +
                        "' (expected sevi, levi, norm, or mixed=RHO)");
}

TruncationPolicy TruncationPolicy::max_card(unsigned m) {
  TruncationPolicy p;
  p.mode = Mode::MaxCardinality;
  p.max_cardinality = m;
  validate_policy(p);
  return p;
}

TruncationPolicy TruncationPolicy::tolerance_driven(double tol) {
  TruncationPolicy p;
  p.mode = Mode::ToleranceDriven;
  p.tol = tol;
  validate_policy(p);
  return p;
}

TruncationPolicy TruncationPolicy::auto_for(int n_available) {
  if (n_available <= static_cast<int>(kAutoFullLimit)) return full();
  return tolerance_driven(1e-8);
}

std::string TruncationPolicy::describe() const {
  switch (mode) {
    case Mode::Full:
      return "full";
    case Mode::MaxCardinality:
      return "maxcard=" + std::to_string(max_cardinality);
    case Mode::ToleranceDriven: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "tol=%g", tol);
      return buf;
    }
  }
  return "full";
}

TruncationPolicy parse_truncation(const std::string& text) {
  if (text == "full") return TruncationPolicy::full();
  auto sep = text.find('=');
  const std::string head = text.substr(0, sep);
  if (sep != std::string::npos && (head == "maxcard" || head == "tol")) {
    const std::string tail = text.substr(sep + 1);
    std::size_t pos = 0;
    try {
      if (head == "maxcard") {
        const long m = std::stol(tail, &pos);
        if (pos == tail.size() && m >= 0)
          return TruncationPolicy::max_card(static_cast<unsigned>(m));
      } else {
        const double tol = std::stod(tail, &pos);
        if (pos == tail.size()) return TruncationPolicy::tolerance_driven(tol);
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
    }
  }
  throw ValidationError("unknown truncation policy '" + text +
                        "' (expected full, maxcard=K, or tol=X)");
}

// ---------------------------------------------------------------------------
// public kernels
// ---------------------------------------------------------------------------

double prob_sevi(const UtilityVector& v, int j, const TruncationPolicy& policy) {
  validate_policy(policy);
  const AltUniverse ctx = make_universe(v, j);
  if (policy.mode == TruncationPolicy::Mode::ToleranceDriven) {
    ReferenceOut out;
    reference_eval(ctx, policy, out);
    return clamp_prob(out.p);
  }
  if (policy.mode == TruncationPolicy::Mode::Full)
    warn_large_full_enumeration(ctx.u);
  double p;
  sevi_dfs<1, false>(ctx.e.data(), ctx.u, layers_for(policy, ctx.u), &p,
                     nullptr, nullptr);
  return clamp_prob(p);
}

double prob_sevi(const UtilityVector& v, int j) {
  return prob_sevi(v, j, TruncationPolicy::auto_for(v.n_available()));
}

double prob_levi(const UtilityVector& v, int j) {
  v.require_valid(2);
  if (!v.is_available(j))
    throw ValidationError("alternative " + std::to_string(j) +
                          " is not available");
  double vmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < v.size(); ++k)
    if (v.is_available(k)) vmax = std::max(vmax, v.values[k]);
  double denom = 0.0;
  for (int k = 0; k < v.size(); ++k)
    if (v.is_available(k)) denom += std::exp(v.values[k] - vmax);
  return clamp_prob(std::exp(v.values[j] - vmax) / denom);
}

double prob(const UtilityVector& v, int j, const ErrorFamily& family,
            const TruncationPolicy& policy, const GhkConfig& ghk) {
  switch (family.kind) {
    case ErrorFamily::Kind::SEVI:
      return prob_sevi(v, j, policy);
    case ErrorFamily::Kind::LEVI:
      return prob_levi(v, j);
    case ErrorFamily::Kind::NORM:
      return prob_norm(v, j, ghk);
    case ErrorFamily::Kind::Mixed:
      return family.rho * prob_sevi(v, j, policy) +
             (1.0 - family.rho) * prob_levi(v, j);
  }
  throw ValidationError("unknown error family");
}

double prob(const UtilityVector& v, int j, const ErrorFamily& family,
            const TruncationPolicy& policy) {
  return prob(v, j, family, policy, GhkConfig{});
}

Eigen::VectorXd prob_all(const UtilityVector& v, const ErrorFamily& family,
                         const TruncationPolicy& policy, const GhkConfig& ghk) {
  if (family.kind == ErrorFamily::Kind::NORM) return prob_norm_all(v, ghk);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (int j = 0; j < v.size(); ++j)
    if (v.is_available(j)) out[j] = prob(v, j, family, policy, ghk);
  return out;
}

Eigen::VectorXd prob_all(const UtilityVector& v, const ErrorFamily& family,
                         const TruncationPolicy& policy) {
  return prob_all(v, family, policy, GhkConfig{});
}

double truncation_bound(const UtilityVector& v, int j, unsigned m) {
  const AltUniverse ctx = make_universe(v, j);
  if (m < 2 || static_cast<int>(m) >= ctx.u + 1)
    throw ValidationError(
        "truncation bound needs 2 <= M < number of available alternatives");
  NeumaierSum layer;
  std::uint64_t mask = (std::uint64_t(1) << m) - 1;
  const std::uint64_t limit = std::uint64_t(1) << ctx.u;
  while (mask < limit) {
    double d = 1.0;
    for (std::uint64_t mm = mask; mm != 0; mm &= mm - 1)
      d += ctx.e[std::countr_zero(mm)];
    layer.add(1.0 / d);
    const std::uint64_t c = mask & (~mask + 1);
    const std::uint64_t r = mask + c;
    mask = r | (((mask ^ r) >> 2) / c);
  }
  return layer.value();
}

ProbGrad prob_sevi_grad(const UtilityVector& v, int j,
                        const TruncationPolicy& policy) {
  validate_policy(policy);
  const AltUniverse ctx = make_universe(v, j);
  if (policy.mode == TruncationPolicy::Mode::ToleranceDriven) {
    ReferenceOut out;
    out.want_grad = true;
    reference_eval(ctx, policy, out);
    double cross[64];
    for (int k = 0; k < ctx.u; ++k) cross[k] = ctx.e[k] * out.cross[k];
    return grad_from_universe(v, j, ctx, out.p, -out.g, cross);
  }
  if (policy.mode == TruncationPolicy::Mode::Full)
    warn_large_full_enumeration(ctx.u);
  double p, dpj;
  double cross[64];
  sevi_dfs<1, true>(ctx.e.data(), ctx.u, layers_for(policy, ctx.u), &p, &dpj,
                    cross);
  return grad_from_universe(v, j, ctx, p, dpj, cross);
}

ProbGrad prob_levi_grad(const UtilityVector& v, int j) {
  ProbGrad out;
  out.p = prob_levi(v, j);
  out.dp = Eigen::VectorXd::Zero(v.size());
  for (int k = 0; k < v.size(); ++k) {
    if (!v.is_available(k)) continue;
    const double pk = prob_levi(v, k);
    out.dp[k] = (k == j) ? out.p * (1.0 - out.p) : -out.p * pk;
  }
  return out;
}

Eigen::VectorXd dprob_dv(const UtilityVector& v, int j,
                         const ErrorFamily& family,
                         const TruncationPolicy& policy) {
  switch (family.kind) {
    case ErrorFamily::Kind::SEVI:
      return prob_sevi_grad(v, j, policy).dp;
    case ErrorFamily::Kind::LEVI:
      return prob_levi_grad(v, j).dp;
    case ErrorFamily::Kind::Mixed:
      return family.rho * prob_sevi_grad(v, j, policy).dp +
             (1.0 - family.rho) * prob_levi_grad(v, j).dp;
    case ErrorFamily::Kind::NORM:
      throw ValidationError(
          "no closed-form probability gradient for the NORM family");
  }
  throw ValidationError("unknown error family");
}

Eigen::MatrixXd dprob_matrix(const UtilityVector& v, const ErrorFamily& family,
                             const TruncationPolicy& policy) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.size(), v.size());
  for (int j = 0; j < v.size(); ++j)
    if (v.is_available(j)) out.row(j) = dprob_dv(v, j, family, policy);
  return out;
}

double block_marschak(const UtilityVector& v, int j, std::uint64_t anchor_set) {
  v.require_valid(1);
  if (!v.is_available(j))
    throw ValidationError("alternative " + std::to_string(j) +
                          " is not available");
  if (!(anchor_set >> j & 1u))
    throw ValidationError("anchor set must contain the target alternative");
  if ((anchor_set & ~v.available) != 0)
    throw ValidationError("anchor set must consist of available alternatives");

  const std::uint64_t outside = v.available & ~anchor_set;
  std::array<int, 64> out_alt;
  int q = 0;
  for (int k = 0; k < v.size(); ++k)
    if (outside >> k & 1u) out_alt[q++] = k;

  const auto menu_prob = [&](std::uint64_t menu) {
    if (std::popcount(menu) == 1) return 1.0;
    return prob_sevi(UtilityVector(v.values, menu), j,
                     TruncationPolicy::auto_for(std::popcount(menu)));
  };

  NeumaierSum total;
  total.add(menu_prob(anchor_set));
  for (int card = 1; card <= q; ++card) {
    NeumaierSum layer;
    std::uint64_t mask = (std::uint64_t(1) << card) - 1;
    const std::uint64_t limit = std::uint64_t(1) << q;
    while (mask < limit) {
      std::uint64_t menu = anchor_set;
      for (std::uint64_t mm = mask; mm != 0; mm &= mm - 1)
        menu |= std::uint64_t(1) << out_alt[std::countr_zero(mm)];
      layer.add(menu_prob(menu));
      const std::uint64_t c = mask & (~mask + 1);
      const std::uint64_t r = mask + c;
      mask = r | (((mask ^ r) >> 2) / c);
    }
    total.add(layer_sign(card) * layer.value());
  }
  return std::clamp(total.value(), 0.0, 1.0);
}

double prob_min(const UtilityVector& cost, int j, const ErrorFamily& family,
                const TruncationPolicy& policy) {
  const UtilityVector neg(-cost.values, cost.available);
  switch (family.kind) {
    case ErrorFamily::Kind::LEVI:
      return prob_sevi(neg, j, policy);
    case ErrorFamily::Kind::SEVI:
      return prob_levi(neg, j);
    default:
      throw ValidationError("prob_min supports the SEVI and LEVI families");
  }
}

namespace detail {

double prob_sevi_reference(const UtilityVector& v, int j,
                           const TruncationPolicy& policy) {
  validate_policy(policy);
  const AltUniverse ctx = make_universe(v, j);
  ReferenceOut out;
  reference_eval(ctx, policy, out);
  return clamp_prob(out.p);
}

ProbGrad prob_sevi_grad_reference(const UtilityVector& v, int j,
                                  const TruncationPolicy& policy) {
  validate_policy(policy);
  const AltUniverse ctx = make_universe(v, j);
  ReferenceOut out;
  out.want_grad = true;
  reference_eval(ctx, policy, out);
  double cross[64];
  for (int k = 0; k < ctx.u; ++k) cross[k] = ctx.e[k] * out.cross[k];
  return grad_from_universe(v, j, ctx, out.p, -out.g, cross);
}

void sevi_dfs_batch(const double* e, int u, int max_depth, int w, double* p_out,
                    double* dpj_out, double* cross_out) {
  if (w == 1)
    sevi_dfs<1, true>(e, u, max_depth, p_out, dpj_out, cross_out);
  else if (w == 4)
    sevi_dfs<4, true>(e, u, max_depth, p_out, dpj_out, cross_out);
  else
    throw std::invalid_argument("sevi_dfs_batch supports lane widths 1 and 4");
}

void sevi_dfs_batch_prob(const double* e, int u, int max_depth, int w,
                         double* p_out) {
  if (w == 1)
    sevi_dfs<1, false>(e, u, max_depth, p_out, nullptr, nullptr);
  else if (w == 4)
    sevi_dfs<4, false>(e, u, max_depth, p_out, nullptr, nullptr);
  else
    throw std::invalid_argument("sevi_dfs_batch supports lane widths 1 and 4");
}

int make_exponents(const UtilityVector& v, int j, int* alt, double* e) {
  const AltUniverse ctx = make_universe(v, j);
  for (int k = 0; k < ctx.u; ++k) {
    alt[k] = ctx.alt[k];
    e[k] = ctx.e[k];
  }
  return ctx.u;
}

int layers_for_policy(const TruncationPolicy& policy, int u) {
  validate_policy(policy);
  return layers_for(policy, u);
}

double clamp_probability(double p) { return clamp_prob(p); }

}  // namespace detail

}  // namespace sevi
