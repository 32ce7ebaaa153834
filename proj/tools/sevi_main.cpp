#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sevi/accum.hpp"
#include "sevi/compare.hpp"
#include "sevi/errors.hpp"
#include "sevi/estimate.hpp"
#include "sevi/evd.hpp"
#include "sevi/io.hpp"
#include "sevi/rng.hpp"
#include "sevi/simlab.hpp"
#include "sevi/stats.hpp"
#include "sevi/welfare.hpp"

namespace {

using nlohmann::ordered_json;
using namespace sevi;

void emit_error(const std::string& type, const std::string& message) {
  ordered_json doc;
  doc["error"] = {{"type", type}, {"message", message}};
  std::cerr << doc.dump() << "\n";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<ErrorFamily> parse_family_list(const std::string& text) {
  std::vector<ErrorFamily> out;
  for (const auto& tok : split_list(text)) out.push_back(parse_family(tok));
  return out;
}

Eigen::VectorXd parse_vector(const std::string& text, const std::string& what) {
  const auto toks = split_list(text);
  if (toks.empty()) throw ValidationError(what + " list is empty");
  Eigen::VectorXd v(toks.size());
  for (std::size_t i = 0; i < toks.size(); ++i) {
    try {
      std::size_t used = 0;
      v[i] = std::stod(toks[i], &used);
      if (used != toks[i].size()) throw std::invalid_argument(toks[i]);
    } catch (const std::exception&) {
      throw ValidationError("cannot parse '" + toks[i] + "' in " + what);
    }
  }
  return v;
}

std::optional<TruncationPolicy> parse_truncation_flag(const std::string& text) {
  if (text.empty() || text == "auto") return std::nullopt;
  return parse_truncation(text);
}

int alt_index_of(const DesignBatch& batch, const std::string& name) {
  for (int j = 0; j < static_cast<int>(batch.alt_names.size()); ++j)
    if (batch.alt_names[j] == name) return j;
  throw ValidationError("alternative '" + name + "' is not in the data");
}

DgpSpec::AttrLaw parse_attr_law(const std::string& text) {
  if (text == "hetero") return DgpSpec::AttrLaw::Heteroskedastic;
  if (text == "homo") return DgpSpec::AttrLaw::Homoskedastic;
  if (text == "fixed") return DgpSpec::AttrLaw::FixedUtilities;
  throw ValidationError("attribute law must be hetero, homo, or fixed");
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < v.size(); ++i)
    if (std::isfinite(v[i]))
      arr.push_back(v[i]);
    else
      arr.push_back(nullptr);
  return arr;
}

double wall_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
  return doc;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data, spec, out = "result.json";
  std::string family, truncation, se;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  int max_iter = 200;
  bool estimate_rho = false;
};

int cmd_fit(const FitArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  ModelSpecFile spec = read_spec_file(a.spec);
  if (!a.family.empty()) spec.family = parse_family(a.family);
  if (!a.truncation.empty()) spec.truncation = parse_truncation_flag(a.truncation);
  if (!a.se.empty()) spec.se = parse_se(a.se);

  const DesignBatch batch = ingest_csv(a.data, spec);
  FitOptions opts;
  opts.policy = spec.truncation;
  opts.threads = a.threads;
  opts.max_iter = a.max_iter;
  opts.ghk.seed = a.seed;

  const FitResult fr = a.estimate_rho ? fit_mixed(batch, opts)
                                      : fit(batch, spec.family, opts);
  Eigen::MatrixXd vcov_used;
  if (spec.se == SeKind::Plain && fr.vcov.rows() > 0)
    vcov_used = fr.vcov;
  else
    vcov_used = vcov(fr, batch, spec.se);

  ordered_json doc =
      fit_result_document(fr, batch, spec, a.seed, vcov_used, spec.se);
  doc["timing"] = {{"seconds", wall_seconds(t0)}};
  write_text_atomic(a.out, doc.dump(2) + "\n");
  std::cout << "wrote " << a.out << " (" << (fr.converged ? "converged" : "NOT converged")
            << ", nll=" << fr.nll << ")\n";
  if (!fr.converged) {
    emit_error("convergence", "optimizer stopped: " + fr.stop_reason);
    return 3;
  }
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string fit, data, out = "predictions.csv";
  std::string restrict_alts;           // comma list of names to keep
  std::vector<std::string> shifts;     // name=delta
  std::string truncation;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

int cmd_predict(const PredictArgs& a) {
  ModelSpecFile spec;
  const FitResult fr = fit_from_document(read_json_file(a.fit), &spec);
  if (!a.truncation.empty()) spec.truncation = parse_truncation_flag(a.truncation);
  const DesignBatch batch = ingest_csv(a.data, spec);
  if (batch.n_coefficients != fr.beta.size())
    throw ValidationError(
        "schema mismatch: fit has " + std::to_string(fr.beta.size()) +
        " coefficients but the data expands to " +
        std::to_string(batch.n_coefficients));

  std::uint64_t keep_mask = ~std::uint64_t{0};
  if (!a.restrict_alts.empty()) {
    keep_mask = 0;
    for (const auto& name : split_list(a.restrict_alts))
      keep_mask |= std::uint64_t{1} << alt_index_of(batch, name);
  }
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(batch.n_alternatives);
  for (const auto& s : a.shifts) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--shift expects name=delta, got '" + s + "'");
    const int j = alt_index_of(batch, s.substr(0, eq));
    try {
      shift[j] += std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("cannot parse shift value in '" + s + "'");
    }
  }

  const TruncationPolicy policy = spec.truncation.value_or(
      TruncationPolicy::auto_for(batch.n_alternatives));
  std::ostringstream csv;
  csv << "situation_id,alternative_id,probability\n";
  csv << std::setprecision(17);
  for (int i = 0; i < batch.n(); ++i) {
    UtilityVector v = batch.utilities(i, fr.beta);
    v.values += shift;
    const std::uint64_t avail = v.available & keep_mask;
    if (avail == 0)
      throw ValidationError("situation " + std::to_string(batch.obs[i].id) +
                            ": scenario leaves no available alternative");
    if (std::popcount(avail) == 1) {
      const int only = std::countr_zero(avail);
      csv << batch.obs[i].id << ',' << batch.alt_names[only] << ",1\n";
      continue;
    }
    UtilityVector scoped(v.values, avail);
    GhkConfig cfg = fr.ghk;
    cfg.seed = hash_combine(a.seed, static_cast<std::uint64_t>(batch.obs[i].id));
    const Eigen::VectorXd p = prob_all(scoped, fr.family, policy, cfg);
    for (int j = 0; j < batch.n_alternatives; ++j)
      if (avail >> j & 1u)
        csv << batch.obs[i].id << ',' << batch.alt_names[j] << ',' << p[j]
            << '\n';
  }
  write_text_atomic(a.out, csv.str());
  std::cout << "wrote " << a.out << " (" << batch.n() << " situations)\n";
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string figure;
  std::string family = "sevi";
  int j = 5, n = 500;
  std::string attr_law = "hetero";
  std::string fixed_v, beta0;
  std::uint64_t seed = 1;
  int mc_draws = 200000;
  int ghk_draws = 500;
  std::string out = "simulated.csv";
};

int cmd_simulate(const SimulateArgs& a) {
  if (!a.figure.empty()) {
    if (a.figure != "shares5")
      throw ValidationError("unknown figure '" + a.figure +
                            "' (available: shares5)");
    Eigen::VectorXd v(5);
    v << 0.25, 0.50, 0.75, 1.50, 2.00;
    const UtilityVector uv(v);
    const TruncationPolicy full = TruncationPolicy::full();
    std::ostringstream csv;
    csv << "family,alternative,share\n" << std::setprecision(10);
    for (int j = 0; j < 5; ++j)
      csv << "levi,alt" << j + 1 << ',' << prob_levi(uv, j) << '\n';
    for (int j = 0; j < 5; ++j)
      csv << "sevi,alt" << j + 1 << ',' << prob_sevi(uv, j, full) << '\n';
    GhkConfig cfg;
    cfg.draws = a.ghk_draws;
    cfg.seed = a.seed;
    const Eigen::VectorXd ghk = prob_norm_all(uv, cfg);
    for (int j = 0; j < 5; ++j)
      csv << "norm-ghk,alt" << j + 1 << ',' << ghk[j] << '\n';
    // crude Monte Carlo: direct argmax over normal taste draws
    RngStream rng(hash_combine(a.seed, 0x6d63u));
    const Evd law = Evd::normal(kPi * kPi / 6.0);
    Eigen::VectorXd tally = Eigen::VectorXd::Zero(5);
    for (int d = 0; d < a.mc_draws; ++d) {
      int best = 0;
      double top = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < 5; ++j) {
        const double u = v[j] + law.quantile(rng.uniform());
        if (u > top) {
          top = u;
          best = j;
        }
      }
      tally[best] += 1.0;
    }
    tally /= a.mc_draws;
    for (int j = 0; j < 5; ++j)
      csv << "norm-mc,alt" << j + 1 << ',' << tally[j] << '\n';
    write_text_atomic(a.out, csv.str());
    std::cout << "wrote " << a.out << "\n";
    return 0;
  }

  DgpSpec spec;
  spec.n_alternatives = a.j;
  spec.n_obs = a.n;
  spec.family = parse_family(a.family);
  spec.attr_law = parse_attr_law(a.attr_law);
  spec.seed = a.seed;
  if (!a.beta0.empty()) spec.beta0 = parse_vector(a.beta0, "--beta0");
  if (spec.attr_law == DgpSpec::AttrLaw::FixedUtilities) {
    if (a.fixed_v.empty())
      throw ValidationError("--attr-law fixed needs --fixed-v");
    spec.fixed_utilities = parse_vector(a.fixed_v, "--fixed-v");
  }
  const DesignBatch batch = generate(spec);
  write_text_atomic(a.out, batch_to_csv(batch));
  std::cout << "wrote " << a.out << " (" << batch.n() << " situations, "
            << batch.n_alternatives << " alternatives); model spec hint: "
            << "{\"generic\": [";
  for (int c = 0; c < batch.n_coefficients; ++c)
    std::cout << (c ? ", " : "") << '"' << batch.coef_names[c] << '"';
  std::cout << "]}\n";
  return 0;
}

// ---------------------------------------------------------------- replicate

struct ReplicateArgs {
  std::string true_family = "sevi";
  int j = 5, n = 500, reps = 100;
  std::string attr_law = "hetero";
  std::string estimators = "sevi,levi";
  bool estimate_rho = false;
  bool do_vuong = false;
  std::string hausman;  // comma list of 0-based alternative indices
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string out = "replicate.json";
  std::string csv;
};

int cmd_replicate(const ReplicateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  ReplicateConfig cfg;
  cfg.dgp.n_alternatives = a.j;
  cfg.dgp.n_obs = a.n;
  cfg.dgp.family = parse_family(a.true_family);
  cfg.dgp.attr_law = parse_attr_law(a.attr_law);
  cfg.dgp.seed = a.seed;
  cfg.estimators = parse_family_list(a.estimators);
  cfg.fit_rho_free = a.estimate_rho;
  cfg.vuong_sevi_levi = a.do_vuong;
  cfg.reps = a.reps;
  cfg.workers = a.workers;
  if (!a.hausman.empty()) {
    for (const auto& tok : split_list(a.hausman)) {
      int idx = -1;
      try {
        idx = std::stoi(tok);
      } catch (const std::exception&) {
        throw ValidationError("--hausman expects 0-based indices, got '" + tok +
                              "'");
      }
      if (idx < 0 || idx >= a.j)
        throw ValidationError("--hausman index " + std::to_string(idx) +
                              " out of range");
      cfg.hausman_subset |= std::uint64_t{1} << idx;
    }
  }

  const ReplicateSummary sum = replicate(cfg);

  ordered_json doc;
  doc["version"] = kVersion;
  doc["seed"] = a.seed;
  doc["true_family"] = to_string(cfg.dgp.family);
  doc["reps"] = sum.reps;
  doc["n"] = a.n;
  doc["alternatives"] = a.j;
  doc["beta0"] = vector_json(sum.beta0);
  ordered_json est = ordered_json::array();
  for (const auto& e : sum.estimators) {
    ordered_json row;
    row["estimator"] = e.label;
    row["converged"] = e.converged;
    row["nonconverged"] = e.nonconverged;
    row["bias"] = vector_json(e.bias);
    row["sd"] = vector_json(e.sd);
    row["mean_se"] = vector_json(e.mean_se);
    row["coverage"] = vector_json(e.coverage);
    if (!e.rho_hat.empty()) {
      std::vector<double> sorted = e.rho_hat;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t m = sorted.size();
      row["rho_median"] = m % 2 ? sorted[m / 2]
                                : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
      row["rho_hat"] = sorted;
    }
    est.push_back(std::move(row));
  }
  doc["estimators"] = std::move(est);
  if (!sum.vuong_stats.empty()) {
    int neg = 0, strong = 0;
    for (double v : sum.vuong_stats) {
      if (v < 0) ++neg;
      if (v < -1.645) ++strong;
    }
    doc["vuong"] = {{"count", sum.vuong_stats.size()},
                    {"frac_negative", double(neg) / sum.vuong_stats.size()},
                    {"frac_below_critical",
                     double(strong) / sum.vuong_stats.size()},
                    {"statistics", sum.vuong_stats}};
  }
  if (!sum.hausman_pvalues.empty()) {
    int rej = 0;
    for (double p : sum.hausman_pvalues)
      if (p < 0.05) ++rej;
    doc["hausman"] = {{"count", sum.hausman_pvalues.size()},
                      {"rejection_rate_5pct",
                       double(rej) / sum.hausman_pvalues.size()},
                      {"p_values", sum.hausman_pvalues}};
  }
  doc["timing"] = {{"seconds", wall_seconds(t0)}};
  write_text_atomic(a.out, doc.dump(2) + "\n");

  if (!a.csv.empty()) {
    std::ostringstream csv;
    csv << "estimator,coefficient,bias,sd,mean_se,coverage\n"
        << std::setprecision(10);
    for (const auto& e : sum.estimators)
      for (int l = 0; l < sum.beta0.size(); ++l)
        csv << e.label << ",b" << l + 1 << ',' << e.bias[l] << ',' << e.sd[l]
            << ',' << e.mean_se[l] << ',' << e.coverage[l] << '\n';
    write_text_atomic(a.csv, csv.str());
  }
  std::cout << "wrote " << a.out << " (" << sum.reps << " replications)\n";
  return 0;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::string data, spec, out = "compare.json";
  std::string families = "sevi,levi";
  std::string truncation;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

int cmd_compare(const CompareArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  ModelSpecFile spec = read_spec_file(a.spec);
  if (!a.truncation.empty()) spec.truncation = parse_truncation_flag(a.truncation);
  const DesignBatch batch = ingest_csv(a.data, spec);
  const std::vector<ErrorFamily> fams = parse_family_list(a.families);
  if (fams.empty()) throw ValidationError("no families to compare");

  FitOptions opts;
  opts.policy = spec.truncation;
  opts.threads = a.threads;
  opts.ghk.seed = a.seed;

  std::vector<FitResult> fits;
  const FitResult* levi_ref = nullptr;
  const FitResult* sevi_ref = nullptr;
  bool all_converged = true;
  for (const auto& fam : fams) {
    FitOptions local = opts;
    if (fam.kind == ErrorFamily::Kind::SEVI && levi_ref && levi_ref->converged)
      local.start = levi_ref->beta;
    fits.push_back(fit(batch, fam, local));
    all_converged = all_converged && fits.back().converged;
    if (fam.kind == ErrorFamily::Kind::LEVI) levi_ref = &fits.back();
    if (fam.kind == ErrorFamily::Kind::SEVI) sevi_ref = &fits.back();
  }

  const std::vector<IcRow> table = ic_table(fits);
  ordered_json doc;
  doc["version"] = kVersion;
  doc["seed"] = a.seed;
  doc["data"] = {{"n", batch.n()},
                 {"alternatives", batch.n_alternatives},
                 {"fingerprint", fingerprint_hex(batch.fingerprint())}};
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < table.size(); ++i) {
    ordered_json row;
    row["family"] = table[i].label;
    row["n_params"] = table[i].n_params;
    row["nll"] = table[i].nll;
    row["aic"] = table[i].aic;
    row["bic"] = table[i].bic;
    row["rank"] = table[i].rank;
    row["converged"] = fits[i].converged;
    rows.push_back(std::move(row));
  }
  doc["table"] = std::move(rows);
  if (sevi_ref && levi_ref) {
    const VuongReport vr = vuong(*sevi_ref, *levi_ref);
    doc["vuong"] = {{"lr", vr.lr},
                    {"statistic", vr.statistic},
                    {"decision_5pct", to_string(vr.decision_5pct)}};
  } else {
    doc["vuong"] = nullptr;
  }
  doc["timing"] = {{"seconds", wall_seconds(t0)}};
  write_text_atomic(a.out, doc.dump(2) + "\n");
  std::cout << "wrote " << a.out << "\n";
  if (!all_converged) {
    emit_error("convergence", "at least one family did not converge");
    return 3;
  }
  return 0;
}

// ---------------------------------------------------------------- welfare

struct WelfareArgs {
  std::string fit, data, out = "welfare.json";
  double lambda = 0.0;
  std::string lambda_from;
  std::string price_alt;
  double price_delta = 0.0;
  std::string remove_alt;
  std::string truncation;
};

int cmd_welfare(const WelfareArgs& a) {
  ModelSpecFile spec;
  const FitResult fr = fit_from_document(read_json_file(a.fit), &spec);
  const DesignBatch batch = ingest_csv(a.data, spec);
  if (batch.n_coefficients != fr.beta.size())
    throw ValidationError("schema mismatch between fit and data");

  double lambda = 1.0;
  if (a.lambda > 0.0) {
    lambda = a.lambda;
  } else if (!a.lambda_from.empty()) {
    int idx = -1;
    for (int c = 0; c < static_cast<int>(batch.coef_names.size()); ++c)
      if (batch.coef_names[c] == a.lambda_from) idx = c;
    if (idx < 0)
      throw ValidationError("coefficient '" + a.lambda_from +
                            "' is not in the model");
    lambda = std::abs(fr.beta[idx]);
    if (!(lambda > 0.0))
      throw ValidationError("price coefficient is zero; cannot convert to "
                            "currency");
  }

  NeumaierSum surplus_sum;
  for (int i = 0; i < batch.n(); ++i)
    surplus_sum.add(surplus(batch.utilities(i, fr.beta), fr.family));
  const double mean_surplus = surplus_sum.value() / batch.n();

  ordered_json doc;
  doc["version"] = kVersion;
  doc["family"] = to_string(fr.family);
  doc["n"] = batch.n();
  doc["lambda"] = lambda;
  doc["mean_surplus_utils"] = mean_surplus;
  doc["mean_surplus_money"] = mean_surplus / lambda;

  if (!a.price_alt.empty()) {
    const int m = alt_index_of(batch, a.price_alt);
    NeumaierSum cv;
    int used = 0;
    for (int i = 0; i < batch.n(); ++i) {
      const UtilityVector v = batch.utilities(i, fr.beta);
      if (!v.is_available(m)) continue;
      cv.add(cv_price(v, lambda, m, a.price_delta, fr.family));
      ++used;
    }
    doc["cv_price"] = {{"alternative", a.price_alt},
                       {"delta", a.price_delta},
                       {"mean", used ? cv.value() / used : 0.0},
                       {"situations_used", used}};
  }
  if (!a.remove_alt.empty()) {
    const int k = alt_index_of(batch, a.remove_alt);
    NeumaierSum cv;
    int without = 0;
    for (int i = 0; i < batch.n(); ++i) {
      const UtilityVector v = batch.utilities(i, fr.beta);
      if (!v.is_available(k)) {
        ++without;  // nothing to lose, compensation zero
        continue;
      }
      cv.add(cv_removal(v, lambda, k, fr.family));
    }
    doc["cv_removal"] = {{"alternative", a.remove_alt},
                         {"mean", cv.value() / batch.n()},
                         {"situations_without", without}};
  }
  write_text_atomic(a.out, doc.dump(2) + "\n");
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- invert

struct InvertArgs {
  std::string target;
  std::string family = "sevi";
  std::string out;
};

int cmd_invert(const InvertArgs& a) {
  const Eigen::VectorXd raw = parse_vector(a.target, "--target");
  const ErrorFamily fam = parse_family(a.family);
  Eigen::VectorXd target = raw / raw.sum();
  Eigen::VectorXd v;
  if (fam.kind == ErrorFamily::Kind::SEVI) {
    v = invert_shares(target);
  } else if (fam.kind == ErrorFamily::Kind::LEVI) {
    for (int i = 0; i < target.size(); ++i)
      if (!(target[i] > 0.0))
        throw ValidationError("target shares must be strictly positive");
    v = (target.array() / target[target.size() - 1]).log();
  } else {
    throw ValidationError("share inversion supports sevi and levi");
  }
  const UtilityVector uv(v);
  const TruncationPolicy policy =
      TruncationPolicy::auto_for(static_cast<int>(v.size()));
  Eigen::VectorXd achieved(v.size());
  for (int j = 0; j < v.size(); ++j)
    achieved[j] = fam.kind == ErrorFamily::Kind::SEVI
                      ? prob_sevi(uv, j, policy)
                      : prob_levi(uv, j);
  ordered_json doc;
  doc["family"] = to_string(fam);
  doc["target"] = vector_json(target);
  doc["utilities"] = vector_json(v);
  doc["achieved"] = vector_json(achieved);
  doc["max_abs_error"] = (achieved - target).cwiseAbs().maxCoeff();
  if (a.out.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_text_atomic(a.out, doc.dump(2) + "\n");
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string js = "5,8,12";
  int n = 250;
  int repeats = 3;
  std::string families = "sevi,levi";
  int norm_at = 0;
  std::uint64_t seed = 99;
  unsigned threads = 0;
  std::string out = "bench.json";
  std::string csv;
};

int cmd_bench(const BenchArgs& a) {
  BenchConfig cfg;
  cfg.j_values.clear();
  for (const auto& tok : split_list(a.js)) {
    try {
      cfg.j_values.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ValidationError("cannot parse menu size '" + tok + "'");
    }
  }
  cfg.n_obs = a.n;
  cfg.repeats = a.repeats;
  cfg.families = parse_family_list(a.families);
  cfg.seed = a.seed;
  cfg.threads = a.threads;

  BenchReport report = timing_bench(cfg);
  if (a.norm_at > 0) {
    BenchConfig nc = cfg;
    nc.j_values = {a.norm_at};
    nc.families = {ErrorFamily::norm()};
    const BenchReport extra = timing_bench(nc);
    report.rows.insert(report.rows.end(), extra.rows.begin(),
                       extra.rows.end());
  }

  ordered_json doc;
  doc["version"] = kVersion;
  doc["hardware"] = report.hardware;
  ordered_json rows = ordered_json::array();
  std::map<int, std::map<std::string, double>> medians;
  for (const auto& r : report.rows) {
    ordered_json row;
    row["alternatives"] = r.n_alternatives;
    row["family"] = r.family;
    row["n"] = r.n_obs;
    row["repeats"] = r.repeats;
    row["median_seconds"] = r.median_seconds;
    row["best_seconds"] = r.best_seconds;
    row["converged"] = r.converged;
    rows.push_back(std::move(row));
    medians[r.n_alternatives][r.family] = r.median_seconds;
  }
  doc["rows"] = std::move(rows);
  ordered_json ratios = ordered_json::array();
  for (const auto& [nj, fams] : medians) {
    if (fams.count("sevi") && fams.count("levi")) {
      ordered_json r;
      r["alternatives"] = nj;
      r["sevi_over_levi"] = fams.at("sevi") / fams.at("levi");
      if (fams.count("norm"))
        r["sevi_over_norm"] = fams.at("sevi") / fams.at("norm");
      ratios.push_back(std::move(r));
    }
  }
  doc["ratios"] = std::move(ratios);
  write_text_atomic(a.out, doc.dump(2) + "\n");

  if (!a.csv.empty()) {
    std::ostringstream csv;
    csv << "alternatives,family,n,repeats,median_seconds,best_seconds,converged\n"
        << std::setprecision(10);
    for (const auto& r : report.rows)
      csv << r.n_alternatives << ',' << r.family << ',' << r.n_obs << ','
          << r.repeats << ',' << r.median_seconds << ',' << r.best_seconds
          << ',' << (r.converged ? 1 : 0) << '\n';
    write_text_atomic(a.csv, csv.str());
  }
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-choice estimation with extreme-value error kernels"};
  app.require_subcommand(1);
  std::function<int()> action;

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "estimate a model from a CSV");
  fit_cmd->add_option("--data", fa.data, "long-format CSV")->required();
  fit_cmd->add_option("--spec", fa.spec, "model spec JSON")->required();
  fit_cmd->add_option("--out", fa.out, "result JSON path");
  fit_cmd->add_option("--family", fa.family, "override the spec family");
  fit_cmd->add_option("--truncation", fa.truncation,
                      "full | maxcard=K | tol=X | auto");
  fit_cmd->add_option("--se", fa.se, "plain | sandwich | cluster");
  fit_cmd->add_option("--seed", fa.seed, "simulator seed");
  fit_cmd->add_option("--threads", fa.threads, "worker threads (0 = auto)");
  fit_cmd->add_option("--max-iter", fa.max_iter, "optimizer iteration cap");
  fit_cmd->add_flag("--estimate-rho", fa.estimate_rho,
                    "estimate the SEVI/LEVI mixing weight");
  fit_cmd->callback([&] { action = [&] { return cmd_fit(fa); }; });

  PredictArgs pa;
  auto* pred_cmd =
      app.add_subcommand("predict", "out-of-sample choice probabilities");
  pred_cmd->add_option("--fit", pa.fit, "result JSON from fit")->required();
  pred_cmd->add_option("--data", pa.data, "long-format CSV")->required();
  pred_cmd->add_option("--out", pa.out, "output CSV path");
  pred_cmd->add_option("--restrict", pa.restrict_alts,
                       "comma list of alternatives to keep available");
  pred_cmd->add_option("--shift", pa.shifts,
                       "utility shift name=delta (repeatable)");
  pred_cmd->add_option("--truncation", pa.truncation,
                       "full | maxcard=K | tol=X | auto");
  pred_cmd->add_option("--seed", pa.seed, "simulator seed");
  pred_cmd->add_option("--threads", pa.threads, "worker threads");
  pred_cmd->callback([&] { action = [&] { return cmd_predict(pa); }; });

  SimulateArgs sa;
  auto* sim_cmd =
      app.add_subcommand("simulate", "draw synthetic data or figure tables");
  sim_cmd->add_option("--figure", sa.figure, "named figure table (shares5)");
  sim_cmd->add_option("--family", sa.family, "taste-shock family");
  sim_cmd->add_option("--j", sa.j, "alternatives");
  sim_cmd->add_option("--n", sa.n, "situations");
  sim_cmd->add_option("--attr-law", sa.attr_law, "hetero | homo | fixed");
  sim_cmd->add_option("--fixed-v", sa.fixed_v, "utilities for --attr-law fixed");
  sim_cmd->add_option("--beta0", sa.beta0, "true coefficients");
  sim_cmd->add_option("--seed", sa.seed, "RNG seed");
  sim_cmd->add_option("--mc-draws", sa.mc_draws, "crude MC draws (figures)");
  sim_cmd->add_option("--ghk-draws", sa.ghk_draws, "GHK draws (figures)");
  sim_cmd->add_option("--out", sa.out, "output CSV path");
  sim_cmd->callback([&] { action = [&] { return cmd_simulate(sa); }; });

  ReplicateArgs ra;
  auto* rep_cmd =
      app.add_subcommand("replicate", "Monte Carlo replication study");
  rep_cmd->add_option("--true-family", ra.true_family, "data-generating family");
  rep_cmd->add_option("--j", ra.j, "alternatives");
  rep_cmd->add_option("--n", ra.n, "situations per replication");
  rep_cmd->add_option("--reps", ra.reps, "replications");
  rep_cmd->add_option("--attr-law", ra.attr_law, "hetero | homo");
  rep_cmd->add_option("--estimators", ra.estimators, "families to fit");
  rep_cmd->add_flag("--estimate-rho", ra.estimate_rho,
                    "also fit the free mixing weight");
  rep_cmd->add_flag("--vuong", ra.do_vuong, "per-replication Vuong statistic");
  rep_cmd->add_option("--hausman", ra.hausman,
                      "IIA test menu subset, 0-based indices");
  rep_cmd->add_option("--seed", ra.seed, "master seed");
  rep_cmd->add_option("--workers", ra.workers, "parallel replications");
  rep_cmd->add_option("--out", ra.out, "summary JSON path");
  rep_cmd->add_option("--csv", ra.csv, "optional summary CSV path");
  rep_cmd->callback([&] { action = [&] { return cmd_replicate(ra); }; });

  CompareArgs ca;
  auto* cmp_cmd =
      app.add_subcommand("compare", "fit several families and rank them");
  cmp_cmd->add_option("--data", ca.data, "long-format CSV")->required();
  cmp_cmd->add_option("--spec", ca.spec, "model spec JSON")->required();
  cmp_cmd->add_option("--families", ca.families, "comma list of families");
  cmp_cmd->add_option("--truncation", ca.truncation,
                      "full | maxcard=K | tol=X | auto");
  cmp_cmd->add_option("--seed", ca.seed, "simulator seed");
  cmp_cmd->add_option("--threads", ca.threads, "worker threads");
  cmp_cmd->add_option("--out", ca.out, "output JSON path");
  cmp_cmd->callback([&] { action = [&] { return cmd_compare(ca); }; });

  WelfareArgs wa;
  auto* wel_cmd =
      app.add_subcommand("welfare", "surplus and compensating variation");
  wel_cmd->add_option("--fit", wa.fit, "result JSON from fit")->required();
  wel_cmd->add_option("--data", wa.data, "long-format CSV")->required();
  wel_cmd->add_option("--lambda", wa.lambda, "marginal utility of income");
  wel_cmd->add_option("--lambda-from", wa.lambda_from,
                      "coefficient name; lambda = |estimate|");
  wel_cmd->add_option("--price-alt", wa.price_alt,
                      "alternative whose price changes");
  wel_cmd->add_option("--price-delta", wa.price_delta,
                      "price change in currency");
  wel_cmd->add_option("--remove", wa.remove_alt, "alternative to remove");
  wel_cmd->add_option("--truncation", wa.truncation, "kernel truncation");
  wel_cmd->add_option("--out", wa.out, "output JSON path");
  wel_cmd->callback([&] { action = [&] { return cmd_welfare(wa); }; });

  InvertArgs ia;
  auto* inv_cmd =
      app.add_subcommand("invert-shares", "utilities that reproduce shares");
  inv_cmd->add_option("--target", ia.target, "comma list of shares")
      ->required();
  inv_cmd->add_option("--family", ia.family, "sevi | levi");
  inv_cmd->add_option("--out", ia.out, "output JSON path (default stdout)");
  inv_cmd->callback([&] { action = [&] { return cmd_invert(ia); }; });

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "fit-time benchmark");
  bench_cmd->add_option("--js", ba.js, "comma list of menu sizes");
  bench_cmd->add_option("--n", ba.n, "situations");
  bench_cmd->add_option("--repeats", ba.repeats, "timing repeats");
  bench_cmd->add_option("--families", ba.families, "families to time");
  bench_cmd->add_option("--norm-at", ba.norm_at,
                        "also time the NORM family at this menu size");
  bench_cmd->add_option("--seed", ba.seed, "data seed");
  bench_cmd->add_option("--threads", ba.threads, "worker threads");
  bench_cmd->add_option("--out", ba.out, "output JSON path");
  bench_cmd->add_option("--csv", ba.csv, "optional CSV path");
  bench_cmd->callback([&] { action = [&] { return cmd_bench(ba); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    return action ? action() : 2;
  } catch (const IdentificationError& e) {
    emit_error("identification", e.what());
    return 2;
  } catch (const CapacityError& e) {
    emit_error("capacity", e.what());
    return 2;
  } catch (const ValidationError& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const ConvergenceError& e) {
    emit_error("convergence", e.what());
    return 3;
  } catch (const NumericError& e) {
    emit_error("numeric", e.what());
    return 4;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 4;
  }
}
