#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sevi/choice.hpp"
#include "sevi/data.hpp"
#include "sevi/estimate.hpp"
#include "sevi/io.hpp"
#include "sevi/simlab.hpp"
#include "sevi/welfare.hpp"

namespace py = pybind11;
using namespace sevi;

namespace {

TruncationPolicy policy_for(const std::string& text, int n) {
  if (text.empty() || text == "auto") return TruncationPolicy::auto_for(n);
  return parse_truncation(text);
}

UtilityVector make_uv(const Eigen::VectorXd& v,
                      std::optional<std::uint64_t> available) {
  if (available) return UtilityVector(v, *available);
  return UtilityVector(v);
}

DesignBatch batch_from_arrays(const std::vector<Eigen::MatrixXd>& x,
                              const std::vector<int>& chosen) {
  if (x.empty()) throw ValidationError("x is empty");
  if (x.size() != chosen.size())
    throw ValidationError("x and chosen have different lengths");
  DesignBatch batch;
  batch.n_alternatives = static_cast<int>(x[0].rows());
  batch.n_coefficients = static_cast<int>(x[0].cols());
  for (int j = 0; j < batch.n_alternatives; ++j)
    batch.alt_names.push_back("alt" + std::to_string(j + 1));
  for (int c = 0; c < batch.n_coefficients; ++c)
    batch.coef_names.push_back("x" + std::to_string(c + 1));
  const std::uint64_t full =
      batch.n_alternatives >= 64
          ? ~std::uint64_t{0}
          : (std::uint64_t{1} << batch.n_alternatives) - 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ChoiceSituation s;
    s.id = static_cast<std::int64_t>(i);
    s.x = x[i];
    s.chosen = chosen[i];
    s.available = full;
    batch.obs.push_back(std::move(s));
  }
  batch.validate();
  return batch;
}

py::dict fit_to_dict(const FitResult& fr) {
  py::dict out;
  out["beta"] = fr.beta;
  out["nll"] = fr.nll;
  out["converged"] = fr.converged;
  out["iterations"] = fr.iterations;
  out["stop_reason"] = fr.stop_reason;
  if (fr.vcov.rows() > 0) {
    Eigen::VectorXd se = fr.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
    out["se"] = se;
  } else {
    out["se"] = py::none();
  }
  if (fr.rho_estimated) {
    out["rho"] = fr.rho;
    out["rho_se"] = fr.rho_se;
    out["rho_boundary"] = fr.rho_boundary;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "discrete-choice kernels with extreme-value taste shocks";
  m.attr("__version__") = kVersion;

  m.def(
      "prob_sevi",
      [](const Eigen::VectorXd& v, int j, const std::string& truncation,
         std::optional<std::uint64_t> available) {
        const UtilityVector uv = make_uv(v, available);
        return prob_sevi(uv, j, policy_for(truncation, uv.n_available()));
      },
      py::arg("v"), py::arg("j"), py::arg("truncation") = "auto",
      py::arg("available") = py::none(),
      "choice probability under smallest-extreme-value taste shocks");

  m.def(
      "prob_levi",
      [](const Eigen::VectorXd& v, int j,
         std::optional<std::uint64_t> available) {
        return prob_levi(make_uv(v, available), j);
      },
      py::arg("v"), py::arg("j"), py::arg("available") = py::none(),
      "classical conditional-logit probability");

  m.def(
      "prob_all",
      [](const Eigen::VectorXd& v, const std::string& family,
         const std::string& truncation, std::optional<std::uint64_t> available,
         int draws, std::uint64_t seed) {
        const UtilityVector uv = make_uv(v, available);
        GhkConfig cfg;
        cfg.draws = draws;
        cfg.seed = seed;
        return prob_all(uv, parse_family(family),
                        policy_for(truncation, uv.n_available()), cfg);
      },
      py::arg("v"), py::arg("family") = "sevi", py::arg("truncation") = "auto",
      py::arg("available") = py::none(), py::arg("draws") = 500,
      py::arg("seed") = 1,
      "probabilities for every alternative (zeros where unavailable)");

  m.def(
      "surplus",
      [](const Eigen::VectorXd& v, const std::string& family) {
        return surplus(UtilityVector(v), parse_family(family));
      },
      py::arg("v"), py::arg("family") = "sevi",
      "expected maximum utility of the menu");

  m.def(
      "cv_price",
      [](const Eigen::VectorXd& v, double lambda, int m, double delta,
         const std::string& family) {
        return cv_price(UtilityVector(v), lambda, m, delta,
                        parse_family(family));
      },
      py::arg("v"), py::arg("lambda_"), py::arg("m"), py::arg("delta"),
      py::arg("family") = "sevi",
      "compensating variation for a price change on alternative m");

  m.def(
      "cv_removal",
      [](const Eigen::VectorXd& v, double lambda, int k,
         const std::string& family) {
        return cv_removal(UtilityVector(v), lambda, k, parse_family(family));
      },
      py::arg("v"), py::arg("lambda_"), py::arg("k"),
      py::arg("family") = "sevi",
      "compensating variation for removing alternative k");

  m.def("invert_shares", &invert_shares, py::arg("target"),
        "utilities (last pinned to zero) whose SEVI shares match target");

  m.def(
      "fit",
      [](const std::vector<Eigen::MatrixXd>& x, const std::vector<int>& chosen,
         const std::string& family, const std::string& truncation,
         bool estimate_rho, int max_iter, unsigned threads) {
        const DesignBatch batch = batch_from_arrays(x, chosen);
        FitOptions opts;
        if (!truncation.empty() && truncation != "auto")
          opts.policy = parse_truncation(truncation);
        opts.max_iter = max_iter;
        opts.threads = threads;
        const FitResult fr = estimate_rho
                                 ? fit_mixed(batch, opts)
                                 : fit(batch, parse_family(family), opts);
        return fit_to_dict(fr);
      },
      py::arg("x"), py::arg("chosen"), py::arg("family") = "sevi",
      py::arg("truncation") = "auto", py::arg("estimate_rho") = false,
      py::arg("max_iter") = 200, py::arg("threads") = 0,
      "maximum-likelihood fit; x is a sequence of (J, L) design matrices");

  m.def(
      "generate",
      [](int j, int n, const std::string& family, const std::string& law,
         std::uint64_t seed, std::optional<Eigen::VectorXd> beta0) {
        DgpSpec spec;
        spec.n_alternatives = j;
        spec.n_obs = n;
        spec.family = parse_family(family);
        spec.seed = seed;
        if (law == "hetero")
          spec.attr_law = DgpSpec::AttrLaw::Heteroskedastic;
        else if (law == "homo")
          spec.attr_law = DgpSpec::AttrLaw::Homoskedastic;
        else
          throw ValidationError("law must be hetero or homo");
        if (beta0) spec.beta0 = *beta0;
        const DesignBatch batch = generate(spec);
        std::vector<Eigen::MatrixXd> xs;
        std::vector<int> chosen;
        for (const auto& s : batch.obs) {
          xs.push_back(s.x);
          chosen.push_back(s.chosen);
        }
        py::dict out;
        out["x"] = xs;
        out["chosen"] = chosen;
        out["beta0"] = spec.effective_beta0();
        return out;
      },
      py::arg("j") = 5, py::arg("n") = 500, py::arg("family") = "sevi",
      py::arg("law") = "hetero", py::arg("seed") = 1,
      py::arg("beta0") = py::none(),
      "synthetic dataset drawn from a known random-utility process");
}
