#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "sevi/errors.hpp"
#include "sevi/estimate.hpp"
#include "sevi/io.hpp"
#include "sevi/simlab.hpp"

using namespace sevi;
using nlohmann::json;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& text)
      : path("io_test_" + name) {
    std::ofstream out(path, std::ios::binary);
    out << text;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

const char* kFishingCsv =
    "situation_id,alternative_id,chosen,price,catch,income\n"
    "1,beach,0,15.1,0.25,42.1\n"
    "1,boat,1,42.0,0.16,42.1\n"
    "1,charter,0,58.9,0.54,42.1\n"
    "1,pier,0,15.1,0.05,42.1\n"
    "2,beach,0,21.7,0.25,31.8\n"
    "2,boat,0,65.3,0.13,31.8\n"
    "2,charter,1,71.0,0.65,31.8\n"
    "2,pier,0,21.7,0.09,31.8\n"
    "3,beach,1,12.0,0.31,55.0\n"
    "3,boat,0,38.4,0.22,55.0\n"
    "3,charter,0,52.1,0.41,55.0\n"
    "3,pier,0,12.0,0.11,55.0\n";

// availability masks, clusters, and a missing covariate on an unavailable row
const char* kMaskedCsv =
    "situation_id,alternative_id,chosen,available,cluster_id,cost,time\n"
    "10,bus,1,1,3,1.2,20\n"
    "10,car,0,1,3,3.4,11\n"
    "10,walk,0,0,3,NA,55\n"
    "11,bus,0,1,3,1.1,25\n"
    "11,car,1,1,3,2.9,10\n"
    "11,walk,0,1,3,0.0,60\n"
    "12,bus,0,1,4,1.4,22\n"
    "12,car,1,1,4,3.1,12\n"
    "12,walk,0,1,4,0.0,49\n";

}  // namespace

TEST_SUITE("io") {

TEST_CASE("long csv parsing tracks order, types, and line numbers") {
  TempFile f("fishing.csv", kFishingCsv);
  const LongTable t = read_long_csv(f.path);
  CHECK(t.covariates == std::vector<std::string>{"price", "catch", "income"});
  CHECK(t.alternatives ==
        std::vector<std::string>{"beach", "boat", "charter", "pier"});
  REQUIRE(t.rows.size() == 12);
  CHECK(t.rows[0].situation == 1);
  CHECK(t.rows[1].chosen);
  CHECK_FALSE(t.rows[0].chosen);
  CHECK(t.rows[1].alt == 1);
  CHECK(t.rows[1].covs[0] == doctest::Approx(42.0));
  CHECK(t.rows[0].line == 2);
}

TEST_CASE("csv quoting, missing tokens, and defaults") {
  TempFile f("quoted.csv",
             "situation_id,alternative_id,chosen,available,\"z\"\n"
             "1,\"a,b\",1,1,0.5\n"
             "1,c,0,0,NaN\n");
  const LongTable t = read_long_csv(f.path);
  CHECK(t.alternatives == std::vector<std::string>{"a,b", "c"});
  CHECK(t.covariates == std::vector<std::string>{"z"});
  CHECK(t.rows[1].missing[0]);
  CHECK_FALSE(t.rows[0].missing[0]);
  CHECK(t.rows[0].cluster == 1);  // defaults to the situation id
}

TEST_CASE("malformed tables fail with the offending line") {
  TempFile dup("dup.csv",
               "situation_id,alternative_id,chosen\n"
               "1,a,1\n1,b,0\n1,a,0\n");
  CHECK_THROWS_WITH_AS((void)read_long_csv(dup.path),
                       doctest::Contains("line 4"), ValidationError);

  TempFile miss("missing.csv",
                "situation_id,alternative_id,chosen,x\n"
                "1,a,1,0.5\n1,b,0,NA\n");
  CHECK_THROWS_AS((void)read_long_csv(miss.path), ValidationError);

  TempFile bad("badnum.csv",
               "situation_id,alternative_id,chosen,x\n"
               "1,a,1,0.5\n1,b,zap,0.2\n");
  CHECK_THROWS_WITH_AS((void)read_long_csv(bad.path),
                       doctest::Contains("line 3"), ValidationError);

  TempFile nohdr("nohdr.csv", "id,alt,pick\n1,a,1\n");
  CHECK_THROWS_AS((void)read_long_csv(nohdr.path), ValidationError);
}

TEST_CASE("model specs round trip through json") {
  json doc = json::parse(R"({
    "generic": ["price", "catch"],
    "alt_specific_constants": true,
    "base_alternative": "beach",
    "case_specific": ["income"],
    "family": "sevi",
    "direction": "maximize",
    "truncation": "auto",
    "se": "plain"
  })");
  const ModelSpecFile spec = spec_from_json(doc);
  CHECK(spec.generic == std::vector<std::string>{"price", "catch"});
  CHECK(spec.alt_specific_constants);
  CHECK(spec.base_alternative == "beach");
  CHECK_FALSE(spec.minimize);
  CHECK_FALSE(spec.truncation.has_value());
  const ModelSpecFile again = spec_from_json(spec_to_json(spec));
  CHECK(spec_to_json(again) == spec_to_json(spec));

  doc["surprise"] = 1;
  CHECK_THROWS_AS((void)spec_from_json(doc), ValidationError);
}

TEST_CASE("dummy expansion covers the documented column order") {
  TempFile f("fishing.csv", kFishingCsv);
  ModelSpecFile spec;
  spec.generic = {"price", "catch"};
  spec.alt_specific_constants = true;
  spec.base_alternative = "beach";
  spec.case_specific = {"income"};
  const DesignBatch batch = ingest_csv(f.path, spec);
  CHECK(batch.n() == 3);
  CHECK(batch.n_alternatives == 4);
  const std::vector<std::string> expect = {
      "price",          "catch",          "asc:boat",
      "asc:charter",    "asc:pier",       "income:boat",
      "income:charter", "income:pier"};
  CHECK(batch.coef_names == expect);
  const auto& s = batch.obs[0];
  CHECK(s.x(1, 0) == doctest::Approx(42.0));   // boat price
  CHECK(s.x(2, 3) == doctest::Approx(1.0));    // charter asc
  CHECK(s.x(0, 2) == doctest::Approx(0.0));    // base has no asc
  CHECK(s.x(1, 5) == doctest::Approx(42.1));   // income enters boat slot
  CHECK(s.x(0, 5) == doctest::Approx(0.0));
  CHECK(s.chosen == 1);
}

TEST_CASE("alternative-varying coefficients span every alternative") {
  TempFile f("masked.csv", kMaskedCsv);
  ModelSpecFile spec;
  spec.generic = {"cost"};
  spec.alt_varying_altcoef = {"time"};
  const DesignBatch batch = ingest_csv(f.path, spec);
  const std::vector<std::string> expect = {"cost", "time@bus", "time@car",
                                           "time@walk"};
  CHECK(batch.coef_names == expect);
  const auto& s0 = batch.obs[0];
  CHECK(s0.x(0, 1) == doctest::Approx(20.0));
  CHECK(s0.x(1, 1) == doctest::Approx(0.0));
  CHECK(s0.x(1, 2) == doctest::Approx(11.0));
  CHECK(s0.available == 0b011);             // walk off the menu
  CHECK(s0.x(2, 0) == doctest::Approx(0.0));  // missing cost zeroed
  CHECK(batch.obs[0].cluster == 3);
  CHECK(batch.obs[2].cluster == 4);
}

TEST_CASE("cost minimization flips the design sign") {
  TempFile f("masked.csv", kMaskedCsv);
  ModelSpecFile spec;
  spec.generic = {"cost", "time"};
  const DesignBatch maxed = ingest_csv(f.path, spec);
  spec.minimize = true;
  const DesignBatch minned = ingest_csv(f.path, spec);
  for (int i = 0; i < maxed.n(); ++i)
    CHECK((maxed.obs[i].x + minned.obs[i].x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("per-situation integrity checks") {
  ModelSpecFile spec;
  spec.generic = {"x"};
  auto run = [&](const char* body) {
    TempFile f("integrity.csv",
               std::string("situation_id,alternative_id,chosen,available,x\n") +
                   body);
    return ingest_csv(f.path, spec);
  };
  CHECK_THROWS_AS((void)run("1,a,1,0,0.1\n1,b,0,1,0.2\n1,c,0,1,0.3\n"),
                  ValidationError);  // chosen but unavailable
  CHECK_THROWS_AS((void)run("1,a,1,1,0.1\n1,b,1,1,0.2\n"),
                  ValidationError);  // two chosen
  CHECK_THROWS_AS((void)run("1,a,0,1,0.1\n1,b,0,1,0.2\n"),
                  ValidationError);  // none chosen
  CHECK_THROWS_AS((void)run("1,a,1,1,0.1\n1,b,0,0,0.2\n"),
                  ValidationError);  // menu of one
  CHECK_THROWS_AS((void)run("1,a,1,1,\n1,b,0,1,0.2\n"),
                  ValidationError);  // missing on an available row
}

TEST_CASE("inconsistent clusters within a situation are rejected") {
  TempFile f("badcluster.csv",
             "situation_id,alternative_id,chosen,cluster_id,x\n"
             "1,a,1,7,0.1\n"
             "1,b,0,8,0.2\n");
  ModelSpecFile spec;
  spec.generic = {"x"};
  CHECK_THROWS_AS((void)ingest_csv(f.path, spec), ValidationError);
}

TEST_CASE("generated data survives a csv round trip") {
  DgpSpec dgp;
  dgp.n_alternatives = 4;
  dgp.n_obs = 50;
  dgp.seed = 91;
  const DesignBatch batch = generate(dgp);
  TempFile f("roundtrip.csv", batch_to_csv(batch));
  ModelSpecFile spec;
  spec.generic = batch.coef_names;
  const DesignBatch back = ingest_csv(f.path, spec);
  CHECK(back.fingerprint() == batch.fingerprint());
}

TEST_CASE("fit documents round trip the estimate") {
  DgpSpec dgp;
  dgp.n_alternatives = 3;
  dgp.n_obs = 250;
  dgp.seed = 92;
  const DesignBatch batch = generate(dgp);
  const FitResult fr = fit(batch, ErrorFamily::sevi());
  ModelSpecFile spec;
  spec.generic = batch.coef_names;
  const auto doc =
      fit_result_document(fr, batch, spec, 5, fr.vcov, SeKind::Plain);
  CHECK(doc["version"] == kVersion);
  CHECK(doc["data"]["n"] == 250);
  CHECK(doc["coefficients"].size() == 3);

  ModelSpecFile spec_back;
  const FitResult back = fit_from_document(doc, &spec_back);
  CHECK(back.family.kind == ErrorFamily::Kind::SEVI);
  CHECK((back.beta - fr.beta).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(back.nll == doctest::Approx(fr.nll).epsilon(1e-12));
  CHECK(back.data_fingerprint == fr.data_fingerprint);
  CHECK(back.n_params == 3);
  CHECK(spec_back.generic == spec.generic);

  // the mixing-weight block survives too
  const FitResult fm = fit_mixed(batch);
  const auto mdoc =
      fit_result_document(fm, batch, spec, 5, Eigen::MatrixXd(), SeKind::Plain);
  ModelSpecFile ignore;
  const FitResult mback = fit_from_document(mdoc, &ignore);
  CHECK(mback.rho_estimated);
  CHECK(mback.rho == doctest::Approx(fm.rho).epsilon(1e-12));
  CHECK(mback.n_params == 4);
}

TEST_CASE("atomic writes leave no temporary behind") {
  const std::string path = "io_test_atomic.json";
  write_text_atomic(path, "{\"ok\": true}\n");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "{\"ok\": true}");
  std::ifstream tmp(path + ".tmp");
  CHECK_FALSE(tmp.good());
  std::remove(path.c_str());
}

TEST_CASE("fingerprints format as fixed-width hex") {
  CHECK(fingerprint_hex(0).size() == 16);
  CHECK(fingerprint_hex(0xdeadbeef).size() == 16);
  CHECK(fingerprint_hex(0xdeadbeef) == "00000000deadbeef");
}

}  // TEST_SUITE
