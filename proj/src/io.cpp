#include "sevi/io.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "sevi/errors.hpp"

namespace sevi {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> split_csv_line(const std::string& line, int lineno) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      if (!field.empty())
        throw ValidationError("line " + std::to_string(lineno) +
                              ": stray quote inside unquoted field");
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted)
    throw ValidationError("line " + std::to_string(lineno) +
                          ": unterminated quoted field");
  out.push_back(std::move(field));
  return out;
}

bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" ||
         s == ".";
}

std::int64_t parse_int64(const std::string& s, const std::string& what,
                         int lineno) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end == s.c_str() || *end != '\0')
    throw ValidationError("line " + std::to_string(lineno) + ": cannot parse " +
                          what + " '" + s + "' as an integer");
  return v;
}

double parse_real(const std::string& s, const std::string& what, int lineno) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (errno == ERANGE || end == s.c_str() || *end != '\0')
    throw ValidationError("line " + std::to_string(lineno) + ": cannot parse " +
                          what + " '" + s + "' as a number");
  return v;
}

bool parse_flag01(const std::string& s, const std::string& what, int lineno) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw ValidationError("line " + std::to_string(lineno) + ": column " + what +
                        " must be 0 or 1, got '" + s + "'");
}

void expect_string_array(const json& v, const std::string& key) {
  if (!v.is_array())
    throw ValidationError("model spec key '" + key +
                          "' must be an array of column names");
  for (const auto& e : v)
    if (!e.is_string())
      throw ValidationError("model spec key '" + key +
                            "' must contain only strings");
}

void no_duplicates(const std::vector<std::string>& names,
                   const std::string& key) {
  std::set<std::string> seen;
  for (const auto& n : names)
    if (!seen.insert(n).second)
      throw ValidationError("model spec lists column '" + n + "' twice under '" +
                            key + "'");
}

double json_real(const json& v, const std::string& what) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number())
    throw ValidationError("result document field " + what + " is not numeric");
  return v.get<double>();
}

}  // namespace

LongTable read_long_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line))
    throw ValidationError("data file '" + path + "' is empty");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line, lineno);

  int col_sit = -1, col_alt = -1, col_chosen = -1, col_avail = -1,
      col_cluster = -1;
  std::vector<int> cov_cols;
  LongTable table;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string& h = header[c];
    if (h == "situation_id")
      col_sit = c;
    else if (h == "alternative_id")
      col_alt = c;
    else if (h == "chosen")
      col_chosen = c;
    else if (h == "available")
      col_avail = c;
    else if (h == "cluster_id")
      col_cluster = c;
    else {
      cov_cols.push_back(c);
      table.covariates.push_back(h);
    }
  }
  if (col_sit < 0 || col_alt < 0 || col_chosen < 0)
    throw ValidationError(
        "data file needs situation_id, alternative_id and chosen columns");

  std::unordered_map<std::string, int> alt_index;
  std::set<std::pair<std::int64_t, int>> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line, lineno);
    if (fields.size() != header.size())
      throw ValidationError("line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    LongTable::Row row;
    row.line = lineno;
    row.situation = parse_int64(fields[col_sit], "situation_id", lineno);
    const std::string& alt_token = fields[col_alt];
    if (alt_token.empty())
      throw ValidationError("line " + std::to_string(lineno) +
                            ": empty alternative_id");
    auto it = alt_index.find(alt_token);
    if (it == alt_index.end()) {
      it = alt_index.emplace(alt_token,
                             static_cast<int>(table.alternatives.size()))
               .first;
      table.alternatives.push_back(alt_token);
    }
    row.alt = it->second;
    row.chosen = parse_flag01(fields[col_chosen], "chosen", lineno);
    row.available =
        col_avail < 0 ? true : parse_flag01(fields[col_avail], "available", lineno);
    row.cluster = col_cluster < 0
                      ? row.situation
                      : parse_int64(fields[col_cluster], "cluster_id", lineno);
    if (!seen.emplace(row.situation, row.alt).second)
      throw ValidationError("line " + std::to_string(lineno) + ": situation " +
                            std::to_string(row.situation) +
                            " lists alternative '" + alt_token + "' twice");
    row.covs.resize(cov_cols.size());
    row.missing.resize(cov_cols.size());
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      const std::string& cell = fields[cov_cols[k]];
      if (is_missing_token(cell)) {
        if (row.available)
          throw ValidationError("line " + std::to_string(lineno) +
                                ": missing value in column '" +
                                table.covariates[k] +
                                "' on an available alternative");
        row.covs[k] = 0.0;
        row.missing[k] = true;
      } else {
        row.covs[k] = parse_real(cell, "column '" + table.covariates[k] + "'",
                                 lineno);
        row.missing[k] = false;
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty())
    throw ValidationError("data file '" + path + "' has no data rows");
  return table;
}

ModelSpecFile spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object())
    throw ValidationError("model spec must be a JSON object");
  static const std::set<std::string> known = {
      "generic",        "alt_specific_constants",
      "base_alternative", "case_specific",
      "alt_varying_altcoef", "family",
      "direction",      "truncation",
      "se"};
  for (const auto& item : doc.items())
    if (!known.count(item.key()))
      throw ValidationError("unknown model spec key '" + item.key() + "'");

  ModelSpecFile spec;
  if (doc.contains("generic")) {
    expect_string_array(doc["generic"], "generic");
    spec.generic = doc["generic"].get<std::vector<std::string>>();
    no_duplicates(spec.generic, "generic");
  }
  if (doc.contains("alt_specific_constants")) {
    if (!doc["alt_specific_constants"].is_boolean())
      throw ValidationError("'alt_specific_constants' must be true or false");
    spec.alt_specific_constants = doc["alt_specific_constants"].get<bool>();
  }
  if (doc.contains("base_alternative")) {
    if (!doc["base_alternative"].is_string())
      throw ValidationError("'base_alternative' must be a string");
    spec.base_alternative = doc["base_alternative"].get<std::string>();
  }
  if (doc.contains("case_specific")) {
    expect_string_array(doc["case_specific"], "case_specific");
    spec.case_specific = doc["case_specific"].get<std::vector<std::string>>();
    no_duplicates(spec.case_specific, "case_specific");
  }
  if (doc.contains("alt_varying_altcoef")) {
    expect_string_array(doc["alt_varying_altcoef"], "alt_varying_altcoef");
    spec.alt_varying_altcoef =
        doc["alt_varying_altcoef"].get<std::vector<std::string>>();
    no_duplicates(spec.alt_varying_altcoef, "alt_varying_altcoef");
  }
  if (doc.contains("family")) {
    if (!doc["family"].is_string())
      throw ValidationError("'family' must be a string");
    spec.family = parse_family(doc["family"].get<std::string>());
  }
  if (doc.contains("direction")) {
    if (!doc["direction"].is_string())
      throw ValidationError("'direction' must be a string");
    const std::string d = doc["direction"].get<std::string>();
    if (d == "maximize")
      spec.minimize = false;
    else if (d == "minimize")
      spec.minimize = true;
    else
      throw ValidationError("'direction' must be maximize or minimize");
  }
  if (doc.contains("truncation")) {
    if (!doc["truncation"].is_string())
      throw ValidationError("'truncation' must be a string");
    const std::string t = doc["truncation"].get<std::string>();
    if (t != "auto") spec.truncation = parse_truncation(t);
  }
  if (doc.contains("se")) {
    if (!doc["se"].is_string()) throw ValidationError("'se' must be a string");
    spec.se = parse_se(doc["se"].get<std::string>());
  }
  return spec;
}

ModelSpecFile read_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model spec '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("model spec '" + path + "' is not valid JSON: " +
                          e.what());
  }
  return spec_from_json(doc);
}

nlohmann::ordered_json spec_to_json(const ModelSpecFile& spec) {
  ordered_json doc;
  doc["generic"] = spec.generic;
  doc["alt_specific_constants"] = spec.alt_specific_constants;
  doc["base_alternative"] = spec.base_alternative;
  doc["case_specific"] = spec.case_specific;
  doc["alt_varying_altcoef"] = spec.alt_varying_altcoef;
  doc["family"] = to_string(spec.family);
  doc["direction"] = spec.minimize ? "minimize" : "maximize";
  doc["truncation"] =
      spec.truncation ? spec.truncation->describe() : std::string("auto");
  doc["se"] = to_string(spec.se);
  return doc;
}

DesignBatch ingest(const LongTable& table, const ModelSpecFile& spec) {
  const int nj = static_cast<int>(table.alternatives.size());
  if (nj < 2)
    throw ValidationError("data describes fewer than two alternatives");
  if (nj > 63)
    throw CapacityError("data describes " + std::to_string(nj) +
                        " alternatives; the enumeration universe caps at 63");

  std::unordered_map<std::string, int> cov_index;
  for (int k = 0; k < static_cast<int>(table.covariates.size()); ++k)
    cov_index.emplace(table.covariates[k], k);
  const auto col_of = [&](const std::string& name) {
    const auto it = cov_index.find(name);
    if (it == cov_index.end())
      throw ValidationError("model spec references column '" + name +
                            "' which is not in the data");
    return it->second;
  };

  const bool needs_base =
      spec.alt_specific_constants || !spec.case_specific.empty();
  int base = -1;
  if (!spec.base_alternative.empty() || needs_base) {
    if (spec.base_alternative.empty())
      throw ValidationError(
          "model spec needs a base_alternative for constants or "
          "case-specific columns");
    const auto it = std::find(table.alternatives.begin(),
                              table.alternatives.end(), spec.base_alternative);
    if (it == table.alternatives.end())
      throw ValidationError("base alternative '" + spec.base_alternative +
                            "' does not appear in the data");
    base = static_cast<int>(it - table.alternatives.begin());
  }

  // design columns: generic, ASCs, case-specific dummies, varying-coefficient
  struct Column {
    enum class Kind { Generic, Asc, Case, Varying } kind;
    int cov = -1;
    int alt = -1;
  };
  std::vector<Column> cols;
  DesignBatch batch;
  for (const auto& name : spec.generic) {
    cols.push_back({Column::Kind::Generic, col_of(name), -1});
    batch.coef_names.push_back(name);
  }
  if (spec.alt_specific_constants)
    for (int a = 0; a < nj; ++a) {
      if (a == base) continue;
      cols.push_back({Column::Kind::Asc, -1, a});
      batch.coef_names.push_back("asc:" + table.alternatives[a]);
    }
  for (const auto& name : spec.case_specific) {
    const int cov = col_of(name);
    for (int a = 0; a < nj; ++a) {
      if (a == base) continue;
      cols.push_back({Column::Kind::Case, cov, a});
      batch.coef_names.push_back(name + ":" + table.alternatives[a]);
    }
  }
  for (const auto& name : spec.alt_varying_altcoef) {
    const int cov = col_of(name);
    for (int a = 0; a < nj; ++a) {
      cols.push_back({Column::Kind::Varying, cov, a});
      batch.coef_names.push_back(name + "@" + table.alternatives[a]);
    }
  }
  const int nl = static_cast<int>(cols.size());
  if (nl == 0)
    throw ValidationError("model spec produces no coefficients");

  batch.n_alternatives = nj;
  batch.n_coefficients = nl;
  batch.alt_names = table.alternatives;

  // group rows by situation in first-appearance order
  std::vector<std::int64_t> order;
  std::unordered_map<std::int64_t, std::vector<const LongTable::Row*>> groups;
  for (const auto& row : table.rows) {
    auto [it, fresh] = groups.try_emplace(row.situation);
    if (fresh) order.push_back(row.situation);
    it->second.push_back(&row);
  }

  for (const std::int64_t sid : order) {
    const auto& rows = groups[sid];
    const std::string tag = "situation " + std::to_string(sid);
    ChoiceSituation s;
    s.id = sid;
    s.cluster = rows.front()->cluster;
    s.x = Eigen::MatrixXd::Zero(nj, nl);
    int chosen_alt = -1;
    const LongTable::Row* per_alt[64] = {nullptr};
    for (const auto* row : rows) {
      if (row->cluster != s.cluster)
        throw ValidationError(tag + ": inconsistent cluster_id across rows");
      per_alt[row->alt] = row;
      if (row->available) s.available |= std::uint64_t{1} << row->alt;
      if (row->chosen) {
        if (!row->available)
          throw ValidationError(tag +
                                ": chosen alternative is marked unavailable");
        if (chosen_alt >= 0)
          throw ValidationError(tag + ": more than one chosen alternative");
        chosen_alt = row->alt;
      }
    }
    if (chosen_alt < 0)
      throw ValidationError(tag + ": no chosen alternative");
    if (std::popcount(s.available) < 2)
      throw ValidationError(tag + ": fewer than two available alternatives");
    s.chosen = chosen_alt;

    // case-specific values come from the first available row
    const LongTable::Row* case_row = nullptr;
    for (const auto* row : rows)
      if (row->available) {
        case_row = row;
        break;
      }
    for (int c = 0; c < nl; ++c) {
      const Column& col = cols[c];
      switch (col.kind) {
        case Column::Kind::Generic:
          for (int a = 0; a < nj; ++a)
            if (per_alt[a] && !per_alt[a]->missing[col.cov])
              s.x(a, c) = per_alt[a]->covs[col.cov];
          break;
        case Column::Kind::Asc:
          s.x(col.alt, c) = 1.0;
          break;
        case Column::Kind::Case:
          if (case_row->missing[col.cov])
            throw ValidationError(tag + ": case-specific column '" +
                                  table.covariates[col.cov] +
                                  "' missing on the reference row");
          s.x(col.alt, c) = case_row->covs[col.cov];
          break;
        case Column::Kind::Varying:
          if (per_alt[col.alt] && !per_alt[col.alt]->missing[col.cov])
            s.x(col.alt, c) = per_alt[col.alt]->covs[col.cov];
          break;
      }
    }
    if (spec.minimize) s.x = -s.x;
    batch.obs.push_back(std::move(s));
  }
  batch.validate();
  return batch;
}

DesignBatch ingest_csv(const std::string& path, const ModelSpecFile& spec) {
  return ingest(read_long_csv(path), spec);
}

std::string batch_to_csv(const DesignBatch& batch) {
  std::ostringstream out;
  out << "situation_id,alternative_id,chosen,available,cluster_id";
  for (const auto& name : batch.coef_names) out << ',' << name;
  out << '\n';
  out << std::setprecision(17);
  for (const auto& s : batch.obs) {
    for (int j = 0; j < batch.n_alternatives; ++j) {
      const bool avail = (s.available >> j) & 1u;
      out << s.id << ',' << batch.alt_names[j] << ','
          << (j == s.chosen ? 1 : 0) << ',' << (avail ? 1 : 0) << ','
          << s.cluster;
      for (int c = 0; c < batch.n_coefficients; ++c) out << ',' << s.x(j, c);
      out << '\n';
    }
  }
  return out.str();
}

std::string fingerprint_hex(std::uint64_t fp) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fp;
  return out.str();
}

nlohmann::ordered_json fit_result_document(const FitResult& fit,
                                           const DesignBatch& batch,
                                           const ModelSpecFile& spec,
                                           std::uint64_t seed,
                                           const Eigen::MatrixXd& vcov_used,
                                           SeKind se_kind) {
  ordered_json doc;
  doc["version"] = kVersion;
  doc["seed"] = seed;
  doc["family"] = to_string(fit.family);
  doc["truncation"] = fit.policy.describe();
  doc["se_kind"] = to_string(se_kind);
  doc["data"] = {{"n", fit.n_obs},
                 {"alternatives", batch.n_alternatives},
                 {"coefficients", batch.n_coefficients},
                 {"fingerprint", fingerprint_hex(fit.data_fingerprint)}};
  doc["model"] = spec_to_json(spec);

  ordered_json coefs = ordered_json::array();
  const int nl = static_cast<int>(fit.beta.size());
  for (int c = 0; c < nl; ++c) {
    ordered_json entry;
    entry["name"] = c < static_cast<int>(batch.coef_names.size())
                        ? batch.coef_names[c]
                        : "b" + std::to_string(c);
    entry["estimate"] = fit.beta[c];
    if (vcov_used.rows() > c && vcov_used(c, c) > 0.0)
      entry["se"] = std::sqrt(vcov_used(c, c));
    else
      entry["se"] = nullptr;
    coefs.push_back(std::move(entry));
  }
  doc["coefficients"] = std::move(coefs);

  if (fit.rho_estimated) {
    ordered_json rho;
    rho["estimate"] = fit.rho;
    rho["theta"] = fit.theta;
    if (std::isfinite(fit.rho_se))
      rho["se"] = fit.rho_se;
    else
      rho["se"] = nullptr;
    rho["boundary"] = fit.rho_boundary;
    doc["rho"] = std::move(rho);
  }

  doc["nll"] = fit.nll;
  doc["aic"] = 2.0 * fit.nll + 2.0 * fit.n_params;
  doc["bic"] =
      2.0 * fit.nll + fit.n_params * std::log(static_cast<double>(fit.n_obs));
  if (vcov_used.rows() > 0) {
    ordered_json vc = ordered_json::array();
    for (int r = 0; r < vcov_used.rows(); ++r) {
      ordered_json rowj = ordered_json::array();
      for (int c = 0; c < vcov_used.cols(); ++c) rowj.push_back(vcov_used(r, c));
      vc.push_back(std::move(rowj));
    }
    doc["vcov"] = std::move(vc);
  } else {
    doc["vcov"] = nullptr;
  }
  doc["convergence"] = {{"converged", fit.converged},
                        {"iterations", fit.iterations},
                        {"grad_norm", fit.grad_norm},
                        {"stop_reason", fit.stop_reason},
                        {"floored", fit.floored}};
  return doc;
}

FitResult fit_from_document(const nlohmann::json& doc,
                            ModelSpecFile* spec_out) {
  if (!doc.is_object() || !doc.contains("coefficients") ||
      !doc.contains("family"))
    throw ValidationError("fit document is missing coefficients or family");
  FitResult fit;
  fit.family = parse_family(doc["family"].get<std::string>());
  if (doc.contains("truncation"))
    fit.policy = parse_truncation(doc["truncation"].get<std::string>());
  const auto& coefs = doc["coefficients"];
  if (!coefs.is_array() || coefs.empty())
    throw ValidationError("fit document has no coefficient entries");
  fit.beta.resize(coefs.size());
  for (std::size_t c = 0; c < coefs.size(); ++c)
    fit.beta[c] = json_real(coefs[c].at("estimate"), "coefficient estimate");
  fit.n_params = static_cast<int>(fit.beta.size());
  if (doc.contains("nll")) fit.nll = json_real(doc["nll"], "nll");
  if (doc.contains("data")) {
    const auto& d = doc["data"];
    if (d.contains("n")) fit.n_obs = d["n"].get<int>();
    if (d.contains("fingerprint"))
      fit.data_fingerprint =
          std::stoull(d["fingerprint"].get<std::string>(), nullptr, 16);
  }
  if (doc.contains("rho")) {
    fit.rho_estimated = true;
    fit.rho = json_real(doc["rho"].at("estimate"), "rho");
    fit.theta = json_real(doc["rho"].at("theta"), "theta");
    fit.n_params += 1;
  }
  if (doc.contains("convergence"))
    fit.converged = doc["convergence"].value("converged", false);
  if (spec_out && doc.contains("model")) *spec_out = spec_from_json(doc["model"]);
  return fit;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NumericError("cannot open '" + tmp + "' for writing");
    out << text;
    out.flush();
    if (!out) throw NumericError("failed writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw NumericError("cannot move '" + tmp + "' into place at '" + path +
                       "'");
}

}  // namespace sevi
