#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sevi/data.hpp"
#include "sevi/estimate.hpp"

namespace sevi {

inline constexpr const char* kVersion = "0.1.0";

// long-format choice data: one row per situation x alternative. Required
// columns: situation_id, alternative_id, chosen. Optional: available
// (default 1), cluster_id (default situation_id). Every other column is a
// covariate. A missing (situation, alternative) row means unavailable.
struct LongTable {
  struct Row {
    std::int64_t situation = 0;
    int alt = 0;  // index into alternatives
    bool chosen = false;
    bool available = true;
    std::int64_t cluster = 0;
    std::vector<double> covs;
    std::vector<bool> missing;
    int line = 0;  // 1-based file line, for diagnostics
  };
  std::vector<std::string> covariates;    // column order from the file
  std::vector<std::string> alternatives;  // first-appearance order
  std::vector<Row> rows;
};

LongTable read_long_csv(const std::string& path);

// how covariates enter utility; direction Minimize flips the design sign so
// the reported coefficients are cost coefficients
struct ModelSpecFile {
  std::vector<std::string> generic;
  bool alt_specific_constants = false;
  std::string base_alternative;
  std::vector<std::string> case_specific;
  std::vector<std::string> alt_varying_altcoef;
  ErrorFamily family = ErrorFamily::sevi();
  bool minimize = false;
  std::optional<TruncationPolicy> truncation;
  SeKind se = SeKind::Plain;
};

ModelSpecFile spec_from_json(const nlohmann::json& doc);
ModelSpecFile read_spec_file(const std::string& path);
nlohmann::ordered_json spec_to_json(const ModelSpecFile& spec);

// dummy expansion into a design batch; column order: generic columns, then
// alternative-specific constants "asc:<alt>" (base omitted), then
// case-specific "<col>:<alt>" (base omitted), then alternative-varying
// "<col>@<alt>" over every alternative
DesignBatch ingest(const LongTable& table, const ModelSpecFile& spec);
DesignBatch ingest_csv(const std::string& path, const ModelSpecFile& spec);

// long-format CSV for a generated batch; round-trips through read_long_csv
std::string batch_to_csv(const DesignBatch& batch);

std::string fingerprint_hex(std::uint64_t fp);

nlohmann::ordered_json fit_result_document(const FitResult& fit,
                                           const DesignBatch& batch,
                                           const ModelSpecFile& spec,
                                           std::uint64_t seed,
                                           const Eigen::MatrixXd& vcov_used,
                                           SeKind se_kind);

FitResult fit_from_document(const nlohmann::json& doc, ModelSpecFile* spec_out);

// write-temp-then-rename so readers never observe a partial file
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace sevi
