#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "splitlab/metrics.hpp"

namespace splitlab::cli {

// CSV schema: attack,split,defense,psnr,mse,ssim,n,seed — infinite PSNR is
// written as the string "inf".
std::string csv_header();
std::string row_to_csv(const metrics::EvalRow& r);
void write_csv(const std::vector<metrics::EvalRow>& rows, const std::string& path);

nlohmann::json row_to_json(const metrics::EvalRow& r);
metrics::EvalRow row_from_json(const nlohmann::json& j);

// Appends rows to a JSONL fragment file (one row object per line).
void append_rows_jsonl(const std::vector<metrics::EvalRow>& rows, const std::string& path);
std::vector<metrics::EvalRow> read_rows_jsonl(const std::string& path);

// Merges JSONL fragments into the final CSV, sorted deterministically by
// (attack, split, defense, seed).
void merge_report(const std::vector<std::string>& fragment_paths, const std::string& csv_path);

// Artifact manifest: config echo, seeds, content hashes of the inputs.
void write_manifest(const std::string& path, const nlohmann::json& config_echo,
                    const std::vector<std::pair<std::string, std::string>>& input_files,
                    const std::vector<std::string>& outputs, uint64_t master_seed);

uint64_t file_content_hash(const std::string& path);

}  // namespace splitlab::cli
