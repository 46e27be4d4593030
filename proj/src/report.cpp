#include "splitlab/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "splitlab/checkpoint.hpp"
#include "splitlab/rng.hpp"

namespace splitlab::cli {

using nlohmann::json;

std::string csv_header() { return "attack,split,defense,psnr,mse,ssim,n,seed"; }

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string row_to_csv(const metrics::EvalRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%d,%s,%s,%s,%s,%d,%" PRIu64, r.attack.c_str(), r.split,
                r.defense.c_str(), fmt(r.psnr_mean).c_str(), fmt(r.mse_mean).c_str(),
                fmt(r.ssim_mean).c_str(), r.n, r.seed);
  return buf;
}

void write_csv(const std::vector<metrics::EvalRow>& rows, const std::string& path) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += row_to_csv(r) + "\n";
  io::write_file(path, out.data(), out.size());
}

json row_to_json(const metrics::EvalRow& r) {
  json j;
  j["attack"] = r.attack;
  j["split"] = r.split;
  j["defense"] = r.defense;
  j["psnr"] = std::isinf(r.psnr_mean) ? json("inf") : json(r.psnr_mean);
  j["mse"] = r.mse_mean;
  j["ssim"] = r.ssim_mean;
  j["n"] = r.n;
  j["failed"] = r.failed;
  j["seed"] = r.seed;
  return j;
}

metrics::EvalRow row_from_json(const json& j) {
  metrics::EvalRow r;
  r.attack = j.at("attack").get<std::string>();
  r.split = j.at("split").get<int>();
  r.defense = j.at("defense").get<std::string>();
  if (j.at("psnr").is_string())
    r.psnr_mean = std::numeric_limits<double>::infinity();
  else
    r.psnr_mean = j.at("psnr").get<double>();
  r.mse_mean = j.at("mse").get<double>();
  r.ssim_mean = j.at("ssim").get<double>();
  r.n = j.at("n").get<int>();
  r.failed = j.value("failed", 0);
  r.seed = j.at("seed").get<uint64_t>();
  return r;
}

void append_rows_jsonl(const std::vector<metrics::EvalRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw Error("cannot append to " + path);
  for (const auto& r : rows) f << row_to_json(r).dump() << "\n";
}

std::vector<metrics::EvalRow> read_rows_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifactError("cannot open rows file: " + path);
  std::vector<metrics::EvalRow> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    rows.push_back(row_from_json(json::parse(line)));
  }
  return rows;
}

void merge_report(const std::vector<std::string>& fragment_paths, const std::string& csv_path) {
  std::vector<metrics::EvalRow> rows;
  for (const auto& p : fragment_paths) {
    auto part = read_rows_jsonl(p);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  std::stable_sort(rows.begin(), rows.end(), [](const metrics::EvalRow& a, const metrics::EvalRow& b) {
    if (a.attack != b.attack) return a.attack < b.attack;
    if (a.split != b.split) return a.split < b.split;
    if (a.defense != b.defense) return a.defense < b.defense;
    return a.seed < b.seed;
  });
  write_csv(rows, csv_path);
}

uint64_t file_content_hash(const std::string& path) {
  const auto bytes = io::read_file(path);
  return fnv1a64_bytes(bytes.data(), bytes.size());
}

void write_manifest(const std::string& path, const json& config_echo,
                    const std::vector<std::pair<std::string, std::string>>& input_files,
                    const std::vector<std::string>& outputs, uint64_t master_seed) {
  json j;
  j["config"] = config_echo;
  j["master_seed"] = master_seed;
  json inputs = json::object();
  for (const auto& [name, file] : input_files) {
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016" PRIx64, file_content_hash(file));
    inputs[name] = {{"path", file}, {"fnv1a64", hex}};
  }
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  const std::string text = j.dump(2) + "\n";
  io::write_file(path, text.data(), text.size());
}

}  // namespace splitlab::cli
