#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "splitlab/attacks.hpp"
#include "splitlab/corpus.hpp"
#include "splitlab/defenses.hpp"
#include "splitlab/train.hpp"
#include "splitlab/zoo.hpp"

namespace splitlab::cli {

struct AttackEntry {
  std::string method;  // rmle | lm | in | latent | pfo | pfo-bb
  attacks::AttackConfig cfg;
};

// Schema-validated experiment configuration. Unknown keys are rejected with
// their dotted field path. All runtime seeds derive from master_seed.
struct ExperimentConfig {
  uint64_t master_seed = 7;
  std::string output_dir = "out";

  zoo::CorpusConfig corpus;
  zoo::SplitModelConfig model;
  zoo::GeneratorConfig generator;

  zoo::TrainConfig train_target;
  zoo::TrainConfig train_gan;
  zoo::TrainConfig train_ae;
  zoo::TrainConfig train_inverse;
  int ae_code_dim = 16;

  defenses::DefenseConfig defense;
  std::vector<AttackEntry> attacks;

  struct Eval {
    int targets = 16;
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::vector<int> split_points = {1, 2, 3};
    int threads = 1;
  } eval;

  struct Serve {
    std::string host = "127.0.0.1";
    int port = 9009;
    bool capture = false;
    std::string capture_path = "capture.bin";
  } serve;
};

ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

// Loads a JSON config file and applies repeated --set key=value overrides
// (dotted paths; values parsed as JSON scalars when possible).
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);
nlohmann::json apply_overrides(nlohmann::json j, const std::vector<std::string>& overrides);

attacks::AttackConfig default_attack_config(const std::string& method);

}  // namespace splitlab::cli
