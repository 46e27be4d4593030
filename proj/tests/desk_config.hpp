#pragma once

// The desk-scale reference setup shared by the fixture builder, the trend
// integration tests and the acceptance suite. Budgets are sized for CPU runs.

#include "splitlab/conf_all.hpp"

namespace desk {

using namespace splitlab;

constexpr uint64_t kMasterSeed = 2026;

inline zoo::CorpusConfig corpus_config() {
  zoo::CorpusConfig c;
  c.private_count = 1024;
  c.public_count = 640;
  c.side = 16;
  c.classes = 4;
  c.seed = derive_seed(kMasterSeed, "corpus");
  return c;
}

inline zoo::SplitModelConfig model_config() {
  return zoo::SplitModelConfig{};  // 16x16, 4 classes, widths {8,8,6,6,8}
}

inline zoo::GeneratorConfig generator_config() {
  return zoo::GeneratorConfig{};  // z 32, w 32, H 3, widths {16,12,10,8}
}

inline zoo::TrainConfig target_train() {
  zoo::TrainConfig t;
  t.steps = 2500;
  t.batch = 16;
  t.lr = 1e-3;
  t.seed = derive_seed(kMasterSeed, "train-target");
  return t;
}

inline zoo::TrainConfig gan_train() {
  zoo::TrainConfig t;
  t.steps = 400;
  t.pretrain_steps = 2500;
  t.batch = 16;
  t.lr = 1e-3;
  t.seed = derive_seed(kMasterSeed, "train-gan");
  t.jsd_bound = 0.35;
  return t;
}

inline zoo::TrainConfig ae_train() {
  zoo::TrainConfig t;
  t.steps = 700;
  t.batch = 16;
  t.lr = 2e-3;
  t.seed = derive_seed(kMasterSeed, "train-ae");
  return t;
}

inline zoo::TrainConfig inverse_train() {
  zoo::TrainConfig t;
  t.steps = 700;
  t.batch = 16;
  t.lr = 1e-3;
  t.seed = derive_seed(kMasterSeed, "train-inverse");
  return t;
}

constexpr int kAeCodeDim = 24;

// Attack budgets for the trend-level experiments.
inline attacks::AttackConfig pfo_attack() {
  attacks::AttackConfig c;
  c.iterations = 150;
  c.select_iterations = 40;
  c.w_iterations = 350;
  c.candidates = 10;
  c.lr = 1e-2;
  c.stage_lr = 4.0;
  c.stage_plain_sgd = true;
  c.tv_weight = 0.01;
  c.kl_weight = 0.01;
  c.radii = {0.08, 0.01, 0.002};
  return c;
}

inline attacks::AttackConfig rmle_attack() {
  attacks::AttackConfig c = attacks::AttackConfig::rmle_defaults();
  c.tv_weight = 0.003;  // sum-scale TV at 16x16x3
  c.iterations = 600;
  c.lr = 1e-2;
  return c;
}

inline attacks::AttackConfig lm_attack() {
  attacks::AttackConfig c = attacks::AttackConfig::lm_defaults();
  c.tv_weight = 0.002;
  c.iterations = 600;
  c.lr = 1e-2;
  c.manifold_weight = 1.0;
  return c;
}

struct Fixtures {
  zoo::Corpus priv, pub;
  zoo::SplitModel target;
  zoo::SplitModel target_nopeek;
  zoo::Generator generator;
  zoo::Autoencoder autoencoder;
  std::map<int, zoo::InverseNet> inverse;
  double undefended_dcor = 0, nopeek_dcor = 0;
  double target_accuracy = 0;
};

inline std::string fixture_path(const std::string& dir, const std::string& name) {
  return dir + "/" + name;
}

// Loads fixtures produced by the fixture builder.
inline Fixtures load_fixtures(const std::string& dir) {
  Fixtures f;
  f.priv = zoo::load_corpus(fixture_path(dir, "corpus_private.bin"));
  f.pub = zoo::load_corpus(fixture_path(dir, "corpus_public.bin"));
  f.target = cli::split_model_from(io::load_checkpoint(fixture_path(dir, "target.ckpt")));
  f.target_nopeek =
      cli::split_model_from(io::load_checkpoint(fixture_path(dir, "target_nopeek.ckpt")));
  f.generator = cli::generator_from(io::load_checkpoint(fixture_path(dir, "generator.ckpt")));
  f.autoencoder =
      cli::autoencoder_from(io::load_checkpoint(fixture_path(dir, "autoencoder.ckpt")));
  for (int sp = 1; sp <= 3; ++sp)
    f.inverse.emplace(sp, cli::inverse_net_from(io::load_checkpoint(
                              fixture_path(dir, "inverse_s" + std::to_string(sp) + ".ckpt"))));
  auto stats = nlohmann::json::parse(
      std::string(reinterpret_cast<const char*>(
                      io::read_file(fixture_path(dir, "stats.json")).data()),
                  io::read_file(fixture_path(dir, "stats.json")).size()));
  f.undefended_dcor = stats["undefended_dcor"].get<double>();
  f.nopeek_dcor = stats["nopeek_dcor"].get<double>();
  f.target_accuracy = stats["target_accuracy"].get<double>();
  return f;
}

}  // namespace desk
