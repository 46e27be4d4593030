#pragma once

#include <functional>
#include <map>
#include <optional>
#include <thread>

#include "splitlab/attacks.hpp"
#include "splitlab/blackbox.hpp"
#include "splitlab/checkpoint.hpp"
#include "splitlab/config.hpp"
#include "splitlab/metrics.hpp"
#include "splitlab/train.hpp"
#include "splitlab/wire.hpp"

namespace splitlab::cli {

// ---------------------------------------------------------------------------
// Checkpoint glue: model <-> named parameter table with a "meta" tensor.
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor meta_tensor(const std::vector<int>& vals) {
  Tensor t({static_cast<int>(vals.size())});
  for (size_t i = 0; i < vals.size(); ++i) t[static_cast<int64_t>(i)] = static_cast<float>(vals[i]);
  return t;
}

inline std::vector<int> meta_values(const io::CheckpointData& d) {
  const Tensor* m = d.find("meta");
  if (!m) throw DecodeError("checkpoint is missing its meta entry", 0);
  std::vector<int> out;
  for (float v : m->data) out.push_back(static_cast<int>(std::lround(v)));
  return out;
}

template <typename Model>
void copy_params_in(Model& model, const io::CheckpointData& d) {
  for (auto& [name, ptr] : model.named_params()) {
    const Tensor* src = d.find(name);
    if (!src) throw DecodeError("checkpoint is missing parameter " + name, 0);
    if (src->shape != ptr->shape)
      throw DecodeError("checkpoint parameter " + name + " has shape mismatch", 0);
    *ptr = *src;
  }
}

}  // namespace detail

inline io::CheckpointData to_checkpoint(zoo::SplitModel& m) {
  io::CheckpointData d;
  d.kind = io::ModelKind::SplitModel;
  std::vector<int> meta{m.config.side, m.config.classes, m.config.split_point};
  meta.insert(meta.end(), m.config.widths.begin(), m.config.widths.end());
  d.params.emplace_back("meta", detail::meta_tensor(meta));
  for (auto& [n, p] : m.named_params()) d.params.emplace_back(n, *p);
  return d;
}

inline zoo::SplitModel split_model_from(const io::CheckpointData& d) {
  if (d.kind != io::ModelKind::SplitModel) throw DecodeError("checkpoint is not a split model", 0);
  auto meta = detail::meta_values(d);
  if (meta.size() < 8) throw DecodeError("split model meta too short", 0);
  zoo::SplitModelConfig cfg;
  cfg.side = meta[0];
  cfg.classes = meta[1];
  cfg.split_point = meta[2];
  cfg.widths.assign(meta.begin() + 3, meta.end());
  zoo::SplitModel m(cfg);
  detail::copy_params_in(m, d);
  return m;
}

inline io::CheckpointData to_checkpoint(zoo::Generator& g) {
  io::CheckpointData d;
  d.kind = io::ModelKind::Generator;
  std::vector<int> meta{g.config.z_dim,    g.config.w_dim,      g.config.stages,
                        g.config.base_size, g.config.image_size, g.config.image_channels};
  meta.insert(meta.end(), g.config.widths.begin(), g.config.widths.end());
  d.params.emplace_back("meta", detail::meta_tensor(meta));
  for (auto& [n, p] : g.named_params()) d.params.emplace_back(n, *p);
  return d;
}

inline zoo::Generator generator_from(const io::CheckpointData& d) {
  if (d.kind != io::ModelKind::Generator) throw DecodeError("checkpoint is not a generator", 0);
  auto meta = detail::meta_values(d);
  if (meta.size() < 8) throw DecodeError("generator meta too short", 0);
  zoo::GeneratorConfig cfg;
  cfg.z_dim = meta[0];
  cfg.w_dim = meta[1];
  cfg.stages = meta[2];
  cfg.base_size = meta[3];
  cfg.image_size = meta[4];
  cfg.image_channels = meta[5];
  cfg.widths.assign(meta.begin() + 6, meta.end());
  zoo::Generator g(cfg);
  detail::copy_params_in(g, d);
  return g;
}

inline io::CheckpointData to_checkpoint(zoo::Autoencoder& a) {
  io::CheckpointData d;
  d.kind = io::ModelKind::Autoencoder;
  const int code = a.encoder.layers.back().W.dim(0);
  d.params.emplace_back("meta", detail::meta_tensor({a.side, code}));
  for (auto& [n, p] : a.named_params()) d.params.emplace_back(n, *p);
  return d;
}

inline zoo::Autoencoder autoencoder_from(const io::CheckpointData& d) {
  if (d.kind != io::ModelKind::Autoencoder) throw DecodeError("checkpoint is not an autoencoder", 0);
  auto meta = detail::meta_values(d);
  zoo::Autoencoder a(meta[0], meta[1]);
  detail::copy_params_in(a, d);
  return a;
}

inline io::CheckpointData to_checkpoint(zoo::InverseNet& inv, int image_side) {
  io::CheckpointData d;
  d.kind = io::ModelKind::InverseNet;
  std::vector<int> meta = inv.input_shape;
  meta.push_back(image_side);
  d.params.emplace_back("meta", detail::meta_tensor(meta));
  for (auto& [n, p] : inv.named_params()) d.params.emplace_back(n, *p);
  return d;
}

inline zoo::InverseNet inverse_net_from(const io::CheckpointData& d) {
  if (d.kind != io::ModelKind::InverseNet) throw DecodeError("checkpoint is not an inverse net", 0);
  auto meta = detail::meta_values(d);
  if (meta.size() != 4) throw DecodeError("inverse net meta malformed", 0);
  zoo::InverseNet inv({meta[0], meta[1], meta[2]}, meta[3]);
  detail::copy_params_in(inv, d);
  return inv;
}

// ---------------------------------------------------------------------------
// Attack evaluation harness.
// ---------------------------------------------------------------------------

struct EvalArtifacts {
  const zoo::SplitModel* model = nullptr;
  const zoo::Generator* generator = nullptr;
  const zoo::Autoencoder* autoencoder = nullptr;
  std::map<int, const zoo::InverseNet*> inverse_by_split;
};

// The representation the honest-but-curious server captured for one target:
// client forward plus any wire-boundary defense, deterministically seeded.
inline Tensor defended_representation(const zoo::SplitModel& model, const Tensor& x,
                                      int split_point, const defenses::DefenseConfig& defense,
                                      uint64_t master_seed, int target_index) {
  Tensor h = model.client_forward(x, split_point);
  if (defense.kind == defenses::DefenseKind::Noise)
    return defenses::noise_mask(h, defense.noise_scale,
                                derive_seed(master_seed, "noise-s" + std::to_string(split_point) +
                                                             "-t" + std::to_string(target_index)));
  if (defense.kind == defenses::DefenseKind::Prune)
    return defenses::disco_prune(h, defense.prune_ratio);
  return h;
}

// Paired-run seeding: identical across attack methods so that per-target
// comparisons are seed-matched.
inline uint64_t attack_seed(uint64_t master_seed, int split_point, int target_index,
                            uint64_t run_seed) {
  return derive_seed(master_seed, "attack-s" + std::to_string(split_point) + "-t" +
                                      std::to_string(target_index) + "-r" +
                                      std::to_string(run_seed));
}

inline attacks::AttackResult run_single_attack(const std::string& method,
                                               const attacks::AttackConfig& cfg,
                                               const Tensor& h_tar, const EvalArtifacts& art,
                                               int split_point) {
  const zoo::SplitModel& model = *art.model;
  const nn::Stack client = model.client_stack(split_point);
  const std::vector<int> img_shape{3, model.config.side, model.config.side};
  if (method == "rmle") return attacks::attack_rmle(h_tar, client, img_shape, cfg);
  if (method == "lm") {
    if (!art.autoencoder) throw Error("lm attack requires a trained autoencoder");
    return attacks::attack_lm(h_tar, client, img_shape, *art.autoencoder, cfg);
  }
  if (method == "in") {
    auto it = art.inverse_by_split.find(split_point);
    if (it == art.inverse_by_split.end() || !it->second)
      throw Error("in attack requires an inverse net for split " + std::to_string(split_point));
    return attacks::attack_in(h_tar, *it->second);
  }
  if (!art.generator) throw Error(method + " attack requires a trained generator");
  if (method == "latent") return attacks::attack_latent_only(h_tar, client, *art.generator, cfg);
  if (method == "pfo") return attacks::attack_pfo(h_tar, client, *art.generator, cfg);
  if (method == "pfo-bb") {
    attacks::QueryOracle oracle{[&client](const Tensor& x) { return client.forward(x); },
                                cfg.query_budget};
    return attacks::attack_pfo_blackbox(h_tar, oracle, *art.generator, cfg);
  }
  throw Error("unknown attack method: " + method);
}

struct TargetOutcome {
  bool ok = false;
  double psnr = 0, mse = 0, ssim = 0;
  Tensor image;
};

using TargetRunner =
    std::function<attacks::AttackResult(const Tensor& h_tar, uint64_t seed, int target_index)>;

// Runs one attack over every target and aggregates the metric means. Failures
// are excluded from the means and counted. Targets may fan out over threads;
// rows merge deterministically by target index.
inline metrics::EvalRow evaluate_attack(const std::string& row_name,
                                        const std::vector<Tensor>& targets,
                                        const zoo::SplitModel& model, int split_point,
                                        const defenses::DefenseConfig& defense,
                                        uint64_t master_seed, uint64_t run_seed,
                                        const TargetRunner& runner, int threads = 1,
                                        std::vector<TargetOutcome>* outcomes_out = nullptr) {
  std::vector<TargetOutcome> outcomes(targets.size());
  auto work = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      try {
        Tensor h_tar = defended_representation(model, targets[i], split_point, defense, master_seed,
                                               static_cast<int>(i));
        attacks::AttackResult res =
            runner(h_tar, attack_seed(master_seed, split_point, static_cast<int>(i), run_seed),
                   static_cast<int>(i));
        TargetOutcome& o = outcomes[i];
        o.ok = true;
        o.psnr = metrics::psnr(res.image, targets[i]);
        o.mse = metrics::mse(res.image, targets[i]);
        o.ssim = metrics::ssim(res.image, targets[i]);
        o.image = std::move(res.image);
      } catch (const std::exception&) {
        outcomes[i].ok = false;  // flagged, excluded from the means
      }
    }
  };
  if (threads <= 1 || targets.size() <= 1) {
    work(0, targets.size());
  } else {
    const size_t nt = std::min<size_t>(static_cast<size_t>(threads), targets.size());
    std::vector<std::thread> pool;
    const size_t chunk = (targets.size() + nt - 1) / nt;
    for (size_t t = 0; t < nt; ++t) {
      const size_t b = t * chunk, e = std::min(targets.size(), b + chunk);
      if (b >= e) break;
      pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  metrics::EvalRow row;
  row.attack = row_name;
  row.split = split_point;
  row.defense = defenses::defense_kind_name(defense.kind);
  row.seed = run_seed;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++row.failed;
      continue;
    }
    row.psnr_mean += o.psnr;
    row.mse_mean += o.mse;
    row.ssim_mean += o.ssim;
    ++row.n;
  }
  if (row.n) {
    row.psnr_mean /= row.n;
    row.mse_mean /= row.n;
    row.ssim_mean /= row.n;
  }
  if (outcomes_out) *outcomes_out = std::move(outcomes);
  return row;
}

inline metrics::EvalRow evaluate_attack_method(const std::string& method,
                                               const attacks::AttackConfig& base_cfg,
                                               const std::vector<Tensor>& targets,
                                               const EvalArtifacts& art, int split_point,
                                               const defenses::DefenseConfig& defense,
                                               uint64_t master_seed, uint64_t run_seed,
                                               int threads = 1,
                                               std::vector<TargetOutcome>* outcomes = nullptr,
                                               const std::string& row_name_override = "") {
  TargetRunner runner = [&](const Tensor& h_tar, uint64_t seed, int) {
    attacks::AttackConfig cfg = base_cfg;
    cfg.seed = seed;
    return run_single_attack(method, cfg, h_tar, art, split_point);
  };
  return evaluate_attack(row_name_override.empty() ? method : row_name_override, targets,
                         *art.model, split_point, defense, master_seed, run_seed, runner, threads,
                         outcomes);
}

// The three ablation arms: no progressive stage, no ball constraint, full.
inline std::vector<metrics::EvalRow> ablate_rows(const attacks::AttackConfig& base_cfg,
                                                 const std::vector<Tensor>& targets,
                                                 const EvalArtifacts& art, int split_point,
                                                 const defenses::DefenseConfig& defense,
                                                 uint64_t master_seed, uint64_t run_seed,
                                                 int threads = 1) {
  std::vector<metrics::EvalRow> rows;
  rows.push_back(evaluate_attack_method("latent", base_cfg, targets, art, split_point, defense,
                                        master_seed, run_seed, threads, nullptr, "wo-pfo"));
  attacks::AttackConfig no_ball = base_cfg;
  no_ball.l1_ball = false;
  rows.push_back(evaluate_attack_method("pfo", no_ball, targets, art, split_point, defense,
                                        master_seed, run_seed, threads, nullptr, "pfo-wo-l1ball"));
  rows.push_back(evaluate_attack_method("pfo", base_cfg, targets, art, split_point, defense,
                                        master_seed, run_seed, threads));
  return rows;
}

}  // namespace splitlab::cli
