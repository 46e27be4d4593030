#include "splitlab/config.hpp"

#include <fstream>

namespace splitlab::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& path) {
  if (!j.is_object()) throw ConfigError("expected an object", path.empty() ? "<root>" : path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key", path.empty() ? it.key() : path + "." + it.key());
  }
}

template <typename T>
void get(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("wrong type", path + "." + key);
  }
}

void parse_train(const json& j, zoo::TrainConfig& t, const std::string& path) {
  reject_unknown(j, {"steps", "batch", "lr", "holdout_fraction", "jsd_bound", "pretrain_steps"},
                 path);
  get(j, "steps", t.steps, path);
  get(j, "pretrain_steps", t.pretrain_steps, path);
  get(j, "batch", t.batch, path);
  get(j, "lr", t.lr, path);
  get(j, "holdout_fraction", t.holdout_fraction, path);
  get(j, "jsd_bound", t.jsd_bound, path);
}

void parse_attack_entry(const json& j, AttackEntry& e, const std::string& path) {
  reject_unknown(j,
                 {"method", "iterations", "select_iterations", "w_iterations", "lr", "stage_lr", "tv_weight",
                  "kl_weight", "manifold_weight", "candidates", "radii", "l1_ball",
                  "cma_population", "cma_sigma", "query_budget", "code_dim", "stage_plain_sgd"},
                 path);
  if (!j.contains("method")) throw ConfigError("missing key", path + ".method");
  get(j, "method", e.method, path);
  e.cfg = default_attack_config(e.method);
  get(j, "iterations", e.cfg.iterations, path);
  get(j, "select_iterations", e.cfg.select_iterations, path);
  get(j, "w_iterations", e.cfg.w_iterations, path);
  get(j, "lr", e.cfg.lr, path);
  get(j, "stage_lr", e.cfg.stage_lr, path);
  get(j, "stage_plain_sgd", e.cfg.stage_plain_sgd, path);
  get(j, "tv_weight", e.cfg.tv_weight, path);
  get(j, "kl_weight", e.cfg.kl_weight, path);
  get(j, "manifold_weight", e.cfg.manifold_weight, path);
  get(j, "candidates", e.cfg.candidates, path);
  get(j, "radii", e.cfg.radii, path);
  get(j, "l1_ball", e.cfg.l1_ball, path);
  get(j, "cma_population", e.cfg.cma_population, path);
  get(j, "cma_sigma", e.cfg.cma_sigma, path);
  get(j, "query_budget", e.cfg.query_budget, path);
  get(j, "code_dim", e.cfg.code_dim, path);
  if (e.method == "pfo-bb") e.cfg.mode = attacks::AttackMode::Blackbox;
  try {
    e.cfg.validate();
  } catch (const Error& err) {
    throw ConfigError(err.what(), path);
  }
}

}  // namespace

attacks::AttackConfig default_attack_config(const std::string& method) {
  if (method == "rmle") return attacks::AttackConfig::rmle_defaults();
  if (method == "lm") return attacks::AttackConfig::lm_defaults();
  if (method == "in" || method == "latent" || method == "pfo" || method == "pfo-bb")
    return attacks::AttackConfig{};
  throw Error("unknown attack method: " + method);
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  reject_unknown(j,
                 {"master_seed", "output_dir", "corpus", "model", "generator", "train", "defense",
                  "attacks", "eval", "serve"},
                 "");
  get(j, "master_seed", c.master_seed, "");
  get(j, "output_dir", c.output_dir, "");

  if (j.contains("corpus")) {
    const auto& s = j.at("corpus");
    reject_unknown(s, {"private_count", "public_count", "side", "classes", "ood_shift"}, "corpus");
    get(s, "private_count", c.corpus.private_count, "corpus");
    get(s, "public_count", c.corpus.public_count, "corpus");
    get(s, "side", c.corpus.side, "corpus");
    get(s, "classes", c.corpus.classes, "corpus");
    get(s, "ood_shift", c.corpus.ood_shift, "corpus");
  }
  if (j.contains("model")) {
    const auto& s = j.at("model");
    reject_unknown(s, {"side", "classes", "widths", "split_point"}, "model");
    get(s, "side", c.model.side, "model");
    get(s, "classes", c.model.classes, "model");
    get(s, "widths", c.model.widths, "model");
    get(s, "split_point", c.model.split_point, "model");
  }
  if (j.contains("generator")) {
    const auto& s = j.at("generator");
    reject_unknown(s, {"z_dim", "w_dim", "stages", "widths", "base_size", "image_size"},
                   "generator");
    get(s, "z_dim", c.generator.z_dim, "generator");
    get(s, "w_dim", c.generator.w_dim, "generator");
    get(s, "stages", c.generator.stages, "generator");
    get(s, "widths", c.generator.widths, "generator");
    get(s, "base_size", c.generator.base_size, "generator");
    get(s, "image_size", c.generator.image_size, "generator");
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    reject_unknown(s, {"target", "gan", "ae", "inverse", "ae_code_dim"}, "train");
    if (s.contains("target")) parse_train(s.at("target"), c.train_target, "train.target");
    if (s.contains("gan")) parse_train(s.at("gan"), c.train_gan, "train.gan");
    if (s.contains("ae")) parse_train(s.at("ae"), c.train_ae, "train.ae");
    if (s.contains("inverse")) parse_train(s.at("inverse"), c.train_inverse, "train.inverse");
    get(s, "ae_code_dim", c.ae_code_dim, "train");
  }
  if (j.contains("defense")) {
    const auto& s = j.at("defense");
    reject_unknown(s, {"kind", "noise_scale", "prune_ratio", "lambda2", "lambda3", "margin"},
                   "defense");
    std::string kind = "none";
    get(s, "kind", kind, "defense");
    if (kind == "none") c.defense.kind = defenses::DefenseKind::None;
    else if (kind == "noise") c.defense.kind = defenses::DefenseKind::Noise;
    else if (kind == "prune") c.defense.kind = defenses::DefenseKind::Prune;
    else if (kind == "nopeek") c.defense.kind = defenses::DefenseKind::NoPeek;
    else if (kind == "siamese") c.defense.kind = defenses::DefenseKind::Siamese;
    else throw ConfigError("unknown defense kind '" + kind + "'", "defense.kind");
    get(s, "noise_scale", c.defense.noise_scale, "defense");
    get(s, "prune_ratio", c.defense.prune_ratio, "defense");
    get(s, "lambda2", c.defense.lambda2, "defense");
    get(s, "lambda3", c.defense.lambda3, "defense");
    get(s, "margin", c.defense.margin, "defense");
  }
  if (j.contains("attacks")) {
    if (!j.at("attacks").is_array()) throw ConfigError("expected an array", "attacks");
    int i = 0;
    for (const auto& a : j.at("attacks")) {
      AttackEntry e;
      parse_attack_entry(a, e, "attacks[" + std::to_string(i) + "]");
      c.attacks.push_back(std::move(e));
      ++i;
    }
  }
  if (j.contains("eval")) {
    const auto& s = j.at("eval");
    reject_unknown(s, {"targets", "seeds", "split_points", "threads"}, "eval");
    get(s, "targets", c.eval.targets, "eval");
    get(s, "seeds", c.eval.seeds, "eval");
    get(s, "split_points", c.eval.split_points, "eval");
    get(s, "threads", c.eval.threads, "eval");
  }
  if (j.contains("serve")) {
    const auto& s = j.at("serve");
    reject_unknown(s, {"host", "port", "capture", "capture_path"}, "serve");
    get(s, "host", c.serve.host, "serve");
    get(s, "port", c.serve.port, "serve");
    get(s, "capture", c.serve.capture, "serve");
    get(s, "capture_path", c.serve.capture_path, "serve");
  }

  try {
    c.corpus.seed = derive_seed(c.master_seed, "corpus");
    c.corpus.validate();
    c.model.validate();
    c.generator.validate();
    c.defense.validate();
    c.defense.seed = derive_seed(c.master_seed, "defense");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(err.what(), "<config>");
  }
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  json j;
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  j["corpus"] = {{"private_count", c.corpus.private_count},
                 {"public_count", c.corpus.public_count},
                 {"side", c.corpus.side},
                 {"classes", c.corpus.classes},
                 {"ood_shift", c.corpus.ood_shift}};
  j["model"] = {{"side", c.model.side},
                {"classes", c.model.classes},
                {"widths", c.model.widths},
                {"split_point", c.model.split_point}};
  j["generator"] = {{"z_dim", c.generator.z_dim}, {"w_dim", c.generator.w_dim},
                    {"stages", c.generator.stages}, {"widths", c.generator.widths},
                    {"base_size", c.generator.base_size}, {"image_size", c.generator.image_size}};
  auto train_j = [](const zoo::TrainConfig& t) {
    return json{{"steps", t.steps},
                {"batch", t.batch},
                {"lr", t.lr},
                {"holdout_fraction", t.holdout_fraction},
                {"jsd_bound", t.jsd_bound},
                {"pretrain_steps", t.pretrain_steps}};
  };
  j["train"] = {{"target", train_j(c.train_target)},
                {"gan", train_j(c.train_gan)},
                {"ae", train_j(c.train_ae)},
                {"inverse", train_j(c.train_inverse)},
                {"ae_code_dim", c.ae_code_dim}};
  j["defense"] = {{"kind", defenses::defense_kind_name(c.defense.kind)},
                  {"noise_scale", c.defense.noise_scale},
                  {"prune_ratio", c.defense.prune_ratio},
                  {"lambda2", c.defense.lambda2},
                  {"lambda3", c.defense.lambda3},
                  {"margin", c.defense.margin}};
  j["attacks"] = json::array();
  for (const auto& a : c.attacks) {
    j["attacks"].push_back({{"method", a.method},
                            {"iterations", a.cfg.iterations},
                            {"select_iterations", a.cfg.select_iterations},
                            {"w_iterations", a.cfg.w_iterations},
                            {"lr", a.cfg.lr},
                            {"stage_lr", a.cfg.stage_lr},
                            {"stage_plain_sgd", a.cfg.stage_plain_sgd},
                            {"tv_weight", a.cfg.tv_weight},
                            {"kl_weight", a.cfg.kl_weight},
                            {"manifold_weight", a.cfg.manifold_weight},
                            {"candidates", a.cfg.candidates},
                            {"radii", a.cfg.radii},
                            {"l1_ball", a.cfg.l1_ball},
                            {"cma_population", a.cfg.cma_population},
                            {"cma_sigma", a.cfg.cma_sigma},
                            {"query_budget", a.cfg.query_budget},
                            {"code_dim", a.cfg.code_dim}});
  }
  j["eval"] = {{"targets", c.eval.targets},
               {"seeds", c.eval.seeds},
               {"split_points", c.eval.split_points},
               {"threads", c.eval.threads}};
  j["serve"] = {{"host", c.serve.host},
                {"port", c.serve.port},
                {"capture", c.serve.capture},
                {"capture_path", c.serve.capture_path}};
  return j;
}

nlohmann::json apply_overrides(json j, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must look like key=value", kv);
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // fall back to a plain string
    }
    json* cur = &j;
    size_t pos = 0;
    std::string path;
    while (true) {
      const auto dot = key.find('.', pos);
      const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
      path += (path.empty() ? "" : ".") + part;
      if (dot == std::string::npos) {
        (*cur)[part] = parsed;
        break;
      }
      cur = &(*cur)[part];
      if (!cur->is_object() && !cur->is_null())
        throw ConfigError("override path crosses a non-object", path);
      pos = dot + 1;
    }
  }
  return j;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw MissingArtifactError("cannot open config file: " + path);
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("invalid JSON: ") + e.what(), path);
    }
  }
  j = apply_overrides(std::move(j), overrides);
  return parse_config(j);
}

}  // namespace splitlab::cli
