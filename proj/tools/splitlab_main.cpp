// splitlab: desk-scale split-inference privacy laboratory.
//
// Subcommands: gen-corpus, train-target, train-gan, train-ae, train-inverse,
// serve, client, attack, ablate, evaluate, report.

#include <csignal>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "splitlab/conf_all.hpp"

namespace fs = std::filesystem;
using namespace splitlab;

namespace {

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

cli::ExperimentConfig load(const CommonArgs& args) {
  return cli::load_config(args.config_path, args.overrides);
}

std::string out_path(const cli::ExperimentConfig& c, const std::string& name) {
  fs::create_directories(c.output_dir);
  return (fs::path(c.output_dir) / name).string();
}

void manifest(const cli::ExperimentConfig& c, const std::string& cmd,
              const std::vector<std::pair<std::string, std::string>>& inputs,
              const std::vector<std::string>& outputs) {
  cli::write_manifest(out_path(c, cmd + ".manifest.json"), cli::config_to_json(c), inputs, outputs,
                      c.master_seed);
}

zoo::Corpus load_private(const cli::ExperimentConfig& c) {
  return zoo::load_corpus(out_path(c, "corpus_private.bin"));
}
zoo::Corpus load_public(const cli::ExperimentConfig& c) {
  return zoo::load_corpus(out_path(c, "corpus_public.bin"));
}

int cmd_gen_corpus(const CommonArgs& args) {
  auto c = load(args);
  auto pair = zoo::generate_corpus(c.corpus);
  const auto ppriv = out_path(c, "corpus_private.bin");
  const auto ppub = out_path(c, "corpus_public.bin");
  zoo::save_corpus(pair.priv, ppriv);
  zoo::save_corpus(pair.pub, ppub);
  manifest(c, "gen-corpus", {}, {ppriv, ppub});
  std::cout << "wrote " << pair.priv.size() << " private and " << pair.pub.size()
            << " public images\n";
  return 0;
}

int cmd_train_target(const CommonArgs& args) {
  auto c = load(args);
  auto corpus = load_private(c);
  zoo::TrainConfig tc = c.train_target;
  tc.seed = derive_seed(c.master_seed, "train-target");
  auto res = zoo::train_target(corpus, c.model, tc, c.defense);
  const auto path = out_path(c, "target.ckpt");
  auto ckpt = cli::to_checkpoint(res.model);
  io::save_checkpoint(ckpt, path);
  manifest(c, "train-target", {{"corpus_private", out_path(c, "corpus_private.bin")}}, {path});
  std::cout << "holdout accuracy " << res.holdout_accuracy << ", dcor " << res.holdout_dcor << "\n";
  return 0;
}

int cmd_train_gan(const CommonArgs& args) {
  auto c = load(args);
  auto corpus = load_public(c);
  zoo::TrainConfig tc = c.train_gan;
  tc.seed = derive_seed(c.master_seed, "train-gan");
  auto res = zoo::train_gan(corpus, c.generator, tc);
  const auto path = out_path(c, "generator.ckpt");
  auto ckpt = cli::to_checkpoint(res.generator);
  io::save_checkpoint(ckpt, path);
  manifest(c, "train-gan", {{"corpus_public", out_path(c, "corpus_public.bin")}}, {path});
  std::cout << "disc score " << res.mean_disc_score << ", histogram jsd " << res.histogram_jsd
            << (res.mode_collapse_warning ? " (warning: low sample variance)" : "") << "\n";
  return 0;
}

int cmd_train_ae(const CommonArgs& args) {
  auto c = load(args);
  auto corpus = load_public(c);
  zoo::TrainConfig tc = c.train_ae;
  tc.seed = derive_seed(c.master_seed, "train-ae");
  auto res = zoo::train_autoencoder(corpus, c.ae_code_dim, tc);
  const auto path = out_path(c, "autoencoder.ckpt");
  auto ckpt = cli::to_checkpoint(res.model);
  io::save_checkpoint(ckpt, path);
  manifest(c, "train-ae", {{"corpus_public", out_path(c, "corpus_public.bin")}}, {path});
  std::cout << "holdout mse " << res.holdout_mse << "\n";
  return 0;
}

int cmd_train_inverse(const CommonArgs& args) {
  auto c = load(args);
  auto corpus = load_public(c);
  auto target = cli::split_model_from(io::load_checkpoint(out_path(c, "target.ckpt")));
  zoo::TrainConfig tc = c.train_inverse;
  tc.seed = derive_seed(c.master_seed, "train-inverse-" + std::to_string(c.model.split_point));
  auto res = zoo::train_inverse_net(corpus, target, c.model.split_point, tc);
  const auto path = out_path(c, "inverse_s" + std::to_string(c.model.split_point) + ".ckpt");
  auto ckpt = cli::to_checkpoint(res.model, target.config.side);
  io::save_checkpoint(ckpt, path);
  manifest(c, "train-inverse", {{"target", out_path(c, "target.ckpt")}}, {path});
  std::cout << "holdout mse " << res.holdout_mse << "\n";
  return 0;
}

int cmd_serve(const CommonArgs& args, const std::string& listen) {
  auto c = load(args);
  auto model = cli::split_model_from(io::load_checkpoint(out_path(c, "target.ckpt")));
  wire::ServerConfig sc;
  sc.host = c.serve.host;
  sc.port = c.serve.port;
  sc.split_point = c.model.split_point;
  sc.capture = c.serve.capture;
  sc.capture_path = c.serve.capture_path.empty() ? out_path(c, "capture.bin")
                                                 : c.serve.capture_path;
  if (!listen.empty()) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw Error("--listen expects host:port");
    sc.host = listen.substr(0, colon);
    sc.port = std::stoi(listen.substr(colon + 1));
  }
  wire::Server server(std::move(model), sc);
  server.start();
  std::cout << "listening on " << sc.host << ":" << server.port()
            << (sc.capture ? " (capturing to " + sc.capture_path + ")" : "") << std::endl;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  std::cout << "served " << server.requests_served() << " requests\n";
  return 0;
}

int cmd_client(const CommonArgs& args, const std::string& server_addr, int count) {
  auto c = load(args);
  auto model = cli::split_model_from(io::load_checkpoint(out_path(c, "target.ckpt")));
  model.config.split_point = c.model.split_point;
  auto corpus = load_private(c);
  std::string host = c.serve.host;
  int port = c.serve.port;
  if (!server_addr.empty()) {
    const auto colon = server_addr.rfind(':');
    if (colon == std::string::npos) throw Error("--server expects host:port");
    host = server_addr.substr(0, colon);
    port = std::stoi(server_addr.substr(colon + 1));
  }
  std::vector<Tensor> images;
  for (int i = 0; i < count && i < corpus.size(); ++i) images.push_back(corpus.images[static_cast<size_t>(i)]);
  auto run = wire::run_client(model, images, c.defense, host, port, c.master_seed);
  for (size_t i = 0; i < run.logits.size(); ++i) {
    int arg = 0;
    for (int64_t k = 1; k < run.logits[i].size(); ++k)
      if (run.logits[i][k] > run.logits[i][arg]) arg = static_cast<int>(k);
    std::cout << "image " << i << ": class " << arg << " (label "
              << corpus.labels[i] << ")\n";
  }
  return 0;
}

cli::EvalArtifacts load_artifacts(const cli::ExperimentConfig& c,
                                  const std::vector<std::string>& methods,
                                  const std::vector<int>& splits, zoo::SplitModel& model_store,
                                  std::optional<zoo::Generator>& gen_store,
                                  std::optional<zoo::Autoencoder>& ae_store,
                                  std::map<int, zoo::InverseNet>& inv_store) {
  cli::EvalArtifacts art;
  model_store = cli::split_model_from(io::load_checkpoint(out_path(c, "target.ckpt")));
  art.model = &model_store;
  auto needs = [&](const char* m) {
    for (const auto& name : methods)
      if (name == m) return true;
    return false;
  };
  if (needs("latent") || needs("pfo") || needs("pfo-bb")) {
    gen_store = cli::generator_from(io::load_checkpoint(out_path(c, "generator.ckpt")));
    art.generator = &*gen_store;
  }
  if (needs("lm")) {
    ae_store = cli::autoencoder_from(io::load_checkpoint(out_path(c, "autoencoder.ckpt")));
    art.autoencoder = &*ae_store;
  }
  if (needs("in")) {
    for (int sp : splits) {
      inv_store.emplace(sp, cli::inverse_net_from(io::load_checkpoint(
                                out_path(c, "inverse_s" + std::to_string(sp) + ".ckpt"))));
      art.inverse_by_split[sp] = &inv_store.at(sp);
    }
  }
  return art;
}

int cmd_attack(const CommonArgs& args, const std::string& method, const std::string& capture_path,
               bool dump) {
  auto c = load(args);
  attacks::AttackConfig cfg = cli::default_attack_config(method);
  for (const auto& e : c.attacks)
    if (e.method == method) cfg = e.cfg;

  zoo::SplitModel model_store;
  std::optional<zoo::Generator> gen_store;
  std::optional<zoo::Autoencoder> ae_store;
  std::map<int, zoo::InverseNet> inv_store;
  const int split = c.model.split_point;
  auto art = load_artifacts(c, {method}, {split}, model_store, gen_store, ae_store, inv_store);

  std::vector<metrics::EvalRow> rows;
  std::vector<Tensor> recon;
  if (!capture_path.empty()) {
    auto replay = wire::replay_capture(capture_path);
    if (replay.truncated_tail)
      std::cerr << "warning: capture file has a truncated tail record\n";
    int idx = 0;
    for (const auto& h : replay.tensors) {
      attacks::AttackConfig run_cfg = cfg;
      run_cfg.seed = cli::attack_seed(c.master_seed, split, idx, c.eval.seeds.empty() ? 1 : c.eval.seeds[0]);
      auto res = cli::run_single_attack(method, run_cfg, h, art, split);
      recon.push_back(res.image);
      ++idx;
    }
    std::cout << "reconstructed " << recon.size() << " captured representations\n";
  } else {
    auto corpus = load_private(c);
    std::vector<Tensor> targets;
    for (int i = 0; i < c.eval.targets && i < corpus.size(); ++i)
      targets.push_back(corpus.images[static_cast<size_t>(i)]);
    for (uint64_t rs : c.eval.seeds) {
      std::vector<cli::TargetOutcome> outcomes;
      auto row = cli::evaluate_attack_method(method, cfg, targets, art, split, c.defense,
                                             c.master_seed, rs, c.eval.threads, &outcomes);
      rows.push_back(row);
      if (dump && rs == c.eval.seeds[0])
        for (auto& o : outcomes)
          if (o.ok) recon.push_back(o.image);
      std::cout << cli::csv_header() << "\n" << cli::row_to_csv(row) << "\n";
    }
    cli::append_rows_jsonl(rows, out_path(c, "rows.jsonl"));
  }
  std::vector<std::string> outputs{out_path(c, "rows.jsonl")};
  if (dump && !recon.empty()) {
    auto paths = cli::dump_images(recon, out_path(c, "recon_" + method + "_s" + std::to_string(split) + "_"));
    outputs.insert(outputs.end(), paths.begin(), paths.end());
  }
  manifest(c, "attack-" + method, {{"target", out_path(c, "target.ckpt")}}, outputs);
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  auto c = load(args);
  if (c.attacks.empty()) throw Error("evaluate: config lists no attacks");
  std::vector<std::string> methods;
  for (const auto& e : c.attacks) methods.push_back(e.method);

  zoo::SplitModel model_store;
  std::optional<zoo::Generator> gen_store;
  std::optional<zoo::Autoencoder> ae_store;
  std::map<int, zoo::InverseNet> inv_store;
  auto art = load_artifacts(c, methods, c.eval.split_points, model_store, gen_store, ae_store,
                            inv_store);

  auto corpus = load_private(c);
  std::vector<Tensor> targets;
  for (int i = 0; i < c.eval.targets && i < corpus.size(); ++i)
    targets.push_back(corpus.images[static_cast<size_t>(i)]);

  std::vector<metrics::EvalRow> rows;
  for (const auto& e : c.attacks)
    for (int sp : c.eval.split_points)
      for (uint64_t rs : c.eval.seeds)
        rows.push_back(cli::evaluate_attack_method(e.method, e.cfg, targets, art, sp, c.defense,
                                                   c.master_seed, rs, c.eval.threads));
  cli::append_rows_jsonl(rows, out_path(c, "rows.jsonl"));
  manifest(c, "evaluate", {{"target", out_path(c, "target.ckpt")}}, {out_path(c, "rows.jsonl")});
  std::cout << "wrote " << rows.size() << " rows\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  auto c = load(args);
  attacks::AttackConfig cfg = cli::default_attack_config("pfo");
  for (const auto& e : c.attacks)
    if (e.method == "pfo") cfg = e.cfg;

  zoo::SplitModel model_store;
  std::optional<zoo::Generator> gen_store;
  std::optional<zoo::Autoencoder> ae_store;
  std::map<int, zoo::InverseNet> inv_store;
  auto art = load_artifacts(c, {"pfo"}, c.eval.split_points, model_store, gen_store, ae_store,
                            inv_store);

  auto corpus = load_private(c);
  std::vector<Tensor> targets;
  for (int i = 0; i < c.eval.targets && i < corpus.size(); ++i)
    targets.push_back(corpus.images[static_cast<size_t>(i)]);

  std::vector<metrics::EvalRow> rows;
  for (int sp : c.eval.split_points)
    for (uint64_t rs : c.eval.seeds) {
      auto arm_rows = cli::ablate_rows(cfg, targets, art, sp, c.defense, c.master_seed, rs,
                                       c.eval.threads);
      rows.insert(rows.end(), arm_rows.begin(), arm_rows.end());
    }
  cli::append_rows_jsonl(rows, out_path(c, "rows.jsonl"));
  manifest(c, "ablate", {{"target", out_path(c, "target.ckpt")}}, {out_path(c, "rows.jsonl")});
  std::cout << "wrote " << rows.size() << " rows (3 arms per split point per seed)\n";
  return 0;
}

int cmd_report(const CommonArgs& args, std::vector<std::string> fragments, std::string out_csv) {
  auto c = load(args);
  if (fragments.empty()) fragments.push_back(out_path(c, "rows.jsonl"));
  if (out_csv.empty()) out_csv = out_path(c, "report.csv");
  cli::merge_report(fragments, out_csv);
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splitlab: split-inference privacy laboratory"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "experiment config file (JSON)");
  app.add_option("--set", common.overrides, "override config values (key.path=value)");

  std::string listen, server_addr, method = "pfo", capture, report_out;
  std::vector<std::string> fragments;
  int client_count = 4;
  bool dump = false;

  app.add_subcommand("gen-corpus", "generate the synthetic shape corpora");
  app.add_subcommand("train-target", "train the split classifier (defense-aware)");
  app.add_subcommand("train-gan", "train the generative prior on the public set");
  app.add_subcommand("train-ae", "train the autoencoder prior");
  app.add_subcommand("train-inverse", "train the inverse network for the configured split");
  auto* serve = app.add_subcommand("serve", "run the cloud-side inference server");
  serve->add_option("--listen", listen, "listen address host:port");
  auto* client = app.add_subcommand("client", "run the edge client against a server");
  client->add_option("--server", server_addr, "server address host:port");
  client->add_option("--count", client_count, "number of private images to send");
  auto* attack = app.add_subcommand("attack", "run one reconstruction attack");
  attack->add_option("--method", method, "rmle | lm | in | latent | pfo | pfo-bb");
  attack->add_option("--capture", capture, "attack a capture file instead of in-process targets");
  attack->add_flag("--dump-images", dump, "write reconstructions as ppm files");
  auto* ablate = app.add_subcommand("ablate", "run the three pfo ablation arms");
  auto* evaluate = app.add_subcommand("evaluate", "run the configured attack matrix");
  auto* report = app.add_subcommand("report", "merge row fragments into the final CSV");
  report->add_option("--rows", fragments, "row fragment files (jsonl)");
  report->add_option("--out", report_out, "output csv path");
  (void)ablate;
  (void)evaluate;

  CLI11_PARSE(app, argc, argv);

  std::string trace_dir = "out";
  try {
    if (app.got_subcommand("gen-corpus")) return cmd_gen_corpus(common);
    if (app.got_subcommand("train-target")) return cmd_train_target(common);
    if (app.got_subcommand("train-gan")) return cmd_train_gan(common);
    if (app.got_subcommand("train-ae")) return cmd_train_ae(common);
    if (app.got_subcommand("train-inverse")) return cmd_train_inverse(common);
    if (app.got_subcommand("serve")) return cmd_serve(common, listen);
    if (app.got_subcommand("client")) return cmd_client(common, server_addr, client_count);
    if (app.got_subcommand("attack")) return cmd_attack(common, method, capture, dump);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(common);
    if (app.got_subcommand("ablate")) return cmd_ablate(common);
    if (app.got_subcommand("report")) return cmd_report(common, fragments, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    try {
      auto cfg = cli::load_config(common.config_path, common.overrides);
      trace_dir = cfg.output_dir;
    } catch (...) {
    }
    try {
      std::filesystem::create_directories(trace_dir);
      const std::string trace = std::string("fatal: ") + e.what() + "\n";
      const auto path = (std::filesystem::path(trace_dir) / "error_trace.txt").string();
      io::write_file(path, trace.data(), trace.size());
      std::cerr << "trace written to " << path << "\n";
    } catch (...) {
    }
    return 1;
  }
  return 1;
}
