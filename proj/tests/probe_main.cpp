// Scratch diagnostics driver used while tuning the desk-scale setup.

#include <cstdlib>
#include <iostream>

#include "desk_config.hpp"

using namespace splitlab;

int main(int argc, char** argv) {
  const int steps = argc > 1 ? std::atoi(argv[1]) : 1200;
  const double lr = argc > 2 ? std::atof(argv[2]) : 1e-3;
  const int batch = argc > 3 ? std::atoi(argv[3]) : 16;
  const std::string mode = argc > 4 ? argv[4] : "target";

  auto pair = zoo::generate_corpus(desk::corpus_config());

  if (mode == "ceiling") {
    // prior expressiveness: fit w directly on image mse (no client model)
    const std::string dir = argc > 5 ? argv[5] : "/tmp/fixtures";
    auto fx = desk::load_fixtures(dir);
    double mean_psnr = 0;
    const int n = 6;
    for (int t = 0; t < n; ++t) {
      const Tensor& target = fx.priv.images[static_cast<size_t>(t)];
      Rng rng(100 + static_cast<uint64_t>(t));
      Tensor w({fx.generator.style_dim()});
      double best = 1e9;
      // multi-start
      for (int start = 0; start < 4; ++start) {
        Tensor z = Tensor::random_normal({fx.generator.latent_dim()}, rng);
        Tensor wc = fx.generator.map_latent(z);
        nn::Optimizer opt(nn::OptimMode::Adam, 0.02);
        for (int it = 0; it < steps; ++it) {
          zoo::Generator::SynthTape tape;
          Tensor img = fx.generator.synth_from(0, nullptr, wc, &tape);
          Tensor diff(img.shape);
          double m = 0;
          for (int64_t i = 0; i < img.size(); ++i) {
            diff[i] = 2.f * (img[i] - target[i]) / static_cast<float>(img.size());
            m += static_cast<double>(img[i] - target[i]) * (img[i] - target[i]);
          }
          m /= static_cast<double>(img.size());
          if (m < best) best = m;
          Tensor dw({fx.generator.style_dim()});
          fx.generator.synth_backward(tape, diff, nullptr, &dw);
          opt.step_single(wc, dw);
        }
      }
      mean_psnr += 10 * std::log10(1.0 / best) / n;
    }
    std::printf("prior ceiling (direct w fit): %.3f dB\n", mean_psnr);
    return 0;
  }

  if (mode == "rho") {
    const std::string dir = argc > 5 ? argv[5] : "/tmp/fixtures";
    auto fx = desk::load_fixtures(dir);
    std::vector<Tensor> targets(fx.priv.images.begin(), fx.priv.images.begin() + 8);
    cli::EvalArtifacts art;
    art.model = &fx.target;
    art.generator = &fx.generator;
    for (int sp : {1, 2}) {
      attacks::AttackConfig base = desk::pfo_attack();
      auto latent_row = cli::evaluate_attack_method("latent", base, targets, art, sp, {},
                                                    desk::kMasterSeed, 1, 2);
      std::printf("s%d latent: %7.3f\n", sp, latent_row.psnr_mean);
      const std::vector<std::vector<double>> rads = {
          {0.06, 0.02, 0.005}, {0.08, 0.01, 0.005}, {0.08, 0.02, 0.002},
          {0.10, 0.01, 0.002}, {0.08, 0.005, 0.001}};
      for (const auto& rv : rads) {
        attacks::AttackConfig cfg = base;
        cfg.stage_plain_sgd = true;
        cfg.stage_lr = 4.0;
        cfg.radii = rv;
        auto row = cli::evaluate_attack_method("pfo", cfg, targets, art, sp, {},
                                               desk::kMasterSeed, 1, 2);
        std::printf("s%d radii {%.2f %.2f %.2f}: latent %7.3f pfo %7.3f (ssim %.3f)\n", sp,
                    rv[0], rv[1], rv[2], latent_row.psnr_mean, row.psnr_mean, row.ssim_mean);
      }
    }
    return 0;
  }

  if (mode == "wopt") {
    const std::string dir = argc > 5 ? argv[5] : "/tmp/fixtures";
    auto fx = desk::load_fixtures(dir);
    std::vector<Tensor> targets(fx.priv.images.begin(), fx.priv.images.begin() + 6);
    cli::EvalArtifacts art;
    art.model = &fx.target;
    art.generator = &fx.generator;
    for (int iters : {350, 800, 1500}) {
      for (double wlr : {0.01, 0.025}) {
        attacks::AttackConfig cfg = desk::pfo_attack();
        cfg.w_iterations = iters;
        cfg.lr = wlr;
        auto row = cli::evaluate_attack_method("latent", cfg, targets, art, 1, {}, desk::kMasterSeed, 1, 2);
        std::printf("w_iters %4d lr %.3f s1: psnr %7.3f ssim %.3f\n", iters, wlr, row.psnr_mean,
                    row.ssim_mean);
      }
    }
    return 0;
  }

  if (mode == "noball") {
    // does the unconstrained arm eventually degrade with budget?
    const std::string dir = argc > 5 ? argv[5] : "/tmp/fixtures";
    auto fx = desk::load_fixtures(dir);
    std::vector<Tensor> targets(fx.priv.images.begin(), fx.priv.images.begin() + 4);
    cli::EvalArtifacts art;
    art.model = &fx.target;
    art.generator = &fx.generator;
    for (int iters : {150, 400, 1000}) {
      for (bool ball : {true, false}) {
        attacks::AttackConfig cfg = desk::pfo_attack();
        cfg.iterations = iters;
        cfg.l1_ball = ball;
        auto row = cli::evaluate_attack_method("pfo", cfg, targets, art, 2, {}, desk::kMasterSeed, 1, 2);
        std::printf("iters %4d %-7s: psnr %7.3f ssim %.3f mse %.4f\n", iters,
                    ball ? "ball" : "noball", row.psnr_mean, row.ssim_mean, row.mse_mean);
      }
    }
    return 0;
  }

  if (mode == "alpha") {
    const std::string dir = argc > 5 ? argv[5] : "/tmp/fixtures";
    auto fx = desk::load_fixtures(dir);
    std::vector<Tensor> targets(fx.priv.images.begin(), fx.priv.images.begin() + 8);
    cli::EvalArtifacts art;
    art.model = &fx.target;
    for (double alpha : {2.0, 0.05, 0.01, 0.003, 0.001, 0.0}) {
      for (int sp : {1, 3}) {
        attacks::AttackConfig cfg = desk::rmle_attack();
        cfg.tv_weight = alpha;
        auto row = cli::evaluate_attack_method("rmle", cfg, targets, art, sp, {}, desk::kMasterSeed, 1, 2);
        std::printf("alpha %.4f s%d: psnr %7.3f ssim %.3f\n", alpha, sp, row.psnr_mean, row.ssim_mean);
      }
    }
    return 0;
  }

  if (mode == "trend") {
    // attack ordering matrix on prebuilt fixtures: argv[5] = fixture dir
    const std::string dir = argc > 5 ? argv[5] : "/tmp/fixtures";
    auto fx = desk::load_fixtures(dir);
    std::vector<Tensor> targets(fx.priv.images.begin(), fx.priv.images.begin() + std::min(steps, fx.priv.size()));
    cli::EvalArtifacts art;
    art.model = &fx.target;
    art.generator = &fx.generator;
    art.autoencoder = &fx.autoencoder;
    for (auto& [sp, inv] : fx.inverse) art.inverse_by_split[sp] = &inv;

    auto show = [&](const char* name, const std::string& method, const attacks::AttackConfig& cfg,
                    int sp, const defenses::DefenseConfig& def = {}) {
      auto t0 = std::chrono::steady_clock::now();
      auto row = cli::evaluate_attack_method(method, cfg, targets, art, sp, def,
                                             desk::kMasterSeed, 1, 2);
      std::printf("%-14s s%d  psnr %7.3f  mse %.4f  ssim %.3f  n=%d  (%.1fs)\n", name, sp,
                  row.psnr_mean, row.mse_mean, row.ssim_mean, row.n,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      return row;
    };

    for (int sp : {1, 2, 3}) {
      show("rmle", "rmle", desk::rmle_attack(), sp);
      show("lm", "lm", desk::lm_attack(), sp);
      show("in", "in", desk::pfo_attack(), sp);
      show("latent", "latent", desk::pfo_attack(), sp);
      show("pfo", "pfo", desk::pfo_attack(), sp);
      attacks::AttackConfig noball = desk::pfo_attack();
      noball.l1_ball = false;
      show("pfo-noball", "pfo", noball, sp);
      std::printf("\n");
    }
    defenses::DefenseConfig noise;
    noise.kind = defenses::DefenseKind::Noise;
    noise.noise_scale = 1.0;
    std::printf("with noise mask b=1.0 at split 1:\n");
    show("rmle+noise", "rmle", desk::rmle_attack(), 1, noise);
    show("lm+noise", "lm", desk::lm_attack(), 1, noise);
    show("in+noise", "in", desk::pfo_attack(), 1, noise);
    show("latent+noise", "latent", desk::pfo_attack(), 1, noise);
    show("pfo+noise", "pfo", desk::pfo_attack(), 1, noise);
    return 0;
  }

  if (mode == "dtrain") {
    // isolated discriminator training against a frozen random generator
    Rng rng(7);
    zoo::Generator gen(desk::generator_config(), &rng);
    nn::Stack disc = zoo::make_discriminator<float>(16, rng);
    nn::Optimizer opt(nn::OptimMode::Adam, lr, 0.5);
    auto params = disc.param_list();
    for (int step = 0; step < steps; ++step) {
      nn::StackGradsT<float> grads;
      double loss = 0;
      for (int s = 0; s < batch; ++s) {
        const bool real = s % 2 == 0;
        Tensor x = real ? pair.pub.images[static_cast<size_t>(rng.below(static_cast<uint64_t>(pair.pub.size())))]
                        : gen.sample_forward(Tensor::random_normal({32}, rng), nullptr);
        nn::CacheT<float> cache;
        Tensor logit = disc.forward(x, &cache);
        const double p = 1.0 / (1.0 + std::exp(-logit[0]));
        loss += real ? -std::log(std::max(p, 1e-12)) : -std::log(std::max(1.0 - p, 1e-12));
        Tensor dl({1}, {static_cast<float>((p - (real ? 1.0 : 0.0)) / batch)});
        disc.backward(cache, dl, &grads);
      }
      opt.step(params, disc.grad_list(grads));
      if (step % (steps / 10) == 0) std::printf("step %d loss %.4f\n", step, loss / batch);
    }
    double d_real = 0, d_fake = 0;
    for (int i = 0; i < 32; ++i) {
      d_real += 1.0 / (1.0 + std::exp(-disc.forward(pair.pub.images[static_cast<size_t>(i)])[0])) / 32;
      d_fake += 1.0 / (1.0 + std::exp(-disc.forward(gen.sample_forward(
                                 Tensor::random_normal({32}, rng), nullptr))[0])) / 32;
    }
    std::printf("D(real) %.4f  D(fake) %.4f\n", d_real, d_fake);
    return 0;
  }

  if (mode == "gan") {
    zoo::TrainConfig tc = desk::gan_train();
    tc.steps = steps;
    tc.lr = lr;
    tc.batch = batch;
    if (argc > 5) tc.pretrain_steps = std::atoi(argv[5]);
    auto res = zoo::train_gan(pair.pub, desk::generator_config(), tc);

    {  // prior ceiling: direct w fit on four private targets
      double mean_psnr = 0;
      const int n = 4;
      for (int t = 0; t < n; ++t) {
        const Tensor& target = pair.priv.images[static_cast<size_t>(t)];
        Rng crng(100 + static_cast<uint64_t>(t));
        double best = 1e9;
        for (int start = 0; start < 3; ++start) {
          Tensor wc = res.generator.map_latent(Tensor::random_normal({32}, crng));
          nn::Optimizer opt(nn::OptimMode::Adam, 0.02);
          for (int it = 0; it < 300; ++it) {
            zoo::Generator::SynthTape tape;
            Tensor img = res.generator.synth_from(0, nullptr, wc, &tape);
            Tensor diff(img.shape);
            double m = 0;
            for (int64_t i = 0; i < img.size(); ++i) {
              diff[i] = 2.f * (img[i] - target[i]) / static_cast<float>(img.size());
              m += static_cast<double>(img[i] - target[i]) * (img[i] - target[i]);
            }
            m /= static_cast<double>(img.size());
            if (m < best) best = m;
            Tensor dw({32});
            res.generator.synth_backward(tape, diff, nullptr, &dw);
            opt.step_single(wc, dw);
          }
        }
        mean_psnr += 10 * std::log10(1.0 / best) / n;
      }
      std::printf("ceiling %.3f dB\n", mean_psnr);
    }
    std::cout << "g_loss:";
    for (size_t i = 0; i < res.g_loss_trace.size(); i += std::max<size_t>(1, res.g_loss_trace.size() / 10))
      std::cout << " " << res.g_loss_trace[i];
    std::cout << "\nd_loss:";
    for (size_t i = 0; i < res.d_loss_trace.size(); i += std::max<size_t>(1, res.d_loss_trace.size() / 10))
      std::cout << " " << res.d_loss_trace[i];
    std::cout << "\ndisc score " << res.mean_disc_score << ", jsd " << res.histogram_jsd
              << (res.mode_collapse_warning ? " (low variance)" : "") << "\n";
    // dump a few samples for visual inspection
    Rng rng(99);
    std::vector<Tensor> samples;
    for (int i = 0; i < 8; ++i)
      samples.push_back(res.generator.sample_forward(Tensor::random_normal({32}, rng), nullptr));
    cli::dump_images(samples, "/tmp/gan_sample_");
    for (int i = 0; i < 4; ++i) cli::write_ppm(pair.pub.images[static_cast<size_t>(i)], "/tmp/real_" + std::to_string(i) + ".ppm");

    auto stats = [](const Tensor& t, const char* tag) {
      float lo = 1e9f, hi = -1e9f;
      double mu = 0;
      for (float v : t.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        mu += v;
      }
      mu /= static_cast<double>(t.size());
      std::printf("%s: min %.3f mean %.3f max %.3f\n", tag, lo, mu, hi);
    };
    for (int i = 0; i < 3; ++i) stats(samples[static_cast<size_t>(i)], "sample");
    stats(pair.pub.images[0], "real");
    std::vector<double> hist_s(16, 0), hist_r(16, 0);
    for (const auto& s : samples)
      for (float v : s.data) hist_s[static_cast<size_t>(std::clamp(static_cast<int>(v * 16), 0, 15))]++;
    for (int i = 0; i < 64; ++i)
      for (float v : pair.pub.images[static_cast<size_t>(i)].data)
        hist_r[static_cast<size_t>(std::clamp(static_cast<int>(v * 16), 0, 15))]++;
    std::printf("sample hist:");
    for (double v : hist_s) std::printf(" %.0f", v);
    std::printf("\nreal hist:  ");
    for (double v : hist_r) std::printf(" %.0f", v);
    std::printf("\n");

    double d_real = 0, d_fake = 0;
    for (int i = 0; i < 32; ++i) {
      d_real += 1.0 / (1.0 + std::exp(-res.discriminator.forward(pair.pub.images[static_cast<size_t>(i)])[0])) / 32;
      d_fake += 1.0 / (1.0 + std::exp(-res.discriminator.forward(
                                 res.generator.sample_forward(Tensor::random_normal({32}, rng), nullptr))[0])) /
                32;
    }
    std::printf("D(real) %.4f  D(fake) %.4f\n", d_real, d_fake);
    double wnorm = 0;
    for (auto* p : res.discriminator.param_list()) wnorm += p->l1_norm();
    std::printf("disc param l1 %.4f\n", wnorm);
    return 0;
  }
  zoo::TrainConfig tc = desk::target_train();
  tc.steps = steps;
  tc.lr = lr;
  tc.batch = batch;
  auto res = zoo::train_target(pair.priv, desk::model_config(), tc);

  std::cout << "loss:";
  for (size_t i = 0; i < res.loss_trace.size(); i += std::max<size_t>(1, res.loss_trace.size() / 12))
    std::cout << " " << res.loss_trace[i];
  std::cout << " | final " << res.loss_trace.back() << "\n";

  // train-set accuracy
  int correct = 0;
  const int train_n = pair.priv.size() - std::max(1, static_cast<int>(pair.priv.size() * tc.holdout_fraction));
  for (int i = 0; i < train_n; ++i) {
    Tensor logits = res.model.forward(pair.priv.images[static_cast<size_t>(i)]);
    int arg = 0;
    for (int64_t k = 1; k < logits.size(); ++k)
      if (logits[k] > logits[arg]) arg = static_cast<int>(k);
    if (arg == pair.priv.labels[static_cast<size_t>(i)]) ++correct;
  }
  std::cout << "train acc " << static_cast<double>(correct) / train_n << ", holdout acc "
            << res.holdout_accuracy << ", dcor " << res.holdout_dcor << "\n";
  return 0;
}
