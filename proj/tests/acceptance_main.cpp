// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code = number of failures.
//
// Usage: acceptance <fixture-dir> [criterion-number]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "desk_config.hpp"
#include "fd_helpers.hpp"
#include "test_priors.hpp"

using namespace splitlab;

namespace {

struct Criterion {
  int number;
  std::string detail;
  bool pass = true;
  double seconds = 0;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + why;
    }
  }
  void note(const std::string& info) { detail += (detail.empty() ? "" : "; ") + info; }
};

int g_failures = 0;

void run_criterion(int number, const char* title, const std::function<void(Criterion&)>& body,
                   double time_limit_s = 0) {
  Criterion c{number, ""};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.require(false, std::string("exception: ") + e.what());
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit_s > 0 && c.seconds > time_limit_s)
    c.require(false, "runtime " + std::to_string(c.seconds) + "s exceeds " +
                         std::to_string(time_limit_s) + "s");
  std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", c.pass ? "PASS" : "FAIL", number, title,
              c.seconds, c.detail.empty() ? "" : " — ", c.detail.c_str());
  std::fflush(stdout);
  if (!c.pass) ++g_failures;
}

// --- shared helpers -------------------------------------------------------

Tensord project_l1_oracle(const Tensord& v, const Tensord& center, double radius) {
  Tensord d(v.shape);
  double l1 = 0;
  for (int64_t i = 0; i < v.size(); ++i) {
    d[i] = v[i] - center[i];
    l1 += std::abs(d[i]);
  }
  if (l1 <= radius) return v;
  double lo = 0, hi = 0;
  for (int64_t i = 0; i < v.size(); ++i) hi = std::max(hi, std::abs(d[i]));
  for (int iter = 0; iter < 200; ++iter) {
    const double theta = 0.5 * (lo + hi);
    double s = 0;
    for (int64_t i = 0; i < v.size(); ++i) s += std::max(std::abs(d[i]) - theta, 0.0);
    (s > radius ? lo : hi) = theta;
  }
  const double theta = 0.5 * (lo + hi);
  Tensord out(v.shape);
  for (int64_t i = 0; i < v.size(); ++i) {
    const double shrunk = std::max(std::abs(d[i]) - theta, 0.0);
    out[i] = center[i] + (d[i] < 0 ? -shrunk : shrunk);
  }
  return out;
}

double mse_scalar_oracle(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (int c = 0; c < a.dim(0); ++c)
    for (int i = 0; i < a.dim(1); ++i)
      for (int j = 0; j < a.dim(2); ++j) {
        const double d = static_cast<double>(a.at(c, i, j)) - static_cast<double>(b.at(c, i, j));
        s += d * d;
      }
  return s / (a.dim(0) * a.dim(1) * a.dim(2));
}

double ssim_scalar_oracle(const Tensor& a, const Tensor& b) {
  const int ch = a.dim(0), h = a.dim(1), w = a.dim(2);
  const int win = 7;
  const double C1 = 1e-4, C2 = 9e-4;
  std::vector<double> ga(static_cast<size_t>(h) * w, 0), gb(static_cast<size_t>(h) * w, 0);
  for (int c = 0; c < ch; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        ga[static_cast<size_t>(i) * w + j] += a.at(c, i, j) / ch;
        gb[static_cast<size_t>(i) * w + j] += b.at(c, i, j) / ch;
      }
  double total = 0;
  int count = 0;
  for (int top = 0; top + win <= h; ++top)
    for (int left = 0; left + win <= w; ++left) {
      double mua = 0, mub = 0, va = 0, vb = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          mua += ga[static_cast<size_t>(top + i) * w + left + j];
          mub += gb[static_cast<size_t>(top + i) * w + left + j];
        }
      mua /= win * win;
      mub /= win * win;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double da = ga[static_cast<size_t>(top + i) * w + left + j] - mua;
          const double db = gb[static_cast<size_t>(top + i) * w + left + j] - mub;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= win * win;
      vb /= win * win;
      cov /= win * win;
      total += ((2 * mua * mub + C1) * (2 * cov + C2)) /
               ((mua * mua + mub * mub + C1) * (va + vb + C2));
      ++count;
    }
  return total / count;
}

struct MeanRow {
  double psnr = 0;
  int n = 0;
};

}  // namespace

int main(int argc, char** argv) {
  const std::string fixture_dir = argc > 1 ? argv[1] : "fixtures";
  const int only = argc > 2 ? std::atoi(argv[2]) : 0;
  auto want = [&](int n) { return only == 0 || only == n; };

  desk::Fixtures fx;
  bool have_fixtures = false;
  try {
    fx = desk::load_fixtures(fixture_dir);
    have_fixtures = true;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load fixtures from %s: %s\n", fixture_dir.c_str(), e.what());
  }

  // ---- 1. gradient integrity ---------------------------------------------
  if (want(1))
    run_criterion(1, "gradient integrity (finite differences, 64-bit)", [&](Criterion& c) {
      Rng rng(909);
      double worst = 0;
      auto upd = [&](double e) { worst = std::max(worst, e); };
      for (int rep = 0; rep < 20; ++rep) {
        auto nudge = [&](Tensord t) {
          for (auto& v : t.data)
            if (std::abs(v) < 0.05) v += v < 0 ? -0.05 : 0.05;
          return t;
        };
        {
          nn::Stackd s;
          s.push(nn::LayerT<double>::dense(6, 4));
          s.init_params(rng);
          upd(nn::grad_check(s, Tensord::random_normal({6}, rng), 1e-5));
        }
        {
          nn::Stackd s;
          s.push(nn::LayerT<double>::conv2d(2, 3, rep % 2 ? 2 : 1));
          s.init_params(rng);
          upd(nn::grad_check(s, Tensord::random_normal({2, 5, 6}, rng), 1e-5));
        }
        {
          nn::Stackd s;
          s.push(nn::LayerT<double>::leaky_relu(0.2));
          upd(nn::grad_check(s, nudge(Tensord::random_normal({10}, rng)), 1e-5));
        }
        {
          nn::Stackd s;
          s.push(nn::LayerT<double>::relu());
          upd(nn::grad_check(s, nudge(Tensord::random_normal({10}, rng)), 1e-5));
        }
        {
          nn::Stackd s;
          s.push(nn::LayerT<double>::tanh());
          upd(nn::grad_check(s, Tensord::random_normal({10}, rng), 1e-5));
        }
        {
          nn::Stackd s;
          s.push(nn::LayerT<double>::upsample2x());
          upd(nn::grad_check(s, Tensord::random_normal({2, 3, 3}, rng), 1e-5));
        }
        {
          nn::Stackd s;
          s.push(nn::LayerT<double>::instance_norm(2));
          upd(nn::grad_check(s, Tensord::random_normal({2, 4, 4}, rng), 1e-5));
        }
        {
          nn::Stackd s;
          s.push(nn::LayerT<double>::style_conv2d(2, 3, 4));
          s.init_params(rng);
          Tensord w = Tensord::random_normal({4}, rng);
          upd(nn::grad_check(s, Tensord::random_normal({2, 4, 4}, rng), 1e-5, &w));
        }
        {
          Tensord x = Tensord::random_uniform({2, 5, 5}, rng);
          upd(testsupport::fd_max_rel_err(
              x, [](const Tensord& t) { return nn::total_variation(t); },
              nn::total_variation_backward(x)));
        }
        {
          Tensord z = Tensord::random_normal({5, 4}, rng);
          upd(testsupport::fd_max_rel_err(
              z, [](const Tensord& t) { return nn::kl_gaussian_reg(t); },
              nn::kl_gaussian_reg_backward(z)));
        }
      }
      c.require(worst < 1e-4, "layer/regularizer gradient error " + std::to_string(worst));

      double worst_dcor = 0;
      for (int rep = 0; rep < 20; ++rep) {
        Tensord x = Tensord::random_normal({5, 4}, rng);
        Tensord h = Tensord::random_normal({5, 3}, rng);
        worst_dcor = std::max(
            worst_dcor, testsupport::fd_max_rel_err(
                            h, [&](const Tensord& hh) { return defenses::distance_correlation(x, hh); },
                            defenses::distance_correlation_backward(x, h), 1e-6));
      }
      c.require(worst_dcor < 1e-3, "dCor gradient error " + std::to_string(worst_dcor));
      c.note("max layer err " + std::to_string(worst) + ", dcor err " + std::to_string(worst_dcor));
    }, 60);

  // ---- 2. projection oracle + feasibility --------------------------------
  if (want(2))
    run_criterion(2, "l1 projection matches oracle; PFO iterates feasible", [&](Criterion& c) {
      Rng rng(515);
      double worst = 0;
      for (int rep = 0; rep < 200; ++rep) {
        Tensord v = Tensord::random_normal({10}, rng, 2.0);
        Tensord center = Tensord::random_normal({10}, rng);
        const double radius = rng.uniform(0.1, 6.0);
        Tensord mine = attacks::project_l1_ball(v, center, radius);
        worst = std::max(worst, mine.l2_distance(project_l1_oracle(v, center, radius)));
        c.require(mine.l1_distance(center) <= radius + 1e-9, "projection infeasible");
      }
      c.require(worst < 1e-6, "projection-oracle distance " + std::to_string(worst));

      if (have_fixtures) {
        attacks::AttackConfig cfg = desk::pfo_attack();
        cfg.iterations = 25;
        cfg.select_iterations = 5;
        cfg.w_iterations = 10;
        cfg.candidates = 2;
        cfg.seed = 11;
        nn::Stack client = fx.target.client_stack(2);
        Tensor h_tar = client.forward(fx.priv.images[0]);
        auto res = attacks::attack_pfo(h_tar, client, fx.generator, cfg);
        c.require(res.max_hf_ball_violation <= 1e-6 && res.max_w_ball_violation <= 1e-6,
                  "ball constraint violated by " +
                      std::to_string(std::max(res.max_hf_ball_violation, res.max_w_ball_violation)));
      } else {
        c.require(false, "fixtures unavailable");
      }
      c.note("max oracle distance " + std::to_string(worst));
    }, 60);

  // ---- 3. metric oracles ---------------------------------------------------
  if (want(3))
    run_criterion(3, "metric oracles and closed forms", [&](Criterion& c) {
      Rng rng(7);
      double worst = 0;
      for (int rep = 0; rep < 20; ++rep) {
        Tensor a = Tensor::random_uniform({3, 16, 16}, rng);
        Tensor b = Tensor::random_uniform({3, 16, 16}, rng);
        const double m = mse_scalar_oracle(a, b);
        worst = std::max(worst, std::abs(metrics::mse(a, b) - m));
        worst = std::max(worst, std::abs(metrics::ssim(a, b) - ssim_scalar_oracle(a, b)));
        worst = std::max(worst, std::abs(metrics::psnr(a, b) - 10 * std::log10(1.0 / m)));
      }
      c.require(worst < 1e-8, "oracle deviation " + std::to_string(worst));

      Tensor z0 = Tensor::zeros({1, 8, 8});
      c.require(std::abs(metrics::psnr(z0, Tensor::full({1, 8, 8}, 0.1f)) - 20.0) < 1e-6,
                "psnr(mse=0.01) != 20 dB");
      const double c1 = 1e-4;
      c.require(std::abs(metrics::ssim(z0, Tensor::full({1, 8, 8}, 1.f)) - c1 / (1 + c1)) < 1e-12,
                "ssim(0 vs 1) != C1/(1+C1)");
      c.note("max deviation " + std::to_string(worst));
    }, 60);

  // ---- 4. linear recovery sanity -------------------------------------------
  if (want(4))
    run_criterion(4, "linear sanity: rmle and w-opt recover through invertible M_C", [&](Criterion& c) {
      const std::vector<int> shape{3, 8, 8};
      const int n = 192;
      nn::Stack client;
      client.push(nn::LayerT<float>::dense(n, n));
      Rng wr(5);
      for (int r = 0; r < n; ++r)
        for (int col = 0; col < n; ++col)
          client.layers[0].W[static_cast<int64_t>(r) * n + col] =
              static_cast<float>((r == col ? 1.0 : 0.0) + 0.05 * wr.normal() / std::sqrt(n));
      Rng rng(2024);
      Tensor target = Tensor::random_uniform(shape, rng, 0.1f, 0.9f);
      Tensor h_tar = client.forward(target);

      attacks::AttackConfig cfg;
      cfg.iterations = 2000;
      cfg.lr = 0.02;
      cfg.tv_weight = 0;
      cfg.seed = 3;
      auto rmle = attacks::attack_rmle(h_tar, client, shape, cfg);
      double m = 0;
      for (int64_t i = 0; i < target.size(); ++i) {
        const double d = rmle.image[i] - target[i];
        m += d * d;
      }
      m /= static_cast<double>(target.size());
      c.require(m < 1e-3, "rmle recovery mse " + std::to_string(m));

      testsupport::IdentityPriorT<float> prior(shape);
      cfg.w_iterations = 2000;
      auto wopt = attacks::pfo_optimize_w(flatten(Tensor::random_uniform(shape, rng)), h_tar,
                                          client, prior, cfg);
      Tensor image(shape, wopt.w0.data);
      double m2 = 0;
      for (int64_t i = 0; i < target.size(); ++i) {
        const double d = image[i] - target[i];
        m2 += d * d;
      }
      m2 /= static_cast<double>(target.size());
      c.require(m2 < 1e-3, "w-opt recovery mse " + std::to_string(m2));
      c.note("rmle mse " + std::to_string(m) + ", w-opt mse " + std::to_string(m2));
    }, 120);

  // ---- 5. zero-radius degeneracy -------------------------------------------
  if (want(5))
    run_criterion(5, "zero-radius PFO is bit-identical to latent-only", [&](Criterion& c) {
      if (!have_fixtures) {
        c.require(false, "fixtures unavailable");
        return;
      }
      attacks::AttackConfig cfg = desk::pfo_attack();
      cfg.iterations = 30;
      cfg.select_iterations = 10;
      cfg.w_iterations = 40;
      cfg.candidates = 4;
      cfg.radii = {0.0, 0.0, 0.0};
      cfg.seed = 77;
      nn::Stack client = fx.target.client_stack(1);
      for (int t = 0; t < 3; ++t) {
        Tensor h_tar = client.forward(fx.priv.images[static_cast<size_t>(t)]);
        auto pfo = attacks::attack_pfo(h_tar, client, fx.generator, cfg);
        auto latent = attacks::attack_latent_only(h_tar, client, fx.generator, cfg);
        c.require(pfo.image.data == latent.image.data,
                  "images differ on target " + std::to_string(t));
      }
    });

  // ---- 6 + 7 + 8: trend-level orderings -----------------------------------
  std::map<std::string, std::map<int, MeanRow>> clean_rows;  // attack -> split -> mean
  if (want(6) || want(7) || want(8)) {
    if (have_fixtures) {
      cli::EvalArtifacts art;
      art.model = &fx.target;
      art.generator = &fx.generator;
      art.autoencoder = &fx.autoencoder;
      for (auto& [sp, inv] : fx.inverse) art.inverse_by_split[sp] = &inv;
      std::vector<Tensor> targets(fx.priv.images.begin(), fx.priv.images.begin() + 16);
      const std::vector<uint64_t> seeds{1, 2, 3};

      auto accumulate = [&](const std::string& name, const std::string& method,
                            const attacks::AttackConfig& cfg, int sp,
                            const defenses::DefenseConfig& def,
                            std::map<std::string, std::map<int, MeanRow>>& store) {
        for (uint64_t rs : seeds) {
          auto row = cli::evaluate_attack_method(method, cfg, targets, art, sp, def,
                                                 desk::kMasterSeed, rs, 2);
          auto& m = store[name][sp];
          m.psnr += row.psnr_mean;
          m.n += 1;
        }
        store[name][sp].psnr /= store[name][sp].n;
        store[name][sp].n = 1;
      };

      if (want(6) || want(7) || want(8)) {
        run_criterion(6, "Table-1 ordering and split-depth monotonicity", [&](Criterion& c) {
          for (int sp : {1, 2, 3}) {
            accumulate("rmle", "rmle", desk::rmle_attack(), sp, {}, clean_rows);
            accumulate("lm", "lm", desk::lm_attack(), sp, {}, clean_rows);
            accumulate("in", "in", desk::pfo_attack(), sp, {}, clean_rows);
            accumulate("latent", "latent", desk::pfo_attack(), sp, {}, clean_rows);
            accumulate("pfo", "pfo", desk::pfo_attack(), sp, {}, clean_rows);
          }
          const double pfo1 = clean_rows["pfo"][1].psnr;
          const double lat1 = clean_rows["latent"][1].psnr;
          const double rmle1 = clean_rows["rmle"][1].psnr;
          c.require(pfo1 >= lat1, "pfo " + std::to_string(pfo1) + " < latent " + std::to_string(lat1));
          c.require(lat1 >= rmle1,
                    "latent " + std::to_string(lat1) + " < rmle " + std::to_string(rmle1));
          for (const char* a : {"rmle", "latent", "pfo"}) {
            const auto& m = clean_rows[a];
            c.require(m.at(1).psnr >= m.at(2).psnr && m.at(2).psnr >= m.at(3).psnr,
                      std::string(a) + " not monotone: " + std::to_string(m.at(1).psnr) + "/" +
                          std::to_string(m.at(2).psnr) + "/" + std::to_string(m.at(3).psnr));
          }
          std::ostringstream os;
          os.precision(4);
          os << "s1 pfo " << pfo1 << " >= latent " << lat1 << " >= rmle " << rmle1;
          c.note(os.str());
        }, 900);

        run_criterion(7, "Table-8 ablation direction at split 2", [&](Criterion& c) {
          std::map<std::string, std::map<int, MeanRow>> arms;
          attacks::AttackConfig noball = desk::pfo_attack();
          noball.l1_ball = false;
          accumulate("pfo-noball", "pfo", noball, 2, {}, arms);
          const double full = clean_rows["pfo"][2].psnr;
          const double wo_pfo = clean_rows["latent"][2].psnr;
          const double wo_ball = arms["pfo-noball"][2].psnr;
          c.require(full > wo_pfo, "full " + std::to_string(full) + " <= w/o-pfo " + std::to_string(wo_pfo));
          c.require(full >= wo_ball,
                    "full " + std::to_string(full) + " < no-ball " + std::to_string(wo_ball));
          std::ostringstream os;
          os.precision(4);
          os << "full " << full << " > w/o-pfo " << wo_pfo << ", >= no-ball " << wo_ball;
          c.note(os.str());
        }, 600);

        run_criterion(8, "defense effect direction (noise mask, NoPeek dCor)", [&](Criterion& c) {
          defenses::DefenseConfig noise;
          noise.kind = defenses::DefenseKind::Noise;
          noise.noise_scale = 1.0;
          std::map<std::string, std::map<int, MeanRow>> noisy;
          accumulate("rmle", "rmle", desk::rmle_attack(), 1, noise, noisy);
          accumulate("lm", "lm", desk::lm_attack(), 1, noise, noisy);
          accumulate("in", "in", desk::pfo_attack(), 1, noise, noisy);
          accumulate("latent", "latent", desk::pfo_attack(), 1, noise, noisy);
          accumulate("pfo", "pfo", desk::pfo_attack(), 1, noise, noisy);
          for (const char* a : {"rmle", "lm", "in", "latent", "pfo"})
            c.require(noisy[a][1].psnr < clean_rows[a][1].psnr,
                      std::string(a) + " did not drop under noise (" +
                          std::to_string(noisy[a][1].psnr) + " vs " +
                          std::to_string(clean_rows[a][1].psnr) + ")");
          c.require(fx.nopeek_dcor < fx.undefended_dcor,
                    "nopeek dcor " + std::to_string(fx.nopeek_dcor) + " not below undefended " +
                        std::to_string(fx.undefended_dcor));
          std::ostringstream os;
          os.precision(4);
          os << "nopeek dcor " << fx.nopeek_dcor << " < " << fx.undefended_dcor;
          c.note(os.str());
        }, 600);
      }
    } else {
      for (int n : {6, 7, 8})
        if (want(n))
          run_criterion(n, "trend criteria", [&](Criterion& c) { c.require(false, "fixtures unavailable"); });
    }
  }

  // ---- 9. black-box ---------------------------------------------------------
  if (want(9))
    run_criterion(9, "black-box: CMA core and budget-matched random search", [&](Criterion& c) {
      Tensord x0({4}, {2.0, -1.5, 1.0, 0.5});
      opt::CmaEs cma(x0, 0.5, 77);
      long evals = 0;
      while (evals < 5000 && cma.best_value() > 1e-6) {
        const auto& pop = cma.ask();
        std::vector<double> vals(pop.size());
        for (size_t i = 0; i < pop.size(); ++i) {
          double s = 0;
          for (int64_t k = 0; k < pop[i].size(); ++k) s += pop[i][k] * pop[i][k];
          vals[i] = s;
          ++evals;
        }
        cma.tell(vals);
      }
      c.require(cma.best_value() < 1e-6,
                "sphere best " + std::to_string(cma.best_value()) + " after " + std::to_string(evals));
      c.note("sphere solved in " + std::to_string(evals) + " evals");

      if (!have_fixtures) {
        c.require(false, "fixtures unavailable");
        return;
      }
      nn::Stack client = fx.target.client_stack(2);
      double pfo_mean = 0, rs_mean = 0;
      const int n_seeds = 10;
      for (int seed = 1; seed <= n_seeds; ++seed) {
        Tensor h_tar = client.forward(fx.priv.images[static_cast<size_t>(seed)]);
        attacks::AttackConfig cfg = desk::pfo_attack();
        cfg.iterations = 10;
        cfg.w_iterations = 14;
        cfg.candidates = 8;
        cfg.seed = static_cast<uint64_t>(seed);
        cfg.query_budget = 400;
        cfg.mode = attacks::AttackMode::Blackbox;
        attacks::QueryOracle o1{[&](const Tensor& x) { return client.forward(x); }, cfg.query_budget};
        auto bb = attacks::attack_pfo_blackbox(h_tar, o1, fx.generator, cfg);
        attacks::QueryOracle o2{[&](const Tensor& x) { return client.forward(x); }, cfg.query_budget};
        auto rs = attacks::blackbox_random_search(h_tar, o2, fx.generator, cfg);
        pfo_mean += bb.final_total_loss / n_seeds;
        rs_mean += rs.final_total_loss / n_seeds;
      }
      c.require(pfo_mean <= rs_mean, "cma pfo " + std::to_string(pfo_mean) +
                                         " not better than random search " + std::to_string(rs_mean));
      std::ostringstream os;
      os.precision(4);
      os << "mean loss cma " << pfo_mean << " vs random " << rs_mean;
      c.note(os.str());
    }, 600);

  // ---- 10. wire integrity ---------------------------------------------------
  if (want(10))
    run_criterion(10, "wire integrity: bit-exact split inference, fuzzing, replay", [&](Criterion& c) {
      if (!have_fixtures) {
        c.require(false, "fixtures unavailable");
        return;
      }
      // fuzzing
      Rng rng(4711);
      for (int rep = 0; rep < 10000; ++rep) {
        const size_t len = rng.below(64);
        std::vector<uint8_t> bytes(len);
        for (auto& b : bytes) b = static_cast<uint8_t>(rng.below(256));
        if (rep % 4 == 0 && len >= 4) {
          bytes[0] = 'S'; bytes[1] = 'I'; bytes[2] = 'P'; bytes[3] = '1';
        }
        (void)wire::try_parse(bytes.data(), bytes.size());
      }

      const std::string cap = fixture_dir + "/acceptance_capture.bin";
      for (int sp : {1, 2, 3}) {
        zoo::SplitModel model = fx.target;
        model.config.split_point = sp;
        wire::ServerConfig sc;
        sc.capture = sp == 1;
        sc.capture_path = cap;
        wire::Server server(model, sc);
        server.start();
        std::vector<Tensor> imgs(fx.priv.images.begin(), fx.priv.images.begin() + 4);
        auto run = wire::run_client(model, imgs, {}, "127.0.0.1", server.port());
        for (size_t i = 0; i < imgs.size(); ++i)
          c.require(run.logits[i].data == fx.target.forward(imgs[i]).data,
                    "wire logits differ at split " + std::to_string(sp));
        server.stop();
      }

      // replayed h produces identical attack results
      auto replay = wire::replay_capture(cap);
      c.require(!replay.truncated_tail && replay.tensors.size() == 4, "capture incomplete");
      attacks::AttackConfig cfg = desk::pfo_attack();
      cfg.iterations = 10;
      cfg.select_iterations = 5;
      cfg.w_iterations = 15;
      cfg.candidates = 2;
      cfg.seed = 5;
      nn::Stack client = fx.target.client_stack(1);
      for (size_t i = 0; i < replay.tensors.size(); ++i) {
        Tensor h_local = client.forward(fx.priv.images[i]);
        c.require(replay.tensors[i].data == h_local.data, "replayed h differs");
        auto a = attacks::attack_latent_only(replay.tensors[i], client, fx.generator, cfg);
        auto b = attacks::attack_latent_only(h_local, client, fx.generator, cfg);
        c.require(a.image.data == b.image.data, "attack on replayed h differs");
      }
      std::remove(cap.c_str());
    }, 300);

  // ---- 11. pipeline reproducibility ----------------------------------------
  if (want(11))
    run_criterion(11, "end-to-end pipeline reproducibility (identical CSV)", [&](Criterion& c) {
#ifndef SPLITLAB_CLI_PATH
      c.require(false, "CLI path not compiled in");
#else
      namespace fsys = std::filesystem;
      const std::string cli = SPLITLAB_CLI_PATH;
      auto run_pipeline = [&](const std::string& dir) {
        fsys::remove_all(dir);
        fsys::create_directories(dir);
        const std::string cfgpath = dir + "/config.json";
        nlohmann::json j;
        j["master_seed"] = 7;
        j["output_dir"] = dir;
        j["corpus"] = {{"private_count", 48}, {"public_count", 64}};
        j["train"] = {{"target", {{"steps", 150}}},
                      {"gan", {{"steps", 40}, {"pretrain_steps", 120}}}};
        j["attacks"] = nlohmann::json::array(
            {{{"method", "pfo"}, {"iterations", 12}, {"select_iterations", 8},
              {"w_iterations", 25}, {"candidates", 4}}});
        j["eval"] = {{"targets", 2}, {"seeds", {1}}, {"split_points", {1}}, {"threads", 1}};
        const std::string text = j.dump(2);
        io::write_file(cfgpath, text.data(), text.size());
        const std::string base = "\"" + cli + "\" --config \"" + cfgpath + "\" ";
        for (const char* cmd : {"gen-corpus", "train-target", "train-gan"}) {
          const std::string full = base + cmd + " >/dev/null 2>&1";
          if (std::system(full.c_str()) != 0) throw Error(std::string("pipeline step failed: ") + cmd);
        }
        if (std::system((base + "attack --method pfo >/dev/null 2>&1").c_str()) != 0)
          throw Error("pipeline step failed: attack");
        if (std::system((base + "report >/dev/null 2>&1").c_str()) != 0)
          throw Error("pipeline step failed: report");
        return io::read_file(dir + "/report.csv");
      };
      auto a = run_pipeline(fixture_dir + "/repro_a");
      auto b = run_pipeline(fixture_dir + "/repro_b");
      c.require(a == b, "CSV outputs differ between runs");
      c.require(!a.empty(), "empty report");
      fsys::remove_all(fixture_dir + "/repro_a");
      fsys::remove_all(fixture_dir + "/repro_b");
#endif
    }, 600);

  std::printf("%s: %d criterion(s) failed\n", g_failures ? "FAILURE" : "SUCCESS", g_failures);
  return g_failures;
}
