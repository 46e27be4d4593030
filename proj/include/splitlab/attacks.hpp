#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "splitlab/cma.hpp"
#include "splitlab/optim.hpp"
#include "splitlab/regularizers.hpp"
#include "splitlab/stack.hpp"

// Data reconstruction attacks against a split classifier. GAN-space attacks
// are generic over a Prior type providing:
//
//   int latent_dim(); int style_dim(); int stages();            // H
//   TensorT<T> map_latent(z, nn::CacheT<T>* tape = nullptr);
//   TensorT<T> map_backward(tape, d_w);
//   TensorT<T> synth_from(stage, const TensorT<T>* hf, w, SynthTape* tape = nullptr);
//   void synth_backward(tape, d_image, TensorT<T>* d_hf, TensorT<T>* d_w);
//   TensorT<T> advance(stage, hf, w);   // single block; stage 0 ignores hf
//
// synth_from(0, ...) must run the same per-block arithmetic as the advance
// chain so that stage decompositions are bit-identical.

namespace splitlab::attacks {

using nn::OptimMode;
using nn::OptimizerT;

enum class AttackMode { Whitebox, Blackbox };

template <typename T>
struct AttackConfigT {
  int iterations = 500;        // N per optimization stage (CMA generations in black-box mode)
  int select_iterations = -1;  // -1: use `iterations`
  int w_iterations = -1;       // -1: use `iterations`
  double lr = 1e-2;
  double stage_lr = -1;        // hf-stage optimizer rate; -1: use lr
  bool stage_plain_sgd = false;  // plain gradient steps in the hf stages
  double tv_weight = 0.01;     // alpha; 2.0 for rMLE, 1.5 for LM
  double kl_weight = 0.01;     // lambda, initial selection only
  double manifold_weight = 1.0;
  int candidates = 32;
  std::vector<double> radii = {0.1, 0.1, 0.1};  // fractional per-stage l1 radius
  bool l1_ball = true;                          // false: no-ball ablation arm
  AttackMode mode = AttackMode::Whitebox;
  uint64_t seed = 1;

  // black-box knobs
  int cma_population = 0;  // 0: CMA default for the dimension
  double cma_sigma = 0.3;
  long query_budget = 100000;
  int code_dim = 32;

  int sel_iters() const { return select_iterations >= 0 ? select_iterations : iterations; }
  int w_iters() const { return w_iterations >= 0 ? w_iterations : iterations; }
  double hf_stage_lr() const { return stage_lr > 0 ? stage_lr : lr; }

  void validate() const {
    if (iterations < 0) throw Error("attack config: iterations must be >= 0");
    if (candidates < 1) throw Error("attack config: candidate count must be >= 1");
    if (tv_weight < 0 || kl_weight < 0 || manifold_weight < 0)
      throw Error("attack config: weights must be >= 0");
    for (double r : radii)
      if (r < 0) throw Error("attack config: radii must be >= 0");
  }

  static AttackConfigT rmle_defaults() {
    AttackConfigT c;
    c.tv_weight = 2.0;
    return c;
  }
  static AttackConfigT lm_defaults() {
    AttackConfigT c;
    c.tv_weight = 1.5;
    return c;
  }

  double radius_fraction(int stage) const {  // stage in 1..H
    if (radii.empty()) return 0.0;
    const size_t i = static_cast<size_t>(stage - 1);
    return i < radii.size() ? radii[i] : radii.back();
  }
};

using AttackConfig = AttackConfigT<float>;

template <typename T>
struct AttackResultT {
  TensorT<T> image;
  // One entry per optimization phase (selection, w, then each hf stage).
  // `traces` is best-so-far match loss; `raw_traces` the per-iterate values.
  std::vector<std::vector<double>> traces;
  std::vector<std::vector<double>> raw_traces;
  double final_match_loss = std::numeric_limits<double>::infinity();
  double final_total_loss = std::numeric_limits<double>::infinity();
  double wall_seconds = 0;
  AttackConfigT<T> config;
  long queries = 0;
  bool budget_exceeded = false;
  // Worst observed slack of the two Algorithm-1 ball constraints, measured
  // after every projection; <= 0 means always feasible.
  double max_hf_ball_violation = -std::numeric_limits<double>::infinity();
  double max_w_ball_violation = -std::numeric_limits<double>::infinity();
};

using AttackResult = AttackResultT<float>;

template <typename T>
double match_loss(const TensorT<T>& h_rec, const TensorT<T>& h_tar) {
  if (!h_rec.same_shape(h_tar))
    throw ShapeError("match_loss: shapes differ, " + h_rec.shape_str() + " vs " + h_tar.shape_str());
  double s = 0;
  for (int64_t i = 0; i < h_rec.size(); ++i) {
    const double d = static_cast<double>(h_rec[i]) - static_cast<double>(h_tar[i]);
    s += d * d;
  }
  return s / static_cast<double>(h_rec.size());
}

template <typename T>
TensorT<T> match_loss_backward(const TensorT<T>& h_rec, const TensorT<T>& h_tar,
                               double upstream = 1.0) {
  TensorT<T> g(h_rec.shape);
  const double k = 2.0 * upstream / static_cast<double>(h_rec.size());
  for (int64_t i = 0; i < h_rec.size(); ++i)
    g[i] = static_cast<T>(k * (static_cast<double>(h_rec[i]) - static_cast<double>(h_tar[i])));
  return g;
}

// Euclidean projection onto { u : ||u - center||_1 <= radius }, by
// sort-and-threshold on |v - center|. Interior points pass through untouched.
template <typename T>
TensorT<T> project_l1_ball(const TensorT<T>& v, const TensorT<T>& center, double radius) {
  if (!v.same_shape(center)) throw ShapeError("project_l1_ball: shape mismatch");
  if (radius < 0) throw Error("project_l1_ball: negative radius");
  if (std::isinf(radius)) return v;
  if (radius == 0) return center;

  const int64_t n = v.size();
  double l1 = 0;
  for (int64_t i = 0; i < n; ++i)
    l1 += std::abs(static_cast<double>(v[i]) - static_cast<double>(center[i]));
  if (l1 <= radius) return v;

  std::vector<double> mag(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    mag[static_cast<size_t>(i)] = std::abs(static_cast<double>(v[i]) - static_cast<double>(center[i]));
  std::sort(mag.begin(), mag.end(), std::greater<double>());
  double cum = 0, theta = 0;
  for (int64_t j = 0; j < n; ++j) {
    cum += mag[static_cast<size_t>(j)];
    const double cand = (cum - radius) / static_cast<double>(j + 1);
    if (j + 1 == n || mag[static_cast<size_t>(j + 1)] <= cand) {
      theta = cand;
      break;
    }
  }
  TensorT<T> out(v.shape);
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(v[i]) - static_cast<double>(center[i]);
    const double shrunk = std::max(std::abs(d) - theta, 0.0);
    out[i] = static_cast<T>(static_cast<double>(center[i]) + (d < 0 ? -shrunk : shrunk));
  }
  // Casting to T can leave the accumulated distance a few ulps outside the
  // ball; shrink the offsets until the stored values are feasible. The shrink
  // is slightly conservative so rounding cannot re-inflate past the radius.
  for (int pass = 0; pass < 8; ++pass) {
    const double s = out.l1_distance(center);
    if (s <= radius) break;
    const double scale = radius / s * (1.0 - 4e-7 * pass - 1e-9);
    for (int64_t i = 0; i < n; ++i)
      out[i] = static_cast<T>(static_cast<double>(center[i]) +
                              (static_cast<double>(out[i]) - static_cast<double>(center[i])) * scale);
  }
  return out;
}

namespace detail {

struct BestTracker {
  double best = std::numeric_limits<double>::infinity();
  bool improved(double v) {
    if (v < best) {
      best = v;
      return true;
    }
    return false;
  }
};

inline void push_trace(std::vector<double>& raw, std::vector<double>& best_trace,
                       BestTracker& tracker, double v) {
  raw.push_back(v);
  tracker.improved(v);
  best_trace.push_back(tracker.best);
}

template <typename T>
void clamp01(TensorT<T>& x) {
  for (auto& v : x.data) v = std::min(std::max(v, T(0)), T(1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pixel-space attacks (rMLE; LM adds an autoencoder manifold penalty).
// ---------------------------------------------------------------------------

template <typename T, typename AE>
AttackResultT<T> pixel_space_attack(const TensorT<T>& h_tar, const nn::StackT<T>& client,
                                    const std::vector<int>& image_shape,
                                    const AttackConfigT<T>& cfg, const AE* ae,
                                    const char* name) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  AttackResultT<T> result;
  result.config = cfg;

  Rng rng(derive_seed(cfg.seed, "pixel-init"));
  TensorT<T> x = TensorT<T>::random_uniform(image_shape, rng);
  OptimizerT<T> opt(OptimMode::Adam, cfg.lr);

  detail::BestTracker best;
  TensorT<T> best_x = x;
  std::vector<double> raw, trace;
  for (int it = 0; it < cfg.iterations; ++it) {
    nn::CacheT<T> cache;
    TensorT<T> h = client.forward(x, &cache);
    const double match = match_loss(h, h_tar);
    double total = match + cfg.tv_weight * static_cast<double>(nn::total_variation(x));

    TensorT<T> dx = client.backward(cache, match_loss_backward(h, h_tar));
    if (cfg.tv_weight > 0) {
      TensorT<T> tvg = nn::total_variation_backward(x, static_cast<T>(cfg.tv_weight));
      for (int64_t i = 0; i < dx.size(); ++i) dx[i] += tvg[i];
    }
    if (ae && cfg.manifold_weight > 0) {
      typename AE::Tape tape;
      TensorT<T> rec = ae->reconstruct(x, &tape);
      double pen = 0;
      TensorT<T> diff(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) {
        diff[i] = x[i] - rec[i];
        pen += static_cast<double>(diff[i]) * diff[i];
      }
      pen /= static_cast<double>(x.size());
      total += cfg.manifold_weight * pen;
      const T k = static_cast<T>(2.0 * cfg.manifold_weight / static_cast<double>(x.size()));
      TensorT<T> dpen(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) dpen[i] = k * diff[i];
      TensorT<T> drec = ae->reconstruct_backward(tape, dpen);
      for (int64_t i = 0; i < dx.size(); ++i) dx[i] += dpen[i] - drec[i];
    }
    if (!std::isfinite(total))
      throw DivergenceError(std::string(name) + " diverged at iteration " + std::to_string(it) +
                            " (match=" + std::to_string(match) + ")");

    if (best.improved(match)) best_x = x;
    raw.push_back(match);
    trace.push_back(best.best);

    opt.step_single(x, dx);
    detail::clamp01(x);
  }
  if (cfg.iterations == 0) best_x = x;

  result.image = best_x;
  result.traces.push_back(std::move(trace));
  result.raw_traces.push_back(std::move(raw));
  result.final_match_loss = cfg.iterations ? best.best : match_loss(client.forward(best_x), h_tar);
  result.final_total_loss = result.final_match_loss;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

struct NoAutoencoder {
  struct Tape {};
  template <typename T>
  TensorT<T> reconstruct(const TensorT<T>&, Tape*) const {
    throw Error("unreachable");
  }
  template <typename T>
  TensorT<T> reconstruct_backward(const Tape&, const TensorT<T>&) const {
    throw Error("unreachable");
  }
};

template <typename T>
AttackResultT<T> attack_rmle(const TensorT<T>& h_tar, const nn::StackT<T>& client,
                             const std::vector<int>& image_shape, const AttackConfigT<T>& cfg) {
  return pixel_space_attack<T, NoAutoencoder>(h_tar, client, image_shape, cfg, nullptr, "rmle");
}

template <typename T, typename AE>
AttackResultT<T> attack_lm(const TensorT<T>& h_tar, const nn::StackT<T>& client,
                           const std::vector<int>& image_shape, const AE& ae,
                           const AttackConfigT<T>& cfg) {
  const AE* aep = cfg.manifold_weight > 0 ? &ae : nullptr;
  return pixel_space_attack<T, AE>(h_tar, client, image_shape, cfg, aep, "lm");
}

// Learning-based attack: a single decoder pass, no optimization trace.
template <typename T, typename Inv>
AttackResultT<T> attack_in(const TensorT<T>& h_tar, const Inv& inverse_net) {
  const auto t0 = std::chrono::steady_clock::now();
  AttackResultT<T> result;
  result.image = inverse_net.invert(h_tar);
  detail::clamp01(result.image);
  result.final_match_loss = 0;
  result.final_total_loss = 0;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// GAN-prior attacks.
// ---------------------------------------------------------------------------

template <typename T>
struct SelectionResultT {
  TensorT<T> z_star;
  TensorT<T> w_init;
  std::vector<double> raw_trace;   // per-iteration minimum candidate match loss
  std::vector<double> best_trace;
  std::vector<double> final_candidate_match;
};

// Eq.-style candidate search: jointly optimize a batch of latent vectors under
// match + KL + TV, then keep the candidate with the lowest final match loss
// (ties break to the lowest index).
template <typename T, typename Prior>
SelectionResultT<T> pfo_initial_selection(const TensorT<T>& h_tar, const nn::StackT<T>& client,
                                          const Prior& prior, const AttackConfigT<T>& cfg) {
  cfg.validate();
  const int cands = cfg.candidates;
  const int kz = prior.latent_dim();
  Rng rng(derive_seed(cfg.seed, "selection-z"));
  TensorT<T> zs = TensorT<T>::random_normal({cands, kz}, rng);

  OptimizerT<T> opt(OptimMode::Adam, cfg.lr);
  SelectionResultT<T> out;
  detail::BestTracker best;

  auto eval_candidate = [&](const TensorT<T>& z, nn::CacheT<T>* map_tape,
                            typename Prior::SynthTape* synth_tape, nn::CacheT<T>* client_tape,
                            TensorT<T>* x_out) {
    TensorT<T> w = prior.map_latent(z, map_tape);
    TensorT<T> x = prior.synth_from(0, nullptr, w, synth_tape);
    TensorT<T> h = client.forward(x, client_tape);
    if (x_out) *x_out = x;
    return std::make_pair(match_loss(h, h_tar), std::move(h));
  };

  for (int it = 0; it < cfg.sel_iters(); ++it) {
    TensorT<T> dz(zs.shape);
    double iter_min = std::numeric_limits<double>::infinity();
    bool any_finite = false;
    for (int c = 0; c < cands; ++c) {
      TensorT<T> z({kz});
      std::copy_n(zs.data.begin() + static_cast<size_t>(c) * kz, kz, z.data.begin());
      nn::CacheT<T> map_tape, client_tape;
      typename Prior::SynthTape synth_tape;
      TensorT<T> x;
      auto [match, h] = eval_candidate(z, &map_tape, &synth_tape, &client_tape, &x);
      if (std::isfinite(match)) any_finite = true;
      iter_min = std::min(iter_min, match);

      TensorT<T> dximg = client.backward(client_tape, match_loss_backward(h, h_tar));
      if (cfg.tv_weight > 0) {
        TensorT<T> tvg = nn::total_variation_backward(x, static_cast<T>(cfg.tv_weight));
        for (int64_t i = 0; i < dximg.size(); ++i) dximg[i] += tvg[i];
      }
      TensorT<T> dw({prior.style_dim()});
      prior.synth_backward(synth_tape, dximg, nullptr, &dw);
      TensorT<T> dzc = prior.map_backward(map_tape, dw);
      std::copy_n(dzc.data.begin(), kz, dz.data.begin() + static_cast<size_t>(c) * kz);
    }
    if (!any_finite) throw DivergenceError("initial selection: all candidates non-finite");
    if (cfg.kl_weight > 0 && cands >= 2) {
      TensorT<T> klg = nn::kl_gaussian_reg_backward(zs, static_cast<T>(cfg.kl_weight));
      for (int64_t i = 0; i < dz.size(); ++i) dz[i] += klg[i];
    }
    detail::push_trace(out.raw_trace, out.best_trace, best, iter_min);
    opt.step_single(zs, dz);
  }

  // final evaluation and argmin
  out.final_candidate_match.resize(static_cast<size_t>(cands));
  int best_idx = 0;
  double best_match = std::numeric_limits<double>::infinity();
  for (int c = 0; c < cands; ++c) {
    TensorT<T> z({kz});
    std::copy_n(zs.data.begin() + static_cast<size_t>(c) * kz, kz, z.data.begin());
    auto [match, h] = eval_candidate(z, nullptr, nullptr, nullptr, nullptr);
    out.final_candidate_match[static_cast<size_t>(c)] = match;
    if (match < best_match) {
      best_match = match;
      best_idx = c;
    }
  }
  out.z_star = TensorT<T>({kz});
  std::copy_n(zs.data.begin() + static_cast<size_t>(best_idx) * kz, kz, out.z_star.data.begin());
  out.w_init = prior.map_latent(out.z_star);
  return out;
}

template <typename T>
struct WOptResultT {
  TensorT<T> w0;
  std::vector<double> raw_trace;
  std::vector<double> best_trace;
  double best_match = std::numeric_limits<double>::infinity();
};

// Stage-2 loss (match + TV, no KL) minimized over the extended latent w;
// returns the best iterate.
template <typename T, typename Prior>
WOptResultT<T> pfo_optimize_w(const TensorT<T>& w_init, const TensorT<T>& h_tar,
                              const nn::StackT<T>& client, const Prior& prior,
                              const AttackConfigT<T>& cfg) {
  cfg.validate();
  WOptResultT<T> out;
  TensorT<T> w = w_init;
  out.w0 = w_init;
  OptimizerT<T> opt(OptimMode::Adam, cfg.lr);
  detail::BestTracker best;

  for (int it = 0; it < cfg.w_iters(); ++it) {
    typename Prior::SynthTape tape;
    nn::CacheT<T> client_tape;
    TensorT<T> x = prior.synth_from(0, nullptr, w, &tape);
    TensorT<T> h = client.forward(x, &client_tape);
    const double match = match_loss(h, h_tar);
    if (!std::isfinite(match))
      throw DivergenceError("w optimization diverged at iteration " + std::to_string(it));
    if (best.improved(match)) out.w0 = w;
    detail::push_trace(out.raw_trace, out.best_trace, best, match);

    TensorT<T> dx = client.backward(client_tape, match_loss_backward(h, h_tar));
    if (cfg.tv_weight > 0) {
      TensorT<T> tvg = nn::total_variation_backward(x, static_cast<T>(cfg.tv_weight));
      for (int64_t i = 0; i < dx.size(); ++i) dx[i] += tvg[i];
    }
    TensorT<T> dw({prior.style_dim()});
    prior.synth_backward(tape, dx, nullptr, &dw);
    opt.step_single(w, dw);
  }
  out.best_match = cfg.w_iters() ? best.best
                                 : match_loss(client.forward(prior.synth_from(0, nullptr, w)), h_tar);
  return out;
}

// Progressive feature optimization: stage-wise joint refinement of (hf_i, w)
// through the remaining generator blocks, each iterate projected back onto the
// l1 balls centered at the stage-initial values. Stage handoff advances the
// best iterate of the finished stage into the next block.
template <typename T, typename Prior>
AttackResultT<T> pfo_progressive(const TensorT<T>& w_0, const TensorT<T>& h_tar,
                                 const nn::StackT<T>& client, const Prior& prior,
                                 const AttackConfigT<T>& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  AttackResultT<T> result;
  result.config = cfg;
  const int stages = prior.stages();

  TensorT<T> w = w_0;
  if (stages == 0) {
    result.image = prior.synth_from(0, nullptr, w);
    result.final_match_loss = match_loss(client.forward(result.image), h_tar);
    result.final_total_loss = result.final_match_loss;
    return result;
  }

  TensorT<T> hf = prior.advance(0, TensorT<T>(), w);  // hf_1^0
  double last_best = std::numeric_limits<double>::infinity();

  for (int stage = 1; stage <= stages; ++stage) {
    const TensorT<T> hf_center = hf;
    const TensorT<T> w_center = w;
    const double frac = cfg.radius_fraction(stage);
    const bool project = cfg.l1_ball && !std::isinf(frac);
    const double r_hf = project ? frac * static_cast<double>(hf_center.l1_norm()) : 0;
    const double r_w = project ? frac * static_cast<double>(w_center.l1_norm()) : 0;

    OptimizerT<T> opt_hf(cfg.stage_plain_sgd ? OptimMode::Plain : OptimMode::Adam,
                         cfg.hf_stage_lr());
    OptimizerT<T> opt_w(cfg.stage_plain_sgd ? OptimMode::Plain : OptimMode::Adam,
                        cfg.hf_stage_lr());
    detail::BestTracker best;
    TensorT<T> best_hf = hf, best_w = w;
    std::vector<double> raw, trace;

    for (int it = 0; it < cfg.iterations; ++it) {
      typename Prior::SynthTape tape;
      nn::CacheT<T> client_tape;
      TensorT<T> x = prior.synth_from(stage, &hf, w, &tape);
      TensorT<T> h = client.forward(x, &client_tape);
      const double match = match_loss(h, h_tar);
      if (!std::isfinite(match))
        throw DivergenceError("progressive stage " + std::to_string(stage) +
                                  " diverged at iteration " + std::to_string(it),
                              stage);
      if (best.improved(match)) {
        best_hf = hf;
        best_w = w;
      }
      detail::push_trace(raw, trace, best, match);

      TensorT<T> dx = client.backward(client_tape, match_loss_backward(h, h_tar));
      if (cfg.tv_weight > 0) {
        TensorT<T> tvg = nn::total_variation_backward(x, static_cast<T>(cfg.tv_weight));
        for (int64_t i = 0; i < dx.size(); ++i) dx[i] += tvg[i];
      }
      TensorT<T> dhf(hf.shape);
      TensorT<T> dw({prior.style_dim()});
      prior.synth_backward(tape, dx, &dhf, &dw);

      // One optimizer step on each variable from the same loss evaluation,
      // then both projections (Algorithm-1 lines 10-11 ordering).
      opt_hf.step_single(hf, dhf);
      opt_w.step_single(w, dw);
      if (project) {
        hf = project_l1_ball(hf, hf_center, r_hf);
        w = project_l1_ball(w, w_center, r_w);
        result.max_hf_ball_violation =
            std::max(result.max_hf_ball_violation,
                     static_cast<double>(hf.l1_distance(hf_center)) - r_hf);
        result.max_w_ball_violation =
            std::max(result.max_w_ball_violation,
                     static_cast<double>(w.l1_distance(w_center)) - r_w);
      }
    }

    if (cfg.iterations > 0) {
      hf = best_hf;
      w = best_w;
      last_best = best.best;
    }
    result.raw_traces.push_back(std::move(raw));
    result.traces.push_back(std::move(trace));

    hf = prior.advance(stage, hf, w);  // hf_{stage+1}^0; after stage H this is the image
  }

  result.image = hf;
  result.final_match_loss =
      std::isfinite(last_best) ? last_best : match_loss(client.forward(result.image), h_tar);
  result.final_total_loss = result.final_match_loss;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Initial selection + w optimization; the "latent only" baseline and the
// "without progressive refinement" ablation arm.
template <typename T, typename Prior>
AttackResultT<T> attack_latent_only(const TensorT<T>& h_tar, const nn::StackT<T>& client,
                                    const Prior& prior, const AttackConfigT<T>& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  auto sel = pfo_initial_selection(h_tar, client, prior, cfg);
  auto wopt = pfo_optimize_w(sel.w_init, h_tar, client, prior, cfg);

  AttackResultT<T> result;
  result.config = cfg;
  result.image = prior.synth_from(0, nullptr, wopt.w0);
  result.final_match_loss = wopt.best_match;
  result.final_total_loss = wopt.best_match;
  result.traces = {std::move(sel.best_trace), std::move(wopt.best_trace)};
  result.raw_traces = {std::move(sel.raw_trace), std::move(wopt.raw_trace)};
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Full pipeline: initial selection -> w optimization -> progressive stages.
template <typename T, typename Prior>
AttackResultT<T> attack_pfo(const TensorT<T>& h_tar, const nn::StackT<T>& client,
                            const Prior& prior, const AttackConfigT<T>& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  auto sel = pfo_initial_selection(h_tar, client, prior, cfg);
  auto wopt = pfo_optimize_w(sel.w_init, h_tar, client, prior, cfg);
  AttackResultT<T> result = pfo_progressive(wopt.w0, h_tar, client, prior, cfg);

  result.traces.insert(result.traces.begin(), {sel.best_trace, wopt.best_trace});
  result.raw_traces.insert(result.raw_traces.begin(), {sel.raw_trace, wopt.raw_trace});
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace splitlab::attacks
