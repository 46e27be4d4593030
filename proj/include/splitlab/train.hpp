#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "splitlab/corpus.hpp"
#include "splitlab/defenses.hpp"
#include "splitlab/optim.hpp"
#include "splitlab/zoo.hpp"

namespace splitlab::zoo {

struct TrainConfig {
  int steps = 1200;
  int batch = 16;
  double lr = 1e-3;
  uint64_t seed = 1;
  double holdout_fraction = 0.2;
  double jsd_bound = 0.35;  // histogram JS-distance sanity bound for the GAN
  int pretrain_steps = 0;   // GAN only: latent-reconstruction warm start

  void validate() const {
    if (steps < 1 || batch < 2) throw Error("train config: steps >= 1 and batch >= 2 required");
    if (holdout_fraction <= 0 || holdout_fraction >= 0.9)
      throw Error("train config: holdout fraction out of range");
    if (pretrain_steps < 0) throw Error("train config: pretrain steps must be >= 0");
  }
};

struct TargetTrainResult {
  SplitModel model;
  std::vector<double> loss_trace;
  double holdout_accuracy = 0;
  double holdout_dcor = 0;  // dCor(x, h) at the model's split point, held-out batch
};

struct GanTrainResult {
  Generator generator;
  nn::Stack discriminator;
  std::vector<double> g_loss_trace;  // recorded every epoch-equivalent window
  std::vector<double> d_loss_trace;
  double mean_disc_score = 0;  // sigmoid(D(G(z))) on fresh samples after training
  double histogram_jsd = 0;    // pixel-histogram JS distance, samples vs corpus
  bool mode_collapse_warning = false;
};

struct AeTrainResult {
  Autoencoder model;
  std::vector<double> loss_trace;
  double holdout_mse = 0;
};

struct InverseTrainResult {
  InverseNet model;
  std::vector<double> loss_trace;
  double holdout_mse = 0;
};

namespace detail {

// Dihedral-group augmentation for square images; code in [0, 8).
inline Tensor dihedral(const Tensor& x, int code) {
  if (code == 0) return x;
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out(x.shape);
  const bool transpose = code & 4;
  const bool flip_v = code & 2;
  const bool flip_h = code & 1;
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        int si = transpose ? j : i;
        int sj = transpose ? i : j;
        if (flip_v) si = h - 1 - si;
        if (flip_h) sj = w - 1 - sj;
        out.at(ci, i, j) = x.at(ci, si, sj);
      }
  return out;
}

inline std::vector<int> holdout_split(int n, double fraction, int* train_end) {
  const int hold = std::max(1, static_cast<int>(n * fraction));
  *train_end = n - hold;
  std::vector<int> held(static_cast<size_t>(hold));
  for (int i = 0; i < hold; ++i) held[static_cast<size_t>(i)] = *train_end + i;
  return held;
}

inline double softmax_ce(const Tensor& logits, int label, Tensor* dlogits) {
  double mx = logits[0];
  for (int64_t i = 1; i < logits.size(); ++i) mx = std::max(mx, static_cast<double>(logits[i]));
  double sum = 0;
  for (int64_t i = 0; i < logits.size(); ++i) sum += std::exp(logits[i] - mx);
  const double logz = std::log(sum) + mx;
  if (dlogits) {
    *dlogits = Tensor(logits.shape);
    for (int64_t i = 0; i < logits.size(); ++i)
      (*dlogits)[i] = static_cast<float>(std::exp(logits[i] - logz));
    (*dlogits)[label] -= 1.f;
  }
  return logz - logits[label];
}

}  // namespace detail

// Supervised training of the split classifier; NoPeek and Siamese defenses add
// their representation terms at the configured split boundary.
inline TargetTrainResult train_target(const Corpus& corpus, const SplitModelConfig& mcfg,
                                      const TrainConfig& tcfg,
                                      const defenses::DefenseConfig& defense = {}) {
  tcfg.validate();
  defense.validate();
  const bool nopeek = defense.kind == defenses::DefenseKind::NoPeek;
  const bool siamese = defense.kind == defenses::DefenseKind::Siamese;

  Rng rng(derive_seed(tcfg.seed, "train-target"));
  TargetTrainResult result;
  result.model = SplitModel(mcfg, &rng);
  SplitModel& m = result.model;
  const int boundary = m.boundary();

  int train_end = 0;
  auto held = detail::holdout_split(corpus.size(), tcfg.holdout_fraction, &train_end);

  nn::Optimizer opt(nn::OptimMode::Adam, tcfg.lr);
  auto params = m.param_list();

  struct SampleTape {
    std::vector<nn::CacheT<float>> caches;  // one per block
    Tensor h;
    Tensor dlogits;
  };

  for (int step = 0; step < tcfg.steps; ++step) {
    std::vector<int> idx(static_cast<size_t>(tcfg.batch));
    for (auto& i : idx) i = static_cast<int>(rng.below(static_cast<uint64_t>(train_end)));

    std::vector<SampleTape> tapes(static_cast<size_t>(tcfg.batch));
    double loss = 0;
    Tensor h_batch, x_batch;
    if (nopeek) {
      const auto hs = m.h_shape();
      h_batch = Tensor({tcfg.batch, static_cast<int>(Tensor::count(hs))});
      x_batch = Tensor({tcfg.batch, 3 * mcfg.side * mcfg.side});
    }

    for (int s = 0; s < tcfg.batch; ++s) {
      const Tensor x = detail::dihedral(
          corpus.images[static_cast<size_t>(idx[static_cast<size_t>(s)])],
          static_cast<int>(rng.below(8)));
      auto& tape = tapes[static_cast<size_t>(s)];
      tape.caches.resize(m.blocks.size());
      Tensor cur = x;
      for (size_t b = 0; b < m.blocks.size(); ++b) {
        cur = m.blocks[b].forward(cur, &tape.caches[b]);
        if (static_cast<int>(b) == boundary - 1) tape.h = cur;
      }
      loss += detail::softmax_ce(cur, corpus.labels[static_cast<size_t>(idx[static_cast<size_t>(s)])],
                                 &tape.dlogits);
      if (nopeek) {
        std::copy(tape.h.data.begin(), tape.h.data.end(),
                  h_batch.data.begin() + static_cast<size_t>(s) * tape.h.size());
        std::copy(x.data.begin(), x.data.end(),
                  x_batch.data.begin() + static_cast<size_t>(s) * x.size());
      }
    }
    loss /= tcfg.batch;

    // defense gradients at the boundary representation
    std::vector<Tensor> dh_extra(static_cast<size_t>(tcfg.batch));
    if (nopeek) {
      loss += defense.lambda2 * defenses::distance_correlation(x_batch, h_batch);
      Tensor g = defenses::distance_correlation_backward(x_batch, h_batch,
                                                         static_cast<float>(defense.lambda2));
      const int64_t hs = tapes[0].h.size();
      for (int s = 0; s < tcfg.batch; ++s) {
        Tensor dh(tapes[0].h.shape);
        std::copy(g.data.begin() + static_cast<size_t>(s) * hs,
                  g.data.begin() + static_cast<size_t>(s + 1) * hs, dh.data.begin());
        dh_extra[static_cast<size_t>(s)] = std::move(dh);
      }
    } else if (siamese) {
      for (int s = 0; s + 1 < tcfg.batch; s += 2) {
        const bool same = corpus.labels[static_cast<size_t>(idx[static_cast<size_t>(s)])] ==
                          corpus.labels[static_cast<size_t>(idx[static_cast<size_t>(s + 1)])];
        const auto& ha = tapes[static_cast<size_t>(s)].h;
        const auto& hb = tapes[static_cast<size_t>(s + 1)].h;
        loss += defense.lambda3 *
                defenses::siamese_loss(ha, hb, same, static_cast<float>(defense.margin));
        Tensor ga = defenses::siamese_loss_backward(ha, hb, same, static_cast<float>(defense.margin),
                                                    static_cast<float>(defense.lambda3));
        Tensor gb = ga;
        for (auto& v : gb.data) v = -v;
        dh_extra[static_cast<size_t>(s)] = std::move(ga);
        dh_extra[static_cast<size_t>(s + 1)] = std::move(gb);
      }
    }
    if (!std::isfinite(loss)) throw DivergenceError("target training diverged at step " + std::to_string(step));
    result.loss_trace.push_back(loss);

    std::vector<nn::StackGradsT<float>> grads(m.blocks.size());
    for (int s = 0; s < tcfg.batch; ++s) {
      auto& tape = tapes[static_cast<size_t>(s)];
      Tensor d = tape.dlogits;
      for (auto& v : d.data) v /= static_cast<float>(tcfg.batch);
      for (size_t b = m.blocks.size(); b-- > 0;) {
        d = m.blocks[b].backward(tape.caches[b], d, &grads[b]);
        if (static_cast<int>(b) == boundary && dh_extra[static_cast<size_t>(s)].size())
          for (int64_t i = 0; i < d.size(); ++i) d[i] += dh_extra[static_cast<size_t>(s)][i];
      }
    }

    std::vector<Tensor*> glist;
    for (size_t b = 0; b < m.blocks.size(); ++b)
      for (auto* t : m.blocks[b].grad_list(grads[b])) glist.push_back(t);
    opt.step(params, glist);
  }

  // held-out accuracy and representation dCor
  int correct = 0;
  Tensor hx({static_cast<int>(held.size()), 3 * mcfg.side * mcfg.side});
  Tensor hh;
  for (size_t k = 0; k < held.size(); ++k) {
    const Tensor& x = corpus.images[static_cast<size_t>(held[k])];
    Tensor h = m.client_forward(x);
    Tensor logits = m.server_forward(h);
    int arg = 0;
    for (int64_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[arg]) arg = static_cast<int>(i);
    if (arg == corpus.labels[static_cast<size_t>(held[k])]) ++correct;
    if (hh.size() == 0) hh = Tensor({static_cast<int>(held.size()), static_cast<int>(h.size())});
    std::copy(h.data.begin(), h.data.end(), hh.data.begin() + k * static_cast<size_t>(h.size()));
    std::copy(x.data.begin(), x.data.end(), hx.data.begin() + k * static_cast<size_t>(x.size()));
  }
  result.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(held.size());
  result.holdout_dcor = defenses::distance_correlation(hx, hh);
  return result;
}

namespace detail {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline std::vector<double> pixel_histogram(const std::vector<const Tensor*>& images, int bins) {
  std::vector<double> h(static_cast<size_t>(bins), 0.0);
  double total = 0;
  for (const Tensor* t : images)
    for (float v : t->data) {
      int b = static_cast<int>(v * bins);
      b = std::clamp(b, 0, bins - 1);
      h[static_cast<size_t>(b)] += 1;
      total += 1;
    }
  for (auto& v : h) v /= total;
  return h;
}

inline double js_distance(const std::vector<double>& p, const std::vector<double>& q) {
  double js = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::sqrt(std::max(js, 0.0));
}

}  // namespace detail

// Non-saturating GAN training on the public corpus.
inline GanTrainResult train_gan(const Corpus& pub, const GeneratorConfig& gcfg,
                                const TrainConfig& tcfg) {
  tcfg.validate();
  gcfg.validate();
  Rng rng(derive_seed(tcfg.seed, "train-gan"));
  GanTrainResult result;
  result.generator = Generator(gcfg, &rng);
  result.discriminator = make_discriminator<float>(gcfg.image_size, rng);
  Generator& gen = result.generator;
  nn::Stack& disc = result.discriminator;

  // after a reconstruction warm start the adversarial loop refines: the
  // generator moves gently so the learned manifold survives
  const bool refine = tcfg.pretrain_steps > 0;
  nn::Optimizer g_opt(nn::OptimMode::Adam, refine ? tcfg.lr * 0.02 : tcfg.lr, 0.5);
  nn::Optimizer d_opt(nn::OptimMode::Adam, tcfg.lr, 0.5);
  auto g_params = gen.param_list();
  auto d_params = disc.param_list();

  // corpus pixel moments anchor the generator's value distribution; the
  // between-image mean variance anchors sample diversity
  double real_mu = 0, real_var = 0, real_div = 0;
  {
    int64_t n = 0;
    for (const auto& img : pub.images) {
      for (float v : img.data) real_mu += v;
      n += img.size();
    }
    real_mu /= static_cast<double>(n);
    for (const auto& img : pub.images)
      for (float v : img.data) real_var += (v - real_mu) * (v - real_mu);
    real_var /= static_cast<double>(n);
    double acc = 0;
    for (const auto& img : pub.images) {
      double m = 0;
      for (float v : img.data) m += v;
      m /= static_cast<double>(img.size());
      acc += (m - real_mu) * (m - real_mu);
    }
    real_div = acc / static_cast<double>(pub.images.size());
  }
  constexpr double kMomentWeight = 4.0;
  constexpr double kDiversityWeight = 16.0;

  // warm start: per-image latents + generator trained by reconstruction,
  // latents kept on the Gaussian shell so z ~ N(0, I) sampling stays valid
  if (tcfg.pretrain_steps > 0) {
    const int n_img = pub.size();
    Tensor Z = Tensor::random_normal({n_img, gcfg.z_dim}, rng);
    const float shell = std::sqrt(static_cast<float>(gcfg.z_dim));
    auto renorm_row = [&](int r) {
      float* row = &Z.data[static_cast<size_t>(r) * gcfg.z_dim];
      double nrm = 0;
      for (int i = 0; i < gcfg.z_dim; ++i) nrm += static_cast<double>(row[i]) * row[i];
      nrm = std::sqrt(nrm);
      if (nrm > 0)
        for (int i = 0; i < gcfg.z_dim; ++i) row[i] = static_cast<float>(row[i] / nrm * shell);
    };
    for (int r = 0; r < n_img; ++r) renorm_row(r);

    nn::Optimizer pre_opt(nn::OptimMode::Adam, tcfg.lr * 3);
    std::vector<Tensor*> pre_params{&Z};
    for (auto* p : gen.param_list()) pre_params.push_back(p);

    for (int step = 0; step < tcfg.pretrain_steps; ++step) {
      Generator::Grads g_grads;
      Tensor dZ(Z.shape);
      double recon = 0;
      for (int s = 0; s < tcfg.batch; ++s) {
        const int idx = static_cast<int>(rng.below(static_cast<uint64_t>(n_img)));
        Tensor z({gcfg.z_dim});
        std::copy_n(Z.data.begin() + static_cast<size_t>(idx) * gcfg.z_dim, gcfg.z_dim,
                    z.data.begin());
        Generator::TrainTape tape;
        Tensor xh = gen.sample_forward(z, &tape);
        const Tensor& x = pub.images[static_cast<size_t>(idx)];
        Tensor diff(x.shape);
        for (int64_t i = 0; i < x.size(); ++i) {
          diff[i] = 2.f * (xh[i] - x[i]) / (static_cast<float>(x.size()) * tcfg.batch);
          recon += static_cast<double>(xh[i] - x[i]) * (xh[i] - x[i]) / static_cast<double>(x.size());
        }
        // image gradient -> generator params and the sample's latent row
        Tensor dz({gcfg.z_dim});
        {
          Tensor dw({gcfg.w_dim});
          gen.synth_backward(tape.synth, diff, nullptr, &dw, &g_grads);
          nn::StackGradsT<float>* map_grads = &g_grads.mapping;
          dz = gen.mapping.backward(tape.map, dw, map_grads);
        }
        for (int i = 0; i < gcfg.z_dim; ++i)
          dZ.data[static_cast<size_t>(idx) * gcfg.z_dim + i] += dz[i];
      }
      std::vector<Tensor*> glist{&dZ};
      for (auto* t : gen.grad_list(g_grads)) glist.push_back(t);
      pre_opt.step(pre_params, glist);
      for (int r = 0; r < n_img; ++r) renorm_row(r);
      if (step % 250 == 0) std::fprintf(stderr, "[glo] step %d recon %.4f\n", step, recon / tcfg.batch);
    }
  }

  const int trace_every = std::max(1, tcfg.steps / 50);
  double g_window = 0, d_window = 0;
  int window_n = 0;

  double d_loss_ema = 0.7;  // balance gate: freeze D while it is winning
  for (int step = 0; step < tcfg.steps; ++step) {
    // instance noise on the discriminator inputs, annealed to a floor
    const double noise_sigma =
        std::max(0.02, (refine ? 0.03 : 0.12) * (1.0 - 2.0 * static_cast<double>(step) / tcfg.steps));
    auto blur = [&](Tensor x) {
      for (auto& v : x.data) v += static_cast<float>(rng.normal() * noise_sigma);
      return x;
    };

    // --- discriminator step ---
    nn::StackGradsT<float> d_grads;
    double d_loss = 0;
    for (int s = 0; s < tcfg.batch; ++s) {
      const bool real = s % 2 == 0;
      Tensor x;
      if (real) {
        x = blur(pub.images[static_cast<size_t>(rng.below(static_cast<uint64_t>(pub.size())))]);
      } else {
        Tensor z = Tensor::random_normal({gcfg.z_dim}, rng);
        x = blur(gen.sample_forward(z, nullptr));
      }
      nn::CacheT<float> cache;
      Tensor logit = disc.forward(x, &cache);
      const double p = detail::sigmoid(logit[0]);
      const double y = real ? 0.9 : 0.0;  // one-sided label smoothing
      d_loss += real ? -std::log(std::max(p, 1e-12)) : -std::log(std::max(1.0 - p, 1e-12));
      Tensor dl({1}, {static_cast<float>((p - y) / tcfg.batch)});
      disc.backward(cache, dl, &d_grads);
    }
    if (!std::isfinite(d_loss)) throw DivergenceError("GAN discriminator diverged at step " + std::to_string(step));
    d_loss_ema = 0.95 * d_loss_ema + 0.05 * (d_loss / tcfg.batch);
    if (d_loss_ema > 0.45) d_opt.step(d_params, disc.grad_list(d_grads));

    // --- generator step: non-saturating + pixel moment matching ---
    Generator::Grads g_grads;
    double g_loss = 0;
    std::vector<Generator::TrainTape> tapes(static_cast<size_t>(tcfg.batch));
    std::vector<Tensor> fakes(static_cast<size_t>(tcfg.batch));
    std::vector<Tensor> dxs(static_cast<size_t>(tcfg.batch));
    for (int s = 0; s < tcfg.batch; ++s) {
      Tensor z = Tensor::random_normal({gcfg.z_dim}, rng);
      fakes[static_cast<size_t>(s)] = gen.sample_forward(z, &tapes[static_cast<size_t>(s)]);
      const Tensor& x = fakes[static_cast<size_t>(s)];
      nn::CacheT<float> dcache;
      Tensor logit = disc.forward(blur(x), &dcache);  // additive noise: identity gradient
      const double p = detail::sigmoid(logit[0]);
      g_loss += -std::log(std::max(p, 1e-12));
      Tensor dl({1}, {static_cast<float>((p - 1.0) / tcfg.batch)});
      dxs[static_cast<size_t>(s)] = disc.backward(dcache, dl);
    }
    {
      double mu = 0;
      int64_t n = 0;
      for (const auto& x : fakes) {
        for (float v : x.data) mu += v;
        n += x.size();
      }
      mu /= static_cast<double>(n);
      double var = 0;
      for (const auto& x : fakes)
        for (float v : x.data) var += (v - mu) * (v - mu);
      var /= static_cast<double>(n);
      g_loss += kMomentWeight * tcfg.batch *
                ((mu - real_mu) * (mu - real_mu) + (var - real_var) * (var - real_var));
      const double dmu = 2.0 * (mu - real_mu);
      const double dvar = 2.0 * (var - real_var);
      // per-image means and their spread across the batch
      std::vector<double> img_mu(static_cast<size_t>(tcfg.batch), 0.0);
      double mu_of_mu = 0;
      for (int s = 0; s < tcfg.batch; ++s) {
        for (float v : fakes[static_cast<size_t>(s)].data) img_mu[static_cast<size_t>(s)] += v;
        img_mu[static_cast<size_t>(s)] /= static_cast<double>(fakes[static_cast<size_t>(s)].size());
        mu_of_mu += img_mu[static_cast<size_t>(s)] / tcfg.batch;
      }
      double div = 0;
      for (double m : img_mu) div += (m - mu_of_mu) * (m - mu_of_mu) / tcfg.batch;
      g_loss += kDiversityWeight * tcfg.batch * (div - real_div) * (div - real_div);
      const double ddiv = 2.0 * (div - real_div);
      for (int s = 0; s < tcfg.batch; ++s) {
        Tensor& dx = dxs[static_cast<size_t>(s)];
        const Tensor& x = fakes[static_cast<size_t>(s)];
        const double dm = kDiversityWeight * ddiv * 2.0 * (img_mu[static_cast<size_t>(s)] - mu_of_mu) /
                          (tcfg.batch * static_cast<double>(x.size()));
        for (int64_t i = 0; i < dx.size(); ++i)
          dx[i] += static_cast<float>(kMomentWeight * (dmu / n + dvar * 2.0 * (x[i] - mu) / n) + dm);
      }
    }
    for (int s = 0; s < tcfg.batch; ++s)
      gen.sample_backward(tapes[static_cast<size_t>(s)], dxs[static_cast<size_t>(s)], g_grads);
    if (!std::isfinite(g_loss)) throw DivergenceError("GAN generator diverged at step " + std::to_string(step));
    g_opt.step(g_params, gen.grad_list(g_grads));

    g_window += g_loss / tcfg.batch;
    d_window += d_loss / tcfg.batch;
    ++window_n;
    if ((step + 1) % trace_every == 0) {
      result.g_loss_trace.push_back(g_window / window_n);
      result.d_loss_trace.push_back(d_window / window_n);
      g_window = d_window = 0;
      window_n = 0;
    }
  }

  // convergence-window diagnostics on fresh samples
  const int probe = 64;
  std::vector<Tensor> samples;
  samples.reserve(probe);
  double score = 0;
  double mean_std = 0;
  for (int i = 0; i < probe; ++i) {
    Tensor z = Tensor::random_normal({gcfg.z_dim}, rng);
    samples.push_back(gen.sample_forward(z, nullptr));
    score += detail::sigmoid(disc.forward(samples.back())[0]);
  }
  score /= probe;
  // per-pixel std across samples, averaged (mode-collapse detector)
  const int64_t npix = samples[0].size();
  for (int64_t i = 0; i < npix; ++i) {
    double mu = 0;
    for (const auto& s : samples) mu += s[i];
    mu /= probe;
    double var = 0;
    for (const auto& s : samples) var += (s[i] - mu) * (s[i] - mu);
    mean_std += std::sqrt(var / probe);
  }
  mean_std /= static_cast<double>(npix);
  result.mode_collapse_warning = mean_std < 0.02;
  result.mean_disc_score = score;

  std::vector<const Tensor*> sample_ptrs, corpus_ptrs;
  for (const auto& s : samples) sample_ptrs.push_back(&s);
  for (int i = 0; i < std::min(256, pub.size()); ++i) corpus_ptrs.push_back(&pub.images[static_cast<size_t>(i)]);
  result.histogram_jsd =
      detail::js_distance(detail::pixel_histogram(sample_ptrs, 32), detail::pixel_histogram(corpus_ptrs, 32));
  return result;
}

inline AeTrainResult train_autoencoder(const Corpus& pub, int code_dim, const TrainConfig& tcfg) {
  tcfg.validate();
  Rng rng(derive_seed(tcfg.seed, "train-ae"));
  AeTrainResult result;
  const int side = pub.images[0].dim(1);
  result.model = Autoencoder(side, code_dim, &rng);
  Autoencoder& ae = result.model;

  int train_end = 0;
  auto held = detail::holdout_split(pub.size(), tcfg.holdout_fraction, &train_end);

  nn::Optimizer opt(nn::OptimMode::Adam, tcfg.lr);
  std::vector<Tensor*> params;
  for (auto* p : ae.encoder.param_list()) params.push_back(p);
  for (auto* p : ae.decoder.param_list()) params.push_back(p);

  for (int step = 0; step < tcfg.steps; ++step) {
    nn::StackGradsT<float> genc, gdec;
    double loss = 0;
    for (int s = 0; s < tcfg.batch; ++s) {
      const Tensor& x = pub.images[static_cast<size_t>(rng.below(static_cast<uint64_t>(train_end)))];
      Autoencoder::Tape tape;
      Tensor rec = ae.reconstruct(x, &tape);
      Tensor diff(x.shape);
      double m = 0;
      for (int64_t i = 0; i < x.size(); ++i) {
        diff[i] = rec[i] - x[i];
        m += static_cast<double>(diff[i]) * diff[i];
      }
      loss += m / static_cast<double>(x.size());
      const float k = 2.f / (static_cast<float>(x.size()) * tcfg.batch);
      for (auto& v : diff.data) v *= k;
      ae.reconstruct_backward(tape, diff, &genc, &gdec);
    }
    loss /= tcfg.batch;
    if (!std::isfinite(loss)) throw DivergenceError("autoencoder training diverged at step " + std::to_string(step));
    result.loss_trace.push_back(loss);
    std::vector<Tensor*> glist;
    for (auto* t : ae.encoder.grad_list(genc)) glist.push_back(t);
    for (auto* t : ae.decoder.grad_list(gdec)) glist.push_back(t);
    opt.step(params, glist);
  }

  double mse = 0;
  for (int i : held) {
    const Tensor& x = pub.images[static_cast<size_t>(i)];
    Tensor rec = ae.reconstruct(x);
    double m = 0;
    for (int64_t k = 0; k < x.size(); ++k) {
      const double d = rec[k] - x[k];
      m += d * d;
    }
    mse += m / static_cast<double>(x.size());
  }
  result.holdout_mse = mse / static_cast<double>(held.size());
  return result;
}

// Trains the decoder on pairs (M_C(x_pub), x_pub) for one fixed split point.
inline InverseTrainResult train_inverse_net(const Corpus& pub, const SplitModel& target,
                                            int split_point, const TrainConfig& tcfg) {
  tcfg.validate();
  Rng rng(derive_seed(tcfg.seed, "train-inverse"));
  InverseTrainResult result;
  result.model = InverseNet(target.h_shape(split_point), target.config.side, &rng);
  InverseNet& inv = result.model;

  int train_end = 0;
  auto held = detail::holdout_split(pub.size(), tcfg.holdout_fraction, &train_end);

  nn::Optimizer opt(nn::OptimMode::Adam, tcfg.lr);
  auto params = inv.net.param_list();

  for (int step = 0; step < tcfg.steps; ++step) {
    nn::StackGradsT<float> grads;
    double loss = 0;
    for (int s = 0; s < tcfg.batch; ++s) {
      const Tensor& x = pub.images[static_cast<size_t>(rng.below(static_cast<uint64_t>(train_end)))];
      Tensor h = target.client_forward(x, split_point);
      InverseNet::Tape tape;
      Tensor rec = inv.invert(h, &tape);
      Tensor diff(x.shape);
      double m = 0;
      for (int64_t i = 0; i < x.size(); ++i) {
        diff[i] = rec[i] - x[i];
        m += static_cast<double>(diff[i]) * diff[i];
      }
      loss += m / static_cast<double>(x.size());
      const float k = 2.f / (static_cast<float>(x.size()) * tcfg.batch);
      for (auto& v : diff.data) v *= k;
      inv.invert_backward(tape, diff, &grads);
    }
    loss /= tcfg.batch;
    if (!std::isfinite(loss)) throw DivergenceError("inverse-net training diverged at step " + std::to_string(step));
    result.loss_trace.push_back(loss);
    opt.step(params, inv.net.grad_list(grads));
  }

  double mse = 0;
  for (int i : held) {
    const Tensor& x = pub.images[static_cast<size_t>(i)];
    Tensor rec = inv.invert(target.client_forward(x, split_point));
    double m = 0;
    for (int64_t k = 0; k < x.size(); ++k) {
      const double d = rec[k] - x[k];
      m += d * d;
    }
    mse += m / static_cast<double>(x.size());
  }
  result.holdout_mse = mse / static_cast<double>(held.size());
  return result;
}

}  // namespace splitlab::zoo
