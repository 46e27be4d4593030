#pragma once

#include <functional>
#include <limits>

#include "splitlab/attacks.hpp"
#include "splitlab/cma.hpp"

namespace splitlab::attacks {

// Query-only access to the client model; counts every call.
template <typename T>
struct QueryOracleT {
  std::function<TensorT<T>(const TensorT<T>&)> fn;
  long budget = std::numeric_limits<long>::max();
  long count = 0;

  bool exhausted() const { return count >= budget; }
  TensorT<T> query(const TensorT<T>& x) {
    ++count;
    return fn(x);
  }
};

using QueryOracle = QueryOracleT<float>;

namespace detail {

// Fixed random linear expansion of a low-dimensional code into hf space,
// scaled so a unit-normal code moves hf by about half the ball radius.
template <typename T>
struct CodeExpansion {
  TensorT<T> P;  // {hf_size, code_dim}
  int code_dim;

  CodeExpansion(const std::vector<int>& hf_shape, int code, double target_l1, uint64_t seed)
      : code_dim(code) {
    const int hf_size = static_cast<int>(TensorT<T>::count(hf_shape));
    Rng rng(seed);
    P = TensorT<T>::random_normal({hf_size, code}, rng);
    // E ||P c||_1 for c ~ N(0,I) is sqrt(2/pi) * sum_j ||row_j||_2
    double e_l1 = 0;
    for (int j = 0; j < hf_size; ++j) {
      double s = 0;
      for (int k = 0; k < code; ++k) {
        const double v = P[static_cast<int64_t>(j) * code + k];
        s += v * v;
      }
      e_l1 += std::sqrt(s);
    }
    e_l1 *= std::sqrt(2.0 / 3.14159265358979323846);
    const double scale = e_l1 > 0 && target_l1 > 0 ? target_l1 / e_l1 : 1.0;
    for (auto& v : P.data) v = static_cast<T>(v * scale);
  }

  TensorT<T> expand(const double* code, const TensorT<T>& center) const {
    TensorT<T> out = center;
    const int hf_size = P.dim(0);
    for (int j = 0; j < hf_size; ++j) {
      double s = 0;
      for (int k = 0; k < code_dim; ++k) s += P[static_cast<int64_t>(j) * code_dim + k] * code[k];
      out[j] += static_cast<T>(s);
    }
    return out;
  }
};

}  // namespace detail

// Gradient-free PFO: CMA replaces the optimizer in every phase. The search
// variables are w plus, per stage, a low-dimensional code expanded into hf
// space; every sampled candidate is projected onto the Algorithm-1 balls
// before it is evaluated through the query oracle.
template <typename T, typename Prior>
AttackResultT<T> attack_pfo_blackbox(const TensorT<T>& h_tar, QueryOracleT<T>& oracle,
                                     const Prior& prior, const AttackConfigT<T>& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  AttackResultT<T> result;
  result.config = cfg;

  double best_total = std::numeric_limits<double>::infinity();
  double best_match = std::numeric_limits<double>::infinity();
  TensorT<T> best_image;

  auto evaluate = [&](const TensorT<T>& x) {
    TensorT<T> h = oracle.query(x);
    const double match = match_loss(h, h_tar);
    const double total = match + cfg.tv_weight * static_cast<double>(nn::total_variation(x));
    if (total < best_total) {
      best_total = total;
      best_match = match;
      best_image = x;
    }
    return total;
  };

  // Phase 1: candidate selection by direct oracle scoring.
  Rng rng(derive_seed(cfg.seed, "bb-selection"));
  const int kz = prior.latent_dim();
  TensorT<T> w = prior.map_latent(TensorT<T>::random_normal({kz}, rng));
  {
    double best_sel = std::numeric_limits<double>::infinity();
    TensorT<T> z0 = TensorT<T>::random_normal({kz}, rng);
    w = prior.map_latent(z0);
    double f0 = oracle.exhausted() ? std::numeric_limits<double>::infinity()
                                   : evaluate(prior.synth_from(0, nullptr, w));
    best_sel = f0;
    std::vector<double> raw{f0}, trace{f0};
    for (int c = 1; c < cfg.candidates && !oracle.exhausted(); ++c) {
      TensorT<T> z = TensorT<T>::random_normal({kz}, rng);
      TensorT<T> wc = prior.map_latent(z);
      const double f = evaluate(prior.synth_from(0, nullptr, wc));
      if (f < best_sel) {
        best_sel = f;
        w = wc;
      }
      raw.push_back(f);
      trace.push_back(best_sel);
    }
    result.raw_traces.push_back(std::move(raw));
    result.traces.push_back(std::move(trace));
  }

  // Phase 2: CMA over w.
  auto run_cma = [&](opt::CmaEs& cma, int generations,
                     const std::function<double(const Tensord&)>& f) {
    std::vector<double> raw, trace;
    for (int g = 0; g < generations && !oracle.exhausted(); ++g) {
      const auto& pop = cma.ask();
      std::vector<double> vals(pop.size());
      for (size_t i = 0; i < pop.size(); ++i)
        vals[i] = oracle.exhausted() ? std::numeric_limits<double>::infinity() : f(pop[i]);
      cma.tell(vals);
      raw.push_back(*std::min_element(vals.begin(), vals.end()));
      trace.push_back(best_total);
    }
    result.raw_traces.push_back(std::move(raw));
    result.traces.push_back(std::move(trace));
  };

  {
    opt::CmaEs cma(cast_tensor(w, double{}), cfg.cma_sigma, derive_seed(cfg.seed, "bb-w"),
                   cfg.cma_population);
    run_cma(cma, cfg.w_iters(), [&](const Tensord& cand) {
      TensorT<T> wc = cast_tensor(cand, T{});
      return evaluate(prior.synth_from(0, nullptr, wc));
    });
    w = cast_tensor(cma.best_point(), T{});
  }

  // Phase 3: progressive stages over (w, code).
  const int stages = prior.stages();
  if (stages == 0 || oracle.exhausted()) {
    result.image = best_image.size() ? best_image : prior.synth_from(0, nullptr, w);
    result.final_match_loss = best_match;
    result.final_total_loss = best_total;
    result.queries = oracle.count;
    result.budget_exceeded = oracle.exhausted();
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }

  TensorT<T> hf = prior.advance(0, TensorT<T>(), w);
  const int kw = prior.style_dim();
  for (int stage = 1; stage <= stages && !oracle.exhausted(); ++stage) {
    const TensorT<T> hf_center = hf;
    const TensorT<T> w_center = w;
    const double frac = cfg.radius_fraction(stage);
    const bool project = cfg.l1_ball && !std::isinf(frac);
    const double r_hf = project ? frac * static_cast<double>(hf_center.l1_norm()) : 0;
    const double r_w = project ? frac * static_cast<double>(w_center.l1_norm()) : 0;

    detail::CodeExpansion<T> expansion(hf_center.shape, cfg.code_dim,
                                       project ? 0.5 * r_hf : 0.1 * hf_center.l1_norm(),
                                       derive_seed(cfg.seed, "bb-code-" + std::to_string(stage)));

    Tensord mean0({kw + cfg.code_dim});
    for (int i = 0; i < kw; ++i) mean0[i] = w_center[i];
    opt::CmaEs cma(mean0, cfg.cma_sigma, derive_seed(cfg.seed, "bb-stage-" + std::to_string(stage)),
                   cfg.cma_population);

    double stage_best = std::numeric_limits<double>::infinity();
    TensorT<T> stage_hf = hf_center, stage_w = w_center;

    run_cma(cma, cfg.iterations, [&](const Tensord& cand) {
      TensorT<T> wc({kw});
      for (int i = 0; i < kw; ++i) wc[i] = static_cast<T>(cand[i]);
      TensorT<T> hfc = expansion.expand(cand.data.data() + kw, hf_center);
      if (project) {
        hfc = project_l1_ball(hfc, hf_center, r_hf);
        wc = project_l1_ball(wc, w_center, r_w);
      }
      TensorT<T> x = prior.synth_from(stage, &hfc, wc);
      const double f = evaluate(x);
      if (f < stage_best) {
        stage_best = f;
        stage_hf = hfc;
        stage_w = wc;
      }
      return f;
    });

    hf = prior.advance(stage, stage_hf, stage_w);
    w = stage_w;
  }

  result.image = best_image.size() ? best_image : hf;
  result.final_match_loss = best_match;
  result.final_total_loss = best_total;
  result.queries = oracle.count;
  result.budget_exceeded = oracle.exhausted();
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Equal-budget baseline: independent samples from the same initial search
// distribution, with the same projections, keeping the best.
template <typename T, typename Prior>
AttackResultT<T> blackbox_random_search(const TensorT<T>& h_tar, QueryOracleT<T>& oracle,
                                        const Prior& prior, const AttackConfigT<T>& cfg) {
  cfg.validate();
  AttackResultT<T> result;
  result.config = cfg;
  Rng rng(derive_seed(cfg.seed, "bb-random"));
  const int kz = prior.latent_dim();
  const int kw = prior.style_dim();

  double best_total = std::numeric_limits<double>::infinity();
  double best_match = std::numeric_limits<double>::infinity();
  TensorT<T> best_image;
  std::vector<double> raw, trace;

  TensorT<T> w_ref = prior.map_latent(TensorT<T>::random_normal({kz}, rng));
  while (!oracle.exhausted()) {
    TensorT<T> wc(w_ref.shape);
    for (int i = 0; i < kw; ++i) wc[i] = static_cast<T>(w_ref[i] + cfg.cma_sigma * rng.normal());
    TensorT<T> x = prior.synth_from(0, nullptr, wc);
    TensorT<T> h = oracle.query(x);
    const double match = match_loss(h, h_tar);
    const double total = match + cfg.tv_weight * static_cast<double>(nn::total_variation(x));
    if (total < best_total) {
      best_total = total;
      best_match = match;
      best_image = x;
    }
    raw.push_back(total);
    trace.push_back(best_total);
  }
  result.image = best_image.size() ? best_image : prior.synth_from(0, nullptr, w_ref);
  result.final_match_loss = best_match;
  result.final_total_loss = best_total;
  result.queries = oracle.count;
  result.raw_traces.push_back(std::move(raw));
  result.traces.push_back(std::move(trace));
  return result;
}

}  // namespace splitlab::attacks
