#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "splitlab/rng.hpp"
#include "splitlab/tensor.hpp"

namespace splitlab::defenses {

enum class DefenseKind { None, Noise, Prune, NoPeek, Siamese };

inline const char* defense_kind_name(DefenseKind k) {
  switch (k) {
    case DefenseKind::None: return "none";
    case DefenseKind::Noise: return "noise";
    case DefenseKind::Prune: return "prune";
    case DefenseKind::NoPeek: return "nopeek";
    case DefenseKind::Siamese: return "siamese";
  }
  return "?";
}

struct DefenseConfig {
  DefenseKind kind = DefenseKind::None;
  double noise_scale = 1.0;  // Laplace scale b
  double prune_ratio = 0.1;  // R
  double lambda2 = 5.0;      // NoPeek weight
  double lambda3 = 0.005;    // Siamese weight
  double margin = 1.0;       // Siamese contrastive margin
  uint64_t seed = 0;

  void validate() const {
    if (noise_scale < 0) throw Error("noise scale b must be >= 0");
    if (prune_ratio < 0 || prune_ratio > 1) throw Error("prune ratio R must be in [0,1]");
    if (lambda2 < 0 || lambda3 < 0) throw Error("defense weights must be >= 0");
  }

  // Wire-boundary defenses transform h after the client forward; the training
  // defenses only change how the target model is trained.
  bool applies_at_wire() const {
    return kind == DefenseKind::Noise || kind == DefenseKind::Prune;
  }
};

// h + i.i.d. Laplace(0, b) noise, seeded.
template <typename T>
TensorT<T> noise_mask(const TensorT<T>& h, double b, uint64_t seed) {
  if (b < 0) throw Error("noise scale b must be >= 0");
  TensorT<T> out = h;
  Rng rng(seed);
  for (auto& v : out.data) v += static_cast<T>(rng.laplace(b));
  return out;
}

using ChannelScorer = std::function<std::vector<double>(const Tensor&)>;

inline std::vector<double> channel_variance_scores(const Tensor& h) {
  const int c = h.dim(0), n = h.dim(1) * h.dim(2);
  std::vector<double> scores(static_cast<size_t>(c));
  for (int ci = 0; ci < c; ++ci) {
    const float* xc = &h.data[static_cast<size_t>(ci) * n];
    double mu = 0;
    for (int i = 0; i < n; ++i) mu += xc[i];
    mu /= n;
    double var = 0;
    for (int i = 0; i < n; ++i) var += (xc[i] - mu) * (xc[i] - mu);
    scores[static_cast<size_t>(ci)] = var / n;
  }
  return scores;
}

// Zeroes the ceil(R*C) channels ranked highest by the scorer (default:
// per-channel variance). Ties break toward the lower channel index.
inline Tensor disco_prune(const Tensor& h, double ratio, const ChannelScorer& scorer = nullptr) {
  if (h.ndim() != 3) throw ShapeError("disco_prune expects CxHxW, got " + h.shape_str());
  if (ratio < 0 || ratio > 1) throw Error("prune ratio R must be in [0,1]");
  const int c = h.dim(0), n = h.dim(1) * h.dim(2);
  const int k = static_cast<int>(std::ceil(ratio * c));
  if (k == 0) return h;
  std::vector<double> scores = scorer ? scorer(h) : channel_variance_scores(h);
  std::vector<int> order(static_cast<size_t>(c));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)]; });
  Tensor out = h;
  for (int i = 0; i < k && i < c; ++i) {
    float* xc = &out.data[static_cast<size_t>(order[static_cast<size_t>(i)]) * n];
    std::fill(xc, xc + n, 0.f);
  }
  return out;
}

namespace detail {

template <typename T>
std::vector<double> pairwise_distances(const TensorT<T>& batch) {
  const int bs = batch.dim(0);
  const int64_t d = batch.size() / bs;
  std::vector<double> dist(static_cast<size_t>(bs) * bs, 0.0);
  for (int j = 0; j < bs; ++j)
    for (int k = j + 1; k < bs; ++k) {
      double s = 0;
      for (int64_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(batch[j * d + i]) - static_cast<double>(batch[k * d + i]);
        s += diff * diff;
      }
      dist[static_cast<size_t>(j) * bs + k] = dist[static_cast<size_t>(k) * bs + j] = std::sqrt(s);
    }
  return dist;
}

inline void double_center(std::vector<double>& m, int n) {
  std::vector<double> row(static_cast<size_t>(n), 0.0), col(static_cast<size_t>(n), 0.0);
  double grand = 0;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      row[static_cast<size_t>(j)] += m[static_cast<size_t>(j) * n + k];
      col[static_cast<size_t>(k)] += m[static_cast<size_t>(j) * n + k];
      grand += m[static_cast<size_t>(j) * n + k];
    }
  for (auto& v : row) v /= n;
  for (auto& v : col) v /= n;
  grand /= static_cast<double>(n) * n;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      m[static_cast<size_t>(j) * n + k] += grand - row[static_cast<size_t>(j)] - col[static_cast<size_t>(k)];
}

}  // namespace detail

// Sample distance correlation (V-statistic) between two batches of flattened
// samples; in [0,1]. Zero distance variance on either side maps to 0.
template <typename T>
double distance_correlation(const TensorT<T>& x_batch, const TensorT<T>& h_batch) {
  if (x_batch.ndim() < 1 || h_batch.ndim() < 1 || x_batch.dim(0) != h_batch.dim(0))
    throw ShapeError("distance_correlation: batch sizes differ");
  const int n = x_batch.dim(0);
  if (n < 2) throw Error("distance_correlation requires batch size >= 2");
  auto a = detail::pairwise_distances(x_batch);
  auto b = detail::pairwise_distances(h_batch);
  detail::double_center(a, n);
  detail::double_center(b, n);
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sxy += a[i] * b[i];
    sxx += a[i] * a[i];
    syy += b[i] * b[i];
  }
  const double n2 = static_cast<double>(n) * n;
  sxy /= n2;
  sxx /= n2;
  syy /= n2;
  if (sxx <= 1e-300 || syy <= 1e-300) return 0.0;
  const double r2 = sxy / std::sqrt(sxx * syy);
  return std::sqrt(std::max(r2, 0.0));
}

// d dCor / d h_batch. Smooth away from coincident points; contributions from
// zero-distance pairs are dropped (subgradient 0).
template <typename T>
TensorT<T> distance_correlation_backward(const TensorT<T>& x_batch, const TensorT<T>& h_batch,
                                         T upstream = T(1)) {
  const int n = x_batch.dim(0);
  if (n < 2) throw Error("distance_correlation requires batch size >= 2");
  const int64_t dh = h_batch.size() / n;
  TensorT<T> grad(h_batch.shape);
  auto a = detail::pairwise_distances(x_batch);
  auto braw = detail::pairwise_distances(h_batch);
  auto b = braw;
  detail::double_center(a, n);
  detail::double_center(b, n);
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sxy += a[i] * b[i];
    sxx += a[i] * a[i];
    syy += b[i] * b[i];
  }
  const double n2 = static_cast<double>(n) * n;
  sxy /= n2;
  sxx /= n2;
  syy /= n2;
  if (sxx <= 1e-300 || syy <= 1e-300 || sxy <= 1e-30) return grad;  // flat/degenerate region

  const double root = std::pow(sxx * syy, -0.25);
  const double d_u = 0.5 / std::sqrt(sxy) * root;                        // d dcor / d sxy
  const double d_vy = -0.25 * std::sqrt(sxy) * std::pow(sxx * syy, -1.25) * sxx;  // d dcor / d syy

  // d dcor / d b_jk, using that double centering is self-adjoint.
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      if (j == k) continue;
      const double bjk = braw[static_cast<size_t>(j) * n + k];
      if (bjk <= 0) continue;
      const double g_b = d_u * a[static_cast<size_t>(j) * n + k] / n2 +
                         d_vy * 2.0 * b[static_cast<size_t>(j) * n + k] / n2;
      // b_jk appears symmetrically; fold both (j,k) and (k,j) into row j.
      const double coeff = 2.0 * g_b / bjk * static_cast<double>(upstream);
      for (int64_t i = 0; i < dh; ++i) {
        const double diff = static_cast<double>(h_batch[j * dh + i]) - static_cast<double>(h_batch[k * dh + i]);
        grad[j * dh + i] += static_cast<T>(coeff * diff);
      }
    }
  return grad;
}

// Contrastive pair loss: ||a-b||^2 for same-source pairs, hinge^2 otherwise.
template <typename T>
T siamese_loss(const TensorT<T>& h_a, const TensorT<T>& h_b, bool same_source, T margin) {
  if (!h_a.same_shape(h_b)) throw ShapeError("siamese_loss: shape mismatch");
  double d2 = 0;
  for (int64_t i = 0; i < h_a.size(); ++i) {
    const double diff = static_cast<double>(h_a[i]) - static_cast<double>(h_b[i]);
    d2 += diff * diff;
  }
  if (same_source) return static_cast<T>(d2);
  const double d = std::sqrt(d2);
  const double hinge = std::max(0.0, static_cast<double>(margin) - d);
  return static_cast<T>(hinge * hinge);
}

// Gradients w.r.t. h_a (negate for h_b).
template <typename T>
TensorT<T> siamese_loss_backward(const TensorT<T>& h_a, const TensorT<T>& h_b, bool same_source,
                                 T margin, T upstream = T(1)) {
  TensorT<T> g(h_a.shape);
  double d2 = 0;
  for (int64_t i = 0; i < h_a.size(); ++i) {
    const double diff = static_cast<double>(h_a[i]) - static_cast<double>(h_b[i]);
    d2 += diff * diff;
  }
  if (same_source) {
    for (int64_t i = 0; i < h_a.size(); ++i)
      g[i] = static_cast<T>(2.0 * (h_a[i] - h_b[i]) * upstream);
    return g;
  }
  const double d = std::sqrt(d2);
  if (d >= margin || d <= 0) return g;
  const double coeff = -2.0 * (margin - d) / d * static_cast<double>(upstream);
  for (int64_t i = 0; i < h_a.size(); ++i)
    g[i] = static_cast<T>(coeff * (h_a[i] - h_b[i]));
  return g;
}

}  // namespace splitlab::defenses
