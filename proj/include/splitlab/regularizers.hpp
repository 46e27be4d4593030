#pragma once

#include <cmath>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab::nn {

// Isotropic total variation of a CxHxW image: sum over channels and pixels of
// sqrt(dv^2 + dh^2), with out-of-range differences taken as 0. The forward
// value is exact (zero for constant images); only the backward smooths the
// root with +1e-12 so the gradient exists at locally constant pixels.
template <typename T>
T total_variation(const TensorT<T>& x) {
  if (x.ndim() != 3) throw ShapeError("total_variation expects CxHxW, got " + x.shape_str());
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  double sum = 0;
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double dv = i + 1 < h ? x.at(ci, i + 1, j) - x.at(ci, i, j) : 0.0;
        const double dh = j + 1 < w ? x.at(ci, i, j + 1) - x.at(ci, i, j) : 0.0;
        sum += std::sqrt(dv * dv + dh * dh);
      }
  return static_cast<T>(sum);
}

template <typename T>
TensorT<T> total_variation_backward(const TensorT<T>& x, T upstream = T(1)) {
  if (x.ndim() != 3) throw ShapeError("total_variation expects CxHxW, got " + x.shape_str());
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  TensorT<T> g(x.shape);
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double dv = i + 1 < h ? x.at(ci, i + 1, j) - x.at(ci, i, j) : 0.0;
        const double dh = j + 1 < w ? x.at(ci, i, j + 1) - x.at(ci, i, j) : 0.0;
        const double inv = 1.0 / std::sqrt(dv * dv + dh * dh + 1e-12);
        const T gv = static_cast<T>(upstream * dv * inv);
        const T gh = static_cast<T>(upstream * dh * inv);
        if (i + 1 < h) g.at(ci, i + 1, j) += gv;
        if (j + 1 < w) g.at(ci, i, j + 1) += gh;
        g.at(ci, i, j) -= gv + gh;
      }
  return g;
}

// KL divergence of the batch's per-dimension empirical Gaussian from N(0, I):
// -1/2 sum_i (1 + log s_i^2 - m_i^2 - s_i^2), statistics taken per dimension
// across the batch (population variance, floored at 1e-8).
template <typename T>
T kl_gaussian_reg(const TensorT<T>& z_batch) {
  if (z_batch.ndim() != 2) throw ShapeError("kl_gaussian_reg expects Bxk, got " + z_batch.shape_str());
  const int bs = z_batch.dim(0), k = z_batch.dim(1);
  if (bs < 2) throw Error("kl_gaussian_reg requires batch size >= 2 for batch statistics");
  double kl = 0;
  for (int i = 0; i < k; ++i) {
    double mu = 0;
    for (int c = 0; c < bs; ++c) mu += z_batch[static_cast<int64_t>(c) * k + i];
    mu /= bs;
    double var = 0;
    for (int c = 0; c < bs; ++c) {
      const double d = z_batch[static_cast<int64_t>(c) * k + i] - mu;
      var += d * d;
    }
    var /= bs;
    if (var < 1e-8) var = 1e-8;
    kl += -0.5 * (1.0 + std::log(var) - mu * mu - var);
  }
  return static_cast<T>(kl);
}

template <typename T>
TensorT<T> kl_gaussian_reg_backward(const TensorT<T>& z_batch, T upstream = T(1)) {
  if (z_batch.ndim() != 2) throw ShapeError("kl_gaussian_reg expects Bxk, got " + z_batch.shape_str());
  const int bs = z_batch.dim(0), k = z_batch.dim(1);
  if (bs < 2) throw Error("kl_gaussian_reg requires batch size >= 2 for batch statistics");
  TensorT<T> g(z_batch.shape);
  for (int i = 0; i < k; ++i) {
    double mu = 0;
    for (int c = 0; c < bs; ++c) mu += z_batch[static_cast<int64_t>(c) * k + i];
    mu /= bs;
    double var = 0;
    for (int c = 0; c < bs; ++c) {
      const double d = z_batch[static_cast<int64_t>(c) * k + i] - mu;
      var += d * d;
    }
    var /= bs;
    // d/dmu = mu; d/dvar = -0.5 (1/var - 1); floored variance has zero grad.
    const double dmu = mu;
    const double dvar = var < 1e-8 ? 0.0 : -0.5 * (1.0 / var - 1.0);
    for (int c = 0; c < bs; ++c) {
      const double zci = z_batch[static_cast<int64_t>(c) * k + i];
      g[static_cast<int64_t>(c) * k + i] =
          static_cast<T>(upstream * (dmu / bs + dvar * 2.0 * (zci - mu) / bs));
    }
  }
  return g;
}

}  // namespace splitlab::nn
