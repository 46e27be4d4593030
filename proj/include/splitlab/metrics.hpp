#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab::metrics {

inline double mse(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("mse: shapes differ, " + a.shape_str() + " vs " + b.shape_str());
  double s = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

inline double psnr(const Tensor& a, const Tensor& b, double peak = 1.0) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

// SSIM over the channel-mean grayscale image, 7x7 uniform window, valid
// positions only. C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = 1.
inline double ssim(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("ssim: shapes differ, " + a.shape_str() + " vs " + b.shape_str());
  if (a.ndim() != 3) throw ShapeError("ssim expects CxHxW images");
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  constexpr int win = 7;
  if (h < win || w < win)
    throw ShapeError("ssim: image smaller than the 7x7 window");
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;

  std::vector<double> ga(static_cast<size_t>(h) * w, 0.0), gb(static_cast<size_t>(h) * w, 0.0);
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        ga[static_cast<size_t>(i) * w + j] += a.at(ci, i, j) / c;
        gb[static_cast<size_t>(i) * w + j] += b.at(ci, i, j) / c;
      }

  // Sliding column sums per window row band, then slide across columns.
  const double n = win * win;
  double total = 0;
  int count = 0;
  std::vector<double> col_a(static_cast<size_t>(w)), col_b(static_cast<size_t>(w)),
      col_aa(static_cast<size_t>(w)), col_bb(static_cast<size_t>(w)), col_ab(static_cast<size_t>(w));
  for (int top = 0; top + win <= h; ++top) {
    for (int j = 0; j < w; ++j) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = top; i < top + win; ++i) {
        const double va = ga[static_cast<size_t>(i) * w + j], vb = gb[static_cast<size_t>(i) * w + j];
        sa += va;
        sb += vb;
        saa += va * va;
        sbb += vb * vb;
        sab += va * vb;
      }
      col_a[static_cast<size_t>(j)] = sa;
      col_b[static_cast<size_t>(j)] = sb;
      col_aa[static_cast<size_t>(j)] = saa;
      col_bb[static_cast<size_t>(j)] = sbb;
      col_ab[static_cast<size_t>(j)] = sab;
    }
    for (int left = 0; left + win <= w; ++left) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int j = left; j < left + win; ++j) {
        sa += col_a[static_cast<size_t>(j)];
        sb += col_b[static_cast<size_t>(j)];
        saa += col_aa[static_cast<size_t>(j)];
        sbb += col_bb[static_cast<size_t>(j)];
        sab += col_ab[static_cast<size_t>(j)];
      }
      const double mua = sa / n, mub = sb / n;
      const double vara = saa / n - mua * mua;
      const double varb = sbb / n - mub * mub;
      const double cov = sab / n - mua * mub;
      const double val = ((2 * mua * mub + C1) * (2 * cov + C2)) /
                         ((mua * mua + mub * mub + C1) * (vara + varb + C2));
      total += val;
      ++count;
    }
  }
  return total / count;
}

struct EvalRow {
  std::string attack;
  int split = 0;
  std::string defense;
  double psnr_mean = 0, mse_mean = 0, ssim_mean = 0;
  int n = 0;          // targets included in the means
  int failed = 0;     // attack failures, excluded from the means
  uint64_t seed = 0;
};

}  // namespace splitlab::metrics
