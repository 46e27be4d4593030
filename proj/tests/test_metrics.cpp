#include <cmath>

#include "doctest.h"
#include "splitlab/metrics.hpp"

using namespace splitlab;
using namespace splitlab::metrics;

namespace {

// Independent scalar-loop oracles: plain per-pixel loops, no sliding sums.
double mse_oracle(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (int c = 0; c < a.dim(0); ++c)
    for (int i = 0; i < a.dim(1); ++i)
      for (int j = 0; j < a.dim(2); ++j) {
        const double d = static_cast<double>(a.at(c, i, j)) - static_cast<double>(b.at(c, i, j));
        s += d * d;
      }
  return s / (a.dim(0) * a.dim(1) * a.dim(2));
}

double ssim_oracle(const Tensor& a, const Tensor& b) {
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const int win = 7;
  const double C1 = 1e-4, C2 = 9e-4;
  std::vector<double> ga(static_cast<size_t>(h) * w, 0), gb(static_cast<size_t>(h) * w, 0);
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        ga[static_cast<size_t>(i) * w + j] += a.at(ci, i, j) / c;
        gb[static_cast<size_t>(i) * w + j] += b.at(ci, i, j) / c;
      }
  double total = 0;
  int count = 0;
  for (int top = 0; top + win <= h; ++top)
    for (int left = 0; left + win <= w; ++left) {
      double mua = 0, mub = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          mua += ga[static_cast<size_t>(top + i) * w + (left + j)];
          mub += gb[static_cast<size_t>(top + i) * w + (left + j)];
        }
      mua /= win * win;
      mub /= win * win;
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double da = ga[static_cast<size_t>(top + i) * w + (left + j)] - mua;
          const double db = gb[static_cast<size_t>(top + i) * w + (left + j)] - mub;
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

}  // namespace

TEST_CASE("mse basics") {
  Rng rng(3);
  Tensor a = Tensor::random_uniform({3, 8, 8}, rng);
  CHECK(mse(a, a) == 0.0);
  Tensor zeros = Tensor::zeros({1, 4, 4});
  Tensor ones = Tensor::full({1, 4, 4}, 1.f);
  CHECK(mse(zeros, ones) == doctest::Approx(1.0));
  Tensor b = Tensor::random_uniform({3, 8, 8}, rng);
  CHECK(mse(a, b) == mse(b, a));
  CHECK_THROWS_AS(mse(a, Tensor({3, 4, 4})), ShapeError);
}

TEST_CASE("psnr closed forms") {
  // mse 0.01 -> 20 dB: images differing by 0.1 everywhere
  Tensor a = Tensor::zeros({1, 8, 8});
  Tensor b = Tensor::full({1, 8, 8}, 0.1f);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));

  Tensor ones = Tensor::full({1, 8, 8}, 1.f);
  CHECK(psnr(a, ones) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::isinf(psnr(a, a)));

  // strictly decreasing in mse
  double prev = 1e9;
  for (float step : {0.05f, 0.1f, 0.2f, 0.4f}) {
    const double v = psnr(a, Tensor::full({1, 8, 8}, step));
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("ssim closed forms and symmetry") {
  Rng rng(5);
  Tensor a = Tensor::random_uniform({3, 16, 16}, rng);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

  Tensor zeros = Tensor::zeros({1, 8, 8});
  Tensor ones = Tensor::full({1, 8, 8}, 1.f);
  const double c1 = 1e-4;
  CHECK(ssim(zeros, ones) == doctest::Approx(c1 / (1 + c1)).epsilon(1e-12));

  Tensor b = Tensor::random_uniform({3, 16, 16}, rng);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  CHECK(ssim(a, b) <= 1.0);

  CHECK_THROWS_AS(ssim(Tensor({1, 4, 4}), Tensor({1, 4, 4})), ShapeError);
}

TEST_CASE("metrics match the independent scalar-loop oracles") {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor a = Tensor::random_uniform({3, 16, 16}, rng);
    Tensor b = Tensor::random_uniform({3, 16, 16}, rng);
    CHECK(std::abs(mse(a, b) - mse_oracle(a, b)) < 1e-8);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-8);
    const double m = mse_oracle(a, b);
    CHECK(std::abs(psnr(a, b) - 10 * std::log10(1.0 / m)) < 1e-8);
  }
}
