#include "splitlab/cma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "splitlab/error.hpp"

namespace splitlab::opt {

void symmetric_eigen(const std::vector<double>& m, int n, std::vector<double>& eigvecs,
                     std::vector<double>& eigvals) {
  std::vector<double> a = m;
  eigvecs.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) eigvecs[static_cast<size_t>(i) * n + i] = 1.0;

  auto at = [n](std::vector<double>& v, int r, int c) -> double& {
    return v[static_cast<size_t>(r) * n + c];
  };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double app = at(a, p, p), aqq = at(a, q, q);
        const double theta = (aqq - app) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1.0 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(a, k, p), akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(a, p, k), aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = at(eigvecs, k, p), vkq = at(eigvecs, k, q);
          at(eigvecs, k, p) = c * vkp - s * vkq;
          at(eigvecs, k, q) = s * vkp + c * vkq;
        }
      }
  }
  eigvals.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eigvals[static_cast<size_t>(i)] = at(a, i, i);
}

CmaEs::CmaEs(Tensord mean0, double sigma0, uint64_t seed, int population)
    : n_(static_cast<int>(mean0.size())),
      mean_(std::move(mean0)),
      sigma_(sigma0),
      rng_(seed),
      best_value_(std::numeric_limits<double>::infinity()) {
  if (n_ < 1) throw Error("CmaEs: empty search space");
  if (sigma0 <= 0) throw Error("CmaEs: sigma0 must be positive");
  lambda_ = population > 0 ? population : 4 + static_cast<int>(std::floor(3 * std::log(n_)));
  if (lambda_ < 4) lambda_ = 4;
  mu_ = lambda_ / 2;

  weights_.resize(static_cast<size_t>(mu_));
  double wsum = 0;
  for (int i = 0; i < mu_; ++i) {
    weights_[static_cast<size_t>(i)] = std::log(lambda_ / 2.0 + 0.5) - std::log(i + 1.0);
    wsum += weights_[static_cast<size_t>(i)];
  }
  double w2 = 0;
  for (auto& w : weights_) {
    w /= wsum;
    w2 += w * w;
  }
  mu_eff_ = 1.0 / w2;

  c_sigma_ = (mu_eff_ + 2.0) / (n_ + mu_eff_ + 5.0);
  d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (n_ + 1.0)) - 1.0) + c_sigma_;
  c_c_ = (4.0 + mu_eff_ / n_) / (n_ + 4.0 + 2.0 * mu_eff_ / n_);
  c_1_ = 2.0 / ((n_ + 1.3) * (n_ + 1.3) + mu_eff_);
  c_mu_ = std::min(1.0 - c_1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) / ((n_ + 2.0) * (n_ + 2.0) + mu_eff_));
  chi_n_ = std::sqrt(static_cast<double>(n_)) * (1.0 - 1.0 / (4.0 * n_) + 1.0 / (21.0 * n_ * n_));

  C_.assign(static_cast<size_t>(n_) * n_, 0.0);
  for (int i = 0; i < n_; ++i) C_[static_cast<size_t>(i) * n_ + i] = 1.0;
  p_sigma_.assign(static_cast<size_t>(n_), 0.0);
  p_c_.assign(static_cast<size_t>(n_), 0.0);
  best_point_ = mean_;
}

void CmaEs::decompose() {
  std::vector<double> vals;
  symmetric_eigen(C_, n_, B_, vals);
  D_.resize(static_cast<size_t>(n_));
  for (int i = 0; i < n_; ++i)
    D_[static_cast<size_t>(i)] = std::sqrt(std::max(vals[static_cast<size_t>(i)], 1e-30));
  decomposed_ = true;
}

const std::vector<Tensord>& CmaEs::ask() {
  if (!decomposed_) decompose();
  population_points_.assign(static_cast<size_t>(lambda_), Tensord(mean_.shape));
  population_z_.assign(static_cast<size_t>(lambda_), std::vector<double>(static_cast<size_t>(n_)));
  for (int k = 0; k < lambda_; ++k) {
    auto& z = population_z_[static_cast<size_t>(k)];
    for (int i = 0; i < n_; ++i) z[static_cast<size_t>(i)] = rng_.normal();
    Tensord& x = population_points_[static_cast<size_t>(k)];
    for (int r = 0; r < n_; ++r) {
      double y = 0;
      for (int ci = 0; ci < n_; ++ci)
        y += B_[static_cast<size_t>(r) * n_ + ci] * D_[static_cast<size_t>(ci)] * z[static_cast<size_t>(ci)];
      x[r] = mean_[r] + sigma_ * y;
    }
  }
  return population_points_;
}

void CmaEs::tell(const std::vector<double>& values) {
  if (values.size() != population_points_.size())
    throw Error("CmaEs::tell: value count does not match the asked population");
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[static_cast<size_t>(a)] < values[static_cast<size_t>(b)]; });

  if (values[static_cast<size_t>(order[0])] < best_value_) {
    best_value_ = values[static_cast<size_t>(order[0])];
    best_point_ = population_points_[static_cast<size_t>(order[0])];
  }

  // y_w = weighted mean of the mu best steps, in y = (x - m) / sigma space.
  std::vector<double> y_w(static_cast<size_t>(n_), 0.0);
  for (int i = 0; i < mu_; ++i) {
    const Tensord& x = population_points_[static_cast<size_t>(order[static_cast<size_t>(i)])];
    for (int r = 0; r < n_; ++r)
      y_w[static_cast<size_t>(r)] += weights_[static_cast<size_t>(i)] * (x[r] - mean_[r]) / sigma_;
  }

  Tensord old_mean = mean_;
  for (int r = 0; r < n_; ++r) mean_[r] += sigma_ * y_w[static_cast<size_t>(r)];

  // p_sigma with C^{ -1/2 } y_w = B D^{-1} B^T y_w
  std::vector<double> tmp(static_cast<size_t>(n_), 0.0), cinv_y(static_cast<size_t>(n_), 0.0);
  for (int ci = 0; ci < n_; ++ci) {
    double s = 0;
    for (int r = 0; r < n_; ++r) s += B_[static_cast<size_t>(r) * n_ + ci] * y_w[static_cast<size_t>(r)];
    tmp[static_cast<size_t>(ci)] = s / D_[static_cast<size_t>(ci)];
  }
  for (int r = 0; r < n_; ++r) {
    double s = 0;
    for (int ci = 0; ci < n_; ++ci) s += B_[static_cast<size_t>(r) * n_ + ci] * tmp[static_cast<size_t>(ci)];
    cinv_y[static_cast<size_t>(r)] = s;
  }
  const double cs_fac = std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_);
  double ps_norm2 = 0;
  for (int r = 0; r < n_; ++r) {
    p_sigma_[static_cast<size_t>(r)] =
        (1.0 - c_sigma_) * p_sigma_[static_cast<size_t>(r)] + cs_fac * cinv_y[static_cast<size_t>(r)];
    ps_norm2 += p_sigma_[static_cast<size_t>(r)] * p_sigma_[static_cast<size_t>(r)];
  }
  const double ps_norm = std::sqrt(ps_norm2);

  ++generation_;
  const double denom = std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * generation_));
  const bool h_sigma = ps_norm / denom < (1.4 + 2.0 / (n_ + 1.0)) * chi_n_;

  const double cc_fac = std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_);
  for (int r = 0; r < n_; ++r)
    p_c_[static_cast<size_t>(r)] =
        (1.0 - c_c_) * p_c_[static_cast<size_t>(r)] + (h_sigma ? cc_fac * y_w[static_cast<size_t>(r)] : 0.0);

  const double c1a = c_1_ * (1.0 - (h_sigma ? 0.0 : 1.0) * c_c_ * (2.0 - c_c_));
  for (int r = 0; r < n_; ++r)
    for (int c = 0; c < n_; ++c) {
      double rank_mu = 0;
      for (int i = 0; i < mu_; ++i) {
        const Tensord& x = population_points_[static_cast<size_t>(order[static_cast<size_t>(i)])];
        const double yr = (x[r] - old_mean[r]) / sigma_;
        const double yc = (x[c] - old_mean[c]) / sigma_;
        rank_mu += weights_[static_cast<size_t>(i)] * yr * yc;
      }
      C_[static_cast<size_t>(r) * n_ + c] =
          (1.0 - c1a - c_mu_) * C_[static_cast<size_t>(r) * n_ + c] +
          c_1_ * p_c_[static_cast<size_t>(r)] * p_c_[static_cast<size_t>(c)] + c_mu_ * rank_mu;
    }

  sigma_ *= std::exp((c_sigma_ / d_sigma_) * (ps_norm / chi_n_ - 1.0));
  decomposed_ = false;
}

}  // namespace splitlab::opt
