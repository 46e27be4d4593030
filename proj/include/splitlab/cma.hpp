#pragma once

#include <cstdint>
#include <vector>

#include "splitlab/rng.hpp"
#include "splitlab/tensor.hpp"

namespace splitlab::opt {

// Covariance Matrix Adaptation evolution strategy (rank-based selection,
// rank-1 + rank-mu covariance update, cumulative step-size adaptation).
// ask() yields a population, tell() consumes its objective values.
class CmaEs {
 public:
  CmaEs(Tensord mean0, double sigma0, uint64_t seed, int population = 0);

  const std::vector<Tensord>& ask();
  void tell(const std::vector<double>& values);

  int population() const { return lambda_; }
  int generation() const { return generation_; }
  double sigma() const { return sigma_; }
  const Tensord& mean() const { return mean_; }
  const Tensord& best_point() const { return best_point_; }
  double best_value() const { return best_value_; }

 private:
  void decompose();

  int n_;
  int lambda_, mu_;
  double mu_eff_;
  double c_sigma_, d_sigma_, c_c_, c_1_, c_mu_, chi_n_;
  std::vector<double> weights_;

  Tensord mean_;
  double sigma_;
  std::vector<double> C_;       // n x n covariance
  std::vector<double> B_;       // eigenvectors (columns)
  std::vector<double> D_;       // sqrt eigenvalues
  std::vector<double> p_sigma_, p_c_;
  bool decomposed_ = false;

  Rng rng_;
  int generation_ = 0;
  std::vector<Tensord> population_points_;
  std::vector<std::vector<double>> population_z_;  // y = B D z per candidate

  Tensord best_point_;
  double best_value_;
};

// Jacobi eigendecomposition of a symmetric matrix; eigenvalues ascending.
void symmetric_eigen(const std::vector<double>& m, int n, std::vector<double>& eigvecs,
                     std::vector<double>& eigvals);

}  // namespace splitlab::opt
