#pragma once

#include <cmath>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab::nn {

enum class OptimMode { Plain, Adam };

// Plain gradient descent or Adam with bias correction. State is lazily sized
// from the first step; shapes must stay fixed afterwards.
template <typename T>
class OptimizerT {
 public:
  OptimizerT(OptimMode mode, double lr, double beta1 = 0.9, double beta2 = 0.999,
             double eps = 1e-8)
      : mode_(mode), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  OptimMode mode() const { return mode_; }
  double lr() const { return lr_; }
  int64_t steps() const { return step_count_; }

  void step(const std::vector<TensorT<T>*>& params, const std::vector<TensorT<T>*>& grads) {
    if (params.size() != grads.size()) throw Error("optimizer: param/grad count mismatch");
    if (mode_ == OptimMode::Adam && m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (size_t p = 0; p < params.size(); ++p) {
        m_[p].assign(params[p]->data.size(), T(0));
        v_[p].assign(params[p]->data.size(), T(0));
      }
    }
    ++step_count_;
    for (size_t p = 0; p < params.size(); ++p) {
      TensorT<T>& par = *params[p];
      const TensorT<T>& g = *grads[p];
      if (!par.same_shape(g))
        throw ShapeError("optimizer: gradient shape " + g.shape_str() +
                         " does not match parameter " + par.shape_str());
      for (int64_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(static_cast<double>(g[i])))
          throw DivergenceError("non-finite gradient at parameter " + std::to_string(p) +
                                " coordinate " + std::to_string(i) + "; step rejected");
      if (mode_ == OptimMode::Plain) {
        for (int64_t i = 0; i < par.size(); ++i) par[i] -= static_cast<T>(lr_) * g[i];
      } else {
        if (m_[p].size() != par.data.size()) throw Error("optimizer: state shape changed");
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
        for (int64_t i = 0; i < par.size(); ++i) {
          const size_t k = static_cast<size_t>(i);
          m_[p][k] = static_cast<T>(beta1_ * m_[p][k] + (1.0 - beta1_) * g[i]);
          v_[p][k] = static_cast<T>(beta2_ * v_[p][k] + (1.0 - beta2_) * g[i] * g[i]);
          const double mhat = m_[p][k] / bc1;
          const double vhat = v_[p][k] / bc2;
          par[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
      }
    }
  }

  void step_single(TensorT<T>& param, const TensorT<T>& grad) {
    std::vector<TensorT<T>*> p{&param};
    TensorT<T> g = grad;
    std::vector<TensorT<T>*> gl{&g};
    step(p, gl);
  }

 private:
  OptimMode mode_;
  double lr_, beta1_, beta2_, eps_;
  int64_t step_count_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

using Optimizer = OptimizerT<float>;

}  // namespace splitlab::nn
