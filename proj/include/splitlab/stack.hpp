#pragma once

#include <string>
#include <vector>

#include "splitlab/layers.hpp"

namespace splitlab::nn {

template <typename T>
struct CacheT {
  std::vector<TensorT<T>> inputs;  // input fed to each layer
  TensorT<T> output;
  TensorT<T> style;
  bool has_style = false;
  uint64_t signature = 0;
};

template <typename T>
struct StackGradsT {
  std::vector<LayerGradsT<T>> layers;
  TensorT<T> dstyle;  // accumulated over style-conv layers; empty if unused
};

// Ordered layer list with explicit forward/backward. An optional style vector
// is threaded to every style-conv2d layer.
template <typename T>
struct StackT {
  std::vector<LayerT<T>> layers;

  StackT() = default;
  explicit StackT(std::vector<LayerT<T>> ls) : layers(std::move(ls)) {}

  void push(LayerT<T> l) { layers.push_back(std::move(l)); }

  bool uses_style() const {
    for (const auto& l : layers)
      if (l.uses_style()) return true;
    return false;
  }

  uint64_t structure_signature() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& l : layers) {
      int k = static_cast<int>(l.kind);
      h = fnv1a64_bytes(&k, sizeof k, h);
      h = fnv1a64_bytes(&l.stride, sizeof l.stride, h);
      for (auto* p : const_cast<LayerT<T>&>(l).params())
        h = fnv1a64_bytes(p->shape.data(), p->shape.size() * sizeof(int), h);
    }
    return h;
  }

  std::vector<int> output_shape(std::vector<int> in) const {
    for (size_t i = 0; i < layers.size(); ++i)
      in = layers[i].output_shape(in, static_cast<int>(i));
    return in;
  }

  TensorT<T> forward(const TensorT<T>& x, CacheT<T>* cache = nullptr,
                     const TensorT<T>* style = nullptr) const {
    if (cache) {
      cache->inputs.clear();
      cache->inputs.reserve(layers.size());
      cache->has_style = style != nullptr;
      if (style) cache->style = *style;
      cache->signature = structure_signature();
    }
    TensorT<T> cur = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      layers[i].output_shape(cur.shape, static_cast<int>(i));  // validates
      if (cache) cache->inputs.push_back(cur);
      cur = layer_forward(layers[i], cur, style, static_cast<int>(i));
    }
    if (cache) cache->output = cur;
    return cur;
  }

  // Vector-Jacobian products for input, parameters and (when present) style.
  // `dstyle_out`, when given, receives this call's style gradient instead of
  // the accumulating grads->dstyle.
  TensorT<T> backward(const CacheT<T>& cache, const TensorT<T>& upstream,
                      StackGradsT<T>* grads = nullptr, TensorT<T>* dstyle_out = nullptr) const {
    if (cache.inputs.size() != layers.size() || cache.signature != structure_signature())
      throw Error("backward called with a stale or mismatched cache");
    if (!upstream.same_shape(cache.output))
      throw ShapeError("upstream gradient shape " + upstream.shape_str() +
                       " does not match stack output " + cache.output.shape_str());
    if (grads) {
      grads->layers.resize(layers.size());
      if (uses_style() && !dstyle_out && grads->dstyle.size() == 0 && cache.has_style)
        grads->dstyle = TensorT<T>(cache.style.shape);
    }
    if (dstyle_out && dstyle_out->size() == 0 && cache.has_style)
      *dstyle_out = TensorT<T>(cache.style.shape);
    TensorT<T> cur = upstream;
    const TensorT<T>* style = cache.has_style ? &cache.style : nullptr;
    for (size_t i = layers.size(); i-- > 0;) {
      TensorT<T>* dstyle = nullptr;
      if (layers[i].uses_style()) {
        if (dstyle_out) dstyle = dstyle_out;
        else if (grads) dstyle = &grads->dstyle;
      }
      cur = layer_backward(layers[i], cache.inputs[i], style, cur,
                           grads ? &grads->layers[i] : nullptr, dstyle);
    }
    return cur;
  }

  std::vector<TensorT<T>*> param_list() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers)
      for (auto* p : l.params()) out.push_back(p);
    return out;
  }
  std::vector<const TensorT<T>*> param_list() const {
    std::vector<const TensorT<T>*> out;
    for (auto& l : layers)
      for (auto* p : const_cast<LayerT<T>&>(l).params()) out.push_back(p);
    return out;
  }

  std::vector<std::pair<std::string, TensorT<T>*>> named_params(const std::string& prefix) {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    for (size_t i = 0; i < layers.size(); ++i) {
      auto ps = layers[i].params();
      auto ns = layers[i].param_names();
      for (size_t k = 0; k < ps.size(); ++k)
        out.emplace_back(prefix + std::to_string(i) + "." + ns[k], ps[k]);
    }
    return out;
  }

  void init_params(Rng& rng) {
    for (auto& l : layers) l.init_params(rng);
  }

  uint64_t param_checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (auto* p : param_list()) h ^= tensor_checksum(*p) * 0x9e3779b97f4a7c15ULL;
    return h;
  }

  // Collect flattened gradients in param order from a StackGradsT.
  std::vector<TensorT<T>*> grad_list(StackGradsT<T>& g) {
    std::vector<TensorT<T>*> out;
    for (size_t i = 0; i < layers.size(); ++i)
      for (auto* t : g.layers[i].match(layers[i].kind)) out.push_back(t);
    return out;
  }
};

using Stack = StackT<float>;
using Stackd = StackT<double>;

// Central-difference check of every analytic gradient a stack produces
// (input, all parameters, style). 64-bit only; finite-difference steps are
// meaningless in single precision. Returns the max relative error
// |analytic - numeric| / max(1, |numeric|).
inline double grad_check(StackT<double>& stack, const TensorT<double>& input, double epsilon,
                         const TensorT<double>* style = nullptr, uint64_t proj_seed = 12345) {
  CacheT<double> cache;
  TensorT<double> out = stack.forward(input, &cache, style);

  Rng proj_rng(proj_seed);
  TensorT<double> proj(out.shape);
  for (auto& v : proj.data) v = proj_rng.normal();

  auto objective = [&](const TensorT<double>& x, const TensorT<double>* st) {
    TensorT<double> y = stack.forward(x, nullptr, st);
    double s = 0;
    for (int64_t i = 0; i < y.size(); ++i) {
      if (!std::isfinite(y[i]))
        throw Error("non-finite intermediate at output coordinate " + std::to_string(i));
      s += y[i] * proj[i];
    }
    return s;
  };

  StackGradsT<double> grads;
  TensorT<double> din = stack.backward(cache, proj, &grads);

  double max_err = 0;
  auto check_coord = [&](double analytic, double* coord, const TensorT<double>& x,
                         const TensorT<double>* st, const char* what, int64_t idx) {
    const double keep = *coord;
    *coord = keep + epsilon;
    double fp = objective(x, st);
    *coord = keep - epsilon;
    double fm = objective(x, st);
    *coord = keep;
    const double numeric = (fp - fm) / (2 * epsilon);
    if (!std::isfinite(numeric))
      throw Error(std::string("non-finite finite-difference at ") + what + " coordinate " +
                  std::to_string(idx));
    const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
    if (err > max_err) max_err = err;
  };

  TensorT<double> x = input;
  for (int64_t i = 0; i < x.size(); ++i)
    check_coord(din[i], &x.data[static_cast<size_t>(i)], x, style, "input", i);

  auto params = stack.param_list();
  auto glist = stack.grad_list(grads);
  for (size_t p = 0; p < params.size(); ++p) {
    TensorT<double>* pt = params[p];
    TensorT<double>* gt = glist[p];
    for (int64_t i = 0; i < pt->size(); ++i)
      check_coord(gt->size() ? (*gt)[i] : 0.0, &pt->data[static_cast<size_t>(i)], input, style,
                  "param", i);
  }

  if (style && grads.dstyle.size()) {
    TensorT<double> st = *style;
    for (int64_t i = 0; i < st.size(); ++i)
      check_coord(grads.dstyle[i], &st.data[static_cast<size_t>(i)], input, &st, "style", i);
  }
  return max_err;
}

}  // namespace splitlab::nn
