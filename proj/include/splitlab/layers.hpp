#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab::nn {

enum class LayerKind {
  Dense,        // y = W x + b, input flattened; optional output view shape
  Conv2d,       // 3x3, stride 1 or 2, zero padding 1
  LeakyRelu,    // slope parameter
  Relu,
  Tanh,
  Upsample2x,   // nearest neighbour
  InstanceNorm, // per-channel, learned gamma/beta
  StyleConv2d,  // conv2d whose per-input-channel scale is affine(style)
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::LeakyRelu: return "leaky-relu";
    case LayerKind::Relu: return "relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::Upsample2x: return "upsample2x";
    case LayerKind::InstanceNorm: return "instance-norm";
    case LayerKind::StyleConv2d: return "style-conv2d";
  }
  return "?";
}

template <typename T>
struct LayerT {
  LayerKind kind;

  TensorT<T> W;  // dense {out,in}; conv {Cout,Cin,3,3}
  TensorT<T> b;  // {out} / {Cout}
  int stride = 1;
  T slope = T(0.2);
  std::vector<int> out_view;  // dense only: reshape of the output vector

  TensorT<T> gamma, beta;  // instance norm, per channel
  T norm_eps = T(1e-5);

  TensorT<T> A, a0;  // style affine: s = A * style + a0; A {Cin, w_dim}, a0 {Cin}

  static LayerT dense(int in, int out, std::vector<int> view = {}) {
    LayerT l;
    l.kind = LayerKind::Dense;
    l.W = TensorT<T>({out, in});
    l.b = TensorT<T>({out});
    l.out_view = std::move(view);
    return l;
  }
  static LayerT conv2d(int cin, int cout, int stride = 1) {
    LayerT l;
    l.kind = LayerKind::Conv2d;
    l.W = TensorT<T>({cout, cin, 3, 3});
    l.b = TensorT<T>({cout});
    l.stride = stride;
    return l;
  }
  static LayerT leaky_relu(T slope = T(0.2)) {
    LayerT l;
    l.kind = LayerKind::LeakyRelu;
    l.slope = slope;
    return l;
  }
  static LayerT relu() {
    LayerT l;
    l.kind = LayerKind::Relu;
    return l;
  }
  static LayerT tanh() {
    LayerT l;
    l.kind = LayerKind::Tanh;
    return l;
  }
  static LayerT upsample2x() {
    LayerT l;
    l.kind = LayerKind::Upsample2x;
    return l;
  }
  static LayerT instance_norm(int channels) {
    LayerT l;
    l.kind = LayerKind::InstanceNorm;
    l.gamma = TensorT<T>::full({channels}, T(1));
    l.beta = TensorT<T>({channels});
    return l;
  }
  static LayerT style_conv2d(int cin, int cout, int style_dim) {
    LayerT l;
    l.kind = LayerKind::StyleConv2d;
    l.W = TensorT<T>({cout, cin, 3, 3});
    l.b = TensorT<T>({cout});
    l.A = TensorT<T>({cin, style_dim});
    l.a0 = TensorT<T>::full({cin}, T(1));
    return l;
  }

  bool has_params() const {
    return kind == LayerKind::Dense || kind == LayerKind::Conv2d ||
           kind == LayerKind::InstanceNorm || kind == LayerKind::StyleConv2d;
  }

  bool uses_style() const { return kind == LayerKind::StyleConv2d; }

  // Pointers in a fixed order; pairs with grad order in LayerGradsT.
  std::vector<TensorT<T>*> params() {
    switch (kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2d: return {&W, &b};
      case LayerKind::InstanceNorm: return {&gamma, &beta};
      case LayerKind::StyleConv2d: return {&W, &b, &A, &a0};
      default: return {};
    }
  }
  std::vector<const TensorT<T>*> params() const {
    return const_cast<LayerT*>(this)->param_view();
  }
  std::vector<const TensorT<T>*> param_view() {
    std::vector<const TensorT<T>*> out;
    for (auto* p : params()) out.push_back(p);
    return out;
  }
  std::vector<std::string> param_names() const {
    switch (kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2d: return {"W", "b"};
      case LayerKind::InstanceNorm: return {"gamma", "beta"};
      case LayerKind::StyleConv2d: return {"W", "b", "A", "a0"};
      default: return {};
    }
  }

  void init_params(Rng& rng) {
    switch (kind) {
      case LayerKind::Dense: {
        T s = static_cast<T>(std::sqrt(2.0 / W.dim(1)));
        for (auto& v : W.data) v = static_cast<T>(rng.normal() * s);
        break;
      }
      case LayerKind::Conv2d: {
        T s = static_cast<T>(std::sqrt(2.0 / (W.dim(1) * 9)));
        for (auto& v : W.data) v = static_cast<T>(rng.normal() * s);
        break;
      }
      case LayerKind::StyleConv2d: {
        T s = static_cast<T>(std::sqrt(2.0 / (W.dim(1) * 9)));
        for (auto& v : W.data) v = static_cast<T>(rng.normal() * s);
        T sa = static_cast<T>(0.1 / std::sqrt(static_cast<double>(A.dim(1))));
        for (auto& v : A.data) v = static_cast<T>(rng.normal() * sa);
        break;
      }
      default: break;
    }
  }

  std::vector<int> output_shape(const std::vector<int>& in, int index) const {
    auto fail = [&](const std::string& msg) {
      throw ShapeError("layer " + std::to_string(index) + " (" + layer_kind_name(kind) +
                           "): " + msg,
                       index);
    };
    switch (kind) {
      case LayerKind::Dense: {
        int64_t n = TensorT<T>::count(in);
        if (n != W.dim(1)) fail("expects " + std::to_string(W.dim(1)) + " inputs, got " + std::to_string(n));
        if (!out_view.empty()) {
          if (TensorT<T>::count(out_view) != W.dim(0)) fail("output view does not match width");
          return out_view;
        }
        return {W.dim(0)};
      }
      case LayerKind::Conv2d:
      case LayerKind::StyleConv2d: {
        if (in.size() != 3) fail("expects CxHxW input, got " + TensorT<T>(std::vector<int>(in)).shape_str());
        if (in[0] != W.dim(1)) fail("expects " + std::to_string(W.dim(1)) + " channels, got " + std::to_string(in[0]));
        if (stride != 1 && stride != 2) fail("stride must be 1 or 2");
        int h = (in[1] - 1) / stride + 1;
        int w = (in[2] - 1) / stride + 1;
        return {W.dim(0), h, w};
      }
      case LayerKind::Upsample2x: {
        if (in.size() != 3) fail("expects CxHxW input");
        return {in[0], in[1] * 2, in[2] * 2};
      }
      case LayerKind::InstanceNorm: {
        if (in.size() != 3) fail("expects CxHxW input");
        if (in[0] != gamma.dim(0)) fail("channel count mismatch");
        return in;
      }
      default:
        return in;  // element-wise
    }
  }
};

template <typename T>
struct LayerGradsT {
  TensorT<T> dW, db, dgamma, dbeta, dA, da0;

  std::vector<TensorT<T>*> match(LayerKind kind) {
    switch (kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2d: return {&dW, &db};
      case LayerKind::InstanceNorm: return {&dgamma, &dbeta};
      case LayerKind::StyleConv2d: return {&dW, &db, &dA, &da0};
      default: return {};
    }
  }
};

namespace detail {

template <typename T>
void conv2d_forward(const TensorT<T>& x, const TensorT<T>& W, const TensorT<T>& b, int stride,
                    TensorT<T>& y) {
  const int cin = W.dim(1), cout = W.dim(0);
  const int h = x.dim(1), w = x.dim(2);
  const int oh = y.dim(1), ow = y.dim(2);
  for (int o = 0; o < cout; ++o) {
    const T* wo = &W.data[static_cast<size_t>(o) * cin * 9];
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T acc = b[o];
        const int base_y = oy * stride - 1, base_x = ox * stride - 1;
        for (int i = 0; i < cin; ++i) {
          const T* wi = wo + static_cast<size_t>(i) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = base_y + ky;
            if (iy < 0 || iy >= h) continue;
            const T* xrow = &x.data[(static_cast<size_t>(i) * h + iy) * w];
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = base_x + kx;
              if (ix < 0 || ix >= w) continue;
              acc += wi[ky * 3 + kx] * xrow[ix];
            }
          }
        }
        y.at(o, oy, ox) = acc;
      }
    }
  }
}

// Scatter-style backward mirroring conv2d_forward's index mapping.
template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& W, int stride, const TensorT<T>& dy,
                     TensorT<T>* dx, TensorT<T>* dW, TensorT<T>* db) {
  const int cin = W.dim(1), cout = W.dim(0);
  const int h = x.dim(1), w = x.dim(2);
  const int oh = dy.dim(1), ow = dy.dim(2);
  for (int o = 0; o < cout; ++o) {
    const T* wo = &W.data[static_cast<size_t>(o) * cin * 9];
    T* dwo = dW ? &dW->data[static_cast<size_t>(o) * cin * 9] : nullptr;
    T db_acc = 0;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T g = dy.at(o, oy, ox);
        db_acc += g;
        const int base_y = oy * stride - 1, base_x = ox * stride - 1;
        for (int i = 0; i < cin; ++i) {
          const T* wi = wo + static_cast<size_t>(i) * 9;
          T* dwi = dwo ? dwo + static_cast<size_t>(i) * 9 : nullptr;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = base_y + ky;
            if (iy < 0 || iy >= h) continue;
            const T* xrow = &x.data[(static_cast<size_t>(i) * h + iy) * w];
            T* dxrow = dx ? &dx->data[(static_cast<size_t>(i) * h + iy) * w] : nullptr;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = base_x + kx;
              if (ix < 0 || ix >= w) continue;
              if (dxrow) dxrow[ix] += wi[ky * 3 + kx] * g;
              if (dwi) dwi[ky * 3 + kx] += xrow[ix] * g;
            }
          }
        }
      }
    }
    if (db) (*db)[o] += db_acc;
  }
}

template <typename T>
TensorT<T> modulated_weights(const LayerT<T>& l, const TensorT<T>& style) {
  const int cin = l.W.dim(1), cout = l.W.dim(0), wd = l.A.dim(1);
  if (style.size() != wd)
    throw ShapeError("style vector length " + std::to_string(style.size()) +
                     " does not match affine input " + std::to_string(wd));
  TensorT<T> scaled = l.W;
  for (int i = 0; i < cin; ++i) {
    T s = l.a0[i];
    for (int k = 0; k < wd; ++k) s += l.A.data[static_cast<size_t>(i) * wd + k] * style[k];
    for (int o = 0; o < cout; ++o) {
      T* wk = &scaled.data[(static_cast<size_t>(o) * cin + i) * 9];
      for (int k = 0; k < 9; ++k) wk[k] *= s;
    }
  }
  return scaled;
}

}  // namespace detail

template <typename T>
TensorT<T> layer_forward(const LayerT<T>& l, const TensorT<T>& x, const TensorT<T>* style,
                         int index) {
  auto out_shape = l.output_shape(x.shape, index);
  switch (l.kind) {
    case LayerKind::Dense: {
      TensorT<T> y(out_shape);
      const int out = l.W.dim(0), in = l.W.dim(1);
      for (int o = 0; o < out; ++o) {
        T acc = l.b[o];
        const T* wrow = &l.W.data[static_cast<size_t>(o) * in];
        for (int i = 0; i < in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
      }
      return y;
    }
    case LayerKind::Conv2d: {
      TensorT<T> y(out_shape);
      detail::conv2d_forward(x, l.W, l.b, l.stride, y);
      return y;
    }
    case LayerKind::StyleConv2d: {
      if (!style)
        throw ShapeError("layer " + std::to_string(index) + ": style-conv2d requires a style vector",
                         index);
      TensorT<T> y(out_shape);
      TensorT<T> weff = detail::modulated_weights(l, *style);
      detail::conv2d_forward(x, weff, l.b, l.stride, y);
      return y;
    }
    case LayerKind::LeakyRelu: {
      TensorT<T> y = x;
      for (auto& v : y.data) v = v > 0 ? v : l.slope * v;
      return y;
    }
    case LayerKind::Relu: {
      TensorT<T> y = x;
      for (auto& v : y.data) v = v > 0 ? v : T(0);
      return y;
    }
    case LayerKind::Tanh: {
      TensorT<T> y = x;
      for (auto& v : y.data) v = std::tanh(v);
      return y;
    }
    case LayerKind::Upsample2x: {
      TensorT<T> y(out_shape);
      const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
      for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) {
            T v = x.at(ci, i, j);
            y.at(ci, 2 * i, 2 * j) = v;
            y.at(ci, 2 * i, 2 * j + 1) = v;
            y.at(ci, 2 * i + 1, 2 * j) = v;
            y.at(ci, 2 * i + 1, 2 * j + 1) = v;
          }
      return y;
    }
    case LayerKind::InstanceNorm: {
      TensorT<T> y(out_shape);
      const int c = x.dim(0), n = x.dim(1) * x.dim(2);
      for (int ci = 0; ci < c; ++ci) {
        const T* xc = &x.data[static_cast<size_t>(ci) * n];
        T* yc = &y.data[static_cast<size_t>(ci) * n];
        T mu = 0;
        for (int i = 0; i < n; ++i) mu += xc[i];
        mu /= n;
        T var = 0;
        for (int i = 0; i < n; ++i) var += (xc[i] - mu) * (xc[i] - mu);
        var /= n;
        T inv = T(1) / std::sqrt(var + l.norm_eps);
        for (int i = 0; i < n; ++i) yc[i] = l.gamma[ci] * (xc[i] - mu) * inv + l.beta[ci];
      }
      return y;
    }
  }
  throw Error("unreachable layer kind");
}

// Returns d/d input; accumulates parameter grads into `g` and style grad into
// `dstyle` when non-null.
template <typename T>
TensorT<T> layer_backward(const LayerT<T>& l, const TensorT<T>& x, const TensorT<T>* style,
                          const TensorT<T>& dy, LayerGradsT<T>* g, TensorT<T>* dstyle) {
  switch (l.kind) {
    case LayerKind::Dense: {
      TensorT<T> dx(x.shape);
      const int out = l.W.dim(0), in = l.W.dim(1);
      for (int o = 0; o < out; ++o) {
        const T go = dy[o];
        const T* wrow = &l.W.data[static_cast<size_t>(o) * in];
        for (int i = 0; i < in; ++i) dx[i] += wrow[i] * go;
      }
      if (g) {
        if (g->dW.size() == 0) {
          g->dW = TensorT<T>(l.W.shape);
          g->db = TensorT<T>(l.b.shape);
        }
        for (int o = 0; o < out; ++o) {
          const T go = dy[o];
          T* dwrow = &g->dW.data[static_cast<size_t>(o) * in];
          for (int i = 0; i < in; ++i) dwrow[i] += x[i] * go;
          g->db[o] += go;
        }
      }
      return dx;
    }
    case LayerKind::Conv2d: {
      TensorT<T> dx(x.shape);
      if (g && g->dW.size() == 0) {
        g->dW = TensorT<T>(l.W.shape);
        g->db = TensorT<T>(l.b.shape);
      }
      detail::conv2d_backward(x, l.W, l.stride, dy, &dx, g ? &g->dW : nullptr,
                              g ? &g->db : nullptr);
      return dx;
    }
    case LayerKind::StyleConv2d: {
      TensorT<T> dx(x.shape);
      TensorT<T> weff = detail::modulated_weights(l, *style);
      TensorT<T> dweff(l.W.shape);
      if (g && g->dW.size() == 0) {
        g->dW = TensorT<T>(l.W.shape);
        g->db = TensorT<T>(l.b.shape);
        g->dA = TensorT<T>(l.A.shape);
        g->da0 = TensorT<T>(l.a0.shape);
      }
      detail::conv2d_backward(x, weff, l.stride, dy, &dx, &dweff, g ? &g->db : nullptr);
      const int cin = l.W.dim(1), cout = l.W.dim(0), wd = l.A.dim(1);
      for (int i = 0; i < cin; ++i) {
        T s = l.a0[i];
        for (int k = 0; k < wd; ++k) s += l.A.data[static_cast<size_t>(i) * wd + k] * (*style)[k];
        T ds = 0;
        for (int o = 0; o < cout; ++o) {
          const size_t base = (static_cast<size_t>(o) * cin + i) * 9;
          for (int k = 0; k < 9; ++k) {
            ds += dweff.data[base + k] * l.W.data[base + k];
            if (g) g->dW.data[base + k] += dweff.data[base + k] * s;
          }
        }
        if (g) {
          g->da0[i] += ds;
          for (int k = 0; k < wd; ++k)
            g->dA.data[static_cast<size_t>(i) * wd + k] += ds * (*style)[k];
        }
        if (dstyle)
          for (int k = 0; k < wd; ++k)
            (*dstyle)[k] += l.A.data[static_cast<size_t>(i) * wd + k] * ds;
      }
      return dx;
    }
    case LayerKind::LeakyRelu: {
      TensorT<T> dx(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0 ? dy[i] : l.slope * dy[i];
      return dx;
    }
    case LayerKind::Relu: {
      TensorT<T> dx(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0 ? dy[i] : T(0);
      return dx;
    }
    case LayerKind::Tanh: {
      TensorT<T> dx(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) {
        T t = std::tanh(x[i]);
        dx[i] = (T(1) - t * t) * dy[i];
      }
      return dx;
    }
    case LayerKind::Upsample2x: {
      TensorT<T> dx(x.shape);
      const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
      for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j)
            dx.at(ci, i, j) = dy.at(ci, 2 * i, 2 * j) + dy.at(ci, 2 * i, 2 * j + 1) +
                              dy.at(ci, 2 * i + 1, 2 * j) + dy.at(ci, 2 * i + 1, 2 * j + 1);
      return dx;
    }
    case LayerKind::InstanceNorm: {
      TensorT<T> dx(x.shape);
      if (g && g->dgamma.size() == 0) {
        g->dgamma = TensorT<T>(l.gamma.shape);
        g->dbeta = TensorT<T>(l.beta.shape);
      }
      const int c = x.dim(0), n = x.dim(1) * x.dim(2);
      for (int ci = 0; ci < c; ++ci) {
        const T* xc = &x.data[static_cast<size_t>(ci) * n];
        const T* gc = &dy.data[static_cast<size_t>(ci) * n];
        T* dxc = &dx.data[static_cast<size_t>(ci) * n];
        T mu = 0;
        for (int i = 0; i < n; ++i) mu += xc[i];
        mu /= n;
        T var = 0;
        for (int i = 0; i < n; ++i) var += (xc[i] - mu) * (xc[i] - mu);
        var /= n;
        const T inv = T(1) / std::sqrt(var + l.norm_eps);
        T sum_g = 0, sum_gx = 0;
        for (int i = 0; i < n; ++i) {
          sum_g += gc[i];
          sum_gx += gc[i] * (xc[i] - mu) * inv;
        }
        if (g) {
          g->dgamma[ci] += sum_gx;
          g->dbeta[ci] += sum_g;
        }
        const T k = l.gamma[ci] * inv;
        for (int i = 0; i < n; ++i) {
          const T xhat = (xc[i] - mu) * inv;
          dxc[i] = k * (gc[i] - sum_g / n - xhat * sum_gx / n);
        }
      }
      return dx;
    }
  }
  throw Error("unreachable layer kind");
}

}  // namespace splitlab::nn
