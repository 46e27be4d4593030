#include <cmath>

#include "doctest.h"
#include "fd_helpers.hpp"
#include "splitlab/optim.hpp"
#include "splitlab/regularizers.hpp"
#include "splitlab/stack.hpp"

using namespace splitlab;
using namespace splitlab::nn;

namespace {

Stackd single(LayerT<double> l, Rng& rng) {
  l.init_params(rng);
  Stackd s;
  s.push(std::move(l));
  return s;
}

// Keep relu/leaky-relu inputs away from the kink so central differences are valid.
Tensord away_from_zero(Tensord t, double margin = 0.05) {
  for (auto& v : t.data)
    if (std::abs(v) < margin) v += v < 0 ? -margin : margin;
  return t;
}

}  // namespace

TEST_CASE("stack forward basics") {
  Stack empty;
  Tensor x({4}, {1.f, -2.f, 3.f, 4.f});
  CHECK(empty.forward(x).data == x.data);

  Stack zero_dense;
  zero_dense.push(LayerT<float>::dense(4, 3));
  Tensor y = zero_dense.forward(x);
  CHECK(y.shape == std::vector<int>{3});
  for (float v : y.data) CHECK(v == 0.f);

  Stack relu;
  relu.push(LayerT<float>::relu());
  Tensor r = relu.forward(Tensor({2}, {-1.f, 2.f}));
  CHECK(r.data[0] == 0.f);
  CHECK(r.data[1] == 2.f);
}

TEST_CASE("stack forward is deterministic") {
  Rng rng(99);
  Stack s;
  s.push(LayerT<float>::conv2d(2, 3));
  s.push(LayerT<float>::leaky_relu());
  s.push(LayerT<float>::dense(3 * 4 * 4, 5));
  s.init_params(rng);
  Tensor x = Tensor::random_uniform({2, 4, 4}, rng);
  Tensor a = s.forward(x);
  Tensor b = s.forward(x);
  CHECK(a.data == b.data);
}

TEST_CASE("forward rejects shape mismatch with layer index") {
  Stack s;
  s.push(LayerT<float>::relu());
  s.push(LayerT<float>::dense(4, 2));
  try {
    s.forward(Tensor({3}, {1.f, 2.f, 3.f}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(e.layer_index == 1);
  }
}

TEST_CASE("backward identity and dense hand case") {
  Stackd empty;
  CacheT<double> cache;
  Tensord x({3}, {1.0, 2.0, 3.0});
  empty.forward(x, &cache);
  Tensord g({3}, {0.5, -1.0, 2.0});
  Tensord din = empty.backward(cache, g);
  CHECK(din.data == g.data);

  // y = W x with W = [[1,2],[3,4]], upstream [1,2] -> dx = W^T g = [7, 10]
  Stackd s;
  s.push(LayerT<double>::dense(2, 2));
  s.layers[0].W.data = {1, 2, 3, 4};
  CacheT<double> c2;
  s.forward(Tensord({2}, {1.0, 1.0}), &c2);
  StackGradsT<double> grads;
  Tensord dx = s.backward(c2, Tensord({2}, {1.0, 2.0}), &grads);
  CHECK(dx.data[0] == doctest::Approx(7.0));
  CHECK(dx.data[1] == doctest::Approx(10.0));
  CHECK(grads.layers[0].dW.data == std::vector<double>{1, 1, 2, 2});
  CHECK(grads.layers[0].db.data == std::vector<double>{1, 2});
}

TEST_CASE("backward rejects stale cache") {
  Stackd a, b;
  a.push(LayerT<double>::relu());
  b.push(LayerT<double>::tanh());
  CacheT<double> cache;
  Tensord x({2}, {0.3, -0.4});
  a.forward(x, &cache);
  CHECK_THROWS_AS(b.backward(cache, Tensord({2}, {1.0, 1.0})), Error);

  // upstream with the wrong shape is also rejected
  CHECK_THROWS_AS(a.backward(cache, Tensord({3}, {1.0, 1.0, 1.0})), ShapeError);
}

TEST_CASE("grad_check: every layer kind, 20 random instances each") {
  Rng rng(4242);
  const double tol = 1e-4;
  for (int rep = 0; rep < 20; ++rep) {
    {
      auto s = single(LayerT<double>::dense(6, 4), rng);
      CHECK(grad_check(s, Tensord::random_normal({6}, rng), 1e-5) < tol);
    }
    {
      auto s = single(LayerT<double>::conv2d(2, 3, rep % 2 ? 2 : 1), rng);
      CHECK(grad_check(s, Tensord::random_normal({2, 5, 6}, rng), 1e-5) < tol);
    }
    {
      auto s = single(LayerT<double>::leaky_relu(0.2), rng);
      CHECK(grad_check(s, away_from_zero(Tensord::random_normal({10}, rng)), 1e-5) < tol);
    }
    {
      auto s = single(LayerT<double>::relu(), rng);
      CHECK(grad_check(s, away_from_zero(Tensord::random_normal({10}, rng)), 1e-5) < 1e-6);
    }
    {
      auto s = single(LayerT<double>::tanh(), rng);
      CHECK(grad_check(s, Tensord::random_normal({10}, rng), 1e-5) < 1e-6);
    }
    {
      auto s = single(LayerT<double>::upsample2x(), rng);
      CHECK(grad_check(s, Tensord::random_normal({2, 3, 3}, rng), 1e-5) < tol);
    }
    {
      auto s = single(LayerT<double>::instance_norm(2), rng);
      CHECK(grad_check(s, Tensord::random_normal({2, 4, 4}, rng), 1e-5) < tol);
    }
    {
      auto s = single(LayerT<double>::style_conv2d(2, 3, 4), rng);
      Tensord w = Tensord::random_normal({4}, rng);
      CHECK(grad_check(s, Tensord::random_normal({2, 4, 4}, rng), 1e-5, &w) < tol);
    }
  }
}

TEST_CASE("grad_check: linear stack is exact to rounding") {
  Rng rng(7);
  auto s = single(LayerT<double>::dense(5, 3), rng);
  CHECK(grad_check(s, Tensord::random_normal({5}, rng), 1e-5) < 1e-8);
}

TEST_CASE("grad_check: mixed stack") {
  Rng rng(11);
  Stackd s;
  s.push(LayerT<double>::conv2d(2, 3, 2));
  s.push(LayerT<double>::instance_norm(3));
  s.push(LayerT<double>::leaky_relu(0.2));
  s.push(LayerT<double>::dense(3 * 3 * 3, 4));
  s.push(LayerT<double>::tanh());
  s.init_params(rng);
  Tensord x = away_from_zero(Tensord::random_normal({2, 6, 6}, rng));
  CHECK(grad_check(s, x, 1e-5) < 1e-4);
}

TEST_CASE("optimizer plain mode") {
  OptimizerT<float> opt(OptimMode::Plain, 0.1);
  Tensor p({1}, {1.0f});
  opt.step_single(p, Tensor({1}, {1.0f}));
  CHECK(p[0] == doctest::Approx(0.9f));

  // zero grad leaves params unchanged
  Tensor q({3}, {1.f, -2.f, 0.5f});
  Tensor before = q;
  opt.step_single(q, Tensor({3}));
  CHECK(q.data == before.data);
}

TEST_CASE("optimizer adam moves monotonically against constant gradient sign") {
  OptimizerT<double> opt(OptimMode::Adam, 0.01);
  Tensord p({2}, {0.3, -0.2});
  Tensord g({2}, {1.0, -2.5});
  Tensord prev = p;
  for (int i = 0; i < 200; ++i) {
    opt.step_single(p, g);
    CHECK(p[0] < prev[0]);
    CHECK(p[1] > prev[1]);
    prev = p;
  }
}

TEST_CASE("optimizer rejects non-finite gradients") {
  OptimizerT<float> opt(OptimMode::Plain, 0.1);
  Tensor p({2}, {1.f, 2.f});
  Tensor g({2}, {0.f, std::numeric_limits<float>::quiet_NaN()});
  CHECK_THROWS_AS(opt.step_single(p, g), DivergenceError);
}

TEST_CASE("total variation values") {
  // constant image
  CHECK(total_variation(Tensord::full({3, 4, 4}, 0.7)) == 0.0);

  // [[0,1],[0,1]]: two horizontal unit steps
  Tensord img({1, 2, 2}, {0.0, 1.0, 0.0, 1.0});
  CHECK(total_variation(img) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("total variation properties and gradient") {
  Rng rng(21);
  Tensord x = Tensord::random_uniform({2, 5, 5}, rng);
  CHECK(total_variation(x) >= 0.0);

  // translation invariance
  Tensord shifted = x;
  for (auto& v : shifted.data) v += 3.25;
  CHECK(total_variation(shifted) == doctest::Approx(total_variation(x)).epsilon(1e-12));

  // gradient vs central differences
  Tensord g = total_variation_backward(x);
  double err = testsupport::fd_max_rel_err(
      x, [](const Tensord& t) { return total_variation(t); }, g);
  CHECK(err < 1e-4);

  // zero iff constant per channel: perturb one pixel
  Tensord c = Tensord::full({1, 3, 3}, 0.5);
  c.at(0, 1, 1) += 0.1;
  CHECK(total_variation(c) > 0.0);
}

TEST_CASE("kl gaussian regularizer values") {
  // per-dimension mean 0, std 1 -> exactly 0
  Tensord z({2, 3}, {1, 1, 1, -1, -1, -1});
  CHECK(kl_gaussian_reg(z) == doctest::Approx(0.0).epsilon(1e-12));

  // k = 1, mu = 1, sigma = 1 (batch {0, 2}) -> 0.5
  Tensord z2({2, 1}, {0.0, 2.0});
  CHECK(kl_gaussian_reg(z2) == doctest::Approx(0.5).epsilon(1e-12));

  // collapsing sigma diverges positively through the floor
  Tensord tight({2, 1}, {0.501, 0.499});
  Tensord tighter({2, 1}, {0.5001, 0.4999});
  CHECK(kl_gaussian_reg(tight) > 1.0);
  CHECK(kl_gaussian_reg(tighter) > kl_gaussian_reg(tight));

  // B = 1 rejected in batch-statistics mode
  Tensord one({1, 3}, {0.0, 0.0, 0.0});
  CHECK_THROWS_AS(kl_gaussian_reg(one), Error);
}

TEST_CASE("kl gaussian regularizer minimized at standard normal statistics") {
  // mu != 0 with sigma = 1 is strictly positive
  Tensord z({2, 1}, {0.25, 2.25});
  CHECK(kl_gaussian_reg(z) > 0.0);

  Rng rng(31);
  Tensord batch = Tensord::random_normal({6, 4}, rng);
  Tensord g = kl_gaussian_reg_backward(batch);
  double err = testsupport::fd_max_rel_err(
      batch, [](const Tensord& t) { return kl_gaussian_reg(t); }, g);
  CHECK(err < 1e-4);
}
