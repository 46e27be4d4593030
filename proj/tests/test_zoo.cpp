#include <cmath>

#include "doctest.h"
#include "fd_helpers.hpp"
#include "splitlab/corpus.hpp"
#include "splitlab/train.hpp"
#include "splitlab/zoo.hpp"

using namespace splitlab;
using namespace splitlab::zoo;

namespace {

GeneratorConfig small_gen() {
  GeneratorConfig g;
  g.z_dim = 8;
  g.w_dim = 8;
  g.stages = 3;
  g.widths = {8, 6, 5, 4};
  g.base_size = 4;
  g.image_size = 16;
  return g;
}

}  // namespace

TEST_CASE("split identity holds bit-exactly at every split point") {
  Rng rng(7);
  SplitModelConfig cfg;
  SplitModel m(cfg, &rng);
  Tensor x = Tensor::random_uniform({3, 16, 16}, rng);
  Tensor full = m.forward(x);
  CHECK(full.size() == cfg.classes);
  for (int sp = 1; sp <= 3; ++sp) {
    Tensor h = m.client_forward(x, sp);
    Tensor logits = m.server_forward(h, sp);
    CHECK(logits.data == full.data);
  }
  // determinism
  CHECK(m.forward(x).data == full.data);
}

TEST_CASE("representation size shrinks with split depth") {
  SplitModelConfig cfg;
  SplitModel m(cfg);
  const auto n = [&](int sp) { return Tensor::count(m.h_shape(sp)); };
  CHECK(n(1) > n(2));
  CHECK(n(2) > n(3));
}

TEST_CASE("zero-weight model maps any input to the zero-bias output") {
  SplitModelConfig cfg;
  SplitModel m(cfg);  // no rng: params stay zero
  Rng rng(9);
  Tensor x = Tensor::random_uniform({3, 16, 16}, rng);
  Tensor h = m.client_forward(x, 1);
  for (float v : h.data) CHECK(v == 0.f);
}

TEST_CASE("generator decomposition identity is bit-exact") {
  Rng rng(13);
  Generator g(small_gen(), &rng);
  Tensor z = Tensor::random_normal({g.latent_dim()}, rng);
  Tensor w = g.map_latent(z);
  Tensor full = g.synth_from(0, nullptr, w);
  CHECK(full.shape == std::vector<int>{3, 16, 16});
  for (float v : full.data) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }
  // feeding the true prefix output reproduces the image exactly
  Tensor hf = g.advance(0, Tensor(), w);
  for (int stage = 1; stage <= g.stages(); ++stage) {
    Tensor resumed = g.synth_from(stage, &hf, w);
    CHECK(resumed.data == full.data);
    hf = g.advance(stage, hf, w);
  }
  CHECK(hf.data == full.data);  // the advance chain ends at the image
}

TEST_CASE("generator validates stage and hf shape") {
  Rng rng(17);
  Generator g(small_gen(), &rng);
  Tensor w = Tensor::random_normal({g.style_dim()}, rng);
  CHECK_THROWS_AS(g.synth_from(g.stages() + 1, nullptr, w), Error);
  Tensor bad({1, 2, 2});
  CHECK_THROWS_AS(g.synth_from(1, &bad, w), ShapeError);
}

TEST_CASE("zero-weight mapping network returns the bias vector") {
  Generator g(small_gen());  // zero params
  Tensor z({8}, {1.f, -1.f, 2.f, 0.f, 3.f, 1.f, 1.f, 1.f});
  Tensor w = g.map_latent(z);
  for (float v : w.data) CHECK(v == 0.f);
  CHECK(g.map_latent(z).data == w.data);
}

TEST_CASE("mapping gradient passes the finite-difference check") {
  Rng rng(19);
  GeneratorT<double> g(small_gen(), &rng);
  Tensord z = Tensord::random_normal({g.latent_dim()}, rng);
  nn::StackT<double> map = g.mapping;
  CHECK(nn::grad_check(map, z, 1e-5) < 1e-4);
}

TEST_CASE("synthesis gradients w.r.t. hf and w pass finite differences") {
  Rng rng(23);
  GeneratorT<double> g(small_gen(), &rng);
  Tensord w = Tensord::random_normal({g.style_dim()}, rng, 0.5);
  Tensord hf = g.advance(0, Tensord(), w);

  Rng prng(99);
  for (int stage : {1, 2}) {
    GeneratorT<double>::SynthTape tape;
    Tensord out = g.synth_from(stage, &hf, w, &tape);
    Tensord proj = Tensord::random_normal(out.shape, prng);
    Tensord dhf(hf.shape), dw({g.style_dim()});
    g.synth_backward(tape, proj, &dhf, &dw);

    auto value_hf = [&](const Tensord& h) {
      Tensord y = g.synth_from(stage, &h, w);
      double s = 0;
      for (int64_t i = 0; i < y.size(); ++i) s += y[i] * proj[i];
      return s;
    };
    CHECK(testsupport::fd_max_rel_err(hf, value_hf, dhf) < 1e-4);

    auto value_w = [&](const Tensord& ww) {
      Tensord y = g.synth_from(stage, &hf, ww);
      double s = 0;
      for (int64_t i = 0; i < y.size(); ++i) s += y[i] * proj[i];
      return s;
    };
    CHECK(testsupport::fd_max_rel_err(w, value_w, dw) < 1e-4);
    if (stage == 1) hf = g.advance(1, hf, w);
  }
}

TEST_CASE("corpus generation is deterministic, disjoint and in range") {
  CorpusConfig cfg;
  cfg.private_count = 24;
  cfg.public_count = 32;
  cfg.seed = 5;
  auto a = generate_corpus(cfg);
  auto b = generate_corpus(cfg);
  REQUIRE(a.priv.size() == 24);
  REQUIRE(a.pub.size() == 32);
  for (int i = 0; i < a.priv.size(); ++i)
    CHECK(a.priv.images[static_cast<size_t>(i)].data == b.priv.images[static_cast<size_t>(i)].data);

  for (const auto& img : a.priv.images)
    for (float v : img.data) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
  for (int lab : a.priv.labels) {
    CHECK(lab >= 0);
    CHECK(lab < 4);
  }

  // disjoint: no private image equals any public image, in both modes
  auto disjoint = [](const CorpusPair& p) {
    for (const auto& xp : p.priv.images)
      for (const auto& xa : p.pub.images)
        if (xp.data == xa.data) return false;
    return true;
  };
  CHECK(disjoint(a));
  cfg.ood_shift = true;
  CHECK(disjoint(generate_corpus(cfg)));
}

TEST_CASE("corpus file roundtrip") {
  CorpusConfig cfg;
  cfg.private_count = 6;
  cfg.public_count = 6;
  cfg.seed = 11;
  auto pair = generate_corpus(cfg);
  const std::string path = "test_corpus_roundtrip.bin";
  save_corpus(pair.priv, path);
  Corpus loaded = load_corpus(path);
  REQUIRE(loaded.size() == pair.priv.size());
  for (int i = 0; i < loaded.size(); ++i) {
    CHECK(loaded.images[static_cast<size_t>(i)].data == pair.priv.images[static_cast<size_t>(i)].data);
    CHECK(loaded.labels[static_cast<size_t>(i)] == pair.priv.labels[static_cast<size_t>(i)]);
  }
  std::remove(path.c_str());
}

TEST_CASE("training loops are reproducible given the seed") {
  CorpusConfig ccfg;
  ccfg.private_count = 48;
  ccfg.public_count = 48;
  ccfg.seed = 3;
  auto corpus = generate_corpus(ccfg);

  TrainConfig tcfg;
  tcfg.steps = 25;
  tcfg.batch = 8;
  tcfg.seed = 21;

  SplitModelConfig mcfg;
  auto r1 = train_target(corpus.priv, mcfg, tcfg);
  auto r2 = train_target(corpus.priv, mcfg, tcfg);
  CHECK(r1.model.param_checksum() == r2.model.param_checksum());
  CHECK(r1.loss_trace == r2.loss_trace);

  GeneratorConfig gcfg = small_gen();
  TrainConfig gan_cfg = tcfg;
  gan_cfg.steps = 12;
  auto g1 = train_gan(corpus.pub, gcfg, gan_cfg);
  auto g2 = train_gan(corpus.pub, gcfg, gan_cfg);
  CHECK(g1.generator.param_checksum() == g2.generator.param_checksum());
  CHECK(g1.g_loss_trace.size() > 0);
  CHECK(g1.histogram_jsd == g2.histogram_jsd);

  auto a1 = train_autoencoder(corpus.pub, 16, tcfg);
  auto a2 = train_autoencoder(corpus.pub, 16, tcfg);
  CHECK(a1.holdout_mse == a2.holdout_mse);

  auto i1 = train_inverse_net(corpus.pub, r1.model, 1, tcfg);
  CHECK(i1.model.invert(r1.model.client_forward(corpus.priv.images[0], 1)).shape ==
        std::vector<int>{3, 16, 16});
}
