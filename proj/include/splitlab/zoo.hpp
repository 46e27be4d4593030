#pragma once

#include <string>
#include <vector>

#include "splitlab/stack.hpp"

namespace splitlab::zoo {

// ---------------------------------------------------------------------------
// Splittable target classifier: six blocks, split points 1/2/3 sit after
// blocks 2/3/4. The client part is everything before the boundary.
// ---------------------------------------------------------------------------

struct SplitModelConfig {
  int side = 16;
  int classes = 4;
  std::vector<int> widths = {8, 3, 2, 2, 8};  // channels of blocks 1..5
  int split_point = 1;                        // 1..3

  void validate() const {
    if (side % 4 != 0) throw Error("split model: side must be divisible by 4");
    if (widths.size() != 5) throw Error("split model: expects 5 block widths");
    if (split_point < 1 || split_point > 3) throw Error("split model: split point must be 1..3");
  }
};

template <typename T>
class SplitModelT {
 public:
  SplitModelConfig config;
  std::vector<nn::StackT<T>> blocks;  // 6

  SplitModelT() = default;
  explicit SplitModelT(SplitModelConfig cfg, Rng* rng = nullptr) : config(cfg) {
    cfg.validate();
    const auto& w = cfg.widths;
    blocks.resize(6);
    // norm layers sit at block entries so no split boundary exposes a
    // normalized representation
    blocks[0].push(nn::LayerT<T>::conv2d(3, w[0], 1));
    blocks[0].push(nn::LayerT<T>::leaky_relu());
    blocks[1].push(nn::LayerT<T>::instance_norm(w[0]));
    blocks[1].push(nn::LayerT<T>::conv2d(w[0], w[0], 2));
    blocks[1].push(nn::LayerT<T>::leaky_relu());
    blocks[1].push(nn::LayerT<T>::conv2d(w[0], w[1], 1));
    blocks[1].push(nn::LayerT<T>::leaky_relu());
    blocks[2].push(nn::LayerT<T>::conv2d(w[1], w[2], 1));
    blocks[2].push(nn::LayerT<T>::leaky_relu());
    blocks[3].push(nn::LayerT<T>::instance_norm(w[2]));
    blocks[3].push(nn::LayerT<T>::conv2d(w[2], w[3], 2));
    blocks[3].push(nn::LayerT<T>::leaky_relu());
    blocks[3].push(nn::LayerT<T>::conv2d(w[3], w[3], 1));
    blocks[3].push(nn::LayerT<T>::leaky_relu());
    blocks[4].push(nn::LayerT<T>::conv2d(w[3], w[4], 1));
    blocks[4].push(nn::LayerT<T>::leaky_relu());
    const int head_in = w[4] * (cfg.side / 4) * (cfg.side / 4);
    blocks[5].push(nn::LayerT<T>::dense(head_in, cfg.classes));
    if (rng)
      for (auto& b : blocks) b.init_params(*rng);
  }

  // Number of blocks on the client side for a given split point.
  static int boundary(int split_point) { return split_point + 1; }
  int boundary() const { return boundary(config.split_point); }

  TensorT<T> client_forward(const TensorT<T>& x, int split_point = 0) const {
    const int nb = boundary(split_point ? split_point : config.split_point);
    TensorT<T> cur = x;
    for (int b = 0; b < nb; ++b) cur = blocks[static_cast<size_t>(b)].forward(cur);
    return cur;
  }

  TensorT<T> server_forward(const TensorT<T>& h, int split_point = 0) const {
    const int nb = boundary(split_point ? split_point : config.split_point);
    TensorT<T> cur = h;
    for (size_t b = static_cast<size_t>(nb); b < blocks.size(); ++b) cur = blocks[b].forward(cur);
    return cur;
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    TensorT<T> cur = x;
    for (const auto& b : blocks) cur = b.forward(cur);
    return cur;
  }

  std::vector<int> h_shape(int split_point = 0) const {
    const int nb = boundary(split_point ? split_point : config.split_point);
    std::vector<int> s{3, config.side, config.side};
    for (int b = 0; b < nb; ++b) s = blocks[static_cast<size_t>(b)].output_shape(s);
    return s;
  }

  // Client part flattened into one stack (copies the layers); attacks only
  // ever need read access, so the originals stay untouched.
  nn::StackT<T> client_stack(int split_point = 0) const {
    const int nb = boundary(split_point ? split_point : config.split_point);
    nn::StackT<T> s;
    for (int b = 0; b < nb; ++b)
      for (const auto& l : blocks[static_cast<size_t>(b)].layers) s.push(l);
    return s;
  }

  std::vector<TensorT<T>*> param_list() {
    std::vector<TensorT<T>*> out;
    for (auto& b : blocks)
      for (auto* p : b.param_list()) out.push_back(p);
    return out;
  }

  std::vector<std::pair<std::string, TensorT<T>*>> named_params() {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    for (size_t b = 0; b < blocks.size(); ++b)
      for (auto& [n, p] : blocks[b].named_params("b" + std::to_string(b) + "."))
        out.emplace_back(n, p);
    return out;
  }

  uint64_t param_checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& b : blocks) h ^= b.param_checksum() * 0x9e3779b97f4a7c15ULL;
    return h;
  }
};

using SplitModel = SplitModelT<float>;

// ---------------------------------------------------------------------------
// Block-decomposed generator: mapping MLP z->w plus H+1 synthesis blocks of
// two style-modulated convolutions each, grown from a learned constant input.
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  int z_dim = 32;
  int w_dim = 32;
  int stages = 3;                             // H; H+1 synthesis blocks
  std::vector<int> widths = {16, 12, 10, 8};  // channels of blocks 1..H+1
  int base_size = 4;
  int image_size = 16;
  int image_channels = 3;

  void validate() const {
    if (static_cast<int>(widths.size()) != stages + 1)
      throw Error("generator: widths must list one channel count per block");
    if (image_size < base_size || image_size % base_size != 0)
      throw Error("generator: image size must be a multiple of the base size");
  }
};

template <typename T>
class GeneratorT {
 public:
  GeneratorConfig config;
  nn::StackT<T> mapping;
  std::vector<nn::StackT<T>> blocks;  // index b = spec block b+1
  TensorT<T> const_input;

  struct SynthTape {
    int entry_stage = -1;
    std::vector<nn::CacheT<T>> block_caches;
  };

  struct Grads {
    nn::StackGradsT<T> mapping;
    std::vector<nn::StackGradsT<T>> blocks;
    TensorT<T> dconst;
  };

  GeneratorT() = default;
  explicit GeneratorT(GeneratorConfig cfg, Rng* rng = nullptr) : config(cfg) {
    cfg.validate();
    mapping.push(nn::LayerT<T>::dense(cfg.z_dim, cfg.w_dim));
    mapping.push(nn::LayerT<T>::leaky_relu());
    mapping.push(nn::LayerT<T>::dense(cfg.w_dim, cfg.w_dim));

    const int H = cfg.stages;
    blocks.resize(static_cast<size_t>(H) + 1);
    int size = cfg.base_size;
    for (int b = 0; b <= H; ++b) {
      const int cin = b == 0 ? cfg.widths[0] : cfg.widths[static_cast<size_t>(b - 1)];
      const int cout = cfg.widths[static_cast<size_t>(b)];
      if (b > 0 && size < cfg.image_size) {
        blocks[static_cast<size_t>(b)].push(nn::LayerT<T>::upsample2x());
        size *= 2;
      }
      // normalization after the first styled conv keeps activations scaled
      // without erasing the incoming feature's structure at the block entry
      blocks[static_cast<size_t>(b)].push(nn::LayerT<T>::style_conv2d(cin, cout, cfg.w_dim));
      blocks[static_cast<size_t>(b)].push(nn::LayerT<T>::leaky_relu());
      blocks[static_cast<size_t>(b)].push(nn::LayerT<T>::instance_norm(cout));
      if (b < H) {
        blocks[static_cast<size_t>(b)].push(nn::LayerT<T>::style_conv2d(cout, cout, cfg.w_dim));
        blocks[static_cast<size_t>(b)].push(nn::LayerT<T>::leaky_relu());
      } else {
        blocks[static_cast<size_t>(b)].push(
            nn::LayerT<T>::style_conv2d(cout, cfg.image_channels, cfg.w_dim));
        blocks[static_cast<size_t>(b)].push(nn::LayerT<T>::tanh());
      }
    }
    const_input = TensorT<T>({cfg.widths[0], cfg.base_size, cfg.base_size});
    if (rng) {
      mapping.init_params(*rng);
      for (auto& b : blocks) b.init_params(*rng);
      const_input = TensorT<T>::random_normal(const_input.shape, *rng, T(0.5));
      // keep the image conv's tanh input in its linear region at init
      for (auto& v : blocks.back().layers[blocks.back().layers.size() - 2].W.data) v *= T(0.2);
    }
  }

  int latent_dim() const { return config.z_dim; }
  int style_dim() const { return config.w_dim; }
  int stages() const { return config.stages; }

  std::vector<int> hf_shape(int stage) const {  // stage in 1..H
    std::vector<int> s = const_input.shape;
    for (int b = 0; b < stage; ++b) s = blocks[static_cast<size_t>(b)].output_shape(s);
    return s;
  }

  TensorT<T> map_latent(const TensorT<T>& z, nn::CacheT<T>* tape = nullptr) const {
    if (z.size() != config.z_dim)
      throw ShapeError("generator: latent must have dim " + std::to_string(config.z_dim) +
                       ", got " + z.shape_str());
    return mapping.forward(z, tape);
  }

  TensorT<T> map_backward(const nn::CacheT<T>& tape, const TensorT<T>& d_w) const {
    return mapping.backward(tape, d_w);
  }

  // Runs a single block: stage 0 consumes the learned constant, stage H emits
  // the [0,1] image (tanh rescale). Shared by every synthesis path so that
  // decompositions are bit-identical.
  TensorT<T> advance(int stage, const TensorT<T>& hf, const TensorT<T>& w,
                     nn::CacheT<T>* cache = nullptr) const {
    if (stage < 0 || stage > config.stages)
      throw Error("generator: stage " + std::to_string(stage) + " out of range 0.." +
                  std::to_string(config.stages));
    const TensorT<T>& in = stage == 0 ? const_input : hf;
    if (stage > 0 && in.shape != hf_shape(stage))
      throw ShapeError("generator: hf shape " + hf.shape_str() + " does not match block " +
                       std::to_string(stage) + " output");
    TensorT<T> out = blocks[static_cast<size_t>(stage)].forward(in, cache, &w);
    if (stage == config.stages)
      for (auto& v : out.data) v = (v + T(1)) / T(2);
    return out;
  }

  TensorT<T> synth_from(int stage, const TensorT<T>* hf, const TensorT<T>& w,
                        SynthTape* tape = nullptr) const {
    if (stage < 0 || stage > config.stages)
      throw Error("generator: stage " + std::to_string(stage) + " out of range 0.." +
                  std::to_string(config.stages));
    if (stage >= 1 && !hf) throw Error("generator: stage >= 1 requires a hierarchical feature");
    if (tape) {
      tape->entry_stage = stage;
      tape->block_caches.assign(static_cast<size_t>(config.stages - stage) + 1, {});
    }
    TensorT<T> cur = stage == 0 ? TensorT<T>() : *hf;
    for (int b = stage; b <= config.stages; ++b)
      cur = advance(b, cur, w, tape ? &tape->block_caches[static_cast<size_t>(b - stage)] : nullptr);
    return cur;
  }

  // VJP of synth_from. d_hf receives the gradient at the entry feature (only
  // meaningful for entry stage >= 1); d_w accumulates over all style convs.
  // `grads` additionally collects parameter and constant-input gradients.
  void synth_backward(const SynthTape& tape, const TensorT<T>& d_image, TensorT<T>* d_hf,
                      TensorT<T>* d_w, Grads* grads = nullptr) const {
    if (tape.entry_stage < 0) throw Error("generator: backward without a synthesis tape");
    TensorT<T> d = d_image;
    for (auto& v : d.data) v /= T(2);  // [0,1] rescale
    if (grads && grads->blocks.empty()) grads->blocks.resize(blocks.size());
    for (int b = config.stages; b >= tape.entry_stage; --b) {
      nn::StackGradsT<T> local;
      nn::StackGradsT<T>* target =
          grads ? &grads->blocks[static_cast<size_t>(b)] : &local;
      TensorT<T> dstyle;  // fresh per call: grads->dstyle accumulates across calls
      d = blocks[static_cast<size_t>(b)].backward(
          tape.block_caches[static_cast<size_t>(b - tape.entry_stage)], d, target, &dstyle);
      if (d_w && dstyle.size())
        for (int64_t i = 0; i < d_w->size(); ++i) (*d_w)[i] += dstyle[i];
    }
    if (tape.entry_stage == 0) {
      if (grads) {
        if (grads->dconst.size() == 0) grads->dconst = TensorT<T>(const_input.shape);
        for (int64_t i = 0; i < d.size(); ++i) grads->dconst[i] += d[i];
      }
    } else if (d_hf) {
      *d_hf = d;
    }
  }

  // z -> image with a full tape; used by GAN training.
  struct TrainTape {
    nn::CacheT<T> map;
    SynthTape synth;
    TensorT<T> w;
  };

  TensorT<T> sample_forward(const TensorT<T>& z, TrainTape* tape) const {
    TensorT<T> w = map_latent(z, tape ? &tape->map : nullptr);
    if (tape) tape->w = w;
    return synth_from(0, nullptr, w, tape ? &tape->synth : nullptr);
  }

  void sample_backward(const TrainTape& tape, const TensorT<T>& d_image, Grads& grads) const {
    TensorT<T> d_w({config.w_dim});
    synth_backward(tape.synth, d_image, nullptr, &d_w, &grads);
    mapping.backward(tape.map, d_w, &grads.mapping);
  }

  std::vector<TensorT<T>*> param_list() {
    std::vector<TensorT<T>*> out{&const_input};
    for (auto* p : mapping.param_list()) out.push_back(p);
    for (auto& b : blocks)
      for (auto* p : b.param_list()) out.push_back(p);
    return out;
  }

  std::vector<TensorT<T>*> grad_list(Grads& g) {
    if (g.blocks.empty()) g.blocks.resize(blocks.size());
    if (g.dconst.size() == 0) g.dconst = TensorT<T>(const_input.shape);
    // ensure per-layer grad tensors exist even if a block never saw gradient
    auto ensure = [](nn::StackT<T>& s, nn::StackGradsT<T>& sg) {
      sg.layers.resize(s.layers.size());
      for (size_t i = 0; i < s.layers.size(); ++i) {
        auto ps = s.layers[i].params();
        auto gs = sg.layers[i].match(s.layers[i].kind);
        for (size_t k = 0; k < ps.size(); ++k)
          if (gs[k]->size() == 0) *gs[k] = TensorT<T>(ps[k]->shape);
      }
    };
    ensure(mapping, g.mapping);
    for (size_t b = 0; b < blocks.size(); ++b) ensure(blocks[b], g.blocks[b]);

    std::vector<TensorT<T>*> out{&g.dconst};
    for (auto* t : mapping.grad_list(g.mapping)) out.push_back(t);
    for (size_t b = 0; b < blocks.size(); ++b)
      for (auto* t : blocks[b].grad_list(g.blocks[b])) out.push_back(t);
    return out;
  }

  std::vector<std::pair<std::string, TensorT<T>*>> named_params() {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    out.emplace_back("const_input", &const_input);
    for (auto& [n, p] : mapping.named_params("map.")) out.emplace_back(n, p);
    for (size_t b = 0; b < blocks.size(); ++b)
      for (auto& [n, p] : blocks[b].named_params("blk" + std::to_string(b) + "."))
        out.emplace_back(n, p);
    return out;
  }

  uint64_t param_checksum() const {
    uint64_t h = tensor_checksum(const_input);
    h ^= mapping.param_checksum() * 0x9e3779b97f4a7c15ULL;
    for (const auto& b : blocks) h ^= b.param_checksum() * 0x9e3779b97f4a7c15ULL;
    return h;
  }
};

using Generator = GeneratorT<float>;

// ---------------------------------------------------------------------------
// Autoencoder prior (for the LM attack) and the inverse network (IN attack).
// ---------------------------------------------------------------------------

template <typename T>
class AutoencoderT {
 public:
  nn::StackT<T> encoder;
  nn::StackT<T> decoder;
  int side = 16;

  struct Tape {
    nn::CacheT<T> enc, dec;
  };

  AutoencoderT() = default;
  AutoencoderT(int side_, int code_dim, Rng* rng = nullptr) : side(side_) {
    encoder.push(nn::LayerT<T>::conv2d(3, 8, 2));
    encoder.push(nn::LayerT<T>::leaky_relu());
    encoder.push(nn::LayerT<T>::conv2d(8, 8, 2));
    encoder.push(nn::LayerT<T>::leaky_relu());
    encoder.push(nn::LayerT<T>::dense(8 * (side / 4) * (side / 4), code_dim));
    decoder.push(nn::LayerT<T>::dense(code_dim, 8 * (side / 4) * (side / 4),
                                      {8, side / 4, side / 4}));
    decoder.push(nn::LayerT<T>::leaky_relu());
    decoder.push(nn::LayerT<T>::upsample2x());
    decoder.push(nn::LayerT<T>::conv2d(8, 8, 1));
    decoder.push(nn::LayerT<T>::leaky_relu());
    decoder.push(nn::LayerT<T>::upsample2x());
    decoder.push(nn::LayerT<T>::conv2d(8, 8, 1));
    decoder.push(nn::LayerT<T>::leaky_relu());
    decoder.push(nn::LayerT<T>::conv2d(8, 3, 1));
    decoder.push(nn::LayerT<T>::tanh());
    if (rng) {
      encoder.init_params(*rng);
      decoder.init_params(*rng);
    }
  }

  TensorT<T> reconstruct(const TensorT<T>& x, Tape* tape = nullptr) const {
    TensorT<T> code = encoder.forward(x, tape ? &tape->enc : nullptr);
    TensorT<T> y = decoder.forward(code, tape ? &tape->dec : nullptr);
    for (auto& v : y.data) v = (v + T(1)) / T(2);
    return y;
  }

  // VJP through decode(encode(x)); parameter grads optional for training.
  TensorT<T> reconstruct_backward(const Tape& tape, const TensorT<T>& d_out,
                                  nn::StackGradsT<T>* genc = nullptr,
                                  nn::StackGradsT<T>* gdec = nullptr) const {
    TensorT<T> d = d_out;
    for (auto& v : d.data) v /= T(2);
    TensorT<T> dcode = decoder.backward(tape.dec, d, gdec);
    return encoder.backward(tape.enc, dcode, genc);
  }

  std::vector<std::pair<std::string, TensorT<T>*>> named_params() {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    for (auto& [n, p] : encoder.named_params("enc.")) out.emplace_back(n, p);
    for (auto& [n, p] : decoder.named_params("dec.")) out.emplace_back(n, p);
    return out;
  }
};

using Autoencoder = AutoencoderT<float>;

template <typename T>
class InverseNetT {
 public:
  nn::StackT<T> net;
  std::vector<int> input_shape;

  struct Tape {
    nn::CacheT<T> cache;
  };

  InverseNetT() = default;
  // Decoder from the representation shape at one split point up to the image.
  InverseNetT(std::vector<int> h_shape, int image_side, Rng* rng = nullptr)
      : input_shape(std::move(h_shape)) {
    int size = input_shape[1];
    int ch = input_shape[0];
    while (size < image_side) {
      net.push(nn::LayerT<T>::upsample2x());
      net.push(nn::LayerT<T>::conv2d(ch, 8, 1));
      net.push(nn::LayerT<T>::leaky_relu());
      ch = 8;
      size *= 2;
    }
    net.push(nn::LayerT<T>::conv2d(ch, 8, 1));
    net.push(nn::LayerT<T>::leaky_relu());
    net.push(nn::LayerT<T>::conv2d(8, 3, 1));
    net.push(nn::LayerT<T>::tanh());
    if (rng) net.init_params(*rng);
  }

  TensorT<T> invert(const TensorT<T>& h, Tape* tape = nullptr) const {
    if (h.shape != input_shape)
      throw ShapeError("inverse net expects " + TensorT<T>(std::vector<int>(input_shape)).shape_str() +
                       ", got " + h.shape_str());
    TensorT<T> y = net.forward(h, tape ? &tape->cache : nullptr);
    for (auto& v : y.data) v = (v + T(1)) / T(2);
    return y;
  }

  TensorT<T> invert_backward(const Tape& tape, const TensorT<T>& d_out,
                             nn::StackGradsT<T>* grads = nullptr) const {
    TensorT<T> d = d_out;
    for (auto& v : d.data) v /= T(2);
    return net.backward(tape.cache, d, grads);
  }

  std::vector<std::pair<std::string, TensorT<T>*>> named_params() {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    for (auto& [n, p] : net.named_params("net.")) out.emplace_back(n, p);
    return out;
  }
};

using InverseNet = InverseNetT<float>;

// GAN discriminator; training-time only, never checkpointed with the generator.
template <typename T>
nn::StackT<T> make_discriminator(int side, Rng& rng) {
  nn::StackT<T> d;
  d.push(nn::LayerT<T>::conv2d(3, 6, 2));
  d.push(nn::LayerT<T>::leaky_relu());
  d.push(nn::LayerT<T>::conv2d(6, 6, 2));
  d.push(nn::LayerT<T>::leaky_relu());
  d.push(nn::LayerT<T>::dense(6 * (side / 4) * (side / 4), 1));
  d.init_params(rng);
  return d;
}

}  // namespace splitlab::zoo
