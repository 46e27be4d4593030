#pragma once

#include <string>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab::zoo {

// Seeded parametric corpus: colored geometric shapes (disk, square, triangle,
// ring) with pose/scale/hue factors, labelled by shape class. The private and
// public sets are disjoint by construction: disjoint samples from one stream,
// or disjoint factor ranges in OOD mode.
struct CorpusConfig {
  int private_count = 256;
  int public_count = 512;
  int side = 16;
  int classes = 4;
  bool ood_shift = false;
  uint64_t seed = 1;

  void validate() const {
    if (private_count < 1 || public_count < 1) throw Error("corpus: counts must be positive");
    if (side < 8) throw Error("corpus: side must be >= 8");
    if (classes < 2 || classes > 4) throw Error("corpus: classes must be 2..4");
  }
};

struct Corpus {
  std::vector<Tensor> images;  // {3, side, side}, values in [0,1]
  std::vector<int> labels;

  int size() const { return static_cast<int>(images.size()); }
};

struct CorpusPair {
  Corpus priv;  // D_P: trains the target model, provides attack targets
  Corpus pub;   // D_A: trains the generative priors
};

CorpusPair generate_corpus(const CorpusConfig& cfg);

// Binary corpus file ("SPLD" container, CRC-terminated).
void save_corpus(const Corpus& c, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace splitlab::zoo
