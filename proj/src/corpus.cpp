#include "splitlab/corpus.hpp"

#include <cmath>
#include <cstring>

#include "splitlab/checkpoint.hpp"
#include "splitlab/rng.hpp"

namespace splitlab::zoo {

namespace {

struct Factors {
  int cls;
  double cx, cy, scale, rot, hue_fg, hue_bg;
};

struct FactorRanges {
  double hue_lo = 0.0, hue_hi = 1.0;
  double scale_lo = 0.22, scale_hi = 0.38;
};

Factors draw_factors(Rng& rng, int classes, const FactorRanges& r) {
  Factors f;
  f.cls = static_cast<int>(rng.below(static_cast<uint64_t>(classes)));
  f.cx = rng.uniform(0.38, 0.62);
  f.cy = rng.uniform(0.38, 0.62);
  f.scale = rng.uniform(r.scale_lo, r.scale_hi);
  f.rot = rng.uniform(0.0, 6.283185307179586);
  f.hue_fg = r.hue_lo + rng.uniform() * (r.hue_hi - r.hue_lo);
  f.hue_bg = std::fmod(f.hue_fg + 0.5 + rng.uniform(-0.08, 0.08) + 1.0, 1.0);
  return f;
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

// Signed distance of point p (unit coords) to the class shape.
double shape_sdf(int cls, double px, double py, const Factors& f) {
  const double dx = px - f.cx, dy = py - f.cy;
  const double cr = std::cos(-f.rot), sr = std::sin(-f.rot);
  const double qx = cr * dx - sr * dy, qy = sr * dx + cr * dy;
  switch (cls) {
    case 0:  // disk
      return std::sqrt(dx * dx + dy * dy) - f.scale;
    case 1:  // square
      return std::max(std::abs(qx), std::abs(qy)) - f.scale * 0.85;
    case 2: {  // triangle as intersection of three half planes
      double d = -1e9;
      for (int k = 0; k < 3; ++k) {
        const double a = f.rot + 2.0943951023931953 * k + 1.5707963267948966;
        const double nx = std::cos(a), ny = std::sin(a);
        d = std::max(d, nx * dx + ny * dy);
      }
      return d - f.scale * 0.75;
    }
    default: {  // cross: two perpendicular bars
      const double ax = std::abs(qx), ay = std::abs(qy);
      const double bar_w = f.scale * 0.32;
      const double d1 = std::max(ax - f.scale, ay - bar_w);
      const double d2 = std::max(ay - f.scale, ax - bar_w);
      return std::min(d1, d2);
    }
  }
}

Tensor render(const Factors& f, int side) {
  Tensor img({3, side, side});
  double fg[3], bg[3];
  hsv_to_rgb(f.hue_fg, 0.85, 0.95, fg);
  hsv_to_rgb(f.hue_bg, 0.18, 0.22, bg);
  const double edge = 1.2 / side;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      const double py = (i + 0.5) / side, px = (j + 0.5) / side;
      const double d = shape_sdf(f.cls, px, py, f);
      double cov = 0.5 - d / edge;
      cov = cov < 0 ? 0 : (cov > 1 ? 1 : cov);
      for (int c = 0; c < 3; ++c)
        img.at(c, i, j) = static_cast<float>(bg[c] + cov * (fg[c] - bg[c]));
    }
  return img;
}

Corpus draw_set(Rng& rng, int count, int classes, int side, const FactorRanges& ranges) {
  Corpus out;
  out.images.reserve(static_cast<size_t>(count));
  out.labels.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Factors f = draw_factors(rng, classes, ranges);
    out.images.push_back(render(f, side));
    out.labels.push_back(f.cls);
  }
  return out;
}

}  // namespace

CorpusPair generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  CorpusPair pair;
  if (cfg.ood_shift) {
    // disjoint hue and scale factor ranges between the two sets
    FactorRanges pub{0.00, 0.45, 0.22, 0.30};
    FactorRanges prv{0.55, 0.95, 0.30, 0.38};
    Rng rng_pub(derive_seed(cfg.seed, "corpus-public"));
    Rng rng_prv(derive_seed(cfg.seed, "corpus-private"));
    pair.pub = draw_set(rng_pub, cfg.public_count, cfg.classes, cfg.side, pub);
    pair.priv = draw_set(rng_prv, cfg.private_count, cfg.classes, cfg.side, prv);
  } else {
    // one stream, disjoint sample prefixes
    FactorRanges all;
    Rng rng(derive_seed(cfg.seed, "corpus"));
    pair.pub = draw_set(rng, cfg.public_count, cfg.classes, cfg.side, all);
    pair.priv = draw_set(rng, cfg.private_count, cfg.classes, cfg.side, all);
  }
  return pair;
}

namespace {
constexpr char kCorpusMagic[4] = {'S', 'P', 'L', 'D'};
}

void save_corpus(const Corpus& c, const std::string& path) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kCorpusMagic, kCorpusMagic + 4);
  out.push_back(1);  // version
  auto put_u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
  };
  put_u32(static_cast<uint32_t>(c.images.size()));
  const int side = c.images.empty() ? 0 : c.images[0].dim(1);
  put_u32(static_cast<uint32_t>(side));
  for (size_t i = 0; i < c.images.size(); ++i) {
    out.push_back(static_cast<uint8_t>(c.labels[i]));
    const auto& t = c.images[i];
    const size_t start = out.size();
    out.resize(start + t.data.size() * 4);
    std::memcpy(out.data() + start, t.data.data(), t.data.size() * 4);
  }
  const uint32_t crc = io::crc32(out.data(), out.size());
  put_u32(crc);
  io::write_file(path, out.data(), out.size());
}

Corpus load_corpus(const std::string& path) {
  const auto bytes = io::read_file(path);
  if (bytes.size() < 17) throw DecodeError("corpus file too short", 0);
  if (std::memcmp(bytes.data(), kCorpusMagic, 4) != 0)
    throw DecodeError("corpus file: bad magic", 0);
  if (bytes[4] != 1) throw DecodeError("corpus file: unknown version", 4);
  const uint32_t stored = static_cast<uint32_t>(bytes[bytes.size() - 4]) |
                          (static_cast<uint32_t>(bytes[bytes.size() - 3]) << 8) |
                          (static_cast<uint32_t>(bytes[bytes.size() - 2]) << 16) |
                          (static_cast<uint32_t>(bytes[bytes.size() - 1]) << 24);
  if (stored != io::crc32(bytes.data(), bytes.size() - 4))
    throw DecodeError("corpus file: CRC mismatch", static_cast<long>(bytes.size() - 4));
  auto get_u32 = [&](size_t pos) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + static_cast<size_t>(i)]) << (8 * i);
    return v;
  };
  const uint32_t count = get_u32(5);
  const uint32_t side = get_u32(9);
  const size_t img_bytes = static_cast<size_t>(3) * side * side * 4;
  Corpus c;
  size_t pos = 13;
  for (uint32_t i = 0; i < count; ++i) {
    if (pos + 1 + img_bytes > bytes.size() - 4)
      throw DecodeError("corpus file truncated", static_cast<long>(pos));
    c.labels.push_back(bytes[pos++]);
    Tensor t({3, static_cast<int>(side), static_cast<int>(side)});
    std::memcpy(t.data.data(), bytes.data() + pos, img_bytes);
    pos += img_bytes;
    c.images.push_back(std::move(t));
  }
  return c;
}

}  // namespace splitlab::zoo
