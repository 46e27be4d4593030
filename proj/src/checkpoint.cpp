#include "splitlab/checkpoint.hpp"

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "splitlab/error.hpp"

namespace splitlab::io {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'L', 'B'};
constexpr uint16_t kVersion = 1;

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;

  void need(size_t n, const char* what) const {
    if (pos + n > b.size())
      throw DecodeError(std::string("checkpoint truncated while reading ") + what,
                        static_cast<long>(pos));
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return b[pos++];
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(b[pos] | (b[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[pos + static_cast<size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
  }
};

}  // namespace

uint32_t crc32(const void* data, size_t len, uint32_t seed) {
  static const auto table = make_crc_table();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  const uint8_t* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xff] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> encode_checkpoint(const CheckpointData& data) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  out.push_back(static_cast<uint8_t>(data.kind));
  for (const auto& [name, t] : data.params) {
    if (name.size() > 0xffff) throw Error("checkpoint: parameter name too long");
    if (t.ndim() > 255) throw Error("checkpoint: too many dimensions");
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<uint8_t>(t.ndim()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    const size_t start = out.size();
    out.resize(start + t.data.size() * 4);
    static_assert(sizeof(float) == 4);
    std::memcpy(out.data() + start, t.data.data(), t.data.size() * 4);
  }
  put_u32(out, crc32(out.data(), out.size()));
  return out;
}

CheckpointData decode_checkpoint(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 11) throw DecodeError("checkpoint too short", 0);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DecodeError("checkpoint: bad magic", 0);
  const uint32_t stored = static_cast<uint32_t>(bytes[bytes.size() - 4]) |
                          (static_cast<uint32_t>(bytes[bytes.size() - 3]) << 8) |
                          (static_cast<uint32_t>(bytes[bytes.size() - 2]) << 16) |
                          (static_cast<uint32_t>(bytes[bytes.size() - 1]) << 24);
  const uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
  if (stored != actual)
    throw DecodeError("checkpoint: CRC mismatch", static_cast<long>(bytes.size() - 4));

  Reader r{bytes};
  r.pos = 4;
  const uint16_t version = r.u16("version");
  if (version != kVersion)
    throw DecodeError("checkpoint: unknown version " + std::to_string(version), 4);
  CheckpointData data;
  data.kind = static_cast<ModelKind>(r.u8("model kind"));

  const size_t end = bytes.size() - 4;
  while (r.pos < end) {
    const uint16_t name_len = r.u16("name length");
    r.need(name_len, "name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
    r.pos += name_len;
    const uint8_t ndim = r.u8("ndim");
    std::vector<int> shape;
    int64_t count = 1;
    for (int i = 0; i < ndim; ++i) {
      const uint32_t d = r.u32("dimension");
      if (d == 0 || d > (1u << 24))
        throw DecodeError("checkpoint: implausible dimension " + std::to_string(d),
                          static_cast<long>(r.pos - 4));
      shape.push_back(static_cast<int>(d));
      count *= d;
    }
    if (count > (1 << 26))
      throw DecodeError("checkpoint: parameter too large", static_cast<long>(r.pos));
    r.need(static_cast<size_t>(count) * 4, "parameter data");
    Tensor t(shape);
    std::memcpy(t.data.data(), bytes.data() + r.pos, static_cast<size_t>(count) * 4);
    r.pos += static_cast<size_t>(count) * 4;
    data.params.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos != end) throw DecodeError("checkpoint: trailing garbage", static_cast<long>(r.pos));
  return data;
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifactError("cannot open file: " + path);
  f.seekg(0, std::ios::end);
  const auto len = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> out(static_cast<size_t>(len));
  f.read(reinterpret_cast<char*>(out.data()), len);
  if (!f) throw Error("failed reading file: " + path);
  return out;
}

void write_file(const std::string& path, const void* data, size_t len) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write file: " + path);
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
  if (!f) throw Error("failed writing file: " + path);
}

void save_checkpoint(const CheckpointData& data, const std::string& path) {
  const auto bytes = encode_checkpoint(data);
  write_file(path, bytes.data(), bytes.size());
}

CheckpointData load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace splitlab::io
