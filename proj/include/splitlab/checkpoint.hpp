#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab::io {

uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

enum class ModelKind : uint8_t {
  SplitModel = 1,
  Generator = 2,
  Autoencoder = 3,
  InverseNet = 4,
};

// "SPLB" container: magic, u16 LE version, u8 model kind, then a named
// parameter table (u16 name length + name, u8 ndim, u32 LE dims, f32 LE data)
// and a trailing CRC32 of everything before it.
struct CheckpointData {
  ModelKind kind;
  std::vector<std::pair<std::string, Tensor>> params;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : params)
      if (n == name) return &t;
    return nullptr;
  }
};

std::vector<uint8_t> encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint(const CheckpointData& data, const std::string& path);
CheckpointData load_checkpoint(const std::string& path);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const void* data, size_t len);

}  // namespace splitlab::io
