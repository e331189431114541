#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pgn/tensor.hpp"

// Checkpoint container: little-endian binary, magic "PGNT", u32 version = 1,
// u32 tensor count, then per tensor: u32 name length, UTF-8 name, u32 rank,
// rank * u32 extents, u8 frozen flag, raw f32 data.

namespace pgn {

struct CheckpointEntry {
  std::vector<int64_t> shape;
  bool frozen = false;
  std::vector<float> data;
};

using Checkpoint = std::map<std::string, CheckpointEntry>;

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct ByteReader {
  const std::string& buf;
  size_t pos = 0;

  bool take(void* dst, size_t n) {
    if (pos + n > buf.size()) return false;
    std::memcpy(dst, buf.data() + pos, n);
    pos += n;
    return true;
  }
  bool u32(uint32_t& v) {
    unsigned char b[4];
    if (!take(b, 4)) return false;
    v = static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
        static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
    return true;
  }
  bool f32(float& v) {
    uint32_t bits;
    if (!u32(bits)) return false;
    std::memcpy(&v, &bits, 4);
    return true;
  }
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& cp) {
  std::string out = "PGNT";
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<uint32_t>(cp.size()));
  for (const auto& [name, e] : cp) {
    detail::put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<uint32_t>(e.shape.size()));
    for (int64_t d : e.shape) detail::put_u32(out, static_cast<uint32_t>(d));
    out.push_back(e.frozen ? 1 : 0);
    for (float v : e.data) detail::put_f32(out, v);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  detail::ByteReader r{bytes};
  char magic[4];
  require(r.take(magic, 4) && std::memcmp(magic, "PGNT", 4) == 0, ErrorCode::BadCheckpoint,
          "bad magic");
  uint32_t version = 0, count = 0;
  require(r.u32(version) && version == 1, ErrorCode::BadCheckpoint,
          "unsupported version " + std::to_string(version));
  require(r.u32(count), ErrorCode::BadCheckpoint, "truncated header");
  Checkpoint cp;
  for (uint32_t t = 0; t < count; ++t) {
    uint32_t name_len = 0;
    require(r.u32(name_len) && name_len > 0 && name_len <= 4096, ErrorCode::BadCheckpoint,
            "bad name length");
    std::string name(name_len, '\0');
    require(r.take(name.data(), name_len), ErrorCode::BadCheckpoint, "truncated name");
    uint32_t rank = 0;
    require(r.u32(rank) && rank <= 8, ErrorCode::BadCheckpoint, "bad rank");
    CheckpointEntry e;
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      uint32_t ext = 0;
      require(r.u32(ext) && ext > 0, ErrorCode::BadCheckpoint, "bad extent");
      e.shape.push_back(static_cast<int64_t>(ext));
      numel *= ext;
    }
    uint8_t frozen = 0;
    require(r.take(&frozen, 1), ErrorCode::BadCheckpoint, "truncated flags");
    e.frozen = frozen != 0;
    e.data.resize(static_cast<size_t>(numel));
    for (auto& v : e.data)
      require(r.f32(v), ErrorCode::BadCheckpoint, "truncated data in " + name);
    require(cp.emplace(name, std::move(e)).second, ErrorCode::BadCheckpoint,
            "duplicate tensor " + name);
  }
  require(r.pos == bytes.size(), ErrorCode::BadCheckpoint, "trailing bytes");
  return cp;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorCode::BadCheckpoint, "cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), ErrorCode::BadCheckpoint, "short write to " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::BadCheckpoint, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

template <typename T>
Checkpoint snapshot_params(const ParamStore<T>& store) {
  Checkpoint cp;
  for (const auto* p : store.all()) {
    CheckpointEntry e;
    e.shape = p->tensor.shape();
    e.frozen = p->frozen;
    e.data.reserve(p->tensor.data().size());
    for (T v : p->tensor.data()) e.data.push_back(static_cast<float>(v));
    require(cp.emplace(p->name, std::move(e)).second, ErrorCode::BadCheckpoint,
            "duplicate parameter name " + p->name);
  }
  return cp;
}

template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::string& path) {
  write_file(path, encode_checkpoint(snapshot_params(store)));
}

// Strict restore: the file and the store must carry exactly the same names.
template <typename T>
void load_checkpoint(ParamStore<T>& store, const std::string& path,
                     bool reject_client_tensors = false) {
  Checkpoint cp = decode_checkpoint(read_file(path));
  if (reject_client_tensors)
    for (const auto& [name, e] : cp)
      require(name.rfind("pgn.", 0) != 0 && name.rfind("lib.", 0) != 0, ErrorCode::BadCheckpoint,
              "server mode rejects client-side tensor " + name);
  size_t matched = 0;
  for (auto* p : store.all()) {
    auto it = cp.find(p->name);
    require(it != cp.end(), ErrorCode::BadCheckpoint, "missing tensor " + p->name);
    require(it->second.shape == p->tensor.shape(), ErrorCode::BadCheckpoint,
            "shape mismatch for " + p->name + ": file " + shape_str(it->second.shape) +
                " vs model " + shape_str(p->tensor.shape()));
    auto& dst = p->tensor.data();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second.data[i]);
    ++matched;
  }
  require(matched == cp.size(), ErrorCode::BadCheckpoint,
          "checkpoint carries tensors unknown to the model");
}

}  // namespace pgn
