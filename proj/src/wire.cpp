#include "pgn/wire.hpp"

#include <cstring>

namespace pgn {

uint32_t crc32(const void* data, size_t n, uint32_t seed) {
  // CRC-32 (IEEE 802.3), reflected, table-driven
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = seed ^ 0xffffffffu;
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) c = table[(c ^ p[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

namespace {

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (static_cast<uint16_t>(p[1]) << 8));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

constexpr size_t kPromptHeader = 12;  // magic + version + flags + 3 * u16
constexpr size_t kLogitHeader = 8;    // magic + version + status + u16

size_t pixel_count(const PromptFrame& f) {
  return static_cast<size_t>(f.channels) * f.height * f.width;
}

void validate_header(const PromptFrame& f) {
  require(f.version == 1, ErrorCode::BadVersion,
          "prompt frame version " + std::to_string(f.version));
  require(f.flags == kFramePixelsF32 || f.flags == kFramePixelsU8, ErrorCode::BadFrame,
          "pixel flags must set exactly one of f32/u8");
  require(f.channels == 3, ErrorCode::BadFrame,
          "channels must be 3, got " + std::to_string(f.channels));
  require(f.height > 0 && f.width > 0, ErrorCode::BadFrame, "empty frame");
}

}  // namespace

std::string encode_prompt_frame(const PromptFrame& f) {
  validate_header(f);
  const size_t n = pixel_count(f);
  std::string out = "PGNF";
  out.push_back(static_cast<char>(f.version));
  out.push_back(static_cast<char>(f.flags));
  put_u16(out, f.channels);
  put_u16(out, f.height);
  put_u16(out, f.width);
  if (f.flags == kFramePixelsF32) {
    require(f.pixels_f32.size() == n, ErrorCode::BadFrame, "payload length mismatch");
    for (float v : f.pixels_f32) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  } else {
    require(f.pixels_u8.size() == n, ErrorCode::BadFrame, "payload length mismatch");
    out.append(reinterpret_cast<const char*>(f.pixels_u8.data()), f.pixels_u8.size());
  }
  return out;
}

std::string encode_logit_frame(const LogitFrame& f) {
  require(f.version == 1, ErrorCode::BadVersion, "logit frame version");
  require(f.status == kStatusOk || f.logits.empty(), ErrorCode::BadFrame,
          "error responses carry no payload");
  std::string out = "PGNR";
  out.push_back(static_cast<char>(f.version));
  out.push_back(static_cast<char>(f.status));
  put_u16(out, static_cast<uint16_t>(f.logits.size()));
  for (float v : f.logits) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  put_u32(out, crc32(out.data(), out.size()));
  return out;
}

namespace {

PromptFrame parse_prompt_header(const uint8_t* h) {
  require(std::memcmp(h, "PGNF", 4) == 0, ErrorCode::BadMagic, "prompt frame magic");
  PromptFrame f;
  f.version = h[4];
  f.flags = h[5];
  f.channels = get_u16(h + 6);
  f.height = get_u16(h + 8);
  f.width = get_u16(h + 10);
  validate_header(f);
  return f;
}

void parse_prompt_payload(PromptFrame& f, const uint8_t* p, size_t n) {
  if (f.flags == kFramePixelsF32) {
    f.pixels_f32.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const uint32_t bits = get_u32(p + 4 * i);
      std::memcpy(&f.pixels_f32[i], &bits, 4);
    }
  } else {
    f.pixels_u8.assign(p, p + n);
  }
}

}  // namespace

PromptFrame decode_prompt_frame(const std::string& bytes) {
  require(bytes.size() >= kPromptHeader, ErrorCode::Truncated, "prompt frame header");
  const auto* b = reinterpret_cast<const uint8_t*>(bytes.data());
  PromptFrame f = parse_prompt_header(b);
  const size_t n = pixel_count(f);
  const size_t need = kPromptHeader + n * (f.flags == kFramePixelsF32 ? 4 : 1);
  require(bytes.size() >= need, ErrorCode::Truncated, "prompt frame payload");
  require(bytes.size() == need, ErrorCode::BadFrame, "trailing bytes after frame");
  parse_prompt_payload(f, b + kPromptHeader, n);
  return f;
}

LogitFrame decode_logit_frame(const std::string& bytes) {
  require(bytes.size() >= kLogitHeader + 4, ErrorCode::Truncated, "logit frame header");
  const auto* b = reinterpret_cast<const uint8_t*>(bytes.data());
  require(std::memcmp(b, "PGNR", 4) == 0, ErrorCode::BadMagic, "logit frame magic");
  LogitFrame f;
  f.version = b[4];
  require(f.version == 1, ErrorCode::BadVersion, "logit frame version " + std::to_string(f.version));
  f.status = b[5];
  const uint16_t nc = get_u16(b + 6);
  const size_t need = kLogitHeader + 4ul * nc + 4;
  require(bytes.size() >= need, ErrorCode::Truncated, "logit frame payload");
  require(bytes.size() == need, ErrorCode::BadFrame, "trailing bytes after frame");
  require(crc32(b, need - 4) == get_u32(b + need - 4), ErrorCode::BadFrame, "crc mismatch");
  f.logits.resize(nc);
  for (size_t i = 0; i < nc; ++i) {
    const uint32_t bits = get_u32(b + kLogitHeader + 4 * i);
    std::memcpy(&f.logits[i], &bits, 4);
  }
  return f;
}

// ---------------------------------------------------------------------------
// streams
// ---------------------------------------------------------------------------

void ByteStream::read_exact(void* dst, size_t n) {
  auto* p = static_cast<uint8_t*>(dst);
  size_t got = 0;
  while (got < n) {
    const size_t r = read_some(p + got, n - got);
    require(r > 0, ErrorCode::Truncated,
            "stream ended " + std::to_string(n - got) + " bytes short");
    got += r;
  }
}

bool ByteStream::try_read_exact(void* dst, size_t n) {
  auto* p = static_cast<uint8_t*>(dst);
  const size_t first = read_some(p, n);
  if (first == 0) return false;
  size_t got = first;
  while (got < n) {
    const size_t r = read_some(p + got, n - got);
    require(r > 0, ErrorCode::Truncated,
            "stream ended " + std::to_string(n - got) + " bytes short");
    got += r;
  }
  return true;
}

PromptFrame read_prompt_frame(ByteStream& in) {
  uint8_t h[kPromptHeader];
  in.read_exact(h, sizeof h);
  PromptFrame f = parse_prompt_header(h);
  const size_t n = pixel_count(f);
  std::vector<uint8_t> payload(n * (f.flags == kFramePixelsF32 ? 4 : 1));
  in.read_exact(payload.data(), payload.size());
  parse_prompt_payload(f, payload.data(), n);
  return f;
}

bool read_prompt_frame_server(ByteStream& in, PromptFrame& out) {
  uint8_t h[kPromptHeader];
  if (!in.try_read_exact(h, sizeof h)) return false;
  // header errors propagate before any payload is consumed; the caller
  // answers with a bad_request status and keeps the connection open
  out = parse_prompt_header(h);
  const size_t n = pixel_count(out);
  std::vector<uint8_t> payload(n * (out.flags == kFramePixelsF32 ? 4 : 1));
  in.read_exact(payload.data(), payload.size());
  parse_prompt_payload(out, payload.data(), n);
  return true;
}

LogitFrame read_logit_frame(ByteStream& in) {
  uint8_t h[kLogitHeader];
  in.read_exact(h, sizeof h);
  require(std::memcmp(h, "PGNR", 4) == 0, ErrorCode::BadMagic, "logit frame magic");
  const uint16_t nc = get_u16(h + 6);
  std::vector<uint8_t> rest(4ul * nc + 4);
  in.read_exact(rest.data(), rest.size());
  std::string bytes(reinterpret_cast<const char*>(h), sizeof h);
  bytes.append(reinterpret_cast<const char*>(rest.data()), rest.size());
  return decode_logit_frame(bytes);
}

size_t MemoryPipe::read_some(void* dst, size_t n) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !buf_.empty() || closed_; });
  if (buf_.empty()) return 0;
  const size_t take = std::min(n, buf_.size());
  auto* p = static_cast<uint8_t*>(dst);
  for (size_t i = 0; i < take; ++i) {
    p[i] = buf_.front();
    buf_.pop_front();
  }
  return take;
}

void MemoryPipe::write_all(const void* src, size_t n) {
  std::lock_guard lock(mu_);
  const auto* p = static_cast<const uint8_t*>(src);
  buf_.insert(buf_.end(), p, p + n);
  cv_.notify_all();
}

void MemoryPipe::close_write() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

size_t MemoryPipe::pending() const {
  std::lock_guard lock(mu_);
  return buf_.size();
}

}  // namespace pgn
