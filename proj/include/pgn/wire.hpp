#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "pgn/errors.hpp"

// Length-implied binary framing for the inference service.
//
// Request ("PGNF"): magic, u8 version = 1, u8 flags (bit0: f32 pixels,
// bit1: u8 pixels; exactly one set), u16 channels = 3, u16 height,
// u16 width (all little-endian), then 3*height*width pixel values in
// row-major, channel-major order (4 bytes per value for f32, 1 for u8).
//
// Response ("PGNR"): magic, u8 version = 1, u8 status (0 ok,
// 1 bad_request, 2 shape_error), u16 num_classes, f32 logits payload,
// CRC32 trailer over all preceding bytes. Error responses carry
// num_classes = 0 and an empty payload.

namespace pgn {

constexpr uint8_t kFramePixelsF32 = 0x01;
constexpr uint8_t kFramePixelsU8 = 0x02;

constexpr uint8_t kStatusOk = 0;
constexpr uint8_t kStatusBadRequest = 1;
constexpr uint8_t kStatusShapeError = 2;

struct PromptFrame {
  uint8_t version = 1;
  uint8_t flags = kFramePixelsF32;
  uint16_t channels = 3;
  uint16_t height = 0;
  uint16_t width = 0;
  std::vector<float> pixels_f32;   // used when flags == f32
  std::vector<uint8_t> pixels_u8;  // used when flags == u8

  bool operator==(const PromptFrame&) const = default;
};

struct LogitFrame {
  uint8_t version = 1;
  uint8_t status = kStatusOk;
  std::vector<float> logits;

  bool operator==(const LogitFrame&) const = default;
};

uint32_t crc32(const void* data, size_t n, uint32_t seed = 0);

std::string encode_prompt_frame(const PromptFrame& f);
std::string encode_logit_frame(const LogitFrame& f);

// Buffer decoders consume exactly one frame and fail on any violation.
PromptFrame decode_prompt_frame(const std::string& bytes);
LogitFrame decode_logit_frame(const std::string& bytes);

// ---------------------------------------------------------------------------
// byte streams
// ---------------------------------------------------------------------------

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  // returns bytes read, 0 on clean EOF
  virtual size_t read_some(void* dst, size_t n) = 0;
  virtual void write_all(const void* src, size_t n) = 0;

  void read_exact(void* dst, size_t n);
  // true if a first byte was available, then reads the rest exactly
  bool try_read_exact(void* dst, size_t n);
  void write_str(const std::string& s) { write_all(s.data(), s.size()); }
};

// Streaming decoders: read one frame off a stream. decode errors leave the
// stream positioned after the consumed bytes.
PromptFrame read_prompt_frame(ByteStream& in);
LogitFrame read_logit_frame(ByteStream& in);
// header-only variant used by the server so it can answer malformed headers
// without guessing at payload lengths; returns false on clean EOF
bool read_prompt_frame_server(ByteStream& in, PromptFrame& out);

// In-memory FIFO usable from one or two threads.
class MemoryPipe : public ByteStream {
 public:
  size_t read_some(void* dst, size_t n) override;
  void write_all(const void* src, size_t n) override;
  void close_write();
  size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<uint8_t> buf_;
  bool closed_ = false;
};

// Two pipes glued into a duplex channel: what one end writes, the other reads.
struct PipeChannel {
  MemoryPipe a_to_b;
  MemoryPipe b_to_a;

  struct End : ByteStream {
    MemoryPipe* in = nullptr;
    MemoryPipe* out = nullptr;
    End(MemoryPipe* i, MemoryPipe* o) : in(i), out(o) {}
    size_t read_some(void* dst, size_t n) override { return in->read_some(dst, n); }
    void write_all(const void* src, size_t n) override { out->write_all(src, n); }
  };

  End end_a() { return End(&b_to_a, &a_to_b); }
  End end_b() { return End(&a_to_b, &b_to_a); }
};

}  // namespace pgn
