#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "pgn/net.hpp"
#include "pgn/wire.hpp"
#include "test_util.hpp"

using namespace pgn;
using testutil::thrown_code;

namespace {

PromptFrame random_frame(Rng& rng) {
  PromptFrame f;
  f.height = static_cast<uint16_t>(4 + rng.below(24));
  f.width = static_cast<uint16_t>(4 + rng.below(24));
  const size_t n = 3ul * f.height * f.width;
  if (rng.below(2) == 0) {
    f.flags = kFramePixelsF32;
    f.pixels_f32.resize(n);
    for (auto& v : f.pixels_f32) v = static_cast<float>(rng.uniform(-4.0, 4.0));
  } else {
    f.flags = kFramePixelsU8;
    f.pixels_u8.resize(n);
    for (auto& v : f.pixels_u8) v = static_cast<uint8_t>(rng.below(256));
  }
  return f;
}

}  // namespace

TEST_CASE("prompt and logit frames round-trip across 1000 random cases") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    PromptFrame f = random_frame(rng);
    CHECK(decode_prompt_frame(encode_prompt_frame(f)) == f);

    LogitFrame lf;
    lf.status = kStatusOk;
    lf.logits.resize(rng.below(40));
    for (auto& v : lf.logits) v = static_cast<float>(rng.uniform(-10.0, 10.0));
    CHECK(decode_logit_frame(encode_logit_frame(lf)) == lf);
  }
}

TEST_CASE("frame decoding rejects malformed bytes with precise codes") {
  Rng rng(5);
  PromptFrame f = random_frame(rng);
  const std::string good = encode_prompt_frame(f);

  // one byte short
  CHECK(thrown_code([&] { decode_prompt_frame(good.substr(0, good.size() - 1)); }) ==
        ErrorCode::Truncated);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(thrown_code([&] { decode_prompt_frame(bad_magic); }) == ErrorCode::BadMagic);

  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK(thrown_code([&] { decode_prompt_frame(bad_version); }) == ErrorCode::BadVersion);

  std::string bad_flags = good;
  bad_flags[5] = 3;  // both pixel formats at once
  CHECK(thrown_code([&] { decode_prompt_frame(bad_flags); }) == ErrorCode::BadFrame);

  LogitFrame lf;
  lf.logits = {1.0f, 2.0f};
  std::string resp = encode_logit_frame(lf);
  resp[resp.size() - 1] ^= 0x40;  // corrupt the crc
  CHECK(thrown_code([&] { decode_logit_frame(resp); }) == ErrorCode::BadFrame);
}

TEST_CASE("error responses carry no payload") {
  LogitFrame lf;
  lf.status = kStatusBadRequest;
  lf.logits = {1.0f};
  CHECK(thrown_code([&] { encode_logit_frame(lf); }) == ErrorCode::BadFrame);
  lf.logits.clear();
  auto rt = decode_logit_frame(encode_logit_frame(lf));
  CHECK(rt.status == kStatusBadRequest);
  CHECK(rt.logits.empty());
}

TEST_CASE("crc32 matches the published check value") {
  // the classic CRC-32 test vector
  const char* s = "123456789";
  CHECK(crc32(s, 9) == 0xcbf43926u);
}

TEST_CASE("frames travel identically over a memory pipe and a tcp socket") {
  Rng rng(31);
  PromptFrame f = random_frame(rng);

  // pipe
  PipeChannel chan;
  auto client_end = chan.end_a();
  auto server_end = chan.end_b();
  client_end.write_str(encode_prompt_frame(f));
  PromptFrame via_pipe = read_prompt_frame(server_end);
  CHECK(via_pipe == f);

  // tcp loopback
  Server server;
  PromptFrame via_tcp;
  server.start(
      [&](ByteStream& s) {
        via_tcp = read_prompt_frame(s);
        LogitFrame ack;
        ack.logits = {42.0f};
        s.write_str(encode_logit_frame(ack));
      },
      "127.0.0.1", 0);
  auto cli = TcpStream::connect("127.0.0.1", server.port());
  cli->write_str(encode_prompt_frame(f));
  LogitFrame ack = read_logit_frame(*cli);
  CHECK(ack.logits == std::vector<float>{42.0f});
  server.stop();
  CHECK(via_tcp == f);
}

TEST_CASE("connecting to a dead port raises ConnectionError") {
  CHECK(thrown_code([] { TcpStream::connect("127.0.0.1", 1); }) == ErrorCode::ConnectionError);
}
