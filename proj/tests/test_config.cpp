#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pgn/config.hpp"
#include "test_util.hpp"

using namespace pgn;
using testutil::thrown_code;

TEST_CASE("defaults cover the registry and parse overrides") {
  Config cfg;
  CHECK(cfg.get_int("encoder.embed_dim") == 48);
  CHECK(cfg.get_float("train.lr") == doctest::Approx(0.1));
  CHECK(cfg.get_str("pgn.backbone") == "resnet10");

  auto overridden = Config::from_string(
      "# comment line\n"
      "encoder.depth = 2\n"
      "pgn.backbone = mlp   # trailing comment\n"
      "\n"
      "train.lr = 0.05\n");
  CHECK(overridden.get_int("encoder.depth") == 2);
  CHECK(overridden.get_str("pgn.backbone") == "mlp");
  CHECK(overridden.get_float("train.lr") == doctest::Approx(0.05));
  CHECK(overridden.is_default("train.momentum"));
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    Config::from_string("encoder.dpth = 2\n");
    FAIL("expected BadConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadConfig);
    CHECK(std::string(e.what()).find("encoder.dpth") != std::string::npos);
  }
}

TEST_CASE("type and range violations are rejected") {
  CHECK(thrown_code([] { Config::from_string("encoder.depth = fast\n"); }) ==
        ErrorCode::BadConfig);
  CHECK(thrown_code([] { Config::from_string("encoder.depth = 0\n"); }) == ErrorCode::BadConfig);
  CHECK(thrown_code([] { Config::from_string("train.momentum = 1.5\n"); }) ==
        ErrorCode::BadConfig);
  CHECK(thrown_code([] { Config::from_string("pgn.backbone = vgg\n"); }) == ErrorCode::BadConfig);
  CHECK(thrown_code([] { Config::from_string("just a line\n"); }) == ErrorCode::BadConfig);
}

TEST_CASE("describe_keys names every registered key") {
  const std::string help = Config::describe_keys();
  for (const auto& k : config_registry()) CHECK(help.find(k.name) != std::string::npos);
}
