// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lfad/config.hpp"
#include "lfad/tensor.hpp"

using namespace lfad;

TEST_CASE("parsing handles comments, whitespace and typed getters") {
  const auto c = KeyValueConfig::parse(
      "# model\n"
      "mask.layers = 3\n"
      "  decode.alpha=0.25  \n"
      "\n"
      "decoder.pe = false\n"
      "encoder.chunk_sizes = 2, 8,16\n"
      "name = long form run\n"
      "model.seed = 18446744073709551615\n");
  CHECK(c.get_int("mask.layers", 0) == 3);
  CHECK(c.get_double("decode.alpha", 0) == 0.25);
  CHECK_FALSE(c.get_bool("decoder.pe", true));
  CHECK(c.get_ints("encoder.chunk_sizes", {}) == std::vector<int>{2, 8, 16});
  CHECK(c.get("name", "") == "long form run");
  CHECK(c.get_u64("model.seed", 0) == 18446744073709551615ULL);
  CHECK(c.get_int("missing", 7) == 7);
  CHECK(c.get_long("mask.layers", 0) == 3);
}

TEST_CASE("malformed input is rejected") {
  CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("just words\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse(" = 3\n"), ConfigError);
  const auto c = KeyValueConfig::parse("x = 1.5\ny = maybe\nz = 3abc\n");
  CHECK_THROWS_AS(c.get_int("x", 0), ConfigError);
  CHECK_THROWS_AS(c.get_bool("y", false), ConfigError);
  CHECK_THROWS_AS(c.get_double("z", 0), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/lfad.cfg"), ConfigError);
}

TEST_CASE("canonical text and hash ignore ordering and comments") {
  const auto a = KeyValueConfig::parse("b = 2\na = 1\n");
  const auto b = KeyValueConfig::parse("# comment\na = 1\nb = 2\n");
  CHECK(a.canonical() == "a = 1\nb = 2\n");
  CHECK(a.hash() == b.hash());
  auto c = a;
  c.set("a", "3");
  CHECK(c.hash() != a.hash());
  CHECK(fnv1a_64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a_64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("merge overrides and files load") {
  auto base = KeyValueConfig::parse("a = 1\nb = 2\n");
  base.merge(KeyValueConfig::parse("b = 5\nc = 6\n"));
  CHECK(base.get_int("b", 0) == 5);
  CHECK(base.get_int("c", 0) == 6);
  const auto path = std::filesystem::temp_directory_path() / "lfad_config_test.cfg";
  {
    std::ofstream out(path);
    out << base.canonical();
  }
  CHECK(KeyValueConfig::load(path).hash() == base.hash());
  std::filesystem::remove(path);
  CHECK(join_ints({2, 8}) == "2,8");
}
