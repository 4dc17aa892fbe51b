// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "lfad/encoder.hpp"

using namespace lfad;
using lfad::testing::gradcheck;
using lfad::testing::random_matrix;

namespace {

EncoderConfig tiny_config(const MaskSpec& mask) {
  EncoderConfig c;
  c.mask = mask;
  c.width = 8;
  c.heads = 2;
  c.ff = 12;
  c.features = 3;
  c.vocab = 6;
  return c;
}

struct TinyEncoder {
  ParameterStore store;
  std::mt19937_64 rng;
  Encoder encoder;

  TinyEncoder(const MaskSpec& mask, std::uint64_t seed)
      : rng(seed), encoder(tiny_config(mask), store, rng) {}
};

}  // namespace

TEST_CASE("rotary rotation is orthogonal, invertible and relative") {
  std::mt19937_64 rng(3);
  Tensor q(random_matrix(5, 8, rng));
  Tensor k(random_matrix(5, 8, rng));
  const Matrix back = rotate_positions(rotate_positions(q, 2, 7), 2, 7, -1).value();
  CHECK((back - q.value()).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix r = rotate_positions(q, 2, 3).value();
  CHECK((r.rowwise().norm() - q.value().rowwise().norm()).cwiseAbs().maxCoeff() < 1e-12);

  auto [q1, k1] = rotary_positions(q, k, 2, 0, 0);
  auto [q2, k2] = rotary_positions(q, k, 2, 40, 40);
  const Matrix s1 = q1.value() * k1.value().transpose();
  const Matrix s2 = q2.value() * k2.value().transpose();
  CHECK((s1 - s2).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(rotate_positions(Tensor(Matrix::Zero(2, 6)), 2, 0), ConfigError);
}

TEST_CASE("shift within chunk pulls the next frame only inside a chunk") {
  Matrix x(6, 1);
  x << 1, 2, 3, 4, 5, 6;
  const Matrix y = shift_within_chunk(Tensor(x), 3, 1).value();
  // Offset 1: chunks are local rows {0,1}, {2,3,4}, {5}.
  Matrix expected(6, 1);
  expected << 2, 0, 4, 5, 0, 0;
  CHECK(y == expected);

  std::mt19937_64 rng(4);
  Tensor leaf(random_matrix(7, 2, rng), true);
  const Matrix w = random_matrix(7, 2, rng);
  const auto report = gradcheck([&] { return sum(mul(shift_within_chunk(leaf, 2, 0), Tensor(w))); }, {leaf});
  INFO(report.first_failure);
  CHECK(report.ok());
}

TEST_CASE("frontend decimates by R and rejects bad input") {
  TinyEncoder e(MaskSpec{1, 2, 2, 3}, 1);
  CHECK(e.encoder.frontend(Tensor(Matrix::Ones(11, 3))).rows() == 3);
  CHECK_THROWS_AS(e.encoder.frontend(Tensor(Matrix::Ones(2, 3))), InputError);
  CHECK_THROWS_AS(e.encoder.frontend(Tensor(Matrix::Ones(9, 4))), DimensionError);
}

TEST_CASE("encoder parameter gradients match finite differences") {
  TinyEncoder e(MaskSpec{2, 1, 2, 2}, 5);
  std::mt19937_64 rng(6);
  const Tensor x(random_matrix(10, 3, rng));
  const Matrix w = random_matrix(5, 8, rng);
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (auto& p : e.store.parameters()) params.push_back(p.tensor), names.push_back(p.name);
  const auto report = gradcheck(
      [&] { return sum(mul(e.encoder.forward(x, e.encoder.config().mask, 1), Tensor(w))); }, params, names);
  INFO(report.first_failure);
  CHECK(report.ok());
}

TEST_CASE("future frames beyond the chunk never leak backwards") {
  const MaskSpec spec{2, 2, 3, 2};
  TinyEncoder e(spec, 8);
  std::mt19937_64 rng(9);
  Matrix x = random_matrix(36, 3, rng);
  const Matrix before = encode(e.encoder, x, spec).encodings;
  x.bottomRows(6).setConstant(9.0);  // encoding frames 15..17, chunk [15, 17]
  const Matrix after = encode(e.encoder, x, spec).encodings;
  CHECK((before.topRows(15) - after.topRows(15)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((before.bottomRows(3) - after.bottomRows(3)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("slices of saturated frames equal re-encoding the required window") {
  std::mt19937_64 rng(10);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> small(1, 3);
    const MaskSpec spec{small(rng), small(rng), small(rng), std::uniform_int_distribution<int>(1, 2)(rng)};
    TinyEncoder e(spec, 100 + trial);
    const Index frames = spec.layers * spec.lookback + 4 * spec.chunk + 12;
    const Matrix x = random_matrix(frames * spec.decimation, 3, rng);
    const EncodingSequence full = encode(e.encoder, x, spec);
    const Index t_b = spec.layers * spec.lookback + std::uniform_int_distribution<Index>(0, 3)(rng);
    const Index t_e = std::min<Index>(t_b + std::uniform_int_distribution<Index>(0, 4)(rng),
                                      frames - spec.chunk - 1);
    const Segment seg{t_b, t_e, {}, false};
    REQUIRE(is_long_form_segment(full.profile, seg));
    const AcousticWindow w = required_window(spec, seg, static_cast<long>(x.rows()));
    REQUIRE_FALSE(w.clipped);
    const Index offset = w.begin / spec.decimation;
    const EncodingSequence window =
        encode(e.encoder, Matrix(x.middleRows(w.begin, w.length())), spec, offset);
    const Matrix a = full.encodings.middleRows(t_b, seg.length());
    const Matrix b = window.encodings.middleRows(t_b - offset, seg.length());
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("streaming encoder reproduces the full-stream encodings") {
  const MaskSpec spec{2, 3, 2, 2};
  TinyEncoder e(spec, 11);
  std::mt19937_64 rng(12);
  const Matrix x = random_matrix(48, 3, rng);
  std::vector<Matrix> chunks;
  for (Index at = 0; at < 48; at += 8) chunks.push_back(x.middleRows(at, 8));
  const Matrix full = encode(e.encoder, x, spec).encodings;
  const Matrix streamed = streaming_encode(e.encoder, chunks, spec).encodings;
  REQUIRE(streamed.rows() == full.rows());
  CHECK((full - streamed).cwiseAbs().maxCoeff() < 1e-10);
  std::vector<Matrix> ragged{x.topRows(6)};
  CHECK_THROWS_AS(streaming_encode(e.encoder, ragged, spec), InputError);
}

TEST_CASE("config validation") {
  EncoderConfig c = tiny_config(MaskSpec{});
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config(MaskSpec{});
  c.width = 6;  // head dimension 3 is odd
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config(MaskSpec{});
  c.vocab = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
