// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "lfad/datapipe.hpp"
#include "lfad/model.hpp"

namespace lfad::testing {

// One encoder layer, width 8, a single decoder block.
inline ModelConfig tiny_model_config(bool pe = true) {
  ModelConfig c;
  c.encoder.mask = MaskSpec{1, 2, 2, 2};
  c.encoder.chunk_sizes = {2};
  c.encoder.width = 8;
  c.encoder.heads = 2;
  c.encoder.ff = 12;
  c.encoder.features = 3;
  c.encoder.vocab = 8;
  c.decoder.blocks = 1;
  c.decoder.width = 8;
  c.decoder.heads = 2;
  c.decoder.ff = 12;
  c.decoder.vocab = 8;
  c.decoder.p_max = 16;
  c.decoder.pe_enabled = pe;
  c.seed = 3;
  c.encoder.seed = 3;
  return c;
}

// A 4-frame (8 acoustic frames) recording with a 3-token transcript.
inline AcousticStream tiny_stream(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AcousticStream s;
  s.id = "tiny";
  s.features = random_matrix(8, 3, rng);
  s.segments.push_back(Segment{0, 3, {4, 6, 5}, false});
  return s;
}

}  // namespace lfad::testing
