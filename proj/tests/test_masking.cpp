// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <vector>

#include "doctest.h"
#include "lfad/masking.hpp"

using namespace lfad;

namespace {

// Reachability by repeated boolean matrix products over an explicitly built
// visibility relation; shares nothing with the library's bitset walk.
struct DenseReach {
  std::vector<Index> first;
  std::vector<Index> last;
};

DenseReach dense_reach(const MaskSpec& s, Index frames, Index offset) {
  using Dense = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  Dense visible = Dense::Zero(frames, frames);
  for (Index q = 0; q < frames; ++q) {
    const Index abs_q = q + offset;
    const Index last_in_chunk = (abs_q / s.chunk + 1) * s.chunk - 1 - offset;
    for (Index k = 0; k < frames; ++k)
      if (k >= q - s.lookback && k <= last_in_chunk) visible(q, k) = 1;
  }
  Dense reach = Dense::Identity(frames, frames);
  for (int l = 0; l < s.layers; ++l) {
    reach = reach * visible;
    reach = (reach.array() > 0).cast<int>().matrix();
  }
  DenseReach out;
  for (Index t = 0; t < frames; ++t) {
    Index lo = frames, hi = -1;
    for (Index k = 0; k < frames; ++k)
      if (reach(t, k)) lo = std::min(lo, k), hi = std::max(hi, k);
    out.first.push_back(lo);
    out.last.push_back(hi);
  }
  return out;
}

}  // namespace

TEST_CASE("layer mask follows the look-back and chunk rule") {
  const MaskSpec s{1, 3, 4, 2};
  for (Index offset : {0, 1, 3}) {
    const BoolMatrix m = build_layer_mask(s, 13, 0, offset);
    for (Index q = 0; q < 13; ++q)
      for (Index k = 0; k < 13; ++k) {
        const Index end = std::min<Index>(12, ((q + offset) / 4 + 1) * 4 - 1 - offset);
        CHECK(m(q, k) == (k >= q - 3 && k <= end));
      }
  }
}

TEST_CASE("receptive field matches dense reachability") {
  for (int L = 1; L <= 3; ++L)
    for (int N = 0; N <= 3; ++N)
      for (int M = 1; M <= 3; ++M)
        for (Index offset : {0, 2}) {
          const MaskSpec s{L, N, M, 1};
          const Index T = 23;
          const Reach r = receptive_field(s, T, offset);
          const DenseReach d = dense_reach(s, T, offset);
          for (Index t = 0; t < T; ++t) {
            CHECK(r.first[t] == d.first[t]);
            CHECK(r.last[t] == std::min<Index>(d.last[t], T - 1));
          }
        }
}

TEST_CASE("contexts saturate at L*N*R and M*R") {
  for (int L = 1; L <= 4; ++L)
    for (int N = 0; N <= 4; ++N)
      for (int M = 1; M <= 4; ++M)
        for (int R = 1; R <= 3; ++R) {
          const MaskSpec s{L, N, M, R};
          const Index T = L * N + 3 * M + 2;
          const ContextProfile p = context_profile(s, T);
          const long left = *std::max_element(p.left.begin(), p.left.end());
          CHECK(left == s.left_context_max());
          CHECK(left == static_cast<long>(L) * N * R);
          const Index complete = (T / M) * M;
          for (Index t = 0; t < complete; ++t) CHECK(p.right[t] == static_cast<long>(M) * R);
          for (Index t = 0; t < T; ++t) CHECK(p.right[t] <= s.right_context_max());
        }
}

TEST_CASE("paper-scale instance") {
  const MaskSpec s{12, 16, 16, 6};
  CHECK(s.left_context_max() == 1152);
  CHECK(s.right_context_max() == 96);
  const ContextProfile p = context_profile(s, 256);
  CHECK(*std::max_element(p.left.begin(), p.left.end()) == 1152);
  CHECK(p.right[0] == 96);
}

TEST_CASE("frame offset shifts the chunk grid") {
  const MaskSpec s{2, 2, 4, 1};
  const ContextProfile whole = context_profile(s, 40);
  const ContextProfile tail = context_profile(s, 30, 10);
  // Past the saturation point the window profile equals the full-stream one.
  for (Index t = 2 * 2; t < 30; ++t) {
    CHECK(tail.left[t] == whole.left[t + 10]);
    CHECK(tail.right[t] == whole.right[t + 10]);
  }
  CHECK(chunk_start(3, 4, 2) == 2);
  CHECK(chunk_end(3, 4, 100, 2) == 5);
  // Frames before absolute zero (silence padding) keep the same grid.
  CHECK(chunk_start(0, 4, -1) == -3);
  CHECK(chunk_start(3, 4, -1) == 1);
  CHECK(chunk_start(0, 4, -4) == 0);
}

TEST_CASE("long-form segments need saturated context on both sides") {
  const MaskSpec s{2, 2, 2, 2};
  const ContextProfile p = context_profile(s, 20);
  CHECK_FALSE(is_lfe(p, 0));
  CHECK(is_lfe(p, 8));
  CHECK(is_long_form_segment(p, Segment{6, 12, {}, false}));
  CHECK_FALSE(is_long_form_segment(p, Segment{2, 12, {}, false}));
  CHECK_THROWS_AS(is_long_form_segment(p, Segment{5, 30, {}, false}), IndexError);
  CHECK_THROWS_AS(is_long_form_segment(p, Segment{5, 4, {}, false}), ContractError);
  CHECK_THROWS_AS(is_lfe(p, -1), IndexError);
}

TEST_CASE("required window and clipping") {
  const MaskSpec s{2, 2, 2, 2};
  const AcousticWindow w = required_window(s, Segment{10, 14, {}, false});
  CHECK(w.begin == 20 - 8);
  CHECK(w.end == 30 + 4);
  CHECK_FALSE(w.clipped);
  const AcousticWindow c = required_window(s, Segment{1, 14, {}, false}, 32L);
  CHECK(c.clipped);
  CHECK(c.clipped_begin == 0);
  CHECK(c.clipped_end == 32);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS((MaskSpec{0, 1, 1, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((MaskSpec{1, -1, 1, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((MaskSpec{1, 1, 0, 1}.validate()), ConfigError);
  CHECK_THROWS_AS(build_layer_mask(MaskSpec{}, 0, 0), ContractError);
  CHECK_THROWS_AS(build_layer_mask(MaskSpec{}, 4, 5), IndexError);
}
