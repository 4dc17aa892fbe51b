// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Context geometry of the chunked, finite look-back encoder.
//
// A query frame q sees keys in [q - N, chunk_end(q)], where chunks of M
// encoding frames are laid on a grid anchored at absolute frame 0. Contexts
// are reported in acoustic (pre-decimation) frames.

#pragma once

#include <optional>
#include <vector>

#include "lfad/segment.hpp"
#include "lfad/tensor.hpp"

namespace lfad {

struct MaskSpec {
  int layers = 2;      // L
  int lookback = 4;    // N, encoding frames per layer
  int chunk = 2;       // M, encoding frames
  int decimation = 2;  // R, acoustic frames per encoding frame

  long left_context_max() const { return static_cast<long>(layers) * lookback * decimation; }
  long right_context_max() const { return static_cast<long>(chunk) * decimation; }
  void validate() const;
  bool operator==(const MaskSpec&) const = default;
};

// `frame_offset` is the absolute index of local frame 0; it fixes the
// phase of the chunk grid when encoding a window cut from a longer stream.
Index chunk_start(Index q, int chunk, Index frame_offset = 0);
Index chunk_end(Index q, int chunk, Index frames, Index frame_offset = 0);

BoolMatrix build_layer_mask(const MaskSpec& spec, Index frames, int layer, Index frame_offset = 0);

struct ContextProfile {
  MaskSpec spec;
  Index frame_offset = 0;
  std::vector<long> left;   // C_L(t), acoustic frames
  std::vector<long> right;  // C_R(t), acoustic frames

  Index frames() const { return static_cast<Index>(left.size()); }
};

// Computed by propagating reachable sets through every layer's mask.
ContextProfile context_profile(const MaskSpec& spec, Index frames, Index frame_offset = 0);

// The left-most and right-most reachable frame of every query after all
// layers. Exposed for tests of the receptive field.
struct Reach {
  std::vector<Index> first;
  std::vector<Index> last;
};
Reach receptive_field(const MaskSpec& spec, Index frames, Index frame_offset = 0);

bool is_lfe(const ContextProfile& profile, Index t);
bool is_long_form_segment(const ContextProfile& profile, const Segment& segment);

// Acoustic-frame interval [begin, end) that makes a segment long-form.
struct AcousticWindow {
  long begin = 0;
  long end = 0;
  bool clipped = false;
  long clipped_begin = 0;
  long clipped_end = 0;

  long length() const { return end - begin; }
};

AcousticWindow required_window(const MaskSpec& spec, const Segment& segment,
                               std::optional<long> stream_acoustic_frames = std::nullopt);

}  // namespace lfad
