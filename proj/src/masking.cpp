// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/masking.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

namespace lfad {

void MaskSpec::validate() const {
  if (layers < 1 || lookback < 0 || chunk < 1 || decimation < 1)
    throw ConfigError("mask spec requires L>=1, N>=0, M>=1, R>=1; got L=" + std::to_string(layers) +
                      " N=" + std::to_string(lookback) + " M=" + std::to_string(chunk) +
                      " R=" + std::to_string(decimation));
}

Index chunk_start(Index q, int chunk, Index frame_offset) {
  const Index absolute = q + frame_offset;
  // Floor division: silence padding can place frames before absolute zero.
  Index index = absolute / chunk;
  if (absolute % chunk != 0 && absolute < 0) --index;
  return index * chunk - frame_offset;
}

Index chunk_end(Index q, int chunk, Index frames, Index frame_offset) {
  return std::min(chunk_start(q, chunk, frame_offset) + chunk - 1, frames - 1);
}

BoolMatrix build_layer_mask(const MaskSpec& spec, Index frames, int layer, Index frame_offset) {
  spec.validate();
  if (frames < 1) throw ContractError("build_layer_mask: empty input (T = 0)");
  if (layer < 0 || layer >= spec.layers)
    throw IndexError("build_layer_mask: layer " + std::to_string(layer) + " outside [0, " +
                     std::to_string(spec.layers) + ")");
  BoolMatrix mask = BoolMatrix::Constant(frames, frames, false);
  for (Index q = 0; q < frames; ++q) {
    const Index lo = std::max<Index>(0, q - spec.lookback);
    const Index hi = chunk_end(q, spec.chunk, frames, frame_offset);
    mask.row(q).segment(lo, hi - lo + 1).setConstant(true);
  }
  return mask;
}

namespace {

using Bits = std::vector<std::uint64_t>;

Bits row_bits(const BoolMatrix& mask, Index row, std::size_t words) {
  Bits bits(words, 0);
  for (Index c = 0; c < mask.cols(); ++c)
    if (mask(row, c)) bits[static_cast<std::size_t>(c) / 64] |= std::uint64_t{1} << (c % 64);
  return bits;
}

}  // namespace

Reach receptive_field(const MaskSpec& spec, Index frames, Index frame_offset) {
  spec.validate();
  if (frames < 1) throw ContractError("receptive_field: empty input (T = 0)");
  const auto words = static_cast<std::size_t>((frames + 63) / 64);
  std::vector<Bits> reach(static_cast<std::size_t>(frames), Bits(words, 0));
  for (Index t = 0; t < frames; ++t)
    reach[static_cast<std::size_t>(t)][static_cast<std::size_t>(t) / 64] |= std::uint64_t{1} << (t % 64);

  for (int layer = 0; layer < spec.layers; ++layer) {
    const BoolMatrix mask = build_layer_mask(spec, frames, layer, frame_offset);
    std::vector<Bits> rows(static_cast<std::size_t>(frames));
    for (Index k = 0; k < frames; ++k) rows[static_cast<std::size_t>(k)] = row_bits(mask, k, words);
    std::vector<Bits> next(static_cast<std::size_t>(frames), Bits(words, 0));
    for (std::size_t t = 0; t < reach.size(); ++t) {
      for (std::size_t w = 0; w < words; ++w) {
        std::uint64_t word = reach[t][w];
        while (word) {
          const int bit = __builtin_ctzll(word);
          word &= word - 1;
          const Bits& src = rows[w * 64 + static_cast<std::size_t>(bit)];
          for (std::size_t j = 0; j < words; ++j) next[t][j] |= src[j];
        }
      }
    }
    reach = std::move(next);
  }

  Reach out;
  out.first.resize(static_cast<std::size_t>(frames));
  out.last.resize(static_cast<std::size_t>(frames));
  for (std::size_t t = 0; t < reach.size(); ++t) {
    Index first = -1;
    Index last = -1;
    for (std::size_t w = 0; w < words; ++w) {
      if (!reach[t][w]) continue;
      const Index lo = static_cast<Index>(w * 64) + __builtin_ctzll(reach[t][w]);
      const Index hi = static_cast<Index>(w * 64) + 63 - __builtin_clzll(reach[t][w]);
      if (first < 0) first = lo;
      last = hi;
    }
    out.first[t] = first;
    out.last[t] = last;
  }
  return out;
}

ContextProfile context_profile(const MaskSpec& spec, Index frames, Index frame_offset) {
  const Reach reach = receptive_field(spec, frames, frame_offset);
  ContextProfile profile{spec, frame_offset, {}, {}};
  profile.left.resize(static_cast<std::size_t>(frames));
  profile.right.resize(static_cast<std::size_t>(frames));
  for (Index t = 0; t < frames; ++t) {
    const auto i = static_cast<std::size_t>(t);
    // Left context counts back from the query; right context is the part of
    // the query's chunk that is present, so every frame of a complete chunk
    // reports the same look-ahead.
    profile.left[i] = static_cast<long>(t - reach.first[i]) * spec.decimation;
    profile.right[i] =
        static_cast<long>(reach.last[i] - chunk_start(t, spec.chunk, frame_offset) + 1) *
        spec.decimation;
  }
  return profile;
}

bool is_lfe(const ContextProfile& profile, Index t) {
  if (t < 0 || t >= profile.frames())
    throw IndexError("is_lfe: frame " + std::to_string(t) + " outside [0, " +
                     std::to_string(profile.frames()) + ")");
  const auto i = static_cast<std::size_t>(t);
  return profile.left[i] == profile.spec.left_context_max() &&
         profile.right[i] == profile.spec.right_context_max();
}

bool is_long_form_segment(const ContextProfile& profile, const Segment& segment) {
  if (segment.t_e < segment.t_b) throw ContractError("is_long_form_segment: empty segment");
  if (segment.t_b < 0 || segment.t_e >= profile.frames())
    throw IndexError("is_long_form_segment: segment outside stream");
  for (Index t = segment.t_b; t <= segment.t_e; ++t)
    if (!is_lfe(profile, t)) return false;
  return true;
}

AcousticWindow required_window(const MaskSpec& spec, const Segment& segment,
                               std::optional<long> stream_acoustic_frames) {
  AcousticWindow w;
  w.begin = static_cast<long>(segment.t_b) * spec.decimation - spec.left_context_max();
  w.end = static_cast<long>(segment.t_e + 1) * spec.decimation + spec.right_context_max();
  w.clipped_begin = std::max(0L, w.begin);
  w.clipped_end = stream_acoustic_frames ? std::min(w.end, *stream_acoustic_frames) : w.end;
  w.clipped = w.clipped_begin != w.begin || w.clipped_end != w.end;
  return w;
}

}  // namespace lfad
