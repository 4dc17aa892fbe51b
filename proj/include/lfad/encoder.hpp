// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Context-limited acoustic encoder: strided linear frontend followed by
// blocks of masked rotary self-attention, feed-forward and chunk-local mixing.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lfad/masking.hpp"
#include "lfad/nn.hpp"
#include "lfad/segment.hpp"
#include "lfad/tensor.hpp"

namespace lfad {

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EncoderConfig {
  MaskSpec mask;                       // M is the chunk used at inference
  std::vector<int> chunk_sizes{2, 8};  // sampled per batch during training
  int width = 32;
  int heads = 4;
  int ff = 64;
  int features = 8;
  int vocab = 16;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AcousticStream {
  std::string id;
  Matrix features;  // T' x F
  std::vector<Segment> segments;
};

struct EncodingSequence {
  Matrix encodings;  // T x d
  ContextProfile profile;
  MaskSpec spec;
  Index frame_offset = 0;

  Index frames() const { return encodings.rows(); }
};

// Rotates consecutive column pairs of each head by angle position * freq,
// where row r sits at absolute position first_position + r. `direction` -1
// applies the inverse rotation.
Tensor rotate_positions(const Tensor& x, int heads, Index first_position, int direction = 1);

std::pair<Tensor, Tensor> rotary_positions(const Tensor& q, const Tensor& k, int heads,
                                           Index q_first_position, Index k_first_position);

// y[t] = x[t + 1] when both frames share a chunk, otherwise zero.
Tensor shift_within_chunk(const Tensor& x, int chunk, Index frame_offset);

class Encoder {
 public:
  Encoder(const EncoderConfig& config, ParameterStore& store, std::mt19937_64& rng);

  const EncoderConfig& config() const { return config_; }

  // T' x F features to floor(T'/R) x d; kernel and stride both equal R.
  Tensor frontend(const Tensor& features) const;
  Tensor block(int layer, const Tensor& x, const MaskSpec& spec, Index frame_offset) const;
  Tensor finish(const Tensor& x) const { return out_norm_(x); }
  Tensor forward(const Tensor& features, const MaskSpec& spec, Index frame_offset = 0) const;

  // The mask geometry with chunk size M (0 keeps the configured chunk).
  MaskSpec spec_for_chunk(int chunk) const;

 private:
  struct Block {
    LayerNorm attn_norm;
    Linear query;
    Linear key;
    Linear value;
    Linear out;
    LayerNorm ff_norm;
    FeedForward ff;
    LayerNorm mix_norm;
    Tensor mix_self;
    Tensor mix_next;
  };

  EncoderConfig config_;
  Linear frontend_;
  std::vector<Block> blocks_;
  LayerNorm out_norm_;
};

EncodingSequence encode(const Encoder& encoder, const Matrix& features, const MaskSpec& spec,
                        Index frame_offset = 0);
EncodingSequence encode(const Encoder& encoder, const AcousticStream& stream);

// Chunk-by-chunk evaluation that keeps the most recent layer inputs as left
// context. Chunk lengths must be multiples of M * R acoustic frames.
class StreamingEncoder {
 public:
  StreamingEncoder(const Encoder& encoder, const MaskSpec& spec,
                   std::optional<Index> cache_frames = std::nullopt);

  Matrix push(const Matrix& chunk_features);
  Index frames_done() const { return frames_done_; }

 private:
  const Encoder& encoder_;
  MaskSpec spec_;
  Index cache_limit_;
  std::vector<Matrix> cache_;
  Index frames_done_ = 0;
};

EncodingSequence streaming_encode(const Encoder& encoder, std::span<const Matrix> chunks,
                                  const MaskSpec& spec,
                                  std::optional<Index> cache_frames = std::nullopt);

}  // namespace lfad
