// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Autoregressive attention decoder over a segment of acoustic encodings.
//
// Cross-attention alone cannot tell memory rows apart by order. When segment
// positional codes are enabled, row i of every decoded segment receives code
// i of a shared table before the key and value projections.

#pragma once

#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "lfad/nn.hpp"
#include "lfad/segment.hpp"
#include "lfad/tensor.hpp"

namespace lfad {

enum class PeKind { Learned, Sinusoidal };

struct DecoderConfig {
  int blocks = 3;
  int width = 32;
  int heads = 4;
  int ff = 64;
  int vocab = 16;
  int p_max = 256;
  PeKind pe_kind = PeKind::Learned;
  bool pe_enabled = true;

  void validate() const;
};

struct SegmentTooLongError : std::length_error {
  using std::length_error::length_error;
};

struct SegmentPE {
  Tensor table;  // P_max x d
  // Receives the table rows looked up by each injection.
  std::function<void(std::span<const Index>)> observer;

  Index p_max() const { return table.rows(); }
};

Tensor inject_segment_pe(const Tensor& h_seg, const SegmentPE& pe, bool enabled);

struct CrossAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear out;
  int heads = 1;
};

// Full (unmasked) multi-head attention from decoder queries to a memory.
Tensor cross_attention(const CrossAttention& attn, const Tensor& queries, const Tensor& memory);

// Rows pos_begin .. pos_begin+rows-1 of the standard sinusoidal table.
Matrix sinusoidal_positions(Index rows, Index width, Index pos_begin = 0);

struct DecoderState {
  std::vector<Matrix> self_keys;  // per block, u x d
  std::vector<Matrix> self_values;
  std::vector<Matrix> cross_keys;  // per block, S x d
  std::vector<Matrix> cross_values;
  std::vector<int> tokens;  // previous tokens fed so far, BOS first

  Index steps() const { return static_cast<Index>(tokens.size()); }
};

class Decoder {
 public:
  Decoder(const DecoderConfig& config, ParameterStore& store, std::mt19937_64& rng);

  const DecoderConfig& config() const { return config_; }
  const SegmentPE& segment_pe() const { return pe_; }
  SegmentPE& segment_pe() { return pe_; }
  const CrossAttention& cross(int block) const { return blocks_.at(static_cast<std::size_t>(block)).cross; }

  // Segment encodings with the positional codes applied when enabled.
  Tensor prepare_memory(const Tensor& h_seg) const {
    return inject_segment_pe(h_seg, pe_, config_.pe_enabled);
  }

  // Teacher-forced logits, one row per input token (inputs start with BOS).
  Tensor forward(const Tensor& memory, std::span<const int> inputs) const;

  DecoderState start(const Matrix& memory) const;
  // Feeds prev_token and returns the next-token logits; extends the cache.
  RowVector step(DecoderState& state, int prev_token) const;

 private:
  struct Block {
    LayerNorm self_norm;
    Linear query;
    Linear key;
    Linear value;
    Linear out;
    LayerNorm cross_norm;
    CrossAttention cross;
    LayerNorm ff_norm;
    FeedForward ff;
  };

  Tensor embed(std::span<const int> tokens, Index pos_begin) const;

  DecoderConfig config_;
  Tensor embedding_;
  SegmentPE pe_;
  std::vector<Block> blocks_;
  LayerNorm out_norm_;
  Linear project_;
};

// Teacher-forced cross-entropy; targets end with EOS.
Tensor aed_loss(const Decoder& decoder, const Tensor& memory, std::span<const int> targets);

// Log-probability of `tokens` followed by EOS under teacher forcing.
Scalar sequence_log_prob(const Decoder& decoder, const Matrix& memory, std::span<const int> tokens);

}  // namespace lfad
