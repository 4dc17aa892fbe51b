// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/decoder.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace lfad {

void DecoderConfig::validate() const {
  if (blocks < 1) throw ConfigError("decoder needs at least one block");
  if (width < 1 || heads < 1 || width % heads != 0)
    throw ConfigError("decoder width " + std::to_string(width) + " not divisible by heads " +
                      std::to_string(heads));
  if (ff < 1 || p_max < 1) throw ConfigError("decoder ff and p_max must be positive");
  if (vocab < kFirstContentToken + 1)
    throw ConfigError("vocabulary must hold blank, BOS, EOS, _segE and at least one token");
}

Matrix sinusoidal_positions(Index rows, Index width, Index pos_begin) {
  Matrix table(rows, width);
  for (Index r = 0; r < rows; ++r) {
    const auto pos = static_cast<Scalar>(pos_begin + r);
    for (Index c = 0; c < width; ++c) {
      const Scalar rate =
          std::pow(10000.0, -static_cast<Scalar>(2 * (c / 2)) / static_cast<Scalar>(width));
      table(r, c) = (c % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return table;
}

Tensor inject_segment_pe(const Tensor& h_seg, const SegmentPE& pe, bool enabled) {
  if (!enabled) return h_seg;
  const Index rows = h_seg.rows();
  if (rows > pe.p_max())
    throw SegmentTooLongError("segment of " + std::to_string(rows) +
                              " encodings exceeds the positional table size P_max = " +
                              std::to_string(pe.p_max()));
  if (pe.observer) {
    std::vector<Index> indices(static_cast<std::size_t>(rows));
    std::iota(indices.begin(), indices.end(), Index{0});
    pe.observer(indices);
  }
  return h_seg + slice_rows(pe.table, 0, rows);
}

Tensor cross_attention(const CrossAttention& attn, const Tensor& queries, const Tensor& memory) {
  if (memory.rows() == 0) throw DimensionError("cross_attention: empty memory (S = 0)");
  if (queries.cols() != memory.cols())
    throw DimensionError("cross_attention: query width " + shape_string(queries) +
                         " vs memory width " + shape_string(memory));
  return attn.out(
      multi_head_attention(attn.query(queries), attn.key(memory), attn.value(memory), attn.heads));
}

Decoder::Decoder(const DecoderConfig& config, ParameterStore& store, std::mt19937_64& rng)
    : config_(config) {
  config_.validate();
  const int d = config_.width;
  embedding_ = store.add("decoder.embedding", normal_init(config_.vocab, d, 0.02, rng));
  if (config_.pe_kind == PeKind::Learned)
    pe_.table = store.add("decoder.segment_pe", normal_init(config_.p_max, d, 0.02, rng));
  else
    pe_.table = Tensor(sinusoidal_positions(config_.p_max, d));
  for (int b = 0; b < config_.blocks; ++b) {
    const std::string p = "decoder.block" + std::to_string(b);
    Block blk;
    blk.self_norm = LayerNorm(store, p + ".self_norm", d);
    blk.query = Linear(store, p + ".query", d, d, rng);
    blk.key = Linear(store, p + ".key", d, d, rng);
    blk.value = Linear(store, p + ".value", d, d, rng);
    blk.out = Linear(store, p + ".out", d, d, rng);
    blk.cross_norm = LayerNorm(store, p + ".cross_norm", d);
    blk.cross.query = Linear(store, p + ".cross.query", d, d, rng);
    blk.cross.key = Linear(store, p + ".cross.key", d, d, rng);
    blk.cross.value = Linear(store, p + ".cross.value", d, d, rng);
    blk.cross.out = Linear(store, p + ".cross.out", d, d, rng);
    blk.cross.heads = config_.heads;
    blk.ff_norm = LayerNorm(store, p + ".ff_norm", d);
    blk.ff = FeedForward(store, p + ".ff", d, config_.ff, rng);
    blocks_.push_back(std::move(blk));
  }
  out_norm_ = LayerNorm(store, "decoder.out_norm", d);
  project_ = Linear(store, "decoder.project", d, config_.vocab, rng);
}

Tensor Decoder::embed(std::span<const int> tokens, Index pos_begin) const {
  const Scalar factor = std::sqrt(static_cast<Scalar>(config_.width));
  Tensor positions(sinusoidal_positions(static_cast<Index>(tokens.size()), config_.width, pos_begin));
  return scale(gather_rows(embedding_, tokens), factor) + positions;
}

Tensor Decoder::forward(const Tensor& memory, std::span<const int> inputs) const {
  if (inputs.empty()) throw ContractError("decoder: no input tokens");
  const auto u = static_cast<Index>(inputs.size());
  BoolMatrix causal(u, u);
  for (Index r = 0; r < u; ++r)
    for (Index c = 0; c < u; ++c) causal(r, c) = c <= r;

  Tensor x = embed(inputs, 0);
  for (const Block& b : blocks_) {
    Tensor h = b.self_norm(x);
    x = x + b.out(multi_head_attention(b.query(h), b.key(h), b.value(h), config_.heads, causal));
    x = x + cross_attention(b.cross, b.cross_norm(x), memory);
    x = x + b.ff(b.ff_norm(x));
  }
  return project_(out_norm_(x));
}

DecoderState Decoder::start(const Matrix& memory) const {
  NoGradGuard no_grad;
  if (memory.rows() == 0) throw DimensionError("decoder: empty memory (S = 0)");
  DecoderState state;
  Tensor mem(memory);
  for (const Block& b : blocks_) {
    state.self_keys.emplace_back(0, config_.width);
    state.self_values.emplace_back(0, config_.width);
    state.cross_keys.push_back(b.cross.key(mem).value());
    state.cross_values.push_back(b.cross.value(mem).value());
  }
  return state;
}

RowVector Decoder::step(DecoderState& state, int prev_token) const {
  NoGradGuard no_grad;
  const int token[1] = {prev_token};
  Tensor x = embed(token, state.steps());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    Tensor h = b.self_norm(x);
    Matrix& keys = state.self_keys[i];
    Matrix& values = state.self_values[i];
    keys.conservativeResize(keys.rows() + 1, Eigen::NoChange);
    values.conservativeResize(values.rows() + 1, Eigen::NoChange);
    keys.bottomRows(1) = b.key(h).value();
    values.bottomRows(1) = b.value(h).value();
    x = x + b.out(multi_head_attention(b.query(h), Tensor(keys), Tensor(values), config_.heads));
    Tensor c = b.cross.query(b.cross_norm(x));
    x = x + b.cross.out(multi_head_attention(c, Tensor(state.cross_keys[i]),
                                             Tensor(state.cross_values[i]), config_.heads));
    x = x + b.ff(b.ff_norm(x));
  }
  state.tokens.push_back(prev_token);
  return project_(out_norm_(x)).value().row(0);
}

Tensor aed_loss(const Decoder& decoder, const Tensor& memory, std::span<const int> targets) {
  if (targets.empty()) throw ContractError("aed_loss: empty target sequence");
  std::vector<int> inputs{kBos};
  inputs.insert(inputs.end(), targets.begin(), targets.end() - 1);
  return cross_entropy(decoder.forward(memory, inputs), targets);
}

Scalar sequence_log_prob(const Decoder& decoder, const Matrix& memory, std::span<const int> tokens) {
  NoGradGuard no_grad;
  std::vector<int> targets(tokens.begin(), tokens.end());
  targets.push_back(kEos);
  const Tensor loss = aed_loss(decoder, Tensor(memory), targets);
  return -loss.item() * static_cast<Scalar>(targets.size());
}

}  // namespace lfad
