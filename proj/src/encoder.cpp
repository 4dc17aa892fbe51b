// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/encoder.hpp"

#include <cmath>

namespace lfad {

namespace {

constexpr Scalar kRopeBase = 10000.0;

Matrix rotate_matrix(const Matrix& x, int heads, Index first_position, int direction) {
  const Index dh = x.cols() / heads;
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const auto pos = static_cast<Scalar>(first_position + r);
    for (int h = 0; h < heads; ++h) {
      for (Index i = 0; i < dh / 2; ++i) {
        const Scalar freq = std::pow(kRopeBase, -2.0 * static_cast<Scalar>(i) / static_cast<Scalar>(dh));
        const Scalar angle = direction * pos * freq;
        const Scalar c = std::cos(angle);
        const Scalar s = std::sin(angle);
        const Index a = h * dh + 2 * i;
        const Scalar x0 = x(r, a);
        const Scalar x1 = x(r, a + 1);
        out(r, a) = x0 * c - x1 * s;
        out(r, a + 1) = x0 * s + x1 * c;
      }
    }
  }
  return out;
}

}  // namespace

void EncoderConfig::validate() const {
  mask.validate();
  if (width < 1 || heads < 1 || width % heads != 0)
    throw ConfigError("encoder width " + std::to_string(width) + " not divisible by heads " +
                      std::to_string(heads));
  if ((width / heads) % 2 != 0)
    throw ConfigError("encoder head dimension must be even for rotary positions");
  if (features < 1 || ff < 1) throw ConfigError("encoder features and ff must be positive");
  if (vocab < kFirstContentToken + 1)
    throw ConfigError("vocabulary must hold blank, BOS, EOS, _segE and at least one token");
  for (int m : chunk_sizes)
    if (m < 1) throw ConfigError("chunk sizes must be positive");
}

Tensor rotate_positions(const Tensor& x, int heads, Index first_position, int direction) {
  if (heads < 1 || x.cols() % heads != 0) throw ConfigError("rotary: width not divisible by heads");
  if ((x.cols() / heads) % 2 != 0)
    throw ConfigError("rotary: head dimension " + std::to_string(x.cols() / heads) + " is odd");
  return Tensor::from_op(rotate_matrix(x.value(), heads, first_position, direction), {x},
                         [heads, first_position, direction](detail::Node& self) {
                           detail::accumulate(*self.parents[0],
                                              rotate_matrix(self.grad, heads, first_position, -direction));
                         });
}

std::pair<Tensor, Tensor> rotary_positions(const Tensor& q, const Tensor& k, int heads,
                                           Index q_first_position, Index k_first_position) {
  return {rotate_positions(q, heads, q_first_position), rotate_positions(k, heads, k_first_position)};
}

Tensor shift_within_chunk(const Tensor& x, int chunk, Index frame_offset) {
  const Index frames = x.rows();
  std::vector<char> linked(static_cast<std::size_t>(frames), 0);
  Matrix out = Matrix::Zero(frames, x.cols());
  for (Index t = 0; t + 1 < frames; ++t) {
    if (chunk_start(t, chunk, frame_offset) == chunk_start(t + 1, chunk, frame_offset)) {
      linked[static_cast<std::size_t>(t)] = 1;
      out.row(t) = x.value().row(t + 1);
    }
  }
  return Tensor::from_op(std::move(out), {x}, [linked = std::move(linked)](detail::Node& self) {
    Matrix d = Matrix::Zero(self.grad.rows(), self.grad.cols());
    for (std::size_t t = 0; t < linked.size(); ++t)
      if (linked[t]) d.row(static_cast<Index>(t) + 1) = self.grad.row(static_cast<Index>(t));
    detail::accumulate(*self.parents[0], d);
  });
}

Encoder::Encoder(const EncoderConfig& config, ParameterStore& store, std::mt19937_64& rng)
    : config_(config) {
  config_.validate();
  const int r = config_.mask.decimation;
  const int d = config_.width;
  frontend_ = Linear(store, "encoder.frontend", static_cast<Index>(r) * config_.features, d, rng);
  for (int l = 0; l < config_.mask.layers; ++l) {
    const std::string p = "encoder.block" + std::to_string(l);
    Block b;
    b.attn_norm = LayerNorm(store, p + ".attn_norm", d);
    b.query = Linear(store, p + ".query", d, d, rng);
    b.key = Linear(store, p + ".key", d, d, rng);
    b.value = Linear(store, p + ".value", d, d, rng);
    b.out = Linear(store, p + ".out", d, d, rng);
    b.ff_norm = LayerNorm(store, p + ".ff_norm", d);
    b.ff = FeedForward(store, p + ".ff", d, config_.ff, rng);
    b.mix_norm = LayerNorm(store, p + ".mix_norm", d);
    const Scalar bound = 1.0 / std::sqrt(2.0);
    b.mix_self = store.add(p + ".mix_self", uniform_init(1, d, bound, rng));
    b.mix_next = store.add(p + ".mix_next", uniform_init(1, d, bound, rng));
    blocks_.push_back(std::move(b));
  }
  out_norm_ = LayerNorm(store, "encoder.out_norm", d);
}

MaskSpec Encoder::spec_for_chunk(int chunk) const {
  MaskSpec spec = config_.mask;
  if (chunk > 0) spec.chunk = chunk;
  return spec;
}

Tensor Encoder::frontend(const Tensor& features) const {
  const int r = config_.mask.decimation;
  if (features.cols() != config_.features)
    throw DimensionError("frontend: expected " + std::to_string(config_.features) +
                         " feature columns, got " + shape_string(features));
  if (features.rows() < r)
    throw InputError("frontend: " + std::to_string(features.rows()) +
                     " acoustic frames is shorter than the decimation factor " + std::to_string(r));
  const Index frames = features.rows() / r;
  Tensor used = features.rows() == frames * r ? features : slice_rows(features, 0, frames * r);
  return frontend_(reshape(used, frames, static_cast<Index>(r) * features.cols()));
}

Tensor Encoder::block(int layer, const Tensor& x, const MaskSpec& spec, Index frame_offset) const {
  const Block& b = blocks_.at(static_cast<std::size_t>(layer));
  const BoolMatrix mask = build_layer_mask(spec, x.rows(), layer, frame_offset);
  Tensor h = b.attn_norm(x);
  auto [q, k] = rotary_positions(b.query(h), b.key(h), config_.heads, frame_offset, frame_offset);
  Tensor y = x + b.out(multi_head_attention(q, k, b.value(h), config_.heads, mask));
  y = y + b.ff(b.ff_norm(y));
  Tensor m = b.mix_norm(y);
  return y + mul_row(m, b.mix_self) + mul_row(shift_within_chunk(m, spec.chunk, frame_offset), b.mix_next);
}

Tensor Encoder::forward(const Tensor& features, const MaskSpec& spec, Index frame_offset) const {
  if (spec.layers != config_.mask.layers || spec.decimation != config_.mask.decimation)
    throw ConfigError("encoder: mask spec does not match the model's layer count or decimation");
  Tensor x = frontend(features);
  for (int l = 0; l < spec.layers; ++l) x = block(l, x, spec, frame_offset);
  return finish(x);
}

EncodingSequence encode(const Encoder& encoder, const Matrix& features, const MaskSpec& spec,
                        Index frame_offset) {
  NoGradGuard no_grad;
  Tensor h = encoder.forward(Tensor(features), spec, frame_offset);
  return {h.value(), context_profile(spec, h.rows(), frame_offset), spec, frame_offset};
}

EncodingSequence encode(const Encoder& encoder, const AcousticStream& stream) {
  return encode(encoder, stream.features, encoder.config().mask, 0);
}

StreamingEncoder::StreamingEncoder(const Encoder& encoder, const MaskSpec& spec,
                                   std::optional<Index> cache_frames)
    : encoder_(encoder),
      spec_(spec),
      cache_limit_(cache_frames.value_or(spec.lookback)),
      cache_(static_cast<std::size_t>(spec.layers)) {}

Matrix StreamingEncoder::push(const Matrix& chunk_features) {
  const Index step = static_cast<Index>(spec_.chunk) * spec_.decimation;
  if (chunk_features.rows() == 0 || chunk_features.rows() % step != 0)
    throw InputError("streaming_encode: chunk of " + std::to_string(chunk_features.rows()) +
                     " acoustic frames is not a multiple of M*R = " + std::to_string(step));
  NoGradGuard no_grad;
  Tensor x = encoder_.frontend(Tensor(chunk_features));
  const Index fresh = x.rows();
  for (int l = 0; l < spec_.layers; ++l) {
    Matrix& cache = cache_[static_cast<std::size_t>(l)];
    const Index cached = cache.rows();
    Matrix full(cached + fresh, x.cols());
    if (cached) full.topRows(cached) = cache;
    full.bottomRows(fresh) = x.value();
    Tensor y = encoder_.block(l, Tensor(full), spec_, frames_done_ - cached);
    const Index keep = std::min(cache_limit_, full.rows());
    cache = full.bottomRows(keep);
    x = Tensor(y.value().bottomRows(fresh));
  }
  frames_done_ += fresh;
  return encoder_.finish(x).value();
}

EncodingSequence streaming_encode(const Encoder& encoder, std::span<const Matrix> chunks,
                                  const MaskSpec& spec, std::optional<Index> cache_frames) {
  StreamingEncoder stream(encoder, spec, cache_frames);
  std::vector<Matrix> parts;
  Index total = 0;
  for (const auto& c : chunks) {
    parts.push_back(stream.push(c));
    total += parts.back().rows();
  }
  Matrix enc(total, encoder.config().width);
  Index at = 0;
  for (const auto& p : parts) {
    enc.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return {std::move(enc), context_profile(spec, total, 0), spec, 0};
}

}  // namespace lfad
