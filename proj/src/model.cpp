// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/model.hpp"

#include <string>

namespace lfad {

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.width != decoder.width)
    throw ConfigError("encoder width " + std::to_string(encoder.width) + " must equal decoder width " +
                      std::to_string(decoder.width));
  if (encoder.vocab != decoder.vocab)
    throw ConfigError("CTC and attention heads must share one vocabulary");
  if (ctc_weight < 0 || ctc_weight > 1) throw ConfigError("ctc_weight must lie in [0, 1]");
}

KeyValueConfig ModelConfig::to_config() const {
  KeyValueConfig c;
  c.set("mask.layers", std::to_string(encoder.mask.layers));
  c.set("mask.lookback", std::to_string(encoder.mask.lookback));
  c.set("mask.chunk", std::to_string(encoder.mask.chunk));
  c.set("mask.decimation", std::to_string(encoder.mask.decimation));
  c.set("encoder.chunk_sizes", join_ints(encoder.chunk_sizes));
  c.set("encoder.width", std::to_string(encoder.width));
  c.set("encoder.heads", std::to_string(encoder.heads));
  c.set("encoder.ff", std::to_string(encoder.ff));
  c.set("features", std::to_string(encoder.features));
  c.set("vocab", std::to_string(encoder.vocab));
  c.set("decoder.blocks", std::to_string(decoder.blocks));
  c.set("decoder.heads", std::to_string(decoder.heads));
  c.set("decoder.ff", std::to_string(decoder.ff));
  c.set("decoder.p_max", std::to_string(decoder.p_max));
  c.set("decoder.pe_kind", decoder.pe_kind == PeKind::Learned ? "learned" : "sinusoidal");
  c.set("decoder.pe", decoder.pe_enabled ? "true" : "false");
  c.set("loss.ctc_weight", std::to_string(ctc_weight));
  c.set("model.seed", std::to_string(seed));
  return c;
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& c) {
  ModelConfig m;
  m.encoder.mask.layers = c.get_int("mask.layers", m.encoder.mask.layers);
  m.encoder.mask.lookback = c.get_int("mask.lookback", m.encoder.mask.lookback);
  m.encoder.mask.chunk = c.get_int("mask.chunk", m.encoder.mask.chunk);
  m.encoder.mask.decimation = c.get_int("mask.decimation", m.encoder.mask.decimation);
  m.encoder.chunk_sizes = c.get_ints("encoder.chunk_sizes", m.encoder.chunk_sizes);
  m.encoder.width = c.get_int("encoder.width", m.encoder.width);
  m.encoder.heads = c.get_int("encoder.heads", m.encoder.heads);
  m.encoder.ff = c.get_int("encoder.ff", m.encoder.ff);
  m.encoder.features = c.get_int("features", m.encoder.features);
  m.encoder.vocab = c.get_int("vocab", m.encoder.vocab);
  m.decoder.width = m.encoder.width;
  m.decoder.vocab = m.encoder.vocab;
  m.decoder.blocks = c.get_int("decoder.blocks", m.decoder.blocks);
  m.decoder.heads = c.get_int("decoder.heads", m.decoder.heads);
  m.decoder.ff = c.get_int("decoder.ff", m.decoder.ff);
  m.decoder.p_max = c.get_int("decoder.p_max", m.decoder.p_max);
  const std::string kind = c.get("decoder.pe_kind", "learned");
  if (kind == "learned")
    m.decoder.pe_kind = PeKind::Learned;
  else if (kind == "sinusoidal")
    m.decoder.pe_kind = PeKind::Sinusoidal;
  else
    throw ConfigError("decoder.pe_kind must be learned or sinusoidal, got '" + kind + "'");
  m.decoder.pe_enabled = c.get_bool("decoder.pe", m.decoder.pe_enabled);
  m.ctc_weight = c.get_double("loss.ctc_weight", m.ctc_weight);
  m.seed = c.get_u64("model.seed", m.seed);
  m.encoder.seed = m.seed;
  m.validate();
  return m;
}

std::uint64_t ModelConfig::architecture_hash() const {
  KeyValueConfig c = to_config();
  KeyValueConfig arch;
  for (const auto& [k, v] : c.entries())
    if (k != "loss.ctc_weight" && k != "model.seed" && k != "encoder.chunk_sizes") arch.set(k, v);
  return arch.hash();
}

Model::Model(const ModelConfig& config)
    : config_((config.validate(), config)),
      init_rng_(config.seed),
      encoder_(config_.encoder, store_, init_rng_),
      ctc_head_(store_, "ctc.project", config_.encoder.width, config_.encoder.vocab, init_rng_),
      decoder_(config_.decoder, store_, init_rng_) {}

EncodingSequence Model::encode(const Matrix& features, int chunk, Index frame_offset) const {
  ++encoder_calls_;
  return lfad::encode(encoder_, features, encoder_.spec_for_chunk(chunk), frame_offset);
}

Tensor Model::ctc_log_probs(const Tensor& encodings) const { return log_softmax(ctc_head_(encodings)); }

CtcOutput Model::ctc(const Matrix& encodings) const {
  NoGradGuard no_grad;
  CtcOutput out;
  out.log_probs = ctc_log_probs(Tensor(encodings)).value();
  return out;
}

namespace {

struct LossInput {
  const Matrix& features;
  std::span<const int> targets;
  Index valid_begin;
  Index valid_frames;
  Index frame_offset;
};

}  // namespace

static JointLoss joint_loss(const Encoder& encoder, const Linear& ctc_head, const Decoder& decoder,
                            double lambda, const LossInput& in, int chunk) {
  const MaskSpec spec = encoder.spec_for_chunk(chunk);
  const Tensor enc = encoder.forward(Tensor(in.features), spec, in.frame_offset);
  if (in.valid_begin < 0 || in.valid_frames < 1 || in.valid_begin + in.valid_frames > enc.rows())
    throw ContractError("loss: valid window [" + std::to_string(in.valid_begin) + ", +" +
                        std::to_string(in.valid_frames) + ") outside " + std::to_string(enc.rows()) +
                        " encodings");
  const Tensor seg = slice_rows(enc, in.valid_begin, in.valid_frames);

  std::vector<int> ctc_targets(in.targets.begin(), in.targets.end());
  if (!ctc_targets.empty() && ctc_targets.back() == kEos) ctc_targets.pop_back();
  const auto units = static_cast<Scalar>(std::max<std::size_t>(1, ctc_targets.size()));

  JointLoss out;
  const Tensor aed = aed_loss(decoder, decoder.prepare_memory(seg), in.targets);
  out.aed = aed.item();
  try {
    const Tensor ctc = scale(ctc_loss(log_softmax(ctc_head(seg)), ctc_targets), 1.0 / units);
    out.ctc = ctc.item();
    out.total = scale(ctc, lambda) + scale(aed, 1.0 - lambda);
  } catch (const InfeasibleAlignmentError&) {
    out.ctc_skipped = 1;
    out.total = scale(aed, 1.0 - lambda);
  }
  return out;
}

JointLoss Model::loss(const TrainingExample& example, int chunk) const {
  return joint_loss(encoder_, ctc_head_, decoder_, config_.ctc_weight,
                    {example.features, example.targets, example.valid_frame_begin(),
                     example.valid_frame_count(), example.frame_offset},
                    chunk);
}

JointLoss Model::batch_loss(const Batch& batch) const {
  if (batch.examples.empty()) throw ContractError("batch_loss: empty batch");
  JointLoss out;
  std::vector<Tensor> parts;
  for (std::size_t i = 0; i < batch.examples.size(); ++i) {
    const TrainingExample& ex = batch.examples[i];
    const Matrix features = batch.padded_features[i].topRows(batch.feature_lengths[i]);
    const std::span<const int> targets(batch.padded_targets[i].data(),
                                       static_cast<std::size_t>(batch.target_lengths[i]));
    JointLoss l = joint_loss(encoder_, ctc_head_, decoder_, config_.ctc_weight,
                             {features, targets, ex.valid_frame_begin(), ex.valid_frame_count(), ex.frame_offset},
                             batch.chunk);
    out.ctc += l.ctc;
    out.aed += l.aed;
    out.ctc_skipped += l.ctc_skipped;
    parts.push_back(l.total);
  }
  const auto n = static_cast<Scalar>(parts.size());
  Tensor total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) total = total + parts[i];
  out.total = scale(total, 1.0 / n);
  out.ctc /= n;
  out.aed /= n;
  return out;
}

void Model::save(const std::filesystem::path& path) const {
  save_checkpoint(path, snapshot(store_, config_.architecture_hash(), config_.seed, config_.to_config().canonical()));
}

std::unique_ptr<Model> Model::load(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  const ModelConfig config = ModelConfig::from_config(KeyValueConfig::parse(ckpt.config_text));
  if (config.architecture_hash() != ckpt.config_hash)
    throw VersionError("checkpoint " + path.string() + ": stored config does not match its hash");
  auto model = std::make_unique<Model>(config);
  restore(model->parameters(), ckpt);
  return model;
}

std::unique_ptr<Model> Model::load(const std::filesystem::path& path, std::uint64_t expected_hash) {
  auto model = load(path);
  if (model->config().architecture_hash() != expected_hash)
    throw VersionError("checkpoint " + path.string() + " was built for a different architecture");
  return model;
}

}  // namespace lfad
