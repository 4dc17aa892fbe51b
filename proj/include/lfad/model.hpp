// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Joint CTC / attention model: a shared encoder feeding a CTC projection and
// the attention decoder.

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>

#include "lfad/config.hpp"
#include "lfad/ctc.hpp"
#include "lfad/datapipe.hpp"
#include "lfad/decoder.hpp"
#include "lfad/encoder.hpp"

namespace lfad {

struct VersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  double ctc_weight = 0.3;  // lambda in lambda * ctc + (1 - lambda) * aed
  std::uint64_t seed = 1;

  void validate() const;
  KeyValueConfig to_config() const;
  static ModelConfig from_config(const KeyValueConfig& config);
  // Digest of everything that shapes parameters or inference behaviour.
  std::uint64_t architecture_hash() const;
};

struct JointLoss {
  Tensor total;
  Scalar ctc = 0;  // per target token
  Scalar aed = 0;  // per target token
  int ctc_skipped = 0;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  Decoder& decoder() { return decoder_; }

  // Inference encoding; chunk 0 uses the configured M. Every call is counted.
  EncodingSequence encode(const Matrix& features, int chunk = 0, Index frame_offset = 0) const;
  long encoder_calls() const { return encoder_calls_.load(); }
  void reset_encoder_calls() { encoder_calls_ = 0; }

  Tensor ctc_log_probs(const Tensor& encodings) const;
  CtcOutput ctc(const Matrix& encodings) const;

  // Training objective on one example: encode X_E, keep the valid window,
  // then CTC and teacher-forced cross-entropy on the segment encodings.
  JointLoss loss(const TrainingExample& example, int chunk) const;
  JointLoss batch_loss(const Batch& batch) const;

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<Model> load(const std::filesystem::path& path);
  // Refuses checkpoints built for a different architecture.
  static std::unique_ptr<Model> load(const std::filesystem::path& path, std::uint64_t expected_hash);

 private:
  ModelConfig config_;
  ParameterStore store_;
  std::mt19937_64 init_rng_;
  Encoder encoder_;
  Linear ctc_head_;
  Decoder decoder_;
  mutable std::atomic<long> encoder_calls_{0};
};

}  // namespace lfad
