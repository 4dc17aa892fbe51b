// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Training loop, evaluation matrix and the six-model ablation grid.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lfad/config.hpp"
#include "lfad/datapipe.hpp"
#include "lfad/decode.hpp"
#include "lfad/metrics.hpp"
#include "lfad/model.hpp"

namespace lfad {

// Which data-level transforms and decoder features a model trains with.
struct AblationFlags {
  bool sc = false;  // segment concatenation
  bool ac = false;  // acoustic-context expansion
  bool pe = false;  // segment positional codes in the decoder
  bool ss = false;  // _segE tags in the targets

  std::string describe() const;
  bool operator==(const AblationFlags&) const = default;
};

// Model 0 has every flag off, model 5 every flag on; 1..4 add SC, AC, PE.
AblationFlags ablation_flags(int model_id);

struct TrainOptions {
  long updates = 3000;
  int batch_size = 16;
  double lr = 3e-3;
  long warmup = 100;
  double final_lr_fraction = 0.1;  // cosine decay floor after warmup
  double clip = 5.0;
  int sc_max_duration = 75;  // encoding frames
  double ac_probability = 0.5;
  bool ac_silence = false;
  AblationFlags flags;
  std::uint64_t seed = 1;  // data order and transform sampling
  long log_every = 100;
};

struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainStats {
  long updates = 0;
  std::vector<double> losses;  // one entry per update
  std::uint64_t first_batch_hash = 0;
  double seconds = 0;
  long ctc_skipped = 0;
};

// Samples one training example from a recording under the given flags.
TrainingExample sample_example(const AcousticStream& recording, const TrainOptions& options, const MaskSpec& ac_spec,
                               std::mt19937_64& sc_rng, std::mt19937_64& ac_rng);

TrainStats train(Model& model, std::span<const AcousticStream> corpus, const TrainOptions& options,
                 std::ostream* log = nullptr);

// Fraction of teacher-forced target tokens predicted by argmax on isolated
// ground-truth segments.
double teacher_forced_accuracy(const Model& model, std::span<const AcousticStream> corpus, bool semantic);

struct EvalMatrix {
  std::vector<EncodingsMode> encodings{EncodingsMode::Sfe, EncodingsMode::Lfe};
  std::vector<DecodeMode> modes{DecodeMode::AR, DecodeMode::AD, DecodeMode::CAT};
  std::vector<SegmentationSource> segmentations{SegmentationSource::Oracle};
};

struct EvalCell {
  Condition condition;
  DecodeConfig decode;
  WerReport report;
};

// Two-pass decoding of every recording; the reference is the recording's
// full transcript.
WerReport evaluate_condition(const Model& model, std::span<const AcousticStream> corpus, const DecodeConfig& config);

std::vector<EvalCell> evaluate(const Model& model, std::span<const AcousticStream> corpus, const EvalMatrix& matrix,
                               const DecodeConfig& base, const std::string& model_name);

// Every setting the CLI understands, as one flat configuration.
struct RunConfig {
  SyntheticCorpusSpec corpus;
  int train_recordings = 200;
  int test_recordings = 30;
  ModelConfig model;
  TrainOptions train;
  DecodeConfig decode;

  static RunConfig from_config(const KeyValueConfig& config);
  KeyValueConfig to_config() const;
};

struct AblationSpec {
  std::vector<int> models{0, 1, 2, 3, 4, 5};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  ModelConfig model;
  TrainOptions train;
  EvalMatrix matrix;
  DecodeConfig decode;
  // Models whose flags include SS are additionally evaluated with semantic
  // segmentation; the others with simulated VAD.
  bool segmentation_cells = true;
};

struct AblationRun {
  int model_id = 0;
  std::uint64_t seed = 0;
  TrainStats stats;
  std::vector<EvalCell> cells;
  std::string error;
};

struct AblationReport {
  std::vector<AblationRun> runs;
  // Median over seeds of a cell's metric, or nullopt when no run produced it.
  std::optional<double> median(int model_id, const std::string& encodings, const std::string& mode,
                               const std::string& segmentation,
                               const std::function<double(const WerReport&)>& metric) const;
  std::string table(const AblationSpec& spec) const;
};

// Checkpoints go to run_dir when given; an existing checkpoint with a
// matching config hash is reused instead of retraining.
AblationReport ablate(const AblationSpec& spec, std::span<const AcousticStream> train_corpus,
                      std::span<const AcousticStream> test_corpus,
                      const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                      std::ostream* log = nullptr);

ModelConfig ablation_model_config(const ModelConfig& base, int model_id, std::uint64_t seed);
TrainOptions ablation_train_options(const TrainOptions& base, int model_id, std::uint64_t seed);

}  // namespace lfad
