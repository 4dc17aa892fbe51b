// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic long-form corpus and the data-level training transforms:
// segment concatenation, acoustic-context expansion and semantic tagging.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lfad/encoder.hpp"
#include "lfad/masking.hpp"
#include "lfad/segment.hpp"

namespace lfad {

// "Speech" is a sequence of sentences; each token is rendered as a run of
// noisy copies of a token-specific prototype, sentences are separated by
// low-energy gaps. Sentence spans start on the R-frame grid.
struct SyntheticCorpusSpec {
  int content_tokens = 12;
  int feature_dim = 8;
  int decimation = 2;
  int frames_per_token_min = 3;  // acoustic frames
  int frames_per_token_max = 6;
  double noise = 0.3;
  double silence_level = 0.05;
  int gap_min = 2;  // acoustic frames
  int gap_max = 6;
  int sentences_min = 4;
  int sentences_max = 8;
  int tokens_min = 3;
  int tokens_max = 6;
  std::uint64_t prototype_seed = 1234;
  std::uint64_t seed = 7;

  void validate() const;
};

// One prototype row per content token; depends only on prototype_seed.
Matrix token_prototypes(const SyntheticCorpusSpec& spec);

std::vector<AcousticStream> generate_corpus(const SyntheticCorpusSpec& spec, int recordings);

struct TrainingExample {
  std::string source_id;
  int first_segment = 0;
  int segment_count = 1;
  Matrix features;          // possibly expanded X_E, acoustic frames
  long valid_begin = 0;     // [valid_begin, valid_end) marks X^s inside features
  long valid_end = 0;
  long source_begin = 0;    // acoustic offset of features row 0 in the recording
  Index frame_offset = 0;   // chunk-grid phase used when encoding
  int decimation = 1;
  std::vector<Segment> segments;  // sentence spans, encoding frames relative to row 0
  std::vector<int> targets;  // tagged transcript ending in EOS
  bool sc_applied = false;
  bool sc_clamped = false;
  bool ac_applied = false;
  bool ac_clipped = false;

  Index valid_frame_begin() const { return valid_begin / decimation; }
  Index valid_frame_count() const { return (valid_end - valid_begin) / decimation; }
  std::vector<int> ctc_targets() const;  // targets without EOS
  std::vector<std::vector<int>> sentences() const;
};

// Appends _segE after every sentence when `semantic` is set; always ends with EOS.
std::vector<int> tag_semantic(std::span<const std::vector<int>> sentences, bool semantic);

// Splits a tagged target sequence at _segE back into sentences.
std::vector<std::vector<int>> split_semantic(std::span<const int> targets);

// A single ground-truth segment cut out of its recording (no context).
TrainingExample single_segment_example(const AcousticStream& recording, int segment, int decimation,
                                       bool semantic);

// A random run of consecutive segments spanning at most max_duration encoding
// frames, including the audio between them.
TrainingExample transform_sc(const AcousticStream& recording, int max_duration, int decimation,
                             bool semantic, std::mt19937_64& rng);

// With probability p_apply, prepends up to C_L^max and appends up to C_R^max
// acoustic frames of the true neighbouring audio; the valid window keeps
// pointing at the original span. `silence` pads with zero frames instead.
TrainingExample transform_ac(const TrainingExample& example, const AcousticStream& recording,
                             const MaskSpec& spec, double p_apply, std::mt19937_64& rng,
                             bool silence = false);

// Energy-threshold segmentation in encoding frames with each boundary
// displaced by a uniform offset in [-jitter, jitter].
std::vector<Segment> simulated_vad(const AcousticStream& stream, double threshold, int jitter,
                                   std::uint64_t jitter_seed, int decimation);

struct Batch {
  int chunk = 0;
  std::vector<TrainingExample> examples;
  std::vector<Matrix> padded_features;  // every entry padded to the longest example
  std::vector<Index> feature_lengths;
  std::vector<std::vector<int>> padded_targets;  // padded with kTargetPad
  std::vector<Index> target_lengths;
};

inline constexpr int kTargetPad = -1;

std::vector<Batch> make_batches(std::vector<TrainingExample> examples, int batch_size,
                                std::span<const int> chunk_sizes, std::uint64_t seed,
                                bool shuffle = true);

// Order-sensitive FNV-1a digest of the sources feeding a batch.
std::uint64_t batch_source_hash(const Batch& batch);

// JSON-lines: {"id", "features": [[...]], "segments": [{"t_b", "t_e", "tokens"}]}
void write_corpus(const std::filesystem::path& path, std::span<const AcousticStream> recordings);
std::vector<AcousticStream> read_corpus(const std::filesystem::path& path);
std::string corpus_line(const AcousticStream& recording);
AcousticStream example_as_stream(const TrainingExample& example);

}  // namespace lfad
