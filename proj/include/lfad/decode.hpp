// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Second-pass decoding over segment encodings: attention rescoring of a CTC
// n-best list (AR), autoregressive attention beam search (AD) and joint
// CTC/attention beam search (CAT), plus the two-pass long-form pipeline.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfad/ctc.hpp"
#include "lfad/decoder.hpp"
#include "lfad/model.hpp"

namespace lfad {

enum class DecodeMode { AR, AD, CAT };
enum class SegmentationSource { Vad, Semantic, Oracle };
enum class EncodingsMode { Sfe, Lfe };

DecodeMode parse_decode_mode(const std::string& text);
SegmentationSource parse_segmentation(const std::string& text);
EncodingsMode parse_encodings(const std::string& text);
std::string to_string(DecodeMode mode);
std::string to_string(SegmentationSource source);
std::string to_string(EncodingsMode mode);

struct DecodeConfig {
  DecodeMode mode = DecodeMode::AD;
  int beam = 4;
  int max_tokens = 0;             // 0: four tokens per segment encoding frame
  double alpha = 0.3;             // CTC weight in CAT
  double rescore_weight = 0.3;    // CTC weight in AR
  int nbest = 8;                  // AR list size
  double length_penalty = 0.0;    // added per emitted token
  SegmentationSource segmentation = SegmentationSource::Semantic;
  EncodingsMode encodings = EncodingsMode::Lfe;
  double vad_threshold = 1.0;
  int vad_jitter = 2;
  std::uint64_t vad_seed = 0;

  void validate() const;
  int token_cap(Index segment_frames) const;
};

struct Hypothesis {
  std::vector<int> tokens;  // emitted tokens, EOS excluded
  Scalar attention = 0;     // sum of attention log-probs (EOS included when finished)
  Scalar ctc = 0;           // CTC prefix score, or full-sequence score when finished
  Scalar score = 0;
  bool finished = false;    // EOS emitted
  bool truncated = false;   // stopped by the token cap
};

// Forward-variable CTC prefix scoring over one segment lattice.
class CtcPrefixScorer {
 public:
  struct State {
    std::vector<Scalar> r_n;  // paths ending in the last label
    std::vector<Scalar> r_b;  // paths ending in blank
    int last = -1;
    Scalar prefix = 0;        // log P(prefix, any continuation)
  };

  explicit CtcPrefixScorer(const CtcOutput& lattice);
  State initial() const;
  // State after appending `token`; EOS returns the full-sequence score.
  State extend(const State& state, int token) const;

 private:
  const CtcOutput& lattice_;
};

// log of the summed probability of every label sequence starting with
// `prefix`, by direct path enumeration. Exponential in T; test oracle.
Scalar brute_force_prefix_probability(const CtcOutput& lattice, std::span<const int> prefix);

Hypothesis attention_beam_decode(const Decoder& decoder, const Matrix& memory, const DecodeConfig& config);

Hypothesis cat_beam_decode(const Decoder& decoder, const Matrix& memory, const CtcOutput& lattice,
                           const DecodeConfig& config);

struct ScoredSequence {
  std::vector<int> tokens;
  Scalar ctc = 0;
};

// CTC prefix beam search; returns up to `size` label sequences by full-sequence score.
std::vector<ScoredSequence> ctc_nbest(const CtcOutput& lattice, int beam, int size);

// Scores each candidate by weight * ctc + (1 - weight) * teacher-forced attention
// log-probability and returns the best index.
std::size_t attention_rescore(const Decoder& decoder, const Matrix& memory,
                              std::span<const ScoredSequence> nbest, double weight);

// Decodes one segment with the configured mode. `memory` already carries
// the segment positional codes.
Hypothesis decode_segment(const Decoder& decoder, const Matrix& memory, const CtcOutput& lattice,
                          const DecodeConfig& config);

struct SegmentResult {
  Segment segment;
  Hypothesis hypothesis;
  std::string error;  // non-empty when the segment failed and was skipped
};

struct TwoPassResult {
  std::vector<SegmentResult> segments;
  std::vector<int> first_pass;   // greedy CTC tokens
  int dropped_segments = 0;      // degenerate semantic segments
  std::vector<int> transcript() const;  // concatenated second-pass tokens
};

// Encodes the stream once, segments it and decodes every segment. With LFE
// encodings each segment is a slice of the full-stream encodings; with SFE
// the segment's audio is re-encoded in isolation.
TwoPassResult two_pass_decode(const Model& model, const AcousticStream& stream, const DecodeConfig& config);

}  // namespace lfad
