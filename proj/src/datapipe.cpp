// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/datapipe.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace lfad {
namespace {

long align_up(long x, int r) { return (x + r - 1) / r * r; }

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void SyntheticCorpusSpec::validate() const {
  if (content_tokens < 1) throw ConfigError("corpus: need at least one content token");
  if (feature_dim < 1 || decimation < 1) throw ConfigError("corpus: feature_dim and decimation must be positive");
  if (frames_per_token_min < 1 || frames_per_token_max < frames_per_token_min)
    throw ConfigError("corpus: bad frames-per-token range");
  if (gap_min < 0 || gap_max < gap_min) throw ConfigError("corpus: bad gap range");
  if (sentences_min < 1 || sentences_max < sentences_min) throw ConfigError("corpus: bad sentence range");
  if (tokens_min < 1 || tokens_max < tokens_min) throw ConfigError("corpus: bad token range");
  if (content_tokens < 2 && tokens_max > 1)
    throw ConfigError("corpus: repeats are disallowed, so multi-token sentences need two tokens");
  if (noise < 0 || silence_level < 0) throw ConfigError("corpus: noise levels must be non-negative");
}

Matrix token_prototypes(const SyntheticCorpusSpec& spec) {
  std::mt19937_64 rng(spec.prototype_seed);
  Matrix protos = normal_init(spec.content_tokens, spec.feature_dim, 1.0, rng);
  // Equal energy keeps every token well above the silence floor.
  const Scalar target = std::sqrt(static_cast<Scalar>(spec.feature_dim));
  for (Index i = 0; i < protos.rows(); ++i) protos.row(i) *= target / protos.row(i).norm();
  return protos;
}

std::vector<AcousticStream> generate_corpus(const SyntheticCorpusSpec& spec, int recordings) {
  spec.validate();
  if (recordings < 1) throw ContractError("generate_corpus: need at least one recording");
  const Matrix protos = token_prototypes(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  const int r = spec.decimation;
  const int f = spec.feature_dim;

  std::vector<AcousticStream> out;
  for (int n = 0; n < recordings; ++n) {
    AcousticStream rec;
    char id[32];
    std::snprintf(id, sizeof id, "rec%05d", n);
    rec.id = id;
    std::vector<RowVector> rows;
    auto silence_until = [&](long end) {
      while (static_cast<long>(rows.size()) < end) {
        RowVector v(f);
        for (int c = 0; c < f; ++c) v(c) = spec.silence_level * gauss(rng);
        rows.push_back(std::move(v));
      }
    };
    silence_until(align_up(uniform_int(rng, spec.gap_min, spec.gap_max), r));
    const int sentences = uniform_int(rng, spec.sentences_min, spec.sentences_max);
    for (int s = 0; s < sentences; ++s) {
      const long begin = static_cast<long>(rows.size());
      Segment seg;
      const int tokens = uniform_int(rng, spec.tokens_min, spec.tokens_max);
      int prev = -1;
      for (int k = 0; k < tokens; ++k) {
        int tok = uniform_int(rng, 0, spec.content_tokens - 1);
        while (tok == prev) tok = uniform_int(rng, 0, spec.content_tokens - 1);
        prev = tok;
        seg.transcript.push_back(kFirstContentToken + tok);
        const int frames = uniform_int(rng, spec.frames_per_token_min, spec.frames_per_token_max);
        for (int j = 0; j < frames; ++j) {
          RowVector v = protos.row(tok);
          for (int c = 0; c < f; ++c) v(c) += spec.noise * gauss(rng);
          rows.push_back(std::move(v));
        }
      }
      const long end = static_cast<long>(rows.size());
      seg.t_b = begin / r;
      seg.t_e = align_up(end, r) / r - 1;
      rec.segments.push_back(std::move(seg));
      silence_until(align_up(end + uniform_int(rng, spec.gap_min, spec.gap_max), r));
    }
    rec.features.resize(static_cast<Index>(rows.size()), f);
    for (std::size_t i = 0; i < rows.size(); ++i) rec.features.row(static_cast<Index>(i)) = rows[i];
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<int> TrainingExample::ctc_targets() const {
  std::vector<int> out(targets.begin(), targets.end());
  if (!out.empty() && out.back() == kEos) out.pop_back();
  return out;
}

std::vector<std::vector<int>> TrainingExample::sentences() const {
  std::vector<std::vector<int>> out;
  for (const auto& s : segments) out.push_back(s.transcript);
  return out;
}

std::vector<int> tag_semantic(std::span<const std::vector<int>> sentences, bool semantic) {
  std::vector<int> out;
  for (const auto& s : sentences) {
    out.insert(out.end(), s.begin(), s.end());
    if (semantic) out.push_back(kSegEnd);
  }
  out.push_back(kEos);
  return out;
}

std::vector<std::vector<int>> split_semantic(std::span<const int> targets) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  for (int id : targets) {
    if (id == kEos) break;
    if (id == kSegEnd) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(id);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

void cut(TrainingExample& ex, const AcousticStream& rec, int decimation, bool semantic) {
  if (decimation < 1) throw ConfigError("decimation must be positive");
  const auto& first = rec.segments[static_cast<std::size_t>(ex.first_segment)];
  const auto& last = rec.segments[static_cast<std::size_t>(ex.first_segment + ex.segment_count - 1)];
  const long begin = first.t_b * decimation;
  const long end = std::min<long>((last.t_e + 1) * decimation, rec.features.rows());
  ex.source_id = rec.id;
  ex.decimation = decimation;
  ex.features = rec.features.middleRows(begin, end - begin);
  ex.source_begin = begin;
  ex.valid_begin = 0;
  ex.valid_end = end - begin;
  ex.frame_offset = 0;
  for (int i = 0; i < ex.segment_count; ++i) {
    Segment s = rec.segments[static_cast<std::size_t>(ex.first_segment + i)];
    s.t_b -= first.t_b;
    s.t_e -= first.t_b;
    ex.segments.push_back(std::move(s));
  }
  ex.targets = tag_semantic(ex.sentences(), semantic);
}

}  // namespace

TrainingExample single_segment_example(const AcousticStream& recording, int segment, int decimation,
                                       bool semantic) {
  if (segment < 0 || segment >= static_cast<int>(recording.segments.size()))
    throw IndexError("segment " + std::to_string(segment) + " out of range for " + recording.id);
  TrainingExample ex;
  ex.first_segment = segment;
  ex.segment_count = 1;
  cut(ex, recording, decimation, semantic);
  return ex;
}

TrainingExample transform_sc(const AcousticStream& recording, int max_duration, int decimation,
                             bool semantic, std::mt19937_64& rng) {
  if (recording.segments.empty())
    throw ContractError("transform_sc: recording " + recording.id + " has no segments");
  const int n = static_cast<int>(recording.segments.size());
  const int first = uniform_int(rng, 0, n - 1);
  const Index t_b = recording.segments[static_cast<std::size_t>(first)].t_b;
  int longest = 0;
  while (first + longest < n &&
         recording.segments[static_cast<std::size_t>(first + longest)].t_e - t_b + 1 <= max_duration)
    ++longest;
  const bool clamped = longest == 0;
  TrainingExample ex;
  ex.first_segment = first;
  ex.segment_count = clamped ? 1 : uniform_int(rng, 1, longest);
  cut(ex, recording, decimation, semantic);
  ex.sc_applied = true;
  ex.sc_clamped = clamped;
  return ex;
}

TrainingExample transform_ac(const TrainingExample& example, const AcousticStream& recording,
                             const MaskSpec& spec, double p_apply, std::mt19937_64& rng, bool silence) {
  if (!std::bernoulli_distribution(std::clamp(p_apply, 0.0, 1.0))(rng)) return example;
  if (example.decimation != spec.decimation)
    throw ContractError("transform_ac: example decimation " + std::to_string(example.decimation) +
                        " differs from mask decimation " + std::to_string(spec.decimation));
  const long total = recording.features.rows();
  const long begin = example.source_begin;
  const long end = example.source_begin + example.features.rows();
  const long left = std::min(spec.left_context_max(), begin);
  const long right = std::min(spec.right_context_max(), total - end);

  TrainingExample ex = example;
  ex.ac_applied = true;
  ex.ac_clipped = left < spec.left_context_max() || right < spec.right_context_max();
  if (silence) {
    ex.features = Matrix::Zero(example.features.rows() + spec.left_context_max() + spec.right_context_max(),
                               example.features.cols());
    ex.features.middleRows(spec.left_context_max(), example.features.rows()) = example.features;
    ex.ac_clipped = false;
    ex.valid_begin += spec.left_context_max();
    ex.valid_end += spec.left_context_max();
    ex.source_begin = begin - spec.left_context_max();
  } else {
    ex.features = recording.features.middleRows(begin - left, end + right - (begin - left));
    ex.valid_begin += left;
    ex.valid_end += left;
    ex.source_begin = begin - left;
  }
  ex.frame_offset = ex.source_begin / spec.decimation;
  const Index shift = (ex.valid_begin - example.valid_begin) / spec.decimation;
  for (auto& s : ex.segments) {
    s.t_b += shift;
    s.t_e += shift;
  }
  return ex;
}

std::vector<Segment> simulated_vad(const AcousticStream& stream, double threshold, int jitter,
                                   std::uint64_t jitter_seed, int decimation) {
  if (decimation < 1) throw ConfigError("simulated_vad: decimation must be positive");
  if (jitter < 0) throw ConfigError("simulated_vad: jitter must be non-negative");
  const Index frames = stream.features.rows() / decimation;
  std::vector<char> speech(static_cast<std::size_t>(frames), 0);
  for (Index t = 0; t < frames; ++t)
    for (Index a = t * decimation; a < (t + 1) * decimation; ++a)
      if (stream.features.row(a).norm() > threshold) speech[static_cast<std::size_t>(t)] = 1;

  std::mt19937_64 rng(jitter_seed);
  std::vector<Segment> out;
  Index t = 0;
  while (t < frames) {
    if (!speech[static_cast<std::size_t>(t)]) {
      ++t;
      continue;
    }
    Index e = t;
    while (e + 1 < frames && speech[static_cast<std::size_t>(e + 1)]) ++e;
    Index b = t + uniform_int(rng, -jitter, jitter);
    Index f = e + uniform_int(rng, -jitter, jitter);
    const Index floor = out.empty() ? 0 : out.back().t_e + 1;
    b = std::clamp<Index>(b, floor, frames - 1);
    f = std::clamp<Index>(f, b, frames - 1);
    // Segments carry no transcript; the open flag marks them as unlabelled.
    out.push_back({b, f, {}, true});
    t = e + 1;
  }
  return out;
}

std::vector<Batch> make_batches(std::vector<TrainingExample> examples, int batch_size,
                                std::span<const int> chunk_sizes, std::uint64_t seed, bool shuffle) {
  if (batch_size < 1) throw ConfigError("make_batches: batch_size must be positive");
  if (chunk_sizes.empty()) throw ConfigError("make_batches: empty chunk size list");
  std::seed_seq seq{seed, std::uint64_t{0x6261746368}};
  std::mt19937_64 order(seq);
  std::mt19937_64 chunks(seed ^ 0x9e3779b97f4a7c15ULL);
  if (shuffle) std::shuffle(examples.begin(), examples.end(), order);

  std::vector<Batch> out;
  for (std::size_t i = 0; i < examples.size(); i += static_cast<std::size_t>(batch_size)) {
    Batch b;
    b.chunk = chunk_sizes[std::uniform_int_distribution<std::size_t>(0, chunk_sizes.size() - 1)(chunks)];
    const std::size_t end = std::min(examples.size(), i + static_cast<std::size_t>(batch_size));
    Index max_frames = 0;
    Index max_targets = 0;
    for (std::size_t j = i; j < end; ++j) {
      max_frames = std::max(max_frames, examples[j].features.rows());
      max_targets = std::max(max_targets, static_cast<Index>(examples[j].targets.size()));
    }
    for (std::size_t j = i; j < end; ++j) {
      const TrainingExample& ex = examples[j];
      Matrix padded = Matrix::Zero(max_frames, ex.features.cols());
      padded.topRows(ex.features.rows()) = ex.features;
      b.padded_features.push_back(std::move(padded));
      b.feature_lengths.push_back(ex.features.rows());
      std::vector<int> t(static_cast<std::size_t>(max_targets), kTargetPad);
      std::copy(ex.targets.begin(), ex.targets.end(), t.begin());
      b.padded_targets.push_back(std::move(t));
      b.target_lengths.push_back(static_cast<Index>(ex.targets.size()));
      b.examples.push_back(std::move(examples[j]));
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::uint64_t batch_source_hash(const Batch& batch) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& ex : batch.examples) {
    h = fnv1a(h, ex.source_id.data(), ex.source_id.size());
    h = fnv1a(h, "\n", 1);
  }
  return fnv1a(h, &batch.chunk, sizeof batch.chunk);
}

std::string corpus_line(const AcousticStream& recording) {
  nlohmann::json j;
  j["id"] = recording.id;
  auto rows = nlohmann::json::array();
  for (Index r = 0; r < recording.features.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < recording.features.cols(); ++c) row.push_back(recording.features(r, c));
    rows.push_back(std::move(row));
  }
  j["features"] = std::move(rows);
  auto segs = nlohmann::json::array();
  for (const auto& s : recording.segments)
    segs.push_back({{"t_b", s.t_b}, {"t_e", s.t_e}, {"tokens", s.transcript}});
  j["segments"] = std::move(segs);
  return j.dump();
}

void write_corpus(const std::filesystem::path& path, std::span<const AcousticStream> recordings) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus " + path.string());
  for (const auto& r : recordings) out << corpus_line(r) << '\n';
}

std::vector<AcousticStream> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::vector<AcousticStream> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AcousticStream rec;
      rec.id = j.at("id").get<std::string>();
      const auto& rows = j.at("features");
      const Index cols = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
      rec.features.resize(static_cast<Index>(rows.size()), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<Index>(rows[r].size()) != cols)
          throw DimensionError("ragged feature row " + std::to_string(r));
        for (Index c = 0; c < cols; ++c)
          rec.features(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)].get<double>();
      }
      for (const auto& s : j.at("segments"))
        rec.segments.push_back({s.at("t_b").get<Index>(), s.at("t_e").get<Index>(),
                                s.at("tokens").get<std::vector<int>>(), false});
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

AcousticStream example_as_stream(const TrainingExample& example) {
  AcousticStream s;
  s.id = example.source_id + "+" + std::to_string(example.first_segment) + "x" +
         std::to_string(example.segment_count);
  s.features = example.features;
  s.segments = example.segments;
  return s;
}

}  // namespace lfad
