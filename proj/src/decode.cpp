// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/decode.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

#include "lfad/datapipe.hpp"

namespace lfad {

DecodeMode parse_decode_mode(const std::string& text) {
  if (text == "ar" || text == "AR") return DecodeMode::AR;
  if (text == "ad" || text == "AD") return DecodeMode::AD;
  if (text == "cat" || text == "CAT") return DecodeMode::CAT;
  throw ConfigError("decode mode must be ar, ad or cat, got '" + text + "'");
}

SegmentationSource parse_segmentation(const std::string& text) {
  if (text == "vad") return SegmentationSource::Vad;
  if (text == "semantic") return SegmentationSource::Semantic;
  if (text == "oracle") return SegmentationSource::Oracle;
  throw ConfigError("segmentation must be vad, semantic or oracle, got '" + text + "'");
}

EncodingsMode parse_encodings(const std::string& text) {
  if (text == "sfe" || text == "SFE") return EncodingsMode::Sfe;
  if (text == "lfe" || text == "LFE") return EncodingsMode::Lfe;
  throw ConfigError("encodings must be sfe or lfe, got '" + text + "'");
}

std::string to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::AR: return "AR";
    case DecodeMode::AD: return "AD";
    case DecodeMode::CAT: return "CAT";
  }
  return "?";
}

std::string to_string(SegmentationSource source) {
  switch (source) {
    case SegmentationSource::Vad: return "vad";
    case SegmentationSource::Semantic: return "semantic";
    case SegmentationSource::Oracle: return "oracle";
  }
  return "?";
}

std::string to_string(EncodingsMode mode) { return mode == EncodingsMode::Sfe ? "SFE" : "LFE"; }

void DecodeConfig::validate() const {
  if (beam < 1) throw ConfigError("beam must be at least 1");
  if (max_tokens < 0) throw ConfigError("max_tokens must be non-negative (0 selects the default cap)");
  if (alpha < 0 || alpha > 1) throw ConfigError("alpha must lie in [0, 1]");
  if (rescore_weight < 0 || rescore_weight > 1) throw ConfigError("rescore weight must lie in [0, 1]");
  if (nbest < 1) throw ConfigError("nbest must be at least 1");
  if (vad_jitter < 0) throw ConfigError("vad jitter must be non-negative");
}

int DecodeConfig::token_cap(Index segment_frames) const {
  if (max_tokens > 0) return max_tokens;
  return static_cast<int>(std::max<Index>(1, 4 * segment_frames));
}

// --- CTC prefix scoring ---------------------------------------------------

CtcPrefixScorer::CtcPrefixScorer(const CtcOutput& lattice) : lattice_(lattice) {
  if (lattice.frames() < 1) throw DimensionError("CtcPrefixScorer: empty lattice");
}

CtcPrefixScorer::State CtcPrefixScorer::initial() const {
  const Index frames = lattice_.frames();
  State s;
  s.r_n.assign(static_cast<std::size_t>(frames), kLogZero);
  s.r_b.assign(static_cast<std::size_t>(frames), kLogZero);
  Scalar acc = 0;
  for (Index t = 0; t < frames; ++t) {
    acc += lattice_.log_probs(t, lattice_.blank);
    s.r_b[static_cast<std::size_t>(t)] = acc;
  }
  return s;
}

CtcPrefixScorer::State CtcPrefixScorer::extend(const State& state, int token) const {
  const Matrix& lp = lattice_.log_probs;
  const Index frames = lattice_.frames();
  const auto last = static_cast<std::size_t>(frames - 1);
  if (token == kEos) {
    State s = state;
    s.prefix = log_add(state.r_n[last], state.r_b[last]);
    return s;
  }
  if (token < 0 || token >= lp.cols() || token == lattice_.blank)
    throw IndexError("CtcPrefixScorer: cannot extend with token " + std::to_string(token));
  const bool empty = state.last < 0;
  State s;
  s.last = token;
  s.r_n.assign(static_cast<std::size_t>(frames), kLogZero);
  s.r_b.assign(static_cast<std::size_t>(frames), kLogZero);
  s.r_n[0] = empty ? lp(0, token) : kLogZero;
  Scalar psi = s.r_n[0];
  for (Index t = 1; t < frames; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Scalar phi = token == state.last ? state.r_b[i - 1] : log_add(state.r_n[i - 1], state.r_b[i - 1]);
    const Scalar n = log_add(s.r_n[i - 1], phi);
    s.r_n[i] = n == kLogZero ? kLogZero : n + lp(t, token);
    const Scalar b = log_add(s.r_b[i - 1], s.r_n[i - 1]);
    s.r_b[i] = b == kLogZero ? kLogZero : b + lp(t, lattice_.blank);
    if (phi != kLogZero) psi = log_add(psi, phi + lp(t, token));
  }
  s.prefix = psi;
  return s;
}

Scalar brute_force_prefix_probability(const CtcOutput& lattice, std::span<const int> prefix) {
  const Index frames = lattice.frames();
  const Index vocab = lattice.log_probs.cols();
  std::vector<int> path(static_cast<std::size_t>(frames), 0);
  Scalar total = kLogZero;
  std::function<void(Index, Scalar)> walk = [&](Index t, Scalar logp) {
    if (t == frames) {
      std::vector<int> labels;
      int prev = -1;
      for (int k : path) {
        if (k != lattice.blank && k != prev) labels.push_back(k);
        prev = k;
      }
      if (labels.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), labels.begin()))
        total = log_add(total, logp);
      return;
    }
    for (Index k = 0; k < vocab; ++k) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(k);
      walk(t + 1, logp + lattice.log_probs(t, k));
    }
  };
  walk(0, 0.0);
  return total;
}

// --- beam search ----------------------------------------------------------

namespace {

struct Live {
  Hypothesis hyp;
  DecoderState state;
  CtcPrefixScorer::State ctc;
};

RowVector log_softmax_row(const RowVector& logits) {
  const Scalar hi = logits.maxCoeff();
  const Scalar lse = hi + std::log((logits.array() - hi).exp().sum());
  return (logits.array() - lse).matrix();
}

Hypothesis beam_search(const Decoder& decoder, const Matrix& memory, const CtcOutput* lattice,
                       const DecodeConfig& config, double alpha) {
  config.validate();
  if (memory.rows() == 0) throw DimensionError("beam search: empty segment encodings");
  const bool use_ctc = lattice != nullptr && alpha > 0;
  std::optional<CtcPrefixScorer> scorer;
  if (use_ctc) {
    if (lattice->frames() != memory.rows())
      throw DimensionError("cat_beam_decode: lattice has " + std::to_string(lattice->frames()) +
                           " frames, segment has " + std::to_string(memory.rows()));
    scorer.emplace(*lattice);
  }
  const int cap = config.token_cap(memory.rows());
  const int vocab = decoder.config().vocab;

  std::vector<Live> live(1);
  live[0].state = decoder.start(memory);
  if (use_ctc) live[0].ctc = scorer->initial();
  std::vector<Hypothesis> finished;

  struct Candidate {
    std::size_t parent;
    int token;
    Scalar attention;
    Scalar score;
    CtcPrefixScorer::State ctc;
  };

  for (int step = 0; step < cap; ++step) {
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      Live& h = live[i];
      const int prev = h.hyp.tokens.empty() ? kBos : h.hyp.tokens.back();
      const RowVector lp = log_softmax_row(decoder.step(h.state, prev));
      for (int c = 0; c < vocab; ++c) {
        if (c == kBlank || c == kBos) continue;
        Candidate cand{i, c, h.hyp.attention + lp(c), 0, {}};
        cand.score = cand.attention;
        if (use_ctc) {
          cand.ctc = scorer->extend(h.ctc, c);
          cand.score = (1 - alpha) * cand.attention + alpha * cand.ctc.prefix;
        }
        const auto emitted = static_cast<Scalar>(h.hyp.tokens.size() + (c == kEos ? 0 : 1));
        cand.score += config.length_penalty * emitted;
        cands.push_back(std::move(cand));
      }
    }
    const std::size_t keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(config.beam));
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    std::vector<Live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      Candidate& cand = cands[k];
      const Live& parent = live[cand.parent];
      Hypothesis hyp = parent.hyp;
      hyp.attention = cand.attention;
      hyp.ctc = cand.ctc.prefix;
      hyp.score = cand.score;
      if (cand.token == kEos) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
        continue;
      }
      hyp.tokens.push_back(cand.token);
      next.push_back({std::move(hyp), parent.state, std::move(cand.ctc)});
    }
    live = std::move(next);
    if (live.empty()) break;
    if (config.length_penalty == 0 && !finished.empty()) {
      const Scalar best_done =
          std::max_element(finished.begin(), finished.end(),
                           [](const Hypothesis& a, const Hypothesis& b) { return a.score < b.score; })
              ->score;
      const Scalar best_live =
          std::max_element(live.begin(), live.end(),
                           [](const Live& a, const Live& b) { return a.hyp.score < b.hyp.score; })
              ->hyp.score;
      // Scores only decrease with length, so no live hypothesis can win.
      if (best_done >= best_live) break;
    }
  }
  // Live hypotheses left at the cap compete with the finished ones; if one
  // of them wins, the decode is reported as truncated.
  const Hypothesis* best = nullptr;
  for (const auto& h : finished)
    if (!best || h.score > best->score) best = &h;
  for (const auto& l : live)
    if (!best || l.hyp.score > best->score) best = &l.hyp;
  Hypothesis out = *best;
  out.truncated = !out.finished;
  return out;
}

}  // namespace

Hypothesis attention_beam_decode(const Decoder& decoder, const Matrix& memory, const DecodeConfig& config) {
  return beam_search(decoder, memory, nullptr, config, 0.0);
}

Hypothesis cat_beam_decode(const Decoder& decoder, const Matrix& memory, const CtcOutput& lattice,
                           const DecodeConfig& config) {
  return beam_search(decoder, memory, &lattice, config, config.alpha);
}

// --- attention rescoring --------------------------------------------------

std::vector<ScoredSequence> ctc_nbest(const CtcOutput& lattice, int beam, int size) {
  if (beam < 1 || size < 1) throw ConfigError("ctc_nbest: beam and size must be positive");
  struct Probs {
    Scalar blank = kLogZero;
    Scalar label = kLogZero;
    Scalar total() const { return log_add(blank, label); }
  };
  using Beams = std::map<std::vector<int>, Probs>;
  Beams beams;
  beams[{}] = Probs{0.0, kLogZero};
  const Index vocab = lattice.log_probs.cols();
  auto prune = [&](Beams& b) {
    std::vector<std::pair<std::vector<int>, Probs>> items(b.begin(), b.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& x, const auto& y) { return x.second.total() > y.second.total(); });
    if (items.size() > static_cast<std::size_t>(beam)) items.resize(static_cast<std::size_t>(beam));
    return Beams(items.begin(), items.end());
  };
  for (Index t = 0; t < lattice.frames(); ++t) {
    Beams next;
    for (const auto& [prefix, p] : beams) {
      for (Index k = 0; k < vocab; ++k) {
        const int c = static_cast<int>(k);
        const Scalar lp = lattice.log_probs(t, k);
        if (c == lattice.blank) {
          Probs& q = next[prefix];
          q.blank = log_add(q.blank, p.total() + lp);
          continue;
        }
        if (c == kBos || c == kEos) continue;
        std::vector<int> ext = prefix;
        ext.push_back(c);
        Probs& q = next[ext];
        if (!prefix.empty() && prefix.back() == c) {
          if (p.blank != kLogZero) q.label = log_add(q.label, p.blank + lp);
          Probs& same = next[prefix];
          if (p.label != kLogZero) same.label = log_add(same.label, p.label + lp);
        } else {
          q.label = log_add(q.label, p.total() + lp);
        }
      }
    }
    beams = prune(next);
  }
  std::vector<ScoredSequence> out;
  for (const auto& [prefix, p] : beams) out.push_back({prefix, p.total()});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ctc > b.ctc; });
  if (out.size() > static_cast<std::size_t>(size)) out.resize(static_cast<std::size_t>(size));
  return out;
}

std::size_t attention_rescore(const Decoder& decoder, const Matrix& memory,
                              std::span<const ScoredSequence> nbest, double weight) {
  if (nbest.empty()) throw ContractError("attention_rescore: empty n-best list");
  std::size_t best = 0;
  Scalar best_score = kLogZero;
  for (std::size_t i = 0; i < nbest.size(); ++i) {
    const Scalar att = sequence_log_prob(decoder, memory, nbest[i].tokens);
    const Scalar score = weight * nbest[i].ctc + (1 - weight) * att;
    if (i == 0 || score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

Hypothesis decode_segment(const Decoder& decoder, const Matrix& memory, const CtcOutput& lattice,
                          const DecodeConfig& config) {
  switch (config.mode) {
    case DecodeMode::AD: return attention_beam_decode(decoder, memory, config);
    case DecodeMode::CAT: return cat_beam_decode(decoder, memory, lattice, config);
    case DecodeMode::AR: break;
  }
  const auto nbest = ctc_nbest(lattice, std::max(config.beam, config.nbest), config.nbest);
  const std::size_t pick = attention_rescore(decoder, memory, nbest, config.rescore_weight);
  Hypothesis h;
  h.tokens = nbest[pick].tokens;
  h.ctc = nbest[pick].ctc;
  h.attention = sequence_log_prob(decoder, memory, h.tokens);
  h.score = config.rescore_weight * h.ctc + (1 - config.rescore_weight) * h.attention;
  h.finished = true;
  return h;
}

// --- two-pass pipeline ----------------------------------------------------

std::vector<int> TwoPassResult::transcript() const {
  std::vector<int> out;
  for (const auto& s : segments)
    if (s.error.empty()) out.insert(out.end(), s.hypothesis.tokens.begin(), s.hypothesis.tokens.end());
  return out;
}

TwoPassResult two_pass_decode(const Model& model, const AcousticStream& stream, const DecodeConfig& config) {
  config.validate();
  TwoPassResult result;
  const int r = model.encoder().config().mask.decimation;
  if (stream.features.rows() < r) return result;

  const EncodingSequence full = model.encode(stream.features);
  const CtcOutput lattice = model.ctc(full.encodings);
  const Index frames = full.frames();
  result.first_pass = ctc_greedy(lattice).tokens;

  std::vector<Segment> segments;
  switch (config.segmentation) {
    case SegmentationSource::Semantic: {
      Segmentation seg = extract_segments(ctc_greedy(lattice), lattice.seg_end, frames);
      result.dropped_segments = seg.dropped;
      for (auto& s : seg.segments)
        if (!(s.open && s.transcript.empty())) segments.push_back(std::move(s));
      break;
    }
    case SegmentationSource::Vad:
      segments = simulated_vad(stream, config.vad_threshold, config.vad_jitter, config.vad_seed, r);
      break;
    case SegmentationSource::Oracle:
      segments = stream.segments;
      break;
  }

  for (const Segment& seg : segments) {
    SegmentResult out;
    out.segment = seg;
    try {
      if (seg.t_b < 0 || seg.t_e < seg.t_b || seg.t_e >= frames)
        throw IndexError("segment [" + std::to_string(seg.t_b) + ", " + std::to_string(seg.t_e) +
                         "] outside " + std::to_string(frames) + " encodings");
      Matrix h;
      CtcOutput slice;
      if (config.encodings == EncodingsMode::Lfe) {
        h = full.encodings.middleRows(seg.t_b, seg.length());
        slice.log_probs = lattice.log_probs.middleRows(seg.t_b, seg.length());
      } else {
        const Matrix audio = stream.features.middleRows(seg.t_b * r, seg.length() * r);
        h = model.encode(audio).encodings;
        slice = model.ctc(h);
      }
      Matrix memory;
      {
        NoGradGuard no_grad;
        memory = model.decoder().prepare_memory(Tensor(h)).value();
      }
      out.hypothesis = decode_segment(model.decoder(), memory, slice, config);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    result.segments.push_back(std::move(out));
  }
  return result;
}

}  // namespace lfad
