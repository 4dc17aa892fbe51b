// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails. Trained checkpoints are cached in --runs and shared by
// the trend criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "lfad/ctc.hpp"
#include "lfad/decode.hpp"
#include "lfad/harness.hpp"
#include "oracles.hpp"

using namespace lfad;
using namespace lfad::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// --- 1 ---------------------------------------------------------------------

Outcome permutation_invariance() {
  DecoderConfig cfg;
  ParameterStore store;
  std::mt19937_64 init(1);
  Decoder decoder(cfg, store, init);
  std::mt19937_64 rng(2);
  double worst = 0;
  int changed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int block = trial % cfg.blocks;
    const Index rows = 2 + static_cast<Index>(rng() % 30);
    const Tensor queries(random_matrix(1 + static_cast<Index>(rng() % 6), cfg.width, rng));
    const Matrix memory = random_matrix(rows, cfg.width, rng);

    std::vector<Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    Matrix permuted(rows, cfg.width);
    for (Index i = 0; i < rows; ++i) permuted.row(i) = memory.row(order[static_cast<std::size_t>(i)]);
    decoder.segment_pe().table = store.find("decoder.segment_pe")->tensor;
    const auto& attn = decoder.cross(block);
    const Matrix a = cross_attention(attn, queries, inject_segment_pe(Tensor(memory), decoder.segment_pe(), false)).value();
    const Matrix b = cross_attention(attn, queries, inject_segment_pe(Tensor(permuted), decoder.segment_pe(), false)).value();
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());

    const Index i = static_cast<Index>(rng() % rows);
    Index j = static_cast<Index>(rng() % (rows - 1));
    if (j >= i) ++j;
    Matrix swapped = memory;
    swapped.row(i).swap(swapped.row(j));
    const Matrix c = cross_attention(attn, queries, inject_segment_pe(Tensor(memory), decoder.segment_pe(), true)).value();
    const Matrix d = cross_attention(attn, queries, inject_segment_pe(Tensor(swapped), decoder.segment_pe(), true)).value();
    if ((c - d).cwiseAbs().maxCoeff() > 1e-6) ++changed;
  }
  return {worst <= 1e-12 && changed >= 99,
          fmt("PE off: max|delta| %.2e over 100 permutations; PE on: %d/100 transpositions change output", worst,
              changed)};
}

// --- 2 ---------------------------------------------------------------------

Outcome long_form_oracle() {
  std::mt19937_64 rng(3);
  int equal_cases = 0, equal_ok = 0, violating_cases = 0, violating_ok = 0;
  double worst_equal = 0, weakest_violation = 1e300;
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<int> small(1, 4);
    const MaskSpec spec{small(rng), small(rng), small(rng), std::uniform_int_distribution<int>(1, 3)(rng)};
    EncoderConfig ec;
    ec.mask = spec;
    ec.width = 16;
    ec.heads = 2;
    ec.ff = 32;
    ec.features = 4;
    ParameterStore store;
    std::mt19937_64 init(50 + trial);
    Encoder encoder(ec, store, init);

    const Index lead = spec.layers * spec.lookback;
    const Index frames = lead + 6 * spec.chunk + 16;
    const Matrix x = random_matrix(frames * spec.decimation, ec.features, rng);
    const EncodingSequence full = encode(encoder, x, spec);
    const Index t_b = lead + static_cast<Index>(rng() % 5);
    const Index t_e = std::min<Index>(t_b + static_cast<Index>(rng() % 8), frames - spec.chunk - 1);
    const Segment seg{t_b, t_e, {}, false};
    if (!is_long_form_segment(full.profile, seg)) continue;

    const AcousticWindow w = required_window(spec, seg, static_cast<long>(x.rows()));
    if (w.clipped) continue;
    const Index offset = w.begin / spec.decimation;
    const EncodingSequence window = encode(encoder, Matrix(x.middleRows(w.begin, w.length())), spec, offset);
    const double diff = (full.encodings.middleRows(t_b, seg.length()) -
                         window.encodings.middleRows(t_b - offset, seg.length()))
                            .cwiseAbs()
                            .maxCoeff();
    ++equal_cases;
    worst_equal = std::max(worst_equal, diff);
    if (diff <= 1e-9) ++equal_ok;

    // The same span encoded on its own lacks context at its edges.
    const EncodingSequence alone =
        encode(encoder, Matrix(x.middleRows(t_b * spec.decimation, seg.length() * spec.decimation)), spec, t_b);
    const Segment local{0, seg.length() - 1, {}, false};
    if (is_long_form_segment(alone.profile, local)) continue;
    const Matrix delta = (full.encodings.middleRows(t_b, seg.length()) - alone.encodings).cwiseAbs();
    const double edge = std::max(delta.row(0).maxCoeff(), delta.row(seg.length() - 1).maxCoeff());
    ++violating_cases;
    weakest_violation = std::min(weakest_violation, edge);
    if (edge > 1e-6) ++violating_ok;
  }
  return {equal_cases >= 20 && equal_ok == equal_cases && violating_cases >= 20 && violating_ok == violating_cases,
          fmt("%d/%d long-form slices equal re-encoding (max %.2e); %d/%d violating segments differ at edges "
              "(min %.2e)",
              equal_ok, equal_cases, worst_equal, violating_ok, violating_cases, weakest_violation)};
}

// --- 3 ---------------------------------------------------------------------

Index dense_left_reach(const MaskSpec& s, Index frames, Index t) {
  using Dense = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  Dense visible = Dense::Zero(frames, frames);
  for (Index q = 0; q < frames; ++q) {
    const Index last = (q / s.chunk + 1) * s.chunk - 1;
    for (Index k = std::max<Index>(0, q - s.lookback); k <= std::min(last, frames - 1); ++k) visible(q, k) = 1;
  }
  Eigen::RowVectorXi reach = Eigen::RowVectorXi::Zero(frames);
  reach(t) = 1;
  for (int l = 0; l < s.layers; ++l) reach = ((reach * visible).array() > 0).cast<int>().matrix();
  Index first = 0;
  while (!reach(first)) ++first;
  return t - first;
}

Outcome receptive_field_closed_form() {
  int specs = 0, exact = 0;
  for (int L = 1; L <= 4; ++L)
    for (int N = 0; N <= 4; ++N)
      for (int M = 1; M <= 4; ++M)
        for (int R = 1; R <= 3; ++R) {
          const MaskSpec s{L, N, M, R};
          const Index frames = L * N + 3 * M + 2;
          const ContextProfile p = context_profile(s, frames);
          const long left = *std::max_element(p.left.begin(), p.left.end());
          bool ok = left == static_cast<long>(L) * N * R && s.left_context_max() == left;
          ok = ok && dense_left_reach(s, frames, frames - 1) * R == left;
          for (Index t = 0; t < (frames / M) * M; ++t) ok = ok && p.right[t] == static_cast<long>(M) * R;
          ok = ok && s.right_context_max() == static_cast<long>(M) * R;
          ++specs;
          exact += ok;
        }
  const MaskSpec paper{12, 16, 16, 6};
  const ContextProfile p = context_profile(paper, 256);
  const long left = *std::max_element(p.left.begin(), p.left.end());
  const long right = *std::max_element(p.right.begin(), p.right.end());
  const bool paper_ok = left == 1152 && right == 96 && paper.left_context_max() == 1152 &&
                        paper.right_context_max() == 96;
  return {exact == specs && paper_ok,
          fmt("%d/%d specs saturate at L*N*R and M*R; (12,16,16,6) -> %ld/%ld", exact, specs, left, right)};
}

// --- 4 ---------------------------------------------------------------------

Outcome ctc_correctness() {
  std::mt19937_64 rng(4);
  int instances = 0, ok = 0;
  double worst = 0;
  for (Index frames = 1; frames <= 6; ++frames)
    for (int vocab = 2; vocab <= 4; ++vocab) {
      const Matrix lp = log_softmax(Tensor(random_matrix(frames, vocab, rng, 1.5))).value();
      const auto table = enumerate_paths(lp);
      std::vector<std::vector<int>> targets{{}};
      for (std::size_t begin = 0; begin < targets.size(); ++begin)
        if (targets[begin].size() < 3)
          for (int k = 1; k < vocab; ++k) {
            auto t = targets[begin];
            t.push_back(k);
            targets.push_back(t);
          }
      for (const auto& target : targets) {
        const auto it = table.find(target);
        if (it == table.end()) continue;  // infeasible under the frame budget
        const double diff = std::abs(std::exp(-ctc_loss(Tensor(lp), target).item()) - it->second);
        worst = std::max(worst, diff);
        ++instances;
        ok += diff <= 1e-10;
      }
    }
  int grads = 0, grads_ok = 0;
  double worst_rel = 0, worst_abs = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const Index frames = 2 + trial % 5;
    const int vocab = 2 + trial % 3;
    std::vector<int> target;
    for (int i = 0; i < 1 + trial % 3; ++i) target.push_back(1 + static_cast<int>(rng() % (vocab - 1)));
    if (ctc_min_frames(target) > frames) continue;
    Tensor lattice(log_softmax(Tensor(random_matrix(frames, vocab, rng))).value(), true);
    const GradReport r = gradcheck([&] { return ctc_loss(lattice, target); }, {lattice}, {}, 1e-5);
    ++grads;
    grads_ok += r.ok();
    worst_rel = std::max(worst_rel, r.worst_relative);
    worst_abs = std::max(worst_abs, r.worst_absolute);
  }
  return {ok == instances && instances > 0 && grads_ok == grads,
          fmt("%d/%d instances match enumeration (max %.2e); %d/%d gradients within 1e-5 (worst abs %.2e, rel %.2e)",
              ok, instances, worst, grads_ok, grads, worst_abs, worst_rel)};
}

// --- 5 ---------------------------------------------------------------------

Outcome gradient_integrity() {
  Model model(tiny_model_config(true));
  const AcousticStream rec = tiny_stream(1);
  const TrainingExample ex = single_segment_example(rec, 0, 2, false);
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (auto& p : model.parameters().parameters()) params.push_back(p.tensor), names.push_back(p.name);
  const GradReport r = gradcheck([&] { return model.loss(ex, 2).total; }, params, names, 1e-4);
  return {r.ok() && r.checked == model.parameters().scalar_count(),
          fmt("%ld scalars in %zu tensors, %ld outside 1e-4 (worst abs %.2e, rel %.2e)%s%s", r.checked,
              params.size(), r.failures, r.worst_absolute, r.worst_relative, r.ok() ? "" : "; first: ", r.first_failure.c_str())};
}

// --- 6, 7, 8 ---------------------------------------------------------------

class Trainer {
 public:
  Trainer(std::filesystem::path dir, RunConfig run) : dir_(std::move(dir)), run_(std::move(run)) {
    std::filesystem::create_directories(dir_);
    train_ = generate_corpus(run_.corpus, run_.train_recordings);
    SyntheticCorpusSpec test = run_.corpus;
    test.seed = run_.corpus.seed + 1000;
    test_ = generate_corpus(test, run_.test_recordings);
  }

  const Model& model(int id, std::uint64_t seed) {
    const auto key = std::make_pair(id, seed);
    if (auto it = models_.find(key); it != models_.end()) return *it->second;
    const ModelConfig mc = ablation_model_config(run_.model, id, seed);
    const TrainOptions to = ablation_train_options(run_.train, id, seed);
    std::ostringstream tag;
    tag << mc.to_config().canonical() << to.updates << to.batch_size << to.lr << to.flags.describe() << to.seed;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a_64(tag.str())));
    const auto path = dir_ / fmt("m%d_s%llu_%s.ckpt", id, static_cast<unsigned long long>(seed), hex);
    std::unique_ptr<Model> m;
    if (std::filesystem::exists(path)) {
      m = Model::load(path, mc.architecture_hash());
    } else {
      m = std::make_unique<Model>(mc);
      const TrainStats s = train(*m, train_, to);
      std::cerr << fmt("  trained M%d seed %llu in %.0f s, final loss %.3f\n", id,
                       static_cast<unsigned long long>(seed), s.seconds, s.losses.back());
      m->save(path);
    }
    return *(models_[key] = std::move(m));
  }

  const WerReport& report(int id, std::uint64_t seed, EncodingsMode enc, DecodeMode mode, SegmentationSource seg) {
    const auto key = std::make_tuple(id, seed, static_cast<int>(enc), static_cast<int>(mode), static_cast<int>(seg));
    if (auto it = reports_.find(key); it != reports_.end()) return it->second;
    DecodeConfig d = run_.decode;
    d.encodings = enc;
    d.mode = mode;
    d.segmentation = seg;
    return reports_[key] = evaluate_condition(model(id, seed), test_, d);
  }

  double median_of(int id, EncodingsMode enc, DecodeMode mode, SegmentationSource seg,
                   const std::function<double(const WerReport&)>& metric) {
    std::vector<double> v;
    for (std::uint64_t s : seeds_) v.push_back(metric(report(id, s, enc, mode, seg)));
    return median(v);
  }

 private:
  std::filesystem::path dir_;
  RunConfig run_;
  std::vector<AcousticStream> train_;
  std::vector<AcousticStream> test_;
  std::vector<std::uint64_t> seeds_{1, 2, 3, 4};
  std::map<std::pair<int, std::uint64_t>, std::unique_ptr<Model>> models_;
  std::map<std::tuple<int, std::uint64_t, int, int, int>, WerReport> reports_;
};

double wer_of(const WerReport& r) { return r.wer; }
double trunc_of(const WerReport& r) { return r.truncation_rate; }
double ins_of(const WerReport& r) { return r.insertion_ratio; }

constexpr auto kSfe = EncodingsMode::Sfe;
constexpr auto kLfe = EncodingsMode::Lfe;
constexpr auto kAd = DecodeMode::AD;
constexpr auto kCat = DecodeMode::CAT;
constexpr auto kOracle = SegmentationSource::Oracle;

Outcome failure_mode(Trainer& t) {
  const double trunc = t.median_of(0, kLfe, kAd, kOracle, trunc_of);
  const double ins_lfe = t.median_of(0, kLfe, kAd, kOracle, ins_of);
  const double ins_sfe = t.median_of(0, kSfe, kAd, kOracle, ins_of);
  const double wer_lfe = t.median_of(0, kLfe, kAd, kOracle, wer_of);
  const double wer_sfe = t.median_of(0, kSfe, kAd, kOracle, wer_of);
  const bool trunc_ok = trunc >= 0.5;
  const bool ins_ok = ins_lfe >= 3 * ins_sfe && ins_lfe > 0;
  return {trunc_ok && ins_ok,
          fmt("M0 LFE-AD truncation %.3f (need >= 0.5: %s); insertion ratio %.3f vs SFE %.3f (x%.1f, need >= 3: "
              "%s); WER LFE %.2f%% vs SFE %.2f%%",
              trunc, trunc_ok ? "ok" : "no", ins_lfe, ins_sfe, ins_sfe > 0 ? ins_lfe / ins_sfe : 0.0,
              ins_ok ? "ok" : "no", 100 * wer_lfe, 100 * wer_sfe)};
}

Outcome fix_reproduction(Trainer& t) {
  const double lfe = t.median_of(4, kLfe, kAd, kOracle, wer_of);
  const double sfe = t.median_of(4, kSfe, kAd, kOracle, wer_of);
  const double trunc = t.median_of(4, kLfe, kAd, kOracle, trunc_of);
  const double gap = 100 * std::abs(lfe - sfe);
  return {gap <= 2.0 && trunc <= 0.05,
          fmt("M4 WER LFE-AD %.2f%% vs SFE-AD %.2f%% (gap %.2f points); truncation %.3f", 100 * lfe, 100 * sfe, gap,
              trunc)};
}

Outcome ablation_trends(Trainer& t) {
  const double m0 = t.median_of(0, kLfe, kAd, kOracle, wer_of);
  const double m2 = t.median_of(2, kLfe, kAd, kOracle, wer_of);
  const double m3 = t.median_of(3, kLfe, kAd, kOracle, wer_of);
  const double m4 = t.median_of(4, kLfe, kAd, kOracle, wer_of);
  const double m5_semantic = t.median_of(5, kLfe, kCat, SegmentationSource::Semantic, wer_of);
  const double m4_vad = t.median_of(4, kLfe, kCat, SegmentationSource::Vad, wer_of);
  const bool order = m4 < m2 && m4 < m3 && m4 < m0;
  const bool segmentation = m5_semantic <= m4_vad;
  return {order && segmentation,
          fmt("LFE-AD WER M4 %.2f%% < M2 %.2f%%, M3 %.2f%%, M0 %.2f%%: %s; CAT M5 semantic %.2f%% <= M4 VAD %.2f%%: "
              "%s",
              100 * m4, 100 * m2, 100 * m3, 100 * m0, order ? "ok" : "no", 100 * m5_semantic, 100 * m4_vad,
              segmentation ? "ok" : "no")};
}

// --- 9 ---------------------------------------------------------------------

Outcome decode_algebra() {
  DecoderConfig dc;
  dc.vocab = 12;
  ParameterStore store;
  std::mt19937_64 init(5);
  Decoder decoder(dc, store, init);
  for (auto& p : store.parameters())
    if (p.name.find("project") != std::string::npos) p.tensor.mutable_value() *= 3.0;
  std::mt19937_64 rng(6);
  int same = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index frames = 2 + trial % 10;
    const Matrix memory = decoder.prepare_memory(Tensor(random_matrix(frames, dc.width, rng))).value();
    CtcOutput lattice;
    lattice.log_probs = log_softmax(Tensor(random_matrix(frames, dc.vocab, rng, 2.0))).value();
    DecodeConfig c;
    c.alpha = 0.0;
    const Hypothesis ad = attention_beam_decode(decoder, memory, c);
    const Hypothesis cat = cat_beam_decode(decoder, memory, lattice, c);
    same += ad.tokens == cat.tokens;
  }

  int exhaustive = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    DecoderConfig small;
    small.vocab = 5;
    small.width = 16;
    small.heads = 2;
    ParameterStore s;
    std::mt19937_64 r(seed);
    Decoder d(small, s, r);
    for (auto& p : s.parameters())
      if (p.name.find("project") != std::string::npos) p.tensor.mutable_value() *= 3.0;
    const Matrix memory = d.prepare_memory(Tensor(random_matrix(4, small.width, r))).value();
    DecodeConfig c;
    c.beam = 16;
    c.max_tokens = 4;
    const Hypothesis got = attention_beam_decode(d, memory, c);
    const ExhaustiveBest best = exhaustive_argmax(d, memory, {kSegEnd, kFirstContentToken}, 4);
    exhaustive += got.tokens == best.tokens && got.finished == best.finished &&
                  std::abs(got.score - best.score) <= 1e-9 * std::max(1.0, std::abs(best.score));
  }

  int rescored = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix memory = decoder.prepare_memory(Tensor(random_matrix(6, dc.width, rng))).value();
    CtcOutput lattice;
    lattice.log_probs = log_softmax(Tensor(random_matrix(6, dc.vocab, rng, 2.0))).value();
    const auto nbest = ctc_nbest(lattice, 8, 8);
    const double w = 0.3;
    std::size_t expect = 0;
    double best = -1e300;
    for (std::size_t i = 0; i < nbest.size(); ++i) {
      const double s = w * nbest[i].ctc + (1 - w) * forced_score(decoder, memory, nbest[i].tokens, true);
      if (s > best) best = s, expect = i;
    }
    rescored += attention_rescore(decoder, memory, nbest, w) == expect;
  }
  return {same == 50 && exhaustive == 20 && rescored == 20,
          fmt("alpha=0 CAT == AD on %d/50 segments; beam 16 == exhaustive argmax on %d/20; rescoring matches oracle "
              "on %d/20",
              same, exhaustive, rescored)};
}

// --- 10 --------------------------------------------------------------------

Outcome pipeline_economy(const RunConfig& run) {
  Model model(run.model);
  SyntheticCorpusSpec spec = run.corpus;
  spec.seed = run.corpus.seed + 2000;
  const auto streams = generate_corpus(spec, 10);
  int single = 0, runs = 0, slices = 0, slice_runs = 0;
  for (const auto& stream : streams) {
    for (auto seg : {SegmentationSource::Oracle, SegmentationSource::Semantic, SegmentationSource::Vad}) {
      for (auto mode : {DecodeMode::AR, DecodeMode::AD, DecodeMode::CAT}) {
        DecodeConfig c = run.decode;
        c.encodings = EncodingsMode::Lfe;
        c.segmentation = seg;
        c.mode = mode;
        model.reset_encoder_calls();
        const TwoPassResult r = two_pass_decode(model, stream, c);
        ++runs;
        single += model.encoder_calls() == 1;
        if (seg == SegmentationSource::Oracle) {
          ++slice_runs;
          slices += model.encoder_calls() == 1 && r.segments.size() == stream.segments.size();
        }
      }
    }
  }
  return {single == runs && slices == slice_runs,
          fmt("%d/%d two-pass decodes used exactly one encoder forward; %d/%d oracle LFE decodes never re-encoded",
              single, runs, slices, slice_runs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string runs = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--runs", runs, "checkpoint cache directory");
  app.add_option("--only", only, "run a subset of criteria");
  CLI11_PARSE(app, argc, argv);

  RunConfig run;
  run.train.log_every = 0;
  auto trainer = std::make_shared<Trainer>(runs, run);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "permutation invariance", 10, permutation_invariance},
      {2, "long-form encoding oracle", 60, long_form_oracle},
      {3, "receptive-field closed form", 30, receptive_field_closed_form},
      {4, "CTC correctness", 60, ctc_correctness},
      {5, "gradient integrity", 120, gradient_integrity},
      {6, "failure-mode reproduction", 1200, [&] { return failure_mode(*trainer); }},
      {7, "fix reproduction", 1200, [&] { return fix_reproduction(*trainer); }},
      {8, "ordinal ablation trends", 0, [&] { return ablation_trends(*trainer); }},
      {9, "decode-mode algebra", 60, decode_algebra},
      {10, "pipeline economy", 0, [&] { return pipeline_economy(run); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = c.budget_s <= 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << fmt("criterion %2d %s  %s: %s (%.1f s", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                     secs)
              << (c.budget_s > 0 ? fmt(", budget %.0f s%s", c.budget_s, in_time ? "" : " EXCEEDED") : "") << ")"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
