// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace lfad {

std::string AblationFlags::describe() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += "+";
    out += name;
  };
  add(sc, "SC");
  add(ac, "AC");
  add(pe, "PE");
  add(ss, "SS");
  return out.empty() ? "none" : out;
}

AblationFlags ablation_flags(int model_id) {
  switch (model_id) {
    case 0: return {};
    case 1: return {true, false, false, false};
    case 2: return {true, true, false, false};
    case 3: return {true, false, true, false};
    case 4: return {true, true, true, false};
    case 5: return {true, true, true, true};
    default: throw IndexError("ablation model id " + std::to_string(model_id) + " outside 0..5");
  }
}

TrainingExample sample_example(const AcousticStream& recording, const TrainOptions& options, const MaskSpec& ac_spec,
                               std::mt19937_64& sc_rng, std::mt19937_64& ac_rng) {
  const int r = ac_spec.decimation;
  TrainingExample ex;
  if (options.flags.sc) {
    ex = transform_sc(recording, options.sc_max_duration, r, options.flags.ss, sc_rng);
  } else {
    const int n = static_cast<int>(recording.segments.size());
    if (n == 0) throw ContractError("recording " + recording.id + " has no segments");
    ex = single_segment_example(recording, std::uniform_int_distribution<int>(0, n - 1)(sc_rng), r,
                                options.flags.ss);
  }
  if (options.flags.ac) ex = transform_ac(ex, recording, ac_spec, options.ac_probability, ac_rng, options.ac_silence);
  return ex;
}

namespace {

double scheduled_lr(const TrainOptions& o, long update) {
  if (update < o.warmup) return o.lr * static_cast<double>(update + 1) / static_cast<double>(o.warmup);
  const long span = std::max<long>(1, o.updates - o.warmup);
  const double progress = std::min(1.0, static_cast<double>(update - o.warmup) / static_cast<double>(span));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return o.lr * (o.final_lr_fraction + (1.0 - o.final_lr_fraction) * cosine);
}

}  // namespace

TrainStats train(Model& model, std::span<const AcousticStream> corpus, const TrainOptions& options, std::ostream* log) {
  if (corpus.empty()) throw ContractError("train: empty corpus");
  if (options.updates < 0 || options.batch_size < 1) throw ConfigError("train: bad budget");
  if (model.config().decoder.pe_enabled != options.flags.pe)
    throw ConfigError("train: PE flag disagrees with the model's decoder configuration");
  const auto start = std::chrono::steady_clock::now();

  const EncoderConfig& ec = model.config().encoder;
  MaskSpec ac_spec = ec.mask;
  ac_spec.chunk = *std::max_element(ec.chunk_sizes.begin(), ec.chunk_sizes.end());

  // Independent streams so that transform flags never shift the data order.
  std::mt19937_64 order_rng(options.seed);
  std::mt19937_64 sc_rng(options.seed * 0x9e3779b97f4a7c15ULL + 1);
  std::mt19937_64 ac_rng(options.seed * 0xbf58476d1ce4e5b9ULL + 2);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  std::span<Parameter> params = model.parameters().parameters();
  AdamState adam;
  AdamOptions adam_opts;
  TrainStats stats;
  for (long u = 0; u < options.updates; ++u) {
    std::vector<TrainingExample> examples;
    for (int b = 0; b < options.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      examples.push_back(sample_example(corpus[order[cursor++]], options, ac_spec, sc_rng, ac_rng));
    }
    Batch batch = std::move(make_batches(std::move(examples), options.batch_size, ec.chunk_sizes,
                                         options.seed * 1000003ULL + static_cast<std::uint64_t>(u), false)
                                .front());
    if (u == 0) stats.first_batch_hash = batch_source_hash(batch);

    model.parameters().zero_grad();
    const JointLoss loss = model.batch_loss(batch);
    const double value = loss.total.item();
    const double lr = scheduled_lr(options, u);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite loss at update " << u << " (lr " << lr << ", ctc " << loss.ctc << ", aed " << loss.aed
          << ", last grad norms:";
      for (const auto& p : params) msg << ' ' << p.name << '=' << p.tensor.grad().norm();
      msg << ")";
      throw NonFiniteLossError(msg.str());
    }
    backward(loss.total);
    const double gnorm = gradient_norm(params);
    if (!std::isfinite(gnorm))
      throw NonFiniteLossError("non-finite gradient norm at update " + std::to_string(u) + " (lr " +
                               std::to_string(lr) + ")");
    if (options.clip > 0) clip_gradients(params, options.clip);
    adam_opts.lr = lr;
    adam_step(params, adam, adam_opts);

    stats.losses.push_back(value);
    stats.ctc_skipped += loss.ctc_skipped;
    stats.updates = u + 1;
    if (log && options.log_every > 0 && (u % options.log_every == 0 || u + 1 == options.updates)) {
      char line[200];
      std::snprintf(line, sizeof line, "update %6ld  loss %.4f  ctc %.4f  aed %.4f  |g| %.3f  lr %.2e  M=%d\n", u,
                    value, loss.ctc, loss.aed, gnorm, lr, batch.chunk);
      *log << line << std::flush;
    }
  }
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

double teacher_forced_accuracy(const Model& model, std::span<const AcousticStream> corpus, bool semantic) {
  NoGradGuard no_grad;
  const int r = model.encoder().config().mask.decimation;
  long correct = 0;
  long total = 0;
  for (const auto& rec : corpus) {
    for (int s = 0; s < static_cast<int>(rec.segments.size()); ++s) {
      const TrainingExample ex = single_segment_example(rec, s, r, semantic);
      const EncodingSequence enc = model.encode(ex.features);
      const Tensor memory = model.decoder().prepare_memory(Tensor(enc.encodings));
      std::vector<int> inputs{kBos};
      inputs.insert(inputs.end(), ex.targets.begin(), ex.targets.end() - 1);
      const Matrix logits = model.decoder().forward(memory, inputs).value();
      for (Index i = 0; i < logits.rows(); ++i) {
        Index best = 0;
        logits.row(i).maxCoeff(&best);
        correct += best == ex.targets[static_cast<std::size_t>(i)];
        ++total;
      }
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

WerReport evaluate_condition(const Model& model, std::span<const AcousticStream> corpus, const DecodeConfig& config) {
  std::vector<UtteranceRow> rows;
  for (const auto& rec : corpus) {
    const TwoPassResult res = two_pass_decode(model, rec, config);
    std::vector<int> ref;
    for (const auto& s : rec.segments) ref.insert(ref.end(), s.transcript.begin(), s.transcript.end());
    int decodes = 0;
    int truncated = 0;
    int failed = 0;
    for (const auto& s : res.segments) {
      if (!s.error.empty()) {
        ++failed;
        continue;
      }
      ++decodes;
      truncated += s.hypothesis.truncated;
    }
    rows.push_back(score_utterance(rec.id, ref, res.transcript(), decodes, truncated, failed));
  }
  return pathology_report(std::move(rows));
}

std::vector<EvalCell> evaluate(const Model& model, std::span<const AcousticStream> corpus, const EvalMatrix& matrix,
                               const DecodeConfig& base, const std::string& model_name) {
  std::vector<EvalCell> cells;
  for (EncodingsMode enc : matrix.encodings)
    for (DecodeMode mode : matrix.modes)
      for (SegmentationSource seg : matrix.segmentations) {
        EvalCell cell;
        cell.decode = base;
        cell.decode.encodings = enc;
        cell.decode.mode = mode;
        cell.decode.segmentation = seg;
        cell.condition = {model_name, to_string(enc), to_string(mode), to_string(seg)};
        cell.report = evaluate_condition(model, corpus, cell.decode);
        cells.push_back(std::move(cell));
      }
  return cells;
}

// --- configuration --------------------------------------------------------

RunConfig RunConfig::from_config(const KeyValueConfig& c) {
  RunConfig r;
  SyntheticCorpusSpec& s = r.corpus;
  // A checkpoint's vocabulary implies the corpus token count when unspecified.
  s.content_tokens = c.get_int("corpus.content_tokens",
                               c.has("vocab") ? c.get_int("vocab", 0) - kFirstContentToken : s.content_tokens);
  s.feature_dim = c.get_int("features", s.feature_dim);
  s.decimation = c.get_int("mask.decimation", s.decimation);
  s.frames_per_token_min = c.get_int("corpus.frames_per_token_min", s.frames_per_token_min);
  s.frames_per_token_max = c.get_int("corpus.frames_per_token_max", s.frames_per_token_max);
  s.noise = c.get_double("corpus.noise", s.noise);
  s.silence_level = c.get_double("corpus.silence_level", s.silence_level);
  s.gap_min = c.get_int("corpus.gap_min", s.gap_min);
  s.gap_max = c.get_int("corpus.gap_max", s.gap_max);
  s.sentences_min = c.get_int("corpus.sentences_min", s.sentences_min);
  s.sentences_max = c.get_int("corpus.sentences_max", s.sentences_max);
  s.tokens_min = c.get_int("corpus.tokens_min", s.tokens_min);
  s.tokens_max = c.get_int("corpus.tokens_max", s.tokens_max);
  s.prototype_seed = c.get_u64("corpus.prototype_seed", s.prototype_seed);
  s.seed = c.get_u64("corpus.seed", s.seed);
  r.train_recordings = c.get_int("corpus.train_recordings", r.train_recordings);
  r.test_recordings = c.get_int("corpus.test_recordings", r.test_recordings);

  KeyValueConfig mc = c;
  if (!mc.has("vocab")) mc.set("vocab", std::to_string(kFirstContentToken + s.content_tokens));
  r.model = ModelConfig::from_config(mc);
  if (r.model.encoder.vocab != kFirstContentToken + s.content_tokens)
    throw ConfigError("vocab must equal 4 reserved ids plus corpus.content_tokens");

  TrainOptions& t = r.train;
  t.updates = c.get_long("train.updates", t.updates);
  t.batch_size = c.get_int("train.batch_size", t.batch_size);
  t.lr = c.get_double("train.lr", t.lr);
  t.warmup = c.get_long("train.warmup", t.warmup);
  t.final_lr_fraction = c.get_double("train.final_lr_fraction", t.final_lr_fraction);
  t.clip = c.get_double("train.clip", t.clip);
  t.sc_max_duration = c.get_int("train.sc_max_duration", t.sc_max_duration);
  t.ac_probability = c.get_double("train.ac_probability", t.ac_probability);
  t.ac_silence = c.get_bool("train.ac_silence", t.ac_silence);
  t.flags.sc = c.get_bool("train.sc", t.flags.sc);
  t.flags.ac = c.get_bool("train.ac", t.flags.ac);
  t.flags.ss = c.get_bool("train.ss", t.flags.ss);
  t.flags.pe = r.model.decoder.pe_enabled;
  t.seed = c.get_u64("train.seed", t.seed);
  t.log_every = c.get_long("train.log_every", t.log_every);

  DecodeConfig& d = r.decode;
  d.mode = parse_decode_mode(c.get("decode.mode", to_string(d.mode)));
  d.beam = c.get_int("decode.beam", d.beam);
  d.max_tokens = c.get_int("decode.max_tokens", d.max_tokens);
  d.alpha = c.get_double("decode.alpha", d.alpha);
  d.rescore_weight = c.get_double("decode.rescore_weight", d.rescore_weight);
  d.nbest = c.get_int("decode.nbest", d.nbest);
  d.length_penalty = c.get_double("decode.length_penalty", d.length_penalty);
  d.segmentation = parse_segmentation(c.get("decode.segmentation", to_string(d.segmentation)));
  d.encodings = parse_encodings(c.get("decode.encodings", to_string(d.encodings)));
  d.vad_threshold = c.get_double("decode.vad_threshold", d.vad_threshold);
  d.vad_jitter = c.get_int("decode.vad_jitter", d.vad_jitter);
  d.vad_seed = c.get_u64("decode.vad_seed", d.vad_seed);
  s.validate();
  d.validate();
  return r;
}

KeyValueConfig RunConfig::to_config() const {
  KeyValueConfig c = model.to_config();
  const SyntheticCorpusSpec& s = corpus;
  c.set("corpus.content_tokens", std::to_string(s.content_tokens));
  c.set("corpus.frames_per_token_min", std::to_string(s.frames_per_token_min));
  c.set("corpus.frames_per_token_max", std::to_string(s.frames_per_token_max));
  c.set("corpus.noise", std::to_string(s.noise));
  c.set("corpus.silence_level", std::to_string(s.silence_level));
  c.set("corpus.gap_min", std::to_string(s.gap_min));
  c.set("corpus.gap_max", std::to_string(s.gap_max));
  c.set("corpus.sentences_min", std::to_string(s.sentences_min));
  c.set("corpus.sentences_max", std::to_string(s.sentences_max));
  c.set("corpus.tokens_min", std::to_string(s.tokens_min));
  c.set("corpus.tokens_max", std::to_string(s.tokens_max));
  c.set("corpus.prototype_seed", std::to_string(s.prototype_seed));
  c.set("corpus.seed", std::to_string(s.seed));
  c.set("corpus.train_recordings", std::to_string(train_recordings));
  c.set("corpus.test_recordings", std::to_string(test_recordings));
  c.set("train.updates", std::to_string(train.updates));
  c.set("train.batch_size", std::to_string(train.batch_size));
  c.set("train.lr", std::to_string(train.lr));
  c.set("train.warmup", std::to_string(train.warmup));
  c.set("train.final_lr_fraction", std::to_string(train.final_lr_fraction));
  c.set("train.clip", std::to_string(train.clip));
  c.set("train.sc_max_duration", std::to_string(train.sc_max_duration));
  c.set("train.ac_probability", std::to_string(train.ac_probability));
  c.set("train.ac_silence", train.ac_silence ? "true" : "false");
  c.set("train.sc", train.flags.sc ? "true" : "false");
  c.set("train.ac", train.flags.ac ? "true" : "false");
  c.set("train.ss", train.flags.ss ? "true" : "false");
  c.set("train.seed", std::to_string(train.seed));
  c.set("train.log_every", std::to_string(train.log_every));
  c.set("decode.mode", to_string(decode.mode));
  c.set("decode.beam", std::to_string(decode.beam));
  c.set("decode.max_tokens", std::to_string(decode.max_tokens));
  c.set("decode.alpha", std::to_string(decode.alpha));
  c.set("decode.rescore_weight", std::to_string(decode.rescore_weight));
  c.set("decode.nbest", std::to_string(decode.nbest));
  c.set("decode.length_penalty", std::to_string(decode.length_penalty));
  c.set("decode.segmentation", to_string(decode.segmentation));
  c.set("decode.encodings", to_string(decode.encodings));
  c.set("decode.vad_threshold", std::to_string(decode.vad_threshold));
  c.set("decode.vad_jitter", std::to_string(decode.vad_jitter));
  c.set("decode.vad_seed", std::to_string(decode.vad_seed));
  return c;
}

// --- ablation -------------------------------------------------------------

ModelConfig ablation_model_config(const ModelConfig& base, int model_id, std::uint64_t seed) {
  ModelConfig m = base;
  m.decoder.pe_enabled = ablation_flags(model_id).pe;
  m.seed = seed;
  m.encoder.seed = seed;
  return m;
}

TrainOptions ablation_train_options(const TrainOptions& base, int model_id, std::uint64_t seed) {
  TrainOptions t = base;
  t.flags = ablation_flags(model_id);
  t.seed = seed;
  return t;
}

namespace {

std::string train_key(const ModelConfig& m, const TrainOptions& t) {
  std::ostringstream s;
  s << m.to_config().canonical() << t.updates << ' ' << t.batch_size << ' ' << t.lr << ' ' << t.warmup << ' '
    << t.final_lr_fraction << ' ' << t.clip << ' ' << t.sc_max_duration << ' ' << t.ac_probability << ' '
    << t.ac_silence << ' ' << t.flags.describe() << ' ' << t.seed;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a_64(s.str())));
  return hex;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::optional<double> AblationReport::median(int model_id, const std::string& encodings, const std::string& mode,
                                             const std::string& segmentation,
                                             const std::function<double(const WerReport&)>& metric) const {
  std::vector<double> values;
  for (const auto& run : runs) {
    if (run.model_id != model_id || !run.error.empty()) continue;
    for (const auto& cell : run.cells)
      if (cell.condition.encodings == encodings && cell.condition.mode == mode &&
          cell.condition.segmentation == segmentation)
        values.push_back(metric(cell.report));
  }
  if (values.empty()) return std::nullopt;
  return median_of(std::move(values));
}

std::string AblationReport::table(const AblationSpec& spec) const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %-12s %-4s %-9s", "model", "flags", "enc", "segments");
  out << line;
  for (DecodeMode m : spec.matrix.modes) {
    std::snprintf(line, sizeof line, " %9s", (to_string(m) + " wer%").c_str());
    out << line;
  }
  out << "   trunc(AD)\n";
  std::vector<std::pair<std::string, std::string>> rows_spec;
  for (int id : spec.models) {
    for (EncodingsMode e : spec.matrix.encodings)
      for (SegmentationSource s : spec.matrix.segmentations) {
        std::snprintf(line, sizeof line, "M%-5d %-12s %-4s %-9s", id, ablation_flags(id).describe().c_str(),
                      to_string(e).c_str(), to_string(s).c_str());
        out << line;
        for (DecodeMode m : spec.matrix.modes) {
          const auto v = median(id, to_string(e), to_string(m), to_string(s), [](const WerReport& r) { return r.wer; });
          if (v)
            std::snprintf(line, sizeof line, " %9.2f", 100.0 * *v);
          else
            std::snprintf(line, sizeof line, " %9s", "-");
          out << line;
        }
        const auto t = median(id, to_string(e), "AD", to_string(s),
                              [](const WerReport& r) { return r.truncation_rate; });
        if (t)
          std::snprintf(line, sizeof line, "   %9.3f\n", *t);
        else
          std::snprintf(line, sizeof line, "   %9s\n", "-");
        out << line;
      }
  }
  for (const auto& run : runs)
    if (!run.error.empty()) out << "M" << run.model_id << " seed " << run.seed << " failed: " << run.error << "\n";
  return out.str();
}

AblationReport ablate(const AblationSpec& spec, std::span<const AcousticStream> train_corpus,
                      std::span<const AcousticStream> test_corpus, const std::optional<std::filesystem::path>& run_dir,
                      std::ostream* log) {
  AblationReport report;
  if (run_dir) std::filesystem::create_directories(*run_dir);
  for (std::uint64_t seed : spec.seeds) {
    for (int id : spec.models) {
      AblationRun run;
      run.model_id = id;
      run.seed = seed;
      try {
        const ModelConfig mc = ablation_model_config(spec.model, id, seed);
        const TrainOptions to = ablation_train_options(spec.train, id, seed);
        std::unique_ptr<Model> model;
        std::optional<std::filesystem::path> ckpt;
        if (run_dir) ckpt = *run_dir / ("m" + std::to_string(id) + "_s" + std::to_string(seed) + "_" + train_key(mc, to) + ".ckpt");
        if (ckpt && std::filesystem::exists(*ckpt)) {
          model = Model::load(*ckpt, mc.architecture_hash());
          if (log) *log << "M" << id << " seed " << seed << ": reusing " << ckpt->string() << "\n";
        } else {
          model = std::make_unique<Model>(mc);
          if (log) *log << "M" << id << " seed " << seed << " (" << to.flags.describe() << "): training\n";
          run.stats = train(*model, train_corpus, to, log);
          if (ckpt) model->save(*ckpt);
        }
        const std::string name = "M" + std::to_string(id);
        run.cells = evaluate(*model, test_corpus, spec.matrix, spec.decode, name);
        if (spec.segmentation_cells) {
          EvalMatrix extra;
          extra.encodings = {EncodingsMode::Lfe};
          extra.modes = {DecodeMode::AD, DecodeMode::CAT};
          extra.segmentations = {SegmentationSource::Vad};
          if (to.flags.ss) extra.segmentations.push_back(SegmentationSource::Semantic);
          auto more = evaluate(*model, test_corpus, extra, spec.decode, name);
          run.cells.insert(run.cells.end(), more.begin(), more.end());
        }
      } catch (const std::exception& e) {
        run.error = e.what();
        if (log) *log << "M" << id << " seed " << seed << " failed: " << e.what() << "\n";
      }
      report.runs.push_back(std::move(run));
    }
  }
  return report;
}

}  // namespace lfad
