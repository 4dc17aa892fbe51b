// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// lfad: corpus generation, training, decoding and ablation from the shell.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lfad/config.hpp"
#include "lfad/datapipe.hpp"
#include "lfad/decode.hpp"
#include "lfad/harness.hpp"
#include "lfad/masking.hpp"
#include "lfad/metrics.hpp"
#include "lfad/model.hpp"

namespace fs = std::filesystem;
using namespace lfad;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "flat key = value configuration file");
  cmd->add_option("--seed", c.seed, "seed override");
}

KeyValueConfig load_config(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int gen_corpus(const Common& common, const std::string& spec, const std::string& out, std::optional<int> n) {
  KeyValueConfig cfg = load_config(spec.empty() ? common.config : spec);
  if (common.seed) cfg.set("corpus.seed", std::to_string(*common.seed));
  const RunConfig run = RunConfig::from_config(cfg);
  const auto corpus = generate_corpus(run.corpus, n.value_or(run.train_recordings));
  write_corpus(out, corpus);
  std::cout << "wrote " << corpus.size() << " recordings to " << out << "\n";
  return 0;
}

int train_cmd(const Common& common, const std::string& corpus_path, const std::string& out_dir) {
  KeyValueConfig cfg = load_config(common.config);
  if (common.seed) {
    cfg.set("train.seed", std::to_string(*common.seed));
    cfg.set("model.seed", std::to_string(*common.seed));
  }
  const RunConfig run = RunConfig::from_config(cfg);
  const auto corpus = read_corpus(corpus_path);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "config.cfg", run.to_config().canonical());
  Model model(run.model);
  const TrainStats stats = train(model, corpus, run.train, &std::cout);
  model.save(fs::path(out_dir) / "model.ckpt");
  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl");
  for (std::size_t i = 0; i < stats.losses.size(); ++i)
    metrics << nlohmann::json{{"update", i}, {"loss", stats.losses[i]}}.dump() << "\n";
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(run.model.architecture_hash()));
  std::cout << "trained " << stats.updates << " updates in " << stats.seconds << " s; config hash " << hash
            << "; checkpoint " << (fs::path(out_dir) / "model.ckpt").string() << "\n";
  return 0;
}

int decode_cmd(const Common& common, const std::string& ckpt, const std::string& input, const std::string& mode,
               const std::string& segmentation, std::optional<int> beam, std::optional<double> alpha,
               const std::string& encodings) {
  KeyValueConfig cfg = load_config(common.config);
  auto model = Model::load(ckpt);
  cfg.merge(model->config().to_config());
  RunConfig run = RunConfig::from_config(cfg);
  DecodeConfig d = run.decode;
  if (!mode.empty()) d.mode = parse_decode_mode(mode);
  if (!segmentation.empty()) d.segmentation = parse_segmentation(segmentation);
  if (!encodings.empty()) d.encodings = parse_encodings(encodings);
  if (beam) d.beam = *beam;
  if (alpha) d.alpha = *alpha;
  if (common.seed) d.vad_seed = *common.seed;
  d.validate();

  const auto corpus = read_corpus(input);
  std::vector<UtteranceRow> rows;
  for (const auto& rec : corpus) {
    const TwoPassResult res = two_pass_decode(*model, rec, d);
    std::vector<int> ref;
    for (const auto& s : rec.segments) ref.insert(ref.end(), s.transcript.begin(), s.transcript.end());
    nlohmann::json segs = nlohmann::json::array();
    int decodes = 0, truncated = 0, failed = 0;
    for (const auto& s : res.segments) {
      nlohmann::json j{{"t_b", s.segment.t_b}, {"t_e", s.segment.t_e}, {"tokens", s.hypothesis.tokens},
                       {"truncated", s.hypothesis.truncated}};
      if (!s.error.empty()) {
        j["error"] = s.error;
        ++failed;
      } else {
        ++decodes;
        truncated += s.hypothesis.truncated;
      }
      segs.push_back(std::move(j));
    }
    std::cout << nlohmann::json{{"id", rec.id}, {"hypothesis", res.transcript()}, {"segments", segs}}.dump() << "\n";
    rows.push_back(score_utterance(rec.id, ref, res.transcript(), decodes, truncated, failed));
  }
  const WerReport report = pathology_report(std::move(rows));
  const Condition cond{ckpt, to_string(d.encodings), to_string(d.mode), to_string(d.segmentation)};
  std::cout << summary_json(cond, report) << "\n";
  std::cerr << summary_table(std::span(&cond, 1), std::span(&report, 1));
  return 0;
}

int evaluate_cmd(const Common& common, const std::string& ckpt, const std::string& input, const std::string& out_dir) {
  KeyValueConfig cfg = load_config(common.config);
  std::unique_ptr<Model> model;
  if (!common.config.empty()) {
    // The configuration names the architecture the checkpoint must match.
    const RunConfig expected = RunConfig::from_config(cfg);
    model = Model::load(ckpt, expected.model.architecture_hash());
  } else {
    model = Model::load(ckpt);
  }
  KeyValueConfig merged = cfg;
  merged.merge(model->config().to_config());
  const RunConfig run = RunConfig::from_config(merged);
  DecodeConfig d = run.decode;
  if (common.seed) d.vad_seed = *common.seed;
  const auto corpus = read_corpus(input);
  EvalMatrix matrix;
  if (cfg.has("eval.segmentations")) {
    matrix.segmentations.clear();
    std::stringstream ss(cfg.get("eval.segmentations", ""));
    for (std::string item; std::getline(ss, item, ',');) matrix.segmentations.push_back(parse_segmentation(item));
  }
  const auto cells = evaluate(*model, corpus, matrix, d, fs::path(ckpt).stem().string());
  std::vector<Condition> conds;
  std::vector<WerReport> reports;
  std::optional<std::ofstream> jsonl;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    jsonl.emplace(fs::path(out_dir) / "eval.jsonl");
  }
  for (const auto& c : cells) {
    conds.push_back(c.condition);
    reports.push_back(c.report);
    std::cout << summary_json(c.condition, c.report) << "\n";
    if (jsonl) *jsonl << summary_json(c.condition, c.report) << "\n";
  }
  const std::string table = summary_table(conds, reports);
  std::cout << table;
  if (!out_dir.empty()) write_text(fs::path(out_dir) / "report.txt", table);
  return 0;
}

int ablate_cmd(const Common& common, const std::string& train_path, const std::string& test_path,
               const std::string& out_dir, const std::vector<int>& models, std::optional<int> seeds) {
  const KeyValueConfig cfg = load_config(common.config);
  const RunConfig run = RunConfig::from_config(cfg);
  AblationSpec spec;
  spec.model = run.model;
  spec.train = run.train;
  spec.decode = run.decode;
  if (!models.empty()) spec.models = models;
  const std::uint64_t base = common.seed.value_or(1);
  const int replicas = seeds.value_or(4);
  spec.seeds.clear();
  for (int i = 0; i < replicas; ++i) spec.seeds.push_back(base + static_cast<std::uint64_t>(i));

  std::vector<AcousticStream> train_corpus;
  std::vector<AcousticStream> test_corpus;
  if (!train_path.empty()) {
    train_corpus = read_corpus(train_path);
  } else {
    train_corpus = generate_corpus(run.corpus, run.train_recordings);
  }
  if (!test_path.empty()) {
    test_corpus = read_corpus(test_path);
  } else {
    SyntheticCorpusSpec test = run.corpus;
    test.seed = run.corpus.seed + 1000;
    test_corpus = generate_corpus(test, run.test_recordings);
  }
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "config.cfg", run.to_config().canonical());
  const AblationReport report = ablate(spec, train_corpus, test_corpus, fs::path(out_dir) / "checkpoints", &std::cerr);
  std::ofstream jsonl(fs::path(out_dir) / "metrics.jsonl");
  for (const auto& r : report.runs)
    for (const auto& c : r.cells) {
      auto j = nlohmann::json::parse(summary_json(c.condition, c.report));
      j["seed"] = r.seed;
      jsonl << j.dump() << "\n";
    }
  const std::string table = report.table(spec);
  write_text(fs::path(out_dir) / "report.txt", table);
  std::cout << table;
  return 0;
}

int inspect_mask(const std::string& spec_text, Index frames, Index offset) {
  std::vector<int> v;
  std::stringstream ss(spec_text);
  for (std::string item; std::getline(ss, item, ',');) v.push_back(std::stoi(item));
  if (v.size() != 4) throw ConfigError("--spec expects L,N,M,R");
  MaskSpec spec{v[0], v[1], v[2], v[3]};
  spec.validate();
  const ContextProfile p = context_profile(spec, frames, offset);
  std::cout << "C_L^max = " << spec.left_context_max() << "  C_R^max = " << spec.right_context_max()
            << "  (acoustic frames)\n";
  const BoolMatrix mask = build_layer_mask(spec, frames, 0, offset);
  std::cout << "layer mask (query rows, key columns):\n";
  for (Index q = 0; q < frames; ++q) {
    std::cout << "  ";
    for (Index k = 0; k < frames; ++k) std::cout << (mask(q, k) ? '#' : '.');
    std::cout << "\n";
  }
  std::cout << "frame   C_L   C_R   LFE\n";
  for (Index t = 0; t < frames; ++t) {
    char line[64];
    std::snprintf(line, sizeof line, "%5ld %5ld %5ld   %s\n", static_cast<long>(t), p.left[static_cast<std::size_t>(t)],
                  p.right[static_cast<std::size_t>(t)], is_lfe(p, t) ? "yes" : "no");
    std::cout << line;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lfad: long-form attention decoding toolkit"};
  app.require_subcommand(1);

  Common gen_c, train_c, decode_c, eval_c, ablate_c, mask_c;

  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus as JSON lines");
  add_common(gen, gen_c);
  std::string gen_spec, gen_out;
  std::optional<int> gen_n;
  gen->add_option("--spec", gen_spec, "corpus configuration (defaults to --config)");
  gen->add_option("--out", gen_out, "output path")->required();
  gen->add_option("--n", gen_n, "number of recordings");

  auto* tr = app.add_subcommand("train", "train one model");
  add_common(tr, train_c);
  std::string tr_corpus, tr_out;
  tr->add_option("--corpus", tr_corpus, "training corpus")->required();
  tr->add_option("--out", tr_out, "run directory")->required();

  auto* dec = app.add_subcommand("decode", "two-pass decode a corpus");
  add_common(dec, decode_c);
  std::string dec_ckpt, dec_input, dec_mode, dec_seg, dec_enc;
  std::optional<int> dec_beam;
  std::optional<double> dec_alpha;
  dec->add_option("--ckpt", dec_ckpt, "checkpoint")->required();
  dec->add_option("--input", dec_input, "corpus to decode")->required();
  dec->add_option("--mode", dec_mode, "ar | ad | cat");
  dec->add_option("--segmentation", dec_seg, "vad | semantic | oracle");
  dec->add_option("--beam", dec_beam, "beam size");
  dec->add_option("--alpha", dec_alpha, "CTC weight for cat");
  dec->add_option("--encodings", dec_enc, "sfe | lfe");

  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint over the SFE/LFE x mode matrix");
  add_common(ev, eval_c);
  std::string ev_ckpt, ev_input, ev_out;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  ev->add_option("--input", ev_input, "test corpus")->required();
  ev->add_option("--out", ev_out, "run directory for eval.jsonl and report.txt");

  auto* ab = app.add_subcommand("ablate", "train and evaluate models 0-5");
  add_common(ab, ablate_c);
  std::string ab_train, ab_test, ab_out;
  std::vector<int> ab_models;
  std::optional<int> ab_seeds;
  ab->add_option("--train", ab_train, "training corpus (generated when omitted)");
  ab->add_option("--test", ab_test, "test corpus (generated when omitted)");
  ab->add_option("--out", ab_out, "run directory")->required();
  ab->add_option("--models", ab_models, "subset of model ids")->delimiter(',');
  ab->add_option("--seeds", ab_seeds, "replicas per model (default 4)");

  auto* im = app.add_subcommand("inspect-mask", "print a layer mask and per-frame contexts");
  add_common(im, mask_c);
  std::string im_spec;
  Index im_frames = 12;
  Index im_offset = 0;
  im->add_option("--spec", im_spec, "L,N,M,R")->required();
  im->add_option("--frames", im_frames, "encoding frames");
  im->add_option("--offset", im_offset, "absolute index of frame 0");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_corpus(gen_c, gen_spec, gen_out, gen_n);
    if (*tr) return train_cmd(train_c, tr_corpus, tr_out);
    if (*dec) return decode_cmd(decode_c, dec_ckpt, dec_input, dec_mode, dec_seg, dec_beam, dec_alpha, dec_enc);
    if (*ev) return evaluate_cmd(eval_c, ev_ckpt, ev_input, ev_out);
    if (*ab) return ablate_cmd(ablate_c, ab_train, ab_test, ab_out, ab_models, ab_seeds);
    if (*im) return inspect_mask(im_spec, im_frames, im_offset);
  } catch (const VersionError& e) {
    std::cerr << "lfad: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "lfad: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
