// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "lfad/decode.hpp"
#include "lfad/model.hpp"

using namespace lfad;
using namespace lfad::testing;

TEST_CASE("joint loss gradients match finite differences for every parameter") {
  Model model(tiny_model_config());
  const AcousticStream rec = tiny_stream(1);
  const TrainingExample ex = single_segment_example(rec, 0, 2, false);
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (auto& p : model.parameters().parameters()) params.push_back(p.tensor), names.push_back(p.name);
  const auto report = gradcheck([&] { return model.loss(ex, 2).total; }, params, names, 1e-4);
  INFO(report.first_failure);
  CHECK(report.ok());
  CHECK(report.checked == model.parameters().scalar_count());
}

TEST_CASE("joint loss mixes the two objectives with the CTC weight") {
  Model model(tiny_model_config());
  const TrainingExample ex = single_segment_example(tiny_stream(2), 0, 2, false);
  const JointLoss l = model.loss(ex, 2);
  CHECK(l.ctc_skipped == 0);
  CHECK(l.total.item() == doctest::Approx(0.3 * l.ctc + 0.7 * l.aed).epsilon(1e-12));

  // Four frames cannot carry five labels; only the attention term remains.
  TrainingExample tight = ex;
  tight.targets = {4, 5, 6, 7, 4, kEos};
  const JointLoss s = model.loss(tight, 2);
  CHECK(s.ctc_skipped == 1);
  CHECK(s.total.item() == doctest::Approx(0.7 * s.aed).epsilon(1e-12));
}

TEST_CASE("batch loss averages the example losses") {
  Model model(tiny_model_config());
  std::vector<TrainingExample> examples;
  for (std::uint64_t s = 1; s <= 3; ++s) examples.push_back(single_segment_example(tiny_stream(s), 0, 2, false));
  examples[1].features.conservativeResize(6, 3);  // shorter example forces padding
  examples[1].valid_end = 6;
  const std::vector<int> chunks{2};
  const auto batches = make_batches(examples, 3, chunks, 1, false);
  REQUIRE(batches.size() == 1);
  Scalar expected = 0;
  for (const auto& ex : examples) expected += model.loss(ex, 2).total.item();
  CHECK(model.batch_loss(batches[0]).total.item() == doctest::Approx(expected / 3).epsilon(1e-12));
}

TEST_CASE("checkpoints round trip and refuse foreign architectures") {
  const auto dir = std::filesystem::temp_directory_path() / "lfad_model_test";
  std::filesystem::create_directories(dir);
  Model model(tiny_model_config());
  model.save(dir / "m.ckpt");
  const auto loaded = Model::load(dir / "m.ckpt", model.config().architecture_hash());
  const Matrix f = tiny_stream(5).features;
  CHECK(loaded->ctc(loaded->encode(f).encodings).log_probs == model.ctc(model.encode(f).encodings).log_probs);

  ModelConfig other = tiny_model_config(false);
  CHECK(other.architecture_hash() != model.config().architecture_hash());
  CHECK_THROWS_AS(Model::load(dir / "m.ckpt", other.architecture_hash()), VersionError);
  ModelConfig reseeded = tiny_model_config();
  reseeded.seed = 99;
  reseeded.ctc_weight = 0.5;
  CHECK(reseeded.architecture_hash() == model.config().architecture_hash());
  std::filesystem::remove_all(dir);
}

TEST_CASE("config text round trips") {
  const ModelConfig c = tiny_model_config(false);
  const ModelConfig back = ModelConfig::from_config(c.to_config());
  CHECK(back.architecture_hash() == c.architecture_hash());
  CHECK(back.to_config().canonical() == c.to_config().canonical());
  ModelConfig bad = c;
  bad.decoder.width = 16;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("long-form decoding encodes each stream exactly once") {
  Model model(tiny_model_config());
  AcousticStream stream;
  std::mt19937_64 rng(6);
  stream.features = random_matrix(40, 3, rng, 2.0);
  stream.segments = {Segment{0, 4, {4}, false}, Segment{6, 11, {5}, false}, Segment{13, 19, {6}, false}};
  for (auto seg : {SegmentationSource::Oracle, SegmentationSource::Semantic, SegmentationSource::Vad}) {
    DecodeConfig config;
    config.segmentation = seg;
    config.encodings = EncodingsMode::Lfe;
    for (auto mode : {DecodeMode::AD, DecodeMode::CAT, DecodeMode::AR}) {
      config.mode = mode;
      model.reset_encoder_calls();
      two_pass_decode(model, stream, config);
      CHECK(model.encoder_calls() == 1);
    }
  }
  DecodeConfig sfe;
  sfe.segmentation = SegmentationSource::Oracle;
  sfe.encodings = EncodingsMode::Sfe;
  model.reset_encoder_calls();
  const TwoPassResult r = two_pass_decode(model, stream, sfe);
  CHECK(model.encoder_calls() == 1 + 3);
  CHECK(r.segments.size() == 3);
}

TEST_CASE("oracle LFE segments are slices of the full-stream encodings") {
  Model model(tiny_model_config());
  AcousticStream stream;
  std::mt19937_64 rng(7);
  stream.features = random_matrix(30, 3, rng);
  stream.segments = {Segment{3, 8, {4}, false}};
  DecodeConfig config;
  config.segmentation = SegmentationSource::Oracle;
  const auto full = model.encode(stream.features);
  const Matrix memory = model.decoder().prepare_memory(Tensor(Matrix(full.encodings.middleRows(3, 6)))).value();
  const CtcOutput lattice{model.ctc(full.encodings).log_probs.middleRows(3, 6)};
  const Hypothesis direct = decode_segment(model.decoder(), memory, lattice, config);
  const TwoPassResult r = two_pass_decode(model, stream, config);
  REQUIRE(r.segments.size() == 1);
  CHECK(r.segments[0].hypothesis.tokens == direct.tokens);
  CHECK(r.segments[0].hypothesis.score == direct.score);
}

TEST_CASE("failing segments are recorded and skipped") {
  Model model(tiny_model_config());
  AcousticStream stream = tiny_stream(8);
  stream.segments = {Segment{0, 1, {4}, false}, Segment{2, 40, {5}, false}};
  DecodeConfig config;
  config.segmentation = SegmentationSource::Oracle;
  const TwoPassResult r = two_pass_decode(model, stream, config);
  REQUIRE(r.segments.size() == 2);
  CHECK(r.segments[0].error.empty());
  CHECK_FALSE(r.segments[1].error.empty());
}
