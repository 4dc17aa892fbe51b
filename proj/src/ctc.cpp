// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/ctc.hpp"

#include <fstream>

namespace lfad {

Index ctc_min_frames(std::span<const int> target) {
  Index frames = static_cast<Index>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++frames;
  return frames;
}

Tensor ctc_loss(const Tensor& log_probs, std::span<const int> target, int blank) {
  const Index frames = log_probs.rows();
  const Index vocab = log_probs.cols();
  if (frames < 1) throw InfeasibleAlignmentError("ctc_loss: empty lattice");
  for (int id : target)
    if (id < 0 || id >= vocab || id == blank)
      throw IndexError("ctc_loss: target id " + std::to_string(id) + " invalid for vocabulary of " +
                       std::to_string(vocab));
  if (ctc_min_frames(target) > frames)
    throw InfeasibleAlignmentError("ctc_loss: target of " + std::to_string(target.size()) +
                                   " labels needs " + std::to_string(ctc_min_frames(target)) +
                                   " frames, lattice has " + std::to_string(frames));

  const Matrix& lp = log_probs.value();
  const Index labels = 2 * static_cast<Index>(target.size()) + 1;
  std::vector<int> ext(static_cast<std::size_t>(labels), blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto skip_ok = [&](Index s) {
    return s >= 2 && ext[static_cast<std::size_t>(s)] != blank &&
           ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };

  Matrix alpha = Matrix::Constant(frames, labels, kLogZero);
  Matrix beta = Matrix::Constant(frames, labels, kLogZero);
  alpha(0, 0) = lp(0, ext[0]);
  if (labels > 1) alpha(0, 1) = lp(0, ext[1]);
  for (Index t = 1; t < frames; ++t) {
    for (Index s = 0; s < labels; ++s) {
      Scalar acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (skip_ok(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kLogZero) alpha(t, s) = acc + lp(t, ext[static_cast<std::size_t>(s)]);
    }
  }
  beta(frames - 1, labels - 1) = lp(frames - 1, ext.back());
  if (labels > 1) beta(frames - 1, labels - 2) = lp(frames - 1, ext[static_cast<std::size_t>(labels - 2)]);
  for (Index t = frames - 2; t >= 0; --t) {
    for (Index s = 0; s < labels; ++s) {
      Scalar acc = beta(t + 1, s);
      if (s + 1 < labels) acc = log_add(acc, beta(t + 1, s + 1));
      if (s + 2 < labels && skip_ok(s + 2)) acc = log_add(acc, beta(t + 1, s + 2));
      if (acc != kLogZero) beta(t, s) = acc + lp(t, ext[static_cast<std::size_t>(s)]);
    }
  }

  Scalar log_p = alpha(frames - 1, labels - 1);
  if (labels > 1) log_p = log_add(log_p, alpha(frames - 1, labels - 2));

  // d(-log P)/d lp(t, k) = -sum_{s: ext_s = k} alpha*beta / (y_t(k) P)
  Matrix grad = Matrix::Zero(frames, vocab);
  for (Index t = 0; t < frames; ++t) {
    for (Index s = 0; s < labels; ++s) {
      const Scalar ab = alpha(t, s) + beta(t, s);
      if (ab == kLogZero) continue;
      const int k = ext[static_cast<std::size_t>(s)];
      grad(t, k) -= std::exp(ab - lp(t, k) - log_p);
    }
  }
  Matrix out(1, 1);
  out(0, 0) = -log_p;
  return Tensor::from_op(std::move(out), {log_probs}, [grad = std::move(grad)](detail::Node& self) {
    detail::accumulate(*self.parents[0], grad * self.grad(0, 0));
  });
}

Tensor ctc_loss(const CtcOutput& lattice, std::span<const int> target) {
  return ctc_loss(Tensor(lattice.log_probs), target, lattice.blank);
}

GreedyPath ctc_greedy(const CtcOutput& lattice) {
  GreedyPath path;
  int prev = lattice.blank;
  for (Index t = 0; t < lattice.frames(); ++t) {
    Index best = 0;
    lattice.log_probs.row(t).maxCoeff(&best);
    const int id = static_cast<int>(best);
    if (id != lattice.blank && id != prev) {
      path.tokens.push_back(id);
      path.frames.push_back(t);
    }
    prev = id;
  }
  return path;
}

Segmentation extract_segments(const GreedyPath& path, int seg_end, Index frames) {
  Segmentation out;
  Index begin = 0;
  std::vector<int> pending;
  for (std::size_t i = 0; i < path.tokens.size(); ++i) {
    if (path.tokens[i] != seg_end) {
      pending.push_back(path.tokens[i]);
      continue;
    }
    const Index at = path.frames[i];
    if (pending.empty()) {
      ++out.dropped;
    } else {
      out.segments.push_back({begin, at, pending, false});
      pending.clear();
    }
    begin = at + 1;
  }
  if (begin < frames) out.segments.push_back({begin, frames - 1, pending, true});
  return out;
}

Vocabulary Vocabulary::with_content(int content_tokens) {
  Vocabulary v;
  v.tokens = {"<blank>", "<s>", "</s>", "_segE"};
  for (int i = 0; i < content_tokens; ++i) v.tokens.push_back("w" + std::to_string(i));
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocabulary: cannot open " + path.string());
  Vocabulary v;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) v.tokens.push_back(line);
  if (v.size() <= kFirstContentToken || v.tokens[kSegEnd] != "_segE")
    throw std::runtime_error("vocabulary: reserved ids 0..3 must be blank, BOS, EOS, _segE");
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  for (const auto& t : tokens) out << t << '\n';
}

}  // namespace lfad
