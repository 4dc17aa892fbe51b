// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lfad/segment.hpp"
#include "lfad/tensor.hpp"

namespace lfad {

struct InfeasibleAlignmentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Log-normalised per-frame distribution over the vocabulary.
struct CtcOutput {
  Matrix log_probs;  // T x V
  int blank = kBlank;
  int seg_end = kSegEnd;

  Index frames() const { return log_probs.rows(); }
};

inline constexpr Scalar kLogZero = -std::numeric_limits<Scalar>::infinity();

template <typename S>
S log_add(S a, S b) {
  if (a == -std::numeric_limits<S>::infinity()) return b;
  if (b == -std::numeric_limits<S>::infinity()) return a;
  const S hi = a > b ? a : b;
  const S lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

// Fewest frames a CTC alignment of `target` needs: one per label plus a
// blank between each pair of equal neighbours.
Index ctc_min_frames(std::span<const int> target);

// log P(target | lattice) by the forward recursion over the blank-interleaved
// label sequence.
template <typename Derived>
typename Derived::Scalar ctc_log_likelihood(const Eigen::MatrixBase<Derived>& log_probs,
                                            std::span<const int> target, int blank = kBlank) {
  using S = typename Derived::Scalar;
  const Index frames = log_probs.rows();
  const Index labels = 2 * static_cast<Index>(target.size()) + 1;
  auto label = [&](Index s) { return s % 2 == 0 ? blank : target[static_cast<std::size_t>(s / 2)]; };
  const S zero = -std::numeric_limits<S>::infinity();
  std::vector<S> alpha(static_cast<std::size_t>(labels), zero);
  std::vector<S> next(static_cast<std::size_t>(labels), zero);
  if (frames == 0) return target.empty() ? S(0) : zero;
  alpha[0] = log_probs(0, blank);
  if (labels > 1) alpha[1] = log_probs(0, label(1));
  for (Index t = 1; t < frames; ++t) {
    for (Index s = 0; s < labels; ++s) {
      S acc = alpha[static_cast<std::size_t>(s)];
      if (s >= 1) acc = log_add(acc, alpha[static_cast<std::size_t>(s - 1)]);
      if (s >= 2 && label(s) != blank && label(s) != label(s - 2))
        acc = log_add(acc, alpha[static_cast<std::size_t>(s - 2)]);
      next[static_cast<std::size_t>(s)] = acc == zero ? zero : acc + log_probs(t, label(s));
    }
    std::swap(alpha, next);
  }
  S total = alpha[static_cast<std::size_t>(labels - 1)];
  if (labels > 1) total = log_add(total, alpha[static_cast<std::size_t>(labels - 2)]);
  return total;
}

// -log P(target | lattice); differentiable with respect to the lattice.
Tensor ctc_loss(const Tensor& log_probs, std::span<const int> target, int blank = kBlank);
Tensor ctc_loss(const CtcOutput& lattice, std::span<const int> target);

struct GreedyPath {
  std::vector<int> tokens;
  std::vector<Index> frames;  // first frame of each surviving run
};

GreedyPath ctc_greedy(const CtcOutput& lattice);

struct Segmentation {
  std::vector<Segment> segments;
  int dropped = 0;  // degenerate segments with no content token
};

// Splits [0, frames) after every _segE emission. The _segE frame closes its
// segment; material after the last _segE becomes an open segment.
Segmentation extract_segments(const GreedyPath& path, int seg_end, Index frames);

// Vocabulary file: one token per line, ids in line order.
struct Vocabulary {
  std::vector<std::string> tokens;

  static Vocabulary with_content(int content_tokens);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  int size() const { return static_cast<int>(tokens.size()); }
};

}  // namespace lfad
