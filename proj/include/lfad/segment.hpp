// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "lfad/tensor.hpp"

namespace lfad {

// Reserved vocabulary ids shared by the CTC and attention heads.
inline constexpr int kBlank = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kSegEnd = 3;
inline constexpr int kFirstContentToken = 4;

// Inclusive span [t_b, t_e] of encoding frames and its transcript.
struct Segment {
  Index t_b = 0;
  Index t_e = 0;
  std::vector<int> transcript;
  bool open = false;

  Index length() const { return t_e - t_b + 1; }
  bool operator==(const Segment&) const = default;
};

}  // namespace lfad
