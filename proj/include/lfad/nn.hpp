// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <string>

#include "lfad/tensor.hpp"

namespace lfad {

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Index in, Index out, std::mt19937_64& rng) {
    const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(in));
    weight = store.add(name + ".weight", uniform_init(in, out, bound, rng));
    bias = store.add(name + ".bias", uniform_init(1, out, bound, rng));
  }

  Tensor operator()(const Tensor& x) const { return add_row(matmul(x, weight), bias); }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, Index width) {
    gain = store.add(name + ".gain", Matrix::Ones(1, width));
    bias = store.add(name + ".bias", Matrix::Zero(1, width));
  }

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias, 1e-5); }
};

struct FeedForward {
  Linear up;
  Linear down;

  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, Index width, Index hidden,
              std::mt19937_64& rng)
      : up(store, name + ".up", width, hidden, rng), down(store, name + ".down", hidden, width, rng) {}

  Tensor operator()(const Tensor& x) const { return down(silu(up(x))); }
};

}  // namespace lfad
