// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Define-by-run reverse-mode autodiff over dense row-major matrices.
//
// Every value is a 2-D matrix; scalars are 1x1. The graph is rebuilt on each
// forward pass and released when the root tensor goes out of scope.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace lfad {

using Scalar = double;
using Index = Eigen::Index;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

template <typename Derived>
void accumulate(Node& node, const Eigen::MatrixBase<Derived>& delta) {
  if (!node.requires_grad) return;
  if (node.grad.size() == 0)
    node.grad = delta;
  else
    node.grad += delta;
}

}  // namespace detail

class Tensor {
 public:
  using Backward = std::function<void(detail::Node&)>;

  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor scalar(Scalar v, bool requires_grad = false);
  static Tensor from_op(Matrix value, std::vector<Tensor> parents, Backward fn);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Zero matrix of the value's shape when no gradient has been accumulated.
  Matrix grad() const;
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad();

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  Scalar item() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

std::string shape_string(const Tensor& t);

// Populates grad on every reachable tensor that requires it. Leaf gradients
// accumulate across calls until zero_grad().
void backward(const Tensor& loss);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// --- elementary ops -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Broadcasts a 1xC row over every row of x.
Tensor add_row(const Tensor& x, const Tensor& row);
Tensor mul_row(const Tensor& x, const Tensor& row);
Tensor scale(const Tensor& x, Scalar factor);
Tensor silu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(Scalar s, const Tensor& x) { return scale(x, s); }

Tensor slice_rows(const Tensor& x, Index begin, Index count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
Tensor reshape(const Tensor& x, Index rows, Index cols);

// --- normalisation and losses ---------------------------------------------

// axis 0 normalises columns, axis 1 normalises rows.
Tensor softmax(const Tensor& x, int axis = 1);
Tensor log_softmax(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps = 1e-5);
// Mean negative log-likelihood over rows whose target differs from ignore_index.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index = -1);

// Scaled dot-product attention split over `heads` column groups. An empty
// mask means every key is visible; otherwise mask(q, k) marks visible keys.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                            const BoolMatrix& mask = BoolMatrix());

// --- parameters -----------------------------------------------------------

struct Parameter {
  std::string name;
  Tensor tensor;
};

class ParameterStore {
 public:
  Tensor add(const std::string& name, Matrix init);
  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  const Parameter* find(const std::string& name) const;
  void zero_grad();
  Index scalar_count() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

Matrix uniform_init(Index rows, Index cols, Scalar bound, std::mt19937_64& rng);
Matrix normal_init(Index rows, Index cols, Scalar stddev, std::mt19937_64& rng);

struct AdamOptions {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
};

// Bias-corrected Adam update from each parameter's accumulated gradient.
void adam_step(std::span<Parameter> params, AdamState& state, const AdamOptions& options);

Scalar gradient_norm(std::span<const Parameter> params);
void clip_gradients(std::span<Parameter> params, Scalar max_norm);

// --- checkpoints ----------------------------------------------------------

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string config_text;
  std::vector<std::pair<std::string, Matrix>> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint snapshot(const ParameterStore& store, std::uint64_t config_hash, std::uint64_t seed,
                    std::string config_text);
void restore(ParameterStore& store, const Checkpoint& checkpoint);

}  // namespace lfad
