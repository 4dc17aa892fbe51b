// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

namespace lfad {

namespace {

thread_local bool g_grad_enabled = true;

using detail::accumulate;
using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
}

void require_row(const Tensor& x, const Tensor& row, const char* op) {
  if (row.rows() != 1 || row.cols() != x.cols())
    throw DimensionError(std::string(op) + ": expected 1x" + std::to_string(x.cols()) +
                         " row, got " + shape_string(row));
}

}  // namespace

// --- Tensor ----------------------------------------------------------------

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::from_op(Matrix value, std::vector<Tensor> parents, Backward fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled &&
      std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); })) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.resize(0, 0); }

Scalar Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw DimensionError("item: tensor is " + shape_string(*this));
  return node_->value(0, 0);
}

std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1)
    throw ContractError("backward: root must be a scalar tensor, got " +
                        (loss.defined() ? shape_string(loss) : std::string("undefined")));
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order)
    if (node->backward) node->grad.resize(0, 0);
  accumulate(*root, Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
}

// --- elementary ops --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a) + " x " +
                         shape_string(b));
  return Tensor::from_op(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) accumulate(pa, self.grad * pb.value.transpose());
    if (pb.requires_grad) accumulate(pb, pa.value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& x) {
  return Tensor::from_op(x.value().transpose(), {x}, [](Node& self) {
    accumulate(*self.parents[0], self.grad.transpose());
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return Tensor::from_op(a.value() + b.value(), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return Tensor::from_op(a.value() - b.value(), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return Tensor::from_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) accumulate(pa, self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) accumulate(pb, self.grad.cwiseProduct(pa.value));
  });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_row(x, row, "add_row");
  Matrix out = x.value().rowwise() + row.value().row(0);
  return Tensor::from_op(std::move(out), {x, row}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad.colwise().sum());
  });
}

Tensor mul_row(const Tensor& x, const Tensor& row) {
  require_row(x, row, "mul_row");
  Matrix out = x.value().array().rowwise() * row.value().row(0).array();
  return Tensor::from_op(std::move(out), {x, row}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pr = *self.parents[1];
    if (px.requires_grad) {
      Matrix d = self.grad.array().rowwise() * pr.value.row(0).array();
      accumulate(px, d);
    }
    if (pr.requires_grad) accumulate(pr, self.grad.cwiseProduct(px.value).colwise().sum());
  });
}

Tensor scale(const Tensor& x, Scalar factor) {
  return Tensor::from_op(x.value() * factor, {x}, [factor](Node& self) {
    accumulate(*self.parents[0], self.grad * factor);
  });
}

Tensor silu(const Tensor& x) {
  Matrix sig = (1.0 + (-x.value().array()).exp()).inverse().matrix();
  Matrix out = x.value().cwiseProduct(sig);
  return Tensor::from_op(std::move(out), {x}, [sig = std::move(sig)](Node& self) {
    const Matrix& xv = self.parents[0]->value;
    Matrix d = sig.array() * (1.0 + xv.array() * (1.0 - sig.array()));
    accumulate(*self.parents[0], self.grad.cwiseProduct(d));
  });
}

Tensor relu(const Tensor& x) {
  return Tensor::from_op(x.value().cwiseMax(0.0), {x}, [](Node& self) {
    Matrix d = (self.parents[0]->value.array() > 0.0).cast<Scalar>();
    accumulate(*self.parents[0], self.grad.cwiseProduct(d));
  });
}

Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return Tensor::from_op(std::move(out), {x}, [](Node& self) {
    const Matrix& xv = self.parents[0]->value;
    accumulate(*self.parents[0], Matrix::Constant(xv.rows(), xv.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& x) {
  const auto n = static_cast<Scalar>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Tensor slice_rows(const Tensor& x, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > x.rows())
    throw IndexError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_string(x));
  return Tensor::from_op(x.value().middleRows(begin, count), {x}, [begin, count](Node& self) {
    Node& px = *self.parents[0];
    Matrix d = Matrix::Zero(px.value.rows(), px.value.cols());
    d.middleRows(begin, count) = self.grad;
    accumulate(px, d);
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Index rows = 0;
  const Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts.front()) + " vs " +
                           shape_string(p));
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return Tensor::from_op(std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                         [offsets](Node& self) {
                           for (std::size_t i = 0; i < self.parents.size(); ++i) {
                             Node& p = *self.parents[i];
                             accumulate(p, self.grad.middleRows(offsets[i], p.value.rows()));
                           }
                         });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows())
      throw IndexError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> copy(ids.begin(), ids.end());
  return Tensor::from_op(std::move(out), {table}, [copy = std::move(copy)](Node& self) {
    Node& pt = *self.parents[0];
    Matrix d = Matrix::Zero(pt.value.rows(), pt.value.cols());
    for (std::size_t i = 0; i < copy.size(); ++i) d.row(copy[i]) += self.grad.row(static_cast<Index>(i));
    accumulate(pt, d);
  });
}

Tensor reshape(const Tensor& x, Index rows, Index cols) {
  if (rows * cols != x.value().size())
    throw DimensionError("reshape: cannot view " + shape_string(x) + " as [" +
                         std::to_string(rows) + "x" + std::to_string(cols) + "]");
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  return Tensor::from_op(std::move(out), {x}, [](Node& self) {
    Node& px = *self.parents[0];
    Matrix d = Eigen::Map<const Matrix>(self.grad.data(), px.value.rows(), px.value.cols());
    accumulate(px, d);
  });
}

// --- normalisation and losses ------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  if (axis != 0 && axis != 1) throw IndexError("softmax: axis must be 0 or 1");
  if (axis == 0) return transpose(softmax(transpose(x), 1));
  Matrix y = x.value();
  for (Index r = 0; r < y.rows(); ++r) {
    y.row(r).array() -= y.row(r).maxCoeff();
    y.row(r) = y.row(r).array().exp();
    y.row(r) /= y.row(r).sum();
  }
  Matrix saved = y;
  return Tensor::from_op(std::move(y), {x}, [saved = std::move(saved)](Node& self) {
    Matrix gy = self.grad.cwiseProduct(saved);
    Eigen::VectorXd rowsum = gy.rowwise().sum();
    Matrix d = gy - (saved.array().colwise() * rowsum.array()).matrix();
    accumulate(*self.parents[0], d);
  });
}

Tensor log_softmax(const Tensor& x) {
  Matrix y = x.value();
  for (Index r = 0; r < y.rows(); ++r) {
    const Scalar m = y.row(r).maxCoeff();
    const Scalar lse = m + std::log((y.row(r).array() - m).exp().sum());
    y.row(r).array() -= lse;
  }
  Matrix probs = y.array().exp();
  return Tensor::from_op(std::move(y), {x}, [probs = std::move(probs)](Node& self) {
    Eigen::VectorXd rowsum = self.grad.rowwise().sum();
    Matrix d = self.grad - (probs.array().colwise() * rowsum.array()).matrix();
    accumulate(*self.parents[0], d);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps) {
  require_row(x, gain, "layer_norm gain");
  require_row(x, bias, "layer_norm bias");
  if (!(eps > 0)) throw ContractError("layer_norm: eps must be positive");
  const Index n = x.cols();
  Matrix normed(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar mu = x.value().row(r).mean();
    const Scalar var = (x.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normed.row(r) = (x.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (normed.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  return Tensor::from_op(
      std::move(out), {x, gain, bias},
      [normed = std::move(normed), inv_std = std::move(inv_std), n](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        if (pg.requires_grad) accumulate(pg, self.grad.cwiseProduct(normed).colwise().sum());
        if (pb.requires_grad) accumulate(pb, self.grad.colwise().sum());
        if (px.requires_grad) {
          Matrix dn = self.grad.array().rowwise() * pg.value.row(0).array();
          Matrix d(dn.rows(), n);
          for (Index r = 0; r < dn.rows(); ++r) {
            const Scalar mean_dn = dn.row(r).mean();
            const Scalar mean_dn_n = dn.row(r).cwiseProduct(normed.row(r)).mean();
            d.row(r) =
                (dn.row(r).array() - mean_dn - normed.row(r).array() * mean_dn_n) * inv_std(r);
          }
          accumulate(px, d);
        }
      });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index) {
  if (static_cast<Index>(targets.size()) != logits.rows())
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         shape_string(logits));
  const Index vocab = logits.cols();
  Matrix grad = Matrix::Zero(logits.rows(), vocab);
  Scalar total = 0;
  Index count = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t == ignore_index) continue;
    if (t < 0 || t >= vocab)
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(vocab));
    const auto row = logits.value().row(r);
    const Scalar m = row.maxCoeff();
    const Scalar lse = m + std::log((row.array() - m).exp().sum());
    total += lse - row(t);
    grad.row(r) = (row.array() - lse).exp();
    grad(r, t) -= 1.0;
    ++count;
  }
  Matrix out(1, 1);
  out(0, 0) = count ? total / static_cast<Scalar>(count) : 0.0;
  if (count) grad /= static_cast<Scalar>(count);
  return Tensor::from_op(std::move(out), {logits}, [grad = std::move(grad)](Node& self) {
    accumulate(*self.parents[0], grad * self.grad(0, 0));
  });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                            const BoolMatrix& mask) {
  if (q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows())
    throw DimensionError("attention: q " + shape_string(q) + ", k " + shape_string(k) + ", v " +
                         shape_string(v));
  if (heads < 1 || q.cols() % heads != 0)
    throw ConfigError("attention: width " + std::to_string(q.cols()) +
                      " not divisible by heads " + std::to_string(heads));
  const bool masked = mask.size() != 0;
  if (masked && (mask.rows() != q.rows() || mask.cols() != k.rows()))
    throw DimensionError("attention: mask does not match query/key lengths");
  if (k.rows() == 0) throw DimensionError("attention: empty memory");

  const Index dh = q.cols() / heads;
  const Scalar factor = 1.0 / std::sqrt(static_cast<Scalar>(dh));
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(heads));
  Matrix out(q.rows(), q.cols());
  for (int h = 0; h < heads; ++h) {
    Matrix s = q.value().middleCols(h * dh, dh) * k.value().middleCols(h * dh, dh).transpose();
    s *= factor;
    for (Index r = 0; r < s.rows(); ++r) {
      Scalar m = -std::numeric_limits<Scalar>::infinity();
      for (Index c = 0; c < s.cols(); ++c)
        if (!masked || mask(r, c)) m = std::max(m, s(r, c));
      if (!std::isfinite(m)) throw ContractError("attention: query row with no visible keys");
      Scalar z = 0;
      for (Index c = 0; c < s.cols(); ++c) {
        s(r, c) = (!masked || mask(r, c)) ? std::exp(s(r, c) - m) : 0.0;
        z += s(r, c);
      }
      s.row(r) /= z;
    }
    out.middleCols(h * dh, dh) = s * v.value().middleCols(h * dh, dh);
    (*probs)[static_cast<std::size_t>(h)] = std::move(s);
  }
  return Tensor::from_op(std::move(out), {q, k, v}, [probs, heads, dh, factor](Node& self) {
    Node& pq = *self.parents[0];
    Node& pk = *self.parents[1];
    Node& pv = *self.parents[2];
    Matrix dq = Matrix::Zero(pq.value.rows(), pq.value.cols());
    Matrix dk = Matrix::Zero(pk.value.rows(), pk.value.cols());
    Matrix dv = Matrix::Zero(pv.value.rows(), pv.value.cols());
    for (int h = 0; h < heads; ++h) {
      const Matrix& p = (*probs)[static_cast<std::size_t>(h)];
      const auto go = self.grad.middleCols(h * dh, dh);
      dv.middleCols(h * dh, dh) = p.transpose() * go;
      Matrix dp = go * pv.value.middleCols(h * dh, dh).transpose();
      Eigen::VectorXd rowdot = dp.cwiseProduct(p).rowwise().sum();
      Matrix ds = p.cwiseProduct((dp.colwise() - rowdot)) * factor;
      dq.middleCols(h * dh, dh) = ds * pk.value.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * pq.value.middleCols(h * dh, dh);
    }
    accumulate(pq, dq);
    accumulate(pk, dk);
    accumulate(pv, dv);
  });
}

// --- parameters --------------------------------------------------------------

Tensor ParameterStore::add(const std::string& name, Matrix init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  params_.push_back({name, Tensor(std::move(init), true)});
  return params_.back().tensor;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Index ParameterStore::scalar_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.tensor.value().size();
  return n;
}

Matrix uniform_init(Index rows, Index cols, Scalar bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix normal_init(Index rows, Index cols, Scalar stddev, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void adam_step(std::span<Parameter> params, AdamState& state, const AdamOptions& options) {
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
      state.second.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    }
  }
  if (state.first.size() != params.size())
    throw DimensionError("adam_step: state holds " + std::to_string(state.first.size()) +
                         " buffers for " + std::to_string(params.size()) + " parameters");
  ++state.step;
  const Scalar c1 = 1.0 - std::pow(options.beta1, static_cast<Scalar>(state.step));
  const Scalar c2 = 1.0 - std::pow(options.beta2, static_cast<Scalar>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params[i].tensor;
    Matrix& m = state.first[i];
    Matrix& v = state.second[i];
    if (m.rows() != t.rows() || m.cols() != t.cols())
      throw DimensionError("adam_step: state shape mismatch for " + params[i].name);
    if (!t.has_grad()) {
      m *= options.beta1;
      v *= options.beta2;
    } else {
      const Matrix g = t.grad();
      m = options.beta1 * m + (1.0 - options.beta1) * g;
      v = options.beta2 * v + (1.0 - options.beta2) * g.cwiseProduct(g);
    }
    t.mutable_value().array() -=
        options.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + options.eps);
  }
}

Scalar gradient_norm(std::span<const Parameter> params) {
  Scalar total = 0;
  for (const auto& p : params)
    if (p.tensor.has_grad()) total += p.tensor.node()->grad.squaredNorm();
  return std::sqrt(total);
}

void clip_gradients(std::span<Parameter> params, Scalar max_norm) {
  const Scalar norm = gradient_norm(params);
  if (!(norm > max_norm)) return;
  const Scalar factor = max_norm / norm;
  for (auto& p : params)
    if (p.tensor.has_grad()) p.tensor.node()->grad *= factor;
}

// --- checkpoints ---------------------------------------------------------------
//
// Layout (little-endian):
//   char[8]  magic "LFADCKPT"
//   u32      format version (1)
//   u64      config hash
//   u64      seed
//   u64      config text length, then that many bytes
//   u32      tensor count
//   per tensor: u32 name length, name bytes, u64 rows, u64 cols,
//               rows*cols f64 values in row-major order

namespace {

constexpr char kMagic[8] = {'L', 'F', 'A', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, checkpoint.config_hash);
  write_pod(out, checkpoint.seed);
  write_pod(out, static_cast<std::uint64_t>(checkpoint.config_text.size()));
  out.write(checkpoint.config_text.data(), static_cast<std::streamsize>(checkpoint.config_text.size()));
  write_pod(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, m] : checkpoint.tensors) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint64_t>(m.rows()));
    write_pod(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  if (read_pod<std::uint32_t>(in) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  Checkpoint ck;
  ck.config_hash = read_pod<std::uint64_t>(in);
  ck.seed = read_pod<std::uint64_t>(in);
  ck.config_text.resize(read_pod<std::uint64_t>(in));
  in.read(ck.config_text.data(), static_cast<std::streamsize>(ck.config_text.size()));
  const auto count = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(read_pod<std::uint32_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rows = static_cast<Index>(read_pod<std::uint64_t>(in));
    const auto cols = static_cast<Index>(read_pod<std::uint64_t>(in));
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

Checkpoint snapshot(const ParameterStore& store, std::uint64_t config_hash, std::uint64_t seed,
                    std::string config_text) {
  Checkpoint ck{config_hash, seed, std::move(config_text), {}};
  for (const auto& p : store.parameters()) ck.tensors.emplace_back(p.name, p.tensor.value());
  return ck;
}

void restore(ParameterStore& store, const Checkpoint& checkpoint) {
  for (const auto& [name, m] : checkpoint.tensors) {
    const Parameter* p = store.find(name);
    if (!p) throw std::runtime_error("checkpoint: unknown parameter " + name);
    Tensor t = p->tensor;
    if (t.rows() != m.rows() || t.cols() != m.cols())
      throw DimensionError("checkpoint: shape mismatch for " + name);
    t.mutable_value() = m;
  }
  if (checkpoint.tensors.size() != store.parameters().size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
}

}  // namespace lfad
