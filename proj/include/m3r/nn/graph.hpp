#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "m3r/common.hpp"

// Minimal reverse-mode tape over dense row-major matrices. Values are
// computed eagerly as nodes are added; backward() replays the tape once.

namespace m3r::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
class Graph {
 public:
  using M = Mat<T>;

  /// Leaf carrying sample data; no gradient is reported for it.
  int input(M value) { return push(Op::leaf, std::move(value)); }

  /// Leaf bound to parameter storage. After backward(), the node's gradient
  /// has been accumulated (+=) into *grad_sink.
  int param(const M* value, M* grad_sink) {
    const int id = push(Op::leaf, *value);
    nodes_[static_cast<std::size_t>(id)].grad_sink = grad_sink;
    return id;
  }

  int matmul(int a, int b) {
    check_inner(a, b);
    M v = val(a) * val(b);
    return push(Op::matmul, std::move(v), a, b);
  }

  /// a + b with identical shapes.
  int add(int a, int b) {
    check_same(a, b);
    M v = val(a) + val(b);
    return push(Op::add, std::move(v), a, b);
  }

  /// Adds the single-row matrix b to every row of a.
  int add_row_vector(int a, int b) {
    if (val(b).rows() != 1 || val(b).cols() != val(a).cols())
      throw ShapeMismatch("add_row_vector: bias must be [1 x cols]");
    M v = val(a).rowwise() + val(b).row(0);
    return push(Op::add_row, std::move(v), a, b);
  }

  /// Adds b tiled vertically over a; a's row count must be a multiple of
  /// b's. The gradient of b sums over the tiles.
  int add_tiled_rows(int a, int b) {
    const auto k = val(b).rows();
    if (k <= 0 || val(a).rows() % k != 0 || val(a).cols() != val(b).cols())
      throw ShapeMismatch("add_tiled_rows: tile shape does not divide input");
    M v = val(a);
    for (Eigen::Index r = 0; r < v.rows(); r += k)
      v.middleRows(r, k) += val(b);
    return push(Op::add_tiled, std::move(v), a, b);
  }

  /// Row-wise layer normalization with learned gain/bias (single-row
  /// parameters), epsilon 1e-5.
  int layer_norm(int x, int gain, int bias) {
    const M& in = val(x);
    const auto d = in.cols();
    if (val(gain).rows() != 1 || val(gain).cols() != d || val(bias).rows() != 1 ||
        val(bias).cols() != d)
      throw ShapeMismatch("layer_norm: gain/bias must be [1 x cols]");

    M xhat(in.rows(), d);
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_sigma(in.rows());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      const T mu = in.row(r).mean();
      const T var = (in.row(r).array() - mu).square().mean();
      const T is = T(1) / std::sqrt(var + kLnEps);
      inv_sigma(r) = is;
      xhat.row(r) = (in.row(r).array() - mu) * is;
    }
    M v = (xhat.array().rowwise() * val(gain).row(0).array()).rowwise() +
          val(bias).row(0).array();
    const int id = push(Op::layer_norm, std::move(v), x, gain, bias);
    nodes_[static_cast<std::size_t>(id)].ln_xhat = std::move(xhat);
    nodes_[static_cast<std::size_t>(id)].ln_inv_sigma = std::move(inv_sigma);
    return id;
  }

  /// Elementwise exact GELU: 0.5*x*(1 + erf(x/sqrt(2))).
  int gelu(int x) {
    M v = val(x).unaryExpr([](T a) {
      return T(0.5) * a * (T(1) + std::erf(a * kInvSqrt2));
    });
    return push(Op::gelu, std::move(v), x);
  }

  /// Fused multi-head attention over already-projected q/k/v. Column block
  /// i*head_dim..(i+1)*head_dim of each input is head i; per head the output
  /// is softmax(q k^T / sqrt(head_dim)) v, written to the same column block.
  int attention(int q, int k, int v, int heads, int head_dim) {
    const M& Q = val(q);
    const M& K = val(k);
    const M& V = val(v);
    const Eigen::Index width = static_cast<Eigen::Index>(heads) * head_dim;
    if (Q.cols() != width || K.cols() != width || V.cols() != width ||
        K.rows() != V.rows())
      throw ShapeMismatch("attention: projected inputs do not match heads*head_dim");

    const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
    M out(Q.rows(), width);
    std::vector<M> weights;
    weights.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h) * head_dim;
      M scores = Q.middleCols(c0, head_dim) *
                 K.middleCols(c0, head_dim).transpose() * scale;
      for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const T m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp();
        scores.row(r) /= scores.row(r).sum();
      }
      out.middleCols(c0, head_dim).noalias() =
          scores * V.middleCols(c0, head_dim);
      weights.push_back(std::move(scores));
    }
    const int id = push(Op::attention, std::move(out), q, k, v);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.attn_weights = std::move(weights);
    node.heads = heads;
    node.head_dim = head_dim;
    return id;
  }

  const M& value(int id) const { return val(id); }

  /// Softmax matrices of an attention node, one [n_q x n_k] matrix per head.
  const std::vector<M>& attention_weights(int id) const {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op != Op::attention)
      throw NoCache("attention_weights: node is not an attention node");
    return n.attn_weights;
  }

  /// Reverse pass seeded with d(scalar objective)/d(value(output)).
  /// Parameter gradients accumulate into their bound sinks.
  void backward(int output, const M& output_grad) {
    if (output < 0 || static_cast<std::size_t>(output) >= nodes_.size())
      throw NoCache("backward: unknown output node");
    if (output_grad.rows() != val(output).rows() ||
        output_grad.cols() != val(output).cols())
      throw ShapeMismatch("backward: seed gradient shape differs from output");

    for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
    nodes_[static_cast<std::size_t>(output)].grad = output_grad;

    for (int i = output; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      const M& g = n.grad;
      switch (n.op) {
        case Op::leaf:
          if (n.grad_sink != nullptr) *n.grad_sink += g;
          break;
        case Op::matmul:
          grad(n.a).noalias() += g * val(n.b).transpose();
          grad(n.b).noalias() += val(n.a).transpose() * g;
          break;
        case Op::add:
          grad(n.a) += g;
          grad(n.b) += g;
          break;
        case Op::add_row:
          grad(n.a) += g;
          grad(n.b).row(0) += g.colwise().sum();
          break;
        case Op::add_tiled: {
          grad(n.a) += g;
          M& gb = grad(n.b);
          for (Eigen::Index r = 0; r < g.rows(); r += gb.rows())
            gb += g.middleRows(r, gb.rows());
          break;
        }
        case Op::layer_norm: {
          // y = xhat*gain + bias; dx via the standard normalized-input form.
          grad(n.c).row(0) += g.colwise().sum();
          grad(n.b).row(0) += (g.array() * n.ln_xhat.array()).colwise().sum().matrix();
          const auto& gain = val(n.b).row(0);
          for (Eigen::Index r = 0; r < g.rows(); ++r) {
            Eigen::Array<T, 1, Eigen::Dynamic> du =
                g.row(r).array() * gain.array();
            const T mean_du = du.mean();
            const T mean_du_xhat = (du * n.ln_xhat.row(r).array()).mean();
            grad(n.a).row(r).array() +=
                n.ln_inv_sigma(r) *
                (du - mean_du - n.ln_xhat.row(r).array() * mean_du_xhat);
          }
          break;
        }
        case Op::gelu: {
          const M& x = val(n.a);
          grad(n.a).array() +=
              g.array() * x.unaryExpr([](T a) {
                             const T cdf =
                                 T(0.5) * (T(1) + std::erf(a * kInvSqrt2));
                             const T pdf = std::exp(T(-0.5) * a * a) *
                                           kInvSqrt2Pi;
                             return cdf + a * pdf;
                           }).array();
          break;
        }
        case Op::attention: {
          const T scale = T(1) / std::sqrt(static_cast<T>(n.head_dim));
          for (int h = 0; h < n.heads; ++h) {
            const auto c0 = static_cast<Eigen::Index>(h) * n.head_dim;
            const M& A = n.attn_weights[static_cast<std::size_t>(h)];
            const auto dO = g.middleCols(c0, n.head_dim);
            const auto Qh = val(n.a).middleCols(c0, n.head_dim);
            const auto Kh = val(n.b).middleCols(c0, n.head_dim);
            const auto Vh = val(n.c).middleCols(c0, n.head_dim);
            grad(n.c).middleCols(c0, n.head_dim).noalias() +=
                A.transpose() * dO;
            M dA = dO * Vh.transpose();
            M dS(A.rows(), A.cols());
            for (Eigen::Index r = 0; r < A.rows(); ++r) {
              const T dot = (dA.row(r).array() * A.row(r).array()).sum();
              dS.row(r) =
                  (A.row(r).array() * (dA.row(r).array() - dot)).matrix();
            }
            grad(n.a).middleCols(c0, n.head_dim).noalias() +=
                dS * Kh * scale;
            grad(n.b).middleCols(c0, n.head_dim).noalias() +=
                dS.transpose() * Qh * scale;
          }
          break;
        }
      }
    }
  }

 private:
  static constexpr T kLnEps = T(1e-5);
  static constexpr T kInvSqrt2 = T(0.70710678118654752440);
  static constexpr T kInvSqrt2Pi = T(0.39894228040143267794);

  enum class Op {
    leaf,
    matmul,
    add,
    add_row,
    add_tiled,
    layer_norm,
    gelu,
    attention
  };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    int heads = 0, head_dim = 0;
    M value;
    M grad;
    std::vector<M> attn_weights;
    M ln_xhat;
    Eigen::Matrix<T, Eigen::Dynamic, 1> ln_inv_sigma;
    M* grad_sink = nullptr;
  };

  const M& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  M& grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  void check_inner(int a, int b) const {
    if (val(a).cols() != val(b).rows())
      throw ShapeMismatch("matmul: inner dimensions differ (" +
                          std::to_string(val(a).cols()) + " vs " +
                          std::to_string(val(b).rows()) + ")");
  }
  void check_same(int a, int b) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ShapeMismatch("add: operand shapes differ");
  }

  int push(Op op, M value, int a = -1, int b = -1, int c = -1) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
};

}  // namespace m3r::nn
