#pragma once

#include <functional>
#include <vector>

#include "imvc/types.hpp"

namespace imvc::ad {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Minimal reverse-mode tape over dense matrices. Nodes are created in
/// topological order; backward() walks them in reverse. Scalars are 1x1
/// matrices. Constants participate in forward values but receive no gradient.
class Tape {
 public:
  Var constant(Matrix value);
  Var parameter(Matrix value);

  Var add(Var a, Var b);
  Var scale(Var a, double c);
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);            // A * B^T
  Var add_row_vector(Var a, Var row);     // row is 1 x cols, broadcast over rows
  Var relu(Var a);

  /// S_ij = exp(-||a_i - a_j||^2 / t) over rows of a; exactly symmetric.
  Var rbf_similarity(Var a, double t);

  /// Row-wise softmax restricted to support > 0; rest exactly 0. Stabilized
  /// by the per-row max over the support. Throws ContractError on an
  /// all-zero support row.
  Var masked_softmax(Var logits, const Matrix& support);

  /// Rows scaled to unit L2 norm; all-zero rows stay zero.
  Var row_normalize(Var a);

  /// Student-t (degree 1) soft assignments of rows of h against fixed
  /// centers: q_ij = (1+||h_i-c_j||^2)^{-1}, row-normalized.
  Var student_t_assign(Var h, const Matrix& centers);

  /// Scalar: coeff * sum_ij (mask_ij * a_ij - target_ij)^2, mask/target fixed.
  Var masked_squared_error(Var a, const Matrix& mask, const Matrix& target, double coeff);

  /// Scalar: one directed term of the graph-structure contrastive loss,
  /// (1/N) sum_i [ -c_cross_ii/tau
  ///              + log( sum_{j != i} exp(c_self_ij/tau)
  ///                   + sum_{j != i} exp(c_cross_ij/tau) ) ].
  /// Throws ContractError for N < 2 (empty negative set).
  Var graph_contrast(Var c_cross, Var c_self, double tau);

  /// Scalar: sum_ij p_ij log(p_ij / max(q_ij, 1e-12)), p fixed; p_ij = 0
  /// terms contribute 0.
  Var kl_divergence(Var q, const Matrix& p);

  const Matrix& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  double scalar(Var v) const { return value(v)(0, 0); }

  /// Gradient of the last backward() root w.r.t. v. Zero matrix for nodes
  /// the root does not depend on.
  const Matrix& gradient(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

  /// Seeds d(root)/d(root) = 1 and accumulates gradients into every node
  /// that requires them. root must be 1x1.
  void backward(Var root);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Tape&)> backprop;  // empty for leaves
  };

  Var emplace(Matrix value, bool needs_grad, std::function<void(Tape&)> backprop);
  Matrix& grad_ref(Var v) { return nodes_[static_cast<size_t>(v.id)].grad; }
  bool needs_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }

  std::vector<Node> nodes_;
};

}  // namespace imvc::ad
