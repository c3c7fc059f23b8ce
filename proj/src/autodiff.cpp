#include "imvc/autodiff.hpp"

#include <cmath>
#include <utility>

#include "imvc/error.hpp"

namespace imvc::ad {

namespace {
constexpr double kKlClip = 1e-12;
}

Var Tape::emplace(Matrix value, bool needs, std::function<void(Tape&)> backprop) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs;
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) { return emplace(std::move(value), false, {}); }

Var Tape::parameter(Matrix value) { return emplace(std::move(value), true, {}); }

Var Tape::add(Var a, Var b) {
  Matrix v = value(a) + value(b);
  const bool needs = needs_grad(a) || needs_grad(b);
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs, [a, b, out](Tape& t) {
    const Matrix& g = t.gradient(out);
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(b)) t.grad_ref(b) += g;
  });
}

Var Tape::scale(Var a, double c) {
  Matrix v = value(a) * c;
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs_grad(a), [a, c, out](Tape& t) {
    if (t.needs_grad(a)) t.grad_ref(a) += c * t.gradient(out);
  });
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw DimensionError("matmul shape mismatch");
  Matrix v = value(a) * value(b);
  const bool needs = needs_grad(a) || needs_grad(b);
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs, [a, b, out](Tape& t) {
    const Matrix& g = t.gradient(out);
    if (t.needs_grad(a)) t.grad_ref(a) += g * t.value(b).transpose();
    if (t.needs_grad(b)) t.grad_ref(b) += t.value(a).transpose() * g;
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  if (value(a).cols() != value(b).cols()) throw DimensionError("matmul_nt shape mismatch");
  Matrix v = value(a) * value(b).transpose();
  const bool needs = needs_grad(a) || needs_grad(b);
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs, [a, b, out](Tape& t) {
    const Matrix& g = t.gradient(out);
    if (t.needs_grad(a)) t.grad_ref(a) += g * t.value(b);
    if (t.needs_grad(b)) t.grad_ref(b) += g.transpose() * t.value(a);
  });
}

Var Tape::add_row_vector(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
    throw DimensionError("add_row_vector needs a 1 x cols row");
  Matrix v = value(a).rowwise() + Eigen::RowVectorXd(value(row).row(0));
  const bool needs = needs_grad(a) || needs_grad(row);
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs, [a, row, out](Tape& t) {
    const Matrix& g = t.gradient(out);
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(row)) t.grad_ref(row) += g.colwise().sum();
  });
}

Var Tape::relu(Var a) {
  Matrix v = value(a).cwiseMax(0.0);
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs_grad(a), [a, out](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Matrix& g = t.gradient(out);
    const Matrix& x = t.value(a);
    t.grad_ref(a) += (x.array() > 0.0).cast<double>().matrix().cwiseProduct(g);
  });
}

Var Tape::rbf_similarity(Var a, double t_scale) {
  if (t_scale <= 0.0) throw ArgumentError("rbf scale t must be positive");
  const Matrix& x = value(a);
  const Eigen::Index n = x.rows();
  const Vector sq = x.rowwise().squaredNorm();
  const Matrix gram = x * x.transpose();
  Matrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
      const double v = std::exp(-d2 / t_scale);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  Var out{static_cast<int>(nodes_.size())};
  // dX = (2/t) (W - diag(W 1)) X with W = (G + G^T) ⊙ S.
  return emplace(std::move(s), needs_grad(a), [a, t_scale, out](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Matrix& g = t.gradient(out);
    const Matrix& s_val = t.value(out);
    const Matrix w = (g + g.transpose()).cwiseProduct(s_val);
    const Vector row_sums = w.rowwise().sum();
    t.grad_ref(a) +=
        (2.0 / t_scale) * ((w * t.value(a)) - row_sums.asDiagonal() * t.value(a));
  });
}

Var Tape::masked_softmax(Var logits, const Matrix& support) {
  const Matrix& e = value(logits);
  if (support.rows() != e.rows() || support.cols() != e.cols())
    throw DimensionError("support shape must match logits");
  const Eigen::Index n = e.rows();
  Matrix out_val = Matrix::Zero(n, e.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < e.cols(); ++j)
      if (support(i, j) > 0.0) row_max = std::max(row_max, e(i, j));
    if (!std::isfinite(row_max))
      throw ContractError("masked_softmax: all-zero support row " + std::to_string(i));
    double denom = 0.0;
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
      if (support(i, j) > 0.0) {
        out_val(i, j) = std::exp(e(i, j) - row_max);
        denom += out_val(i, j);
      }
    }
    out_val.row(i) /= denom;
  }
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(out_val), needs_grad(logits), [logits, out](Tape& t) {
    if (!t.needs_grad(logits)) return;
    const Matrix& g = t.gradient(out);
    const Matrix& y = t.value(out);
    Matrix& dst = t.grad_ref(logits);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      // y is exactly 0 off-support, so this stays 0 there.
      dst.row(i) += y.row(i).cwiseProduct(g.row(i)) - dot * y.row(i);
    }
  });
}

Var Tape::row_normalize(Var a) {
  const Matrix& x = value(a);
  Matrix v = x;
  Vector norms(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double nrm = x.row(i).norm();
    norms(i) = nrm;
    if (nrm > 0.0) v.row(i) /= nrm;
    else v.row(i).setZero();
  }
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs_grad(a), [a, out, norms](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Matrix& g = t.gradient(out);
    const Matrix& u = t.value(out);
    Matrix& dst = t.grad_ref(a);
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      if (norms(i) == 0.0) continue;
      const double proj = u.row(i).dot(g.row(i));
      dst.row(i) += (g.row(i) - proj * u.row(i)) / norms(i);
    }
  });
}

Var Tape::student_t_assign(Var h, const Matrix& centers) {
  const Matrix& x = value(h);
  if (x.cols() != centers.cols())
    throw DimensionError("student_t_assign: feature width must match centers");
  const Eigen::Index n = x.rows();
  const Eigen::Index k = centers.rows();
  Matrix w(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      w(i, j) = 1.0 / (1.0 + (x.row(i) - centers.row(j)).squaredNorm());
  const Vector totals = w.rowwise().sum();
  Matrix q = w.array().colwise() / totals.array();
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(q), needs_grad(h),
                 [h, out, w, totals, centers](Tape& t) {
                   if (!t.needs_grad(h)) return;
                   const Matrix& g = t.gradient(out);
                   const Matrix& q_val = t.value(out);
                   const Matrix& x = t.value(h);
                   // dW_ij = (g_ij - sum_k g_ik q_ik) / T_i;
                   // dH_i  = -2 sum_j dW_ij w_ij^2 (h_i - c_j).
                   const Vector s = (g.cwiseProduct(q_val)).rowwise().sum();
                   Matrix dw = (g.colwise() - s).array().colwise() / totals.array();
                   const Matrix vmat = dw.cwiseProduct(w.cwiseProduct(w));
                   const Vector row_sums = vmat.rowwise().sum();
                   t.grad_ref(h) +=
                       -2.0 * (row_sums.asDiagonal() * x - vmat * centers);
                 });
}

Var Tape::masked_squared_error(Var a, const Matrix& mask, const Matrix& target, double coeff) {
  const Matrix& x = value(a);
  if (mask.rows() != x.rows() || mask.cols() != x.cols() || target.rows() != x.rows() ||
      target.cols() != x.cols())
    throw DimensionError("masked_squared_error shape mismatch");
  const Matrix resid = mask.cwiseProduct(x) - target;
  Matrix v(1, 1);
  v(0, 0) = coeff * resid.squaredNorm();
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs_grad(a), [a, out, mask, resid, coeff](Tape& t) {
    if (!t.needs_grad(a)) return;
    const double g = t.gradient(out)(0, 0);
    t.grad_ref(a) += (2.0 * coeff * g) * resid.cwiseProduct(mask);
  });
}

Var Tape::graph_contrast(Var c_cross, Var c_self, double tau) {
  const Matrix& cross = value(c_cross);
  const Matrix& self = value(c_self);
  const Eigen::Index n = cross.rows();
  if (n < 2) throw ContractError("graph_contrast needs N >= 2 (empty negative set)");
  if (self.rows() != n || self.cols() != n || cross.cols() != n)
    throw DimensionError("graph_contrast needs square N x N inputs");

  // Stabilized log-sum-exp over the union of both off-diagonal rows.
  Vector row_max(n), denom(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      m = std::max(m, std::max(self(i, j), cross(i, j)));
    }
    row_max(i) = m;
    double d = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      d += std::exp((self(i, j) - m) / tau) + std::exp((cross(i, j) - m) / tau);
    }
    denom(i) = d;
  }
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    loss += -cross(i, i) / tau + row_max(i) / tau + std::log(denom(i));
  Matrix v(1, 1);
  v(0, 0) = loss / static_cast<double>(n);

  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs_grad(c_cross) || needs_grad(c_self),
                 [c_cross, c_self, out, tau, row_max, denom](Tape& t) {
                   const double g = t.gradient(out)(0, 0);
                   const Matrix& cross = t.value(c_cross);
                   const Matrix& self = t.value(c_self);
                   const Eigen::Index n = cross.rows();
                   const double inv_n_tau = 1.0 / (static_cast<double>(n) * tau);
                   if (t.needs_grad(c_cross)) {
                     Matrix& dst = t.grad_ref(c_cross);
                     for (Eigen::Index i = 0; i < n; ++i) {
                       dst(i, i) += -g * inv_n_tau;
                       for (Eigen::Index j = 0; j < n; ++j) {
                         if (j == i) continue;
                         dst(i, j) += g * inv_n_tau *
                                      std::exp((cross(i, j) - row_max(i)) / tau) / denom(i);
                       }
                     }
                   }
                   if (t.needs_grad(c_self)) {
                     Matrix& dst = t.grad_ref(c_self);
                     for (Eigen::Index i = 0; i < n; ++i)
                       for (Eigen::Index j = 0; j < n; ++j) {
                         if (j == i) continue;
                         dst(i, j) += g * inv_n_tau *
                                      std::exp((self(i, j) - row_max(i)) / tau) / denom(i);
                       }
                   }
                 });
}

Var Tape::kl_divergence(Var q, const Matrix& p) {
  const Matrix& qv = value(q);
  if (p.rows() != qv.rows() || p.cols() != qv.cols())
    throw DimensionError("kl_divergence shape mismatch");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      if (pij <= 0.0) continue;
      loss += pij * std::log(pij / std::max(qv(i, j), kKlClip));
    }
  Matrix v(1, 1);
  v(0, 0) = loss;
  Var out{static_cast<int>(nodes_.size())};
  return emplace(std::move(v), needs_grad(q), [q, out, p](Tape& t) {
    if (!t.needs_grad(q)) return;
    const double g = t.gradient(out)(0, 0);
    const Matrix& qv = t.value(q);
    Matrix& dst = t.grad_ref(q);
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        if (p(i, j) <= 0.0 || qv(i, j) <= kKlClip) continue;
        dst(i, j) += -g * p(i, j) / qv(i, j);
      }
  });
}

void Tape::backward(Var root) {
  if (value(root).rows() != 1 || value(root).cols() != 1)
    throw ContractError("backward root must be a 1x1 scalar");
  for (auto& node : nodes_) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  grad_ref(root)(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& node = nodes_[static_cast<size_t>(i)];
    if (node.backprop && node.needs_grad) node.backprop(*this);
  }
}

}  // namespace imvc::ad
