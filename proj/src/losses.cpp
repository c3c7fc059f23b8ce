#include "imvc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "imvc/error.hpp"

namespace imvc {

namespace {
constexpr double kKlClip = 1e-12;
constexpr double kRowSumTol = 1e-6;
}  // namespace

SimilarityMatrix reconstructed_graph(const Matrix& h, double t) { return rbf_similarity(h, t); }

GraphMask graph_mask(const SimilarityMatrix& a_hat, int k) {
  const Eigen::Index n = a_hat.rows();
  if (k <= 0 || k > a_hat.cols()) throw ArgumentError("graph mask requires 1 <= k <= N");
  GraphMask mask;
  mask.k = k;
  mask.values = Matrix::Zero(n, a_hat.cols());
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    idx.clear();
    for (Eigen::Index j = 0; j < a_hat.cols(); ++j)
      if (a_hat(i, j) > 0.0) idx.push_back(j);
    const auto take = std::min<size_t>(static_cast<size_t>(k), idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      [&](Eigen::Index lhs, Eigen::Index rhs) {
                        if (a_hat(i, lhs) != a_hat(i, rhs)) return a_hat(i, lhs) > a_hat(i, rhs);
                        return lhs < rhs;
                      });
    for (size_t j = 0; j < take; ++j) mask.values(i, idx[j]) = 1.0;
  }
  return mask;
}

double masked_rec_term(const SimilarityMatrix& a_hat, const Matrix& mask, const Matrix& a_global) {
  const double n = static_cast<double>(a_hat.rows());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a_hat.rows(); ++i)
    for (Eigen::Index j = 0; j < a_hat.cols(); ++j) {
      const double r = mask(i, j) * a_hat(i, j) - a_global(i, j);
      sum += r * r;
    }
  return sum / n;
}

double masked_rec_loss(const std::vector<SimilarityMatrix>& a_hats, const AdjacencyGraph& a_global,
                       int k) {
  if (a_hats.empty()) throw ArgumentError("masked_rec_loss needs at least one view");
  double total = 0.0;
  for (const auto& a_hat : a_hats)
    total += masked_rec_term(a_hat, graph_mask(a_hat, k).values, a_global.values);
  return total / static_cast<double>(a_hats.size());
}

double traditional_rec_loss(const std::vector<SimilarityMatrix>& a_hats,
                            const AdjacencyGraph& a_global) {
  if (a_hats.empty()) throw ArgumentError("traditional_rec_loss needs at least one view");
  const Matrix ones = Matrix::Ones(a_global.values.rows(), a_global.values.cols());
  double total = 0.0;
  for (const auto& a_hat : a_hats) total += masked_rec_term(a_hat, ones, a_global.values);
  return total / static_cast<double>(a_hats.size());
}

namespace {

// Shared body of the two row-gradient oracles: terms restricted to selected_ij = 1.
Vector rec_row_grad(const Matrix& h, const Matrix& a_global, const Matrix& selected, double t,
                    int i) {
  const SimilarityMatrix a_hat = rbf_similarity(h, t);
  Vector grad = Vector::Zero(h.cols());
  for (Eigen::Index j = 0; j < h.rows(); ++j) {
    if (selected(i, j) == 0.0) continue;
    const double aij = a_hat(i, j);
    const double coeff = (a_global(i, j) != 0.0) ? (aij - 1.0) * aij : aij * aij;
    grad += coeff * (h.row(j) - h.row(i)).transpose();
  }
  return (4.0 / t) * grad;
}

}  // namespace

Vector grad_traditional(const Matrix& h, const AdjacencyGraph& a_global, double t, int i) {
  const Matrix all = Matrix::Ones(h.rows(), h.rows());
  return rec_row_grad(h, a_global.values, all, t, i);
}

Vector grad_masked(const Matrix& h, const AdjacencyGraph& a_global, double t, int k, int i) {
  const GraphMask mask = graph_mask(rbf_similarity(h, t), k);
  return rec_row_grad(h, a_global.values, mask.values, t, i);
}

Matrix masked_rec_grad_h(const Matrix& h, const Matrix& mask, const Matrix& a_global, double t) {
  const SimilarityMatrix a_hat = rbf_similarity(h, t);
  const Eigen::Index n = h.rows();
  // C_ij = (M_ij A_ij - Abar_ij) M_ij A_ij; symmetrized into a Laplacian form.
  Matrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      c(i, j) = (mask(i, j) * a_hat(i, j) - a_global(i, j)) * mask(i, j) * a_hat(i, j);
  const Matrix b = c + c.transpose();
  const Vector row_sums = b.rowwise().sum();
  return (4.0 / (t * static_cast<double>(n))) * (b * h - row_sums.asDiagonal() * h);
}

double contrastive_loss(const std::vector<SimilarityMatrix>& s_hats, double tau) {
  if (tau <= 0.0) throw ArgumentError("temperature must be positive");
  const int v_count = static_cast<int>(s_hats.size());
  if (v_count < 2) throw ContractError("contrastive_loss needs at least 2 views");
  const Eigen::Index n = s_hats[0].rows();
  if (n < 2) throw ContractError("contrastive_loss needs N >= 2 (empty negative set)");

  // Unit rows; all-zero rows stay zero so their cosine with anything is 0.
  std::vector<Matrix> unit;
  unit.reserve(s_hats.size());
  for (const auto& s : s_hats) {
    Matrix u = s;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const double nrm = u.row(i).norm();
      if (nrm > 0.0) u.row(i) /= nrm;
      else u.row(i).setZero();
    }
    unit.push_back(std::move(u));
  }

  double total = 0.0;
  for (int v = 0; v < v_count; ++v) {
    for (int w = 0; w < v_count; ++w) {
      if (w == v) continue;
      const Matrix c_cross = unit[static_cast<size_t>(v)] * unit[static_cast<size_t>(w)].transpose();
      const Matrix c_self = unit[static_cast<size_t>(v)] * unit[static_cast<size_t>(v)].transpose();
      double pair_loss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double denom = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i) continue;
          denom += std::exp(c_self(i, j) / tau) + std::exp(c_cross(i, j) / tau);
        }
        pair_loss += -(c_cross(i, i) / tau) + std::log(denom);
      }
      total += pair_loss / static_cast<double>(n);
    }
  }
  return total;
}

double kl_loss(const Matrix& p, const std::vector<Matrix>& q_views) {
  auto check_rows = [](const Matrix& m, const char* what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double s = m.row(i).sum();
      if (std::abs(s - 1.0) > kRowSumTol)
        throw ContractError(std::string(what) + " row " + std::to_string(i) +
                            " is not a probability vector");
    }
  };
  check_rows(p, "pseudo-label");
  double total = 0.0;
  for (const auto& q : q_views) {
    if (q.rows() != p.rows() || q.cols() != p.cols())
      throw DimensionError("kl_loss: view soft labels must match pseudo-labels");
    check_rows(q, "soft-label");
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double pij = p(i, j);
        if (pij <= 0.0) continue;
        total += pij * std::log(pij / std::max(q(i, j), kKlClip));
      }
  }
  return total;
}

LossBreakdown total_loss(double rec, double con, double kl, double alpha, double beta) {
  LossBreakdown out;
  out.rec = rec;
  out.con = con;
  out.kl = kl;
  out.total = rec + alpha * con + beta * kl;
  return out;
}

}  // namespace imvc
