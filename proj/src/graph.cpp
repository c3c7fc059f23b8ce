#include "imvc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "imvc/error.hpp"

namespace imvc {

SimilarityMatrix rbf_similarity(const Matrix& x, double t) {
  if (t <= 0.0) throw ArgumentError("rbf scale t must be positive");
  const Eigen::Index n = x.rows();
  const Vector sq = x.rowwise().squaredNorm();
  const Matrix gram = x * x.transpose();
  SimilarityMatrix s(n, n);
  // Upper triangle mirrored so the result is exactly symmetric.
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
      const double v = std::exp(-d2 / t);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

SimilarityMatrix prune_missing(const SimilarityMatrix& s, const IntVector& mask_col) {
  if (mask_col.size() != s.rows())
    throw DimensionError("mask column length must match similarity size");
  SimilarityMatrix out = s;
  for (Eigen::Index i = 0; i < mask_col.size(); ++i) {
    if (mask_col(i) == 0) {
      out.row(i).setZero();
      out.col(i).setZero();
    }
  }
  return out;
}

AdjacencyGraph top_k_binarize(const Matrix& w, int k) {
  const Eigen::Index n = w.rows();
  if (k <= 0 || k > w.cols()) throw ArgumentError("top-K requires 1 <= K <= N");
  AdjacencyGraph a;
  a.k_per_row = k;
  a.values = Matrix::Zero(n, w.cols());
  std::vector<Eigen::Index> idx(static_cast<size_t>(w.cols()));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w.row(i).maxCoeff() <= 0.0 && w.row(i).minCoeff() >= 0.0) continue;  // all-zero row
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                      [&](Eigen::Index lhs, Eigen::Index rhs) {
                        if (w(i, lhs) != w(i, rhs)) return w(i, lhs) > w(i, rhs);
                        return lhs < rhs;  // ties -> lowest column index
                      });
    for (int j = 0; j < k; ++j) a.values(i, idx[static_cast<size_t>(j)]) = 1.0;
  }
  return a;
}

AdjacencyGraph fuse_global_graph(const std::vector<Matrix>& views, const IntMatrix& mask,
                                 double t, int k) {
  if (views.empty()) throw ArgumentError("fuse_global_graph needs at least one view");
  const Eigen::Index n = views[0].rows();
  Matrix total = Matrix::Zero(n, n);
  for (size_t v = 0; v < views.size(); ++v) {
    const SimilarityMatrix s = rbf_similarity(views[v], t);
    total += prune_missing(s, mask.col(static_cast<Eigen::Index>(v)));
  }
  return top_k_binarize(total, k);
}

Matrix normalize_adjacency(const AdjacencyGraph& a) {
  const Eigen::Index n = a.values.rows();
  Vector dinv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = a.values.row(i).sum();
    dinv(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  return dinv.asDiagonal() * a.values * dinv.asDiagonal();
}

AdjacencyGraph refine_view_graph(const AdjacencyGraph& a_view, const AdjacencyGraph& a_global,
                                 const IntVector& mask_col) {
  if (a_view.values.rows() != a_global.values.rows() ||
      a_view.values.cols() != a_global.values.cols())
    throw DimensionError("view and global graphs must have equal shape");
  AdjacencyGraph out = a_view;
  for (Eigen::Index i = 0; i < mask_col.size(); ++i)
    if (mask_col(i) == 0) out.values.row(i) = a_global.values.row(i);
  return out;
}

void save_edge_list(const AdjacencyGraph& a, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path);
  for (Eigen::Index i = 0; i < a.values.rows(); ++i)
    for (Eigen::Index j = 0; j < a.values.cols(); ++j)
      if (a.values(i, j) != 0.0) out << i << ',' << j << '\n';
}

}  // namespace imvc
