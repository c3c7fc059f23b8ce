#include "imvc/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "imvc/error.hpp"

namespace imvc {

Matrix fuse_features(const std::vector<Matrix>& h_views) {
  if (h_views.empty()) throw ArgumentError("fuse_features needs at least one view");
  const Eigen::Index n = h_views[0].rows();
  Eigen::Index total = 0;
  for (const auto& h : h_views) {
    if (h.rows() != n) throw DimensionError("fuse_features: views must share N");
    total += h.cols();
  }
  Matrix fused(n, total);
  Eigen::Index offset = 0;
  for (const auto& h : h_views) {
    fused.middleCols(offset, h.cols()) = h;
    offset += h.cols();
  }
  return fused;
}

namespace {

// Assignment step; ties -> lowest center index.
IntVector assign_points(const Matrix& h, const Matrix& centers) {
  IntVector assign(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (Eigen::Index j = 0; j < centers.rows(); ++j) {
      const double d = (h.row(i) - centers.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    assign(i) = best_j;
  }
  return assign;
}

// Greedy k-means++: several D^2-sampled candidates per step, keeping the one
// that lowers the potential most.
Matrix kmeans_pp_init(const Matrix& h, int k, std::mt19937_64& rng) {
  const Eigen::Index n = h.rows();
  Matrix centers(k, h.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  centers.row(0) = h.row(first(rng));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d2(i) = (h.row(i) - centers.row(0)).squaredNorm();
  const int n_candidates = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (total <= 0.0) {
      centers.row(c) = h.row(first(rng));
      continue;
    }
    Eigen::Index best_pick = -1;
    double best_potential = std::numeric_limits<double>::infinity();
    for (int cand = 0; cand < n_candidates; ++cand) {
      const double target = unit(rng) * total;
      double cum = 0.0;
      Eigen::Index pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        cum += d2(i);
        if (cum >= target) {
          pick = i;
          break;
        }
      }
      double potential = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        potential += std::min(d2(i), (h.row(i) - h.row(pick)).squaredNorm());
      if (potential < best_potential) {
        best_potential = potential;
        best_pick = pick;
      }
    }
    centers.row(c) = h.row(best_pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), (h.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

double wcss_of(const Matrix& h, const Matrix& centers) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centers.rows(); ++j)
      best = std::min(best, (h.row(i) - centers.row(j)).squaredNorm());
    total += best;
  }
  return total;
}

// One Lloyd descent from given centers.
Matrix run_lloyd(const Matrix& h, Matrix centers, int n_clusters, int max_iter) {
  const Eigen::Index n = h.rows();
  IntVector assign = assign_points(h, centers);
  for (int iter = 0; iter < max_iter; ++iter) {
    Matrix sums = Matrix::Zero(n_clusters, h.cols());
    IntVector counts = IntVector::Zero(n_clusters);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign(i)) += h.row(i);
      counts(assign(i)) += 1;
    }
    Matrix next = centers;
    for (int j = 0; j < n_clusters; ++j)
      if (counts(j) > 0) next.row(j) = sums.row(j) / counts(j);

    // Empty clusters take the point farthest from its assigned center.
    std::vector<bool> taken(static_cast<size_t>(n), false);
    for (int j = 0; j < n_clusters; ++j) {
      if (counts(j) > 0) continue;
      double far = -1.0;
      Eigen::Index pick = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[static_cast<size_t>(i)]) continue;
        const double d = (h.row(i) - next.row(assign(i))).squaredNorm();
        if (d > far) {
          far = d;
          pick = i;
        }
      }
      if (pick >= 0) {
        next.row(j) = h.row(pick);
        taken[static_cast<size_t>(pick)] = true;
      }
    }

    IntVector next_assign = assign_points(h, next);
    const bool converged = (next_assign == assign) && counts.minCoeff() > 0;
    centers = std::move(next);
    assign = std::move(next_assign);
    if (converged) break;
  }
  return centers;
}

}  // namespace

Matrix kmeans_update(const Matrix& h, int n_clusters, const std::optional<Matrix>& warm_start,
                     int max_iter, std::uint64_t seed) {
  const Eigen::Index n = h.rows();
  if (n_clusters <= 0 || n_clusters > n)
    throw ArgumentError("kmeans requires 1 <= K <= N");
  if (warm_start) {
    if (warm_start->rows() != n_clusters || warm_start->cols() != h.cols())
      throw DimensionError("warm-start centers have the wrong shape");
    return run_lloyd(h, *warm_start, n_clusters, max_iter);
  }
  constexpr int kRestarts = 5;
  std::mt19937_64 rng(seed);
  Matrix best;
  double best_wcss = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < kRestarts; ++restart) {
    Matrix centers = run_lloyd(h, kmeans_pp_init(h, n_clusters, rng), n_clusters, max_iter);
    const double w = wcss_of(h, centers);
    if (w < best_wcss) {
      best_wcss = w;
      best = std::move(centers);
    }
  }
  return best;
}

Matrix soft_labels(const Matrix& h, const Matrix& centers) {
  if (h.cols() != centers.cols())
    throw DimensionError("soft_labels: feature width must match centers");
  const Eigen::Index n = h.rows();
  const Eigen::Index k = centers.rows();
  Matrix q(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      q(i, j) = 1.0 / (1.0 + (h.row(i) - centers.row(j)).squaredNorm());
      total += q(i, j);
    }
    q.row(i) /= total;
  }
  return q;
}

Matrix sharpen(const Matrix& q) {
  Matrix p(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double row_sum = q.row(i).sum();
    if (row_sum <= 0.0)
      throw ContractError("sharpen: all-zero soft-label row " + std::to_string(i));
    const Eigen::RowVectorXd r = q.row(i) / row_sum;
    const Eigen::RowVectorXd sq = r.cwiseProduct(r);
    p.row(i) = sq / sq.sum();
  }
  return p;
}

std::vector<Matrix> view_soft_labels(const std::vector<Matrix>& h_views, const Matrix& centers) {
  Eigen::Index total = 0;
  for (const auto& h : h_views) total += h.cols();
  if (total != centers.cols())
    throw DimensionError("view_soft_labels: center width must equal summed view widths");
  std::vector<Matrix> out;
  out.reserve(h_views.size());
  Eigen::Index offset = 0;
  for (const auto& h : h_views) {
    out.push_back(soft_labels(h, centers.middleCols(offset, h.cols())));
    offset += h.cols();
  }
  return out;
}

IntVector final_assignment(const std::vector<Matrix>& q_views) {
  if (q_views.empty()) throw ArgumentError("final_assignment needs at least one view");
  Matrix summed = q_views[0];
  for (size_t v = 1; v < q_views.size(); ++v) summed += q_views[v];
  IntVector labels(summed.rows());
  for (Eigen::Index i = 0; i < summed.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < summed.cols(); ++j)
      if (summed(i, j) > summed(i, best)) best = static_cast<int>(j);  // ties -> lowest
    labels(i) = best;
  }
  return labels;
}

void save_labels(const IntVector& labels, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path);
  for (Eigen::Index i = 0; i < labels.size(); ++i) out << labels(i) << '\n';
}

}  // namespace imvc
