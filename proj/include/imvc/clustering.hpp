#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imvc/types.hpp"

namespace imvc {

/// Clustering head state: global centers (views side by side), global soft
/// labels, sharpened pseudo-labels, per-view soft labels.
struct ClusterState {
  Matrix centers;               // K_c x D, D = sum of per-view widths
  Matrix q;                     // N x K_c
  Matrix p;                     // N x K_c
  std::vector<Matrix> q_views;  // V of N x K_c
  std::vector<int> view_dims;   // column widths partitioning `centers`
};

/// Horizontal concatenation in view order.
Matrix fuse_features(const std::vector<Matrix>& h_views);

/// Lloyd's algorithm, squared-Euclidean objective. k-means++ init when no
/// warm start; empty clusters re-seeded to the point farthest from its
/// center; assignment ties -> lowest center index.
Matrix kmeans_update(const Matrix& h, int n_clusters, const std::optional<Matrix>& warm_start,
                     int max_iter, std::uint64_t seed);

/// Student-t (degree 1) soft assignment, row-normalized:
/// q_ij = (1+||h_i-u_j||^2)^{-1} / sum_k (1+||h_i-u_k||^2)^{-1}.
Matrix soft_labels(const Matrix& h, const Matrix& centers);

/// p_ij = r_ij^2 / sum_k r_ik^2 with r the row-normalized q. Throws
/// ContractError on an all-zero row.
Matrix sharpen(const Matrix& q);

/// Per-view Student-t soft labels against the matching center block.
std::vector<Matrix> view_soft_labels(const std::vector<Matrix>& h_views, const Matrix& centers);

/// y_i = argmax_k sum_v q^v_ik; ties -> lowest cluster index.
IntVector final_assignment(const std::vector<Matrix>& q_views);

/// One label per line, aligned to sample order.
void save_labels(const IntVector& labels, const std::string& path);

}  // namespace imvc
