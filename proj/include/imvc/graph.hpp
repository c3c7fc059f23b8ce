#pragma once

#include <string>
#include <vector>

#include "imvc/types.hpp"

namespace imvc {

/// Binary neighbor graph from per-row top-K selection. Stored as a dense
/// 0/1 double matrix so it can feed matrix arithmetic directly.
struct AdjacencyGraph {
  Matrix values;       // N x N, entries in {0,1}
  int k_per_row = 0;   // the K used at construction
};

/// S_ij = exp(-||x_i - x_j||^2 / t). Exactly symmetric, unit diagonal.
SimilarityMatrix rbf_similarity(const Matrix& x, double t);

/// Zeroes rows and columns of samples with mask_col[i] = 0.
SimilarityMatrix prune_missing(const SimilarityMatrix& s, const IntVector& mask_col);

/// Per row, the K largest entries become 1 (ties broken by lowest column
/// index); all-zero rows stay all-zero.
AdjacencyGraph top_k_binarize(const Matrix& w, int k);

/// Global graph: top-K of the sum of pruned per-view RBF similarities.
AdjacencyGraph fuse_global_graph(const std::vector<Matrix>& views, const IntMatrix& mask,
                                 double t, int k);

/// D^{-1/2} A D^{-1/2} with row-sum degrees; zero-degree rows/columns stay 0.
Matrix normalize_adjacency(const AdjacencyGraph& a);

/// Rows of missing samples (mask_col[i] = 0) are replaced by the global
/// graph's rows; all other rows kept.
AdjacencyGraph refine_view_graph(const AdjacencyGraph& a_view, const AdjacencyGraph& a_global,
                                 const IntVector& mask_col);

/// Debug export: one "i,j" line per edge.
void save_edge_list(const AdjacencyGraph& a, const std::string& path);

}  // namespace imvc
