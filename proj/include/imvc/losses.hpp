#pragma once

#include <vector>

#include "imvc/graph.hpp"
#include "imvc/types.hpp"

namespace imvc {

/// Per-row top-k indicator over a reconstructed graph. Distinct from the
/// dataset's missing mask: this one selects which reconstructed edges the
/// loss sees.
struct GraphMask {
  Matrix values;  // N x N, entries in {0,1}
  int k = 0;
};

struct LossBreakdown {
  double rec = 0.0;
  double con = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

/// Reconstructed graph over high-level features: rbf_similarity(h, t).
SimilarityMatrix reconstructed_graph(const Matrix& h, double t);

/// Per row, marks the k largest strictly-positive entries (ties -> lowest
/// column index); rows get min(k, #positive) ones.
GraphMask graph_mask(const SimilarityMatrix& a_hat, int k);

/// (1/V) sum_v (1/N) ||M^v ⊙ A_hat^v - A_bar||_F^2 with M^v = graph_mask(A_hat^v, k).
double masked_rec_loss(const std::vector<SimilarityMatrix>& a_hats, const AdjacencyGraph& a_global,
                       int k);

/// Same with an explicitly supplied (frozen) mask; single view, (1/N)-scaled.
double masked_rec_term(const SimilarityMatrix& a_hat, const Matrix& mask, const Matrix& a_global);

/// Masked loss with an all-ones mask.
double traditional_rec_loss(const std::vector<SimilarityMatrix>& a_hats,
                            const AdjacencyGraph& a_global);

/// Closed-form gradient of the sample-i row loss sum_j (A_hat_ij - Abar_ij)^2
/// w.r.t. h_i, with A_hat = rbf(h, t):
///   (4/t) ( sum_{j in E_i} (A_hat_ij - 1) A_hat_ij (h_j - h_i)
///         + sum_{j not in E_i} A_hat_ij^2 (h_j - h_i) ),  E_i = {j : Abar_ij = 1}.
Vector grad_traditional(const Matrix& h, const AdjacencyGraph& a_global, double t, int i);

/// Masked counterpart: terms restricted to M_ij = 1 with M = graph_mask(A_hat, k),
/// the mask held constant.
Vector grad_masked(const Matrix& h, const AdjacencyGraph& a_global, double t, int k, int i);

/// Full-matrix gradient of the aggregated single-view term
/// (1/N)||M ⊙ A_hat - A_bar||_F^2 w.r.t. every row of h (mask fixed). Both the
/// row-loss terms and their transposed reactions, in one Laplacian-style form.
Matrix masked_rec_grad_h(const Matrix& h, const Matrix& mask, const Matrix& a_global, double t);

/// Graph-structure contrastive loss over per-view similarity matrices,
/// cosine row similarity, temperature tau. Sum over ordered view pairs of
/// (1/N) sum_i -log( exp(d(s^v_i, s^w_i)/tau)
///                 / sum_{u in {v,w}} sum_{j != i} exp(d(s^v_i, s^u_j)/tau) ).
/// Cosine with an all-zero row is defined as 0. Throws ContractError when
/// N < 2 or V < 2.
double contrastive_loss(const std::vector<SimilarityMatrix>& s_hats, double tau);

/// sum_v sum_i sum_j p_ij log(p_ij / q^v_ij); p_ij = 0 terms contribute 0,
/// q clipped below at 1e-12. Throws ContractError when any row is more than
/// 1e-6 away from summing to 1.
double kl_loss(const Matrix& p, const std::vector<Matrix>& q_views);

/// total = rec + alpha * con + beta * kl.
LossBreakdown total_loss(double rec, double con, double kl, double alpha, double beta);

}  // namespace imvc
