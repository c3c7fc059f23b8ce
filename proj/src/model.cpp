#include "imvc/model.hpp"

#include <cmath>
#include <random>

#include "imvc/error.hpp"

namespace imvc {

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace

ModelParams init_params(const MultiViewDataset& ds, const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  ModelParams params;
  for (int v = 0; v < ds.n_views(); ++v) {
    ViewParams vp;
    const int d_in = ds.view_dim(v);
    int width = d_in;
    if (cfg.toggles.embed) {
      width = cfg.hidden_dim(v);
      const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
      vp.w_embed = uniform_matrix(d_in, width, bound, rng);
      vp.b_embed = uniform_matrix(1, width, bound, rng);
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(width));
    for (int l = 0; l < cfg.n_gat_layers; ++l) {
      LayerParams lp;
      lp.w_query = uniform_matrix(width, width, bound, rng);
      lp.w_key = uniform_matrix(width, width, bound, rng);
      lp.w_value = uniform_matrix(width, width, bound, rng);
      lp.w_out = uniform_matrix(width, width, bound, rng);
      lp.b_out = uniform_matrix(1, width, bound, rng);
      vp.layers.push_back(std::move(lp));
    }
    params.views.push_back(std::move(vp));
  }
  return params;
}

Matrix embed(const Matrix& x, const Matrix& a_global_norm, const ViewParams& params) {
  if (a_global_norm.cols() != x.rows())
    throw DimensionError("embed: adjacency and feature row counts must chain");
  if (params.w_embed.rows() != x.cols())
    throw DimensionError("embed: feature width must match w_embed rows");
  return ((a_global_norm * x) * params.w_embed).rowwise() +
         Eigen::RowVectorXd(params.b_embed.row(0));
}

std::pair<SimilarityMatrix, AdjacencyGraph> build_view_graph(const Matrix& z, double t, int k,
                                                             const AdjacencyGraph& a_global,
                                                             const IntVector& mask_col) {
  SimilarityMatrix s_hat = rbf_similarity(z, t);  // no pruning: z is imputed
  AdjacencyGraph a = refine_view_graph(top_k_binarize(s_hat, k), a_global, mask_col);
  return {std::move(s_hat), std::move(a)};
}

Matrix attention_logits(const Matrix& h_prev, const Matrix& w_query, const Matrix& w_key) {
  return (h_prev * w_query) * (h_prev * w_key).transpose();
}

Matrix masked_softmax(const Matrix& logits, const AdjacencyGraph& a) {
  const Eigen::Index n = logits.rows();
  if (a.values.rows() != n || a.values.cols() != logits.cols())
    throw DimensionError("masked_softmax: graph shape must match logits");
  Matrix out = Matrix::Zero(n, logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < logits.cols(); ++j)
      if (a.values(i, j) != 0.0) row_max = std::max(row_max, logits(i, j));
    if (!std::isfinite(row_max))
      throw ContractError("masked_softmax: row " + std::to_string(i) + " has no neighbors");
    double denom = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (a.values(i, j) != 0.0) {
        out(i, j) = std::exp(logits(i, j) - row_max);
        denom += out(i, j);
      }
    }
    out.row(i) /= denom;
  }
  return out;
}

Matrix encoder_layer(const Matrix& h_prev, const AdjacencyGraph& a, const LayerParams& params) {
  const Matrix weights = masked_softmax(attention_logits(h_prev, params.w_query, params.w_key), a);
  const Matrix pre = (((weights * h_prev) * params.w_value) * params.w_out).rowwise() +
                     Eigen::RowVectorXd(params.b_out.row(0));
  return pre.cwiseMax(0.0) + h_prev;
}

ForwardCache forward(const MultiViewDataset& ds, const AdjacencyGraph& a_global,
                     const ModelParams& params, const TrainConfig& cfg) {
  if (static_cast<int>(params.views.size()) != ds.n_views())
    throw DimensionError("forward: parameter views must match dataset views");
  const Matrix a_norm = normalize_adjacency(a_global);
  ForwardCache cache;
  for (int v = 0; v < ds.n_views(); ++v) {
    const ViewParams& vp = params.views[static_cast<size_t>(v)];
    Matrix z = vp.has_embed() ? embed(ds.views[static_cast<size_t>(v)], a_norm, vp)
                              : ds.views[static_cast<size_t>(v)];
    auto [s_hat, a_view] =
        build_view_graph(z, cfg.rbf_scale, cfg.n_neighbors, a_global, ds.mask.col(v));
    std::vector<Matrix> layer_feats{z};
    for (const LayerParams& lp : vp.layers)
      layer_feats.push_back(encoder_layer(layer_feats.back(), a_view, lp));
    cache.primary.push_back(std::move(z));
    cache.s_hat.push_back(std::move(s_hat));
    cache.view_graphs.push_back(std::move(a_view));
    cache.high_level.push_back(layer_feats.back());
    cache.layer_features.push_back(std::move(layer_feats));
  }
  return cache;
}

}  // namespace imvc
