#pragma once

#include <string>
#include <utility>
#include <vector>

#include "imvc/dataset.hpp"
#include "imvc/graph.hpp"
#include "imvc/types.hpp"

namespace imvc {

/// One self-attention encoder layer's trainable tensors.
struct LayerParams {
  Matrix w_query, w_key, w_value;  // h x h
  Matrix w_out;                    // h x h
  Matrix b_out;                    // 1 x h
};

/// Per-view trainable tensors. w_embed/b_embed are empty (0x0) when the
/// embedding layer is ablated away.
struct ViewParams {
  Matrix w_embed;  // d_v x h_v
  Matrix b_embed;  // 1 x h_v
  std::vector<LayerParams> layers;

  bool has_embed() const { return w_embed.size() > 0; }
};

/// All trainable tensors, plus uniform visitation for optimizers,
/// checkpointing and finite-difference sweeps.
struct ModelParams {
  std::vector<ViewParams> views;

  // f(name, tensor) over every trainable matrix, in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    for (size_t v = 0; v < views.size(); ++v) {
      const std::string p = "view" + std::to_string(v) + ".";
      if (views[v].has_embed()) {
        f(p + "w_embed", views[v].w_embed);
        f(p + "b_embed", views[v].b_embed);
      }
      for (size_t l = 0; l < views[v].layers.size(); ++l) {
        const std::string lp = p + "layer" + std::to_string(l) + ".";
        f(lp + "w_query", views[v].layers[l].w_query);
        f(lp + "w_key", views[v].layers[l].w_key);
        f(lp + "w_value", views[v].layers[l].w_value);
        f(lp + "w_out", views[v].layers[l].w_out);
        f(lp + "b_out", views[v].layers[l].b_out);
      }
    }
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](const std::string& n, Matrix& m) { f(n, static_cast<const Matrix&>(m)); });
  }
};

/// Gradients (and Adam moments) share the parameter layout.
using Gradients = ModelParams;

/// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization. Encoder
/// width is cfg.hidden_dim(v) with the embedding layer, the raw feature
/// dimension without it.
ModelParams init_params(const MultiViewDataset& ds, const TrainConfig& cfg);

/// Everything one forward pass produces.
struct ForwardCache {
  std::vector<Matrix> primary;                 // Z^v, N x h_v
  std::vector<SimilarityMatrix> s_hat;         // similarities over Z^v
  std::vector<AdjacencyGraph> view_graphs;     // refined A^v
  std::vector<std::vector<Matrix>> layer_features;  // per view: H_0 .. H_L
  std::vector<Matrix> high_level;              // H^v = H_L
};

/// Z = A_norm * X * W_e + b_e (bias broadcast over rows).
Matrix embed(const Matrix& x, const Matrix& a_global_norm, const ViewParams& params);

/// Similarity over primary features plus the refined view graph:
/// S_hat = rbf(z, t); A = refine(topK(S_hat), A_global, mask_col).
std::pair<SimilarityMatrix, AdjacencyGraph> build_view_graph(const Matrix& z, double t, int k,
                                                             const AdjacencyGraph& a_global,
                                                             const IntVector& mask_col);

/// E = (H W_Q)(H W_K)^T.
Matrix attention_logits(const Matrix& h_prev, const Matrix& w_query, const Matrix& w_key);

/// Row softmax restricted to the graph support; 0 elsewhere. Throws
/// ContractError on an all-zero adjacency row.
Matrix masked_softmax(const Matrix& logits, const AdjacencyGraph& a);

/// H_l = relu((A_tilde H W_V) W_out + b_out) + H with attention weights from
/// masked_softmax(attention_logits(...)).
Matrix encoder_layer(const Matrix& h_prev, const AdjacencyGraph& a, const LayerParams& params);

/// Full pipeline over all views: embed, view graphs, encoder stack.
ForwardCache forward(const MultiViewDataset& ds, const AdjacencyGraph& a_global,
                     const ModelParams& params, const TrainConfig& cfg);

}  // namespace imvc
