#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imvc/types.hpp"

namespace imvc {

/// A multi-view dataset: V feature matrices over the same N samples plus a
/// sample-by-view availability mask. Rows of a view whose mask entry is 0 are
/// all-zero by construction.
struct MultiViewDataset {
  std::vector<Matrix> views;          // view v is N x d_v
  IntMatrix mask;                     // N x V, entries in {0,1}
  std::optional<IntVector> labels;    // ground truth, evaluation only

  int n_samples() const { return views.empty() ? 0 : static_cast<int>(views[0].rows()); }
  int n_views() const { return static_cast<int>(views.size()); }
  int view_dim(int v) const { return static_cast<int>(views[v].cols()); }

  // Throws DimensionError / ContractError when an invariant is broken:
  // equal N across views, mask shape N x V, every mask row has >= 1 one,
  // masked-out rows are all-zero.
  void validate() const;
};

/// Which graph reconstruction loss drives the encoder.
enum class RecLossVariant { kMasked, kTraditional };

/// Component toggles used by the ablation experiments. All on by default.
struct AblationToggles {
  bool rec = true;    // masked/traditional graph reconstruction loss
  bool embed = true;  // embedding layer + graph-structure contrastive loss
  bool kl = true;     // self-supervised clustering loss
};

/// Every hyperparameter and dimensional choice in one place.
struct TrainConfig {
  int n_clusters = 0;              // clusters; 0 = infer from labels
  int n_neighbors = 10;            // K used by top-K graph construction
  int n_mask_edges = 10;           // k, per-row edge budget of the graph mask
  double rbf_scale = 2.0;          // t
  double temperature = 0.5;        // tau
  double alpha = 1.0;              // weight of the contrastive loss
  double beta = 1.0;               // weight of the KL loss
  double learning_rate = 1e-3;
  int epochs = 200;
  std::vector<int> hidden_dims;    // per-view encoder width; empty = 64 each
  int n_gat_layers = 2;
  int kmeans_max_iter = 50;
  std::uint64_t seed = 0;

  RecLossVariant rec_variant = RecLossVariant::kMasked;
  AblationToggles toggles;

  int hidden_dim(int v) const {
    return hidden_dims.empty() ? 64 : hidden_dims.at(static_cast<size_t>(v));
  }

  // Throws ArgumentError when the config is inconsistent with the dataset
  // (n_mask_edges <= n_neighbors <= N, n_clusters <= N, positive scales).
  void validate(const MultiViewDataset& ds) const;
};

// Container format (documented in README): a directory with view_0.csv ...
// view_{V-1}.csv, optional mask.csv / labels.csv, and a meta.json manifest.
MultiViewDataset load_dataset(const std::string& path);
void save_dataset(const MultiViewDataset& ds, const std::string& path);

/// Removes views from exactly round(delta * N) samples (round half to even).
/// Each affected sample loses a uniform number of views in {1,...,V-1} and
/// always keeps at least one. Deterministic under a fixed seed.
MultiViewDataset simulate_missing(const MultiViewDataset& complete, double delta,
                                  std::uint64_t rng_seed);

/// Per-feature min-max scaling to [0,1], statistics taken over available
/// samples only; missing rows stay all-zero; constant columns map to 0.
MultiViewDataset normalize_views(const MultiViewDataset& ds);

}  // namespace imvc
