#pragma once

// Shared synthetic fixtures: multi-view Gaussian blobs with per-view random
// orthonormal center placement. Pairwise center distance equals `separation`
// (noise sigma is 1), so separation is expressed in sigma units.

#include <cmath>
#include <random>

#include <Eigen/QR>

#include "imvc/dataset.hpp"

namespace fixtures {

inline imvc::MultiViewDataset make_blobs(int n, int clusters, int views, int dim,
                                         double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  imvc::MultiViewDataset ds;
  imvc::IntVector labels(n);
  for (int i = 0; i < n; ++i) labels(i) = i % clusters;
  const double scale = separation / std::sqrt(2.0);
  for (int v = 0; v < views; ++v) {
    imvc::Matrix basis(dim, clusters);
    for (int i = 0; i < dim; ++i)
      for (int c = 0; c < clusters; ++c) basis(i, c) = gauss(rng);
    const imvc::Matrix q =
        Eigen::HouseholderQR<imvc::Matrix>(basis).householderQ() *
        imvc::Matrix::Identity(dim, clusters);
    imvc::Matrix x(n, dim);
    for (int i = 0; i < n; ++i) {
      x.row(i) = scale * q.col(labels(i)).transpose();
      for (int j = 0; j < dim; ++j) x(i, j) += gauss(rng);
    }
    ds.views.push_back(std::move(x));
  }
  ds.mask = imvc::IntMatrix::Ones(n, views);
  ds.labels = labels;
  return ds;
}

// The desk-scale configuration used by the synthetic-fixture experiments.
inline imvc::TrainConfig blob_config() {
  imvc::TrainConfig cfg;
  cfg.n_clusters = 4;
  cfg.n_neighbors = 10;
  cfg.n_mask_edges = 10;
  cfg.epochs = 100;
  cfg.hidden_dims = {};  // 64 per view
  cfg.n_gat_layers = 2;
  return cfg;
}

// Small instance for gradient checks: keeps the finite-difference sweeps fast.
inline imvc::TrainConfig tiny_config(int views) {
  imvc::TrainConfig cfg;
  cfg.n_clusters = 3;
  cfg.n_neighbors = 4;
  cfg.n_mask_edges = 3;
  cfg.epochs = 5;
  cfg.hidden_dims.assign(static_cast<size_t>(views), 5);
  cfg.n_gat_layers = 2;
  return cfg;
}

}  // namespace fixtures
