#pragma once

#include <optional>
#include <string>
#include <vector>

#include "imvc/clustering.hpp"
#include "imvc/dataset.hpp"
#include "imvc/losses.hpp"
#include "imvc/metrics.hpp"
#include "imvc/model.hpp"

namespace imvc {

struct AdamState {
  Gradients m;  // first moments, parameter-shaped
  Gradients v;  // second moments
  long step = 0;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown losses;
  std::optional<MetricTriple> metrics;
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  ClusterState cluster;
  int epoch = 0;
  std::vector<EpochRecord> history;
};

/// Result of one full optimization run.
struct TrainResult {
  TrainState state;
  IntVector labels;
};

/// Full training loop: global graph once up front, then per epoch the
/// forward pass, cluster-state refresh, loss, gradients and one Adam step;
/// final labels from the view-summed soft assignments. Deterministic under a
/// fixed seed. Throws on a non-finite loss, naming the first bad term.
TrainResult train(const MultiViewDataset& ds, const TrainConfig& cfg);

/// Gradients of the total loss w.r.t. every trainable tensor at the cached
/// forward point. Top-K selections, graph masks, cluster centers and the
/// pseudo-label target are constants of the backward pass; gradients flow
/// through similarities, attention and soft labels. When `breakdown` is
/// non-null the loss terms are written to it.
Gradients compute_gradients(const TrainState& state, const ForwardCache& cache,
                            const MultiViewDataset& ds, const TrainConfig& cfg,
                            LossBreakdown* breakdown = nullptr);

/// Total loss at arbitrary parameters with the stop-gradient context (view
/// graphs, graph masks, centers, pseudo-labels) frozen from `state`/`cache`.
/// This is the function compute_gradients differentiates.
LossBreakdown eval_loss_frozen(const ModelParams& params, const TrainState& state,
                               const ForwardCache& cache, const MultiViewDataset& ds,
                               const TrainConfig& cfg);

/// One Adam update, beta1=0.9, beta2=0.999, eps=1e-8, bias-corrected.
/// Increments adam.step, then updates moments and parameters in place.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& adam, double lr);

/// Binary checkpoint (JSON manifest + little-endian doubles); round-trips
/// bit-exactly.
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

/// epoch,rec,con,kl,total,acc,nmi,ari rows (metric cells empty when absent).
void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

}  // namespace imvc
