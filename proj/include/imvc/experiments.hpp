#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "imvc/dataset.hpp"

namespace imvc {

/// One batch of experiment runs: a dataset crossed with missing rates and
/// seeds, plus loss-variant / component toggles and config overrides.
struct ExperimentSpec {
  std::string dataset_path;
  std::string dataset_name;  // defaults to the last path component
  std::vector<double> deltas{0.0};
  std::vector<std::uint64_t> seeds{0};
  RecLossVariant loss = RecLossVariant::kMasked;
  bool disable_rec = false;
  bool disable_embed = false;
  bool disable_kl = false;
  std::map<std::string, std::string> overrides;  // key=value TrainConfig edits
  std::string out_dir = "out";

  // Throws ArgumentError: deltas within [0,1), at least one seed.
  void validate() const;
};

/// Applies one "key=value" override; throws ArgumentError on unknown keys or
/// unparsable values. Keys: n_clusters, n_neighbors, n_mask_edges, t, tau,
/// alpha, beta, lr, epochs, hidden_dims (comma list), n_gat_layers,
/// kmeans_max_iter.
void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value);

TrainConfig build_config(const ExperimentSpec& spec);

/// Writes one masked dataset copy per (delta, seed) under
/// out_dir/sim_delta<delta>_seed<seed>/. Rerunning overwrites bit-identically.
int cmd_simulate(const ExperimentSpec& spec);

/// Trains and evaluates every (delta, seed); appends one row each to
/// out_dir/results.csv plus one mean row per delta (seed column "mean").
/// Schema: dataset,delta,seed,variant,acc,nmi,ari,epochs,wall_seconds.
int cmd_train_eval(const ExperimentSpec& spec);

/// Component toggle matrix (full, no_rec, no_embed, no_kl) plus the
/// masked-vs-traditional comparison; one mean-over-seeds row per
/// configuration per delta in out_dir/ablation.csv.
int cmd_ablate(const ExperimentSpec& spec);

}  // namespace imvc
