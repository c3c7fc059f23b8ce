#include "imvc/experiments.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "imvc/error.hpp"
#include "imvc/trainer.hpp"

namespace imvc {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string delta_tag(double delta) {
  std::ostringstream os;
  os << delta;
  std::string s = os.str();
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

double parse_double_arg(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ArgumentError("cannot parse value '" + v + "' for " + key);
  }
}

int parse_int_arg(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ArgumentError("cannot parse value '" + v + "' for " + key);
  }
}

struct RunOutcome {
  std::optional<MetricTriple> metrics;
  double wall_seconds = 0.0;
  int epochs = 0;
};

RunOutcome run_once(const MultiViewDataset& base, double delta, std::uint64_t seed,
                    const TrainConfig& cfg_base, const std::string& run_dir) {
  TrainConfig cfg = cfg_base;
  cfg.seed = seed;
  MultiViewDataset ds = delta > 0.0 ? simulate_missing(base, delta, seed) : base;
  ds = normalize_views(ds);

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(ds, cfg);
  const auto t1 = std::chrono::steady_clock::now();

  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    write_history_csv(result.state.history, run_dir + "/history.csv");
    save_labels(result.labels, run_dir + "/labels.csv");
  }

  RunOutcome out;
  out.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.epochs = cfg.epochs;
  if (ds.labels) out.metrics = evaluate(result.labels, *ds.labels);
  return out;
}

const char* kResultHeader = "dataset,delta,seed,variant,acc,nmi,ari,epochs,wall_seconds\n";

void write_row(std::ostream& out, const std::string& dataset, double delta,
               const std::string& seed, const std::string& variant,
               const std::optional<MetricTriple>& m, int epochs, double wall) {
  out << dataset << ',' << fmt(delta) << ',' << seed << ',' << variant << ',';
  if (m)
    out << fmt(m->acc) << ',' << fmt(m->nmi) << ',' << fmt(m->ari);
  else
    out << "nan,nan,nan";
  out << ',' << epochs << ',' << fmt(wall) << '\n';
}

}  // namespace

void ExperimentSpec::validate() const {
  if (dataset_path.empty()) throw ArgumentError("dataset path is required");
  if (deltas.empty()) throw ArgumentError("at least one delta is required");
  for (double d : deltas)
    if (d < 0.0 || d >= 1.0) throw ArgumentError("delta must be in [0,1)");
  if (seeds.empty()) throw ArgumentError("at least one seed is required");
}

void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "n_clusters") cfg.n_clusters = parse_int_arg(value, key);
  else if (key == "n_neighbors") cfg.n_neighbors = parse_int_arg(value, key);
  else if (key == "n_mask_edges") cfg.n_mask_edges = parse_int_arg(value, key);
  else if (key == "t") cfg.rbf_scale = parse_double_arg(value, key);
  else if (key == "tau") cfg.temperature = parse_double_arg(value, key);
  else if (key == "alpha") cfg.alpha = parse_double_arg(value, key);
  else if (key == "beta") cfg.beta = parse_double_arg(value, key);
  else if (key == "lr") cfg.learning_rate = parse_double_arg(value, key);
  else if (key == "epochs") cfg.epochs = parse_int_arg(value, key);
  else if (key == "n_gat_layers") cfg.n_gat_layers = parse_int_arg(value, key);
  else if (key == "kmeans_max_iter") cfg.kmeans_max_iter = parse_int_arg(value, key);
  else if (key == "hidden_dims") {
    cfg.hidden_dims.clear();
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ','))
      cfg.hidden_dims.push_back(parse_int_arg(tok, key));
  } else {
    throw ArgumentError("unknown config key '" + key + "'");
  }
}

TrainConfig build_config(const ExperimentSpec& spec) {
  TrainConfig cfg;
  cfg.rec_variant = spec.loss;
  cfg.toggles.rec = !spec.disable_rec;
  cfg.toggles.embed = !spec.disable_embed;
  cfg.toggles.kl = !spec.disable_kl;
  for (const auto& [key, value] : spec.overrides) apply_override(cfg, key, value);
  return cfg;
}

int cmd_simulate(const ExperimentSpec& spec) {
  spec.validate();
  const MultiViewDataset base = load_dataset(spec.dataset_path);
  fs::create_directories(spec.out_dir);
  for (double delta : spec.deltas) {
    for (std::uint64_t seed : spec.seeds) {
      const MultiViewDataset masked =
          delta > 0.0 ? simulate_missing(base, delta, seed) : base;
      const std::string dir = spec.out_dir + "/sim_delta" + delta_tag(delta) + "_seed" +
                              std::to_string(seed);
      save_dataset(masked, dir);
      std::cout << "wrote " << dir << '\n';
    }
  }
  return 0;
}

int cmd_train_eval(const ExperimentSpec& spec) {
  spec.validate();
  const MultiViewDataset base = load_dataset(spec.dataset_path);
  if (!base.labels)
    std::cerr << "warning: dataset has no labels; training runs but evaluation is skipped\n";
  const TrainConfig cfg = build_config(spec);
  const std::string variant =
      spec.loss == RecLossVariant::kMasked ? "masked" : "traditional";

  fs::create_directories(spec.out_dir);
  std::ofstream out(spec.out_dir + "/results.csv", std::ios::trunc);
  if (!out) throw ParseError("cannot write " + spec.out_dir + "/results.csv");
  out << kResultHeader;

  bool all_finite = true;
  for (double delta : spec.deltas) {
    double acc_sum = 0.0, nmi_sum = 0.0, ari_sum = 0.0, wall_sum = 0.0;
    int counted = 0;
    for (std::uint64_t seed : spec.seeds) {
      const std::string run_dir = spec.out_dir + "/run_delta" + delta_tag(delta) + "_seed" +
                                  std::to_string(seed);
      const RunOutcome outcome = run_once(base, delta, seed, cfg, run_dir);
      write_row(out, spec.dataset_name, delta, std::to_string(seed), variant, outcome.metrics,
                outcome.epochs, outcome.wall_seconds);
      if (outcome.metrics) {
        if (!std::isfinite(outcome.metrics->acc) || !std::isfinite(outcome.metrics->nmi) ||
            !std::isfinite(outcome.metrics->ari))
          all_finite = false;
        acc_sum += outcome.metrics->acc;
        nmi_sum += outcome.metrics->nmi;
        ari_sum += outcome.metrics->ari;
        ++counted;
      }
      wall_sum += outcome.wall_seconds;
    }
    std::optional<MetricTriple> mean;
    if (counted > 0)
      mean = MetricTriple{acc_sum / counted, nmi_sum / counted, ari_sum / counted};
    write_row(out, spec.dataset_name, delta, "mean", variant, mean, cfg.epochs, wall_sum);
  }
  return all_finite ? 0 : 1;
}

int cmd_ablate(const ExperimentSpec& spec) {
  spec.validate();
  const MultiViewDataset base = load_dataset(spec.dataset_path);
  const TrainConfig cfg_base = build_config(spec);

  struct Config {
    const char* name;
    AblationToggles toggles;
    RecLossVariant variant;
  };
  const std::vector<Config> configs = {
      {"full", {true, true, true}, RecLossVariant::kMasked},
      {"no_rec", {false, true, true}, RecLossVariant::kMasked},
      {"no_embed", {true, false, true}, RecLossVariant::kMasked},
      {"no_kl", {true, true, false}, RecLossVariant::kMasked},
      {"masked", {true, true, true}, RecLossVariant::kMasked},
      {"traditional", {true, true, true}, RecLossVariant::kTraditional},
  };

  fs::create_directories(spec.out_dir);
  std::ofstream out(spec.out_dir + "/ablation.csv", std::ios::trunc);
  if (!out) throw ParseError("cannot write " + spec.out_dir + "/ablation.csv");
  out << kResultHeader;

  bool all_finite = true;
  for (double delta : spec.deltas) {
    for (const Config& config : configs) {
      TrainConfig cfg = cfg_base;
      cfg.toggles = config.toggles;
      cfg.rec_variant = config.variant;
      double acc_sum = 0.0, nmi_sum = 0.0, ari_sum = 0.0, wall_sum = 0.0;
      int counted = 0;
      for (std::uint64_t seed : spec.seeds) {
        const RunOutcome outcome = run_once(base, delta, seed, cfg, "");
        if (outcome.metrics) {
          acc_sum += outcome.metrics->acc;
          nmi_sum += outcome.metrics->nmi;
          ari_sum += outcome.metrics->ari;
          ++counted;
        }
        wall_sum += outcome.wall_seconds;
      }
      std::optional<MetricTriple> mean;
      if (counted > 0)
        mean = MetricTriple{acc_sum / counted, nmi_sum / counted, ari_sum / counted};
      else
        all_finite = false;
      if (mean && (!std::isfinite(mean->acc) || !std::isfinite(mean->nmi) ||
                   !std::isfinite(mean->ari)))
        all_finite = false;
      write_row(out, spec.dataset_name, delta, "mean", config.name, mean, cfg.epochs, wall_sum);
    }
  }
  return all_finite ? 0 : 1;
}

}  // namespace imvc
