#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "imvc/error.hpp"
#include "imvc/experiments.hpp"

namespace {

std::string default_out_dir() {
  if (const char* env = std::getenv("IMVC_OUT_DIR")) return env;
  return "out";
}

void add_common(CLI::App* cmd, imvc::ExperimentSpec& spec, std::vector<std::string>& overrides) {
  cmd->add_option("--dataset", spec.dataset_path, "dataset directory (container format)")
      ->required();
  cmd->add_option("--delta", spec.deltas, "missing rate(s) in [0,1); repeatable");
  cmd->add_option("--seed", spec.seeds, "RNG seed(s); repeatable");
  cmd->add_option("--config", overrides, "TrainConfig override key=value; repeatable");
  cmd->add_option("--out", spec.out_dir, "output directory (default $IMVC_OUT_DIR or ./out)");
}

void finalize(imvc::ExperimentSpec& spec, const std::vector<std::string>& overrides,
              const std::vector<std::string>& disable) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw imvc::ArgumentError("--config expects key=value, got '" + kv + "'");
    spec.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& component : disable) {
    if (component == "rec") spec.disable_rec = true;
    else if (component == "embed") spec.disable_embed = true;
    else if (component == "kl") spec.disable_kl = true;
    else throw imvc::ArgumentError("--disable expects rec|embed|kl, got '" + component + "'");
  }
  if (spec.dataset_name.empty())
    spec.dataset_name = std::filesystem::path(spec.dataset_path).filename().string();
  if (spec.dataset_name.empty()) spec.dataset_name = spec.dataset_path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"incomplete multi-view graph clustering"};
  app.require_subcommand(1);

  imvc::ExperimentSpec spec;
  spec.out_dir = default_out_dir();
  std::vector<std::string> overrides;
  std::vector<std::string> disable;
  std::string loss = "masked";

  CLI::App* simulate = app.add_subcommand("simulate", "write masked dataset copies per (delta, seed)");
  add_common(simulate, spec, overrides);

  CLI::App* train = app.add_subcommand("train", "train and evaluate per (delta, seed)");
  add_common(train, spec, overrides);
  train->add_option("--loss", loss, "reconstruction loss: masked|traditional")
      ->check(CLI::IsMember({"masked", "traditional"}));
  train->add_option("--disable", disable, "disable a component: rec|embed|kl; repeatable");

  CLI::App* ablate = app.add_subcommand("ablate", "component and loss-variant toggle matrix");
  add_common(ablate, spec, overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    finalize(spec, overrides, disable);
    spec.loss = loss == "traditional" ? imvc::RecLossVariant::kTraditional
                                      : imvc::RecLossVariant::kMasked;
    if (simulate->parsed()) return imvc::cmd_simulate(spec);
    if (train->parsed()) return imvc::cmd_train_eval(spec);
    if (ablate->parsed()) return imvc::cmd_ablate(spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
