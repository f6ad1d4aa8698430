#pragma once

// Experiment configuration and its JSON document form.
//
// Schema (every key optional; defaults shown by ExperimentConfig{}):
//   {
//     "experiment": "standard" | "longtail" | "scaling" | "ood" | "probe" | "verify",
//     "dataset": {"kind": "blobs" | "moons" | "csv", "classes", "n_per_class", "dim",
//                 "spread", "n", "noise", "path", "header", "seed",
//                 "split": {"train", "val", "test"}},
//     "train": {"hidden": [..], "learning_rate", "epochs", "batch_size",
//               "optimizer": "adam" | "sgd", "loss": "dappr" | "cross_entropy",
//               "lambda", "eps", "schedule": "constant" | "warmup" | "linear",
//               "early_stopping", "weight_decay"},
//     "ood": [{"kind": "uniform_box" | "shifted_blobs", "offset", "spread"}],
//     "ood_samples", "lambdas": [..], "sizes": [..], "rho",
//     "probe": {"samples", "perturbations", "epochs", "train_size", "indices": [..]},
//     "histogram_bins", "calibration_bins", "output_dir", "seeds": [..]
//   }

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dappr/datasets.hpp"
#include "dappr/nn.hpp"

namespace dappr {

enum class ExperimentKind { standard, longtail, scaling, ood, probe, verify };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct DatasetSpec {
  std::string kind = "blobs";
  int classes = 3;
  int n_per_class = 200;
  int dim = 2;
  double spread = 1.0;
  int n = 600;         // moons
  double noise = 0.1;  // moons
  std::string path;    // csv
  bool header = false;
  std::uint64_t seed = 7;
  SplitSpec split;
};

struct ProbeSpec {
  int samples = 20;
  int perturbations = 5;
  int epochs = 3;
  int train_size = 500;
  std::vector<std::size_t> indices;  // explicit probe rows; empty = seeded choice
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::standard;
  DatasetSpec dataset;
  std::vector<int> hidden{32, 32};
  TrainConfig train;  // layer_sizes is filled in from dataset + hidden
  std::vector<OodSpec> ood{OodSpec{}};
  int ood_samples = 500;
  std::vector<double> lambdas;
  std::vector<int> sizes;
  double rho = 0.1;
  ProbeSpec probe;
  int histogram_bins = 20;
  int calibration_bins = 15;
  std::string output_dir;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  // Throws ArgumentError on an inconsistent configuration.
  void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

// Materialises the configured dataset (generator or CSV).
LabeledDataset make_dataset(const DatasetSpec& spec);

// TrainConfig with layer_sizes = [dim, hidden..., K] and the given seed.
TrainConfig resolved_train_config(const ExperimentConfig& cfg, Eigen::Index dim, int classes, std::uint64_t seed);

}  // namespace dappr
