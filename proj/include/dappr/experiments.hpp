#pragma once

// Experiment orchestration: standard / long-tail / data-scaling / lambda
// sweep runs, the leave-one-out approximation probe and report assembly.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dappr/config.hpp"
#include "dappr/metrics.hpp"
#include "dappr/nn.hpp"

namespace dappr {

// Per-sample uncertainty under a model's evaluation protocol.
struct SampleUncertainty {
  int predicted = 0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
  double confidence = 0.0;  // probability of the predicted class, for calibration
  double alpha0 = 0.0;      // 0 for the cross-entropy protocol
};

// DAPPr protocol: aleatoric 1 - max alpha / alpha0, epistemic K / alpha0.
std::vector<SampleUncertainty> uncertainty_from_alpha(const std::vector<DirichletParams>& alphas);

// Cross-entropy protocol: aleatoric 1 - max p, epistemic = entropy of p.
std::vector<SampleUncertainty> uncertainty_from_probs(const Eigen::MatrixXd& probs);

std::vector<SampleUncertainty> model_uncertainty(const NetworkParams& params, LossKind kind, const Eigen::MatrixXd& x);

// Confidence estimation: score = -aleatoric, label 1 when the prediction is correct.
ScoredBinary confidence_scored(const std::vector<SampleUncertainty>& id, const std::vector<int>& labels);

// OOD detection: score = -epistemic, label 1 for in-distribution rows.
ScoredBinary ood_scored(const std::vector<SampleUncertainty>& id, const std::vector<SampleUncertainty>& ood);

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t id_count = 0;
  std::size_t ood_count = 0;
};

// alpha0 values min-max normalised jointly over ID and OOD, then binned on [0, 1].
struct Alpha0Histogram {
  std::string ood_name;
  double raw_min = 0.0;
  double raw_max = 0.0;
  std::vector<HistogramBin> bins;

  std::string to_csv() const;
};

Alpha0Histogram emit_alpha0_histogram(const std::vector<double>& id_alpha0, const std::vector<double>& ood_alpha0,
                                      int bins, std::string ood_name = "ood");

struct OodMetrics {
  std::string name;
  double aupr = 0.0;   // report scale [0, 100]
  double auroc = 0.0;  // report scale [0, 100]
  double mean_alpha0 = 0.0;
  double mean_epistemic = 0.0;
};

struct SeedMetrics {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;    // report scale
  double confidence_aupr = 0.0;  // report scale
  double ece = 0.0;              // report scale
  double mean_alpha0_id = 0.0;
  double mean_epistemic_id = 0.0;
  int selected_epoch = 0;
  std::vector<OodMetrics> ood;

  double mean_ood_aupr() const;
};

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> std;  // absent for a single seed
};

MetricSummary summarize(const std::vector<double>& values);

struct EvalReport {
  std::string experiment;
  std::string loss_kind;
  std::string dataset;
  std::vector<SeedMetrics> per_seed;
  std::vector<std::pair<std::string, MetricSummary>> summary;
  std::vector<Alpha0Histogram> alpha0_histograms;
  ReliabilityBins reliability;
  std::string generated_at;
  double runtime_seconds = 0.0;

  // run_info (timestamp, runtime) is the only non-deterministic key.
  std::string to_json(bool include_run_info = true) const;
};

struct ScalingPoint {
  int size = 0;
  std::uint64_t seed = 0;
  double mean_epistemic = 0.0;
  double accuracy = 0.0;  // report scale
};

struct ScalingCurve {
  std::vector<ScalingPoint> points;

  // Mean over seeds for one size.
  ScalingPoint mean_at(int size) const;
  std::string to_csv() const;
};

struct SweepPoint {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;        // report scale
  double mean_ood_aupr = 0.0;   // report scale, averaged over OOD sets
};

struct SweepCurve {
  std::vector<SweepPoint> points;

  SweepPoint mean_at(double lambda) const;
  std::string to_csv() const;
};

struct ProbeRow {
  std::size_t index = 0;
  double loss_true = 0.0;
  double max_deviation = 0.0;  // S_x = max_p |L_p - L_true|
};

struct ProbeTable {
  std::vector<ProbeRow> rows;

  double median_ratio() const;  // median of S_x / L_true
  std::string to_csv() const;
};

// Prepared data shared by the runners.
struct PreparedData {
  DatasetSplits splits;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> ood_sets;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// Evaluate one trained model on the test split and OOD sets.
SeedMetrics evaluate_model(const NetworkParams& params, LossKind kind, const PreparedData& data,
                           std::uint64_t seed);

EvalReport run_standard(const ExperimentConfig& cfg);
EvalReport run_longtail(const ExperimentConfig& cfg, double rho);
EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const Checkpoint& ckpt);
ScalingCurve run_scaling(const ExperimentConfig& cfg, const std::vector<int>& sizes);
SweepCurve run_lambda_sweep(const ExperimentConfig& cfg, const std::vector<double>& lambdas);
ProbeTable run_probe(const ExperimentConfig& cfg, int n_probe_samples, int n_perturbations);

// Sum of per-sample cross-entropy over a dataset (the empirical risk).
double empirical_risk(const NetworkParams& params, const LabeledDataset& ds);

// Write `text` to `dir / name`, creating `dir` if needed.
void write_text(const std::string& dir, const std::string& name, const std::string& text);

}  // namespace dappr
