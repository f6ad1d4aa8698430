#pragma once

// Minimal deterministic multilayer perceptron with hand-written backward
// pass, used as the second-order predictor head.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dappr/datasets.hpp"
#include "dappr/loss.hpp"
#include "dappr/possibility.hpp"

namespace dappr {

enum class OptimizerKind { sgd, adam };
enum class LossKind { dappr, cross_entropy };

std::string to_string(OptimizerKind kind);
std::string to_string(LossKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);
LossKind parse_loss_kind(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// ReLU between layers, identity at the output.
struct NetworkParams {
  std::vector<DenseLayer> layers;

  // Throws ArgumentError if dimensions do not chain or a parameter is non-finite.
  void validate() const;
  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::vector<int> layer_sizes() const;

  // Same shapes, all zero.
  NetworkParams zeros_like() const;
};

struct TrainConfig {
  std::vector<int> layer_sizes{2, 32, 32, 3};
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  LossKind loss_kind = LossKind::dappr;
  LossConfig loss_cfg;
  bool early_stopping = false;
  double weight_decay = 0.0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_mean_alpha0 = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;

  std::string to_csv() const;
};

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;           // input to each layer
  std::vector<Eigen::MatrixXd> pre_activations;  // output of each layer before ReLU
};

struct ForwardResult {
  Eigen::MatrixXd logits;  // B x K
  ForwardCache cache;
};

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
  int selected_epoch = 0;  // 0 = initial parameters
};

// Kaiming-uniform weights (bound sqrt(6 / fan_in)) from the seeded generator; zero biases.
NetworkParams init_network(const TrainConfig& cfg);

ForwardResult forward(const NetworkParams& params, const Eigen::MatrixXd& x);
Eigen::MatrixXd predict_logits(const NetworkParams& params, const Eigen::MatrixXd& x);

// Reverse-mode gradients of a scalar whose logit gradient is `grad_logits`.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& grad_logits);

// Loss dispatch used by training: DAPPr or cross-entropy on hard labels.
LossOutput compute_loss(LossKind kind, const Eigen::MatrixXd& logits, std::span<const int> labels,
                        const LossConfig& cfg, int epoch);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double weight_decay = 0.0);

  void step(NetworkParams& params, const NetworkParams& grads);

 private:
  OptimizerKind kind_;
  double learning_rate_;
  double weight_decay_;
  long long steps_ = 0;
  NetworkParams first_moment_;
  NetworkParams second_moment_;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

// Per-epoch Fisher-Yates order of [0, n) derived from (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

TrainResult train(const TrainConfig& cfg, const LabeledDataset& train_set, const LabeledDataset& val_set);

// softplus(logits) + 1 per row.
std::vector<DirichletParams> predict_alpha(const NetworkParams& params, const Eigen::MatrixXd& x);

std::vector<int> predict_labels(const NetworkParams& params, const Eigen::MatrixXd& x);
double accuracy(const NetworkParams& params, const LabeledDataset& ds);

struct Checkpoint {
  NetworkParams params;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::dappr;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dappr
