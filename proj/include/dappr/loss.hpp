#pragma once

// DAPPr training objective and the cross-entropy baseline, with analytic
// gradients with respect to the logits.

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dappr/possibility.hpp"

namespace dappr {

enum class LambdaSchedule { constant, warmup, linear };

// Epochs over which the warmup schedule ramps lambda from 0 to its target.
inline constexpr int kWarmupEpochs = 10;

std::string to_string(LambdaSchedule s);
LambdaSchedule parse_lambda_schedule(const std::string& name);

struct LossConfig {
  double lambda = 2e-3;
  double eps = 1e-8;
  LambdaSchedule schedule = LambdaSchedule::warmup;
  int total_epochs = 50;

  // Throws ArgumentError unless lambda >= 0, 0 < eps <= 1e-4, total_epochs >= 1.
  void validate() const;
};

struct LossOutput {
  double value = 0.0;           // batch mean of surrogate + lambda_t * regulariser
  Eigen::MatrixXd grad_logits;  // d value / d logits, same shape as the logits
  double surrogate_term = 0.0;  // batch mean of log g(p*; alpha)
  double regulariser = 0.0;     // batch mean of the spurious-evidence penalty
  double lambda_t = 0.0;
};

double softplus(double z);
double sigmoid(double z);

// alpha_k = softplus(z_k) + 1. Saturates to the identity above z = 30 and is
// kept strictly above 1 when softplus underflows.
DirichletParams softplus_plus_one(std::span<const double> logits);

// (alpha - y) / (alpha0 - 1). Requires every alpha_k > 1 and one-hot y.
SimplexPoint closed_form_maximiser(const DirichletParams& d, std::span<const double> y);

// (alpha - sum_j y_j) / (alpha0 - |ys|) for a point observed with several labels.
SimplexPoint multi_observation_maximiser(const DirichletParams& d,
                                         const std::vector<std::vector<double>>& ys);

// Maximiser with the eps adjustment used during training:
// a* = alpha - e_label + eps, p* = a* / sum(a*).
SimplexPoint eps_adjusted_maximiser(const DirichletParams& d, std::size_t label, double eps);

// log g(p*; alpha) with p* from eps_adjusted_maximiser.
double surrogate_log_possibility(const DirichletParams& d, std::size_t label, double eps);

// sum_k (alpha_k (1 - y_k))^2.
double spurious_evidence_regulariser(const DirichletParams& d, std::span<const double> y);

// lambda_t for epoch t in [0, T]: constant -> lambda, warmup -> lambda min(1, t/10),
// linear -> lambda t / T.
double lambda_schedule(const LossConfig& cfg, int epoch);

// Batch-mean DAPPr loss. The maximiser p* is held constant when
// differentiating, so d/d alpha_k = log(alpha0 p*_k / alpha_k) + 2 lambda_t alpha_k (1 - y_k),
// chained through d alpha / d z = sigmoid(z).
LossOutput dappr_loss(const Eigen::MatrixXd& logits, std::span<const int> labels,
                      const LossConfig& cfg, int epoch);

// Batch-mean softmax cross-entropy; gradient (softmax - onehot) / B.
LossOutput cross_entropy_loss(const Eigen::MatrixXd& logits, std::span<const int> labels);

// Cross-entropy against soft targets (rows on the simplex).
LossOutput soft_cross_entropy_loss(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets);

// Row-wise softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

// One-hot vector of length `classes`.
std::vector<double> one_hot(std::size_t label, std::size_t classes);

}  // namespace dappr
