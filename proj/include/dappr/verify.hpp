#pragma once

// Oracle verification suite: closed-form maximiser against grid search,
// possibility algebra identities and finite-difference gradient checks.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dappr/loss.hpp"
#include "dappr/nn.hpp"

namespace dappr {

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // largest observed error
  double tolerance = 0.0;
  std::string detail;      // inputs, expected and got for the worst case
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  std::string to_text() const;
};

// Analytic logit gradient under test; the default is dappr_loss(...).grad_logits.
using LogitGradientFn =
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, std::span<const int>, const LossConfig&, int)>;

Eigen::MatrixXd dappr_logit_gradient(const Eigen::MatrixXd& logits, std::span<const int> labels,
                                     const LossConfig& cfg, int epoch);

// Rows normalize(alpha - y + eps) for alpha = softplus(logits) + 1.
Eigen::MatrixXd detached_target(const Eigen::MatrixXd& logits, std::span<const int> labels, double eps);

// The DAPPr objective with the target rows held fixed, evaluated as
// alpha0 log alpha0 + sum alpha log(p / alpha) + lambda_t * sum (alpha (1 - y))^2, batch mean.
double frozen_target_loss(const Eigen::MatrixXd& logits, std::span<const int> labels, const Eigen::MatrixXd& target,
                          double lambda_t);

// Central differences of f at x, step h.
Eigen::MatrixXd central_difference(const std::function<double(const Eigen::MatrixXd&)>& f, const Eigen::MatrixXd& x,
                                   double h);

// Normwise relative error max|a - b| / max(max|a|, max|b|); 0 when both vanish.
double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

CheckResult check_closed_form_vs_grid(int instances, int resolution, std::uint64_t seed);
CheckResult check_grid_convergence(int instances, const std::vector<int>& resolutions, std::uint64_t seed);
CheckResult check_max_normalisation(int instances, int resolution, std::uint64_t seed);
CheckResult check_mode_exact(int instances, std::uint64_t seed);
CheckResult check_divergence(int instances, std::uint64_t seed);
CheckResult check_posterior(int instances, std::uint64_t seed);
CheckResult check_pushforward(int instances, std::uint64_t seed);
CheckResult check_loss_gradient(const LogitGradientFn& analytic, int instances, std::uint64_t seed,
                                double tolerance = 1e-5);
// Total derivative of log g(p*) + CE(p*, y), p* recomputed: equals the detached gradient.
CheckResult check_danskin(int instances, std::uint64_t seed, double tolerance = 1e-5);
CheckResult check_network_gradient(LossKind kind, int instances, std::uint64_t seed, double tolerance = 1e-4);

VerifyReport run_verify(std::uint64_t seed = 20240601);

}  // namespace dappr
