#include "dappr/loss.hpp"

#include <algorithm>
#include <cmath>

#include "dappr/error.hpp"

namespace dappr {

namespace {

constexpr double kSoftplusLinearThreshold = 30.0;

// Smallest double strictly above 1.
const double kAlphaFloor = std::nextafter(1.0, 2.0);

void check_one_hot(std::span<const double> y, std::size_t classes) {
  if (y.size() != classes) throw ArgumentError("label vector has the wrong length");
  int ones = 0;
  for (double v : y) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      throw ArgumentError("label vector is not one-hot");
    }
  }
  if (ones != 1) throw ArgumentError("label vector is not one-hot");
}

void check_labels(std::span<const int> labels, Eigen::Index rows, Eigen::Index classes) {
  if (rows < 1) throw ArgumentError("empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw ArgumentError("label count does not match batch size");
  }
  for (int l : labels) {
    if (l < 0 || l >= classes) throw ArgumentError("label out of range");
  }
}

double alpha_from_logit(double z) { return std::max(softplus(z) + 1.0, kAlphaFloor); }

}  // namespace

std::string to_string(LambdaSchedule s) {
  switch (s) {
    case LambdaSchedule::constant: return "constant";
    case LambdaSchedule::warmup: return "warmup";
    case LambdaSchedule::linear: return "linear";
  }
  return "constant";
}

LambdaSchedule parse_lambda_schedule(const std::string& name) {
  if (name == "constant") return LambdaSchedule::constant;
  if (name == "warmup") return LambdaSchedule::warmup;
  if (name == "linear") return LambdaSchedule::linear;
  throw ArgumentError("unknown lambda schedule '" + name + "'");
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be >= 0");
  if (!(eps > 0.0 && eps <= 1e-4)) throw ArgumentError("eps must lie in (0, 1e-4]");
  if (total_epochs < 1) throw ArgumentError("total_epochs must be positive");
}

double softplus(double z) {
  if (z > kSoftplusLinearThreshold) return z;
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

DirichletParams softplus_plus_one(std::span<const double> logits) {
  std::vector<double> alpha(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!std::isfinite(logits[k])) throw ArgumentError("non-finite logit");
    alpha[k] = alpha_from_logit(logits[k]);
  }
  return DirichletParams(std::move(alpha));
}

SimplexPoint closed_form_maximiser(const DirichletParams& d, std::span<const double> y) {
  check_one_hot(y, d.size());
  for (double a : d.alpha()) {
    if (!(a > 1.0)) throw ValidityError("closed-form maximiser requires every alpha_k > 1");
  }
  const double denom = d.alpha0() - 1.0;
  std::vector<double> p(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) p[k] = (d[k] - y[k]) / denom;
  return SimplexPoint(std::move(p));
}

SimplexPoint multi_observation_maximiser(const DirichletParams& d,
                                         const std::vector<std::vector<double>>& ys) {
  if (ys.empty()) throw ArgumentError("at least one observation is required");
  std::vector<double> hits(d.size(), 0.0);
  for (const auto& y : ys) {
    check_one_hot(y, d.size());
    for (std::size_t k = 0; k < d.size(); ++k) hits[k] += y[k];
  }
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (!(d[k] > hits[k])) {
      throw ValidityError("interior maximiser requires alpha_k above the label count of class k");
    }
  }
  const double denom = d.alpha0() - static_cast<double>(ys.size());
  std::vector<double> p(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) p[k] = (d[k] - hits[k]) / denom;
  return SimplexPoint(std::move(p));
}

SimplexPoint eps_adjusted_maximiser(const DirichletParams& d, std::size_t label, double eps) {
  if (label >= d.size()) throw ArgumentError("label out of range");
  if (!(eps > 0.0)) throw ArgumentError("eps must be positive");
  std::vector<double> a_star(d.size());
  double total = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    a_star[k] = d[k] - (k == label ? 1.0 : 0.0) + eps;
    total += a_star[k];
  }
  for (double& v : a_star) v /= total;
  return SimplexPoint(std::move(a_star));
}

double surrogate_log_possibility(const DirichletParams& d, std::size_t label, double eps) {
  return log_dirichlet_possibility(d, eps_adjusted_maximiser(d, label, eps));
}

double spurious_evidence_regulariser(const DirichletParams& d, std::span<const double> y) {
  if (y.size() != d.size()) throw ArgumentError("label vector has the wrong length");
  double total = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double wrong = d[k] * (1.0 - y[k]);
    total += wrong * wrong;
  }
  return total;
}

double lambda_schedule(const LossConfig& cfg, int epoch) {
  if (epoch < 0) throw ArgumentError("epoch must be non-negative");
  if (epoch > cfg.total_epochs) throw ArgumentError("epoch exceeds total_epochs");
  switch (cfg.schedule) {
    case LambdaSchedule::constant:
      return cfg.lambda;
    case LambdaSchedule::warmup:
      return cfg.lambda * std::min(1.0, static_cast<double>(epoch) / kWarmupEpochs);
    case LambdaSchedule::linear:
      return cfg.lambda * static_cast<double>(epoch) / cfg.total_epochs;
  }
  return cfg.lambda;
}

LossOutput dappr_loss(const Eigen::MatrixXd& logits, std::span<const int> labels,
                      const LossConfig& cfg, int epoch) {
  cfg.validate();
  check_labels(labels, logits.rows(), logits.cols());
  const Eigen::Index batch = logits.rows();
  const Eigen::Index classes = logits.cols();
  const double lambda_t = lambda_schedule(cfg, epoch);
  const double inv_batch = 1.0 / static_cast<double>(batch);

  LossOutput out;
  out.lambda_t = lambda_t;
  out.grad_logits.resize(batch, classes);

  std::vector<double> alpha(static_cast<std::size_t>(classes));
  std::vector<double> p_star(static_cast<std::size_t>(classes));
  double surrogate_sum = 0.0;
  double reg_sum = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto label = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(b)]);
    double alpha0 = 0.0;
    for (Eigen::Index k = 0; k < classes; ++k) {
      const double z = logits(b, k);
      if (!std::isfinite(z)) throw ArgumentError("non-finite logit");
      alpha[k] = alpha_from_logit(z);
      alpha0 += alpha[k];
    }
    double a_star_total = 0.0;
    for (Eigen::Index k = 0; k < classes; ++k) {
      p_star[k] = alpha[k] - (k == label ? 1.0 : 0.0) + cfg.eps;
      a_star_total += p_star[k];
    }
    for (auto& v : p_star) v /= a_star_total;

    double surrogate = 0.0;
    double reg = 0.0;
    for (Eigen::Index k = 0; k < classes; ++k) {
      // log(alpha0 p*_k / alpha_k) is both the summand and d/d alpha_k.
      const double log_ratio = std::log(alpha0 * p_star[k] / alpha[k]);
      surrogate += alpha[k] * log_ratio;
      double grad_alpha = log_ratio;
      if (k != label) {
        reg += alpha[k] * alpha[k];
        grad_alpha += 2.0 * lambda_t * alpha[k];
      }
      out.grad_logits(b, k) = grad_alpha * sigmoid(logits(b, k)) * inv_batch;
    }
    surrogate_sum += surrogate;
    reg_sum += reg;
  }
  out.surrogate_term = surrogate_sum * inv_batch;
  out.regulariser = reg_sum * inv_batch;
  out.value = out.surrogate_term + lambda_t * out.regulariser;
  return out;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const double top = logits.row(b).maxCoeff();
    double total = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      out(b, k) = std::exp(logits(b, k) - top);
      total += out(b, k);
    }
    out.row(b) /= total;
  }
  return out;
}

namespace {

// Shared by the hard- and soft-label variants; targets rows sum to 1.
LossOutput cross_entropy_impl(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets) {
  const Eigen::Index batch = logits.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  LossOutput out;
  out.grad_logits.resize(batch, logits.cols());
  double total = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double top = logits.row(b).maxCoeff();
    double sum_exp = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) sum_exp += std::exp(logits(b, k) - top);
    const double log_norm = top + std::log(sum_exp);
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double log_p = logits(b, k) - log_norm;
      if (targets(b, k) != 0.0) total -= targets(b, k) * log_p;
      out.grad_logits(b, k) = (std::exp(log_p) - targets(b, k)) * inv_batch;
    }
  }
  out.value = total * inv_batch;
  out.surrogate_term = out.value;
  return out;
}

}  // namespace

LossOutput cross_entropy_loss(const Eigen::MatrixXd& logits, std::span<const int> labels) {
  check_labels(labels, logits.rows(), logits.cols());
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    targets(b, labels[static_cast<std::size_t>(b)]) = 1.0;
  }
  return cross_entropy_impl(logits, targets);
}

LossOutput soft_cross_entropy_loss(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets) {
  if (logits.rows() < 1) throw ArgumentError("empty batch");
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols()) {
    throw ArgumentError("target shape does not match logits");
  }
  for (Eigen::Index b = 0; b < targets.rows(); ++b) {
    if (std::abs(targets.row(b).sum() - 1.0) > kStructuralTolerance || targets.row(b).minCoeff() < 0.0) {
      throw ArgumentError("soft target row is not a probability vector");
    }
  }
  return cross_entropy_impl(logits, targets);
}

std::vector<double> one_hot(std::size_t label, std::size_t classes) {
  if (label >= classes) throw ArgumentError("label out of range");
  std::vector<double> y(classes, 0.0);
  y[label] = 1.0;
  return y;
}

}  // namespace dappr
