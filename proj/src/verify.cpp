#include "dappr/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dappr/error.hpp"
#include "dappr/possibility.hpp"
#include "dappr/rng.hpp"

namespace dappr {

namespace {

constexpr double kGradientStep = 1e-5;

std::string vec_str(std::span<const double> v) {
  std::ostringstream out;
  out.precision(10);
  out << '(';
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
  out << ')';
  return out.str();
}

std::string mat_str(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out.precision(10);
  out << '[';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    out << (r ? "; " : "") << vec_str(row);
  }
  out << ']';
  return out.str();
}

CheckResult finish(std::string name, double worst, double tolerance, std::string detail, bool ok_extra = true) {
  CheckResult c;
  c.name = std::move(name);
  c.worst = worst;
  c.tolerance = tolerance;
  c.passed = ok_extra && worst <= tolerance;
  c.detail = std::move(detail);
  return c;
}

std::vector<double> random_alpha(Rng& rng, int classes) {
  std::vector<double> a(classes);
  for (auto& v : a) v = 1.0 + std::exp(rng.uniform(-2.0, 3.0));
  return a;
}

PossibilityTable random_table(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(0.0, 1.0);
  const double top = *std::max_element(v.begin(), v.end());
  for (auto& x : v) x /= top;
  v[rng.below(n)] = 1.0;
  return PossibilityTable(std::move(v));
}

Eigen::MatrixXd random_logits(Rng& rng, Eigen::Index batch, Eigen::Index classes) {
  Eigen::MatrixXd z(batch, classes);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index k = 0; k < classes; ++k) z(b, k) = rng.uniform(-3.0, 3.0);
  }
  return z;
}

std::vector<int> random_labels(Rng& rng, Eigen::Index batch, Eigen::Index classes) {
  std::vector<int> y(batch);
  for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return y;
}

double alpha_of(double z) { return softplus(z) + 1.0; }

double grid_error(const DirichletParams& d, std::span<const double> y, const SimplexGrid& grid) {
  const SimplexPoint grid_best = grid_argmax_surrogate(d, y, grid);
  const SimplexPoint closed = closed_form_maximiser(d, y);
  double err = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) err = std::max(err, std::abs(grid_best[k] - closed[k]));
  return err;
}

}  // namespace

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream out;
  out.precision(4);
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << "  worst=" << c.worst << " tol=" << c.tolerance << '\n';
    if (!c.passed && !c.detail.empty()) out << "     " << c.detail << '\n';
  }
  std::size_t passed = std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  out << passed << '/' << checks.size() << " checks passed\n";
  return out.str();
}

Eigen::MatrixXd dappr_logit_gradient(const Eigen::MatrixXd& logits, std::span<const int> labels,
                                     const LossConfig& cfg, int epoch) {
  return dappr_loss(logits, labels, cfg, epoch).grad_logits;
}

Eigen::MatrixXd detached_target(const Eigen::MatrixXd& logits, std::span<const int> labels, double eps) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      p(b, k) = alpha_of(logits(b, k)) - (k == labels[b] ? 1.0 : 0.0) + eps;
    }
    p.row(b) /= p.row(b).sum();
  }
  return p;
}

double frozen_target_loss(const Eigen::MatrixXd& logits, std::span<const int> labels, const Eigen::MatrixXd& target,
                          double lambda_t) {
  double total = 0.0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    double a0 = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) a0 += alpha_of(logits(b, k));
    double v = a0 * std::log(a0);
    double reg = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double a = alpha_of(logits(b, k));
      v += a * std::log(target(b, k) / a);
      if (k != labels[b]) reg += a * a;
    }
    total += v + lambda_t * reg;
  }
  return total / static_cast<double>(logits.rows());
}

Eigen::MatrixXd central_difference(const std::function<double(const Eigen::MatrixXd&)>& f, const Eigen::MatrixXd& x,
                                   double h) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  Eigen::MatrixXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp(i);
    xp(i) = orig + h;
    const double up = f(xp);
    xp(i) = orig - h;
    const double down = f(xp);
    xp(i) = orig;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

CheckResult check_closed_form_vs_grid(int instances, int resolution, std::uint64_t seed) {
  Rng rng(seed);
  const SimplexGrid grids[2] = {simplex_grid(2, resolution), simplex_grid(3, resolution)};
  const double tol = 2.0 / resolution;
  double worst = 0.0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    const int K = 2 + static_cast<int>(rng.below(2));
    const DirichletParams d(random_alpha(rng, K));
    const std::vector<double> y = one_hot(rng.below(K), K);
    const double err = grid_error(d, y, grids[K - 2]);
    if (err > worst) {
      worst = err;
      detail = "alpha=" + vec_str(d.alpha()) + " y=" + vec_str(y) + " expected=" +
               vec_str(grid_argmax_surrogate(d, y, grids[K - 2]).probs()) + " got=" +
               vec_str(closed_form_maximiser(d, y).probs());
    }
  }
  return finish("closed-form maximiser vs grid (m=" + std::to_string(resolution) + ")", worst, tol, detail);
}

CheckResult check_grid_convergence(int instances, const std::vector<int>& resolutions, std::uint64_t seed) {
  // Scaled error m * err must stay below 2 at every resolution.
  double worst = 0.0;
  std::string detail;
  for (int m : resolutions) {
    Rng rng(seed);
    const SimplexGrid grid = simplex_grid(3, m);
    double err_m = 0.0;
    for (int i = 0; i < instances; ++i) {
      const DirichletParams d(random_alpha(rng, 3));
      const std::vector<double> y = one_hot(rng.below(3), 3);
      err_m = std::max(err_m, grid_error(d, y, grid));
    }
    detail += "m=" + std::to_string(m) + " err=" + std::to_string(err_m) + " ";
    worst = std::max(worst, err_m * m);
  }
  return finish("grid error shrinks as O(1/m)", worst, 2.0, detail);
}

CheckResult check_max_normalisation(int instances, int resolution, std::uint64_t seed) {
  Rng rng(seed);
  const SimplexGrid grid = simplex_grid(3, resolution);
  double worst = 0.0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    const DirichletParams d(random_alpha(rng, 3));
    double sup = 0.0;
    for (const auto& p : grid.points) sup = std::max(sup, std::exp(log_dirichlet_possibility(d, p)));
    // Distance outside [1 - 5/m, 1 + 1e-6], as a fraction of the allowed slack below 1.
    const double below = std::max(0.0, (1.0 - 5.0 / resolution) - sup);
    const double above = std::max(0.0, sup - (1.0 + 1e-6));
    const double err = std::max(below, above);
    if (err >= worst) {
      worst = err;
      detail = "alpha=" + vec_str(d.alpha()) + " grid sup=" + std::to_string(sup);
    }
  }
  return finish("Dirichlet possibility grid sup in [1-5/m, 1+1e-6]", worst, 0.0, detail);
}

CheckResult check_mode_exact(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    const int K = 2 + static_cast<int>(rng.below(5));
    std::vector<double> a(K);
    for (auto& v : a) v = rng.uniform(0.0, 1.0) < 0.1 ? 0.0 : std::exp(rng.uniform(-3.0, 4.0));
    if (std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; })) a[0] = 1.0;
    const DirichletParams d(a);
    const double v = std::abs(log_dirichlet_possibility(d, dirichlet_mode(d)));
    if (v > worst) {
      worst = v;
      detail = "alpha=" + vec_str(a) + " log g(mode)=" + std::to_string(v);
    }
  }
  return finish("log g is exactly 0 at the mode", worst, 0.0, detail);
}

CheckResult check_divergence(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double negative = 0.0;
  double dominated = 0.0;
  double oracle_gap = 0.0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.below(12);
    const PossibilityTable f = random_table(rng, n);
    const PossibilityTable g = random_table(rng, n);
    const double d = maxitive_divergence(f, g);
    negative = std::max(negative, -d - 1e-12);

    double brute = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (f[j] > 0.0) brute = std::max(brute, std::log(f[j] / g[j]));
    }
    oracle_gap = std::max(oracle_gap, std::abs(brute - d));

    std::vector<double> upper(n);
    for (std::size_t j = 0; j < n; ++j) upper[j] = std::max(f[j], g[j]);
    const double dom = maxitive_divergence(f, PossibilityTable(upper));
    if (dom != 0.0) {
      dominated = std::max(dominated, std::abs(dom));
      detail = "f=" + vec_str(f.values()) + " upper=" + vec_str(upper) + " got=" + std::to_string(dom);
    }
  }
  // Exact for the identities; the brute-force comparison allows rounding of log(f / g).
  const double worst = std::max({std::max(negative, 0.0), dominated, std::max(0.0, oracle_gap - 1e-12)});
  return finish("maxitive divergence: non-negative, 0 when dominated, matches brute force", worst, 0.0, detail);
}

CheckResult check_posterior(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    std::vector<double> losses(1 + rng.below(20));
    for (auto& l : losses) l = rng.uniform(-50.0, 50.0);
    const PossibilityTable post = possibilistic_posterior(losses);
    const double top = *std::max_element(post.values().begin(), post.values().end());
    double err = std::abs(top - 1.0);
    const double lmin = *std::min_element(losses.begin(), losses.end());
    for (std::size_t j = 0; j < losses.size(); ++j) {
      const double expected = std::exp(lmin - losses[j]);
      err = std::max(err, std::abs(post[j] - expected) / expected);
    }
    if (err > worst) {
      worst = err;
      detail = "losses=" + vec_str(losses);
    }
  }
  return finish("possibilistic posterior has max 1 and equals exp(min L - L)", worst, 1e-15, detail);
}

CheckResult check_pushforward(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.below(10);
    const PossibilityTable f = random_table(rng, n);

    std::vector<std::size_t> identity(n);
    for (std::size_t j = 0; j < n; ++j) identity[j] = j;
    const PossibilityTable same = pushforward_possibility(f, identity, n);
    for (std::size_t j = 0; j < n; ++j) {
      if (same[j] != f[j]) {
        worst = std::max(worst, std::abs(same[j] - f[j]));
        detail = "identity pushforward changed " + vec_str(f.values());
      }
    }

    // Codomain one larger than the image so at least one pre-image is empty.
    const std::size_t m = 1 + rng.below(n) + 1;
    std::vector<std::size_t> mapping(n);
    for (auto& v : mapping) v = rng.below(m - 1);
    const PossibilityTable push = pushforward_possibility(f, mapping, m);
    for (std::size_t c = 0; c < m; ++c) {
      double expected = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (mapping[j] == c) expected = std::max(expected, f[j]);
      }
      if (push[c] != expected) {
        worst = std::max(worst, std::abs(push[c] - expected));
        detail = "f=" + vec_str(f.values()) + " codomain " + std::to_string(c);
      }
    }
  }
  return finish("pushforward: identity and empty pre-image", worst, 0.0, detail);
}

CheckResult check_loss_gradient(const LogitGradientFn& analytic, int instances, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    const Eigen::Index B = 1 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::MatrixXd z = random_logits(rng, B, K);
    const std::vector<int> y = random_labels(rng, B, K);
    LossConfig cfg;
    cfg.schedule = LambdaSchedule::constant;
    cfg.lambda = rng.uniform(0.0, 0.5);
    const Eigen::MatrixXd target = detached_target(z, y, cfg.eps);
    const Eigen::MatrixXd numeric = central_difference(
        [&](const Eigen::MatrixXd& zz) { return frozen_target_loss(zz, y, target, cfg.lambda); }, z, kGradientStep);
    const Eigen::MatrixXd got = analytic(z, y, cfg, 1);
    const double err = max_relative_error(got, numeric);
    if (err >= worst) {
      worst = err;
      detail = "logits=" + mat_str(z) + " lambda=" + std::to_string(cfg.lambda) + " expected=" + mat_str(numeric) +
               " got=" + mat_str(got);
    }
  }
  return finish("loss-level gradient vs central differences", worst, tolerance, detail);
}

CheckResult check_danskin(int instances, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    const Eigen::Index B = 1 + static_cast<Eigen::Index>(rng.below(3));
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::MatrixXd z = random_logits(rng, B, K);
    const std::vector<int> y = random_labels(rng, B, K);
    LossConfig cfg;
    cfg.schedule = LambdaSchedule::constant;
    cfg.lambda = 0.0;
    // Maximised surrogate log g(p*) + CE(p*, y) with p* recomputed from alpha.
    auto envelope = [&](const Eigen::MatrixXd& zz) {
      const Eigen::MatrixXd p = detached_target(zz, y, 0.0);
      double total = frozen_target_loss(zz, y, p, 0.0) * static_cast<double>(B);
      for (Eigen::Index b = 0; b < B; ++b) total -= std::log(p(b, y[b]));
      return total / static_cast<double>(B);
    };
    const Eigen::MatrixXd numeric = central_difference(envelope, z, kGradientStep);
    const Eigen::MatrixXd got = dappr_logit_gradient(z, y, cfg, 1);
    const double err = max_relative_error(got, numeric);
    if (err >= worst) {
      worst = err;
      detail = "logits=" + mat_str(z) + " expected=" + mat_str(numeric) + " got=" + mat_str(got);
    }
  }
  return finish("detached gradient equals envelope derivative", worst, tolerance, detail);
}

CheckResult check_network_gradient(LossKind kind, int instances, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  std::size_t skipped = 0;
  std::size_t compared = 0;
  std::string detail;
  for (int i = 0; i < instances; ++i) {
    TrainConfig tcfg;
    const int d = 2 + static_cast<int>(rng.below(3));
    const int K = 2 + static_cast<int>(rng.below(3));
    tcfg.layer_sizes = {d, 4 + static_cast<int>(rng.below(5)), 4 + static_cast<int>(rng.below(5)), K};
    tcfg.seed = rng.next_u64();
    NetworkParams params = init_network(tcfg);
    for (auto& layer : params.layers) {
      for (Eigen::Index j = 0; j < layer.bias.size(); ++j) layer.bias[j] = rng.uniform(-0.5, 0.5);
    }
    const Eigen::Index B = 1 + static_cast<Eigen::Index>(rng.below(4));
    Eigen::MatrixXd x(B, d);
    for (Eigen::Index r = 0; r < B; ++r) {
      for (int c = 0; c < d; ++c) x(r, c) = rng.uniform(-3.0, 3.0);
    }
    const std::vector<int> y = random_labels(rng, B, K);
    LossConfig cfg;
    cfg.schedule = LambdaSchedule::constant;
    cfg.lambda = rng.uniform(0.0, 0.5);

    const ForwardResult base = forward(params, x);
    const Eigen::MatrixXd target = detached_target(base.logits, y, cfg.eps);
    auto objective = [&](const Eigen::MatrixXd& logits) {
      if (kind == LossKind::dappr) return frozen_target_loss(logits, y, target, cfg.lambda);
      double total = 0.0;
      for (Eigen::Index b = 0; b < logits.rows(); ++b) {
        const double top = logits.row(b).maxCoeff();
        total += top + std::log((logits.row(b).array() - top).exp().sum()) - logits(b, y[b]);
      }
      return total / static_cast<double>(logits.rows());
    };
    const LossOutput lo = compute_loss(kind, base.logits, y, cfg, 1);
    const NetworkParams grads = backward(params, base.cache, lo.grad_logits);

    auto same_pattern = [&](const ForwardCache& c) {
      for (std::size_t l = 0; l + 1 < c.pre_activations.size(); ++l) {
        if (((c.pre_activations[l].array() > 0.0) != (base.cache.pre_activations[l].array() > 0.0)).any()) {
          return false;
        }
      }
      return true;
    };

    std::vector<double> analytic_v, numeric_v;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      for (int which = 0; which < 2; ++which) {
        const Eigen::Index count = which == 0 ? params.layers[l].weight.size() : params.layers[l].bias.size();
        for (Eigen::Index j = 0; j < count; ++j) {
          double& p = which == 0 ? params.layers[l].weight(j) : params.layers[l].bias(j);
          const double orig = p;
          p = orig + kGradientStep;
          const ForwardResult up = forward(params, x);
          p = orig - kGradientStep;
          const ForwardResult down = forward(params, x);
          p = orig;
          if (!same_pattern(up.cache) || !same_pattern(down.cache)) {
            ++skipped;
            continue;
          }
          numeric_v.push_back((objective(up.logits) - objective(down.logits)) / (2.0 * kGradientStep));
          analytic_v.push_back(which == 0 ? grads.layers[l].weight(j) : grads.layers[l].bias(j));
        }
      }
    }
    compared += analytic_v.size();
    const Eigen::MatrixXd a = Eigen::Map<Eigen::MatrixXd>(analytic_v.data(), static_cast<Eigen::Index>(analytic_v.size()), 1);
    const Eigen::MatrixXd n = Eigen::Map<Eigen::MatrixXd>(numeric_v.data(), static_cast<Eigen::Index>(numeric_v.size()), 1);
    const double err = analytic_v.empty() ? 0.0 : max_relative_error(a, n);
    if (err >= worst) {
      worst = err;
      detail = "layers=" + std::to_string(d) + "-" + std::to_string(tcfg.layer_sizes[1]) + "-" +
               std::to_string(tcfg.layer_sizes[2]) + "-" + std::to_string(K) + " batch=" + std::to_string(B);
    }
  }
  detail += " compared=" + std::to_string(compared) + " skipped at ReLU kinks=" + std::to_string(skipped);
  return finish("end-to-end " + to_string(kind) + " MLP gradient vs central differences", worst, tolerance, detail);
}

VerifyReport run_verify(std::uint64_t seed) {
  VerifyReport r;
  r.checks.push_back(check_closed_form_vs_grid(200, 200, derive_seed(seed, 1)));
  r.checks.push_back(check_grid_convergence(40, {50, 100, 200}, derive_seed(seed, 2)));
  r.checks.push_back(check_max_normalisation(50, 100, derive_seed(seed, 3)));
  r.checks.push_back(check_mode_exact(500, derive_seed(seed, 4)));
  r.checks.push_back(check_divergence(500, derive_seed(seed, 5)));
  r.checks.push_back(check_posterior(500, derive_seed(seed, 6)));
  r.checks.push_back(check_pushforward(500, derive_seed(seed, 7)));
  r.checks.push_back(check_loss_gradient(dappr_logit_gradient, 100, derive_seed(seed, 8)));
  r.checks.push_back(check_danskin(100, derive_seed(seed, 9)));
  r.checks.push_back(check_network_gradient(LossKind::dappr, 100, derive_seed(seed, 10)));
  r.checks.push_back(check_network_gradient(LossKind::cross_entropy, 20, derive_seed(seed, 11)));
  return r;
}

}  // namespace dappr
