#pragma once

// Independent reference implementations used only by the tests. They are
// written for clarity (long double, explicit enumeration) rather than speed
// and share no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using ld = long double;

// Small seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }
  std::vector<double> alpha_above_one(int K) {
    std::vector<double> a(K);
    for (auto& v : a) v = 1.0 + std::exp(real(-3.0, 3.0));
    return a;
  }
  std::vector<double> possibility(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = real(0.0, 1.0);
    v[static_cast<std::size_t>(integer(0, static_cast<int>(n) - 1))] = 1.0;
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

inline ld log_g(const std::vector<double>& alpha, const std::vector<double>& p) {
  ld a0 = 0;
  for (double a : alpha) a0 += a;
  if (a0 == 0) return 0;
  ld v = a0 * std::log(a0);
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (alpha[k] == 0) continue;
    if (p[k] == 0) return -INFINITY;
    v += alpha[k] * std::log(static_cast<ld>(p[k]) / alpha[k]);
  }
  return v;
}

// Surrogate objective log g(p) + CE(p, y) with the 1e-12 floor.
inline ld surrogate(const std::vector<double>& alpha, const std::vector<double>& y, const std::vector<double>& p) {
  ld a0 = 0;
  for (double a : alpha) a0 += a;
  ld v = a0 * std::log(a0);
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    const ld pk = std::max<ld>(p[k], 1e-12L);
    v += alpha[k] * std::log(pk / alpha[k]) - y[k] * std::log(pk);
  }
  return v;
}

// Exhaustive search over the K=2 or K=3 grid of resolution m.
inline std::vector<double> grid_argmax(const std::vector<double>& alpha, const std::vector<double>& y, int m) {
  std::vector<double> best;
  ld best_v = -INFINITY;
  const auto K = alpha.size();
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= (K == 3 ? m - i : 0); ++j) {
      std::vector<double> p;
      if (K == 2) {
        p = {static_cast<double>(i) / m, static_cast<double>(m - i) / m};
      } else {
        p = {static_cast<double>(i) / m, static_cast<double>(j) / m, static_cast<double>(m - i - j) / m};
      }
      const ld v = surrogate(alpha, y, p);
      if (v > best_v) {
        best_v = v;
        best = p;
      }
    }
  }
  return best;
}

inline ld softplus(ld z) { return std::log1p(std::exp(z)); }

// The DAPPr batch loss written straight from its pseudocode.
inline ld dappr_loss(const std::vector<std::vector<double>>& logits, const std::vector<int>& labels, ld lambda,
                     ld eps) {
  ld loss_sum = 0, reg_sum = 0;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const auto K = logits[b].size();
    std::vector<ld> alpha(K), a_star(K);
    ld a0 = 0, s = 0;
    for (std::size_t k = 0; k < K; ++k) {
      alpha[k] = softplus(logits[b][k]) + 1;
      a0 += alpha[k];
      a_star[k] = alpha[k] - (static_cast<int>(k) == labels[b] ? 1 : 0) + eps;
      s += a_star[k];
    }
    ld loss = a0 * std::log(a0), reg = 0;
    for (std::size_t k = 0; k < K; ++k) {
      loss += alpha[k] * std::log((a_star[k] / s) / alpha[k]);
      const ld wrong = alpha[k] * (static_cast<int>(k) == labels[b] ? 0 : 1);
      reg += wrong * wrong;
    }
    loss_sum += loss;
    reg_sum += reg;
  }
  const ld B = static_cast<ld>(logits.size());
  return loss_sum / B + lambda * (reg_sum / B);
}

// Average precision by walking the explicit ranking (score desc, index asc).
inline double aupr(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 1; i < order.size(); ++i) {
    for (std::size_t j = i; j > 0; --j) {
      const auto a = order[j - 1], b = order[j];
      if (scores[b] > scores[a] || (scores[b] == scores[a] && b < a)) {
        std::swap(order[j - 1], order[j]);
      } else {
        break;
      }
    }
  }
  double hits = 0, total = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] == 1) {
      hits += 1;
      total += hits / static_cast<double>(r + 1);
    }
  }
  return total / hits;
}

// Every positive/negative pair, ties worth one half.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) wins += 1;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double o = x[i];
    x[i] = o + h;
    const double up = f(x);
    x[i] = o - h;
    const double down = f(x);
    x[i] = o;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace oracle
