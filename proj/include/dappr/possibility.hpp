#pragma once

// Possibility-theory primitives: Dirichlet possibility functions on the
// probability simplex and finite-domain possibility tables.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dappr {

// Returned by log-possibility evaluations at impossible points.
inline constexpr double kLogImpossible = -std::numeric_limits<double>::infinity();

inline constexpr double kStructuralTolerance = 1e-9;

// A probability vector: entries in [0, 1] summing to 1.
class SimplexPoint {
 public:
  explicit SimplexPoint(std::vector<double> probs);

  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }

 private:
  std::vector<double> probs_;
};

// Concentration vector of a Dirichlet possibility function, alpha_k >= 0.
class DirichletParams {
 public:
  explicit DirichletParams(std::vector<double> alpha);

  const std::vector<double>& alpha() const noexcept { return alpha_; }
  double alpha0() const noexcept { return alpha0_; }
  std::size_t size() const noexcept { return alpha_.size(); }
  double operator[](std::size_t k) const { return alpha_[k]; }

 private:
  std::vector<double> alpha_;
  double alpha0_ = 0.0;
};

// A max-normalised possibility function over {0, ..., N-1}.
class PossibilityTable {
 public:
  explicit PossibilityTable(std::vector<double> values);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  // Possibility of an event: sup over its members, 0 for the empty event.
  double event_possibility(std::span<const std::size_t> members) const;

  // JSON array of the values, for debug dumps.
  std::string to_json() const;

 private:
  std::vector<double> values_;
};

struct SimplexGrid {
  int resolution = 0;
  std::size_t classes = 0;
  std::vector<SimplexPoint> points;  // lexicographic composition order
};

// log g(p; alpha) = alpha0 log alpha0 + sum_k alpha_k log(p_k / alpha_k), with
// 0 log 0 = 0 for alpha_k = 0. Total ignorance (alpha0 = 0) gives 0.
// Returns kLogImpossible when p_k = 0 for some alpha_k > 0.
double log_dirichlet_possibility(const DirichletParams& d, const SimplexPoint& p);

// alpha / alpha0. Throws DegenerateError when alpha0 == 0.
SimplexPoint dirichlet_mode(const DirichletParams& d);

// exp(min L - L): possibilistic posterior under a uniform prior.
PossibilityTable possibilistic_posterior(std::span<const double> losses);

// f(psi) = sup over the pre-image of psi; empty pre-images map to 0.
PossibilityTable pushforward_possibility(const PossibilityTable& f,
                                         std::span<const std::size_t> mapping,
                                         std::size_t codomain_size);

// max_theta log(f / g), clamped at 0. +inf when g vanishes where f does not.
double maxitive_divergence(const PossibilityTable& f, const PossibilityTable& g);

// All points of the simplex with coordinates in {0, 1/m, ..., 1}.
SimplexGrid simplex_grid(int classes, int resolution);

// Brute-force argmax over the grid of log g(p; alpha) + CE(p, y), with a
// 1e-12 floor inside the logs. Ties keep the first point in grid order.
SimplexPoint grid_argmax_surrogate(const DirichletParams& d, std::span<const double> y,
                                   const SimplexGrid& grid);

}  // namespace dappr
