#include "dappr/possibility.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dappr/error.hpp"
#include "json.hpp"

namespace dappr {

namespace {

constexpr double kGridLogFloor = 1e-12;

double checked_sum(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace

SimplexPoint::SimplexPoint(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ArgumentError("simplex point must be non-empty");
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("simplex point entry outside [0, 1]");
  }
  if (std::abs(checked_sum(probs_) - 1.0) > kStructuralTolerance) {
    throw ArgumentError("simplex point entries do not sum to 1");
  }
}

DirichletParams::DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  if (alpha_.empty()) throw ArgumentError("Dirichlet parameters must be non-empty");
  for (double a : alpha_) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw ArgumentError("Dirichlet concentration must be finite and non-negative");
    }
  }
  alpha0_ = checked_sum(alpha_);
}

PossibilityTable::PossibilityTable(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ArgumentError("possibility table must be non-empty");
  double top = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0 + kStructuralTolerance)) {
      throw ArgumentError("possibility value outside [0, 1]");
    }
    top = std::max(top, v);
  }
  if (std::abs(top - 1.0) > kStructuralTolerance) {
    throw ArgumentError("possibility table is not max-normalised");
  }
}

double PossibilityTable::event_possibility(std::span<const std::size_t> members) const {
  double sup = 0.0;
  for (std::size_t i : members) {
    if (i >= values_.size()) throw ArgumentError("event member out of range");
    sup = std::max(sup, values_[i]);
  }
  return sup;
}

std::string PossibilityTable::to_json() const {
  return nlohmann::json(values_).dump();
}

double log_dirichlet_possibility(const DirichletParams& d, const SimplexPoint& p) {
  if (d.size() != p.size()) throw ArgumentError("dimension mismatch between alpha and p");
  const double a0 = d.alpha0();
  if (a0 == 0.0) return 0.0;
  // Evaluated as sum_k alpha_k log(p_k / mode_k), which equals the
  // alpha0 log alpha0 form because sum_k alpha_k = alpha0, and is exactly 0
  // at the mode.
  double value = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double a = d[k];
    if (a == 0.0) continue;
    if (p[k] == 0.0) return kLogImpossible;
    value += a * std::log(p[k] / (a / a0));
  }
  return value;
}

SimplexPoint dirichlet_mode(const DirichletParams& d) {
  const double a0 = d.alpha0();
  if (a0 == 0.0) throw DegenerateError("mode undefined for alpha0 = 0 (total ignorance)");
  std::vector<double> mode(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) mode[k] = d[k] / a0;
  return SimplexPoint(std::move(mode));
}

PossibilityTable possibilistic_posterior(std::span<const double> losses) {
  if (losses.empty()) throw ArgumentError("posterior over an empty domain");
  for (double l : losses) {
    if (!std::isfinite(l)) throw ArgumentError("loss must be finite");
  }
  const double best = *std::min_element(losses.begin(), losses.end());
  std::vector<double> values(losses.size());
  std::transform(losses.begin(), losses.end(), values.begin(),
                 [best](double l) { return std::exp(best - l); });
  return PossibilityTable(std::move(values));
}

PossibilityTable pushforward_possibility(const PossibilityTable& f,
                                         std::span<const std::size_t> mapping,
                                         std::size_t codomain_size) {
  if (mapping.size() != f.size()) throw ArgumentError("mapping must cover the whole domain");
  std::vector<double> out(codomain_size, 0.0);
  for (std::size_t theta = 0; theta < mapping.size(); ++theta) {
    const std::size_t psi = mapping[theta];
    if (psi >= codomain_size) throw ArgumentError("mapping index out of range");
    out[psi] = std::max(out[psi], f[theta]);
  }
  return PossibilityTable(std::move(out));
}

double maxitive_divergence(const PossibilityTable& f, const PossibilityTable& g) {
  if (f.size() != g.size()) throw ArgumentError("divergence between tables of different size");
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == 0.0) continue;
    if (g[i] == 0.0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::log(f[i]) - std::log(g[i]));
  }
  // Both tables peak at 1, so the true value is >= 0; negative values here
  // are rounding from tables normalised only up to tolerance.
  return std::max(worst, 0.0);
}

SimplexGrid simplex_grid(int classes, int resolution) {
  if (classes < 2) throw ArgumentError("simplex grid needs at least 2 classes");
  if (resolution < 1) throw ArgumentError("simplex grid resolution must be positive");
  SimplexGrid grid;
  grid.resolution = resolution;
  grid.classes = static_cast<std::size_t>(classes);

  const double scale = 1.0 / resolution;
  std::vector<int> counts(grid.classes, 0);
  // Lexicographic enumeration of compositions of m into K parts: the first
  // K-1 parts are free, the last absorbs the remainder.
  auto emit = [&] {
    std::vector<double> p(grid.classes);
    for (std::size_t k = 0; k < grid.classes; ++k) p[k] = counts[k] * scale;
    grid.points.emplace_back(std::move(p));
  };
  auto recurse = [&](auto&& self, std::size_t k, int remaining) -> void {
    if (k + 1 == grid.classes) {
      counts[k] = remaining;
      emit();
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[k] = c;
      self(self, k + 1, remaining - c);
    }
  };
  recurse(recurse, 0, resolution);
  return grid;
}

SimplexPoint grid_argmax_surrogate(const DirichletParams& d, std::span<const double> y,
                                   const SimplexGrid& grid) {
  if (d.size() != y.size() || d.size() != grid.classes) {
    throw ArgumentError("dimension mismatch in grid argmax");
  }
  if (grid.points.empty()) throw ArgumentError("empty grid");
  const double a0 = d.alpha0();
  const double base = a0 > 0.0 ? a0 * std::log(a0) : 0.0;

  std::size_t best_index = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const auto& p = grid.points[i];
    double value = base;
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double log_p = std::log(std::max(p[k], kGridLogFloor));
      if (d[k] > 0.0) value += d[k] * (log_p - std::log(d[k]));
      value -= y[k] * log_p;
    }
    if (value > best_value) {
      best_value = value;
      best_index = i;
    }
  }
  return grid.points[best_index];
}

}  // namespace dappr
