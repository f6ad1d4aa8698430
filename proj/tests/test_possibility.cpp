#include <cmath>
#include <limits>

#include "doctest.h"
#include "dappr/error.hpp"
#include "dappr/loss.hpp"
#include "dappr/possibility.hpp"
#include "oracles.hpp"

using namespace dappr;

TEST_CASE("log possibility is zero at the mode") {
  CHECK(log_dirichlet_possibility(DirichletParams({2, 1, 1}), SimplexPoint({0.5, 0.25, 0.25})) == 0.0);
}

TEST_CASE("log possibility off the mode") {
  const double v = log_dirichlet_possibility(DirichletParams({2, 1, 1}), SimplexPoint({0.25, 0.5, 0.25}));
  CHECK(v == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(v == doctest::Approx(static_cast<double>(oracle::log_g({2, 1, 1}, {0.25, 0.5, 0.25}))).epsilon(1e-12));
}

TEST_CASE("total ignorance is the constant one function") {
  const DirichletParams zero({0, 0, 0});
  CHECK(log_dirichlet_possibility(zero, SimplexPoint({1, 0, 0})) == 0.0);
  CHECK(log_dirichlet_possibility(zero, SimplexPoint({0.2, 0.3, 0.5})) == 0.0);
  CHECK_THROWS_AS(dirichlet_mode(zero), DegenerateError);
}

TEST_CASE("zero concentration terms are skipped and empty support is impossible") {
  CHECK(log_dirichlet_possibility(DirichletParams({2, 0}), SimplexPoint({1, 0})) == 0.0);
  CHECK(log_dirichlet_possibility(DirichletParams({2, 1}), SimplexPoint({1, 0})) == kLogImpossible);
}

TEST_CASE("dirichlet mode") {
  const auto m = dirichlet_mode(DirichletParams({3, 2, 1}));
  CHECK(m[0] == doctest::Approx(0.5));
  CHECK(m[1] == doctest::Approx(1.0 / 3));
  CHECK(m[2] == doctest::Approx(1.0 / 6));
  const auto grid = simplex_grid(3, 6);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.points.size(); ++i) {
    if (oracle::log_g({3, 2, 1}, grid.points[i].probs()) > oracle::log_g({3, 2, 1}, grid.points[best].probs())) best = i;
  }
  CHECK(grid.points[best][0] == doctest::Approx(0.5));
  CHECK(grid.points[best][1] == doctest::Approx(1.0 / 3));
  const auto u = dirichlet_mode(DirichletParams({1, 1}));
  CHECK(u[0] == 0.5);
}

TEST_CASE("mode exactness holds for random concentrations") {
  oracle::Gen gen(11);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(gen.integer(2, 8));
    for (auto& v : a) v = std::exp(gen.real(-4.0, 6.0));
    const DirichletParams d(a);
    REQUIRE(log_dirichlet_possibility(d, dirichlet_mode(d)) == 0.0);
  }
}

TEST_CASE("possibilistic posterior") {
  const std::vector<double> l{1.0, 3.0};
  const auto post = possibilistic_posterior(l);
  CHECK(post[0] == 1.0);
  CHECK(post[1] == doctest::Approx(0.1353352832366127).epsilon(1e-14));
  const std::vector<double> flat{4.2, 4.2, 4.2};
  const auto flat_post = possibilistic_posterior(flat);
  for (double v : flat_post.values()) CHECK(v == 1.0);
  const std::vector<double> far{0.0, 1e6};
  CHECK(possibilistic_posterior(far)[1] == 0.0);
  CHECK_THROWS_AS(possibilistic_posterior(std::vector<double>{}), ArgumentError);
}

TEST_CASE("posterior under cross-entropy is the relative likelihood") {
  oracle::Gen gen(12);
  for (int i = 0; i < 200; ++i) {
    // Per-hypothesis summed log-likelihoods over a few samples.
    std::vector<double> loglik(gen.integer(1, 10));
    for (auto& v : loglik) {
      v = 0;
      for (int s = 0; s < 5; ++s) v += std::log(gen.real(0.01, 1.0));
    }
    std::vector<double> losses;
    for (double v : loglik) losses.push_back(-v);
    const auto post = possibilistic_posterior(losses);
    const double top = *std::max_element(loglik.begin(), loglik.end());
    double mx = 0;
    for (std::size_t j = 0; j < loglik.size(); ++j) {
      CHECK(std::abs(post[j] - std::exp(loglik[j] - top)) <= 1e-12);
      mx = std::max(mx, post[j]);
    }
    CHECK(mx == 1.0);
  }
}

TEST_CASE("pushforward") {
  const PossibilityTable f({1, 0.5, 0.2});
  const std::vector<std::size_t> map{0, 0, 1};
  const auto g = pushforward_possibility(f, map, 2);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.2);

  const PossibilityTable h({1, 0.5});
  const std::vector<std::size_t> collapse{0, 0};
  const auto e = pushforward_possibility(h, collapse, 2);
  CHECK(e[0] == 1.0);
  CHECK(e[1] == 0.0);

  const std::vector<std::size_t> id{0, 1, 2};
  CHECK(pushforward_possibility(f, id, 3).values() == f.values());

  const std::vector<std::size_t> bad{0, 3, 1};
  CHECK_THROWS_AS(pushforward_possibility(f, bad, 3), ArgumentError);
}

TEST_CASE("pushforward preserves max normalisation") {
  oracle::Gen gen(13);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = gen.integer(1, 12);
    const PossibilityTable f(gen.possibility(n));
    const std::size_t m = gen.integer(1, 6);
    std::vector<std::size_t> map(n);
    for (auto& v : map) v = gen.integer(0, static_cast<int>(m) - 1);
    const auto g = pushforward_possibility(f, map, m);
    CHECK(*std::max_element(g.values().begin(), g.values().end()) == 1.0);
    const std::vector<std::size_t> all{0};
    CHECK(g.event_possibility(all) == g[0]);
  }
}

TEST_CASE("event possibility is the sup over members") {
  const PossibilityTable f({0.3, 1.0, 0.6});
  const std::vector<std::size_t> ev{0, 2};
  CHECK(f.event_possibility(ev) == 0.6);
  CHECK(f.event_possibility(std::vector<std::size_t>{}) == 0.0);
  CHECK(f.to_json() == "[0.3,1.0,0.6]");
}

TEST_CASE("maxitive divergence") {
  const PossibilityTable a({1, 0.2}), b({1, 0.8});
  CHECK(maxitive_divergence(a, a) == 0.0);
  CHECK(maxitive_divergence(a, b) == 0.0);
  CHECK(maxitive_divergence(b, a) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  const PossibilityTable c({1, 0.0});
  CHECK(maxitive_divergence(b, c) == std::numeric_limits<double>::infinity());
  CHECK(maxitive_divergence(c, b) == 0.0);
  CHECK_THROWS_AS(maxitive_divergence(a, PossibilityTable({1})), ArgumentError);
}

TEST_CASE("divergence is non-negative and vanishes under domination") {
  oracle::Gen gen(14);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = gen.integer(1, 10);
    const PossibilityTable f(gen.possibility(n)), g(gen.possibility(n));
    CHECK(maxitive_divergence(f, g) >= -1e-12);
    std::vector<double> up(n);
    for (std::size_t j = 0; j < n; ++j) up[j] = std::max(f[j], g[j]);
    CHECK(maxitive_divergence(f, PossibilityTable(up)) == 0.0);
  }
}

TEST_CASE("simplex grid") {
  const auto g = simplex_grid(2, 2);
  REQUIRE(g.points.size() == 3);
  CHECK(g.points[0].probs() == std::vector<double>{0, 1});
  CHECK(g.points[1].probs() == std::vector<double>{0.5, 0.5});
  CHECK(g.points[2].probs() == std::vector<double>{1, 0});
  CHECK(simplex_grid(3, 2).points.size() == 6);
  CHECK(simplex_grid(2, 1).points.size() == 2);
  CHECK(simplex_grid(4, 10).points.size() == 286);
  CHECK_THROWS_AS(simplex_grid(1, 5), ArgumentError);
  CHECK_THROWS_AS(simplex_grid(3, 0), ArgumentError);
}

TEST_CASE("grid argmax matches the exhaustive oracle") {
  const DirichletParams d({3, 2, 1});
  const std::vector<double> y{1, 0, 0};
  const auto p = grid_argmax_surrogate(d, y, simplex_grid(3, 200));
  CHECK(std::abs(p[0] - 0.4) <= 1.0 / 200);
  CHECK(std::abs(p[1] - 0.4) <= 1.0 / 200);
  CHECK(std::abs(p[2] - 0.2) <= 1.0 / 200);
  const auto o = oracle::grid_argmax({3, 2, 1}, y, 200);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(p[k] - o[k]) <= 1.0 / 200);

  const auto q = grid_argmax_surrogate(DirichletParams({2, 2}), std::vector<double>{0, 1}, simplex_grid(2, 300));
  CHECK(std::abs(q[0] - 2.0 / 3) <= 1.0 / 300);
}

TEST_CASE("grid argmax is symmetric in the non-target classes") {
  const auto p = grid_argmax_surrogate(DirichletParams({2.5, 2.5, 2.5}), std::vector<double>{1, 0, 0},
                                       simplex_grid(3, 120));
  CHECK(p[1] == p[2]);
}

TEST_CASE("max normalisation on the grid") {
  oracle::Gen gen(15);
  const int m = 200;
  const auto grid = simplex_grid(3, m);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> a(3);
    for (auto& v : a) v = std::exp(gen.real(-1.0, 2.5));
    const DirichletParams d(a);
    double sup = 0;
    for (const auto& p : grid.points) sup = std::max(sup, std::exp(log_dirichlet_possibility(d, p)));
    CHECK(sup <= 1.0 + 1e-6);
    CHECK(sup >= 1.0 - 5.0 / m);
  }
}
