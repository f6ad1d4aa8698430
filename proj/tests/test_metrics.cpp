#include <cmath>

#include "doctest.h"
#include "dappr/error.hpp"
#include "dappr/log.hpp"
#include "dappr/metrics.hpp"
#include "oracles.hpp"

using namespace dappr;

TEST_CASE("aleatoric and epistemic uncertainty") {
  CHECK(aleatoric_uncertainty(DirichletParams({8, 1, 1})) == doctest::Approx(0.2));
  CHECK(aleatoric_uncertainty(DirichletParams({3, 3, 3, 3})) == doctest::Approx(0.75));
  CHECK(aleatoric_uncertainty(DirichletParams({1000, 1, 1})) == doctest::Approx(2.0 / 1002));
  std::vector<double> ten(10, 2.0);
  CHECK(epistemic_uncertainty(DirichletParams(ten)) == 0.5);
  CHECK(epistemic_uncertainty(DirichletParams({1e12, 1e12})) < 1e-11);
  CHECK(epistemic_uncertainty(DirichletParams({1.0000001, 1.0000001})) == doctest::Approx(1.0));
  CHECK_THROWS_AS(aleatoric_uncertainty(DirichletParams({0, 0})), DegenerateError);
  CHECK_THROWS_AS(epistemic_uncertainty(DirichletParams({0, 0})), DegenerateError);
}

TEST_CASE("uncertainty bounds under the softplus head") {
  oracle::Gen gen(41);
  for (int i = 0; i < 500; ++i) {
    const int K = gen.integer(2, 8);
    const DirichletParams d(gen.alpha_above_one(K));
    const double al = aleatoric_uncertainty(d), ep = epistemic_uncertainty(d);
    CHECK(al >= 0.0);
    CHECK(al <= 1.0 - 1.0 / K + 1e-15);
    CHECK(ep > 0.0);
    CHECK(ep < 1.0);
  }
}

TEST_CASE("softmax entropy") {
  CHECK(softmax_entropy(SimplexPoint({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(std::log(4.0)));
  CHECK(softmax_entropy(SimplexPoint({0, 1, 0})) == 0.0);
  CHECK(softmax_entropy(SimplexPoint({0.5, 0.25, 0.25})) == doctest::Approx(1.0397207708399180).epsilon(1e-14));
}

TEST_CASE("aupr and auroc examples") {
  CHECK(aupr({{0.9, 0.1}, {1, 0}}) == 1.0);
  CHECK(aupr({{0.9, 0.1}, {0, 1}}) == 0.5);
  const ScoredBinary sb{{0.9, 0.8, 0.7, 0.1}, {1, 0, 1, 0}};
  CHECK(aupr(sb) == doctest::Approx(5.0 / 6));
  CHECK(auroc(sb) == 0.75);
  CHECK(auroc({{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}}) == 1.0);
  CHECK(auroc({{0.3, 0.3, 0.3}, {1, 0, 1}}) == 0.5);
  CHECK_THROWS_AS(aupr({{0.1, 0.2}, {1, 1}}), MetricUndefinedError);
  CHECK_THROWS_AS(auroc({{0.1, 0.2}, {0, 0}}), MetricUndefinedError);
  CHECK_THROWS_AS(aupr({{0.1, 0.2}, {1, 2}}), ArgumentError);
}

TEST_CASE("ranking metrics equal the exhaustive oracles for small inputs") {
  oracle::Gen gen(42);
  int cases = 0;
  while (cases < 500) {
    const int n = gen.integer(2, 8);
    ScoredBinary sb;
    for (int i = 0; i < n; ++i) {
      // Coarse scores so that ties are common.
      sb.scores.push_back(gen.integer(0, 4) / 4.0);
      sb.labels.push_back(gen.coin() ? 1 : 0);
    }
    const auto pos = std::count(sb.labels.begin(), sb.labels.end(), 1);
    if (pos == 0 || pos == n) continue;
    ++cases;
    REQUIRE(aupr(sb) == oracle::aupr(sb.scores, sb.labels));
    REQUIRE(auroc(sb) == oracle::auroc(sb.scores, sb.labels));
  }
}

TEST_CASE("ranking metrics are invariant under increasing transforms") {
  oracle::Gen gen(43);
  for (int i = 0; i < 300; ++i) {
    const int n = gen.integer(2, 40);
    ScoredBinary sb;
    for (int j = 0; j < n; ++j) {
      sb.scores.push_back(gen.integer(-10, 10) * 0.3);
      sb.labels.push_back(j < 1 ? 1 : (j < 2 ? 0 : gen.integer(0, 1)));
    }
    const double a = gen.real(0.1, 5.0), b = gen.real(-3, 3), c = gen.real(0.1, 2.0);
    ScoredBinary t = sb;
    for (auto& s : t.scores) s = a * std::exp(c * s) + b + std::atan(s);
    CHECK(aupr(t) == aupr(sb));
    CHECK(auroc(t) == auroc(sb));
  }
}

TEST_CASE("expected calibration error") {
  const std::vector<double> ones(10, 1.0);
  const std::vector<int> right(10, 1);
  CHECK(ece(ones, right) == 0.0);
  const std::vector<double> c8(10, 0.8);
  const std::vector<int> six{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  CHECK(ece(c8, six) == doctest::Approx(0.2));
  std::vector<std::string> warnings;
  const auto prev = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  CHECK(ece(std::vector<double>{}, std::vector<int>{}) == 0.0);
  set_warning_sink(prev);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(ece(std::vector<double>{1.5}, std::vector<int>{1}), ArgumentError);
}

TEST_CASE("ece equals an independent bin sum") {
  oracle::Gen gen(44);
  for (int i = 0; i < 100; ++i) {
    const int n = gen.integer(1, 60), bins = gen.integer(1, 20);
    std::vector<double> conf(n);
    std::vector<int> cor(n);
    for (int j = 0; j < n; ++j) {
      conf[j] = gen.coin(0.1) ? 1.0 : gen.real(0, 1);
      cor[j] = gen.integer(0, 1);
    }
    double total = 0;
    for (int b = 0; b < bins; ++b) {
      double cs = 0, as = 0;
      int cnt = 0;
      for (int j = 0; j < n; ++j) {
        const int idx = std::min(static_cast<int>(conf[j] * bins), bins - 1);
        if (idx != b) continue;
        cs += conf[j];
        as += cor[j];
        ++cnt;
      }
      if (cnt) total += cnt / static_cast<double>(n) * std::abs(as / cnt - cs / cnt);
    }
    CHECK(ece(conf, cor, bins) == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("reliability bins") {
  const std::vector<double> conf{0.05, 0.95, 0.97, 0.5};
  const std::vector<int> cor{0, 1, 0, 1};
  const auto rb = reliability_bins(conf, cor, 10);
  REQUIRE(rb.bins.size() == 10);
  std::size_t total = 0;
  for (const auto& b : rb.bins) total += b.count;
  CHECK(total == 4);
  CHECK(rb.bins[9].count == 2);
  CHECK(rb.bins[9].accuracy == 0.5);
  CHECK(rb.bins[9].mean_confidence == doctest::Approx(0.96));
  CHECK(rb.bins[0].low == 0.0);
  CHECK(rb.bins[9].high == 1.0);
  for (std::size_t b = 1; b < rb.bins.size(); ++b) CHECK(rb.bins[b].low > rb.bins[b - 1].low);

  const auto single = reliability_bins(std::vector<double>{0.42, 0.43}, std::vector<int>{1, 1}, 15);
  int occupied = 0;
  for (const auto& b : single.bins) occupied += b.count > 0;
  CHECK(occupied == 1);
  CHECK(rb.to_csv().rfind("bin_low,bin_high,mean_conf,accuracy,count\n", 0) == 0);

  // Calibrated by construction: correct with probability equal to the confidence.
  oracle::Gen gen(45);
  std::vector<double> cc;
  std::vector<int> cr;
  for (int i = 0; i < 60000; ++i) {
    const double c = gen.real(0, 1);
    cc.push_back(c);
    cr.push_back(gen.real(0, 1) < c ? 1 : 0);
  }
  for (const auto& b : reliability_bins(cc, cr, 15).bins) CHECK(std::abs(b.accuracy - b.mean_confidence) < 0.03);
}
