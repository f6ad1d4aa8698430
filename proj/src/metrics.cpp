#include "dappr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dappr/error.hpp"
#include "dappr/log.hpp"

namespace dappr {

namespace {

void check_scored(const ScoredBinary& sb) {
  if (sb.scores.size() != sb.labels.size()) throw ArgumentError("scores and labels differ in length");
  std::size_t positives = 0;
  for (int l : sb.labels) {
    if (l != 0 && l != 1) throw ArgumentError("binary labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  if (positives == 0 || positives == sb.labels.size()) {
    throw MetricUndefinedError("ranking metric needs both positive and negative labels");
  }
}

void check_calibration_input(std::span<const double> confidences, std::span<const int> correct, int bins) {
  if (confidences.size() != correct.size()) throw ArgumentError("confidences and flags differ in length");
  if (bins < 1) throw ArgumentError("bin count must be positive");
  for (double c : confidences) {
    if (!(c >= 0.0 && c <= 1.0)) throw ArgumentError("confidence outside [0, 1]");
  }
}

std::size_t bin_index(double confidence, int bins) {
  const auto b = static_cast<std::size_t>(confidence * bins);
  return std::min(b, static_cast<std::size_t>(bins - 1));
}

}  // namespace

double aleatoric_uncertainty(const DirichletParams& d) {
  if (d.alpha0() == 0.0) throw DegenerateError("aleatoric uncertainty undefined for alpha0 = 0");
  const double top = *std::max_element(d.alpha().begin(), d.alpha().end());
  return 1.0 - top / d.alpha0();
}

double epistemic_uncertainty(const DirichletParams& d) {
  if (d.alpha0() == 0.0) throw DegenerateError("epistemic uncertainty undefined for alpha0 = 0");
  return static_cast<double>(d.size()) / d.alpha0();
}

double softmax_entropy(const SimplexPoint& p) {
  double h = 0.0;
  for (double v : p.probs()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double aupr(const ScoredBinary& sb) {
  check_scored(sb);
  std::vector<std::size_t> order(sb.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sb.scores[a] > sb.scores[b]; });
  double precision_sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (sb.labels[order[rank]] == 1) {
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return precision_sum / static_cast<double>(hits);
}

double auroc(const ScoredBinary& sb) {
  check_scored(sb);
  const std::size_t n = sb.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sb.scores[a] < sb.scores[b]; });

  // U = sum over positives of (#negatives below + 0.5 #negatives tied), taken
  // group by group over runs of equal scores. Counts are doubled to stay integral.
  std::size_t negatives_below = 0;
  std::size_t twice_u = 0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    std::size_t neg_in_group = 0;
    while (j < n && sb.scores[order[j]] == sb.scores[order[i]]) {
      (sb.labels[order[j]] == 1 ? pos_in_group : neg_in_group)++;
      ++j;
    }
    twice_u += pos_in_group * (2 * negatives_below + neg_in_group);
    negatives_below += neg_in_group;
    positives += pos_in_group;
    i = j;
  }
  const std::size_t negatives = n - positives;
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

ReliabilityBins reliability_bins(std::span<const double> confidences, std::span<const int> correct, int bins) {
  check_calibration_input(confidences, correct, bins);
  ReliabilityBins out;
  out.bins.resize(static_cast<std::size_t>(bins));
  std::vector<double> conf_sum(out.bins.size(), 0.0);
  std::vector<double> correct_sum(out.bins.size(), 0.0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const auto b = bin_index(confidences[i], bins);
    conf_sum[b] += confidences[i];
    correct_sum[b] += correct[i] != 0 ? 1.0 : 0.0;
    ++out.bins[b].count;
  }
  for (std::size_t b = 0; b < out.bins.size(); ++b) {
    auto& bin = out.bins[b];
    bin.low = static_cast<double>(b) / bins;
    bin.high = static_cast<double>(b + 1) / bins;
    if (bin.count > 0) {
      bin.mean_confidence = conf_sum[b] / static_cast<double>(bin.count);
      bin.accuracy = correct_sum[b] / static_cast<double>(bin.count);
    }
  }
  return out;
}

double ece(std::span<const double> confidences, std::span<const int> correct, int bins) {
  check_calibration_input(confidences, correct, bins);
  if (confidences.empty()) {
    warn("ECE over zero predictions is defined as 0");
    return 0.0;
  }
  const auto rb = reliability_bins(confidences, correct, bins);
  const double n = static_cast<double>(confidences.size());
  double total = 0.0;
  for (const auto& bin : rb.bins) {
    if (bin.count == 0) continue;
    total += static_cast<double>(bin.count) / n * std::abs(bin.accuracy - bin.mean_confidence);
  }
  return total;
}

std::string ReliabilityBins::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "bin_low,bin_high,mean_conf,accuracy,count\n";
  for (const auto& b : bins) {
    out << b.low << ',' << b.high << ',' << b.mean_confidence << ',' << b.accuracy << ',' << b.count << '\n';
  }
  return out.str();
}

}  // namespace dappr
