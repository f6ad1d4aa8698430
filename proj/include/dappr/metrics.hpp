#pragma once

// Uncertainty measures, ranking metrics and calibration.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dappr/possibility.hpp"

namespace dappr {

struct ScoredBinary {
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = positive (correct / in-distribution)
};

struct ReliabilityBin {
  double low = 0.0;
  double high = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct ReliabilityBins {
  std::vector<ReliabilityBin> bins;

  std::string to_csv() const;
};

inline constexpr int kDefaultCalibrationBins = 15;

// 1 - max_k alpha_k / alpha0.
double aleatoric_uncertainty(const DirichletParams& d);

// K / alpha0.
double epistemic_uncertainty(const DirichletParams& d);

// -sum p log p with 0 log 0 = 0.
double softmax_entropy(const SimplexPoint& p);

// Non-interpolated average precision. Ranking is by descending score with
// ties broken by original index.
double aupr(const ScoredBinary& sb);

// Mann-Whitney U / (n+ n-), ties counted one half.
double auroc(const ScoredBinary& sb);

// Expected calibration error over equal-width bins on [0, 1]; empty bins skipped.
double ece(std::span<const double> confidences, std::span<const int> correct, int bins = kDefaultCalibrationBins);

ReliabilityBins reliability_bins(std::span<const double> confidences, std::span<const int> correct,
                                 int bins = kDefaultCalibrationBins);

}  // namespace dappr
