#pragma once

// Synthetic data generators, long-tail resampling, stratified splits and
// CSV ingestion.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dappr {

struct LabeledDataset {
  Eigen::MatrixXd features;  // N x d
  std::vector<int> labels;   // N entries in [0, num_classes)
  int num_classes = 0;
  std::string provenance;

  std::size_t size() const noexcept { return labels.size(); }
  Eigen::Index dim() const noexcept { return features.cols(); }

  // Throws ArgumentError on empty data, out-of-range labels or non-finite features.
  void validate() const;

  std::vector<std::size_t> class_counts() const;

  // Rows at `indices`, in that order.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetSplits {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

// Mean of class k in the blob generator: radius 4 on the first two axes.
Eigen::VectorXd blob_mean(int k, int classes, Eigen::Index dim);

// Isotropic Gaussian blobs with std `spread` around blob_mean(k), class-major order.
LabeledDataset gaussian_blobs(int classes, int n_per_class, int dim, double spread,
                              std::uint64_t seed);

// Two interleaving half-circles: label 0 on the upper unit half-circle, label 1 on
// the lower one centred at (1, 0.5). Gaussian noise of std `noise`.
LabeledDataset two_moons(int n, double noise, std::uint64_t seed);

// Exponential long-tail profile: class k keeps ceil(n_max rho^(k/(K-1))) samples.
LabeledDataset long_tail_resample(const LabeledDataset& ds, double rho, std::uint64_t seed);

enum class OodKind { uniform_box, shifted_blobs };

std::string to_string(OodKind kind);
OodKind parse_ood_kind(const std::string& name);

struct OodSpec {
  OodKind kind = OodKind::uniform_box;
  double offset = 12.0;  // shifted_blobs: translation along the first axis
  int classes = 3;       // shifted_blobs: ID blob layout being shifted
  double spread = 1.0;
  double box_half_width = 8.0;

  std::string name() const;
};

// n x dim OOD feature rows.
Eigen::MatrixXd ood_generator(const OodSpec& spec, int n, int dim, std::uint64_t seed);

// Stratified, deterministic partition into train/val/test.
DatasetSplits split(const LabeledDataset& ds, const SplitSpec& spec);

// Deterministic stratified subset of `total` rows (per-class shares differ by at most 1).
LabeledDataset stratified_subset(const LabeledDataset& ds, std::size_t total, std::uint64_t seed);

// Comma-separated decimals with an integer label in the last column.
LabeledDataset parse_csv(const std::string& text, bool has_header, const std::string& provenance = "csv");
LabeledDataset load_csv(const std::filesystem::path& path, bool has_header = false);
std::string to_csv(const LabeledDataset& ds);
void save_csv(const LabeledDataset& ds, const std::filesystem::path& path);

}  // namespace dappr
