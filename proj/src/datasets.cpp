#include "dappr/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "dappr/error.hpp"
#include "dappr/log.hpp"
#include "dappr/rng.hpp"

namespace dappr {

namespace {

constexpr double kBlobRadius = 4.0;

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledDataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  return by_class;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void LabeledDataset::validate() const {
  if (labels.empty()) throw ArgumentError("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ArgumentError("feature rows do not match label count");
  }
  if (num_classes < 1) throw ArgumentError("dataset needs at least one class");
  for (int l : labels) {
    if (l < 0 || l >= num_classes) throw ArgumentError("label out of range");
  }
  if (!features.allFinite()) throw ArgumentError("non-finite feature");
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.provenance = provenance;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) throw ArgumentError("subset index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(indices[r]));
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) throw ArgumentError("split fractions must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");
}

Eigen::VectorXd blob_mean(int k, int classes, Eigen::Index dim) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  const double angle = 2.0 * std::numbers::pi * k / classes;
  mean(0) = kBlobRadius * std::cos(angle);
  mean(1) = kBlobRadius * std::sin(angle);
  return mean;
}

LabeledDataset gaussian_blobs(int classes, int n_per_class, int dim, double spread,
                              std::uint64_t seed) {
  if (classes < 2) throw ArgumentError("gaussian_blobs needs K >= 2");
  if (dim < 2) throw ArgumentError("gaussian_blobs needs d >= 2");
  if (n_per_class < 1) throw ArgumentError("gaussian_blobs needs n_per_class >= 1");
  if (!(spread >= 0.0)) throw ArgumentError("spread must be non-negative");
  Rng rng(seed);
  LabeledDataset ds;
  ds.num_classes = classes;
  ds.provenance = "gaussian_blobs";
  ds.features.resize(static_cast<Eigen::Index>(classes) * n_per_class, dim);
  ds.labels.reserve(static_cast<std::size_t>(classes) * n_per_class);
  Eigen::Index row = 0;
  for (int k = 0; k < classes; ++k) {
    const Eigen::VectorXd mean = blob_mean(k, classes, dim);
    for (int i = 0; i < n_per_class; ++i, ++row) {
      for (Eigen::Index j = 0; j < dim; ++j) ds.features(row, j) = mean(j) + spread * rng.normal();
      ds.labels.push_back(k);
    }
  }
  return ds;
}

LabeledDataset two_moons(int n, double noise, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw ArgumentError("two_moons needs an even n >= 2");
  if (!(noise >= 0.0)) throw ArgumentError("noise must be non-negative");
  Rng rng(seed);
  const int half = n / 2;
  LabeledDataset ds;
  ds.num_classes = 2;
  ds.provenance = "two_moons";
  ds.features.resize(n, 2);
  ds.labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < half; ++i) {
    const double t = half > 1 ? std::numbers::pi * i / (half - 1) : 0.0;
    ds.features(i, 0) = std::cos(t);
    ds.features(i, 1) = std::sin(t);
    ds.features(half + i, 0) = 1.0 - std::cos(t);
    ds.features(half + i, 1) = 1.0 - std::sin(t) - 0.5;
  }
  for (int i = 0; i < n; ++i) ds.labels.push_back(i < half ? 0 : 1);
  if (noise > 0.0) {
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
      for (Eigen::Index c = 0; c < 2; ++c) ds.features(r, c) += noise * rng.normal();
    }
  }
  return ds;
}

LabeledDataset long_tail_resample(const LabeledDataset& ds, double rho, std::uint64_t seed) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ArgumentError("imbalance factor rho must lie in (0, 1]");
  ds.validate();
  auto by_class = indices_by_class(ds);
  std::size_t n_max = 0;
  for (const auto& c : by_class) n_max = std::max(n_max, c.size());
  const int classes = ds.num_classes;

  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (int k = 0; k < classes; ++k) {
    auto& members = by_class[static_cast<std::size_t>(k)];
    const double exponent = classes > 1 ? static_cast<double>(k) / (classes - 1) : 0.0;
    // The small slack keeps exact products such as 100 * 0.1 from rounding up.
    const double target = std::ceil(static_cast<double>(n_max) * std::pow(rho, exponent) - 1e-9);
    const auto wanted = std::min(members.size(), static_cast<std::size_t>(std::max(target, 0.0)));
    if (wanted < members.size()) {
      rng.shuffle(std::span<std::size_t>(members));
      members.resize(wanted);
      std::sort(members.begin(), members.end());
    }
    keep.insert(keep.end(), members.begin(), members.end());
  }
  LabeledDataset out = ds.subset(keep);
  out.provenance = ds.provenance + "+longtail";
  return out;
}

std::string to_string(OodKind kind) {
  return kind == OodKind::uniform_box ? "uniform_box" : "shifted_blobs";
}

OodKind parse_ood_kind(const std::string& name) {
  if (name == "uniform_box") return OodKind::uniform_box;
  if (name == "shifted_blobs") return OodKind::shifted_blobs;
  throw ArgumentError("unknown OOD kind '" + name + "'");
}

std::string OodSpec::name() const {
  if (kind == OodKind::uniform_box) return "uniform_box";
  std::ostringstream out;
  out << "shifted_blobs_" << offset;
  return out.str();
}

Eigen::MatrixXd ood_generator(const OodSpec& spec, int n, int dim, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("OOD sample count must be positive");
  if (dim < 1) throw ArgumentError("OOD dimension must be positive");
  Rng rng(seed);
  Eigen::MatrixXd out(n, dim);
  if (spec.kind == OodKind::uniform_box) {
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        out(r, c) = rng.uniform(-spec.box_half_width, spec.box_half_width);
      }
    }
    return out;
  }
  if (dim < 2) throw ArgumentError("shifted_blobs needs d >= 2");
  if (spec.classes < 2) throw ArgumentError("shifted_blobs needs at least two blobs");
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::VectorXd mean = blob_mean(static_cast<int>(r % spec.classes), spec.classes, dim);
    mean(0) += spec.offset;
    for (Eigen::Index c = 0; c < dim; ++c) out(r, c) = mean(c) + spec.spread * rng.normal();
  }
  return out;
}

DatasetSplits split(const LabeledDataset& ds, const SplitSpec& spec) {
  spec.validate();
  ds.validate();
  Rng rng(spec.seed);
  std::vector<std::size_t> train_idx, val_idx, test_idx;
  auto by_class = indices_by_class(ds);
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& members = by_class[k];
    if (members.empty()) continue;
    if (members.size() < 3) {
      throw StratificationError("class " + std::to_string(k) + " has " +
                                std::to_string(members.size()) + " samples, fewer than the 3 split parts");
    }
    rng.shuffle(std::span<std::size_t>(members));
    const auto n = members.size();
    auto n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
    auto n_test = static_cast<std::size_t>(std::llround(spec.test * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 2);
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1 - n_val);
    const std::size_t n_train = n - n_val - n_test;
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    val_idx.insert(val_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                   members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {ds.subset(train_idx), ds.subset(val_idx), ds.subset(test_idx)};
}

LabeledDataset stratified_subset(const LabeledDataset& ds, std::size_t total, std::uint64_t seed) {
  ds.validate();
  if (total < 1 || total > ds.size()) {
    throw ArgumentError("requested subset of " + std::to_string(total) + " rows from a dataset of " +
                        std::to_string(ds.size()));
  }
  Rng rng(seed);
  auto by_class = indices_by_class(ds);
  for (auto& members : by_class) rng.shuffle(std::span<std::size_t>(members));

  // Round-robin over classes keeps per-class shares within one of each other
  // until a class runs out.
  std::vector<std::size_t> keep;
  std::vector<std::size_t> cursor(by_class.size(), 0);
  while (keep.size() < total) {
    for (std::size_t k = 0; k < by_class.size() && keep.size() < total; ++k) {
      if (cursor[k] < by_class[k].size()) keep.push_back(by_class[k][cursor[k]++]);
    }
  }
  std::sort(keep.begin(), keep.end());
  return ds.subset(keep);
}

LabeledDataset parse_csv(const std::string& text, bool has_header, const std::string& provenance) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (has_header && line_no == 1) continue;
    if (trim(line).empty()) continue;

    std::vector<std::string> cells;
    std::stringstream cell_stream(line);
    std::string cell;
    while (std::getline(cell_stream, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() < 2) throw ParseError(line_no, "expected at least one feature and a label");

    std::vector<double> row;
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
      double v = 0.0;
      const auto& s = cells[c];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(line_no, "malformed number '" + s + "'");
      }
      if (!std::isfinite(v)) throw ParseError(line_no, "non-finite value '" + s + "'");
      row.push_back(v);
    }
    int label = 0;
    const auto& s = cells.back();
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), label);
    if (ec != std::errc() || ptr != s.data() + s.size() || label < 0) {
      throw ParseError(line_no, "malformed label '" + s + "'");
    }
    if (width >= 0 && static_cast<Eigen::Index>(row.size()) != width) {
      throw ParseError(line_no, "inconsistent column count");
    }
    width = static_cast<Eigen::Index>(row.size());
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) throw ArgumentError("CSV input contains no data rows");

  LabeledDataset ds;
  ds.provenance = provenance;
  ds.labels = std::move(labels);
  ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index c = 0; c < width; ++c) ds.features(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  }
  const auto counts = ds.class_counts();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) warn("class " + std::to_string(k) + " has no samples in " + provenance);
  }
  return ds;
}

LabeledDataset load_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), has_header, path.filename().string());
}

std::string to_csv(const LabeledDataset& ds) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
      out << ds.features(static_cast<Eigen::Index>(r), c) << ',';
    }
    out << ds.labels[r] << '\n';
  }
  return out.str();
}

void save_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << to_csv(ds);
}

}  // namespace dappr
