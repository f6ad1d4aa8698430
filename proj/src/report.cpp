#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "dappr/error.hpp"
#include "dappr/experiments.hpp"

namespace dappr {

namespace {

using nlohmann::ordered_json;

// Shortest round-trip decimal for CSV cells.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json summary_json(const MetricSummary& s) {
  ordered_json j;
  j["mean"] = s.mean;
  if (s.std) j["std"] = *s.std;
  return j;
}

}  // namespace

double SeedMetrics::mean_ood_aupr() const {
  if (ood.empty()) return 0.0;
  double total = 0.0;
  for (const auto& o : ood) total += o.aupr;
  return total / static_cast<double>(ood.size());
}

MetricSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw ArgumentError("summarize: no values");
  MetricSummary s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size()));
  }
  return s;
}

Alpha0Histogram emit_alpha0_histogram(const std::vector<double>& id_alpha0, const std::vector<double>& ood_alpha0,
                                      int bins, std::string ood_name) {
  if (id_alpha0.empty() || ood_alpha0.empty()) throw ArgumentError("alpha0 histogram needs ID and OOD values");
  if (bins < 1) throw ArgumentError("alpha0 histogram needs at least one bin");
  Alpha0Histogram h;
  h.ood_name = std::move(ood_name);
  h.raw_min = std::min(*std::min_element(id_alpha0.begin(), id_alpha0.end()),
                       *std::min_element(ood_alpha0.begin(), ood_alpha0.end()));
  h.raw_max = std::max(*std::max_element(id_alpha0.begin(), id_alpha0.end()),
                       *std::max_element(ood_alpha0.begin(), ood_alpha0.end()));
  h.bins.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    h.bins[b].low = static_cast<double>(b) / bins;
    h.bins[b].high = static_cast<double>(b + 1) / bins;
  }
  const double range = h.raw_max - h.raw_min;
  auto index = [&](double v) {
    const double u = range > 0.0 ? (v - h.raw_min) / range : 0.0;
    return std::min(static_cast<std::size_t>(std::floor(u * bins)), static_cast<std::size_t>(bins - 1));
  };
  for (double v : id_alpha0) ++h.bins[index(v)].id_count;
  for (double v : ood_alpha0) ++h.bins[index(v)].ood_count;
  return h;
}

std::string Alpha0Histogram::to_csv() const {
  std::ostringstream out;
  out << "# alpha0 min-max normalised jointly over ID and OOD; raw range [" << fmt(raw_min) << ", "
      << fmt(raw_max) << "]\n";
  out << "bin_low,bin_high,id_count,ood_count\n";
  for (const auto& b : bins) out << fmt(b.low) << ',' << fmt(b.high) << ',' << b.id_count << ',' << b.ood_count << '\n';
  return out.str();
}

std::string EvalReport::to_json(bool include_run_info) const {
  ordered_json doc;
  doc["experiment"] = experiment;
  doc["loss_kind"] = loss_kind;
  doc["dataset"] = dataset;
  doc["scale"] = "metrics in [0, 100]";

  ordered_json seeds = ordered_json::array();
  for (const auto& s : per_seed) {
    ordered_json j;
    j["seed"] = s.seed;
    j["test_accuracy"] = s.test_accuracy;
    j["confidence_aupr"] = s.confidence_aupr;
    j["ece"] = s.ece;
    ordered_json ood = ordered_json::object();
    for (const auto& o : s.ood) ood[o.name] = {{"aupr", o.aupr}, {"auroc", o.auroc}};
    j["ood"] = std::move(ood);
    ordered_json diag;
    diag["selected_epoch"] = s.selected_epoch;
    diag["mean_alpha0_id"] = s.mean_alpha0_id;
    diag["mean_epistemic_id"] = s.mean_epistemic_id;
    for (const auto& o : s.ood) {
      diag["mean_alpha0_" + o.name] = o.mean_alpha0;
      diag["mean_epistemic_" + o.name] = o.mean_epistemic;
    }
    j["diagnostics"] = std::move(diag);
    seeds.push_back(std::move(j));
  }
  doc["per_seed"] = std::move(seeds);

  ordered_json summ = ordered_json::object();
  for (const auto& [name, s] : summary) summ[name] = summary_json(s);
  doc["summary"] = std::move(summ);

  ordered_json hists = ordered_json::array();
  for (const auto& h : alpha0_histograms) {
    ordered_json j;
    j["ood"] = h.ood_name;
    j["normalisation"] = "joint min-max over ID and OOD";
    j["raw_min"] = h.raw_min;
    j["raw_max"] = h.raw_max;
    ordered_json rows = ordered_json::array();
    for (const auto& b : h.bins) rows.push_back({b.low, b.high, b.id_count, b.ood_count});
    j["bins"] = std::move(rows);
    hists.push_back(std::move(j));
  }
  doc["alpha0_histograms"] = std::move(hists);

  ordered_json rel = ordered_json::array();
  for (const auto& b : reliability.bins) {
    rel.push_back({{"bin_low", b.low}, {"bin_high", b.high}, {"mean_conf", b.mean_confidence},
                   {"accuracy", b.accuracy}, {"count", b.count}});
  }
  doc["reliability"] = std::move(rel);

  if (include_run_info) doc["run_info"] = {{"generated_at", generated_at}, {"runtime_seconds", runtime_seconds}};
  return doc.dump(2) + "\n";
}

ScalingPoint ScalingCurve::mean_at(int size) const {
  ScalingPoint m;
  m.size = size;
  int n = 0;
  for (const auto& p : points) {
    if (p.size != size) continue;
    m.mean_epistemic += p.mean_epistemic;
    m.accuracy += p.accuracy;
    ++n;
  }
  if (n == 0) throw ArgumentError("no scaling points for size " + std::to_string(size));
  m.mean_epistemic /= n;
  m.accuracy /= n;
  return m;
}

std::string ScalingCurve::to_csv() const {
  std::ostringstream out;
  out << "size,seed,mean_epistemic,accuracy\n";
  for (const auto& p : points) out << p.size << ',' << p.seed << ',' << fmt(p.mean_epistemic) << ',' << fmt(p.accuracy) << '\n';
  return out.str();
}

SweepPoint SweepCurve::mean_at(double lambda) const {
  SweepPoint m;
  m.lambda = lambda;
  int n = 0;
  for (const auto& p : points) {
    if (p.lambda != lambda) continue;
    m.accuracy += p.accuracy;
    m.mean_ood_aupr += p.mean_ood_aupr;
    ++n;
  }
  if (n == 0) throw ArgumentError("no sweep points for lambda " + fmt(lambda));
  m.accuracy /= n;
  m.mean_ood_aupr /= n;
  return m;
}

std::string SweepCurve::to_csv() const {
  std::ostringstream out;
  out << "lambda,seed,accuracy,mean_ood_aupr\n";
  for (const auto& p : points) out << fmt(p.lambda) << ',' << p.seed << ',' << fmt(p.accuracy) << ',' << fmt(p.mean_ood_aupr) << '\n';
  return out.str();
}

double ProbeTable::median_ratio() const {
  if (rows.empty()) throw ArgumentError("empty probe table");
  std::vector<double> r;
  for (const auto& row : rows) r.push_back(row.max_deviation / row.loss_true);
  std::sort(r.begin(), r.end());
  const std::size_t n = r.size();
  return n % 2 == 1 ? r[n / 2] : 0.5 * (r[n / 2 - 1] + r[n / 2]);
}

std::string ProbeTable::to_csv() const {
  std::ostringstream out;
  out << "index,loss_true,max_deviation\n";
  for (const auto& row : rows) out << row.index << ',' << fmt(row.loss_true) << ',' << fmt(row.max_deviation) << '\n';
  return out.str();
}

void write_text(const std::string& dir, const std::string& name, const std::string& text) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << text;
}

}  // namespace dappr
