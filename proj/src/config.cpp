#include "dappr/config.hpp"

#include <algorithm>
#include <initializer_list>
#include <fstream>
#include <sstream>

#include "dappr/error.hpp"
#include "json.hpp"

namespace dappr {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::standard: return "standard";
    case ExperimentKind::longtail: return "longtail";
    case ExperimentKind::scaling: return "scaling";
    case ExperimentKind::ood: return "ood";
    case ExperimentKind::probe: return "probe";
    case ExperimentKind::verify: return "verify";
  }
  return "standard";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::standard, ExperimentKind::longtail, ExperimentKind::scaling, ExperimentKind::ood,
                 ExperimentKind::probe, ExperimentKind::verify}) {
    if (to_string(k) == name) return k;
  }
  throw ArgumentError("unknown experiment '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ArgumentError("at least one seed is required");
  if (dataset.kind != "blobs" && dataset.kind != "moons" && dataset.kind != "csv") {
    throw ArgumentError("unknown dataset kind '" + dataset.kind + "'");
  }
  dataset.split.validate();
  for (int h : hidden) {
    if (h < 1) throw ArgumentError("hidden layer sizes must be positive");
  }
  if (ood_samples < 1) throw ArgumentError("ood_samples must be positive");
  if (histogram_bins < 1 || calibration_bins < 1) throw ArgumentError("bin counts must be positive");
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ArgumentError("lambda values must be non-negative");
  }
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw ArgumentError("scaling sizes must be strictly increasing");
  }
  if (!(rho > 0.0 && rho <= 1.0)) throw ArgumentError("rho must lie in (0, 1]");
  if (probe.samples < 1 || probe.perturbations < 1 || probe.epochs < 1 || probe.train_size < 1) {
    throw ArgumentError("probe counts must be positive");
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

// Unknown keys are rejected so that a typo cannot silently fall back to a default.
void expect_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ArgumentError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ArgumentError("unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig cfg;
  try {
    const json doc = json::parse(text);
    expect_keys(doc, {"experiment", "dataset", "train", "ood", "ood_samples", "lambdas", "sizes", "rho", "probe",
                      "histogram_bins", "calibration_bins", "output_dir", "seeds"},
                "config");
    if (doc.contains("experiment")) cfg.experiment = parse_experiment_kind(doc.at("experiment").get<std::string>());
    if (doc.contains("dataset")) {
      const auto& d = doc.at("dataset");
      expect_keys(d, {"kind", "classes", "n_per_class", "dim", "spread", "n", "noise", "path", "header", "seed", "split"},
                  "dataset");
      read(d, "kind", cfg.dataset.kind);
      read(d, "classes", cfg.dataset.classes);
      read(d, "n_per_class", cfg.dataset.n_per_class);
      read(d, "dim", cfg.dataset.dim);
      read(d, "spread", cfg.dataset.spread);
      read(d, "n", cfg.dataset.n);
      read(d, "noise", cfg.dataset.noise);
      read(d, "path", cfg.dataset.path);
      read(d, "header", cfg.dataset.header);
      read(d, "seed", cfg.dataset.seed);
      if (d.contains("split")) {
        const auto& s = d.at("split");
        expect_keys(s, {"train", "val", "test"}, "dataset.split");
        read(s, "train", cfg.dataset.split.train);
        read(s, "val", cfg.dataset.split.val);
        read(s, "test", cfg.dataset.split.test);
      }
    }
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      expect_keys(t, {"hidden", "learning_rate", "epochs", "batch_size", "optimizer", "loss", "lambda", "eps",
                      "schedule", "early_stopping", "weight_decay"},
                  "train");
      read(t, "hidden", cfg.hidden);
      read(t, "learning_rate", cfg.train.learning_rate);
      read(t, "epochs", cfg.train.epochs);
      read(t, "batch_size", cfg.train.batch_size);
      if (t.contains("optimizer")) cfg.train.optimizer = parse_optimizer_kind(t.at("optimizer").get<std::string>());
      if (t.contains("loss")) cfg.train.loss_kind = parse_loss_kind(t.at("loss").get<std::string>());
      read(t, "lambda", cfg.train.loss_cfg.lambda);
      read(t, "eps", cfg.train.loss_cfg.eps);
      if (t.contains("schedule")) cfg.train.loss_cfg.schedule = parse_lambda_schedule(t.at("schedule").get<std::string>());
      read(t, "early_stopping", cfg.train.early_stopping);
      read(t, "weight_decay", cfg.train.weight_decay);
    }
    if (doc.contains("ood")) {
      cfg.ood.clear();
      for (const auto& o : doc.at("ood")) {
        expect_keys(o, {"kind", "offset", "spread"}, "ood entry");
        OodSpec spec;
        spec.kind = parse_ood_kind(o.at("kind").get<std::string>());
        read(o, "offset", spec.offset);
        read(o, "spread", spec.spread);
        cfg.ood.push_back(spec);
      }
    }
    read(doc, "ood_samples", cfg.ood_samples);
    read(doc, "lambdas", cfg.lambdas);
    read(doc, "sizes", cfg.sizes);
    read(doc, "rho", cfg.rho);
    if (doc.contains("probe")) {
      const auto& p = doc.at("probe");
      expect_keys(p, {"samples", "perturbations", "epochs", "train_size", "indices"}, "probe");
      read(p, "samples", cfg.probe.samples);
      read(p, "perturbations", cfg.probe.perturbations);
      read(p, "epochs", cfg.probe.epochs);
      read(p, "train_size", cfg.probe.train_size);
      read(p, "indices", cfg.probe.indices);
    }
    read(doc, "histogram_bins", cfg.histogram_bins);
    read(doc, "calibration_bins", cfg.calibration_bins);
    read(doc, "output_dir", cfg.output_dir);
    read(doc, "seeds", cfg.seeds);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json doc;
  doc["experiment"] = to_string(cfg.experiment);
  const auto& d = cfg.dataset;
  doc["dataset"] = {{"kind", d.kind},     {"classes", d.classes}, {"n_per_class", d.n_per_class},
                    {"dim", d.dim},       {"spread", d.spread},   {"n", d.n},
                    {"noise", d.noise},   {"path", d.path},       {"header", d.header},
                    {"seed", d.seed},
                    {"split", {{"train", d.split.train}, {"val", d.split.val}, {"test", d.split.test}}}};
  const auto& t = cfg.train;
  doc["train"] = {{"hidden", cfg.hidden},
                  {"learning_rate", t.learning_rate},
                  {"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"optimizer", to_string(t.optimizer)},
                  {"loss", to_string(t.loss_kind)},
                  {"lambda", t.loss_cfg.lambda},
                  {"eps", t.loss_cfg.eps},
                  {"schedule", to_string(t.loss_cfg.schedule)},
                  {"early_stopping", t.early_stopping},
                  {"weight_decay", t.weight_decay}};
  auto ood = ordered_json::array();
  for (const auto& o : cfg.ood) ood.push_back({{"kind", to_string(o.kind)}, {"offset", o.offset}, {"spread", o.spread}});
  doc["ood"] = std::move(ood);
  doc["ood_samples"] = cfg.ood_samples;
  doc["lambdas"] = cfg.lambdas;
  doc["sizes"] = cfg.sizes;
  doc["rho"] = cfg.rho;
  doc["probe"] = {{"samples", cfg.probe.samples},
                  {"perturbations", cfg.probe.perturbations},
                  {"epochs", cfg.probe.epochs},
                  {"train_size", cfg.probe.train_size},
                  {"indices", cfg.probe.indices}};
  doc["histogram_bins"] = cfg.histogram_bins;
  doc["calibration_bins"] = cfg.calibration_bins;
  doc["output_dir"] = cfg.output_dir;
  doc["seeds"] = cfg.seeds;
  return doc.dump(2);
}

LabeledDataset make_dataset(const DatasetSpec& spec) {
  if (spec.kind == "blobs") {
    return gaussian_blobs(spec.classes, spec.n_per_class, spec.dim, spec.spread, spec.seed);
  }
  if (spec.kind == "moons") return two_moons(spec.n, spec.noise, spec.seed);
  if (spec.kind == "csv") {
    if (spec.path.empty()) throw ArgumentError("csv dataset needs a path");
    return load_csv(spec.path, spec.header);
  }
  throw ArgumentError("unknown dataset kind '" + spec.kind + "'");
}

TrainConfig resolved_train_config(const ExperimentConfig& cfg, Eigen::Index dim, int classes, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.layer_sizes.clear();
  t.layer_sizes.push_back(static_cast<int>(dim));
  t.layer_sizes.insert(t.layer_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  t.layer_sizes.push_back(classes);
  t.seed = seed;
  return t;
}

}  // namespace dappr
