#include "dappr/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <stdexcept>

#include "dappr/error.hpp"
#include "dappr/log.hpp"
#include "dappr/loss.hpp"
#include "dappr/rng.hpp"

namespace dappr {

namespace {

constexpr std::uint64_t kOodStream = 0x00d0;
constexpr std::uint64_t kLongTailStream = 0x7a11;
constexpr std::uint64_t kSubsetStream = 0x5b5e;
constexpr std::uint64_t kProbeStream = 0x9b0e;
constexpr std::size_t kMinTailSamples = 3;

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

TrainResult train_seed(const TrainConfig& tcfg, const LabeledDataset& train_set, const LabeledDataset& val_set,
                       std::size_t seed_index) {
  const std::string where = "seed index " + std::to_string(seed_index) + " (seed " + std::to_string(tcfg.seed) + "): ";
  try {
    return train(tcfg, train_set, val_set);
  } catch (const ArgumentError& e) {
    throw ArgumentError(where + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(where + e.what());
  }
}

// Per-seed training plus evaluation, with `transform` applied to the train split.
template <typename Transform>
EvalReport run_protocol(const ExperimentConfig& cfg, const std::string& name, Transform transform) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const PreparedData data = prepare_data(cfg);
  const auto& splits = data.splits;

  EvalReport report;
  report.experiment = name;
  report.loss_kind = to_string(cfg.train.loss_kind);
  report.dataset = splits.train.provenance;

  std::vector<double> all_conf;
  std::vector<int> all_correct;
  std::vector<double> id_alpha0;
  std::vector<std::vector<double>> ood_alpha0(data.ood_sets.size());

  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const std::uint64_t seed = cfg.seeds[i];
    const LabeledDataset train_set = transform(splits.train, seed);
    const TrainConfig tcfg = resolved_train_config(cfg, splits.train.dim(), splits.train.num_classes, seed);
    const TrainResult result = train_seed(tcfg, train_set, splits.val, i);

    SeedMetrics m = evaluate_model(result.params, tcfg.loss_kind, data, seed);
    m.selected_epoch = result.selected_epoch;
    report.per_seed.push_back(m);

    const auto id = model_uncertainty(result.params, tcfg.loss_kind, splits.test.features);
    for (std::size_t r = 0; r < id.size(); ++r) {
      all_conf.push_back(id[r].confidence);
      all_correct.push_back(id[r].predicted == splits.test.labels[r] ? 1 : 0);
      id_alpha0.push_back(id[r].alpha0);
    }
    if (tcfg.loss_kind == LossKind::dappr) {
      for (std::size_t o = 0; o < data.ood_sets.size(); ++o) {
        for (const auto& u : model_uncertainty(result.params, tcfg.loss_kind, data.ood_sets[o].second)) {
          ood_alpha0[o].push_back(u.alpha0);
        }
      }
    }
  }

  auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const auto& s : report.per_seed) v.push_back(getter(s));
    return summarize(v);
  };
  report.summary.emplace_back("test_accuracy", collect([](const SeedMetrics& s) { return s.test_accuracy; }));
  report.summary.emplace_back("confidence_aupr", collect([](const SeedMetrics& s) { return s.confidence_aupr; }));
  report.summary.emplace_back("ece", collect([](const SeedMetrics& s) { return s.ece; }));
  for (std::size_t o = 0; o < data.ood_sets.size(); ++o) {
    const std::string& oname = data.ood_sets[o].first;
    report.summary.emplace_back("ood_aupr/" + oname, collect([o](const SeedMetrics& s) { return s.ood[o].aupr; }));
    report.summary.emplace_back("ood_auroc/" + oname, collect([o](const SeedMetrics& s) { return s.ood[o].auroc; }));
  }

  report.reliability = reliability_bins(all_conf, all_correct, cfg.calibration_bins);
  if (cfg.train.loss_kind == LossKind::dappr) {
    for (std::size_t o = 0; o < data.ood_sets.size(); ++o) {
      report.alpha0_histograms.push_back(
          emit_alpha0_histogram(id_alpha0, ood_alpha0[o], cfg.histogram_bins, data.ood_sets[o].first));
    }
  }

  report.generated_at = utc_timestamp();
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_report(const ExperimentConfig& cfg, const EvalReport& report) {
  if (cfg.output_dir.empty()) return;
  write_text(cfg.output_dir, "report.json", report.to_json());
  write_text(cfg.output_dir, "reliability.csv", report.reliability.to_csv());
  for (const auto& h : report.alpha0_histograms) write_text(cfg.output_dir, "alpha0_hist_" + h.ood_name + ".csv", h.to_csv());
}

// Soft-label fine-tuning with one row forced into every mini-batch.
NetworkParams fine_tune_forced(const NetworkParams& start, const TrainConfig& tcfg, const LabeledDataset& rest,
                               const Eigen::VectorXd& x_forced, const Eigen::VectorXd& y_forced, int epochs,
                               std::uint64_t order_seed) {
  NetworkParams params = start;
  Optimizer opt(tcfg.optimizer, tcfg.learning_rate, tcfg.weight_decay);
  const Eigen::Index K = params.output_dim();
  const std::size_t per_batch = static_cast<std::size_t>(std::max(1, tcfg.batch_size - 1));
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto order = epoch_order(rest.size(), order_seed, epoch);
    for (std::size_t begin = 0; begin < order.size(); begin += per_batch) {
      const std::size_t end = std::min(order.size(), begin + per_batch);
      const Eigen::Index B = static_cast<Eigen::Index>(end - begin) + 1;
      Eigen::MatrixXd xb(B, rest.dim());
      Eigen::MatrixXd yb = Eigen::MatrixXd::Zero(B, K);
      for (std::size_t i = begin; i < end; ++i) {
        const auto r = static_cast<Eigen::Index>(i - begin);
        xb.row(r) = rest.features.row(static_cast<Eigen::Index>(order[i]));
        yb(r, rest.labels[order[i]]) = 1.0;
      }
      xb.row(B - 1) = x_forced.transpose();
      yb.row(B - 1) = y_forced.transpose();
      const ForwardResult fr = forward(params, xb);
      const LossOutput lo = soft_cross_entropy_loss(fr.logits, yb);
      opt.step(params, backward(params, fr.cache, lo.grad_logits));
    }
  }
  return params;
}

Eigen::VectorXd random_soft_label(int classes, Rng& rng) {
  Eigen::VectorXd p(classes);
  for (int k = 0; k < classes; ++k) {
    double u;
    do {
      u = rng.uniform();
    } while (u <= 0.0);
    p[k] = -std::log(u);
  }
  return p / p.sum();
}

}  // namespace

std::vector<SampleUncertainty> uncertainty_from_alpha(const std::vector<DirichletParams>& alphas) {
  std::vector<SampleUncertainty> out;
  out.reserve(alphas.size());
  for (const auto& d : alphas) {
    SampleUncertainty u;
    const auto& a = d.alpha();
    u.predicted = static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
    u.aleatoric = aleatoric_uncertainty(d);
    u.epistemic = epistemic_uncertainty(d);
    u.confidence = 1.0 - u.aleatoric;
    u.alpha0 = d.alpha0();
    out.push_back(u);
  }
  return out;
}

std::vector<SampleUncertainty> uncertainty_from_probs(const Eigen::MatrixXd& probs) {
  std::vector<SampleUncertainty> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    std::vector<double> p(probs.cols());
    for (Eigen::Index k = 0; k < probs.cols(); ++k) p[k] = probs(r, k);
    SampleUncertainty u;
    Eigen::Index arg = 0;
    const double top = probs.row(r).maxCoeff(&arg);
    u.predicted = static_cast<int>(arg);
    u.aleatoric = 1.0 - top;
    u.epistemic = softmax_entropy(SimplexPoint(std::move(p)));
    u.confidence = top;
    out.push_back(u);
  }
  return out;
}

std::vector<SampleUncertainty> model_uncertainty(const NetworkParams& params, LossKind kind, const Eigen::MatrixXd& x) {
  if (kind == LossKind::dappr) return uncertainty_from_alpha(predict_alpha(params, x));
  return uncertainty_from_probs(softmax_rows(predict_logits(params, x)));
}

ScoredBinary confidence_scored(const std::vector<SampleUncertainty>& id, const std::vector<int>& labels) {
  if (id.size() != labels.size()) throw ArgumentError("confidence scores: size mismatch");
  ScoredBinary sb;
  for (std::size_t i = 0; i < id.size(); ++i) {
    sb.scores.push_back(-id[i].aleatoric);
    sb.labels.push_back(id[i].predicted == labels[i] ? 1 : 0);
  }
  return sb;
}

ScoredBinary ood_scored(const std::vector<SampleUncertainty>& id, const std::vector<SampleUncertainty>& ood) {
  ScoredBinary sb;
  for (const auto& u : id) {
    sb.scores.push_back(-u.epistemic);
    sb.labels.push_back(1);
  }
  for (const auto& u : ood) {
    sb.scores.push_back(-u.epistemic);
    sb.labels.push_back(0);
  }
  return sb;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData data;
  const LabeledDataset ds = make_dataset(cfg.dataset);
  SplitSpec spec = cfg.dataset.split;
  spec.seed = cfg.dataset.seed;
  data.splits = split(ds, spec);
  for (std::size_t i = 0; i < cfg.ood.size(); ++i) {
    OodSpec o = cfg.ood[i];
    if (o.kind == OodKind::shifted_blobs) o.classes = ds.num_classes;
    Eigen::MatrixXd x = ood_generator(o, cfg.ood_samples, static_cast<int>(ds.dim()), derive_seed(cfg.dataset.seed, kOodStream + i));
    std::string name = o.name();
    for (const auto& [existing, _] : data.ood_sets) {
      if (existing == name) name += "_" + std::to_string(i);
    }
    data.ood_sets.emplace_back(std::move(name), std::move(x));
  }
  return data;
}

SeedMetrics evaluate_model(const NetworkParams& params, LossKind kind, const PreparedData& data, std::uint64_t seed) {
  const LabeledDataset& test = data.splits.test;
  SeedMetrics m;
  m.seed = seed;
  const auto id = model_uncertainty(params, kind, test.features);

  std::vector<double> conf;
  std::vector<int> correct;
  std::vector<double> a0, epi;
  for (std::size_t r = 0; r < id.size(); ++r) {
    conf.push_back(id[r].confidence);
    correct.push_back(id[r].predicted == test.labels[r] ? 1 : 0);
    a0.push_back(id[r].alpha0);
    epi.push_back(id[r].epistemic);
  }
  m.test_accuracy = 100.0 * mean_of(std::vector<double>(correct.begin(), correct.end()));
  m.mean_alpha0_id = mean_of(a0);
  m.mean_epistemic_id = mean_of(epi);
  m.ece = 100.0 * ece(conf, correct);

  const ScoredBinary cs = confidence_scored(id, test.labels);
  const bool both = std::count(cs.labels.begin(), cs.labels.end(), 1) > 0 &&
                    std::count(cs.labels.begin(), cs.labels.end(), 0) > 0;
  if (both) {
    m.confidence_aupr = 100.0 * aupr(cs);
  } else {
    // Every prediction right (or wrong): ranking is vacuous.
    m.confidence_aupr = cs.labels.empty() || cs.labels[0] == 1 ? 100.0 : 0.0;
    warn("confidence AUPR undefined for seed " + std::to_string(seed) + "; all predictions share one outcome");
  }

  for (const auto& [name, x] : data.ood_sets) {
    const auto ood = model_uncertainty(params, kind, x);
    const ScoredBinary sb = ood_scored(id, ood);
    OodMetrics om;
    om.name = name;
    om.aupr = 100.0 * aupr(sb);
    om.auroc = 100.0 * auroc(sb);
    std::vector<double> oa0, oepi;
    for (const auto& u : ood) {
      oa0.push_back(u.alpha0);
      oepi.push_back(u.epistemic);
    }
    om.mean_alpha0 = mean_of(oa0);
    om.mean_epistemic = mean_of(oepi);
    m.ood.push_back(om);
  }
  return m;
}

EvalReport run_standard(const ExperimentConfig& cfg) {
  EvalReport r = run_protocol(cfg, "standard", [](const LabeledDataset& train_set, std::uint64_t) { return train_set; });
  write_report(cfg, r);
  return r;
}

EvalReport run_longtail(const ExperimentConfig& cfg, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ArgumentError("rho must lie in (0, 1]");
  EvalReport r = run_protocol(cfg, "longtail", [rho](const LabeledDataset& train_set, std::uint64_t seed) {
    LabeledDataset lt = long_tail_resample(train_set, rho, derive_seed(seed, kLongTailStream));
    const auto counts = lt.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (counts[k] < kMinTailSamples) {
        warn("long-tail class " + std::to_string(k) + " keeps only " + std::to_string(counts[k]) +
             " training samples");
      }
    }
    return lt;
  });
  write_report(cfg, r);
  return r;
}

EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const Checkpoint& ckpt) {
  cfg.validate();
  ckpt.params.validate();
  const auto start = std::chrono::steady_clock::now();
  const PreparedData data = prepare_data(cfg);
  if (ckpt.params.input_dim() != data.splits.test.dim() || ckpt.params.output_dim() != data.splits.test.num_classes) {
    throw ArgumentError("checkpoint shape does not match the configured dataset");
  }
  EvalReport report;
  report.experiment = "ood";
  report.loss_kind = to_string(ckpt.loss_kind);
  report.dataset = data.splits.test.provenance;
  report.per_seed.push_back(evaluate_model(ckpt.params, ckpt.loss_kind, data, ckpt.seed));
  const SeedMetrics& m = report.per_seed.front();
  report.summary.emplace_back("test_accuracy", summarize({m.test_accuracy}));
  report.summary.emplace_back("confidence_aupr", summarize({m.confidence_aupr}));
  report.summary.emplace_back("ece", summarize({m.ece}));
  for (const auto& o : m.ood) {
    report.summary.emplace_back("ood_aupr/" + o.name, summarize({o.aupr}));
    report.summary.emplace_back("ood_auroc/" + o.name, summarize({o.auroc}));
  }

  const auto id = model_uncertainty(ckpt.params, ckpt.loss_kind, data.splits.test.features);
  std::vector<double> conf, id_a0;
  std::vector<int> correct;
  for (std::size_t r = 0; r < id.size(); ++r) {
    conf.push_back(id[r].confidence);
    correct.push_back(id[r].predicted == data.splits.test.labels[r] ? 1 : 0);
    id_a0.push_back(id[r].alpha0);
  }
  report.reliability = reliability_bins(conf, correct, cfg.calibration_bins);
  if (ckpt.loss_kind == LossKind::dappr) {
    for (const auto& [name, x] : data.ood_sets) {
      std::vector<double> oa0;
      for (const auto& u : model_uncertainty(ckpt.params, ckpt.loss_kind, x)) oa0.push_back(u.alpha0);
      report.alpha0_histograms.push_back(emit_alpha0_histogram(id_a0, oa0, cfg.histogram_bins, name));
    }
  }
  report.generated_at = utc_timestamp();
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_report(cfg, report);
  return report;
}

ScalingCurve run_scaling(const ExperimentConfig& cfg, const std::vector<int>& sizes) {
  cfg.validate();
  if (sizes.empty()) throw ArgumentError("scaling needs at least one size");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw ArgumentError("scaling sizes must be positive");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ArgumentError("scaling sizes must be increasing");
  }
  const PreparedData data = prepare_data(cfg);
  const auto& pool = data.splits.train;
  if (static_cast<std::size_t>(sizes.back()) > pool.size()) {
    throw ArgumentError("scaling size " + std::to_string(sizes.back()) + " exceeds the " +
                        std::to_string(pool.size()) + "-row training pool");
  }
  ScalingCurve curve;
  for (int size : sizes) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
      const std::uint64_t seed = cfg.seeds[i];
      const LabeledDataset sub = stratified_subset(pool, static_cast<std::size_t>(size),
                                                   derive_seed(seed, kSubsetStream + static_cast<std::uint64_t>(size)));
      const TrainConfig tcfg = resolved_train_config(cfg, pool.dim(), pool.num_classes, seed);
      const TrainResult result = train_seed(tcfg, sub, data.splits.val, i);
      const auto id = model_uncertainty(result.params, tcfg.loss_kind, data.splits.test.features);
      std::vector<double> epi;
      for (const auto& u : id) epi.push_back(u.epistemic);
      curve.points.push_back({size, seed, mean_of(epi), 100.0 * accuracy(result.params, data.splits.test)});
    }
  }
  if (!cfg.output_dir.empty()) write_text(cfg.output_dir, "scaling.csv", curve.to_csv());
  return curve;
}

SweepCurve run_lambda_sweep(const ExperimentConfig& cfg, const std::vector<double>& lambdas) {
  cfg.validate();
  if (lambdas.empty()) throw ArgumentError("lambda sweep needs at least one value");
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ArgumentError("lambda values must be finite and non-negative");
  }
  const PreparedData data = prepare_data(cfg);
  SweepCurve curve;
  for (double lambda : lambdas) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
      const std::uint64_t seed = cfg.seeds[i];
      TrainConfig tcfg = resolved_train_config(cfg, data.splits.train.dim(), data.splits.train.num_classes, seed);
      tcfg.loss_cfg.lambda = lambda;
      const TrainResult result = train_seed(tcfg, data.splits.train, data.splits.val, i);
      const SeedMetrics m = evaluate_model(result.params, tcfg.loss_kind, data, seed);
      curve.points.push_back({lambda, seed, m.test_accuracy, m.mean_ood_aupr()});
    }
  }
  if (!cfg.output_dir.empty()) write_text(cfg.output_dir, "lambda_sweep.csv", curve.to_csv());
  return curve;
}

double empirical_risk(const NetworkParams& params, const LabeledDataset& ds) {
  const LossOutput lo = cross_entropy_loss(predict_logits(params, ds.features), ds.labels);
  return lo.value * static_cast<double>(ds.size());
}

ProbeTable run_probe(const ExperimentConfig& cfg, int n_probe_samples, int n_perturbations) {
  cfg.validate();
  if (n_probe_samples < 1 || n_perturbations < 1) throw ArgumentError("probe counts must be at least 1");
  const LabeledDataset ds = make_dataset(cfg.dataset);
  const std::uint64_t seed = cfg.seeds.front();
  if (static_cast<std::size_t>(cfg.probe.train_size) > ds.size()) {
    throw ArgumentError("probe train_size exceeds the dataset");
  }
  const LabeledDataset pool =
      stratified_subset(ds, static_cast<std::size_t>(cfg.probe.train_size), derive_seed(cfg.dataset.seed, kSubsetStream));

  std::vector<std::size_t> indices = cfg.probe.indices;
  if (indices.empty()) {
    if (static_cast<std::size_t>(n_probe_samples) > pool.size()) throw ArgumentError("more probe samples than rows");
    std::vector<std::size_t> all(pool.size());
    std::iota(all.begin(), all.end(), 0);
    Rng rng(derive_seed(seed, kProbeStream));
    rng.shuffle(std::span<std::size_t>(all));
    indices.assign(all.begin(), all.begin() + n_probe_samples);
  } else if (indices.size() > static_cast<std::size_t>(n_probe_samples)) {
    indices.resize(static_cast<std::size_t>(n_probe_samples));
  }
  for (std::size_t idx : indices) {
    if (idx >= pool.size()) {
      throw ArgumentError("probe sample index " + std::to_string(idx) + " out of range [0, " +
                          std::to_string(pool.size()) + ")");
    }
  }

  TrainConfig tcfg = resolved_train_config(cfg, pool.dim(), pool.num_classes, seed);
  tcfg.loss_kind = LossKind::cross_entropy;
  tcfg.early_stopping = false;
  const NetworkParams base = train_seed(tcfg, pool, pool, 0).params;

  ProbeTable table;
  for (std::size_t idx : indices) {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < pool.size(); ++r) {
      if (r != idx) keep.push_back(r);
    }
    const LabeledDataset rest = pool.subset(keep);
    const Eigen::VectorXd x = pool.features.row(static_cast<Eigen::Index>(idx)).transpose();
    const std::uint64_t order_seed = derive_seed(seed, kProbeStream + 1 + idx);

    Eigen::VectorXd y_true = Eigen::VectorXd::Zero(pool.num_classes);
    y_true[pool.labels[idx]] = 1.0;
    const double l_true =
        empirical_risk(fine_tune_forced(base, tcfg, rest, x, y_true, cfg.probe.epochs, order_seed), rest);

    Rng rng(derive_seed(order_seed, 0x50f7));
    double s = 0.0;
    for (int p = 0; p < n_perturbations; ++p) {
      const Eigen::VectorXd y_p = random_soft_label(pool.num_classes, rng);
      const double l_p = empirical_risk(fine_tune_forced(base, tcfg, rest, x, y_p, cfg.probe.epochs, order_seed), rest);
      s = std::max(s, std::abs(l_p - l_true));
    }
    table.rows.push_back({idx, l_true, s});
  }
  if (!cfg.output_dir.empty()) write_text(cfg.output_dir, "probe.csv", table.to_csv());
  return table;
}

}  // namespace dappr
