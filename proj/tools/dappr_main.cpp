// dappr: train, evaluate and verify DAPPr second-order classifiers.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dappr/config.hpp"
#include "dappr/error.hpp"
#include "dappr/experiments.hpp"
#include "dappr/verify.hpp"

namespace {

constexpr int kExitArgument = 1;
constexpr int kExitVerify = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> lambda;
  std::optional<std::string> schedule;
  std::optional<double> eps;
  std::string checkpoint;
  std::optional<double> rho;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "run a single seed instead of the configured list");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--lambda", o.lambda, "spurious-evidence weight");
  cmd->add_option("--schedule", o.schedule, "lambda schedule")->check(CLI::IsMember({"constant", "warmup", "linear"}));
  cmd->add_option("--eps", o.eps, "maximiser smoothing constant");
}

dappr::ExperimentConfig resolve(const Overrides& o) {
  dappr::ExperimentConfig cfg = o.config.empty() ? dappr::ExperimentConfig{} : dappr::load_config(o.config);
  if (o.seed) cfg.seeds = {*o.seed};
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.lambda) cfg.train.loss_cfg.lambda = *o.lambda;
  if (o.schedule) cfg.train.loss_cfg.schedule = dappr::parse_lambda_schedule(*o.schedule);
  if (o.eps) cfg.train.loss_cfg.eps = *o.eps;
  if (o.rho) cfg.rho = *o.rho;
  cfg.validate();
  return cfg;
}

void print_summary(const dappr::EvalReport& r) {
  for (const auto& [name, s] : r.summary) {
    std::printf("%-28s %8.3f", name.c_str(), s.mean);
    if (s.std) std::printf(" +- %.3f", *s.std);
    std::printf("\n");
  }
}

int cmd_train(const Overrides& o) {
  auto cfg = resolve(o);
  const auto data = dappr::prepare_data(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  const auto tcfg = dappr::resolved_train_config(cfg, data.splits.train.dim(), data.splits.train.num_classes, seed);
  const auto result = dappr::train(tcfg, data.splits.train, data.splits.val);
  const std::string out = cfg.output_dir.empty() ? "." : cfg.output_dir;
  dappr::save_checkpoint({result.params, seed, tcfg.loss_kind}, std::filesystem::path(out) / "checkpoint.json");
  dappr::write_text(out, "history.csv", result.history.to_csv());
  std::printf("trained %s seed %llu: test accuracy %.3f, checkpoint in %s/checkpoint.json\n",
              dappr::to_string(tcfg.loss_kind).c_str(), static_cast<unsigned long long>(seed),
              100.0 * dappr::accuracy(result.params, data.splits.test), out.c_str());
  return 0;
}

int cmd_ood(const Overrides& o) {
  auto cfg = resolve(o);
  std::string path = o.checkpoint;
  if (path.empty()) path = (std::filesystem::path(cfg.output_dir.empty() ? "." : cfg.output_dir) / "checkpoint.json").string();
  if (cfg.output_dir.empty()) cfg.output_dir = ".";
  print_summary(dappr::evaluate_checkpoint(cfg, dappr::load_checkpoint(path)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DAPPr second-order classifiers: training, evaluation and verification"};
  app.require_subcommand(1);
  Overrides o;

  auto* train = app.add_subcommand("train", "train one model and save checkpoint.json");
  auto* eval = app.add_subcommand("eval", "standard protocol over all seeds; writes report.json");
  auto* ood = app.add_subcommand("ood", "evaluate a saved checkpoint on the test split and OOD sets");
  auto* scaling = app.add_subcommand("scaling", "epistemic uncertainty against training-set size");
  auto* longtail = app.add_subcommand("longtail", "train on a long-tailed resample of the train split");
  auto* sweep = app.add_subcommand("sweep", "accuracy and OOD AUPR for each lambda");
  auto* probe = app.add_subcommand("probe", "leave-one-out loss deviation probe");
  auto* verify = app.add_subcommand("verify", "run the oracle suite");
  for (auto* c : {train, eval, ood, scaling, longtail, sweep, probe}) add_common(c, o);
  ood->add_option("--checkpoint", o.checkpoint, "checkpoint path (default <out>/checkpoint.json)");
  longtail->add_option("--rho", o.rho, "imbalance factor in (0, 1]");
  std::uint64_t verify_seed = 20240601;
  verify->add_option("--seed", verify_seed, "seed for the random oracle instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitArgument;
  }

  try {
    if (*train) return cmd_train(o);
    if (*ood) return cmd_ood(o);
    if (*eval) {
      print_summary(dappr::run_standard(resolve(o)));
      return 0;
    }
    if (*longtail) {
      const auto cfg = resolve(o);
      print_summary(dappr::run_longtail(cfg, cfg.rho));
      return 0;
    }
    if (*scaling) {
      const auto cfg = resolve(o);
      const auto curve = dappr::run_scaling(cfg, cfg.sizes);
      std::cout << curve.to_csv();
      return 0;
    }
    if (*sweep) {
      const auto cfg = resolve(o);
      const auto curve = dappr::run_lambda_sweep(cfg, cfg.lambdas);
      std::cout << curve.to_csv();
      return 0;
    }
    if (*probe) {
      const auto cfg = resolve(o);
      const auto table = dappr::run_probe(cfg, cfg.probe.samples, cfg.probe.perturbations);
      std::cout << table.to_csv();
      std::printf("median S_x / L_true = %.6g\n", table.median_ratio());
      return 0;
    }
    if (*verify) {
      const auto report = dappr::run_verify(verify_seed);
      std::cout << report.to_text();
      return report.all_passed() ? 0 : kExitVerify;
    }
  } catch (const dappr::ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return kExitArgument;
  } catch (const dappr::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitArgument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitArgument;
  }
  return 0;
}
