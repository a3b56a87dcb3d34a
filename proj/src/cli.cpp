#include "probout/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fmt/format.h>
#include <iostream>
#include <optional>

#include "probout/checkpoint.hpp"
#include "probout/config_io.hpp"
#include "probout/errors.hpp"
#include "probout/file_io.hpp"
#include "probout/inference.hpp"
#include "probout/preprocess.hpp"
#include "probout/probes.hpp"
#include "probout/training.hpp"

namespace probout {
namespace {

constexpr std::uint64_t kInitLabel = 0x696e6974;
constexpr std::uint64_t kEvalLabel = 0x6576616c;
constexpr std::uint64_t kCurveLabel = 0x63757276;
constexpr std::uint64_t kSampleLabel = 0x73616d70;

struct CommonOptions {
  std::string config_path;
  std::uint64_t seed = 1;
  std::vector<std::string> cifar;
  std::vector<std::string> cifar_test;
  unsigned threads = 1;
  std::string out = ".";
};

struct Splits {
  Dataset train;
  Dataset valid;
  Dataset test;
};

ExperimentConfig experiment(const CommonOptions& opts) {
  ExperimentConfig exp = opts.config_path.empty() ? ExperimentConfig{} : load_experiment(opts.config_path);
  exp.sgd.seed = opts.seed;
  exp.sgd.threads = std::max(1u, opts.threads);
  return exp;
}

/// Loads the data, splits it by index and applies preprocessing fitted on the
/// training split only.
Splits load_splits(const ExperimentConfig& exp, const CommonOptions& opts) {
  Splits s;
  if (!opts.cifar.empty()) {
    Dataset all = load_cifar10_binary(opts.cifar);
    auto [train, valid] = split_train_valid(all, std::min(exp.cifar_train_count, all.size()));
    s.train = std::move(train);
    s.valid = std::move(valid);
    s.test = opts.cifar_test.empty() ? s.valid : load_cifar10_binary(opts.cifar_test);
  } else {
    if (!opts.cifar_test.empty()) throw std::invalid_argument("--cifar-test needs --cifar");
    const Dataset all = make_synthetic(exp.synthetic.spec);
    const std::size_t n_train = exp.synthetic.train, n_valid = exp.synthetic.valid;
    if (n_train + n_valid > all.size()) {
      throw DatasetError(fmt::format("synthetic pool of {} examples cannot hold {} train + {} valid", all.size(),
                                     n_train, n_valid));
    }
    s.train = slice(all, 0, n_train);
    s.valid = slice(all, n_train, n_train + n_valid);
    s.test = n_train + n_valid < all.size() ? slice(all, n_train + n_valid, all.size()) : s.valid;
  }
  if (s.train.size() == 0) throw DatasetError("training split is empty");
  if (s.train.image_shape() != exp.model.input_shape()) {
    throw DimensionError(fmt::format("data images are {} but the model expects {}",
                                     shape_string(s.train.image_shape()), shape_string(exp.model.input_shape())));
  }
  PreprocessModel pre;
  pre.contrast = exp.preprocess.contrast;
  pre.contrast_scale = exp.preprocess.contrast_scale;
  pre.zca = exp.preprocess.zca;
  pre.whitening.eps = exp.preprocess.zca_eps;
  pre.fit(s.train);
  s.train = pre.apply(s.train);
  s.valid = pre.apply(s.valid);
  s.test = pre.apply(s.test);
  return s;
}

Parameters<float> fresh_parameters(const ModelConfig& config, std::uint64_t seed) {
  RngStream rng(derive_seed(seed, kInitLabel));
  return init_parameters<float>(config, rng);
}

std::string out_path(const CommonOptions& opts, const std::string& name) {
  return (std::filesystem::path(opts.out) / name).string();
}

/// Output files are written only after all work has succeeded.
void write_outputs(const CommonOptions& opts, const std::vector<std::pair<std::string, std::string>>& files) {
  std::filesystem::create_directories(opts.out);
  for (const auto& [name, contents] : files) write_file(out_path(opts, name), contents);
}

void write_checkpoint_output(const CommonOptions& opts, const std::string& name, const Checkpoint& ckpt) {
  std::filesystem::create_directories(opts.out);
  save_checkpoint(out_path(opts, name), ckpt);
}

std::optional<InferenceMode> parse_mode(const std::string& name) {
  if (name == "sample") return InferenceMode::SampleAverage;
  if (name == "max") return InferenceMode::MaxAtTest;
  if (name == "prob-weight") return InferenceMode::ProbWeightAtTest;
  return std::nullopt;
}

std::string mode_name(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::SampleAverage: return "sample";
    case InferenceMode::MaxAtTest: return "max";
    case InferenceMode::ProbWeightAtTest: return "prob-weight";
  }
  return "?";
}

const Dataset& pick_split(const Splits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "valid") return s.valid;
  return s.test;
}

// ---- subcommands -----------------------------------------------------------

struct TrainOptions {
  std::optional<int> epochs;
  std::string unit;
};

int run_train(const CommonOptions& opts, const TrainOptions& t) {
  ExperimentConfig exp = experiment(opts);
  if (t.epochs) exp.sgd.epochs_max = *t.epochs;
  if (t.unit == "maxout") exp.model = with_unit_type(exp.model, UnitType::Maxout);
  if (t.unit == "probout") exp.model = with_unit_type(exp.model, UnitType::Probout);
  const Splits data = load_splits(exp, opts);
  const LambdaSchedule schedule = schedule_from_config(exp.model, exp.sgd.epochs_max);
  const TrainResult result = train(exp.model, fresh_parameters(exp.model, opts.seed), data.train, data.valid,
                                   exp.sgd, schedule);
  for (const auto& row : result.history) {
    fmt::print("epoch {:3d}  loss {:.4f}  valid error {:.2f}%\n", row.epoch, row.train_loss, *row.valid_error);
  }
  fmt::print("best epoch {} with valid error {:.2f}%\n", result.best_epoch, result.best_valid_error);
  write_outputs(opts, {{"history.csv", history_csv(result.history)}});
  write_checkpoint_output(opts, "model.ckpt",
                          {result.config, result.params, static_cast<std::uint64_t>(result.best_epoch), opts.seed,
                           schedule});
  return 0;
}

int run_retrain_full(const CommonOptions& opts, const std::string& checkpoint_path, std::optional<int> epochs) {
  ExperimentConfig exp = experiment(opts);
  LambdaSchedule schedule = schedule_from_config(exp.model, exp.sgd.epochs_max);
  int n_epochs = epochs.value_or(0);
  if (!checkpoint_path.empty()) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    exp.model = ckpt.config;
    set_layer_lambdas(exp.model, ckpt.schedule.initial);
    schedule = ckpt.schedule;
    if (!epochs) n_epochs = static_cast<int>(ckpt.epoch);
  } else if (!epochs) {
    throw std::invalid_argument("retrain-full needs --epochs or --checkpoint");
  }
  const Splits data = load_splits(exp, opts);
  const Dataset full = concatenate(data.train, data.valid);
  const TrainResult result = retrain_full(exp.model, fresh_parameters(exp.model, opts.seed), full, n_epochs,
                                          exp.sgd, schedule);
  fmt::print("retrained {} epochs on {} examples\n", n_epochs, full.size());
  write_outputs(opts, {{"history_full.csv", history_csv(result.history)}});
  write_checkpoint_output(opts, "model_full.ckpt",
                          {result.config, result.params, static_cast<std::uint64_t>(n_epochs), opts.seed, schedule});
  return 0;
}

struct EvalOptions {
  std::string checkpoint;
  std::string mode = "all";
  int evaluations = 50;
  std::string split = "test";
};

int run_eval(const CommonOptions& opts, const EvalOptions& e) {
  std::vector<InferenceMode> modes;
  if (e.mode == "all") {
    modes = {InferenceMode::SampleAverage, InferenceMode::MaxAtTest, InferenceMode::ProbWeightAtTest};
  } else if (auto m = parse_mode(e.mode)) {
    modes = {*m};
  } else {
    throw ModeError("unknown inference mode '" + e.mode + "'");
  }
  const Checkpoint ckpt = load_checkpoint(e.checkpoint);
  ExperimentConfig exp = experiment(opts);
  exp.model = ckpt.config;
  const Splits data = load_splits(exp, opts);
  const Dataset& split = pick_split(data, e.split);
  const Parameters<float> halved = halve_weights(ckpt.config, ckpt.params);

  std::string csv = "mode,evaluations,error_percent\n";
  fmt::print("{:<12} {:>11} {:>8}\n", "mode", "evaluations", "error");
  for (InferenceMode mode : modes) {
    const int evals = mode == InferenceMode::SampleAverage ? e.evaluations : 1;
    const AveragingConfig cfg{evals, derive_seed(opts.seed, kEvalLabel), mode};
    const double err = classification_error(ckpt.config, halved, split, cfg, opts.threads);
    csv += fmt::format("{},{},{:.4f}\n", mode_name(mode), evals, err);
    fmt::print("{:<12} {:>11} {:>7.2f}%\n", mode_name(mode), evals, err);
  }
  write_outputs(opts, {{"eval.csv", csv}});
  return 0;
}

int run_averaging_curve(const CommonOptions& opts, const std::string& checkpoint_path,
                        const std::vector<int>& evaluations, int repeats, const std::string& split_name) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  ExperimentConfig exp = experiment(opts);
  exp.model = ckpt.config;
  const Splits data = load_splits(exp, opts);
  const auto rows = averaging_curve(ckpt.config, halve_weights(ckpt.config, ckpt.params),
                                    pick_split(data, split_name), evaluations, repeats,
                                    derive_seed(opts.seed, kCurveLabel), opts.threads);
  std::string csv = "evaluations,mean_error,std_error\n";
  for (const auto& r : rows) {
    csv += fmt::format("{},{:.4f},{:.4f}\n", r.evaluations, r.mean_error, r.std_error);
    fmt::print("E={:<4} mean {:.2f}%  std {:.2f}\n", r.evaluations, r.mean_error, r.std_error);
  }
  write_outputs(opts, {{"averaging_curve.csv", csv}});
  return 0;
}

struct ProbeOptions {
  std::string probout_checkpoint;
  std::string maxout_checkpoint;
  std::size_t images = 100;
  int max_shift = 15;
  double rotation_step = 10.0;
};

int run_probe(const CommonOptions& opts, const ProbeOptions& p) {
  std::vector<std::pair<std::string, Checkpoint>> models;
  if (!p.probout_checkpoint.empty()) models.emplace_back("probout", load_checkpoint(p.probout_checkpoint));
  if (!p.maxout_checkpoint.empty()) models.emplace_back("maxout", load_checkpoint(p.maxout_checkpoint));
  if (models.empty()) throw std::invalid_argument("probe-invariance needs --probout and/or --maxout");

  ExperimentConfig exp = experiment(opts);
  exp.model = models.front().second.config;
  const Splits data = load_splits(exp, opts);
  const std::size_t n = std::min(p.images, data.test.size());
  if (n == 0) throw DatasetError("no test images to probe");
  std::vector<Tensor> images;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    images.push_back(data.test.example(i));
    ids.push_back(i);
  }
  const std::vector<TransformSweep> sweeps{translation_sweep(p.max_shift), rotation_sweep(p.rotation_step)};

  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& [name, ckpt] : models) {
    std::vector<std::size_t> layers(ckpt.config.subspace_layer_count());
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l] = l;
    const auto rows =
        invariance_curve(ckpt.config, halve_weights(ckpt.config, ckpt.params), images, ids, sweeps, layers);
    files.emplace_back("invariance_" + name + ".csv", probe_csv(rows));
    fmt::print("{}: {} rows\n", name, rows.size());
  }
  write_outputs(opts, files);
  return 0;
}

int run_export_filters(const CommonOptions& opts, const std::string& checkpoint_path, std::size_t layer) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const FilterGrid grid = filter_grid(ckpt.config, ckpt.params, layer);
  const std::string name = "filters_" + layer_name(ckpt.config, layer) + (grid.image.channels == 3 ? ".ppm" : ".pgm");
  write_outputs(opts, {{name, encode_pnm(grid.image)}});
  fmt::print("wrote {} ({}x{})\n", out_path(opts, name), grid.image.width, grid.image.height);
  return 0;
}

int run_sample_check(const CommonOptions& opts, const std::vector<double>& z, double lambda, std::size_t draws,
                     bool dropout) {
  RngStream rng(derive_seed(opts.seed, kSampleLabel));
  const auto report = sampling_frequency_check(
      z, lambda, draws, rng, dropout ? ProboutMode::TrainSampleDropout : ProboutMode::TrainSample);
  fmt::print("max deviation {:.3f} sigma over {} draws: {}\n", report.max_deviation_sigma, report.draws,
             report.passed ? "within 4 sigma" : "OUTSIDE 4 sigma");
  write_outputs(opts, {{"sample_check.csv", sampling_report_csv(report)}});
  return 0;
}

struct GridOptions {
  std::size_t train_count = 500;
  std::size_t valid_count = 200;
  int epochs = 5;
};

int run_lambda_grid(const CommonOptions& opts, const GridOptions& g) {
  const ExperimentConfig exp = experiment(opts);
  const Splits data = load_splits(exp, opts);
  const Dataset train_set = slice(data.train, 0, std::min(g.train_count, data.train.size()));
  const Dataset valid_set = slice(data.valid, 0, std::min(g.valid_count, data.valid.size()));
  SgdConfig sgd = exp.sgd;
  sgd.epochs_max = g.epochs;
  const std::vector<double> base = layer_lambdas(exp.model);

  std::string csv = "layer,lambda,valid_error,best_epoch\n";
  for (std::size_t l = 0; l < base.size(); ++l) {
    if (exp.model.layers[l].unit_type != UnitType::Probout) continue;
    for (double lambda : kLambdaGrid) {
      ModelConfig model = exp.model;
      std::vector<double> lambdas = base;
      lambdas[l] = lambda;
      set_layer_lambdas(model, lambdas);
      const TrainResult r = train(model, fresh_parameters(model, opts.seed), train_set, valid_set, sgd,
                                  schedule_from_config(model, g.epochs));
      const std::string name = layer_name(model, l);
      csv += fmt::format("{},{:g},{:.4f},{}\n", name, lambda, r.best_valid_error, r.best_epoch);
      fmt::print("{:<6} lambda {:<4g} valid error {:6.2f}%\n", name, lambda, r.best_valid_error);
    }
  }
  write_outputs(opts, {{"lambda_grid.csv", csv}});
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Maxout and probout convolutional networks"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOptions opts;
  app.add_option("--config", opts.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", opts.seed, "Root seed")->envname("PROBOUT_SEED");
  app.add_option("--cifar", opts.cifar, "CIFAR-10 binary training batches (default: synthetic data)");
  app.add_option("--cifar-test", opts.cifar_test, "CIFAR-10 binary test batch");
  app.add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", opts.out, "Output directory");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train with early stopping on the validation split");
  train_cmd->add_option("--epochs", train_opts.epochs, "Maximum epochs");
  train_cmd->add_option("--unit", train_opts.unit, "Override the unit type of every subspace layer")
      ->check(CLI::IsMember({"maxout", "probout"}));

  std::string retrain_ckpt;
  std::optional<int> retrain_epochs;
  auto* retrain_cmd = app.add_subcommand("retrain-full", "Retrain on train+valid for a fixed number of epochs");
  retrain_cmd->add_option("--checkpoint", retrain_ckpt, "Checkpoint supplying config, schedule and epoch count");
  retrain_cmd->add_option("--epochs", retrain_epochs, "Epoch count");

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Classification error under one or all inference modes");
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint)->required();
  eval_cmd->add_option("--mode", eval_opts.mode)->check(CLI::IsMember({"sample", "max", "prob-weight", "all"}));
  eval_cmd->add_option("-E,--evaluations", eval_opts.evaluations, "Sampled evaluations to average")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--split", eval_opts.split)->check(CLI::IsMember({"train", "valid", "test"}));

  std::string curve_ckpt, curve_split = "test";
  std::vector<int> curve_evals{1, 5, 10, 20, 50};
  int curve_repeats = 10;
  auto* curve_cmd = app.add_subcommand("averaging-curve", "Error against the number of averaged evaluations");
  curve_cmd->add_option("--checkpoint", curve_ckpt)->required();
  curve_cmd->add_option("-E,--evaluations", curve_evals)->delimiter(',');
  curve_cmd->add_option("--repeats", curve_repeats)->check(CLI::PositiveNumber);
  curve_cmd->add_option("--split", curve_split)->check(CLI::IsMember({"train", "valid", "test"}));

  ProbeOptions probe_opts;
  auto* probe_cmd = app.add_subcommand("probe-invariance", "Feature distances under translation and rotation");
  probe_cmd->add_option("--probout", probe_opts.probout_checkpoint, "Probout-trained checkpoint");
  probe_cmd->add_option("--maxout", probe_opts.maxout_checkpoint, "Maxout-trained checkpoint");
  probe_cmd->add_option("--images", probe_opts.images)->check(CLI::PositiveNumber);
  probe_cmd->add_option("--max-shift", probe_opts.max_shift)->check(CLI::NonNegativeNumber);
  probe_cmd->add_option("--rotation-step", probe_opts.rotation_step)->check(CLI::PositiveNumber);

  std::string filters_ckpt;
  std::size_t filters_layer = 0;
  auto* filters_cmd = app.add_subcommand("export-filters", "Write a convolutional layer's filters as PGM/PPM");
  filters_cmd->add_option("--checkpoint", filters_ckpt)->required();
  filters_cmd->add_option("--layer", filters_layer, "Layer index (0-based)");

  std::vector<double> sample_z;
  double sample_lambda = 1.0;
  std::size_t sample_draws = 100000;
  bool sample_dropout = false;
  auto* sample_cmd = app.add_subcommand("sample-check", "Compare sampled selection frequencies with their expectation");
  sample_cmd->add_option("--z", sample_z, "Sub-unit activations")->delimiter(',')->required();
  sample_cmd->add_option("--lambda", sample_lambda)->check(CLI::PositiveNumber);
  sample_cmd->add_option("--draws", sample_draws);
  sample_cmd->add_flag("--dropout", sample_dropout, "Include the dropout outcome");

  GridOptions grid_opts;
  auto* grid_cmd = app.add_subcommand("lambda-grid", "Per-layer inverse-temperature sweep on a reduced split");
  grid_cmd->add_option("--train-count", grid_opts.train_count)->check(CLI::PositiveNumber);
  grid_cmd->add_option("--valid-count", grid_opts.valid_count)->check(CLI::PositiveNumber);
  grid_cmd->add_option("--epochs", grid_opts.epochs)->check(CLI::PositiveNumber);

  std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) return run_train(opts, train_opts);
    if (*retrain_cmd) return run_retrain_full(opts, retrain_ckpt, retrain_epochs);
    if (*eval_cmd) return run_eval(opts, eval_opts);
    if (*curve_cmd) return run_averaging_curve(opts, curve_ckpt, curve_evals, curve_repeats, curve_split);
    if (*probe_cmd) return run_probe(opts, probe_opts);
    if (*filters_cmd) return run_export_filters(opts, filters_ckpt, filters_layer);
    if (*sample_cmd) return run_sample_check(opts, sample_z, sample_lambda, sample_draws, sample_dropout);
    if (*grid_cmd) return run_lambda_grid(opts, grid_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int cli_main(int argc, char** argv) { return cli_main(std::vector<std::string>(argv, argv + argc)); }

}  // namespace probout
