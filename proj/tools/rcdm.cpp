// SPDX-License-Identifier: Apache-2.0
// rcdm: generate, clean, assess and evaluate univariate series.
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rcdm/checkpoint.hpp"
#include "rcdm/config.hpp"
#include "rcdm/errors.hpp"
#include "rcdm/outputs.hpp"
#include "rcdm/pipeline.hpp"
#include "rcdm/quality.hpp"
#include "rcdm/random.hpp"
#include "rcdm/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitNumeric = 4;

/// Options shared by every command that builds a RunConfig.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> set;
  std::vector<std::string> ablate;
  std::map<std::string, std::string> flags;  // dotted key -> value text

  void add(CLI::App* app) {
    app->add_option("--config", file, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--set", set, "override as key=value, e.g. model.context=24")->take_all();
    app->add_option("--ablate", ablate, "no-huber, no-conditional or no-quartile")->take_all();
  }

  /// Dedicated flag bound to a config key.
  template <class T>
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(flag, [this, key](const std::string& v) { flags[key] = v; }, help)
        ->type_name(std::is_same_v<T, std::string> ? "TEXT" : "NUMBER");
  }

  rcdm::RunConfig resolve() const {
    std::vector<std::string> assignments = set;
    for (const auto& [key, value] : flags) assignments.push_back(key + "=" + value);
    auto config = rcdm::load_run_config(file, assignments);
    for (const auto& a : ablate) rcdm::apply_ablation(config.pipeline.model, a);
    return config;
  }
};

void bind_common(CLI::App* app, ConfigArgs& args) {
  args.add(app);
  args.bind<std::uint64_t>(app, "--seed", "seed", "run seed");
  args.bind<std::size_t>(app, "--threads", "threads", "worker threads for sampling");
}

void bind_model(CLI::App* app, ConfigArgs& args) {
  args.bind<std::size_t>(app, "--context", "model.context", "context length C");
  args.bind<std::size_t>(app, "--steps", "model.steps", "diffusion steps T");
  args.bind<double>(app, "--beta-max", "model.beta_max", "largest noise coefficient");
  args.bind<std::size_t>(app, "--hidden", "model.denoiser_hidden", "denoiser width");
  args.bind<std::size_t>(app, "--epochs", "train.epochs_first", "epochs of the first training round");
  args.bind<std::size_t>(app, "--epochs-iteration", "train.epochs_iteration", "epochs of later rounds");
  args.bind<std::size_t>(app, "--samples", "pipeline.samples", "reverse-diffusion samples M per point");
  args.bind<double>(app, "--train-fraction", "pipeline.train_fraction", "chronological training share");
  args.bind<double>(app, "--threshold", "pipeline.threshold", "outlier probability threshold");
  args.bind<double>(app, "--k", "pipeline.k", "QES scaling factor");
}

fs::path default_run_dir() {
  if (const char* env = std::getenv("RCDM_RUN_DIR"); env && *env) return env;
  return "rcdm-run";
}

std::string header_for(const rcdm::RunConfig& config) {
  return rcdm::provenance_line(rcdm::config_hash(config), config.seed);
}

rcdm::TimeSeriesDataset load_input(const fs::path& path, const rcdm::RunConfig& config) {
  rcdm::LoadOptions options;
  options.min_rows = config.pipeline.model.context + 2;
  return rcdm::load_series(path, options);
}

json iteration_json(const rcdm::IterationRecord& it, const rcdm::Scaler& scaler) {
  const auto& a = it.assessment;
  return {{"iteration", it.iteration},
          {"lr0", it.lr0},
          {"epochs", it.history.size()},
          {"final_loss", it.history.empty() ? json(nullptr) : json(it.history.back().mean_loss)},
          {"sigma2", a.error.sigma2},
          {"sigma2_raw", a.error.sigma2 * scaler.spread * scaler.spread},
          {"flagged", a.scored ? json(a.flagged) : json(nullptr)},
          {"newly_flagged", it.newly_flagged},
          {"imputed", it.imputed.size()},
          {"qes", a.scored ? json(a.qes) : json(nullptr)},
          {"converged", it.converged}};
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  ConfigArgs config;
  std::string out;
};

int run_simulate(const SimulateArgs& args) {
  const auto config = args.config.resolve();
  const auto dataset = rcdm::generate(config.synth);
  rcdm::write_series(args.out, dataset, header_for(config));
  std::cout << "wrote " << dataset.size() << " points, " << rcdm::outlier_count(config.synth) << " labeled outliers to "
            << args.out << '\n';
  return kExitOk;
}

struct CleanArgs {
  ConfigArgs config;
  std::string input;
  std::string run_dir;
  bool checkpoints = false;
  bool quiet = false;
};

int run_clean(const CleanArgs& args) {
  const auto config = args.config.resolve();
  const auto dataset = load_input(args.input, config);
  const fs::path dir = args.run_dir.empty() ? default_run_dir() : fs::path(args.run_dir);
  fs::create_directories(dir);
  const auto header = header_for(config);

  auto progress = [&](const rcdm::IterationRecord& it, const rcdm::CleaningState& state) {
    if (!args.quiet) {
      std::cerr << "iteration " << it.iteration << ": sigma2=" << it.assessment.error.sigma2;
      if (it.converged) {
        std::cerr << " (converged)\n";
      } else {
        std::cerr << " flagged=" << it.assessment.flagged << " new=" << it.newly_flagged << " qes=" << it.assessment.qes
                  << '\n';
      }
    }
    if (args.checkpoints) {
      const rcdm::Checkpoint c{config.pipeline.model, state.params, state.scaler, config.seed, it.iteration,
                               rcdm::model_hash(config.pipeline.model)};
      rcdm::save_checkpoint(dir / ("model_iter" + std::to_string(it.iteration) + ".json"), c);
    }
  };
  const auto result = rcdm::run_cleaning(dataset, config.pipeline, progress);

  const auto& last = result.iterations.back();
  rcdm::write_cleaned(dir / "cleaned.csv", result, header);
  rcdm::write_low_quality(dir / "low_quality.csv", result, header);
  rcdm::write_qes(dir / "qes.csv", result, header);
  rcdm::write_loss_history(dir / "loss_history.csv", result, header);
  rcdm::write_predictions(dir / "predictions.csv", result.cleaned, result.scaler, last.assessment, header);
  rcdm::write_predictions(dir / "predictions_initial.csv", dataset, result.scaler,
                          result.iterations.front().assessment, header);
  rcdm::Checkpoint ckpt{config.pipeline.model, result.params, result.scaler, config.seed, last.iteration,
                        rcdm::model_hash(config.pipeline.model)};
  rcdm::save_checkpoint(dir / "model.json", ckpt);

  json report;
  report["format"] = "rcdm-report";
  report["config_hash"] = rcdm::config_hash(config);
  report["seed"] = config.seed;
  report["config"] = rcdm::to_json(config);
  report["input"] = fs::path(args.input).filename().string();
  report["converged"] = result.converged;
  report["iterations_used"] = result.iterations_used();
  report["iterations"] = json::array();
  for (const auto& it : result.iterations) report["iterations"].push_back(iteration_json(it, result.scaler));
  report["qes"] = result.qes_history();
  report["metrics"] = rcdm::cleaning_metrics(dataset, result, config.pipeline);
  report["points"] = rcdm::point_records(result.cleaned, result.scaler, last.assessment);
  rcdm::write_json(dir / "report.json", report);

  std::cout << "iterations " << result.iterations_used() << (result.converged ? " (converged)" : " (not converged)")
            << ", low-quality points " << result.low_quality.size() << ", final QES " << result.last_scored().assessment.qes << '\n';
  if (report["metrics"].contains("detection")) {
    const auto& d = report["metrics"]["detection"];
    std::cout << "precision " << d["precision"].get<double>() << " recall " << d["recall"].get<double>() << " F1 "
              << d["f1"].get<double>() << '\n';
  }
  std::cout << "outputs in " << dir.string() << '\n';
  return result.converged ? kExitOk : kExitNotConverged;
}

struct TrainArgs {
  ConfigArgs config;
  std::string input;
  std::string out;
};

int run_train(const TrainArgs& args) {
  const auto config = args.config.resolve();
  const auto dataset = load_input(args.input, config);
  auto state = rcdm::start_cleaning(dataset, config.pipeline);
  const auto schedule = rcdm::make_schedule(config.pipeline.model);
  const auto table = rcdm::build_feature_table(state.dataset, state.scaler);
  const auto& tc = config.pipeline.train;
  auto trained = rcdm::train(state.dataset, table, config.pipeline.model, tc, schedule, state.params, tc.epochs_first,
                             tc.lr0, rcdm::derive_seed(config.seed, rcdm::Stream::kTrain, 0));
  rcdm::Checkpoint ckpt{config.pipeline.model, trained.params, state.scaler, config.seed, 0,
                        rcdm::model_hash(config.pipeline.model)};
  rcdm::save_checkpoint(args.out, ckpt);
  std::cout << rcdm::provenance_line(rcdm::config_hash(config), config.seed) << '\n' << "epoch,lr,mean_loss\n";
  for (const auto& e : trained.history) {
    std::cout << e.epoch << ',' << rcdm::format_double(e.lr) << ',' << rcdm::format_double(e.mean_loss) << '\n';
  }
  return kExitOk;
}

struct AssessArgs {
  ConfigArgs config;
  std::string input;
  std::string checkpoint;
  std::string out;
};

int run_assess(const AssessArgs& args) {
  const auto config = args.config.resolve();
  if (!fs::exists(args.checkpoint)) throw rcdm::ValidationError("checkpoint not found: " + args.checkpoint);
  const auto ckpt = rcdm::load_checkpoint(args.checkpoint);
  if (ckpt.config_hash != rcdm::model_hash(config.pipeline.model) ||
      rcdm::model_hash(ckpt.model) != ckpt.config_hash) {
    throw rcdm::ValidationError("checkpoint model hash " + ckpt.config_hash +
                                " does not match the configured model " + rcdm::model_hash(config.pipeline.model));
  }
  auto dataset = load_input(args.input, config);
  rcdm::set_train_fraction(dataset, config.pipeline.train_fraction);
  const auto a = rcdm::assess(dataset, ckpt.scaler, ckpt.params, config.pipeline);

  json report;
  report["format"] = "rcdm-assessment";
  report["config_hash"] = rcdm::config_hash(config);
  report["seed"] = config.seed;
  report["checkpoint_iteration"] = ckpt.iteration;
  report["qes"] = a.qes;
  report["flagged"] = a.flagged;
  report["sigma2"] = a.error.sigma2;
  report["sigma2_raw"] = a.error.sigma2 * ckpt.scaler.spread * ckpt.scaler.spread;
  report["points"] = rcdm::point_records(dataset, ckpt.scaler, a);
  const fs::path out = args.out.empty() ? default_run_dir() / "assessment.json" : fs::path(args.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  rcdm::write_json(out, report);
  std::cout << "QES " << a.qes << ", flagged " << a.flagged << " of " << a.scores.size() << " points\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Predicted values and flags keyed by timestamp, read from any rcdm output
/// or series file.
struct PredTable {
  std::map<std::int64_t, double> value;
  std::map<std::int64_t, bool> flag;
  bool has_flags = false;
};

PredTable read_predictions(const fs::path& path, double threshold) {
  const auto t = rcdm::read_table(path);
  if (t.rows.empty()) throw rcdm::ValidationError("'" + path.string() + "' has no data rows");
  const auto ts = t.column("timestamp");
  if (!ts) throw rcdm::ValidationError("'" + path.string() + "' has no timestamp column");
  auto vcol = t.column("mu_raw");
  if (!vcol) vcol = t.column("value");
  if (!vcol) throw rcdm::ValidationError("'" + path.string() + "' has neither mu_raw nor value column");
  const auto flagged = t.column("flagged");
  const auto imputed = t.column("imputed");
  const auto prob = t.column("outlier_probability");
  PredTable out;
  out.has_flags = flagged || imputed || prob;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto stamp = rcdm::parse_timestamp(row[*ts]);
    if (out.value.contains(stamp)) throw rcdm::ValidationError("duplicate timestamp in '" + path.string() + "'");
    out.value[stamp] = rcdm::parse_number(row[*vcol], r + 1);
    bool f = false;
    if (flagged) f = f || rcdm::parse_number(row[*flagged], r + 1) != 0.0;
    if (imputed) f = f || rcdm::parse_number(row[*imputed], r + 1) != 0.0;
    if (prob && !row[*prob].empty()) f = f || rcdm::classify(rcdm::parse_number(row[*prob], r + 1), threshold);
    out.flag[stamp] = f;
  }
  return out;
}

struct MetricsArgs {
  std::string pred;
  std::string truth;
  std::string before;
  std::string truth_column = "value";
  double threshold = 0.5;
  double from_fraction = 0.0;
  bool json_out = false;
};

json metrics_row(const PredTable& pred, const rcdm::TimeSeriesDataset& truth, const std::vector<double>& target,
                 std::size_t first) {
  std::vector<double> y, yhat;
  std::vector<bool> flags, labels;
  std::set<std::int64_t> known(truth.timestamps.begin(), truth.timestamps.end());
  for (const auto& [stamp, v] : pred.value) {
    if (!known.contains(stamp)) {
      throw rcdm::ValidationError("prediction timestamp " + rcdm::format_timestamp(stamp, truth.timestamp_format) +
                                  " is not in the truth file");
    }
  }
  for (std::size_t i = first; i < truth.size(); ++i) {
    const auto it = pred.value.find(truth.timestamps[i]);
    if (it == pred.value.end()) continue;
    const bool outlier = truth.labels && (*truth.labels)[i] != 0;
    if (truth.labels && pred.has_flags) {
      flags.push_back(pred.flag.at(truth.timestamps[i]));
      labels.push_back(outlier);
    }
    if (outlier) continue;
    y.push_back(target[i]);
    yhat.push_back(it->second);
  }
  if (y.empty()) throw rcdm::ValidationError("no aligned points between prediction and truth files");
  json row;
  row["points"] = y.size();
  double mse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) mse += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  row["mse"] = mse / static_cast<double>(y.size());
  try {
    row["lmae"] = rcdm::mse_lmae(y, yhat).lmae;
  } catch (const rcdm::ValidationError& e) {
    row["lmae"] = nullptr;
    row["lmae_error"] = e.what();
  }
  if (!flags.empty()) {
    const auto c = rcdm::precision_recall_f1(flags, labels);
    row["precision"] = c.precision;
    row["recall"] = c.recall;
    row["f1"] = c.f1;
    if (c.precision_undefined) row["precision_undefined"] = true;
    if (c.recall_undefined) row["recall_undefined"] = true;
  }
  return row;
}

int run_metrics(const MetricsArgs& args) {
  const auto truth = rcdm::load_series(args.truth);
  const std::vector<double>* target = &truth.values;
  if (args.truth_column == "clean") {
    if (!truth.clean) throw rcdm::ValidationError("truth file has no clean column");
    target = &*truth.clean;
  } else if (args.truth_column != "value") {
    throw rcdm::ValidationError("--truth-column must be value or clean");
  }
  const auto first = static_cast<std::size_t>(std::floor(args.from_fraction * static_cast<double>(truth.size())));
  std::vector<std::pair<std::string, json>> rows;
  if (!args.before.empty()) {
    rows.emplace_back("before", metrics_row(read_predictions(args.before, args.threshold), truth, *target, first));
  }
  rows.emplace_back(args.before.empty() ? "result" : "after",
                    metrics_row(read_predictions(args.pred, args.threshold), truth, *target, first));
  if (args.json_out) {
    json j;
    for (const auto& [name, row] : rows) j[name] = row;
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  }
  std::cout << "row,points,precision,recall,f1,mse,lmae\n";
  auto field = [](const json& row, const char* key) {
    if (!row.contains(key) || row[key].is_null()) return std::string("");
    return rcdm::format_double(row[key].get<double>());
  };
  for (const auto& [name, row] : rows) {
    std::cout << name << ',' << row["points"].get<std::size_t>() << ',' << field(row, "precision") << ','
              << field(row, "recall") << ',' << field(row, "f1") << ',' << field(row, "mse") << ','
              << field(row, "lmae") << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outlier-resistant conditional diffusion model for univariate time series"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate a labeled synthetic series");
  bind_common(simulate, sim.config);
  simulate->add_option("--out,-o", sim.out, "output series file")->required();
  sim.config.bind<std::size_t>(simulate, "--length", "synth.length", "number of points");
  sim.config.bind<double>(simulate, "--rate", "synth.contamination_rate", "fraction of outlier points");
  sim.config.bind<double>(simulate, "--noise", "synth.noise_std", "Gaussian noise std");
  sim.config.bind<std::int64_t>(simulate, "--interval", "synth.interval", "seconds between points");

  CleanArgs cl;
  auto* clean = app.add_subcommand("clean", "iteratively detect and impute outliers");
  bind_common(clean, cl.config);
  bind_model(clean, cl.config);
  clean->add_option("--input,-i", cl.input, "input series file")->required()->check(CLI::ExistingFile);
  clean->add_option("--run-dir,-o", cl.run_dir, "output directory (default $RCDM_RUN_DIR or ./rcdm-run)");
  cl.config.bind<std::size_t>(clean, "--max-iterations", "pipeline.max_iterations", "iteration cap");
  cl.config.bind<double>(clean, "--tau", "pipeline.tau", "relative convergence tolerance");
  clean->add_flag("--checkpoints", cl.checkpoints, "write a checkpoint after every iteration");
  clean->add_flag("--quiet,-q", cl.quiet, "no per-iteration progress");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train the first-round model and save a checkpoint");
  bind_common(train, tr.config);
  bind_model(train, tr.config);
  train->add_option("--input,-i", tr.input, "input series file")->required()->check(CLI::ExistingFile);
  train->add_option("--out,-o", tr.out, "checkpoint file")->required();

  AssessArgs as;
  auto* assess = app.add_subcommand("assess", "score every point with a trained checkpoint, no imputation");
  bind_common(assess, as.config);
  bind_model(assess, as.config);
  assess->add_option("--input,-i", as.input, "input series file")->required()->check(CLI::ExistingFile);
  assess->add_option("--checkpoint,-c", as.checkpoint, "checkpoint file")->required();
  assess->add_option("--out,-o", as.out, "assessment JSON (default <run dir>/assessment.json)");

  MetricsArgs me;
  auto* metrics = app.add_subcommand("metrics", "precision, recall, F1, MSE and LMAE against a truth file");
  metrics->add_option("--pred,-p", me.pred, "predictions, cleaned series or any series file")
      ->required()
      ->check(CLI::ExistingFile);
  metrics->add_option("--truth,-t", me.truth, "truth series, labels optional")->required()->check(CLI::ExistingFile);
  metrics->add_option("--before,-b", me.before, "second prediction file reported as the 'before' row")
      ->check(CLI::ExistingFile);
  metrics->add_option("--truth-column", me.truth_column, "value or clean");
  metrics->add_option("--threshold", me.threshold, "probability threshold for files with outlier_probability");
  metrics->add_option("--from-fraction", me.from_fraction, "evaluate only points after this share of the truth file")
      ->check(CLI::Range(0.0, 1.0));
  metrics->add_flag("--json", me.json_out, "print JSON instead of CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*clean) return run_clean(cl);
    if (*train) return run_train(tr);
    if (*assess) return run_assess(as);
    if (*metrics) return run_metrics(me);
  } catch (const rcdm::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const rcdm::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}
