// Command-line front end: train, eval, seed-study, dump-importance, emit-plotdata.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sgboost/checkpoint.hpp"
#include "sgboost/error.hpp"
#include "sgboost/harness.hpp"

namespace fs = std::filesystem;
using namespace sgboost;

namespace {

constexpr const char* kOutputRootEnv = "SGBOOST_OUTPUT_ROOT";

struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App& cmd, ConfigOptions& opts) {
  cmd.add_option("--config", opts.file, "key=value config file")->check(CLI::ExistingFile);
  for (const auto& [key, value] : config_entries(RunConfig{})) {
    cmd.add_option("--" + key, opts.overrides[key], "default: " + value);
  }
}

RunConfig resolve_config(const ConfigOptions& opts) {
  RunConfig config = opts.file.empty() ? RunConfig{} : load_config(opts.file);
  for (const auto& [key, value] : opts.overrides) {
    if (!value.empty()) config.set(key, value);
  }
  config.validate();
  return config;
}

fs::path output_root(const std::string& out) {
  const fs::path p(out);
  const char* root = std::getenv(kOutputRootEnv);
  if (root && *root && p.is_relative()) return fs::path(root) / p;
  return p;
}

void write_config(const RunConfig& config, const fs::path& path) {
  std::ofstream out(path);
  for (const auto& [key, value] : config_entries(config)) out << key << '=' << value << '\n';
}

nlohmann::json summary_json(const MetricsRecord& m) {
  nlohmann::json j;
  j["name"] = m.name;
  j["method"] = to_string(m.method);
  j["basic_test_accuracy"] = m.basic_test_accuracy;
  j["final_accuracy"] = m.final_accuracy;
  j["total_seconds"] = m.total_seconds;
  j["warmup_epochs"] = m.warmup_epochs;
  j["total_epochs"] = m.total_epochs;
  j["rounds"] = nlohmann::json::array();
  for (const auto& r : m.rounds) {
    j["rounds"].push_back({{"round", r.round},
                           {"seconds", r.seconds},
                           {"train_risk", r.train_risk},
                           {"train_accuracy", r.train_accuracy},
                           {"test_accuracy", r.test_accuracy},
                           {"alpha", r.alpha},
                           {"pixels", r.pixels}});
  }
  return j;
}

void print_rounds(const MetricsRecord& m) {
  std::cout << m.name << ": basic test accuracy " << m.basic_test_accuracy << '\n';
  for (const auto& r : m.rounds) {
    std::cout << "  round " << r.round << "  risk " << r.train_risk << "  train " << r.train_accuracy << "  test "
              << r.test_accuracy << "  alpha " << r.alpha << "  pixels " << r.pixels << "  t " << r.seconds << "s\n";
  }
}

void save_run(const RunConfig& config, const ExperimentResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  write_config(config, dir / "config.txt");
  write_run_csv(result.metrics, dir / "metrics.csv");
  save_checkpoint(result.ensemble, dir / "checkpoint.sgbc");
  if (!result.importance.values().empty()) {
    write_importance_csv(result.importance, dir / "importance.csv");
    write_importance_pgm(result.importance, dir / "importance.pgm");
  }
  std::ofstream(dir / "summary.json") << summary_json(result.metrics).dump(2) << '\n';
}

int cmd_train(const ConfigOptions& opts) {
  const RunConfig config = resolve_config(opts);
  const ExperimentResult result = run_experiment(config);
  const fs::path dir = output_root(config.out_dir) / config.run_name();
  save_run(config, result, dir);
  print_rounds(result.metrics);
  std::cout << "final accuracy " << result.metrics.final_accuracy << "  -> " << dir.string() << '\n';
  return 0;
}

int cmd_eval(const ConfigOptions& opts, const std::string& checkpoint, bool json) {
  const RunConfig config = resolve_config(opts);
  const BoostEnsemble ensemble = load_checkpoint(checkpoint);
  const PreparedData data = prepare_data(config.data);
  if (data.test.sample_shape() != ensemble.geometry()) {
    throw ConfigError("dataset geometry does not match the checkpoint");
  }
  const Tensor scores = ensemble_predict(ensemble, data.test.inputs);
  const double acc = accuracy(scores, data.test.labels);
  const double r = risk(scores, data.test.labels);
  if (json) {
    nlohmann::json j{{"checkpoint", checkpoint},
                     {"samples", data.test.size()},
                     {"stages", ensemble.stages.size()},
                     {"test_accuracy", acc},
                     {"test_risk", r}};
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "samples " << data.test.size() << "  stages " << ensemble.stages.size() << "  test accuracy " << acc
              << "  test risk " << r << '\n';
  }
  return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      seeds.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + part + "'");
    }
  }
  return seeds;
}

int cmd_seed_study(const ConfigOptions& opts, const std::string& seed_list) {
  const RunConfig config = resolve_config(opts);
  const auto seeds = parse_seeds(seed_list);
  if (seeds.size() < 2) throw ConfigError("seed study needs at least two seeds");
  const PreparedData data = prepare_data(config.data);
  const SeedStudyReport report = seed_study(config, seeds, data.train, data.test);
  const fs::path dir = output_root(config.out_dir) / (to_string(config.method) + "-seed-study");
  fs::create_directories(dir);
  for (const auto& r : report.records) write_run_csv(r, dir / (r.name + ".csv"));
  write_seed_study_csv(report, dir / "seed_study.csv");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    std::cout << "seed " << seeds[i] << "  final accuracy " << report.final_accuracies[i] << '\n';
  }
  std::cout << "mean " << report.mean << "  std " << report.stddev << "  (std x 1e3 = " << report.stddev * 1e3
            << ")  -> " << dir.string() << '\n';
  return 0;
}

int cmd_dump_importance(const ConfigOptions& opts, const std::string& checkpoint, const std::string& out_prefix) {
  const RunConfig config = resolve_config(opts);
  const BoostEnsemble ensemble = load_checkpoint(checkpoint);
  const PreparedData data = prepare_data(config.data);
  if (data.train.sample_shape() != ensemble.geometry()) {
    throw ConfigError("dataset geometry does not match the checkpoint");
  }
  const auto& g = ensemble.geometry();
  ImportanceMap map(g[1], g[2]);
  const SubgridMask active =
      ensemble.stages.empty() ? SubgridMask::full(g[1], g[2]) : ensemble.stages.back().mask;
  const BoostWeights weights =
      compute_boost_weights(ensemble_predict(ensemble, data.train.inputs), data.train.labels);
  update_importance(map, build_probe(ensemble.last_learner(), ensemble.basic), data.train.inputs, weights, active);
  const fs::path prefix = output_root(out_prefix);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  write_importance_csv(map, prefix.string() + ".csv");
  write_importance_pgm(map, prefix.string() + ".pgm");
  const SubgridMask next = select_subgrid(map, config.keep_rows, config.keep_cols);
  std::cout << "importance map " << g[1] << "x" << g[2] << " -> " << prefix.string() << ".{csv,pgm}; next subgrid "
            << next.rows.size() << "x" << next.cols.size() << " = " << next.pixel_count() << " pixels\n";
  return 0;
}

int cmd_emit_plotdata(const std::vector<std::string>& runs, const std::string& baseline, const std::string& out) {
  std::vector<MetricsRecord> records;
  for (const auto& run : runs) {
    fs::path p(run);
    MetricsRecord r;
    if (fs::is_directory(p)) {
      r.name = p.filename().string();
      if (r.name.empty()) r.name = p.parent_path().filename().string();
      p /= "metrics.csv";
    } else {
      r.name = p.stem().string();
    }
    if (!fs::exists(p)) throw ConfigError("no metrics at " + p.string());
    r.rounds = read_run_csv(p);
    if (!r.rounds.empty()) r.final_accuracy = r.rounds.back().test_accuracy;
    records.push_back(std::move(r));
  }
  const fs::path dir = output_root(out);
  emit_plotdata(records, dir, baseline);
  std::cout << records.size() << " runs -> " << (dir / "comparison.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sgboost: boosted CNN ensembles with dynamic pixel subgrids"};
  app.require_subcommand(1);

  ConfigOptions train_opts, eval_opts, study_opts, imp_opts;
  auto* train = app.add_subcommand("train", "run one experiment and save metrics and checkpoint");
  add_config_options(*train, train_opts);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_config_options(*eval, eval_opts);
  std::string eval_ckpt;
  bool eval_json = false;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_flag("--json", eval_json, "print a JSON summary");

  auto* study = app.add_subcommand("seed-study", "repeat one config over several seeds");
  add_config_options(*study, study_opts);
  std::string seed_list = "0,1,2";
  study->add_option("--seeds", seed_list, "comma-separated seeds")->capture_default_str();

  auto* imp = app.add_subcommand("dump-importance", "recompute the importance map of a checkpoint");
  add_config_options(*imp, imp_opts);
  std::string imp_ckpt, imp_out = "importance";
  imp->add_option("--checkpoint", imp_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  imp->add_option("--prefix", imp_out, "output path prefix (.csv and .pgm are appended)")->capture_default_str();

  auto* plot = app.add_subcommand("emit-plotdata", "write per-run and comparison CSVs");
  std::vector<std::string> runs;
  std::string baseline, plot_out = "plotdata";
  plot->add_option("--runs", runs, "run directories or metrics CSV files")->required();
  plot->add_option("--baseline", baseline, "name of the baseline run")->required();
  plot->add_option("--out", plot_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train) return cmd_train(train_opts);
    if (*eval) return cmd_eval(eval_opts, eval_ckpt, eval_json);
    if (*study) return cmd_seed_study(study_opts, seed_list);
    if (*imp) return cmd_dump_importance(imp_opts, imp_ckpt, imp_out);
    if (*plot) return cmd_emit_plotdata(runs, baseline, plot_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
