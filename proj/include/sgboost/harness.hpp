#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sgboost/boosting.hpp"
#include "sgboost/data.hpp"
#include "sgboost/subgrid.hpp"

namespace sgboost {

enum class Method { boostcnn, subgrid_boostcnn, ecnn, subgrid_ecnn, single_cnn };

std::string to_string(Method method);
Method parse_method(const std::string& text);
std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

struct DatasetSpec {
  std::string kind = "synthetic";  // synthetic | cifar10 | idx
  std::string path;                // directory holding the dataset files
  std::size_t train_count = 2000;
  std::size_t test_count = 500;
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t classes = 4;
  double difficulty = 0.5;
  std::uint64_t seed = 1;
  bool normalize = true;
};

struct RunConfig {
  Method method = Method::subgrid_boostcnn;
  DatasetSpec data;
  std::string profile = "tiny-cnn-2conv";
  std::size_t rounds = 10;          // N_b
  std::size_t epochs = 15;          // per weak learner
  std::size_t warmup_epochs = 15;   // g0 before the first round
  double shrinkage = 0.02;          // nu
  double keep_rows = 0.9;
  double keep_cols = 0.9;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double alpha_max = 10.0;
  LossMode loss = LossMode::ls_weights;
  bool freeze_extractor = false;
  std::string out_dir = "runs";
  std::string name;  // defaults to "<method>-s<seed>"

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  std::string run_name() const;
  /// Applies one `key=value` setting; keys accept '-' or '_' separators.
  void set(const std::string& key, const std::string& value);
};

/// Parses a key=value file (blank lines and '#' comments ignored).
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
std::map<std::string, std::string> config_entries(const RunConfig& config);

struct RoundMetrics {
  std::size_t round = 0;
  double seconds = 0.0;  // cumulative training wall clock
  double train_risk = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double alpha = 0.0;
  std::size_t pixels = 0;

  bool operator==(const RoundMetrics&) const = default;
};

struct MetricsRecord {
  std::string name;
  Method method = Method::subgrid_boostcnn;
  double basic_seconds = 0.0;
  double basic_train_risk = 0.0;
  double basic_test_accuracy = 0.0;
  std::vector<RoundMetrics> rounds;
  double final_accuracy = 0.0;
  double total_seconds = 0.0;
  std::size_t warmup_epochs = 0;  // epochs spent before round 1
  std::size_t total_epochs = 0;   // epochs spent in rounds 1..N_b
};

struct ExperimentResult {
  MetricsRecord metrics;
  BoostEnsemble ensemble;
  ImportanceMap importance;
  /// Learners combined by averaging (e-CNN variants) rather than boosting.
  /// The ensemble then stores nu = alpha = 1, i.e. the sum of the members.
  bool averaged = false;
};

struct PreparedData {
  LabeledBatch train;
  LabeledBatch test;
  DatasetMeta meta;
};

/// Loads or generates the dataset and normalizes both splits with
/// training-split statistics.
PreparedData prepare_data(const DatasetSpec& spec);

ExperimentResult run_experiment(const RunConfig& config, const LabeledBatch& train, const LabeledBatch& test);
ExperimentResult run_experiment(const RunConfig& config);

struct SeedStudyReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  /// traces[s][t]: test accuracy of seed s at round t minus the seed average.
  std::vector<std::vector<double>> relative_traces;
  std::vector<MetricsRecord> records;
};

SeedStudyReport seed_study(const RunConfig& config, const std::vector<std::uint64_t>& seeds, const LabeledBatch& train,
                           const LabeledBatch& test);
SeedStudyReport summarize_seeds(const std::vector<std::uint64_t>& seeds, std::vector<MetricsRecord> records);

/// Sample standard deviation (n - 1 denominator).
double sample_stddev(const std::vector<double>& values);

/// One CSV per record (`<name>.csv`) and `comparison.csv` with the relative
/// test accuracy acc / acc_baseline - 1 of every run per round.
void emit_plotdata(const std::vector<MetricsRecord>& records, const std::filesystem::path& dir,
                   const std::string& baseline);
void write_run_csv(const MetricsRecord& record, const std::filesystem::path& path);
std::vector<RoundMetrics> read_run_csv(const std::filesystem::path& path);
void write_seed_study_csv(const SeedStudyReport& report, const std::filesystem::path& path);

/// SplitMix64-derived seed for an independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sgboost
