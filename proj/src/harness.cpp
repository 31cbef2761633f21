#include "sgboost/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sgboost/error.hpp"

namespace sgboost {

namespace {

constexpr std::uint64_t kInitStream = 1000;
constexpr std::uint64_t kShuffleStream = 2000;
constexpr std::uint64_t kTestDataStream = 3000;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size() || x < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects an unsigned integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Stopwatch {
 public:
  void start() { begin_ = std::chrono::steady_clock::now(); }
  void stop() { total_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - begin_).count(); }
  double total() const { return total_; }

 private:
  std::chrono::steady_clock::time_point begin_;
  double total_ = 0.0;
};

LabeledBatch concat(std::vector<LabeledBatch> parts) {
  LabeledBatch out = std::move(parts.front());
  if (parts.size() == 1) return out;
  std::vector<double> values(out.inputs.data().begin(), out.inputs.data().end());
  Shape shape = out.inputs.shape();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].sample_shape() != out.sample_shape()) throw FormatError("dataset parts have different geometry");
    values.insert(values.end(), parts[i].inputs.data().begin(), parts[i].inputs.data().end());
    out.labels.insert(out.labels.end(), parts[i].labels.begin(), parts[i].labels.end());
    shape[0] += parts[i].size();
  }
  out.inputs = Tensor(std::move(shape), std::move(values));
  return out;
}

LabeledBatch take_first(const LabeledBatch& batch, std::size_t count) {
  if (count == 0 || count >= batch.size()) return batch;
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return batch.subset(idx);
}

void add_into(Tensor& acc, const Tensor& g, double coef) {
  auto a = acc.data();
  auto v = g.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += coef * v[i];
}

Tensor scaled(const Tensor& t, double factor) {
  Tensor out = t;
  for (auto& v : out.data()) v *= factor;
  return out;
}

TrainConfig base_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.adam.learning_rate = cfg.learning_rate;
  t.adam.weight_decay = cfg.weight_decay;
  t.loss = cfg.loss;
  t.freeze_extractor = cfg.freeze_extractor;
  return t;
}

struct Context {
  const RunConfig& cfg;
  const LabeledBatch& train;
  const LabeledBatch& test;
  const ArchitectureProfile& profile;
  Shape geometry;
  std::size_t classes;
  ExperimentResult result;
  Stopwatch clock;
  std::size_t round = 0;
  const char* phase = "setup";

  void at(std::size_t r, const char* p) {
    round = r;
    phase = p;
  }

  std::uint64_t init_seed(std::size_t t) const { return derive_seed(cfg.seed, kInitStream + t); }
  std::uint64_t shuffle_seed(std::size_t t) const { return derive_seed(cfg.seed, kShuffleStream + t); }

  void record(std::size_t round, const Tensor& train_scores, const Tensor& test_scores, double alpha,
              std::size_t pixels) {
    RoundMetrics m;
    m.round = round;
    m.seconds = clock.total();
    m.train_risk = risk(train_scores, train.labels);
    m.train_accuracy = accuracy(train_scores, train.labels);
    m.test_accuracy = accuracy(test_scores, test.labels);
    m.alpha = alpha;
    m.pixels = pixels;
    result.metrics.rounds.push_back(m);
  }

  void record_basic(const Tensor& train_scores, const Tensor& test_scores) {
    result.metrics.basic_seconds = clock.total();
    result.metrics.basic_train_risk = risk(train_scores, train.labels);
    result.metrics.basic_test_accuracy = accuracy(test_scores, test.labels);
  }
};

void run_boosting(Context& ctx, bool subgrid) {
  const auto& cfg = ctx.cfg;
  auto& ens = ctx.result.ensemble;
  const std::size_t h = ctx.geometry[1], w = ctx.geometry[2];
  ens.shrinkage = cfg.shrinkage;
  ens.classes = ctx.classes;

  ctx.at(0, "basic learner");
  ctx.clock.start();
  ens.basic = build_basic_learner(ctx.profile, ctx.geometry, ctx.classes, ctx.init_seed(0));
  Tensor train_scores({ctx.train.size(), ctx.classes});
  const BoostWeights initial = compute_boost_weights(train_scores, ctx.train.labels);
  TrainConfig g0 = base_train_config(cfg);
  g0.epochs = cfg.warmup_epochs;
  g0.seed = ctx.shuffle_seed(0);
  train_weak_learner(ens.basic, ctx.train, &initial, g0);
  ctx.result.metrics.warmup_epochs += g0.epochs;
  train_scores = predict_scores(ens.basic.net, ctx.train.inputs);
  ctx.clock.stop();
  Tensor test_scores = predict_scores(ens.basic.net, ctx.test.inputs);
  ctx.record_basic(train_scores, test_scores);

  ImportanceMap& importance = ctx.result.importance;
  importance = ImportanceMap(h, w);
  SubgridMask previous = SubgridMask::full(h, w);
  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    ctx.clock.start();
    SubgridMask mask = SubgridMask::full(h, w);
    if (subgrid) {
      ctx.at(t, "importance");
      const Network probe = build_probe(ens.last_learner(), ens.basic);
      update_importance(importance, probe, ctx.train.inputs, compute_boost_weights(train_scores, ctx.train.labels),
                        previous);
      mask = select_subgrid(importance, cfg.keep_rows, cfg.keep_cols);
    }
    ctx.at(t, "weak learner");
    RoundConfig round;
    round.train = base_train_config(cfg);
    round.train.seed = ctx.shuffle_seed(t);
    round.line_search = {cfg.alpha_max, 1e-6};
    round.learner_seed = ctx.init_seed(t);
    const RoundResult rr = boost_round(ens, ctx.train, train_scores, mask, round);
    ctx.result.metrics.total_epochs += round.train.epochs;
    ctx.clock.stop();

    const BoostStage& stage = ens.stages.back();
    add_into(test_scores, predict_scores(stage.learner.net, slice_inputs(ctx.test.inputs, mask)),
             ens.shrinkage * stage.alpha);
    ctx.record(t, train_scores, test_scores, rr.alpha, mask.pixel_count());
    previous = mask;
  }
}

void run_ecnn(Context& ctx) {
  const auto& cfg = ctx.cfg;
  auto& ens = ctx.result.ensemble;
  ens.shrinkage = 1.0;
  ens.classes = ctx.classes;
  ctx.result.averaged = true;
  const std::size_t h = ctx.geometry[1], w = ctx.geometry[2];
  Tensor train_sum({ctx.train.size(), ctx.classes});
  Tensor test_sum({ctx.test.size(), ctx.classes});
  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    ctx.at(t, "weak learner");
    ctx.clock.start();
    WeakLearner learner = build_basic_learner(ctx.profile, ctx.geometry, ctx.classes, ctx.init_seed(t - 1));
    TrainConfig c = base_train_config(cfg);
    c.loss = LossMode::cross_entropy;
    c.seed = ctx.shuffle_seed(t - 1);
    AdamState state(c.adam);
    std::mt19937_64 rng(c.seed);
    if (t == 1 && cfg.warmup_epochs > 0) {
      TrainConfig warm = c;
      warm.epochs = cfg.warmup_epochs;
      train_weak_learner(learner, ctx.train, nullptr, warm, state, rng);
      ctx.result.metrics.warmup_epochs += warm.epochs;
    }
    train_weak_learner(learner, ctx.train, nullptr, c, state, rng);
    ctx.result.metrics.total_epochs += c.epochs;
    add_into(train_sum, predict_scores(learner.net, ctx.train.inputs), 1.0);
    ctx.clock.stop();
    add_into(test_sum, predict_scores(learner.net, ctx.test.inputs), 1.0);
    if (t == 1) {
      ens.basic = std::move(learner);
    } else {
      learner.role = LearnerRole::additive;
      ens.stages.push_back(BoostStage{std::move(learner), 1.0, SubgridMask::full(h, w)});
    }
    const double inv = 1.0 / static_cast<double>(t);
    ctx.record(t, scaled(train_sum, inv), scaled(test_sum, inv), 1.0, h * w);
    if (t == 1) ctx.record_basic(scaled(train_sum, inv), scaled(test_sum, inv));
  }
}

void run_subgrid_ecnn(Context& ctx) {
  const auto& cfg = ctx.cfg;
  auto& ens = ctx.result.ensemble;
  const std::size_t h = ctx.geometry[1], w = ctx.geometry[2];
  ens.shrinkage = 1.0;
  ens.classes = ctx.classes;
  ctx.result.averaged = true;

  ctx.at(0, "basic learner");
  ctx.clock.start();
  ens.basic = build_basic_learner(ctx.profile, ctx.geometry, ctx.classes, ctx.init_seed(0));
  TrainConfig g0 = base_train_config(cfg);
  g0.loss = LossMode::cross_entropy;
  g0.epochs = cfg.warmup_epochs;
  g0.seed = ctx.shuffle_seed(0);
  train_weak_learner(ens.basic, ctx.train, nullptr, g0);
  ctx.result.metrics.warmup_epochs += g0.epochs;
  Tensor train_sum = predict_scores(ens.basic.net, ctx.train.inputs);
  ctx.clock.stop();
  Tensor test_sum = predict_scores(ens.basic.net, ctx.test.inputs);
  ctx.record_basic(train_sum, test_sum);

  // Boosting weights are never refreshed: they stay at their f = 0 values.
  const BoostWeights fixed = compute_boost_weights(Tensor({ctx.train.size(), ctx.classes}), ctx.train.labels);
  ImportanceMap& importance = ctx.result.importance;
  importance = ImportanceMap(h, w);
  SubgridMask previous = SubgridMask::full(h, w);
  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    ctx.clock.start();
    ctx.at(t, "importance");
    const Network probe = build_probe(ens.last_learner(), ens.basic);
    update_importance(importance, probe, ctx.train.inputs, fixed, previous);
    ctx.at(t, "weak learner");
    const SubgridMask mask = select_subgrid(importance, cfg.keep_rows, cfg.keep_cols);
    WeakLearner learner = warm_start_learner(ens.last_learner(), mask, ctx.classes, ctx.init_seed(t));
    TrainConfig c = base_train_config(cfg);
    c.loss = LossMode::cross_entropy;
    c.seed = ctx.shuffle_seed(t);
    const LabeledBatch sliced = slice_batch(ctx.train, mask);
    train_weak_learner(learner, sliced, nullptr, c);
    ctx.result.metrics.total_epochs += c.epochs;
    add_into(train_sum, predict_scores(learner.net, sliced.inputs), 1.0);
    ctx.clock.stop();
    add_into(test_sum, predict_scores(learner.net, slice_inputs(ctx.test.inputs, mask)), 1.0);
    ens.stages.push_back(BoostStage{std::move(learner), 1.0, mask});
    const double inv = 1.0 / static_cast<double>(t + 1);
    ctx.record(t, scaled(train_sum, inv), scaled(test_sum, inv), 1.0, mask.pixel_count());
    previous = mask;
  }
}

void run_single(Context& ctx) {
  const auto& cfg = ctx.cfg;
  auto& ens = ctx.result.ensemble;
  ens.shrinkage = 1.0;
  ens.classes = ctx.classes;
  const std::size_t h = ctx.geometry[1], w = ctx.geometry[2];

  ctx.at(0, "basic learner");
  ctx.clock.start();
  ens.basic = build_basic_learner(ctx.profile, ctx.geometry, ctx.classes, ctx.init_seed(0));
  TrainConfig c = base_train_config(cfg);
  c.loss = LossMode::cross_entropy;
  c.seed = ctx.shuffle_seed(0);
  AdamState state(c.adam);
  std::mt19937_64 rng(c.seed);
  if (cfg.warmup_epochs > 0) {
    TrainConfig warm = c;
    warm.epochs = cfg.warmup_epochs;
    train_weak_learner(ens.basic, ctx.train, nullptr, warm, state, rng);
    ctx.result.metrics.warmup_epochs += warm.epochs;
  }
  ctx.clock.stop();
  ctx.record_basic(predict_scores(ens.basic.net, ctx.train.inputs), predict_scores(ens.basic.net, ctx.test.inputs));
  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    ctx.at(t, "training");
    ctx.clock.start();
    train_weak_learner(ens.basic, ctx.train, nullptr, c, state, rng);
    ctx.result.metrics.total_epochs += c.epochs;
    Tensor train_scores = predict_scores(ens.basic.net, ctx.train.inputs);
    ctx.clock.stop();
    ctx.record(t, train_scores, predict_scores(ens.basic.net, ctx.test.inputs), 1.0, h * w);
  }
}

// Incremental mean; exact when every value is equal.
double running_mean(const std::vector<double>& values) {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) m += (values[i] - m) / static_cast<double>(i + 1);
  return m;
}

[[noreturn]] void rethrow_in_context(const Error& e, const std::string& prefix) {
  const std::string msg = prefix + e.what();
  if (dynamic_cast<const GeometryError*>(&e)) throw GeometryError(msg);
  if (dynamic_cast<const StateError*>(&e)) throw StateError(msg);
  if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
  if (dynamic_cast<const LabelError*>(&e)) throw LabelError(msg);
  if (dynamic_cast<const FormatError*>(&e)) throw FormatError(msg);
  if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
  throw Error(msg);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::boostcnn: return "boostcnn";
    case Method::subgrid_boostcnn: return "subgrid-boostcnn";
    case Method::ecnn: return "ecnn";
    case Method::subgrid_ecnn: return "subgrid-ecnn";
    case Method::single_cnn: return "single-cnn";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  for (auto m : {Method::boostcnn, Method::subgrid_boostcnn, Method::ecnn, Method::subgrid_ecnn, Method::single_cnn}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("unknown method '" + text + "'");
}

std::string to_string(LossMode mode) { return mode == LossMode::ls_weights ? "ls-weights" : "cross-entropy"; }

LossMode parse_loss_mode(const std::string& text) {
  if (text == "ls-weights") return LossMode::ls_weights;
  if (text == "cross-entropy") return LossMode::cross_entropy;
  throw ConfigError("unknown loss mode '" + text + "'");
}

void RunConfig::validate() const {
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ConfigError("nu must lie in [0, 1]");
  if (!(keep_rows > 0.0 && keep_rows <= 1.0) || !(keep_cols > 0.0 && keep_cols <= 1.0)) {
    throw ConfigError("keep fractions must lie in (0, 1]");
  }
  if (rounds < 1) throw ConfigError("nb (boosting rounds) must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (!(alpha_max > 0.0)) throw ConfigError("alpha-max must be positive");
  find_profile(profile);
  if (data.kind != "synthetic" && data.kind != "cifar10" && data.kind != "idx") {
    throw ConfigError("unknown dataset kind '" + data.kind + "'");
  }
}

std::string RunConfig::run_name() const {
  return name.empty() ? to_string(method) + "-s" + std::to_string(seed) : name;
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '_', '-');
  const std::string v = trim(raw_value);
  if (key == "method") method = parse_method(v);
  else if (key == "profile") profile = v;
  else if (key == "nb" || key == "rounds") rounds = to_size(key, v);
  else if (key == "epochs") epochs = to_size(key, v);
  else if (key == "warmup-epochs") warmup_epochs = to_size(key, v);
  else if (key == "nu" || key == "shrinkage") shrinkage = to_double(key, v);
  else if (key == "keep-rows") keep_rows = to_double(key, v);
  else if (key == "keep-cols") keep_cols = to_double(key, v);
  else if (key == "lr" || key == "learning-rate") learning_rate = to_double(key, v);
  else if (key == "weight-decay") weight_decay = to_double(key, v);
  else if (key == "batch-size") batch_size = to_size(key, v);
  else if (key == "seed") seed = to_u64(key, v);
  else if (key == "alpha-max") alpha_max = to_double(key, v);
  else if (key == "loss-mode") loss = parse_loss_mode(v);
  else if (key == "freeze-extractor") freeze_extractor = to_bool(key, v);
  else if (key == "out") out_dir = v;
  else if (key == "name") name = v;
  else if (key == "dataset") data.kind = v;
  else if (key == "data-path") data.path = v;
  else if (key == "train-n") data.train_count = to_size(key, v);
  else if (key == "test-n") data.test_count = to_size(key, v);
  else if (key == "channels") data.channels = to_size(key, v);
  else if (key == "height") data.height = to_size(key, v);
  else if (key == "width") data.width = to_size(key, v);
  else if (key == "classes") data.classes = to_size(key, v);
  else if (key == "difficulty") data.difficulty = to_double(key, v);
  else if (key == "data-seed") data.seed = to_u64(key, v);
  else if (key == "normalize") data.normalize = to_bool(key, v);
  else throw ConfigError("unknown config key '" + raw_key + "'");
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    base.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

std::map<std::string, std::string> config_entries(const RunConfig& c) {
  return {{"method", to_string(c.method)},
          {"profile", c.profile},
          {"nb", std::to_string(c.rounds)},
          {"epochs", std::to_string(c.epochs)},
          {"warmup-epochs", std::to_string(c.warmup_epochs)},
          {"nu", fmt(c.shrinkage)},
          {"keep-rows", fmt(c.keep_rows)},
          {"keep-cols", fmt(c.keep_cols)},
          {"lr", fmt(c.learning_rate)},
          {"weight-decay", fmt(c.weight_decay)},
          {"batch-size", std::to_string(c.batch_size)},
          {"seed", std::to_string(c.seed)},
          {"alpha-max", fmt(c.alpha_max)},
          {"loss-mode", to_string(c.loss)},
          {"freeze-extractor", c.freeze_extractor ? "true" : "false"},
          {"out", c.out_dir},
          {"name", c.run_name()},
          {"dataset", c.data.kind},
          {"data-path", c.data.path},
          {"train-n", std::to_string(c.data.train_count)},
          {"test-n", std::to_string(c.data.test_count)},
          {"channels", std::to_string(c.data.channels)},
          {"height", std::to_string(c.data.height)},
          {"width", std::to_string(c.data.width)},
          {"classes", std::to_string(c.data.classes)},
          {"difficulty", fmt(c.data.difficulty)},
          {"data-seed", std::to_string(c.data.seed)},
          {"normalize", c.data.normalize ? "true" : "false"}};
}

PreparedData prepare_data(const DatasetSpec& spec) {
  PreparedData out;
  namespace fs = std::filesystem;
  if (spec.kind == "synthetic") {
    const Shape geometry{spec.channels, spec.height, spec.width};
    out.train = make_synthetic(spec.seed, spec.train_count, geometry, spec.classes, spec.difficulty);
    out.test = make_synthetic(derive_seed(spec.seed, kTestDataStream), spec.test_count, geometry, spec.classes,
                              spec.difficulty);
    out.meta.name = "synthetic";
  } else if (spec.kind == "cifar10") {
    const fs::path dir(spec.path);
    std::vector<LabeledBatch> parts;
    for (int i = 1; i <= 5; ++i) {
      const auto file = dir / ("data_batch_" + std::to_string(i) + ".bin");
      if (fs::exists(file)) parts.push_back(load_cifar10_binary(file));
    }
    if (parts.empty()) throw ConfigError("no CIFAR-10 training batches under " + dir.string());
    out.train = take_first(concat(std::move(parts)), spec.train_count);
    out.test = take_first(load_cifar10_binary(dir / "test_batch.bin"), spec.test_count);
    out.meta.name = "cifar10";
  } else if (spec.kind == "idx") {
    const fs::path dir(spec.path);
    out.train = take_first(load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", spec.classes),
                           spec.train_count);
    out.test = take_first(load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", spec.classes),
                          spec.test_count);
    out.meta.name = "idx";
  } else {
    throw ConfigError("unknown dataset kind '" + spec.kind + "'");
  }
  out.train.classes = out.test.classes = std::max(out.train.classes, out.test.classes);
  compute_normalization(out.train, out.meta);
  out.meta.test_count = out.test.size();
  if (spec.normalize) {
    normalize(out.train, out.meta);
    normalize(out.test, out.meta);
  }
  return out;
}

ExperimentResult run_experiment(const RunConfig& config, const LabeledBatch& train, const LabeledBatch& test) {
  config.validate();
  train.validate();
  test.validate();
  if (train.sample_shape() != test.sample_shape()) throw GeometryError("train and test geometry differ");
  if (train.classes != test.classes) throw GeometryError("train and test class counts differ");
  Context ctx{config, train, test, find_profile(config.profile), train.sample_shape(), train.classes, {}, {}};
  ctx.result.metrics.name = config.run_name();
  ctx.result.metrics.method = config.method;
  try {
    switch (config.method) {
      case Method::boostcnn: run_boosting(ctx, false); break;
      case Method::subgrid_boostcnn: run_boosting(ctx, true); break;
      case Method::ecnn: run_ecnn(ctx); break;
      case Method::subgrid_ecnn: run_subgrid_ecnn(ctx); break;
      case Method::single_cnn: run_single(ctx); break;
    }
  } catch (const Error& e) {
    rethrow_in_context(e, "round " + std::to_string(ctx.round) + " (" + ctx.phase + "): ");
  }
  auto& m = ctx.result.metrics;
  m.total_seconds = ctx.clock.total();
  m.final_accuracy = m.rounds.empty() ? m.basic_test_accuracy : m.rounds.back().test_accuracy;
  return std::move(ctx.result);
}

ExperimentResult run_experiment(const RunConfig& config) {
  config.validate();
  const PreparedData data = prepare_data(config.data);
  return run_experiment(config, data.train, data.test);
}

double sample_stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = running_mean(values);
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size() - 1));
}

SeedStudyReport summarize_seeds(const std::vector<std::uint64_t>& seeds, std::vector<MetricsRecord> records) {
  SeedStudyReport report;
  report.seeds = seeds;
  for (const auto& r : records) report.final_accuracies.push_back(r.final_accuracy);
  report.mean = running_mean(report.final_accuracies);
  report.stddev = sample_stddev(report.final_accuracies);
  std::size_t rounds = records.front().rounds.size();
  for (const auto& r : records) rounds = std::min(rounds, r.rounds.size());
  std::vector<double> avg(rounds, 0.0);
  for (std::size_t t = 0; t < rounds; ++t) {
    std::vector<double> column;
    for (const auto& r : records) column.push_back(r.rounds[t].test_accuracy);
    avg[t] = running_mean(column);
  }
  for (const auto& r : records) {
    std::vector<double> trace(rounds);
    for (std::size_t t = 0; t < rounds; ++t) trace[t] = r.rounds[t].test_accuracy - avg[t];
    report.relative_traces.push_back(std::move(trace));
  }
  report.records = std::move(records);
  return report;
}

SeedStudyReport seed_study(const RunConfig& config, const std::vector<std::uint64_t>& seeds, const LabeledBatch& train,
                           const LabeledBatch& test) {
  if (seeds.size() < 2) throw ConfigError("seed study needs at least two seeds");
  std::vector<MetricsRecord> records;
  for (auto s : seeds) {
    RunConfig c = config;
    c.seed = s;
    c.name = to_string(config.method) + "-s" + std::to_string(s);
    records.push_back(run_experiment(c, train, test).metrics);
  }
  return summarize_seeds(seeds, std::move(records));
}

void write_run_csv(const MetricsRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "round,seconds,train_risk,train_accuracy,test_accuracy,alpha,pixels\n";
  for (const auto& r : record.rounds) {
    out << r.round << ',' << fmt(r.seconds) << ',' << fmt(r.train_risk) << ',' << fmt(r.train_accuracy) << ','
        << fmt(r.test_accuracy) << ',' << fmt(r.alpha) << ',' << r.pixels << '\n';
  }
}

std::vector<RoundMetrics> read_run_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("round,", 0) != 0) throw FormatError("missing run CSV header in " + path.string());
  std::vector<RoundMetrics> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw FormatError("run CSV row has " + std::to_string(cells.size()) + " cells");
    RoundMetrics r;
    r.round = std::stoull(cells[0]);
    r.seconds = std::strtod(cells[1].c_str(), nullptr);
    r.train_risk = std::strtod(cells[2].c_str(), nullptr);
    r.train_accuracy = std::strtod(cells[3].c_str(), nullptr);
    r.test_accuracy = std::strtod(cells[4].c_str(), nullptr);
    r.alpha = std::strtod(cells[5].c_str(), nullptr);
    r.pixels = std::stoull(cells[6]);
    rows.push_back(r);
  }
  return rows;
}

void emit_plotdata(const std::vector<MetricsRecord>& records, const std::filesystem::path& dir,
                   const std::string& baseline) {
  if (records.empty()) throw ConfigError("emit_plotdata needs at least one run");
  const auto base = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.name == baseline; });
  if (base == records.end()) throw ConfigError("baseline run '" + baseline + "' missing");
  std::filesystem::create_directories(dir);
  for (const auto& r : records) write_run_csv(r, dir / (r.name + ".csv"));

  std::size_t rounds = base->rounds.size();
  for (const auto& r : records) rounds = std::min(rounds, r.rounds.size());
  std::ofstream out(dir / "comparison.csv");
  if (!out) throw FormatError("cannot write comparison.csv");
  out << "round";
  for (const auto& r : records) out << ',' << r.name;
  out << '\n';
  for (std::size_t t = 0; t < rounds; ++t) {
    out << base->rounds[t].round;
    const double b = base->rounds[t].test_accuracy;
    for (const auto& r : records) {
      const double rel = b > 0.0 ? r.rounds[t].test_accuracy / b - 1.0 : std::nan("");
      out << ',' << fmt(rel);
    }
    out << '\n';
  }
}

void write_seed_study_csv(const SeedStudyReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "seed,final_accuracy";
  const std::size_t rounds = report.relative_traces.empty() ? 0 : report.relative_traces.front().size();
  for (std::size_t t = 0; t < rounds; ++t) out << ",rel_round_" << t + 1;
  out << '\n';
  for (std::size_t s = 0; s < report.seeds.size(); ++s) {
    out << report.seeds[s] << ',' << fmt(report.final_accuracies[s]);
    for (double v : report.relative_traces[s]) out << ',' << fmt(v);
    out << '\n';
  }
  out << "mean," << fmt(report.mean) << '\n';
  out << "std," << fmt(report.stddev) << '\n';
}

}  // namespace sgboost
