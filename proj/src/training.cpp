#include "analogion/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "analogion/errors.hpp"
#include "analogion/rng.hpp"
#include "json.hpp"

namespace analogion {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(margin >= -1.0 && margin <= 1.0)) throw ConfigError("margin must lie in [-1, 1]");
  if (extra_layer && !freeze_backbone) throw ConfigError("extra_layer requires freeze_backbone");
  if (!is_known_backbone_id(backbone_id)) throw ConfigError("unknown backbone '" + backbone_id + "'");
}

std::string TrainConfig::to_json() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["weight_decay"] = weight_decay;
  j["betas"] = {beta1, beta2};
  j["epsilon"] = epsilon;
  j["margin"] = margin;
  j["optimizer"] = "adamw";
  j["seed"] = seed;
  j["objective"] = std::string(to_string(objective));
  j["freeze_backbone"] = freeze_backbone;
  j["extra_layer"] = extra_layer;
  j["backbone_id"] = backbone_id;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    if (j.contains("betas")) {
      c.beta1 = j["betas"].at(0).get<double>();
      c.beta2 = j["betas"].at(1).get<double>();
    }
    c.epsilon = j.value("epsilon", c.epsilon);
    c.margin = j.value("margin", c.margin);
    if (j.value("optimizer", std::string("adamw")) != "adamw") throw ConfigError("only the adamw optimizer is supported");
    c.seed = j.value("seed", c.seed);
    c.objective = parse_objective(j.value("objective", std::string("offset_ab")));
    c.freeze_backbone = j.value("freeze_backbone", c.freeze_backbone);
    c.extra_layer = j.value("extra_layer", c.extra_layer);
    c.backbone_id = j.value("backbone_id", c.backbone_id);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid training config: ") + e.what());
  }
  return c;
}

AdamW::AdamW(Eigen::Index size, const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.epsilon),
      wd_(config.weight_decay),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {}

void AdamW::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const Eigen::VectorXd& mask) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (mask[i] == 0.0) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= lr_ * (m_hat / (std::sqrt(v_hat) + eps_) + wd_ * params[i]);
  }
}

void apply_trainable_flags(ContextualBackend& backend, const TrainConfig& config) {
  if (config.freeze_backbone) backend.set_trainable("backbone", false);
}

BackendFactory backend_factory_for(const TrainConfig& config) {
  return [config] {
    auto backend = make_contextual_backend(config.backbone_id, config.extra_layer,
                                           config.objective == ObjectiveKind::simple_classifier);
    apply_trainable_flags(*backend, config);
    return backend;
  };
}

std::vector<StepRecord> train_model(ContextualBackend& backend, const std::vector<const AnalogyQuad*>& train,
                                    const TrainConfig& config, std::uint64_t seed,
                                    std::vector<std::vector<std::size_t>>* batches_seen) {
  config.validate();
  if (train.empty()) throw ValidationError("training split is empty");
  if (!backend.trainable()) throw ConfigError("backend '" + backend.id() + "' has no trainable parameters");
  if (config.objective == ObjectiveKind::simple_classifier && !backend.has_head())
    throw ConfigError("simple_classifier objective needs a backend with a classification head");

  AdamW optimizer(backend.parameters().size(), config);
  const Eigen::VectorXd mask = backend.trainable_mask();
  Rng rng(seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<StepRecord> log;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<const AnalogyQuad*> quads;
      quads.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) quads.push_back(train[order[i]]);
      if (batches_seen) batches_seen->emplace_back(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
      const auto result = batch_objective(quads, backend, config.objective, config.margin);
      optimizer.step(backend.parameters(), result.gradient, mask);
      log.push_back({optimizer.steps(), epoch, result.loss, config.learning_rate});
    }
  }
  return log;
}

namespace {

std::vector<double> epoch_means(const std::vector<StepRecord>& log, std::size_t n_train, int batch_size, int epochs) {
  std::vector<double> sums(static_cast<std::size_t>(epochs), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(epochs), 0);
  const auto per_epoch = (n_train + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto e = static_cast<std::size_t>(log[i].epoch);
    const std::size_t pos = i % per_epoch;
    const std::size_t size = pos + 1 == per_epoch ? n_train - pos * static_cast<std::size_t>(batch_size)
                                                  : static_cast<std::size_t>(batch_size);
    sums[e] += log[i].loss * static_cast<double>(size);
    counts[e] += size;
  }
  for (std::size_t e = 0; e < sums.size(); ++e) sums[e] /= static_cast<double>(std::max<std::size_t>(counts[e], 1));
  return sums;
}

}  // namespace

RunArtifact train_fold(const BalancedCorpus& corpus, const FoldSplit& folds, int fold_index, const TrainConfig& config,
                       const BackendFactory& factory) {
  config.validate();
  if (fold_index < 0 || fold_index >= folds.k)
    throw ConfigError("fold index " + std::to_string(fold_index) + " outside 0.." + std::to_string(folds.k - 1));
  if (folds.fold_of.size() != corpus.quads.size()) throw ValidationError("fold split does not match the corpus");

  RunArtifact art;
  art.fold_index = fold_index;
  art.heldout_rows = folds.rows_in_fold(fold_index);
  art.train_rows = folds.rows_outside_fold(fold_index);
  if (art.heldout_rows.empty()) throw ValidationError("held-out fold " + std::to_string(fold_index) + " is empty");

  std::vector<const AnalogyQuad*> train;
  train.reserve(art.train_rows.size());
  for (auto r : art.train_rows) train.push_back(&corpus.quads[r]);

  const auto started = std::chrono::steady_clock::now();
  auto backend = factory();
  art.backbone_checksum_before = backend->group_checksum("backbone");
  const std::uint64_t fold_seed = derive_seed(config.seed, static_cast<std::uint64_t>(fold_index));
  art.log = train_model(*backend, train, config, fold_seed);
  art.backbone_checksum_after = backend->group_checksum("backbone");
  art.parameters = backend->parameters();
  art.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  art.epoch_mean_loss = epoch_means(art.log, train.size(), config.batch_size, config.epochs);

  json snapshot = json::parse(config.to_json());
  snapshot["fold_index"] = fold_index;
  snapshot["fold_seed"] = fold_seed;
  snapshot["k"] = folds.k;
  art.config_json = snapshot.dump(2);
  return art;
}

RunArtifact train_fold(const BalancedCorpus& corpus, const FoldSplit& folds, int fold_index, const TrainConfig& config) {
  return train_fold(corpus, folds, fold_index, config, backend_factory_for(config));
}

std::vector<RunArtifact> train_all_folds(const BalancedCorpus& corpus, const FoldSplit& folds,
                                         const TrainConfig& config, const BackendFactory& factory) {
  std::vector<RunArtifact> runs;
  runs.reserve(static_cast<std::size_t>(folds.k));
  for (int f = 0; f < folds.k; ++f) runs.push_back(train_fold(corpus, folds, f, config, factory));
  return runs;
}

std::vector<RunArtifact> train_all_folds(const BalancedCorpus& corpus, const FoldSplit& folds,
                                         const TrainConfig& config) {
  return train_all_folds(corpus, folds, config, backend_factory_for(config));
}

std::vector<RunArtifact> train_frozen_single_layer(const BalancedCorpus& corpus, const FoldSplit& folds,
                                                   const TrainConfig& config, const BackendFactory& factory) {
  if (!config.freeze_backbone || !config.extra_layer)
    throw ConfigError("single-layer variant needs freeze_backbone and extra_layer");
  auto runs = train_all_folds(corpus, folds, config, factory);
  for (const auto& run : runs)
    if (run.backbone_checksum_before != run.backbone_checksum_after)
      throw Error("backbone parameters changed in frozen run for fold " + std::to_string(run.fold_index));
  return runs;
}

std::vector<RunArtifact> train_frozen_single_layer(const BalancedCorpus& corpus, const FoldSplit& folds,
                                                   const TrainConfig& config) {
  return train_frozen_single_layer(corpus, folds, config, backend_factory_for(config));
}

std::unique_ptr<ContextualBackend> load_trained_backend(const TrainConfig& config, const Eigen::VectorXd& parameters) {
  auto backend = backend_factory_for(config)();
  if (backend->parameters().size() != parameters.size())
    throw ValidationError("checkpoint has " + std::to_string(parameters.size()) + " parameters, backend expects " +
                          std::to_string(backend->parameters().size()));
  backend->parameters() = parameters;
  return backend;
}

namespace {
constexpr char kParamsMagic[8] = {'A', 'N', 'L', 'G', 'P', 'R', 'M', '1'};
}

void save_params(const Eigen::VectorXd& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(kParamsMagic, sizeof kParamsMagic);
  const std::uint64_t n = static_cast<std::uint64_t>(params.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

Eigen::VectorXd load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open checkpoint '" + path + "'");
  char magic[8];
  std::uint64_t n = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, kParamsMagic, sizeof magic) != 0) throw ValidationError("'" + path + "' is not a checkpoint");
  Eigen::VectorXd params(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ValidationError("checkpoint '" + path + "' is truncated");
  return params;
}

void save_artifact(const RunArtifact& artifact, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/config.json");
    out << artifact.config_json << '\n';
  }
  {
    std::ofstream out(dir + "/train_log.jsonl");
    for (const auto& s : artifact.log)
      out << json{{"step", s.step}, {"epoch", s.epoch}, {"loss", s.loss}, {"lr", s.lr}}.dump() << '\n';
  }
  save_params(artifact.parameters, dir + "/params.bin");
  // metrics.json goes last: its presence marks the run complete.
  {
    std::ofstream out(dir + "/timing.json");
    out << json{{"wall_seconds", artifact.wall_seconds}}.dump() << '\n';
  }
  {
    json m;
    m["fold_index"] = artifact.fold_index;
    m["epoch_mean_loss"] = artifact.epoch_mean_loss;
    m["final_loss"] = artifact.log.empty() ? 0.0 : artifact.log.back().loss;
    m["n_train"] = artifact.train_rows.size();
    m["n_heldout"] = artifact.heldout_rows.size();
    m["steps"] = artifact.log.size();
    m["backbone_checksum_before"] = artifact.backbone_checksum_before;
    m["backbone_checksum_after"] = artifact.backbone_checksum_after;
    std::ofstream out(dir + "/metrics.json");
    out << m.dump(2) << '\n';
  }
}

}  // namespace analogion
