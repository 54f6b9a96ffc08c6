#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "analogion/corpus.hpp"
#include "analogion/embedding.hpp"
#include "analogion/objective.hpp"

namespace analogion {

struct TrainConfig {
  int epochs = 3;
  int batch_size = 32;
  double learning_rate = 2e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double margin = 0.0;
  std::uint64_t seed = 0;
  ObjectiveKind objective = ObjectiveKind::offset_ab;
  bool freeze_backbone = false;
  bool extra_layer = false;
  std::string backbone_id = "toy:dim=32";

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(std::string_view json);
};

/// Adam with decoupled weight decay. Only entries where mask == 1 move.
class AdamW {
 public:
  AdamW(Eigen::Index size, const TrainConfig& config);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const Eigen::VectorXd& mask);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, wd_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct StepRecord {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct RunArtifact {
  int fold_index = 0;
  Eigen::VectorXd parameters;
  std::vector<StepRecord> log;
  std::vector<double> epoch_mean_loss;
  std::string config_json;
  double wall_seconds = 0.0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> heldout_rows;
  std::string backbone_checksum_before;
  std::string backbone_checksum_after;
};

using BackendFactory = std::function<std::unique_ptr<ContextualBackend>()>;

/// Factory building config.backbone_id with the layers the config asks for
/// and the trainable flags applied.
BackendFactory backend_factory_for(const TrainConfig& config);

/// Applies freeze_backbone to a freshly built backend.
void apply_trainable_flags(ContextualBackend& backend, const TrainConfig& config);

/// Trains in place over `train` for config.epochs, shuffling with `seed`.
std::vector<StepRecord> train_model(ContextualBackend& backend, const std::vector<const AnalogyQuad*>& train,
                                    const TrainConfig& config, std::uint64_t seed,
                                    std::vector<std::vector<std::size_t>>* batches_seen = nullptr);

/// Trains on every fold except `fold_index`.
RunArtifact train_fold(const BalancedCorpus& corpus, const FoldSplit& folds, int fold_index, const TrainConfig& config,
                       const BackendFactory& factory);
RunArtifact train_fold(const BalancedCorpus& corpus, const FoldSplit& folds, int fold_index, const TrainConfig& config);

/// One artifact per fold; fold f trains with seed derive_seed(config.seed, f).
std::vector<RunArtifact> train_all_folds(const BalancedCorpus& corpus, const FoldSplit& folds,
                                         const TrainConfig& config, const BackendFactory& factory);
std::vector<RunArtifact> train_all_folds(const BalancedCorpus& corpus, const FoldSplit& folds,
                                         const TrainConfig& config);

/// Frozen backbone + single identity-initialised layer before pooling.
/// Throws if the config does not request that variant, or if the backbone
/// changed during any run.
std::vector<RunArtifact> train_frozen_single_layer(const BalancedCorpus& corpus, const FoldSplit& folds,
                                                   const TrainConfig& config, const BackendFactory& factory);
std::vector<RunArtifact> train_frozen_single_layer(const BalancedCorpus& corpus, const FoldSplit& folds,
                                                   const TrainConfig& config);

/// Rebuilds the trained model of an artifact.
std::unique_ptr<ContextualBackend> load_trained_backend(const TrainConfig& config, const Eigen::VectorXd& parameters);

// Artifact directory: config.json, train_log.jsonl, params.bin, metrics.json.
void save_artifact(const RunArtifact& artifact, const std::string& dir);
Eigen::VectorXd load_params(const std::string& path);
void save_params(const Eigen::VectorXd& params, const std::string& path);

}  // namespace analogion
