#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "analogion/corpus.hpp"
#include "analogion/embedding.hpp"
#include "analogion/training.hpp"

namespace fixtures {

/// Source files with the record counts of the published datasets: 374 SAT
/// questions, 252 U2 questions, 604 U4 questions of which 252 repeat U2,
/// and SCAN topics expanding to 1487 positives.
analogion::CorpusSourceText published_size_sources(std::uint64_t seed);

/// Random SCAN topic with n aligned entities.
analogion::ScanTopicPair random_topic(analogion::Rng& rng, std::size_t n, int tag);

/// Relations are fixed latent offsets; each pair (a, b) has b = a + r + noise
/// with per-component Gaussian noise of sd noise_ratio * |r|. Every word also carries
/// `nuisance_dim` large random coordinates that a trained model must ignore.
struct RelationWorldConfig {
  int relations = 40;
  int pairs_per_relation = 30;
  int latent_dim = 48;
  int nuisance_dim = 48;
  double offset_norm = 1.0;
  double noise_ratio = 0.05;
  double nuisance_scale = 1.0;
  int k = 10;
  std::uint64_t seed = 1;
};

struct RelationWorld {
  RelationWorldConfig config;
  std::unordered_map<std::string, analogion::WordVector> table;
  analogion::BalancedCorpus corpus;
  analogion::FoldSplit folds;
};

RelationWorld make_relation_world(const RelationWorldConfig& config);

/// Toy contextual backend over the world's token table.
analogion::BackendFactory relation_world_factory(const RelationWorld& world, bool extra_layer = false,
                                                 bool freeze_backbone = false, double context_init_scale = 0.0);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace fixtures
