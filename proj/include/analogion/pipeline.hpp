#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "analogion/corpus.hpp"
#include "analogion/evaluation.hpp"
#include "analogion/training.hpp"

namespace analogion {

inline constexpr const char* kToolVersion = "0.1.0";

struct ModelSpec {
  std::string name;
  TrainConfig train;
};

struct EvaluationSettings {
  double threshold = 0.0;
  bool calibrate_threshold = false;
  AggregateMode aggregate = AggregateMode::micro;
  bool classification = true;
  bool ranking = true;
  bool distractor = true;
  bool wordsim = true;
  bool frequency = true;
};

/// Experiment configuration (JSON). Relative paths resolve against the
/// directory holding the config file.
struct PipelineConfig {
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  int k = 10;
  std::filesystem::path output_dir;
  std::map<std::string, std::filesystem::path> sources;  // sat, u2, u4, scan
  std::optional<std::filesystem::path> distractor;
  std::vector<std::pair<std::string, std::filesystem::path>> wordsim;
  std::optional<std::filesystem::path> frequency;
  std::optional<std::filesystem::path> static_vectors;
  std::vector<ModelSpec> models;
  EvaluationSettings evaluation;
  std::string raw_json;

  static PipelineConfig from_json(std::string_view json, const std::filesystem::path& base_dir,
                                  std::optional<std::uint64_t> seed_override = std::nullopt);
  static PipelineConfig load(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);
  /// Every referenced input path must exist.
  void validate() const;

  std::filesystem::path corpus_path() const { return output_dir / "corpus.tsv"; }
  std::filesystem::path folds_path() const { return output_dir / "folds.json"; }
  std::filesystem::path run_dir(const std::string& model, int fold) const;
  std::filesystem::path reports_dir() const { return output_dir / "reports"; }
};

/// "0..3", "1,4,7", "2" or "all" (0-based fold indices, ranges inclusive).
std::vector<int> parse_fold_spec(std::string_view spec, int k);

struct RunOptions {
  std::vector<int> folds;  // empty = all
  int jobs = 1;
  bool force = false;
};

/// Emitted files (relative to output_dir) and their SHA-256 digests.
struct Manifest {
  std::string command;
  std::map<std::string, std::string> files;
  std::vector<std::string> volatile_files;
  std::string config_snapshot;

  std::string to_json() const;
  void add(const std::filesystem::path& output_dir, const std::filesystem::path& file, bool is_volatile = false);
  void write(const std::filesystem::path& output_dir) const;
};

struct SourceSummary {
  Source source;
  SourceCounts counts;
  std::optional<double> percent_oov;
  std::optional<double> mean_frequency;
  std::string example_positive;
  std::string example_negative;
};

std::vector<SourceSummary> summarize_corpus(const BalancedCorpus& corpus, const EmbeddingBackend* backend,
                                            const FrequencyTable* freq);
std::string data_summary_markdown(const std::vector<SourceSummary>& rows);

Manifest cmd_prepare_data(const PipelineConfig& config, std::ostream& log);
Manifest cmd_train(const PipelineConfig& config, const RunOptions& options, std::ostream& log);
Manifest cmd_evaluate(const PipelineConfig& config, const RunOptions& options, std::ostream& log);
Manifest cmd_distractor_eval(const PipelineConfig& config, const RunOptions& options, std::ostream& log);
Manifest cmd_wordsim_eval(const PipelineConfig& config, const RunOptions& options, std::ostream& log);
Manifest cmd_freq_analysis(const PipelineConfig& config, std::ostream& log);
Manifest cmd_report(const PipelineConfig& config, std::ostream& log);

/// Loads corpus.tsv and folds.json written by prepare-data.
std::pair<BalancedCorpus, FoldSplit> load_prepared(const PipelineConfig& config);

}  // namespace analogion
