#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "analogion/corpus.hpp"
#include "analogion/embedding.hpp"
#include "analogion/objective.hpp"
#include "analogion/stats.hpp"

namespace analogion {

/// A backend plus the rule that turns a quad into a score.
struct ScoringModel {
  const EmbeddingBackend* backend = nullptr;
  ObjectiveKind kind = ObjectiveKind::offset_ab;
  std::string name;
};

/// Offset models: cosine of the variant's offsets over separately encoded
/// pairs. Classifier: positive-class probability of the concatenated quad.
double score_quad(const ScoringModel& model, const AnalogyQuad& quad);

/// Positive iff score > threshold; ties are negative.
inline bool classify(double score, double threshold) { return score > threshold; }

struct ScoredQuad {
  AnalogyQuad quad;
  double score = 0.0;
  bool predicted = false;
  int fold = -1;
  std::string run;
};

std::vector<ScoredQuad> score_quads(const ScoringModel& model, const std::vector<const AnalogyQuad*>& quads,
                                    double threshold, int fold = -1, const std::string& run = "");

/// Threshold maximising accuracy on already-scored data (midpoints between
/// neighbouring distinct scores; the lowest maximiser wins).
double calibrate_threshold(const std::vector<ScoredQuad>& scored);

struct Cell {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  bool operator==(const Cell&) const = default;
};

struct Comparison {
  std::string cell;
  std::string baseline_cell;
  double z = 0.0;
  double p = 1.0;
  /// +1 accuracy went up, -1 down, 0 unchanged.
  int direction = 0;
  bool significant = false;
};

struct EvaluationReport {
  std::map<std::string, Cell> cells;
  std::vector<Comparison> comparisons;
  std::size_t runs_aggregated = 1;
  std::vector<std::string> warnings;
  /// Mean of per-run accuracies; filled by aggregate_runs.
  std::map<std::string, double> macro_accuracy;
  std::map<std::string, std::string> meta;
};

/// Category labels of a quad: "OVERALL", its source, and for SCAN its subsplit.
std::vector<std::string> quad_categories(const AnalogyQuad& q);
inline std::string cell_key(std::string_view category, std::string_view polarity) {
  return std::string(category) + "/" + std::string(polarity);
}

/// Accuracy per category x {all, pos, neg} from predicted labels.
EvaluationReport classification_report(const std::vector<ScoredQuad>& scored);
EvaluationReport evaluate_classification(const ScoringModel& model, const std::vector<const AnalogyQuad*>& heldout,
                                         double threshold);

/// Each positive against its partner negative; correct iff the positive
/// scores strictly higher. Cells are category/all.
EvaluationReport ranking_report(const std::vector<ScoredQuad>& scored);
EvaluationReport evaluate_ranking(const ScoringModel& model, const std::vector<const AnalogyQuad*>& heldout);

// --- distractor protocol -------------------------------------------------------

enum class Distance { near, far };
enum class Salience { high, low };
enum class Relation { categorical, causal, compositional };

struct DistractorItem {
  std::string a, b, c, d_correct, d_distractor;
  Distance distance = Distance::near;
  Salience salience = Salience::high;
  Relation relation = Relation::categorical;
};

std::string_view to_string(Distance d);
std::string_view to_string(Salience s);
std::string_view to_string(Relation r);

/// CSV a,b,c,d_correct,d_distractor,distance,salience,relation; an initial
/// header row is skipped.
std::vector<DistractorItem> parse_distractor_csv(std::string_view content);
void validate_distractor_item(const DistractorItem& item);

struct DistractorOutcome {
  DistractorItem item;
  double score_correct = 0.0;
  double score_distractor = 0.0;
  bool correct = false;
};

std::vector<DistractorOutcome> score_distractor_items(const ScoringModel& model, const std::vector<DistractorItem>& items);
/// Cells keyed "<distance>/<relation>/<salience>", each axis also "all".
EvaluationReport distractor_report(const std::vector<DistractorOutcome>& outcomes);
EvaluationReport evaluate_distractor(const ScoringModel& model, const std::vector<DistractorItem>& items);

// --- word similarity -------------------------------------------------------------

struct WordSimPair {
  std::string w1, w2;
  double gold = 0.0;
};

/// CSV word1,word2,gold_score with optional header; gold must be in [0, 10].
std::vector<WordSimPair> parse_wordsim_csv(std::string_view content);

struct WordSimResult {
  double rho = 0.0;
  std::size_t n = 0;
  std::vector<std::string> skipped;
};

WordSimResult evaluate_wordsim(const EmbeddingBackend& backend, const std::vector<WordSimPair>& pairs);

// --- frequency / OOV analyses -------------------------------------------------------

struct MeanCell {
  double sum = 0.0;
  std::size_t count = 0;
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

/// Mean per-quad entity frequency keyed "<true_pos|true_neg|all>/<pred_pos|pred_neg|all>".
struct FrequencyBreakdown {
  std::map<std::string, MeanCell> cells;
  std::size_t excluded_quads = 0;
  std::size_t unknown_terms = 0;
};

FrequencyBreakdown frequency_breakdown(const std::vector<ScoredQuad>& scored, const FrequencyTable& freq);

/// Classification accuracy keyed "<true_pos|true_neg|all>/<no_oov|oov|all>".
struct OovBreakdown {
  std::map<std::string, Cell> cells;
  std::size_t no_oov_quads = 0;
  std::size_t oov_quads = 0;
  std::vector<std::string> warnings;
};

bool quad_has_oov(const EmbeddingBackend& backend, const AnalogyQuad& q);
OovBreakdown oov_breakdown(const std::vector<ScoredQuad>& scored, const EmbeddingBackend& backend);

struct FrequencyHistogram {
  std::vector<double> edges;
  /// Series per piece count 1..max_series (the last one collects >= max_series).
  std::map<std::size_t, std::vector<std::size_t>> counts;
  std::size_t unknown = 0;
  std::size_t above_limit = 0;
  std::size_t out_of_range = 0;
};

/// Histogram of frequency by subword piece count over bins [e_i, e_i+1),
/// restricted to words seen fewer than `max_frequency` times.
FrequencyHistogram frequency_histogram(const std::vector<std::string>& words, const FrequencyTable& freq,
                                       const EmbeddingBackend& backend, const std::vector<double>& edges,
                                       double max_frequency = 100000.0, std::size_t max_series = 4);

// --- aggregation --------------------------------------------------------------------

enum class AggregateMode { micro, macro };

/// Pools numerators and denominators per cell; macro accuracies (over runs
/// with a non-empty cell) are kept alongside. Reports must share identical
/// cell keys.
EvaluationReport aggregate_runs(const std::vector<EvaluationReport>& reports);

/// z-test of every shared cell against the baseline report.
void compare_to_baseline(EvaluationReport& report, const EvaluationReport& baseline, double alpha = 0.05);

}  // namespace analogion
