#pragma once

#include <string>
#include <utility>
#include <vector>

#include "analogion/evaluation.hpp"

namespace analogion {

std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(std::string_view json);

/// key,correct,total,accuracy per line.
std::string report_to_csv(const EvaluationReport& report);

using NamedReport = std::pair<std::string, const EvaluationReport*>;

// Markdown emitters. Cells carry an arrow (up/down/flat) when the report has
// a baseline comparison for that cell and are bold when p < 0.05.
std::string classification_table_markdown(const std::string& title, const std::vector<NamedReport>& models,
                                          AggregateMode mode = AggregateMode::micro);
std::string ranking_table_markdown(const std::string& title, const std::vector<NamedReport>& models,
                                   AggregateMode mode = AggregateMode::micro);
std::string distractor_table_markdown(const std::string& title, const std::vector<NamedReport>& models,
                                      AggregateMode mode = AggregateMode::micro);

struct WordSimRow {
  std::string dataset;
  std::vector<std::pair<std::string, double>> rho_by_model;
};
std::string wordsim_table_markdown(const std::vector<WordSimRow>& rows);

std::string frequency_table_markdown(const std::string& title, const FrequencyBreakdown& before,
                                     const FrequencyBreakdown* after);
std::string oov_table_markdown(const std::string& title, const OovBreakdown& before, const OovBreakdown* after);

std::string histogram_csv(const FrequencyHistogram& h);

/// Per-item score dump: row id, fold, label, score, predicted, source, subtype.
std::string scored_quads_tsv(const std::vector<ScoredQuad>& scored);
std::vector<ScoredQuad> scored_quads_from_tsv(std::string_view tsv, const BalancedCorpus& corpus);

}  // namespace analogion
