#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "analogion/rng.hpp"

namespace analogion {

enum class Source { SAT, U2, U4, SCAN };
enum class ScanSubtype { science, metaphor };

std::string_view to_string(Source s);
std::string_view to_string(ScanSubtype s);
Source parse_source(std::string_view s);
ScanSubtype parse_scan_subtype(std::string_view s);

/// One a:b::c:d instance.
struct AnalogyQuad {
  std::string id;
  std::string a, b, c, d;
  bool label = true;
  Source source = Source::SAT;
  std::optional<ScanSubtype> scan_subtype;
  /// Set on negatives only: id of the positive this negative was derived from.
  std::optional<std::string> partner_id;

  std::array<const std::string*, 4> terms() const { return {&a, &b, &c, &d}; }
};

/// Checks the per-quad invariants (non-empty terms, subtype iff SCAN,
/// partner only on negatives). Throws ValidationError.
void validate_quad(const AnalogyQuad& q);

/// Case-folded, whitespace-normalized (a, b, c, d) used for duplicate checks.
std::string quad_key(const AnalogyQuad& q);
std::string quad_key(std::string_view a, std::string_view b, std::string_view c, std::string_view d);

struct MultipleChoiceRecord {
  std::pair<std::string, std::string> stem;
  std::vector<std::pair<std::string, std::string>> choices;
  std::size_t answer_index = 0;
};

struct ScanTopicPair {
  std::string source_name;
  std::string target_name;
  std::vector<std::string> source_entities;
  std::vector<std::string> target_entities;
  ScanSubtype subtype = ScanSubtype::science;
};

struct SourceCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t total() const { return positives + negatives; }
};

/// Assembled, balanced corpus. Quad ids equal their row index as a decimal
/// string, so `quads[std::stoul(q.partner_id)]` is the partner positive.
struct BalancedCorpus {
  std::vector<AnalogyQuad> quads;
  std::map<Source, SourceCounts> per_source_counts;

  std::size_t positives() const;
  std::size_t negatives() const;
  /// Row index of a quad's partner (negatives) or of its negative (positives).
  std::size_t partner_index(std::size_t row) const;

  /// positive row -> negative row, built by assemble_corpus.
  std::vector<std::size_t> negative_of;
};

struct FoldSplit {
  int k = 10;
  /// fold index per corpus row
  std::vector<int> fold_of;
  std::vector<std::string> warnings;

  std::vector<std::size_t> rows_in_fold(int fold) const;
  std::vector<std::size_t> rows_outside_fold(int fold) const;
};

// --- ingestion -----------------------------------------------------------

/// Parses multiple-choice JSONL content ({"stem":[a,b],"choices":[[c,d],...],
/// "answer":int} per line). Blank lines are skipped.
std::vector<MultipleChoiceRecord> parse_multiple_choice(std::string_view content, Source source);

/// Parses SCAN JSONL content.
std::vector<ScanTopicPair> parse_scan_topics(std::string_view content);

/// Positive from the answer choice, negative from one uniformly drawn
/// incorrect choice. Ids are `id` and `id + ":neg"`.
std::pair<AnalogyQuad, AnalogyQuad> mc_to_quads(const MultipleChoiceRecord& record, Rng& rng,
                                                 Source source, const std::string& id);

/// mc_to_quads over a whole file; output interleaves (positive, negative).
std::vector<AnalogyQuad> mc_records_to_quads(const std::vector<MultipleChoiceRecord>& records,
                                             Rng& rng, Source source);

/// Removes every U4 positive/negative pair whose positive or negative matches
/// any U2 quad on normalized (a, b, c, d).
std::vector<AnalogyQuad> dedup_u4_against_u2(const std::vector<AnalogyQuad>& u2,
                                             const std::vector<AnalogyQuad>& u4);

/// One positive per unordered index pair i < j, oriented source entities
/// first: (src[i], src[j], tgt[i], tgt[j]).
std::vector<AnalogyQuad> expand_scan_topic(const ScanTopicPair& topic, std::string_view id_prefix = "SCAN");

/// For each positive, a negative (a, b, c', d') whose (c', d') is the intact
/// pair of another positive. Draws that coincide with any positive are
/// resampled, up to `max_retries` per positive.
std::vector<AnalogyQuad> generate_scan_negatives(const std::vector<AnalogyQuad>& positives, Rng& rng,
                                                 int max_retries = 1000);

/// Drops later duplicates of normalized (a, b, c, d); returns count removed.
std::size_t drop_duplicate_positives(std::vector<AnalogyQuad>& positives);

/// Concatenates parts, checks balance/pairing/duplicates and renumbers ids
/// to row indices.
BalancedCorpus assemble_corpus(const std::vector<std::vector<AnalogyQuad>>& parts);

/// Random k-way partition of the positives, round-robin over a seeded
/// shuffle; negatives follow their partner.
FoldSplit make_folds(const BalancedCorpus& corpus, int k, Rng& rng);

/// Index 1..8 of the proportional-analogy symmetry group.
AnalogyQuad permute_analogy(const AnalogyQuad& quad, int index);

// --- whole-pipeline helper -------------------------------------------------

struct CorpusSourceText {
  std::string sat;
  std::string u2;
  std::string u4;
  std::string scan;
};

struct PreparedCorpus {
  BalancedCorpus corpus;
  FoldSplit folds;
  std::size_t u4_removed_as_u2_duplicates = 0;
  std::size_t scan_duplicate_positives = 0;
};

/// Runs ingestion, negative generation, assembly and fold assignment with
/// per-stage seeds derived from `seed`.
PreparedCorpus prepare_corpus(const CorpusSourceText& sources, std::uint64_t seed, int k = 10);

// --- file formats ----------------------------------------------------------

void write_corpus_tsv(const BalancedCorpus& corpus, std::ostream& out);
BalancedCorpus read_corpus_tsv(std::istream& in);

std::string folds_to_json(const FoldSplit& folds);
FoldSplit folds_from_json(std::string_view json, std::size_t corpus_size);

std::string read_file(const std::string& path);

}  // namespace analogion
