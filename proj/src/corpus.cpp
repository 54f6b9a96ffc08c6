#include "analogion/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "analogion/errors.hpp"
#include "analogion/text.hpp"
#include "json.hpp"

namespace analogion {

using nlohmann::json;

std::string_view to_string(Source s) {
  switch (s) {
    case Source::SAT: return "SAT";
    case Source::U2: return "U2";
    case Source::U4: return "U4";
    case Source::SCAN: return "SCAN";
  }
  return "?";
}

std::string_view to_string(ScanSubtype s) {
  return s == ScanSubtype::science ? "science" : "metaphor";
}

Source parse_source(std::string_view s) {
  if (s == "SAT") return Source::SAT;
  if (s == "U2") return Source::U2;
  if (s == "U4") return Source::U4;
  if (s == "SCAN") return Source::SCAN;
  throw ValidationError("unknown source '" + std::string(s) + "'");
}

ScanSubtype parse_scan_subtype(std::string_view s) {
  if (s == "science") return ScanSubtype::science;
  if (s == "metaphor") return ScanSubtype::metaphor;
  throw ValidationError("unknown SCAN subtype '" + std::string(s) + "'");
}

void validate_quad(const AnalogyQuad& q) {
  for (const auto* term : q.terms()) {
    if (text::normalize_space(*term).empty())
      throw ValidationError("quad " + q.id + " has an empty term");
    if (term->find('\t') != std::string::npos || term->find('\n') != std::string::npos)
      throw ValidationError("quad " + q.id + " has a term containing a tab or newline");
  }
  if (q.scan_subtype.has_value() != (q.source == Source::SCAN))
    throw ValidationError("quad " + q.id + ": scan_subtype must be present iff source is SCAN");
  if (q.label && q.partner_id)
    throw ValidationError("quad " + q.id + ": positive quads carry no partner_id");
  if (!q.label && !q.partner_id)
    throw ValidationError("quad " + q.id + ": negative quad without partner_id");
}

std::string quad_key(std::string_view a, std::string_view b, std::string_view c, std::string_view d) {
  std::string key = text::fold(a);
  for (auto t : {b, c, d}) {
    key.push_back('\x1f');
    key += text::fold(t);
  }
  return key;
}

std::string quad_key(const AnalogyQuad& q) { return quad_key(q.a, q.b, q.c, q.d); }

std::size_t BalancedCorpus::positives() const {
  return static_cast<std::size_t>(std::count_if(quads.begin(), quads.end(), [](const auto& q) { return q.label; }));
}

std::size_t BalancedCorpus::negatives() const { return quads.size() - positives(); }

std::size_t BalancedCorpus::partner_index(std::size_t row) const {
  const auto& q = quads.at(row);
  if (q.label) return negative_of.at(row);
  return std::stoul(*q.partner_id);
}

std::vector<std::size_t> FoldSplit::rows_in_fold(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> FoldSplit::rows_outside_fold(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) rows.push_back(i);
  return rows;
}

// --- ingestion -------------------------------------------------------------

namespace {

std::pair<std::string, std::string> read_pair(const json& j, std::size_t line, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string())
    throw ParseError(std::string(what) + " must be a [string, string] pair", line);
  auto first = text::normalize_space(j[0].get<std::string>());
  auto second = text::normalize_space(j[1].get<std::string>());
  if (first.empty() || second.empty()) throw ParseError(std::string(what) + " has an empty term", line);
  return {std::move(first), std::move(second)};
}

std::vector<std::string> read_string_list(const json& j, std::size_t line, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array of strings", line);
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) throw ParseError(std::string(what) + " must be an array of strings", line);
    auto s = text::normalize_space(item.get<std::string>());
    if (s.empty()) throw ParseError(std::string(what) + " contains an empty entity", line);
    out.push_back(std::move(s));
  }
  return out;
}

template <typename Fn>
void for_each_line(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    ++line_no;
    auto line = content.substr(start, end - start);
    if (!text::normalize_space(line).empty()) fn(line, line_no);
    if (end == content.size()) break;
    start = end + 1;
  }
}

json parse_json_line(std::string_view line, std::size_t line_no) {
  try {
    auto j = json::parse(line);
    if (!j.is_object()) throw ParseError("expected a JSON object", line_no);
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
}

}  // namespace

std::vector<MultipleChoiceRecord> parse_multiple_choice(std::string_view content, Source source) {
  std::vector<MultipleChoiceRecord> records;
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    auto j = parse_json_line(line, line_no);
    if (!j.contains("stem") || !j.contains("choices") || !j.contains("answer"))
      throw ParseError("record needs stem, choices and answer", line_no);
    MultipleChoiceRecord rec;
    rec.stem = read_pair(j["stem"], line_no, "stem");
    const auto& choices = j["choices"];
    if (!choices.is_array()) throw ParseError("choices must be an array", line_no);
    for (const auto& c : choices) rec.choices.push_back(read_pair(c, line_no, "choice"));
    if (!j["answer"].is_number_integer()) throw ParseError("answer must be an integer", line_no);
    auto answer = j["answer"].get<long long>();
    if (rec.choices.size() < 2)
      throw ValidationError(std::string(to_string(source)) + " line " + std::to_string(line_no) +
                            ": at least 2 choices required");
    if (answer < 0 || static_cast<std::size_t>(answer) >= rec.choices.size())
      throw ValidationError(std::string(to_string(source)) + " line " + std::to_string(line_no) +
                            ": answer index " + std::to_string(answer) + " out of range");
    rec.answer_index = static_cast<std::size_t>(answer);
    records.push_back(std::move(rec));
  });
  return records;
}

std::vector<ScanTopicPair> parse_scan_topics(std::string_view content) {
  std::vector<ScanTopicPair> topics;
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    auto j = parse_json_line(line, line_no);
    for (const char* key : {"source", "target", "source_entities", "target_entities", "subtype"})
      if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line_no);
    ScanTopicPair t;
    if (!j["source"].is_string() || !j["target"].is_string() || !j["subtype"].is_string())
      throw ParseError("source, target and subtype must be strings", line_no);
    t.source_name = j["source"].get<std::string>();
    t.target_name = j["target"].get<std::string>();
    t.source_entities = read_string_list(j["source_entities"], line_no, "source_entities");
    t.target_entities = read_string_list(j["target_entities"], line_no, "target_entities");
    try {
      t.subtype = parse_scan_subtype(j["subtype"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    topics.push_back(std::move(t));
  });
  return topics;
}

std::pair<AnalogyQuad, AnalogyQuad> mc_to_quads(const MultipleChoiceRecord& record, Rng& rng, Source source,
                                                 const std::string& id) {
  if (record.choices.size() < 2) throw ValidationError("record " + id + ": only one choice, cannot form a negative");
  if (record.answer_index >= record.choices.size())
    throw ValidationError("record " + id + ": answer index out of range");

  std::vector<std::size_t> incorrect;
  for (std::size_t i = 0; i < record.choices.size(); ++i)
    if (i != record.answer_index) incorrect.push_back(i);
  const auto& wrong = record.choices[incorrect[rng.uniform_index(incorrect.size())]];
  const auto& right = record.choices[record.answer_index];

  AnalogyQuad pos{id, record.stem.first, record.stem.second, right.first, right.second, true, source, {}, {}};
  AnalogyQuad neg{id + ":neg", record.stem.first, record.stem.second, wrong.first, wrong.second,
                  false, source, {}, id};
  return {std::move(pos), std::move(neg)};
}

std::vector<AnalogyQuad> mc_records_to_quads(const std::vector<MultipleChoiceRecord>& records, Rng& rng,
                                             Source source) {
  std::vector<AnalogyQuad> quads;
  quads.reserve(records.size() * 2);
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [pos, neg] = mc_to_quads(records[i], rng, source, std::string(to_string(source)) + ":" + std::to_string(i));
    quads.push_back(std::move(pos));
    quads.push_back(std::move(neg));
  }
  return quads;
}

std::vector<AnalogyQuad> dedup_u4_against_u2(const std::vector<AnalogyQuad>& u2, const std::vector<AnalogyQuad>& u4) {
  std::unordered_set<std::string> seen;
  for (const auto& q : u2) seen.insert(quad_key(q));

  std::unordered_set<std::string> dropped_ids;
  for (const auto& q : u4) {
    if (!seen.count(quad_key(q))) continue;
    dropped_ids.insert(q.label ? q.id : q.partner_id.value_or(q.id));
  }
  std::vector<AnalogyQuad> out;
  out.reserve(u4.size());
  for (const auto& q : u4) {
    const std::string& anchor = q.label ? q.id : q.partner_id.value_or(q.id);
    if (!dropped_ids.count(anchor)) out.push_back(q);
  }
  return out;
}

std::vector<AnalogyQuad> expand_scan_topic(const ScanTopicPair& topic, std::string_view id_prefix) {
  const auto n = topic.source_entities.size();
  if (n != topic.target_entities.size())
    throw ValidationError("SCAN topic " + topic.source_name + "/" + topic.target_name +
                          ": source and target entity lists differ in length");
  if (n < 2)
    throw ValidationError("SCAN topic " + topic.source_name + "/" + topic.target_name + ": needs at least 2 entities");

  std::vector<AnalogyQuad> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      AnalogyQuad q;
      q.id = std::string(id_prefix) + ":" + std::to_string(i) + "-" + std::to_string(j);
      q.a = topic.source_entities[i];
      q.b = topic.source_entities[j];
      q.c = topic.target_entities[i];
      q.d = topic.target_entities[j];
      q.label = true;
      q.source = Source::SCAN;
      q.scan_subtype = topic.subtype;
      out.push_back(std::move(q));
    }
  }
  return out;
}

std::vector<AnalogyQuad> generate_scan_negatives(const std::vector<AnalogyQuad>& positives, Rng& rng,
                                                 int max_retries) {
  std::unordered_set<std::string> positive_keys;
  std::unordered_set<std::string> distinct_cd;
  for (const auto& p : positives) {
    positive_keys.insert(quad_key(p));
    distinct_cd.insert(text::fold(p.c) + '\x1f' + text::fold(p.d));
  }
  if (distinct_cd.size() < 2)
    throw GenerationError("SCAN negatives need at least two distinct (c, d) pairs");

  const std::size_t n = positives.size();
  std::vector<AnalogyQuad> negatives;
  negatives.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = positives[i];
    const std::string own_cd = text::fold(p.c) + '\x1f' + text::fold(p.d);
    bool accepted = false;
    for (int attempt = 0; attempt < max_retries && !accepted; ++attempt) {
      std::size_t j = static_cast<std::size_t>(rng.uniform_index(n - 1));
      if (j >= i) ++j;
      const auto& donor = positives[j];
      if (text::fold(donor.c) + '\x1f' + text::fold(donor.d) == own_cd) continue;
      if (positive_keys.count(quad_key(p.a, p.b, donor.c, donor.d))) continue;
      AnalogyQuad neg = p;
      neg.id = p.id + ":neg";
      neg.c = donor.c;
      neg.d = donor.d;
      neg.label = false;
      neg.partner_id = p.id;
      negatives.push_back(std::move(neg));
      accepted = true;
    }
    if (!accepted)
      throw GenerationError("no admissible SCAN negative for " + p.id + " after " + std::to_string(max_retries) +
                            " draws");
  }
  return negatives;
}

std::size_t drop_duplicate_positives(std::vector<AnalogyQuad>& positives) {
  std::unordered_set<std::string> seen;
  const auto before = positives.size();
  std::erase_if(positives, [&](const AnalogyQuad& q) { return !seen.insert(quad_key(q)).second; });
  return before - positives.size();
}

namespace {

// Validates a row-indexed quad list and fills counts and partner links.
BalancedCorpus finalize_rows(std::vector<AnalogyQuad> rows) {
  BalancedCorpus corpus;
  std::map<Source, SourceCounts> counts;
  for (const auto& q : rows) {
    validate_quad(q);
    auto& c = counts[q.source];
    (q.label ? c.positives : c.negatives) += 1;
  }
  std::string imbalanced;
  for (const auto& [src, c] : counts)
    if (c.positives != c.negatives)
      imbalanced += std::string(imbalanced.empty() ? "" : ", ") + std::string(to_string(src)) + " (" +
                    std::to_string(c.positives) + " positive / " + std::to_string(c.negatives) + " negative)";
  if (!imbalanced.empty()) throw ValidationError("corpus is not balanced: " + imbalanced);

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> negative_of(rows.size(), kNone);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& q = rows[i];
    if (q.label) continue;
    std::size_t partner = 0;
    try {
      partner = std::stoul(*q.partner_id);
    } catch (const std::exception&) {
      throw ValidationError("negative " + q.id + " has unresolvable partner '" + *q.partner_id + "'");
    }
    if (partner >= rows.size() || !rows[partner].label)
      throw ValidationError("negative " + q.id + " does not reference a positive quad");
    if (negative_of[partner] != kNone)
      throw ValidationError("positive " + rows[partner].id + " has more than one negative");
    if (text::fold(rows[partner].a) != text::fold(q.a) || text::fold(rows[partner].b) != text::fold(q.b))
      throw ValidationError("negative " + q.id + " does not share (a, b) with its partner");
    negative_of[partner] = i;
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].label && negative_of[i] == kNone)
      throw ValidationError("positive " + rows[i].id + " has no partner negative");

  std::unordered_set<std::string> tuples;
  for (const auto& q : rows)
    if (!tuples.insert(quad_key(q) + (q.label ? "\x1f" "1" : "\x1f" "0")).second)
      throw ValidationError("duplicate quad " + q.a + ":" + q.b + "::" + q.c + ":" + q.d);

  corpus.quads = std::move(rows);
  corpus.per_source_counts = std::move(counts);
  corpus.negative_of = std::move(negative_of);
  return corpus;
}

}  // namespace

BalancedCorpus assemble_corpus(const std::vector<std::vector<AnalogyQuad>>& parts) {
  std::vector<AnalogyQuad> rows;
  for (const auto& part : parts) {
    std::unordered_map<std::string, std::size_t> local;
    const std::size_t base = rows.size();
    for (std::size_t i = 0; i < part.size(); ++i)
      if (!local.emplace(part[i].id, base + i).second)
        throw ValidationError("duplicate quad id '" + part[i].id + "' within a source part");
    for (const auto& q : part) {
      AnalogyQuad copy = q;
      if (!q.label) {
        if (!q.partner_id) throw ValidationError("negative " + q.id + " has no partner_id");
        auto it = local.find(*q.partner_id);
        if (it == local.end()) throw ValidationError("negative " + q.id + " references missing partner " + *q.partner_id);
        copy.partner_id = std::to_string(it->second);
      }
      rows.push_back(std::move(copy));
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].id = std::to_string(i);
  return finalize_rows(std::move(rows));
}

FoldSplit make_folds(const BalancedCorpus& corpus, int k, Rng& rng) {
  if (k <= 1) throw ConfigError("fold count k must be at least 2, got " + std::to_string(k));
  FoldSplit split;
  split.k = k;
  split.fold_of.assign(corpus.quads.size(), -1);

  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < corpus.quads.size(); ++i)
    if (corpus.quads[i].label) positives.push_back(i);
  rng.shuffle(std::span<std::size_t>(positives));

  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (std::size_t p = 0; p < positives.size(); ++p) {
    const int fold = static_cast<int>(p % static_cast<std::size_t>(k));
    split.fold_of[positives[p]] = fold;
    split.fold_of[corpus.negative_of.at(positives[p])] = fold;
    sizes[static_cast<std::size_t>(fold)] += 2;
  }
  for (int f = 0; f < k; ++f)
    if (sizes[static_cast<std::size_t>(f)] == 0) split.warnings.push_back("fold " + std::to_string(f) + " is empty");
  return split;
}

AnalogyQuad permute_analogy(const AnalogyQuad& quad, int index) {
  AnalogyQuad out = quad;
  const std::string &a = quad.a, &b = quad.b, &c = quad.c, &d = quad.d;
  auto set = [&](const std::string& w, const std::string& x, const std::string& y, const std::string& z) {
    out.a = w;
    out.b = x;
    out.c = y;
    out.d = z;
  };
  switch (index) {
    case 1: break;
    case 2: set(b, a, d, c); break;
    case 3: set(c, d, a, b); break;
    case 4: set(d, c, b, a); break;
    case 5: set(a, c, b, d); break;
    case 6: set(c, a, d, b); break;
    case 7: set(b, d, a, c); break;
    case 8: set(d, b, c, a); break;
    default: throw ValidationError("permutation index must be in 1..8, got " + std::to_string(index));
  }
  return out;
}

PreparedCorpus prepare_corpus(const CorpusSourceText& sources, std::uint64_t seed, int k) {
  PreparedCorpus out;

  Rng sat_rng(derive_seed(seed, 1));
  auto sat = mc_records_to_quads(parse_multiple_choice(sources.sat, Source::SAT), sat_rng, Source::SAT);
  Rng u2_rng(derive_seed(seed, 2));
  auto u2 = mc_records_to_quads(parse_multiple_choice(sources.u2, Source::U2), u2_rng, Source::U2);
  Rng u4_rng(derive_seed(seed, 3));
  auto u4_all = mc_records_to_quads(parse_multiple_choice(sources.u4, Source::U4), u4_rng, Source::U4);
  auto u4 = dedup_u4_against_u2(u2, u4_all);
  out.u4_removed_as_u2_duplicates = u4_all.size() - u4.size();

  std::vector<AnalogyQuad> scan_pos;
  const auto topics = parse_scan_topics(sources.scan);
  for (std::size_t t = 0; t < topics.size(); ++t) {
    auto quads = expand_scan_topic(topics[t], "SCAN:" + std::to_string(t));
    scan_pos.insert(scan_pos.end(), std::make_move_iterator(quads.begin()), std::make_move_iterator(quads.end()));
  }
  out.scan_duplicate_positives = drop_duplicate_positives(scan_pos);
  std::vector<AnalogyQuad> scan;
  if (!scan_pos.empty()) {
    Rng scan_rng(derive_seed(seed, 4));
    auto scan_neg = generate_scan_negatives(scan_pos, scan_rng);
    scan.reserve(scan_pos.size() * 2);
    for (std::size_t i = 0; i < scan_pos.size(); ++i) {
      scan.push_back(std::move(scan_pos[i]));
      scan.push_back(std::move(scan_neg[i]));
    }
  }

  out.corpus = assemble_corpus({std::move(scan), std::move(sat), std::move(u2), std::move(u4)});
  Rng fold_rng(derive_seed(seed, 5));
  out.folds = make_folds(out.corpus, k, fold_rng);
  return out;
}

// --- file formats ------------------------------------------------------------

namespace {
constexpr const char* kTsvHeader = "a\tb\tc\td\tlabel\tsource\tscan_subtype\tpartner_id";
}

void write_corpus_tsv(const BalancedCorpus& corpus, std::ostream& out) {
  out << kTsvHeader << '\n';
  for (const auto& q : corpus.quads) {
    out << q.a << '\t' << q.b << '\t' << q.c << '\t' << q.d << '\t' << (q.label ? '1' : '0') << '\t'
        << to_string(q.source) << '\t' << (q.scan_subtype ? to_string(*q.scan_subtype) : "") << '\t'
        << q.partner_id.value_or("") << '\n';
  }
}

BalancedCorpus read_corpus_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty corpus file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTsvHeader) throw ParseError("unexpected corpus header", 1);
  std::vector<AnalogyQuad> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != 8) throw ParseError("expected 8 tab-separated columns", line_no);
    AnalogyQuad q;
    q.id = std::to_string(rows.size());
    q.a = f[0];
    q.b = f[1];
    q.c = f[2];
    q.d = f[3];
    if (f[4] != "0" && f[4] != "1") throw ParseError("label must be 0 or 1", line_no);
    q.label = f[4] == "1";
    try {
      q.source = parse_source(f[5]);
      if (!f[6].empty()) q.scan_subtype = parse_scan_subtype(f[6]);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!f[7].empty()) q.partner_id = f[7];
    rows.push_back(std::move(q));
  }
  return finalize_rows(std::move(rows));
}

std::string folds_to_json(const FoldSplit& folds) {
  json j;
  j["k"] = folds.k;
  json assignments = json::object();
  for (std::size_t i = 0; i < folds.fold_of.size(); ++i) assignments[std::to_string(i)] = folds.fold_of[i];
  j["assignments"] = std::move(assignments);
  return j.dump(1) + "\n";
}

FoldSplit folds_from_json(std::string_view content, std::size_t corpus_size) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed fold file: ") + e.what(), 1);
  }
  FoldSplit split;
  split.k = j.at("k").get<int>();
  split.fold_of.assign(corpus_size, -1);
  for (const auto& [key, value] : j.at("assignments").items()) {
    const auto row = std::stoul(key);
    if (row >= corpus_size) throw ValidationError("fold file references row " + key + " beyond the corpus");
    const int fold = value.get<int>();
    if (fold < 0 || fold >= split.k) throw ValidationError("fold index out of range for row " + key);
    split.fold_of[row] = fold;
  }
  for (std::size_t i = 0; i < corpus_size; ++i)
    if (split.fold_of[i] < 0) throw ValidationError("fold file has no assignment for row " + std::to_string(i));
  return split;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace analogion
