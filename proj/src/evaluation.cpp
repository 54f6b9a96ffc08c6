#include "analogion/evaluation.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "analogion/errors.hpp"
#include "analogion/text.hpp"

namespace analogion {

double score_quad(const ScoringModel& model, const AnalogyQuad& quad) {
  if (!model.backend) throw ConfigError("scoring model has no backend");
  if (model.kind == ObjectiveKind::simple_classifier) {
    const auto* ctx = dynamic_cast<const ContextualBackend*>(model.backend);
    if (!ctx) throw ConfigError("the simple classifier needs a contextual backend");
    return concat_classifier_score(*ctx, quad);
  }
  const auto v = encode_quad_for_offsets(*model.backend, quad.a, quad.b, quad.c, quad.d);
  return offset_score(v.a, v.b, v.c, v.d, offset_variant(model.kind)).value;
}

std::vector<ScoredQuad> score_quads(const ScoringModel& model, const std::vector<const AnalogyQuad*>& quads,
                                    double threshold, int fold, const std::string& run) {
  std::vector<ScoredQuad> out;
  out.reserve(quads.size());
  for (const auto* q : quads) {
    const double s = score_quad(model, *q);
    out.push_back({*q, s, classify(s, threshold), fold, run});
  }
  return out;
}

double calibrate_threshold(const std::vector<ScoredQuad>& scored) {
  if (scored.empty()) return 0.0;
  std::vector<double> scores;
  for (const auto& s : scored) scores.push_back(s.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> candidates{scores.front() - 1.0};
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) candidates.push_back(0.5 * (scores[i] + scores[i + 1]));
  candidates.push_back(scores.back());
  double best = candidates.front();
  std::size_t best_correct = 0;
  for (double t : candidates) {
    std::size_t correct = 0;
    for (const auto& s : scored) correct += classify(s.score, t) == s.quad.label;
    if (correct > best_correct) {
      best_correct = correct;
      best = t;
    }
  }
  return best;
}

std::vector<std::string> quad_categories(const AnalogyQuad& q) {
  std::vector<std::string> cats{"OVERALL", std::string(to_string(q.source))};
  if (q.scan_subtype) cats.push_back("SCAN-" + std::string(to_string(*q.scan_subtype)));
  return cats;
}

namespace {

const std::vector<std::string>& expected_categories() {
  static const std::vector<std::string> cats{"OVERALL", "SAT", "U2", "U4", "SCAN", "SCAN-science", "SCAN-metaphor"};
  return cats;
}

void warn_missing(EvaluationReport& report, const std::vector<std::string>& polarities) {
  for (const auto& cat : expected_categories())
    for (const auto& pol : polarities)
      if (!report.cells.count(cell_key(cat, pol)))
        report.warnings.push_back("no items for " + cell_key(cat, pol) + "; cell omitted");
}

}  // namespace

EvaluationReport classification_report(const std::vector<ScoredQuad>& scored) {
  EvaluationReport report;
  for (const auto& s : scored) {
    const bool correct = s.predicted == s.quad.label;
    for (const auto& cat : quad_categories(s.quad)) {
      for (const char* pol : {"all", s.quad.label ? "pos" : "neg"}) {
        auto& cell = report.cells[cell_key(cat, pol)];
        cell.correct += correct;
        cell.total += 1;
      }
    }
  }
  warn_missing(report, {"all", "pos", "neg"});
  report.meta["protocol"] = "classification";
  return report;
}

EvaluationReport evaluate_classification(const ScoringModel& model, const std::vector<const AnalogyQuad*>& heldout,
                                         double threshold) {
  if (heldout.empty()) throw ValidationError("classification needs a non-empty held-out set");
  auto report = classification_report(score_quads(model, heldout, threshold));
  report.meta["model"] = model.name;
  return report;
}

EvaluationReport ranking_report(const std::vector<ScoredQuad>& scored) {
  std::unordered_map<std::string, const ScoredQuad*> negative_for;
  for (const auto& s : scored)
    if (!s.quad.label) negative_for[*s.quad.partner_id] = &s;
  EvaluationReport report;
  for (const auto& s : scored) {
    if (!s.quad.label) continue;
    auto it = negative_for.find(s.quad.id);
    if (it == negative_for.end()) throw ValidationError("positive " + s.quad.id + " has no partner negative in the set");
    const bool correct = s.score > it->second->score;
    for (const auto& cat : quad_categories(s.quad)) {
      auto& cell = report.cells[cell_key(cat, "all")];
      cell.correct += correct;
      cell.total += 1;
    }
  }
  if (report.cells.empty() && !scored.empty()) throw ValidationError("ranking set contains no positives");
  warn_missing(report, {"all"});
  report.meta["protocol"] = "ranking";
  return report;
}

EvaluationReport evaluate_ranking(const ScoringModel& model, const std::vector<const AnalogyQuad*>& heldout) {
  std::set<std::string> positives;
  for (const auto* q : heldout)
    if (q->label) positives.insert(q->id);
  for (const auto* q : heldout)
    if (!q->label && !positives.count(*q->partner_id))
      throw ValidationError("negative " + q->id + " has no partner positive in the set");
  auto report = ranking_report(score_quads(model, heldout, 0.0));
  report.meta["model"] = model.name;
  return report;
}

// --- distractor -----------------------------------------------------------------

std::string_view to_string(Distance d) { return d == Distance::near ? "near" : "far"; }
std::string_view to_string(Salience s) { return s == Salience::high ? "high" : "low"; }
std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::categorical: return "categorical";
    case Relation::causal: return "causal";
    case Relation::compositional: return "compositional";
  }
  return "?";
}

void validate_distractor_item(const DistractorItem& item) {
  for (const auto* t : {&item.a, &item.b, &item.c, &item.d_correct, &item.d_distractor})
    if (text::normalize_space(*t).empty()) throw ValidationError("distractor item with an empty term");
  if (text::fold(item.d_correct) == text::fold(item.d_distractor))
    throw ValidationError("distractor item " + item.a + ":" + item.b + "::" + item.c + ":? has identical options");
}

std::vector<DistractorItem> parse_distractor_csv(std::string_view content) {
  std::vector<DistractorItem> items;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    if (text::normalize_space(raw).empty()) continue;
    auto f = text::split_csv_line(raw);
    for (auto& x : f) x = text::normalize_space(x);
    if (items.empty() && line_no == 1 && !f.empty() && f[0] == "a") continue;
    if (f.size() != 8) throw ParseError("expected 8 columns", line_no);
    DistractorItem it{f[0], f[1], f[2], f[3], f[4]};
    const auto distance = text::fold(f[5]);
    const auto salience = text::fold(f[6]);
    const auto relation = text::fold(f[7]);
    if (distance == "near") it.distance = Distance::near;
    else if (distance == "far") it.distance = Distance::far;
    else throw ValidationError("line " + std::to_string(line_no) + ": distance must be near|far");
    if (salience == "high") it.salience = Salience::high;
    else if (salience == "low") it.salience = Salience::low;
    else throw ValidationError("line " + std::to_string(line_no) + ": salience must be high|low");
    if (relation == "categorical") it.relation = Relation::categorical;
    else if (relation == "causal") it.relation = Relation::causal;
    else if (relation == "compositional") it.relation = Relation::compositional;
    else throw ValidationError("line " + std::to_string(line_no) + ": relation must be categorical|causal|compositional");
    validate_distractor_item(it);
    items.push_back(std::move(it));
  }
  return items;
}

std::vector<DistractorOutcome> score_distractor_items(const ScoringModel& model, const std::vector<DistractorItem>& items) {
  std::vector<DistractorOutcome> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    validate_distractor_item(item);
    AnalogyQuad q;
    q.a = item.a;
    q.b = item.b;
    q.c = item.c;
    q.d = item.d_correct;
    const double good = score_quad(model, q);
    q.d = item.d_distractor;
    const double bad = score_quad(model, q);
    out.push_back({item, good, bad, good > bad});
  }
  return out;
}

EvaluationReport distractor_report(const std::vector<DistractorOutcome>& outcomes) {
  EvaluationReport report;
  for (const auto& o : outcomes) {
    for (std::string_view d : {std::string_view("all"), to_string(o.item.distance)})
      for (std::string_view r : {std::string_view("all"), to_string(o.item.relation)})
        for (std::string_view s : {std::string_view("all"), to_string(o.item.salience)}) {
          auto& cell = report.cells[std::string(d) + "/" + std::string(r) + "/" + std::string(s)];
          cell.correct += o.correct;
          cell.total += 1;
        }
  }
  report.meta["protocol"] = "distractor";
  return report;
}

EvaluationReport evaluate_distractor(const ScoringModel& model, const std::vector<DistractorItem>& items) {
  auto report = distractor_report(score_distractor_items(model, items));
  report.meta["model"] = model.name;
  return report;
}

// --- word similarity ----------------------------------------------------------------

std::vector<WordSimPair> parse_wordsim_csv(std::string_view content) {
  std::vector<WordSimPair> pairs;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    if (text::normalize_space(raw).empty()) continue;
    auto f = text::split_csv_line(raw);
    if (f.size() != 3) throw ParseError("expected word1,word2,gold_score", line_no);
    double gold = 0.0;
    try {
      std::size_t used = 0;
      gold = std::stod(f[2], &used);
      if (text::normalize_space(f[2].substr(used)).size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      if (pairs.empty() && line_no == 1) continue;  // header
      throw ParseError("gold score '" + f[2] + "' is not a number", line_no);
    }
    if (!(gold >= 0.0 && gold <= 10.0)) throw ValidationError("line " + std::to_string(line_no) + ": gold score outside [0, 10]");
    pairs.push_back({text::normalize_space(f[0]), text::normalize_space(f[1]), gold});
  }
  return pairs;
}

WordSimResult evaluate_wordsim(const EmbeddingBackend& backend, const std::vector<WordSimPair>& pairs) {
  WordSimResult result;
  std::vector<double> model, gold;
  for (const auto& p : pairs) {
    try {
      const auto v1 = encode_single_word(backend, p.w1);
      const auto v2 = encode_single_word(backend, p.w2);
      model.push_back(cosine(v1, v2).value);
      gold.push_back(p.gold);
    } catch (const UserError&) {
      result.skipped.push_back(p.w1 + "," + p.w2);
    }
  }
  result.n = model.size();
  if (result.n < 3) throw ValidationError("word similarity needs at least 3 embeddable pairs, got " + std::to_string(result.n));
  result.rho = spearman(model, gold);
  return result;
}

// --- frequency / OOV ---------------------------------------------------------------

FrequencyBreakdown frequency_breakdown(const std::vector<ScoredQuad>& scored, const FrequencyTable& freq) {
  FrequencyBreakdown out;
  for (const auto& s : scored) {
    double sum = 0.0;
    std::size_t known = 0;
    for (const auto* term : s.quad.terms()) {
      if (auto f = freq.lookup(*term)) {
        sum += static_cast<double>(*f);
        ++known;
      } else {
        ++out.unknown_terms;
      }
    }
    if (known == 0) {
      ++out.excluded_quads;
      continue;
    }
    const double mean = sum / static_cast<double>(known);
    const std::string t = s.quad.label ? "true_pos" : "true_neg";
    const std::string p = s.predicted ? "pred_pos" : "pred_neg";
    for (const auto& key : {t + "/" + p, t + "/all", "all/" + p, std::string("all/all")}) {
      out.cells[key].sum += mean;
      out.cells[key].count += 1;
    }
  }
  return out;
}

bool quad_has_oov(const EmbeddingBackend& backend, const AnalogyQuad& q) {
  for (const auto* term : q.terms())
    if (backend.is_oov(*term)) return true;
  return false;
}

OovBreakdown oov_breakdown(const std::vector<ScoredQuad>& scored, const EmbeddingBackend& backend) {
  OovBreakdown out;
  for (const auto& s : scored) {
    const bool oov = quad_has_oov(backend, s.quad);
    (oov ? out.oov_quads : out.no_oov_quads) += 1;
    const bool correct = s.predicted == s.quad.label;
    const std::string t = s.quad.label ? "true_pos" : "true_neg";
    const std::string g = oov ? "oov" : "no_oov";
    for (const auto& key : {t + "/" + g, t + "/all", "all/" + g, std::string("all/all")}) {
      out.cells[key].correct += correct;
      out.cells[key].total += 1;
    }
  }
  if (out.oov_quads == 0) out.warnings.push_back("no quads with OOV entities; OOV column empty");
  if (out.no_oov_quads == 0) out.warnings.push_back("every quad has an OOV entity; no-OOV column empty");
  return out;
}

FrequencyHistogram frequency_histogram(const std::vector<std::string>& words, const FrequencyTable& freq,
                                       const EmbeddingBackend& backend, const std::vector<double>& edges,
                                       double max_frequency, std::size_t max_series) {
  if (edges.size() < 2) throw ValidationError("histogram needs at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ValidationError("histogram bin edges must be strictly increasing");
  if (max_series == 0) throw ValidationError("max_series must be positive");

  FrequencyHistogram h;
  h.edges = edges;
  for (std::size_t s = 1; s <= max_series; ++s) h.counts[s].assign(edges.size() - 1, 0);
  for (const auto& w : words) {
    const auto f = freq.lookup(w);
    if (!f) {
      ++h.unknown;
      continue;
    }
    const double value = static_cast<double>(*f);
    if (value >= max_frequency) {
      ++h.above_limit;
      continue;
    }
    const auto it = std::upper_bound(edges.begin(), edges.end(), value);
    if (it == edges.begin() || it == edges.end()) {
      ++h.out_of_range;
      continue;
    }
    const auto bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    const std::size_t series = std::min(std::max<std::size_t>(backend.piece_count(w), 1), max_series);
    h.counts[series][bin] += 1;
  }
  return h;
}

// --- aggregation -------------------------------------------------------------------

EvaluationReport aggregate_runs(const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) throw ValidationError("nothing to aggregate");
  EvaluationReport out;
  out.runs_aggregated = 0;
  out.meta = reports.front().meta;
  std::map<std::string, double> macro_sum;
  std::map<std::string, std::size_t> macro_n;
  for (const auto& r : reports) {
    if (r.cells.size() != reports.front().cells.size() ||
        !std::equal(r.cells.begin(), r.cells.end(), reports.front().cells.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; }))
      throw ValidationError("cannot aggregate reports with different cell keys");
    for (const auto& [key, cell] : r.cells) {
      auto& pooled = out.cells[key];
      pooled.correct += cell.correct;
      pooled.total += cell.total;
      if (cell.total) {
        macro_sum[key] += cell.accuracy();
        ++macro_n[key];
      }
    }
    out.runs_aggregated += r.runs_aggregated;
  }
  for (const auto& [key, sum] : macro_sum) out.macro_accuracy[key] = sum / static_cast<double>(macro_n[key]);
  return out;
}

void compare_to_baseline(EvaluationReport& report, const EvaluationReport& baseline, double alpha) {
  report.comparisons.clear();
  for (const auto& [key, cell] : report.cells) {
    auto it = baseline.cells.find(key);
    if (it == baseline.cells.end() || cell.total == 0 || it->second.total == 0) continue;
    const auto z = two_proportion_ztest(cell.correct, cell.total, it->second.correct, it->second.total);
    const double diff = cell.accuracy() - it->second.accuracy();
    report.comparisons.push_back({key, key, z.z, z.p, diff > 0 ? 1 : (diff < 0 ? -1 : 0), z.p < alpha});
  }
}

}  // namespace analogion
