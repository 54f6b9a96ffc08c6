#include "analogion/report_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "analogion/errors.hpp"
#include "analogion/text.hpp"
#include "json.hpp"

namespace analogion {

using nlohmann::json;

std::string report_to_json(const EvaluationReport& report) {
  json j;
  json cells = json::object();
  for (const auto& [key, cell] : report.cells) {
    json c{{"accuracy", cell.accuracy()}, {"correct", cell.correct}, {"total", cell.total}};
    if (auto it = report.macro_accuracy.find(key); it != report.macro_accuracy.end()) c["macro_accuracy"] = it->second;
    cells[key] = std::move(c);
  }
  j["cells"] = std::move(cells);
  json comps = json::array();
  for (const auto& c : report.comparisons)
    comps.push_back({{"cell", c.cell},
                     {"baseline_cell", c.baseline_cell},
                     {"z", c.z},
                     {"p", c.p},
                     {"direction", c.direction},
                     {"significant", c.significant}});
  j["comparisons"] = std::move(comps);
  json meta = json::object();
  for (const auto& [k, v] : report.meta) meta[k] = v;
  meta["runs_aggregated"] = report.runs_aggregated;
  meta["warnings"] = report.warnings;
  j["meta"] = std::move(meta);
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(std::string_view text) {
  EvaluationReport r;
  try {
    const auto j = json::parse(text);
    for (const auto& [key, c] : j.at("cells").items()) {
      r.cells[key] = Cell{c.at("correct").get<std::size_t>(), c.at("total").get<std::size_t>()};
      if (c.contains("macro_accuracy")) r.macro_accuracy[key] = c["macro_accuracy"].get<double>();
    }
    for (const auto& c : j.at("comparisons"))
      r.comparisons.push_back({c.at("cell").get<std::string>(), c.at("baseline_cell").get<std::string>(),
                               c.at("z").get<double>(), c.at("p").get<double>(), c.at("direction").get<int>(),
                               c.at("significant").get<bool>()});
    for (const auto& [k, v] : j.at("meta").items()) {
      if (k == "runs_aggregated") r.runs_aggregated = v.get<std::size_t>();
      else if (k == "warnings") r.warnings = v.get<std::vector<std::string>>();
      else if (v.is_string()) r.meta[k] = v.get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 1);
  }
  return r;
}

std::string report_to_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out << "key,correct,total,accuracy\n";
  out.precision(17);
  for (const auto& [key, cell] : report.cells)
    out << key << ',' << cell.correct << ',' << cell.total << ',' << cell.accuracy() << '\n';
  return out.str();
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string cell_text(const EvaluationReport& r, const std::string& key, AggregateMode mode) {
  auto it = r.cells.find(key);
  if (it == r.cells.end()) return "-";
  double acc = it->second.accuracy();
  if (mode == AggregateMode::macro)
    if (auto m = r.macro_accuracy.find(key); m != r.macro_accuracy.end()) acc = m->second;
  std::string s = fmt2(acc);
  for (const auto& c : r.comparisons) {
    if (c.cell != key) continue;
    if (c.significant) s = "**" + s + "**";
    s += c.direction > 0 ? "↑" : (c.direction < 0 ? "↓" : "→");
    break;
  }
  return s;
}

const std::vector<std::pair<std::string, std::string>>& category_rows() {
  static const std::vector<std::pair<std::string, std::string>> rows{
      {"OVERALL", "OVERALL"}, {"SAT", "SAT"}, {"U2", "U2"}, {"U4", "U4"}, {"SCAN", "SCAN"},
      {"SCAN-science", "SCAN - Science"}, {"SCAN-metaphor", "SCAN - Metaphor"}};
  return rows;
}

}  // namespace

std::string classification_table_markdown(const std::string& title, const std::vector<NamedReport>& models,
                                          AggregateMode mode) {
  std::ostringstream out;
  out << "### " << title << "\n\n| Category |";
  for (const auto& m : models) out << ' ' << m.first << " Overall | Pos. | Neg. |";
  out << "\n|---|";
  for (std::size_t i = 0; i < models.size(); ++i) out << "---|---|---|";
  out << '\n';
  for (const auto& [key, label] : category_rows()) {
    out << "| " << label << " |";
    for (const auto& m : models)
      for (const char* pol : {"all", "pos", "neg"}) out << ' ' << cell_text(*m.second, cell_key(key, pol), mode) << " |";
    out << '\n';
  }
  return out.str();
}

std::string ranking_table_markdown(const std::string& title, const std::vector<NamedReport>& models,
                                   AggregateMode mode) {
  std::ostringstream out;
  out << "### " << title << "\n\n| Category |";
  for (const auto& m : models) out << ' ' << m.first << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < models.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& [key, label] : category_rows()) {
    out << "| " << label << " |";
    for (const auto& m : models) out << ' ' << cell_text(*m.second, cell_key(key, "all"), mode) << " |";
    out << '\n';
  }
  return out.str();
}

std::string distractor_table_markdown(const std::string& title, const std::vector<NamedReport>& models,
                                      AggregateMode mode) {
  std::ostringstream out;
  out << "### " << title << "\n\n| Semantic Distance | Relation Type |";
  for (const auto& m : models) out << ' ' << m.first << " Overall | High | Low |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < models.size(); ++i) out << "---|---|---|";
  out << '\n';
  auto row = [&](const std::string& dist_label, const std::string& rel_label, const std::string& prefix) {
    out << "| " << dist_label << " | " << rel_label << " |";
    for (const auto& m : models)
      for (const char* s : {"all", "high", "low"}) out << ' ' << cell_text(*m.second, prefix + "/" + s, mode) << " |";
    out << '\n';
  };
  row("", "OVERALL", "all/all");
  for (const char* dist : {"near", "far"}) {
    std::string label = dist;
    label[0] = static_cast<char>(std::toupper(label[0]));
    row(label, "Overall", std::string(dist) + "/all");
    for (const char* rel : {"categorical", "causal", "compositional"}) {
      std::string rl = rel;
      rl[0] = static_cast<char>(std::toupper(rl[0]));
      row("", rl, std::string(dist) + "/" + rel);
    }
  }
  return out.str();
}

std::string wordsim_table_markdown(const std::vector<WordSimRow>& rows) {
  std::ostringstream out;
  out << "### Spearman correlation on word similarity\n\n| Dataset |";
  if (!rows.empty())
    for (const auto& [model, rho] : rows.front().rho_by_model) out << ' ' << model << " |";
  out << "\n|---|";
  if (!rows.empty())
    for (std::size_t i = 0; i < rows.front().rho_by_model.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& r : rows) {
    out << "| " << r.dataset << " |";
    for (const auto& [model, rho] : r.rho_by_model) out << ' ' << fmt2(rho) << " |";
    out << '\n';
  }
  return out.str();
}

namespace {

std::string mean_text(const FrequencyBreakdown& f, const std::string& key) {
  auto it = f.cells.find(key);
  if (it == f.cells.end() || it->second.count == 0) return "-";
  return std::to_string(static_cast<long long>(std::llround(it->second.mean())));
}

std::string acc_text(const OovBreakdown& o, const std::string& key) {
  auto it = o.cells.find(key);
  if (it == o.cells.end() || it->second.total == 0) return "-";
  return fmt2(it->second.accuracy());
}

}  // namespace

std::string frequency_table_markdown(const std::string& title, const FrequencyBreakdown& before,
                                     const FrequencyBreakdown* after) {
  std::ostringstream out;
  out << "### " << title << "\n\n| | B: Predicted Pos. | B: Predicted Neg. | B: Total |";
  if (after) out << " A: Predicted Pos. | A: Predicted Neg. | A: Total |";
  out << "\n|---|---|---|---|" << (after ? "---|---|---|" : "") << '\n';
  for (const auto& [t, label] : {std::pair<std::string, std::string>{"true_pos", "True Positive"},
                                 {"true_neg", "True Negative"}, {"all", "Total"}}) {
    out << "| " << label << " |";
    for (const auto* f : {&before, after}) {
      if (!f) continue;
      for (const char* p : {"pred_pos", "pred_neg", "all"}) out << ' ' << mean_text(*f, t + "/" + p) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string oov_table_markdown(const std::string& title, const OovBreakdown& before, const OovBreakdown* after) {
  std::ostringstream out;
  out << "### " << title << "\n\n| | B: No OOV entity | B: 1+ OOV entity | B: Total |";
  if (after) out << " A: No OOV entity | A: 1+ OOV entity | A: Total |";
  out << "\n|---|---|---|---|" << (after ? "---|---|---|" : "") << '\n';
  for (const auto& [t, label] : {std::pair<std::string, std::string>{"true_pos", "True Positive"},
                                 {"true_neg", "True Negative"}, {"all", "Total"}}) {
    out << "| " << label << " |";
    for (const auto* o : {&before, after}) {
      if (!o) continue;
      for (const char* g : {"no_oov", "oov", "all"}) out << ' ' << acc_text(*o, t + "/" + g) << " |";
    }
    out << '\n';
  }
  out << "\nNo OOV n=" << before.no_oov_quads << ", OOV n=" << before.oov_quads << '\n';
  return out.str();
}

std::string histogram_csv(const FrequencyHistogram& h) {
  std::ostringstream out;
  out.precision(17);
  out << "pieces,bin_low,bin_high,count\n";
  const std::size_t max_series = h.counts.empty() ? 0 : h.counts.rbegin()->first;
  for (const auto& [pieces, counts] : h.counts)
    for (std::size_t i = 0; i < counts.size(); ++i)
      out << pieces << (pieces == max_series && max_series > 1 ? "+" : "") << ',' << h.edges[i] << ','
          << h.edges[i + 1] << ',' << counts[i] << '\n';
  return out.str();
}

std::string scored_quads_tsv(const std::vector<ScoredQuad>& scored) {
  std::ostringstream out;
  out.precision(17);
  out << "row\tfold\trun\tlabel\tscore\tpredicted\tsource\tscan_subtype\n";
  for (const auto& s : scored)
    out << s.quad.id << '\t' << s.fold << '\t' << s.run << '\t' << (s.quad.label ? 1 : 0) << '\t' << s.score << '\t'
        << (s.predicted ? 1 : 0) << '\t' << to_string(s.quad.source) << '\t'
        << (s.quad.scan_subtype ? to_string(*s.quad.scan_subtype) : "") << '\n';
  return out.str();
}

std::vector<ScoredQuad> scored_quads_from_tsv(std::string_view tsv, const BalancedCorpus& corpus) {
  std::vector<ScoredQuad> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split(tsv, '\n')) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 8) throw ParseError("expected 8 columns in score dump", line_no);
    const auto row = std::stoul(f[0]);
    if (row >= corpus.quads.size()) throw ValidationError("score dump references unknown row " + f[0]);
    ScoredQuad s;
    s.quad = corpus.quads[row];
    if ((f[3] == "1") != s.quad.label) throw ValidationError("score dump label disagrees with corpus row " + f[0]);
    s.fold = std::stoi(f[1]);
    s.run = f[2];
    s.score = std::stod(f[4]);
    s.predicted = f[5] == "1";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace analogion
