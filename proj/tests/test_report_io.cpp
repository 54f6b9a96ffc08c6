#include "doctest.h"

#include <sstream>

#include "analogion/errors.hpp"
#include "analogion/report_io.hpp"
#include "fixtures.hpp"

using namespace analogion;

namespace {

EvaluationReport sample_report() {
  EvaluationReport r;
  r.cells["OVERALL/all"] = {80, 100};
  r.cells["OVERALL/pos"] = {45, 50};
  r.cells["SAT/all"] = {7, 9};
  r.macro_accuracy["OVERALL/all"] = 0.79;
  r.runs_aggregated = 10;
  r.warnings = {"no items for U2/all; cell omitted"};
  r.meta["model"] = "offset_ab";
  return r;
}

}  // namespace

TEST_CASE("report JSON round trip") {
  auto r = sample_report();
  EvaluationReport base;
  base.cells["OVERALL/all"] = {60, 100};
  base.cells["SAT/all"] = {7, 9};
  compare_to_baseline(r, base);
  const auto back = report_from_json(report_to_json(r));
  CHECK(back.cells == r.cells);
  CHECK(back.macro_accuracy == r.macro_accuracy);
  CHECK(back.runs_aggregated == 10);
  CHECK(back.warnings == r.warnings);
  CHECK(back.meta == r.meta);
  REQUIRE(back.comparisons.size() == r.comparisons.size());
  for (std::size_t i = 0; i < r.comparisons.size(); ++i) {
    CHECK(back.comparisons[i].cell == r.comparisons[i].cell);
    CHECK(back.comparisons[i].p == r.comparisons[i].p);
    CHECK(back.comparisons[i].significant == r.comparisons[i].significant);
  }
  CHECK_THROWS_AS(report_from_json("{\"cells\": 3}"), ParseError);
}

TEST_CASE("report CSV") {
  const auto csv = report_to_csv(sample_report());
  CHECK(csv.rfind("key,correct,total,accuracy\n", 0) == 0);
  CHECK(csv.find("OVERALL/all,80,100,0.8") != std::string::npos);
}

TEST_CASE("markdown markers") {
  auto up = sample_report();
  auto flat = sample_report();
  EvaluationReport base;
  base.cells["OVERALL/all"] = {60, 100};
  base.cells["OVERALL/pos"] = {44, 50};
  compare_to_baseline(up, base);
  const auto md = classification_table_markdown("Classification", {{"tuned", &up}});
  CHECK(md.find("**0.80**↑") != std::string::npos);
  CHECK(md.find("0.90↑") != std::string::npos);
  CHECK(md.find("**0.90**") == std::string::npos);
  CHECK(md.find("| SCAN - Metaphor | - | - | - |") != std::string::npos);
  const auto plain = ranking_table_markdown("Ranking", {{"plain", &flat}});
  CHECK(plain.find("0.80 |") != std::string::npos);
  CHECK(plain.find("↑") == std::string::npos);
  const auto macro = ranking_table_markdown("Ranking", {{"plain", &flat}}, AggregateMode::macro);
  CHECK(macro.find("0.79 |") != std::string::npos);
}

TEST_CASE("frequency and OOV tables") {
  FrequencyBreakdown f;
  f.cells["all/all"] = {300.0, 2};
  const auto md = frequency_table_markdown("Frequency", f, &f);
  CHECK(md.find("| Total | - | - | 150 | - | - | 150 |") != std::string::npos);
  OovBreakdown o;
  o.cells["true_pos/oov"] = {1, 2};
  o.oov_quads = 2;
  const auto om = oov_table_markdown("OOV", o, nullptr);
  CHECK(om.find("| True Positive | - | 0.50 | - |") != std::string::npos);
  CHECK(om.find("OOV n=2") != std::string::npos);
}

TEST_CASE("histogram CSV") {
  FrequencyHistogram h;
  h.edges = {0, 5000, 10000};
  h.counts[1] = {3, 0};
  h.counts[2] = {1, 2};
  const auto csv = histogram_csv(h);
  CHECK(csv == "pieces,bin_low,bin_high,count\n1,0,5000,3\n1,5000,10000,0\n2+,0,5000,1\n2+,5000,10000,2\n");
}

TEST_CASE("score dump round trip") {
  fixtures::RelationWorldConfig c;
  c.relations = 3;
  c.pairs_per_relation = 4;
  c.latent_dim = 4;
  c.nuisance_dim = 2;
  const auto world = fixtures::make_relation_world(c);
  std::vector<ScoredQuad> s;
  for (std::size_t i = 0; i < world.corpus.quads.size(); ++i)
    s.push_back({world.corpus.quads[i], 0.1 * static_cast<double>(i) - 0.3, i % 3 == 0, static_cast<int>(i % 2), "r"});
  const auto back = scored_quads_from_tsv(scored_quads_tsv(s), world.corpus);
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back[i].quad.id == s[i].quad.id);
    CHECK(back[i].score == s[i].score);
    CHECK(back[i].predicted == s[i].predicted);
    CHECK(back[i].fold == s[i].fold);
  }
  CHECK_THROWS_AS(scored_quads_from_tsv("h\n999\t0\tr\t1\t0.5\t1\tSAT\t\n", world.corpus), ValidationError);
  CHECK_THROWS_AS(scored_quads_from_tsv("h\n0\t0\tr\n", world.corpus), ParseError);
}
