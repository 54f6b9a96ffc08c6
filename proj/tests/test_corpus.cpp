#include "doctest.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "analogion/corpus.hpp"
#include "analogion/errors.hpp"
#include "fixtures.hpp"

using namespace analogion;

namespace {

const char* kAmalgam =
    R"({"stem":["amalgam","metals"],"choices":[["coalition","factions"],["car","payments"],)"
    R"(["bouquet","flowers"],["salad","vegetables"],["sentence","words"]],"answer":0})";

AnalogyQuad pos(std::string id, std::string a, std::string b, std::string c, std::string d) {
  return AnalogyQuad{std::move(id), std::move(a), std::move(b), std::move(c), std::move(d), true, Source::SAT, {}, {}};
}

AnalogyQuad neg_of(const AnalogyQuad& p, std::string c, std::string d) {
  auto q = p;
  q.id = p.id + ":neg";
  q.c = std::move(c);
  q.d = std::move(d);
  q.label = false;
  q.partner_id = p.id;
  return q;
}

std::tuple<std::string, std::string, std::string, std::string> terms(const AnalogyQuad& q) {
  return {q.a, q.b, q.c, q.d};
}

}  // namespace

TEST_CASE("parse_multiple_choice") {
  SUBCASE("published example record") {
    const auto recs = parse_multiple_choice(kAmalgam, Source::SAT);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].choices.size() == 5);
    CHECK(recs[0].stem == std::pair<std::string, std::string>{"amalgam", "metals"});
    CHECK(recs[0].answer_index == 0);
  }
  SUBCASE("empty input") { CHECK(parse_multiple_choice("", Source::SAT).empty()); }
  SUBCASE("line count preserved") {
    const auto src = fixtures::published_size_sources(1);
    CHECK(parse_multiple_choice(src.sat, Source::SAT).size() == 374);
  }
  SUBCASE("malformed line carries its number") {
    const std::string content = std::string(kAmalgam) + "\n{not json\n";
    try {
      parse_multiple_choice(content, Source::SAT);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("answer out of range") {
    CHECK_THROWS_AS(parse_multiple_choice(R"({"stem":["a","b"],"choices":[["c","d"],["e","f"]],"answer":2})",
                                          Source::U2),
                    ValidationError);
  }
}

TEST_CASE("mc_to_quads") {
  const auto rec = parse_multiple_choice(kAmalgam, Source::SAT).at(0);
  SUBCASE("positive is the answer, negative an incorrect choice sharing the stem") {
    std::set<std::pair<std::string, std::string>> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      auto [p, n] = mc_to_quads(rec, rng, Source::SAT, "q");
      CHECK(terms(p) == std::tuple<std::string, std::string, std::string, std::string>{"amalgam", "metals", "coalition",
                                                                                        "factions"});
      CHECK(n.a == p.a);
      CHECK(n.b == p.b);
      CHECK_FALSE(n.label);
      CHECK(n.partner_id == p.id);
      seen.emplace(n.c, n.d);
    }
    CHECK(seen.size() == 4);
    CHECK(seen.count({"car", "payments"}) == 1);
    CHECK(seen.count({"coalition", "factions"}) == 0);
  }
  SUBCASE("two choices force the negative") {
    MultipleChoiceRecord two{{"hot", "cold"}, {{"up", "down"}, {"big", "large"}}, 0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      CHECK(mc_to_quads(two, rng, Source::U2, "x").second.c == "big");
    }
  }
  SUBCASE("a single choice cannot yield a negative") {
    MultipleChoiceRecord one{{"hot", "cold"}, {{"up", "down"}}, 0};
    Rng rng(1);
    CHECK_THROWS_AS(mc_to_quads(one, rng, Source::U2, "x"), ValidationError);
  }
  SUBCASE("whole file doubles the count") {
    const auto src = fixtures::published_size_sources(1);
    Rng rng(3);
    CHECK(mc_records_to_quads(parse_multiple_choice(src.sat, Source::SAT), rng, Source::SAT).size() == 748);
  }
}

TEST_CASE("dedup_u4_against_u2") {
  const auto p1 = pos("1", "a", "b", "c", "d");
  const auto p2 = pos("2", "e", "f", "g", "h");
  const std::vector<AnalogyQuad> u2{p1, neg_of(p1, "x", "y")};
  SUBCASE("exact duplicate removed with its negative, case and spacing ignored") {
    auto dup = pos("9", " A", "b ", "c", "D");
    const std::vector<AnalogyQuad> u4{dup, neg_of(dup, "m", "n"), p2, neg_of(p2, "o", "p")};
    const auto out = dedup_u4_against_u2(u2, u4);
    REQUIRE(out.size() == 2);
    CHECK(out[0].a == "e");
  }
  SUBCASE("disjoint sets unchanged") {
    const std::vector<AnalogyQuad> u4{p2, neg_of(p2, "o", "p")};
    CHECK(dedup_u4_against_u2(u2, u4).size() == 2);
  }
}

TEST_CASE("expand_scan_topic") {
  SUBCASE("n = 4 gives 6") {
    ScanTopicPair t{"atom", "solar system", {"nucleus", "electron", "charge", "attraction"},
                    {"sun", "planet", "mass", "gravity"}, ScanSubtype::science};
    const auto quads = expand_scan_topic(t);
    CHECK(quads.size() == 6);
    const bool has = std::any_of(quads.begin(), quads.end(), [](const AnalogyQuad& q) {
      return q.a == "nucleus" && q.b == "electron" && q.c == "sun" && q.d == "planet";
    });
    CHECK(has);
    for (const auto& q : quads) {
      CHECK(q.label);
      CHECK(q.source == Source::SCAN);
      CHECK(q.scan_subtype == ScanSubtype::science);
    }
  }
  SUBCASE("n = 2 gives 1") {
    ScanTopicPair t{"s", "t", {"x", "y"}, {"u", "v"}, ScanSubtype::metaphor};
    CHECK(expand_scan_topic(t).size() == 1);
  }
  SUBCASE("misaligned or too short") {
    ScanTopicPair bad{"s", "t", {"x", "y", "z"}, {"u", "v"}, ScanSubtype::science};
    CHECK_THROWS_AS(expand_scan_topic(bad), ValidationError);
    ScanTopicPair one{"s", "t", {"x"}, {"u"}, ScanSubtype::science};
    CHECK_THROWS_AS(expand_scan_topic(one), ValidationError);
  }
  SUBCASE("property: C(n,2) distinct quads matching nested-loop enumeration") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + rng.uniform_index(11);
      const auto topic = fixtures::random_topic(rng, n, trial);
      const auto quads = expand_scan_topic(topic);
      std::set<std::tuple<std::string, std::string, std::string, std::string>> expected;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          expected.emplace(topic.source_entities[i], topic.source_entities[j], topic.target_entities[i],
                           topic.target_entities[j]);
      std::set<std::tuple<std::string, std::string, std::string, std::string>> got;
      for (const auto& q : quads) got.insert(terms(q));
      CHECK(quads.size() == n * (n - 1) / 2);
      CHECK(got == expected);
    }
  }
}

TEST_CASE("generate_scan_negatives") {
  SUBCASE("two positives swap their (c, d)") {
    ScanTopicPair t1{"atom", "solar", {"nucleus", "electron"}, {"sun", "planet"}, ScanSubtype::science};
    ScanTopicPair t2{"journey", "life", {"road", "traveler"}, {"station", "traveler2"}, ScanSubtype::metaphor};
    auto p = expand_scan_topic(t1, "A");
    auto more = expand_scan_topic(t2, "B");
    p.insert(p.end(), more.begin(), more.end());
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const auto n = generate_scan_negatives(p, rng);
      REQUIRE(n.size() == 2);
      CHECK(n[0].c == "station");
      CHECK(n[0].d == "traveler2");
      CHECK(n[1].c == "sun");
      CHECK(n[1].d == "planet");
      CHECK(n[0].partner_id == p[0].id);
      CHECK(n[0].scan_subtype == p[0].scan_subtype);
    }
  }
  SUBCASE("draws that recreate a positive are rejected") {
    // Donor (c, d) = (y, z) would recreate positive a:b::y:z for the first quad.
    std::vector<AnalogyQuad> p;
    for (auto [id, a, b, c, d] : std::vector<std::tuple<const char*, const char*, const char*, const char*, const char*>>{
             {"1", "a", "b", "c", "d"}, {"2", "a", "b", "y", "z"}, {"3", "e", "f", "g", "h"}}) {
      auto q = pos(id, a, b, c, d);
      q.source = Source::SCAN;
      q.scan_subtype = ScanSubtype::science;
      p.push_back(q);
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      const auto n = generate_scan_negatives(p, rng);
      CHECK(n[0].c == "g");
      CHECK(n[1].c == "g");
    }
  }
  SUBCASE("a single (c, d) pair cannot produce negatives") {
    auto q = pos("1", "a", "b", "c", "d");
    q.source = Source::SCAN;
    q.scan_subtype = ScanSubtype::science;
    Rng rng(1);
    CHECK_THROWS_AS(generate_scan_negatives({q}, rng), GenerationError);
  }
  SUBCASE("retry budget exhausted") {
    // Every donor pair recreates a positive of the same stem.
    std::vector<AnalogyQuad> p;
    for (auto [id, c, d] : std::vector<std::tuple<const char*, const char*, const char*>>{{"1", "c", "d"}, {"2", "y", "z"}}) {
      auto q = pos(id, "a", "b", c, d);
      q.source = Source::SCAN;
      q.scan_subtype = ScanSubtype::science;
      p.push_back(q);
    }
    Rng rng(1);
    CHECK_THROWS_AS(generate_scan_negatives(p, rng, 5), GenerationError);
  }
}

TEST_CASE("assemble_corpus") {
  const auto p = pos("1", "a", "b", "c", "d");
  SUBCASE("single pair") {
    const auto c = assemble_corpus({{p, neg_of(p, "x", "y")}});
    CHECK(c.quads.size() == 2);
    CHECK(c.positives() == 1);
    CHECK(c.negatives() == 1);
    CHECK(c.quads[1].partner_id == "0");
    CHECK(c.partner_index(1) == 0);
    CHECK(c.partner_index(0) == 1);
  }
  SUBCASE("unpaired positive names its source") {
    try {
      assemble_corpus({{p}});
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("SAT") != std::string::npos);
    }
  }
  SUBCASE("duplicates rejected") {
    auto p2 = pos("2", "A", "b", "c", "d");
    CHECK_THROWS_AS(assemble_corpus({{p, neg_of(p, "x", "y"), p2, neg_of(p2, "m", "n")}}), ValidationError);
  }
  SUBCASE("negative with a different stem rejected") {
    auto n = neg_of(p, "x", "y");
    n.a = "zz";
    CHECK_THROWS_AS(assemble_corpus({{p, n}}), ValidationError);
  }
}

TEST_CASE("prepare_corpus on published-size sources") {
  const auto prepared = prepare_corpus(fixtures::published_size_sources(7), 42);
  const auto& c = prepared.corpus;
  CHECK(c.per_source_counts.at(Source::SCAN).total() == 2974);
  CHECK(c.per_source_counts.at(Source::SAT).total() == 748);
  CHECK(c.per_source_counts.at(Source::U2).total() == 504);
  CHECK(c.per_source_counts.at(Source::U4).total() == 704);
  CHECK(c.quads.size() == 4930);
  CHECK(c.positives() == c.negatives());
  CHECK(prepared.u4_removed_as_u2_duplicates == 504);

  SUBCASE("folds differ by at most one pair") {
    std::vector<std::size_t> sizes(10, 0);
    for (int f : prepared.folds.fold_of) ++sizes[static_cast<std::size_t>(f)];
    // 2465 positives over 10 folds: five folds hold 247 pairs, five hold 246.
    CHECK(std::count(sizes.begin(), sizes.end(), 494u) == 5);
    CHECK(std::count(sizes.begin(), sizes.end(), 492u) == 5);
  }
  SUBCASE("byte-identical TSV for the same seed") {
    std::ostringstream a, b;
    write_corpus_tsv(c, a);
    write_corpus_tsv(prepare_corpus(fixtures::published_size_sources(7), 42).corpus, b);
    CHECK(a.str() == b.str());
  }
}

TEST_CASE("make_folds") {
  const auto p = pos("1", "a", "b", "c", "d");
  const auto tiny = assemble_corpus({{p, neg_of(p, "x", "y")}});
  SUBCASE("k <= 1 rejected") {
    Rng rng(1);
    CHECK_THROWS_AS(make_folds(tiny, 1, rng), ConfigError);
  }
  SUBCASE("one pair, ten folds: nine empty folds warned") {
    Rng rng(1);
    const auto f = make_folds(tiny, 10, rng);
    CHECK(f.fold_of[0] == f.fold_of[1]);
    CHECK(f.warnings.size() == 9);
  }
  SUBCASE("same seed, same assignment; partners share folds") {
    const auto prepared = prepare_corpus(fixtures::published_size_sources(3), 5);
    Rng r1(99), r2(99);
    const auto f1 = make_folds(prepared.corpus, 10, r1);
    const auto f2 = make_folds(prepared.corpus, 10, r2);
    CHECK(f1.fold_of == f2.fold_of);
    for (std::size_t i = 0; i < prepared.corpus.quads.size(); ++i)
      CHECK(f1.fold_of[i] == f1.fold_of[prepared.corpus.partner_index(i)]);
  }
}

TEST_CASE("permute_analogy") {
  AnalogyQuad q = pos("1", "a", "b", "c", "d");
  SUBCASE("table") {
    const std::vector<std::string> expected{"abcd", "badc", "cdab", "dcba", "acbd", "cadb", "bdac", "dbca"};
    for (int i = 1; i <= 8; ++i) {
      const auto p = permute_analogy(q, i);
      CHECK(p.a + p.b + p.c + p.d == expected[static_cast<std::size_t>(i - 1)]);
      CHECK(p.label == q.label);
    }
  }
  SUBCASE("index 2 is an involution, index 1 the identity") {
    CHECK(terms(permute_analogy(permute_analogy(q, 2), 2)) == terms(q));
    CHECK(terms(permute_analogy(q, 1)) == terms(q));
  }
  SUBCASE("closure of the orbit") {
    std::set<std::string> orbit;
    for (int i = 1; i <= 8; ++i) {
      const auto p = permute_analogy(q, i);
      orbit.insert(p.a + p.b + p.c + p.d);
    }
    for (int i = 1; i <= 8; ++i)
      for (int j = 1; j <= 8; ++j) {
        const auto p = permute_analogy(permute_analogy(q, i), j);
        CHECK(orbit.count(p.a + p.b + p.c + p.d) == 1);
      }
  }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(permute_analogy(q, 0), ValidationError);
    CHECK_THROWS_AS(permute_analogy(q, 9), ValidationError);
  }
}

TEST_CASE("file formats round-trip") {
  const auto prepared = prepare_corpus(fixtures::published_size_sources(2), 9, 4);
  std::ostringstream tsv;
  write_corpus_tsv(prepared.corpus, tsv);
  std::istringstream in(tsv.str());
  const auto back = read_corpus_tsv(in);
  REQUIRE(back.quads.size() == prepared.corpus.quads.size());
  std::ostringstream again;
  write_corpus_tsv(back, again);
  CHECK(again.str() == tsv.str());
  CHECK(back.per_source_counts.at(Source::SCAN).total() == 2974);

  const auto folds = folds_from_json(folds_to_json(prepared.folds), back.quads.size());
  CHECK(folds.k == 4);
  CHECK(folds.fold_of == prepared.folds.fold_of);

  std::istringstream bad("a\tb\n");
  CHECK_THROWS_AS(read_corpus_tsv(bad), ParseError);
}
