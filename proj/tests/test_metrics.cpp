#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "nert/metrics.hpp"

using namespace nert;

namespace {

std::vector<Span> random_spans(std::mt19937_64& rng, int n, int ontologies,
                               int labels_per, int max_pos) {
  std::vector<Span> out;
  for (int i = 0; i < n; ++i) {
    Span s;
    s.ontology = std::uniform_int_distribution<int>(0, ontologies - 1)(rng);
    s.label = s.ontology * labels_per +
              std::uniform_int_distribution<int>(0, labels_per - 1)(rng);
    s.start = std::uniform_int_distribution<int>(0, max_pos)(rng);
    s.end = s.start + std::uniform_int_distribution<int>(0, 4)(rng);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("identical span sets score perfectly") {
  std::vector<Span> spans = {Span{0, 1, 2, 5}, Span{1, 7, 0, 0}};
  for (auto* f : {&local_f1, &global_f1}) {
    const MatchCounts t = f(spans, spans).totals();
    CHECK(t.precision() == 1.0);
    CHECK(t.recall() == 1.0);
    CHECK(t.f1() == 1.0);
  }
}

TEST_CASE("location mismatch: local 0, global 1") {
  std::vector<Span> pred = {Span{0, 1, 2, 5}};
  std::vector<Span> gold = {Span{0, 1, 3, 6}};
  CHECK(local_f1(pred, gold).totals().f1() == 0.0);
  CHECK(global_f1(pred, gold).totals().f1() == 1.0);
}

TEST_CASE("two predictions against three golds with one exact match") {
  std::vector<Span> pred = {Span{0, 1, 2, 5}, Span{0, 1, 9, 9}};
  std::vector<Span> gold = {Span{0, 1, 2, 5}, Span{0, 2, 0, 1}, Span{1, 8, 4, 4}};
  const MatchCounts t = local_f1(pred, gold).totals();
  CHECK(t.tp == 1);
  CHECK(t.precision() == Catch::Approx(0.5));
  CHECK(t.recall() == Catch::Approx(1.0 / 3.0));
  CHECK(t.f1() == Catch::Approx(0.4));
}

TEST_CASE("disjoint label sets score zero") {
  std::vector<Span> pred = {Span{0, 1, 2, 5}};
  std::vector<Span> gold = {Span{0, 2, 2, 5}};
  CHECK(local_f1(pred, gold).totals().f1() == 0.0);
  CHECK(global_f1(pred, gold).totals().f1() == 0.0);
}

TEST_CASE("global matching is over label multisets") {
  std::vector<Span> pred = {Span{0, 1, 2, 5}, Span{0, 1, 7, 8}};
  std::vector<Span> gold = {Span{0, 1, 0, 3}};
  const MatchCounts t = global_f1(pred, gold).totals();
  CHECK(t.tp == 1);
  CHECK(t.fp == 1);
  CHECK(t.fn == 0);
}

TEST_CASE("one-to-one matching forbids double credit") {
  std::vector<Span> pred = {Span{0, 1, 2, 5}, Span{0, 1, 2, 5}};
  std::vector<Span> gold = {Span{0, 1, 2, 5}};
  const MatchCounts t = local_f1(pred, gold).totals();
  CHECK(t.tp == 1);
  CHECK(t.fp == 1);
}

TEST_CASE("local F1 never exceeds global F1 (1000 random pairs)") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pred = random_spans(rng, trial % 7, 3, 4, 10);
    const auto gold = random_spans(rng, (trial / 7) % 7, 3, 4, 10);
    CHECK(local_f1(pred, gold).totals().f1() <=
          global_f1(pred, gold).totals().f1() + 1e-12);
  }
}

TEST_CASE("metrics ignore span order") {
  std::mt19937_64 rng(5);
  auto pred = random_spans(rng, 6, 2, 3, 8);
  auto gold = random_spans(rng, 6, 2, 3, 8);
  const MatchCounts a = local_f1(pred, gold).totals();
  std::reverse(pred.begin(), pred.end());
  std::reverse(gold.begin(), gold.end());
  const MatchCounts b = local_f1(pred, gold).totals();
  CHECK(a.tp == b.tp);
  CHECK(a.fp == b.fp);
  CHECK(a.fn == b.fn);
}

TEST_CASE("per-ontology report") {
  const OntologySchema schema = OntologySchema::standard(2);
  SECTION("single populated ontology: overall equals that row") {
    std::vector<Span> pred = {Span{0, 0, 1, 3}};
    std::vector<Span> gold = {Span{0, 0, 1, 3}, Span{0, 1, 5, 6}};
    const Report rep = per_ontology_report(local_f1(pred, gold), schema);
    REQUIRE(rep.rows.size() == 6);
    CHECK(rep.rows[0].name == "Overall");
    CHECK(rep.rows[0].precision == rep.rows[1].precision);
    CHECK(rep.rows[0].recall == rep.rows[1].recall);
    CHECK(rep.rows[0].f1 == rep.rows[1].f1);
  }
  SECTION("micro average equals pooled counts") {
    std::vector<Span> pred = {Span{0, 0, 1, 3}, Span{1, 4, 2, 2}, Span{1, 5, 9, 9}};
    std::vector<Span> gold = {Span{0, 0, 1, 3}, Span{0, 1, 5, 6}, Span{1, 4, 2, 2}};
    const SpanMatchResult r = local_f1(pred, gold);
    const Report rep = per_ontology_report(r, schema);
    MatchCounts pooled;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) pooled += rep.rows[i].counts;
    CHECK(rep.rows[0].counts.tp == pooled.tp);
    CHECK(rep.rows[0].counts.fp == pooled.fp);
    CHECK(rep.rows[0].counts.fn == pooled.fn);
    CHECK(rep.rows[0].f1 == pooled.f1());
  }
  SECTION("macro averaging differs from micro on skewed counts") {
    std::vector<Span> pred = {Span{0, 0, 1, 3}, Span{1, 4, 2, 2}};
    std::vector<Span> gold = {Span{0, 0, 1, 3}, Span{1, 4, 9, 9}};
    const SpanMatchResult r = local_f1(pred, gold);
    const Report micro = per_ontology_report(r, schema, Averaging::Micro);
    const Report macro = per_ontology_report(r, schema, Averaging::Macro);
    CHECK(micro.rows[0].f1 != macro.rows[0].f1);
  }
  SECTION("csv layout is stable") {
    const Report rep = per_ontology_report(SpanMatchResult{}, schema);
    const std::string csv = report_to_csv(rep);
    CHECK(csv.rfind("ontology,tp,fp,fn,precision,recall,f1\n", 0) == 0);
    CHECK(csv.find("Overall,0,0,0,0.000000,0.000000,0.000000\n") != std::string::npos);
    CHECK(csv.find("medications,") != std::string::npos);
    CHECK(csv.find("treatments,") != std::string::npos);
  }
  SECTION("json report carries format and version") {
    const auto j = report_to_json(per_ontology_report(SpanMatchResult{}, schema));
    CHECK(j["format"] == "nert-report");
    CHECK(j["version"] == 1);
    CHECK(j["rows"][0]["ontology"] == "Overall");
  }
}
