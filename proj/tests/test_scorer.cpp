#include <doctest.h>

#include <sdoh/sdoh.hpp>

#include "test_helpers.hpp"

using namespace sdoh;
using testutil::doc_with_entities;

TEST_SUITE("scorer") {
  TEST_CASE("match_entities: identical sets match perfectly") {
    const auto gold = doc_with_entities("d", {{"Tobacco use", 0, 5}, {"Alcohol use", 10, 15}});
    const auto strict = match_entities(gold.entities, gold.entities, MatchMode::Strict);
    CHECK(strict.size() == gold.entities.size());
  }

  TEST_CASE("match_entities: overlap matches leniently only") {
    const auto gold = doc_with_entities("d", {{"Tobacco use", 0, 5}});
    const auto pred = doc_with_entities("d", {{"Tobacco use", 3, 8}});
    CHECK(match_entities(gold.entities, pred.entities, MatchMode::Strict).empty());
    CHECK(match_entities(gold.entities, pred.entities, MatchMode::Lenient).size() == 1);

    // category mismatch never matches
    const auto wrong = doc_with_entities("d", {{"Alcohol use", 0, 5}});
    CHECK(match_entities(gold.entities, wrong.entities, MatchMode::Strict).empty());
    CHECK(match_entities(gold.entities, wrong.entities, MatchMode::Lenient).empty());

    // touching half-open spans do not overlap
    const auto touching = doc_with_entities("d", {{"Tobacco use", 5, 9}});
    CHECK(match_entities(gold.entities, touching.entities, MatchMode::Lenient).empty());
  }

  TEST_CASE("duplicate identical predictions count as extra fp") {
    const auto gold = doc_with_entities("d", {{"Tobacco use", 0, 5}});
    const auto pred =
        doc_with_entities("d", {{"Tobacco use", 0, 5}, {"Tobacco use", 0, 5}});
    const auto report = score_concepts({gold}, {pred}, MatchMode::Lenient);
    CHECK(report.micro.tp == 1);
    CHECK(report.micro.fp == 1);
    CHECK(report.micro.fn == 0);
  }

  TEST_CASE("worked concept example: strict 1/3, 1/2, 0.4; lenient 2/3, 1, 0.8") {
    const auto gold = doc_with_entities("d", {{"Tobacco use", 0, 5}, {"Alcohol use", 10, 15}});
    const auto pred = doc_with_entities(
        "d", {{"Tobacco use", 0, 5}, {"Alcohol use", 12, 18}, {"Drug use", 20, 24}});

    const auto strict = score_concepts({gold}, {pred}, MatchMode::Strict);
    CHECK(strict.micro.precision() == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(strict.micro.recall() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(strict.micro.f1() == doctest::Approx(0.4).epsilon(1e-12));

    const auto lenient = score_concepts({gold}, {pred}, MatchMode::Lenient);
    CHECK(lenient.micro.precision() == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(lenient.micro.recall() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lenient.micro.f1() == doctest::Approx(0.8).epsilon(1e-12));

    // per-class counts sum to micro counts
    long tp = 0, fp = 0, fn = 0;
    for (const auto& [cls, c] : lenient.per_class) {
      tp += c.tp;
      fp += c.fp;
      fn += c.fn;
    }
    CHECK(tp == lenient.micro.tp);
    CHECK(fp == lenient.micro.fp);
    CHECK(fn == lenient.micro.fn);
  }

  TEST_CASE("score_concepts trivial cases") {
    const auto gold = doc_with_entities("d", {{"Tobacco use", 0, 5}});
    const auto perfect = score_concepts({gold}, {gold}, MatchMode::Strict);
    CHECK(perfect.micro.precision() == 1.0);
    CHECK(perfect.micro.recall() == 1.0);
    CHECK(perfect.micro.f1() == 1.0);

    const auto empty_pred = doc_with_entities("d", {});
    const auto zeros = score_concepts({gold}, {empty_pred}, MatchMode::Lenient);
    CHECK(zeros.micro.precision() == 0.0);
    CHECK(zeros.micro.recall() == 0.0);
    CHECK(zeros.micro.f1() == 0.0);

    const auto other = doc_with_entities("other", {});
    CHECK_THROWS_AS(score_concepts({gold}, {other}, MatchMode::Strict), Error);
  }

  TEST_CASE("symmetry: swapping gold and pred swaps precision and recall") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      auto random_doc = [&](const std::string& id) {
        std::vector<std::tuple<std::string, std::size_t, std::size_t>> spans;
        const std::size_t n = rng.bounded(5);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t start = rng.bounded(20);
          const std::size_t len = 1 + rng.bounded(5);
          spans.push_back({rng.bounded(2) ? "Tobacco use" : "Alcohol use", start, start + len});
        }
        return doc_with_entities(id, spans);
      };
      const auto a = random_doc("d");
      const auto b = random_doc("d");
      for (const auto mode : {MatchMode::Strict, MatchMode::Lenient}) {
        const auto ab = score_concepts({a}, {b}, mode);
        const auto ba = score_concepts({b}, {a}, mode);
        CHECK(ab.micro.precision() == doctest::Approx(ba.micro.recall()).epsilon(1e-12));
        CHECK(ab.micro.recall() == doctest::Approx(ba.micro.precision()).epsilon(1e-12));
        // strict never beats lenient
        if (mode == MatchMode::Strict) {
          const auto lenient = score_concepts({a}, {b}, MatchMode::Lenient);
          CHECK(ab.micro.tp <= lenient.micro.tp);
          CHECK(ab.micro.f1() <= lenient.micro.f1() + 1e-12);
        }
      }
    }
  }

  TEST_CASE("matching cardinality equals the exhaustive maximum") {
    Rng rng(17);
    for (int trial = 0; trial < 300; ++trial) {
      auto random_entities = [&]() {
        std::vector<EntityAnnotation> out;
        const std::size_t n = rng.bounded(7);
        for (std::size_t i = 0; i < n; ++i) {
          EntityAnnotation e;
          e.id = "T" + std::to_string(i + 1);
          e.category = rng.bounded(2) ? "Tobacco use" : "Alcohol use";
          e.start = rng.bounded(25);
          e.end = e.start + 1 + rng.bounded(5);
          out.push_back(std::move(e));
        }
        return out;
      };
      const auto gold = random_entities();
      const auto pred = random_entities();
      for (const auto mode : {MatchMode::Strict, MatchMode::Lenient}) {
        const auto pairs = match_entities(gold, pred, mode);
        CHECK(pairs.size() == testutil::brute_force_max_matching(gold, pred, mode));
        // one-to-one
        std::set<std::size_t> gs, ps;
        for (const auto& [g, p] : pairs) {
          CHECK(gs.insert(g).second);
          CHECK(ps.insert(p).second);
        }
      }
    }
  }

  TEST_CASE("deleting an unmatched gold entity weakly increases recall") {
    const auto gold = doc_with_entities("d", {{"Tobacco use", 0, 5}, {"Alcohol use", 10, 15}});
    const auto pred = doc_with_entities("d", {{"Tobacco use", 0, 5}});
    const auto before = score_concepts({gold}, {pred}, MatchMode::Strict);
    const auto smaller = doc_with_entities("d", {{"Tobacco use", 0, 5}});
    const auto after = score_concepts({smaller}, {pred}, MatchMode::Strict);
    CHECK(after.micro.recall() >= before.micro.recall());

    // adding a spurious prediction never increases precision
    const auto more_pred =
        doc_with_entities("d", {{"Tobacco use", 0, 5}, {"Drug use", 20, 22}});
    const auto noisier = score_concepts({gold}, {more_pred}, MatchMode::Strict);
    CHECK(noisier.micro.precision() <= before.micro.precision() + 1e-12);
  }

  TEST_CASE("relation scoring: identical relations over identical entities") {
    AnnotatedDoc gold;
    gold.doc.doc_id = "d";
    gold.entities = {{"T1", "Tobacco use", 0, 15, ""}, {"T2", "Amount", 17, 28, ""}};
    gold.relations = {{"R1", "Attr-of", "T2", "T1"}};
    for (const auto mode : {MatchMode::Strict, MatchMode::Lenient}) {
      const auto report = score_relations_on_gold_entities({gold}, {gold}, mode);
      CHECK(report.micro.f1() == 1.0);
    }
  }

  TEST_CASE("relation scoring: wrong rel_type is fp plus fn") {
    AnnotatedDoc gold;
    gold.doc.doc_id = "d";
    gold.entities = {{"T1", "Tobacco use", 0, 15, ""}, {"T2", "Amount", 17, 28, ""}};
    gold.relations = {{"R1", "Attr-of", "T2", "T1"}};
    AnnotatedDoc pred = gold;
    pred.relations = {{"R1", "Wrong-type", "T2", "T1"}};
    const auto report = score_relations_on_gold_entities({gold}, {pred}, MatchMode::Strict);
    CHECK(report.micro.tp == 0);
    CHECK(report.micro.fp == 1);
    CHECK(report.micro.fn == 1);
  }

  TEST_CASE("relation endpoint overlap: tp lenient, fp strict") {
    AnnotatedDoc gold;
    gold.doc.doc_id = "d";
    gold.entities = {{"T1", "Amount", 0, 5, ""}, {"T2", "Tobacco use", 10, 20, ""}};
    gold.relations = {{"R1", "Attr-of", "T1", "T2"}};
    AnnotatedDoc pred;
    pred.doc.doc_id = "d";
    pred.entities = {{"T1", "Amount", 0, 5, ""}, {"T2", "Tobacco use", 12, 22, ""}};
    pred.relations = {{"R1", "Attr-of", "T1", "T2"}};

    const auto strict =
        score_relations({gold}, {pred}, MatchMode::Strict, align_entities({gold}, {pred}, MatchMode::Strict));
    CHECK(strict.micro.tp == 0);
    CHECK(strict.micro.fp == 1);
    CHECK(strict.micro.fn == 1);

    const auto lenient = score_relations({gold}, {pred}, MatchMode::Lenient,
                                         align_entities({gold}, {pred}, MatchMode::Lenient));
    CHECK(lenient.micro.tp == 1);
    CHECK(lenient.micro.fp == 0);
    CHECK(lenient.micro.fn == 0);
  }

  TEST_CASE("end-to-end: relation recall is bounded by concept recall effects") {
    // gold: two concepts each with one attribute; pred recovers one concept
    // (with its relation) and misses the other entirely.
    AnnotatedDoc gold;
    gold.doc.doc_id = "d";
    gold.entities = {{"T1", "Tobacco use", 0, 10, ""},
                     {"T2", "Amount", 12, 20, ""},
                     {"T3", "Alcohol use", 30, 40, ""},
                     {"T4", "Amount", 42, 50, ""}};
    gold.relations = {{"R1", "Attr-of", "T2", "T1"}, {"R2", "Attr-of", "T4", "T3"}};
    AnnotatedDoc pred;
    pred.doc.doc_id = "d";
    pred.entities = {{"T1", "Tobacco use", 0, 10, ""}, {"T2", "Amount", 12, 20, ""}};
    pred.relations = {{"R1", "Attr-of", "T2", "T1"}};

    const auto reports = score_end_to_end({gold}, {pred}, MatchMode::Strict);
    CHECK(reports.concepts.micro.recall() == doctest::Approx(0.5));
    CHECK(reports.relations.micro.recall() == doctest::Approx(0.5));
    CHECK(reports.relations.micro.precision() == doctest::Approx(1.0));
    CHECK(reports.relations.task == EvalTask::EndToEnd);

    // feeding gold back through scores 1.0 everywhere
    const auto perfect = score_end_to_end({gold}, {gold}, MatchMode::Lenient);
    CHECK(perfect.concepts.micro.f1() == 1.0);
    CHECK(perfect.relations.micro.f1() == 1.0);

    // empty predictions score zero
    AnnotatedDoc empty;
    empty.doc.doc_id = "d";
    const auto zeros = score_end_to_end({gold}, {empty}, MatchMode::Strict);
    CHECK(zeros.concepts.micro.f1() == 0.0);
    CHECK(zeros.relations.micro.f1() == 0.0);
  }

  TEST_CASE("report table renders both modes with four decimals") {
    const auto gold = doc_with_entities("d", {{"Tobacco use", 0, 5}, {"Alcohol use", 10, 15}});
    const auto pred = doc_with_entities(
        "d", {{"Tobacco use", 0, 5}, {"Alcohol use", 12, 18}, {"Drug use", 20, 24}});
    const auto strict = score_concepts({gold}, {pred}, MatchMode::Strict);
    const auto lenient = score_concepts({gold}, {pred}, MatchMode::Lenient);
    const std::string table = format_report_table("Concept extraction", &strict, &lenient);
    CHECK(table.find("0.4000") != std::string::npos);
    CHECK(table.find("0.8000") != std::string::npos);
    CHECK(table.find("micro") != std::string::npos);
    const auto j = report_to_json(strict);
    CHECK(j["micro"]["tp"] == 1);
    CHECK(j["mode"] == "strict");
  }
}
