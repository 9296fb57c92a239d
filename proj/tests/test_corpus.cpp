#include <doctest.h>

#include <filesystem>
#include <sdoh/sdoh.hpp>

#include "test_helpers.hpp"

using namespace sdoh;

namespace {
const SDoHSchema& schema() {
  static const SDoHSchema s = SDoHSchema::default_schema();
  return s;
}
}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("parse_standoff reads entities and relations") {
    const std::string text = "everyday smoker";
    const auto ad = parse_standoff(text, "T1\tTobacco_use 0 15\teveryday smoker\n", schema());
    REQUIRE(ad.entities.size() == 1);
    CHECK(ad.entities[0].category == "Tobacco use");
    CHECK(ad.entities[0].start == 0);
    CHECK(ad.entities[0].end == 15);
    CHECK(ad.relations.empty());

    const auto empty = parse_standoff(text, "", schema());
    CHECK(empty.entities.empty());
    CHECK(empty.relations.empty());

    const std::string two = "everyday smoker, 1 packs/day";
    const auto linked = parse_standoff(two,
                                       "T1\tTobacco_use 0 15\teveryday smoker\n"
                                       "T2\tAmount 17 28\t1 packs/day\n"
                                       "R1\tAttr-of Arg1:T2 Arg2:T1\n",
                                       schema());
    REQUIRE(linked.relations.size() == 1);
    CHECK(linked.relations[0].head == "T2");
    CHECK(linked.relations[0].tail == "T1");
  }

  TEST_CASE("parse_standoff error taxonomy") {
    const std::string text = "everyday smoker";
    auto kind_of = [&](const std::string& ann) {
      try {
        parse_standoff(text, ann, schema());
      } catch (const Error& e) {
        return e.kind();
      }
      return std::string("no-error");
    };
    CHECK(kind_of("T1\tTobacco_use 0 15\tsmoker\n") == "SurfaceMismatch");
    CHECK(kind_of("T1\tTobacco_use 0 99\teveryday smoker\n") == "SpanOutOfBounds");
    CHECK(kind_of("T1\tTobacco_use 8 3\tx\n") == "SpanOutOfBounds");
    CHECK(kind_of("T1\tNot_a_category 0 15\teveryday smoker\n") == "UnknownCategory");
    CHECK(kind_of("garbled line\n") == "MalformedLine");
    CHECK(kind_of("T1\tTobacco_use 0\teveryday smoker\n") == "MalformedLine");
    CHECK(kind_of("T1\tTobacco_use 0 8;9 15\teveryday smoker\n") == "DiscontinuousSpanUnsupported");
    CHECK(kind_of("R1\tAttr-of Arg1:T5 Arg2:T6\n") == "DanglingRelation");
    CHECK(kind_of("E1\tevent\n") == "MalformedLine");
    // relation whose head is a concept
    const std::string pair_text = "everyday smoker, 46 years";
    try {
      parse_standoff(pair_text,
                     "T1\tTobacco_use 0 15\teveryday smoker\n"
                     "T2\tDuration 17 25\t46 years\n"
                     "R1\tAttr-of Arg1:T1 Arg2:T2\n",
                     schema());
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == "RelationRoleViolation");
    }
  }

  TEST_CASE("serialize_standoff is bit-stable and round-trips") {
    const auto docs = generate_corpus(schema(), default_templates(), 25, 11, 0.2);
    for (const auto& ad : docs) {
      const std::string ann = serialize_standoff(ad.doc, ad.entities, ad.relations);
      const auto reparsed = parse_standoff(ad.doc.text, ann, schema(), ad.doc.doc_id);
      CHECK(reparsed.entities == ad.entities);
      CHECK(reparsed.relations == ad.relations);
      CHECK(serialize_standoff(reparsed.doc, reparsed.entities, reparsed.relations) == ann);
    }
    Document d;
    d.text = "x";
    CHECK(serialize_standoff(d, {}, {}).empty());
  }

  TEST_CASE("serialize_standoff rejects invariant violations") {
    Document d;
    d.doc_id = "d";
    d.text = "everyday smoker";
    EntityAnnotation bad{"T1", "Tobacco use", 0, 15, "wrong surface!!"};
    CHECK_THROWS_WITH_AS(serialize_standoff(d, {bad}, {}), doctest::Contains("surface"), Error);
    EntityAnnotation ok{"T1", "Tobacco use", 0, 15, "everyday smoker"};
    RelationAnnotation dangling{"R1", "Attr-of", "T9", "T1"};
    CHECK_THROWS_AS(serialize_standoff(d, {ok}, {dangling}), Error);
  }

  TEST_CASE("split_corpus reproduces the published sizes") {
    std::vector<std::string> ids;
    for (int i = 0; i < 629; ++i) ids.push_back("doc-" + std::to_string(i));
    const auto split = split_corpus(ids, {0.8, 0.2, 0.10}, 1);
    CHECK(split.train.size() == 452);
    CHECK(split.validation.size() == 51);
    CHECK(split.test.size() == 126);

    ids.resize(200);
    const auto half = split_corpus(ids, {0.5, 0.5, 0.10}, 1);
    CHECK(half.train.size() == 90);
    CHECK(half.validation.size() == 10);
    CHECK(half.test.size() == 100);
  }

  TEST_CASE("split_corpus partitions deterministically") {
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back("doc-" + std::to_string(i));
    const auto a = split_corpus(ids, {0.8, 0.2, 0.10}, 7);
    const auto b = split_corpus(ids, {0.8, 0.2, 0.10}, 7);
    const auto c = split_corpus(ids, {0.8, 0.2, 0.10}, 8);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
    CHECK(a.train.size() == c.train.size());
    CHECK(a.test.size() == c.test.size());
    CHECK(a.train != c.train);  // different seed, different membership

    std::set<std::string> all;
    all.insert(a.train.begin(), a.train.end());
    all.insert(a.validation.begin(), a.validation.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == ids.size());
    CHECK(a.train.size() + a.validation.size() + a.test.size() == ids.size());

    CHECK_THROWS_AS(split_corpus({}, {0.8, 0.2, 0.1}, 1), Error);
    CHECK_THROWS_AS(split_corpus(ids, {0.7, 0.2, 0.1}, 1), Error);
  }

  TEST_CASE("validate_corpus flags invariant breaks and compat misses") {
    // clean synthetic corpus validates clean
    const auto docs = generate_corpus(schema(), default_templates(), 10, 3, 0.0);
    const auto clean = validate_corpus(docs, schema());
    CHECK(clean.ok());
    CHECK(clean.warnings.empty());

    AnnotatedDoc bad;
    bad.doc.doc_id = "bad";
    bad.doc.text = "everyday smoker, 1 packs/day here";
    bad.entities = {
        {"T1", "Tobacco use", 0, 15, "everyday smoker"},
        {"T2", "Amount", 17, 28, "1 packs/day"},
        {"T3", "Education", 29, 33, "here"},
    };
    // head has role concept
    bad.relations.push_back({"R1", "Attr-of", "T1", "T3"});
    // compat miss: Amount -> Education
    bad.relations.push_back({"R2", "Attr-of", "T2", "T3"});
    const auto report = validate_corpus({bad}, schema());
    CHECK(!report.ok());
    std::set<std::string> rules;
    for (const auto& v : report.violations) rules.insert(v.rule);
    CHECK(rules.count("relation-head-role"));
    CHECK(rules.count("relation-compat"));

    // entity category from the default schema is fine
    AnnotatedDoc good;
    good.doc.doc_id = "good";
    good.doc.text = "everyday smoker";
    good.entities = {{"T1", "Tobacco use", 0, 15, "everyday smoker"}};
    CHECK(validate_corpus({good}, schema()).ok());

    // sub-token boundary is a warning, not a violation
    AnnotatedDoc snapped;
    snapped.doc.doc_id = "warn";
    snapped.doc.text = "everyday smoker";
    snapped.entities = {{"T1", "Tobacco use", 0, 6, "everyd"}};
    const auto warn_report = validate_corpus({snapped}, schema());
    CHECK(warn_report.ok());
    REQUIRE(warn_report.warnings.size() == 1);
    CHECK(warn_report.warnings[0].rule == "entity-token-alignment");
  }

  TEST_CASE("compute_kappa closed form") {
    // 10 units; both annotators use 7 O / 3 B-Tob; 6 + 2 agreements
    std::vector<std::string> a = {"O", "O", "O", "O", "O", "O", "O", "B", "B", "B"};
    std::vector<std::string> b = {"O", "O", "O", "O", "O", "O", "B", "O", "B", "B"};
    const auto r = compute_kappa(a, b);
    CHECK(r.p_o == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.p_e == doctest::Approx(0.58).epsilon(1e-12));
    CHECK(r.kappa == doctest::Approx(0.5238).epsilon(1e-4));
    CHECK(r.unit_count == 10);

    // symmetric
    const auto rev = compute_kappa(b, a);
    CHECK(rev.kappa == doctest::Approx(r.kappa).epsilon(1e-12));

    // identical sequences
    CHECK(compute_kappa(a, a).kappa == doctest::Approx(1.0));

    // total disagreement with disjoint label use: p_o = p_e = 0 -> kappa 0
    std::vector<std::string> all_o(5, "O"), all_b(5, "B");
    const auto zero = compute_kappa(all_o, all_b);
    CHECK(zero.p_o == 0.0);
    CHECK(zero.p_e == 0.0);
    CHECK(zero.kappa == 0.0);

    CHECK_THROWS_AS(compute_kappa({"O"}, {"O", "O"}), Error);
    CHECK_THROWS_AS(compute_kappa({}, {}), Error);
  }

  TEST_CASE("manifest and corpus directory round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "sdoh-test-corpus";
    std::filesystem::remove_all(dir);
    const auto docs = generate_corpus(schema(), default_templates(), 8, 21, 0.0);
    write_corpus_dir(dir, docs);
    const auto loaded = load_corpus_dir(dir, schema());
    REQUIRE(loaded.size() == docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      CHECK(loaded[i].doc.doc_id == docs[i].doc.doc_id);
      CHECK(loaded[i].doc.patient_id == docs[i].doc.patient_id);
      CHECK(loaded[i].doc.domain == docs[i].doc.domain);
      CHECK(loaded[i].doc.text == docs[i].doc.text);
      CHECK(loaded[i].entities == docs[i].entities);
      CHECK(loaded[i].relations == docs[i].relations);
    }
    std::filesystem::remove_all(dir);
  }
}
