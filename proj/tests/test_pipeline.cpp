#include <doctest.h>

#include <sdoh/sdoh.hpp>
#include <sstream>

#include "test_helpers.hpp"

using namespace sdoh;

namespace {

struct PipelineFixture {
  SDoHSchema schema = testutil::mini_schema();
  std::vector<AnnotatedDoc> train, val, test;
  TokenClassifierModel ner;
  PairClassifierModel re;
};

const PipelineFixture& fixture() {
  static const PipelineFixture f = [] {
    PipelineFixture f;
    const auto docs = generate_corpus(f.schema, testutil::mini_templates(), 70, 606, 0.0);
    f.train.assign(docs.begin(), docs.begin() + 45);
    f.val.assign(docs.begin() + 45, docs.begin() + 55);
    f.test.assign(docs.begin() + 55, docs.end());
    TrainConfig config;
    config.seed = 8;
    f.ner = train_tagger(f.train, f.val, config, f.schema);
    f.re = train_linker(f.train, f.val, config, f.schema);
    return f;
  }();
  return f;
}

std::string serialized(const LinearModel& m) {
  std::ostringstream ss;
  m.save(ss);
  return ss.str();
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("extract assembles records with linked attributes") {
    const auto& f = fixture();
    Document doc;
    doc.doc_id = "probe";
    doc.patient_id = "p1";
    doc.text = "Patient is an everyday smoker, smokes 1 packs/day for 46 years.\n";
    const auto out = extract(f.ner, f.re, doc, f.schema);
    REQUIRE(out.records.size() == 1);
    const auto& record = out.records[0];
    CHECK(record.doc_id == "probe");
    CHECK(record.patient_id == "p1");
    CHECK(record.concept_entity.category == "Tobacco use");
    CHECK(record.concept_entity.surface == "everyday smoker");
    REQUIRE(record.attributes.size() == 2);
    CHECK(record.attributes[0].second.surface == "1 packs/day");
    CHECK(record.attributes[1].second.surface == "46 years");
    CHECK(record.attributes[0].first == "Attr-of");

    // empty document
    Document empty;
    empty.doc_id = "empty";
    empty.text = "";
    CHECK(extract(f.ner, f.re, empty, f.schema).records.empty());

    // concept with no attributes still yields a record
    Document bare;
    bare.doc_id = "bare";
    bare.text = "Patient identifies as female.\n";
    const auto bare_out = extract(f.ner, f.re, bare, f.schema);
    REQUIRE(bare_out.records.size() == 1);
    CHECK(bare_out.records[0].concept_entity.category == "Gender");
    CHECK(bare_out.records[0].attributes.empty());
  }

  TEST_CASE("extract rejects schema-version mismatches") {
    const auto& f = fixture();
    auto other = f.re;
    other.lm.schema_version = "other-schema";
    Document doc;
    doc.doc_id = "d";
    doc.text = "x";
    try {
      extract(f.ner, other, doc, f.schema);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == "SchemaVersionMismatch");
    }
    TokenClassifierModel untrained;
    CHECK_THROWS_AS(extract(untrained, f.re, doc, f.schema), Error);
  }

  TEST_CASE("adapt: direct returns the inputs bit-identically") {
    const auto& f = fixture();
    const auto out = adapt(f.ner, f.re, AdaptStrategy::Direct, f.train, {}, {}, {}, f.schema);
    CHECK(serialized(out.ner.lm) == serialized(f.ner.lm));
    CHECK(serialized(out.re.lm) == serialized(f.re.lm));

    CHECK_THROWS_AS(adapt(f.ner, f.re, AdaptStrategy::FineTune, f.train, {}, {}, {}, f.schema),
                    Error);
    CHECK(parse_strategy("merge-retrain") == AdaptStrategy::MergeRetrain);
    CHECK_THROWS_AS(parse_strategy("bogus"), Error);
  }

  TEST_CASE("adapt: fine-tune and merge-retrain beat direct on a shifted domain") {
    const auto& f = fixture();
    const auto target = generate_corpus(f.schema, testutil::mini_templates(), 50, 707, 0.8);
    const std::vector<AnnotatedDoc> t_train(target.begin(), target.begin() + 25);
    const std::vector<AnnotatedDoc> t_val(target.begin() + 25, target.begin() + 30);
    const std::vector<AnnotatedDoc> t_test(target.begin() + 30, target.end());

    auto concept_f1 = [&](const TokenClassifierModel& ner, const std::vector<AnnotatedDoc>& docs) {
      std::vector<AnnotatedDoc> pred;
      for (const auto& ad : docs) {
        AnnotatedDoc p;
        p.doc = ad.doc;
        const auto tokens = tokenize(ad.doc.text);
        p.entities = decode_bio(ad.doc.text, tokens, predict_tags(ner, tokens).labels);
        pred.push_back(std::move(p));
      }
      return score_concepts(docs, pred, MatchMode::Strict).micro.f1();
    };

    TrainConfig config;
    config.seed = 14;
    const double direct_f1 = concept_f1(f.ner, t_test);
    const auto tuned =
        adapt(f.ner, f.re, AdaptStrategy::FineTune, f.train, t_train, t_val, config, f.schema);
    const auto merged =
        adapt(f.ner, f.re, AdaptStrategy::MergeRetrain, f.train, t_train, t_val, config, f.schema);
    CHECK(concept_f1(tuned.ner, t_test) >= direct_f1);
    CHECK(concept_f1(merged.ner, t_test) >= direct_f1);
    CHECK(direct_f1 < concept_f1(f.ner, f.test));  // performance drops off-domain
  }

  TEST_CASE("aggregate_rates matches a brute-force tally") {
    const auto schema = testutil::mini_schema();
    auto record = [&](const std::string& patient, const std::string& category) {
      SDoHRecord r;
      r.doc_id = "d";
      r.patient_id = patient;
      r.concept_entity.category = category;
      return r;
    };
    // 4 patients; p1 has 5 alcohol records, p2 and p3 one each
    std::vector<SDoHRecord> records;
    for (int i = 0; i < 5; ++i) records.push_back(record("p1", "Alcohol use"));
    records.push_back(record("p2", "Alcohol use"));
    records.push_back(record("p3", "Alcohol use"));
    const std::set<std::string> roster = {"p1", "p2", "p3", "p4"};
    const auto table = aggregate_rates(records, roster, schema);
    CHECK(table.rows.at("Alcohol use").concept_count == 7);
    CHECK(table.rows.at("Alcohol use").patients_with_category == 3);
    CHECK(table.rows.at("Alcohol use").rate == doctest::Approx(0.75));
    CHECK(table.rows.at("Tobacco use").concept_count == 0);
    CHECK(table.rows.at("Tobacco use").rate == 0.0);
    CHECK(table.total_patients == 4);

    // single patient, single record
    const auto single = aggregate_rates({record("p", "Tobacco use")}, {"p"}, schema);
    CHECK(single.rows.at("Tobacco use").rate == 1.0);
    CHECK(single.rows.at("Gender").rate == 0.0);

    // empty records, roster of 10
    std::set<std::string> ten;
    for (int i = 0; i < 10; ++i) ten.insert("p" + std::to_string(i));
    const auto empty_table = aggregate_rates({}, ten, schema);
    for (const auto& [cat, row] : empty_table.rows) CHECK(row.rate == 0.0);
    CHECK(empty_table.total_patients == 10);

    CHECK_THROWS_AS(aggregate_rates({record("ghost", "Tobacco use")}, roster, schema), Error);
    CHECK_THROWS_AS(aggregate_rates({}, {}, schema), Error);

    // randomized comparison against the independent tally
    Rng rng(15);
    const std::vector<std::string> cats = {"Tobacco use", "Alcohol use", "Employment", "Gender"};
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<SDoHRecord> rs;
      std::set<std::string> everyone;
      for (int i = 0; i < 8; ++i) everyone.insert("p" + std::to_string(i));
      const std::size_t n = rng.bounded(60);
      for (std::size_t i = 0; i < n; ++i)
        rs.push_back(record("p" + std::to_string(rng.bounded(8)), cats[rng.bounded(cats.size())]));
      const auto got = aggregate_rates(rs, everyone, schema);
      const auto want = testutil::brute_force_rates(rs);
      for (const auto& [cat, row] : got.rows) {
        const auto cc = want.concept_count.find(cat);
        CHECK(row.concept_count == (cc == want.concept_count.end() ? 0 : cc->second));
        const auto pw = want.patients.find(cat);
        const std::size_t patients = pw == want.patients.end() ? 0 : pw->second.size();
        CHECK(row.patients_with_category == patients);
        CHECK(row.rate == doctest::Approx(static_cast<double>(patients) / 8.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("records serialize and parse back") {
    const auto& f = fixture();
    std::vector<Document> docs;
    for (const auto& ad : f.test) docs.push_back(ad.doc);
    const auto batch = run_batch(f.ner, f.re, docs, f.schema, 1);
    const auto parsed = parse_records(serialize_records(batch.records));
    REQUIRE(parsed.size() == batch.records.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      CHECK(parsed[i].doc_id == batch.records[i].doc_id);
      CHECK(parsed[i].patient_id == batch.records[i].patient_id);
      CHECK(parsed[i].concept_entity.category == batch.records[i].concept_entity.category);
      CHECK(parsed[i].attributes.size() == batch.records[i].attributes.size());
    }
  }

  TEST_CASE("run_batch is invariant to parallelism and isolates failures") {
    const auto& f = fixture();
    std::vector<Document> docs;
    for (const auto& ad : f.test) docs.push_back(ad.doc);
    // inject one undecodable document
    Document broken;
    broken.doc_id = "broken";
    broken.patient_id = "px";
    broken.text = "\xFF\xFE invalid bytes";
    docs.push_back(broken);

    const auto serial = run_batch(f.ner, f.re, docs, f.schema, 1);
    const auto parallel = run_batch(f.ner, f.re, docs, f.schema, 8);
    CHECK(serialize_records(serial.records) == serialize_records(parallel.records));
    CHECK(serial.diagnostics == parallel.diagnostics);
    REQUIRE(serial.diagnostics.size() >= 1);
    bool found = false;
    for (const auto& d : serial.diagnostics) found = found || d.rfind("broken:", 0) == 0;
    CHECK(found);
    CHECK(serial.predictions.size() == docs.size() - 1);

    // submission order does not matter
    std::vector<Document> reversed(docs.rbegin(), docs.rend());
    const auto rev = run_batch(f.ner, f.re, reversed, f.schema, 4);
    CHECK(serialize_records(rev.records) == serialize_records(serial.records));

    CHECK(run_batch(f.ner, f.re, {}, f.schema, 4).records.empty());
  }

  TEST_CASE("end-to-end strict F1 is high on the separable corpus") {
    const auto& f = fixture();
    std::vector<Document> docs;
    for (const auto& ad : f.test) docs.push_back(ad.doc);
    const auto batch = run_batch(f.ner, f.re, docs, f.schema, 2);
    const auto reports = score_end_to_end(f.test, batch.predictions, MatchMode::Strict);
    CHECK(reports.concepts.micro.f1() >= 0.95);
    CHECK(reports.relations.micro.f1() >= 0.90);
  }
}
