#include <doctest.h>

#include <sdoh/sdoh.hpp>
#include <sstream>

#include "test_helpers.hpp"

using namespace sdoh;

namespace {

struct MiniCorpus {
  SDoHSchema schema = testutil::mini_schema();
  std::vector<TemplateSpec> templates = testutil::mini_templates();
  std::vector<AnnotatedDoc> train, val, test;
};

const MiniCorpus& mini_corpus() {
  static const MiniCorpus c = [] {
    MiniCorpus c;
    const auto docs = generate_corpus(c.schema, c.templates, 60, 101, 0.0);
    c.train.assign(docs.begin(), docs.begin() + 40);
    c.val.assign(docs.begin() + 40, docs.begin() + 48);
    c.test.assign(docs.begin() + 48, docs.end());
    return c;
  }();
  return c;
}

const TokenClassifierModel& mini_model() {
  static const TokenClassifierModel m = [] {
    TrainConfig config;
    config.seed = 5;
    return train_tagger(mini_corpus().train, mini_corpus().val, config, mini_corpus().schema);
  }();
  return m;
}

std::vector<AnnotatedDoc> predict_corpus(const TokenClassifierModel& m,
                                         const std::vector<AnnotatedDoc>& docs,
                                         DecodeAlgo algo = DecodeAlgo::Greedy) {
  std::vector<AnnotatedDoc> out;
  for (const auto& ad : docs) {
    AnnotatedDoc p;
    p.doc = ad.doc;
    const auto tokens = tokenize(ad.doc.text);
    p.entities = decode_bio(ad.doc.text, tokens, predict_tags(m, tokens, algo).labels);
    out.push_back(std::move(p));
  }
  return out;
}

std::string serialized(const LinearModel& m) {
  std::ostringstream ss;
  m.save(ss);
  return ss.str();
}

}  // namespace

TEST_SUITE("tagger") {
  TEST_CASE("featurize_token emits the documented template") {
    const auto tokens = tokenize("everyday smoker");
    const auto feats = featurize_token(tokens, 1, 2);
    auto has = [&](const std::string& f) {
      return std::find(feats.begin(), feats.end(), f) != feats.end();
    };
    CHECK(has("w0=smoker"));
    CHECK(has("w-1=everyday"));
    CHECK(has("shape0=x+"));
    CHECK(has("suf3=ker"));
    CHECK(has("pre3=smo"));
    CHECK(has("w-2=<s>"));
    CHECK(has("w+1=</s>"));
    CHECK(has("last_in_sentence"));

    // single-token sentence: all neighbors are sentinels
    const auto single = tokenize("smoker");
    const auto sfeats = featurize_token(single, 0, 2);
    CHECK(std::find(sfeats.begin(), sfeats.end(), "w-1=<s>") != sfeats.end());
    CHECK(std::find(sfeats.begin(), sfeats.end(), "w+1=</s>") != sfeats.end());
    CHECK(std::find(sfeats.begin(), sfeats.end(), "first_in_sentence") != sfeats.end());

    // deterministic
    CHECK(featurize_token(tokens, 1, 2) == feats);
    CHECK_THROWS_AS(featurize_token(tokens, 9, 2), Error);

    // neighbors do not cross sentence boundaries
    const auto two = tokenize("One sentence.\nTwo here");
    std::size_t second_start = 0;
    for (std::size_t i = 0; i < two.size(); ++i)
      if (two[i].sentence_index == 1) {
        second_start = i;
        break;
      }
    const auto cross = featurize_token(two, second_start, 2);
    CHECK(std::find(cross.begin(), cross.end(), "w-1=<s>") != cross.end());
  }

  TEST_CASE("word shapes compress character classes") {
    CHECK(detail::word_shape("smoker") == "x+");
    CHECK(detail::word_shape("Smoker") == "Xx+");
    CHECK(detail::word_shape("46") == "9+");
    CHECK(detail::word_shape("B12") == "X9+");
    CHECK(detail::word_shape("/") == "/");
  }

  TEST_CASE("training on a separable corpus reaches strict F1 1.0 held out") {
    const auto& c = mini_corpus();
    const auto pred = predict_corpus(mini_model(), c.test);
    const auto report = score_concepts(c.test, pred, MatchMode::Strict);
    CHECK(report.micro.f1() == 1.0);

    // predicted labels equal gold labels on the separable corpus
    for (const auto& ad : c.test) {
      const auto tokens = tokenize(ad.doc.text);
      const auto gold = encode_bio(tokens, ad.entities);
      CHECK(predict_tags(mini_model(), tokens).labels == gold);
    }
  }

  TEST_CASE("training is deterministic and respects max_epochs") {
    const auto& c = mini_corpus();
    TrainConfig config;
    config.seed = 9;
    const auto a = train_tagger(c.train, c.val, config, c.schema);
    const auto b = train_tagger(c.train, c.val, config, c.schema);
    CHECK(serialized(a.lm) == serialized(b.lm));

    TrainConfig one;
    one.seed = 9;
    one.max_epochs = 1;
    const auto single = train_tagger(c.train, c.val, one, c.schema);
    CHECK(single.lm.epochs_run == 1);

    CHECK_THROWS_AS(train_tagger({}, c.val, config, c.schema), Error);
  }

  TEST_CASE("softmax scores are a distribution and decoding is BIO-legal") {
    const auto& model = mini_model();
    Rng rng(31);
    std::vector<std::string> vocabulary = {
        "everyday", "smoker", "packs", "day", "heavy",  "drinker", "drinks", "night",
        "retail",   "cashier", "years", "46",  "female", "widget",  "zzz",    "1",
        "/",        ",",       ".",     "for", "at",     "Patient", "is",     "an"};
    for (int trial = 0; trial < 1000; ++trial) {
      std::string text;
      const std::size_t n = 1 + rng.bounded(15);
      for (std::size_t i = 0; i < n; ++i) {
        if (i) text += " ";
        text += vocabulary[rng.bounded(vocabulary.size())];
      }
      const auto tokens = tokenize(text);
      for (const auto algo : {DecodeAlgo::Greedy, DecodeAlgo::Viterbi}) {
        const auto pred = predict_tags(model, tokens, algo);
        REQUIRE(pred.labels.size() == tokens.size());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
          double sum = 0.0;
          for (double p : pred.scores[i]) sum += p;
          CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
          if (pred.labels[i].tag == BIOLabel::Tag::I) {
            REQUIRE(i > 0);
            CHECK(tokens[i - 1].sentence_index == tokens[i].sentence_index);
            CHECK(pred.labels[i - 1].tag != BIOLabel::Tag::O);
            CHECK(pred.labels[i - 1].category == pred.labels[i].category);
          }
        }
      }
    }
    CHECK(predict_tags(model, {}).labels.empty());
  }

  TEST_CASE("viterbi agrees with greedy on the separable corpus") {
    const auto& c = mini_corpus();
    for (const auto& ad : c.test) {
      const auto tokens = tokenize(ad.doc.text);
      CHECK(predict_tags(mini_model(), tokens, DecodeAlgo::Viterbi).labels ==
            predict_tags(mini_model(), tokens, DecodeAlgo::Greedy).labels);
    }
  }

  TEST_CASE("save and load reproduce predictions exactly") {
    const auto& model = mini_model();
    const auto path = std::filesystem::temp_directory_path() / "sdoh-test-ner.model";
    model.save_file(path);
    const auto loaded = TokenClassifierModel::load_file(path);
    CHECK(serialized(loaded.lm) == serialized(model.lm));
    for (const auto& ad : mini_corpus().test) {
      const auto tokens = tokenize(ad.doc.text);
      CHECK(predict_tags(loaded, tokens).labels == predict_tags(model, tokens).labels);
    }
    std::filesystem::remove(path);

    CHECK_THROWS_AS(TokenClassifierModel::load_file("/nonexistent/model"), Error);
    TokenClassifierModel untrained;
    CHECK_THROWS_AS(predict_tags(untrained, tokenize("x")), Error);
  }

  TEST_CASE("fine-tuning: zero epochs returns the input unchanged") {
    const auto& c = mini_corpus();
    TrainConfig zero;
    zero.max_epochs = 0;
    const auto out = fine_tune_tagger(mini_model(), c.train, c.val, zero);
    CHECK(serialized(out.lm) == serialized(mini_model().lm));
  }

  TEST_CASE("fine-tuning beats direct transfer on a shifted domain") {
    const auto& c = mini_corpus();
    const auto shifted = generate_corpus(c.schema, c.templates, 40, 202, 0.8);
    const std::vector<AnnotatedDoc> target_train(shifted.begin(), shifted.begin() + 20);
    const std::vector<AnnotatedDoc> target_val(shifted.begin() + 20, shifted.begin() + 25);
    const std::vector<AnnotatedDoc> target_test(shifted.begin() + 25, shifted.end());

    const double direct =
        score_concepts(target_test, predict_corpus(mini_model(), target_test), MatchMode::Strict)
            .micro.f1();
    TrainConfig config;
    config.seed = 7;
    const auto tuned = fine_tune_tagger(mini_model(), target_train, target_val, config);
    const double tuned_f1 =
        score_concepts(target_test, predict_corpus(tuned, target_test), MatchMode::Strict)
            .micro.f1();
    CHECK(tuned_f1 >= direct);
    CHECK(direct < 1.0);  // the shift must actually hurt direct transfer
  }

  TEST_CASE("fine-tuning tracks retraining on identical-distribution data") {
    const auto& c = mini_corpus();
    const auto more = generate_corpus(c.schema, c.templates, 30, 404, 0.0);
    TrainConfig config;
    config.seed = 3;
    const auto tuned = fine_tune_tagger(mini_model(), more, c.val, config);

    std::vector<AnnotatedDoc> merged = c.train;
    merged.insert(merged.end(), more.begin(), more.end());
    const auto retrained = train_tagger(merged, c.val, config, c.schema);

    const double f_tuned =
        score_concepts(c.test, predict_corpus(tuned, c.test), MatchMode::Strict).micro.f1();
    const double f_retrained =
        score_concepts(c.test, predict_corpus(retrained, c.test), MatchMode::Strict).micro.f1();
    CHECK(std::abs(f_tuned - f_retrained) <= 0.02);
  }
}
