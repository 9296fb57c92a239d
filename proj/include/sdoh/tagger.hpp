#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "sdoh/corpus.hpp"
#include "sdoh/linear_model.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/scorer.hpp"
#include "sdoh/textproc.hpp"
#include "sdoh/types.hpp"

// Token-level BIO classifier: the concept-extraction stage. The reference
// model is a linear softmax classifier over sparse feature templates; the
// train / predict / fine_tune / save / load surface is the contract a
// heavier encoder backend would also implement.

namespace sdoh {

enum class DecodeAlgo { Greedy, Viterbi };

struct TokenClassifierModel {
  LinearModel lm;

  bool trained() const { return lm.trained; }
  void save_file(const std::filesystem::path& p) const { lm.save_file(p); }
  static TokenClassifierModel load_file(const std::filesystem::path& p) {
    TokenClassifierModel m{LinearModel::load_file(p)};
    if (m.lm.component != "ner")
      raise("ModelFormat", "expected an ner model, found component '" + m.lm.component + "'");
    return m;
  }
};

// O first, then B-/I- per schema category in declaration order. The O-first
// order makes ties resolve toward O.
inline std::vector<std::string> bio_label_set(const SDoHSchema& schema) {
  std::vector<std::string> labels{"O"};
  for (const auto& c : schema.categories) {
    labels.push_back("B-" + c.name);
    labels.push_back("I-" + c.name);
  }
  return labels;
}

namespace detail {

inline std::string word_shape(const std::string& s) {
  std::string shape;
  char prev = 0;
  std::size_t run = 0;
  auto flush = [&]() {
    if (!prev) return;
    shape.push_back(prev);
    if (run > 1) shape.push_back('+');
  };
  for (char c : s) {
    char cls;
    if (c >= 'A' && c <= 'Z') cls = 'X';
    else if (c >= 'a' && c <= 'z') cls = 'x';
    else if (c >= '0' && c <= '9') cls = '9';
    else cls = c;
    if (cls == prev) {
      ++run;
    } else {
      flush();
      prev = cls;
      run = 1;
    }
  }
  flush();
  return shape;
}

inline const std::string kBos = "<s>";
inline const std::string kEos = "</s>";

}  // namespace detail

// Deterministic feature template for one token. Neighbor lookups stay
// within the token's sentence; out-of-sentence positions render as boundary
// sentinels. The previous-label feature is appended by the trainer/decoder,
// not here, because it depends on decode state.
inline std::vector<std::string> featurize_token(const std::vector<Token>& tokens,
                                                std::size_t index, int window) {
  if (index >= tokens.size())
    raise("IndexOutOfRange", "token index " + std::to_string(index) + " of " +
                                 std::to_string(tokens.size()));
  const Token& tok = tokens[index];
  const std::string lower = ascii_lower(tok.text);

  std::vector<std::string> feats;
  feats.reserve(12 + 2 * static_cast<std::size_t>(window));
  feats.push_back("bias");
  feats.push_back("w0=" + tok.text);
  feats.push_back("lc0=" + lower);
  feats.push_back("shape0=" + detail::word_shape(tok.text));
  feats.push_back("pre3=" + lower.substr(0, std::min<std::size_t>(3, lower.size())));
  feats.push_back("suf3=" + (lower.size() <= 3 ? lower : lower.substr(lower.size() - 3)));

  auto neighbor = [&](long offset) -> const std::string* {
    const long j = static_cast<long>(index) + offset;
    if (j < 0 || j >= static_cast<long>(tokens.size())) return nullptr;
    if (tokens[static_cast<std::size_t>(j)].sentence_index != tok.sentence_index) return nullptr;
    return &tokens[static_cast<std::size_t>(j)].text;
  };
  for (int k = 1; k <= window; ++k) {
    const std::string* prev = neighbor(-k);
    const std::string* next = neighbor(k);
    feats.push_back("w-" + std::to_string(k) + "=" + (prev ? ascii_lower(*prev) : detail::kBos));
    feats.push_back("w+" + std::to_string(k) + "=" + (next ? ascii_lower(*next) : detail::kEos));
  }
  if (!neighbor(-1)) feats.push_back("first_in_sentence");
  if (!neighbor(1)) feats.push_back("last_in_sentence");
  return feats;
}

namespace detail {

// Token index ranges of each sentence, in order.
inline std::vector<std::pair<std::size_t, std::size_t>> sentence_ranges(
    const std::vector<Token>& tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= tokens.size(); ++i) {
    if (i == tokens.size() || tokens[i].sentence_index != tokens[begin].sentence_index) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  return out;
}

// I-X may follow only B-X or I-X.
inline bool transition_legal(const std::string& prev_label, const std::string& label) {
  if (label.size() < 2 || label[0] != 'I') return true;
  const std::string_view category(label.data() + 2, label.size() - 2);
  if (prev_label.size() < 2 || (prev_label[0] != 'B' && prev_label[0] != 'I')) return false;
  return std::string_view(prev_label.data() + 2, prev_label.size() - 2) == category;
}

// Gold-previous-label (teacher forced) token examples. The window comes
// from the model so fine-tuning keeps the feature space it was trained in.
inline std::vector<TrainExample> tagger_examples(const std::vector<AnnotatedDoc>& docs,
                                                 const LinearModel& model) {
  std::vector<TrainExample> examples;
  for (const auto& ad : docs) {
    const std::vector<Token> tokens = tokenize(ad.doc.text);
    const std::vector<BIOLabel> gold = encode_bio(tokens, ad.entities);
    for (const auto& [begin, end] : sentence_ranges(tokens)) {
      std::string prev = kBos;
      for (std::size_t t = begin; t < end; ++t) {
        TrainExample ex;
        ex.features = featurize_token(tokens, t, model.feature_window);
        ex.features.push_back("prev=" + prev);
        ex.label = model.label_index(gold[t].str());  // throws SchemaMismatch on foreign labels
        examples.push_back(std::move(ex));
        prev = gold[t].str();
      }
    }
  }
  return examples;
}

}  // namespace detail

struct TagPrediction {
  std::vector<BIOLabel> labels;
  // Softmax distribution per token over the model's label set, conditioned
  // on the decoded previous label. Each row sums to 1.
  std::vector<std::vector<double>> scores;
};

inline TagPrediction predict_tags(const TokenClassifierModel& model,
                                  const std::vector<Token>& tokens,
                                  DecodeAlgo algo = DecodeAlgo::Greedy) {
  if (!model.trained()) raise("UntrainedModel", "predict_tags requires a trained model");
  const LinearModel& lm = model.lm;
  TagPrediction out;
  out.labels.resize(tokens.size());
  out.scores.resize(tokens.size());

  for (const auto& [begin, end] : detail::sentence_ranges(tokens)) {
    // Static logits per token; the prev-label contribution is added per
    // candidate previous label.
    std::vector<std::vector<double>> base(end - begin);
    for (std::size_t t = begin; t < end; ++t)
      base[t - begin] = lm.logits(featurize_token(tokens, t, lm.feature_window));

    auto prev_weights = [&](const std::string& prev) -> const std::vector<double>* {
      const auto it = lm.weights.find("prev=" + prev);
      return it == lm.weights.end() ? nullptr : &it->second;
    };
    auto with_prev = [&](std::size_t pos, const std::string& prev) {
      std::vector<double> logits = base[pos - begin];
      if (const std::vector<double>* w = prev_weights(prev))
        for (std::size_t l = 0; l < logits.size(); ++l) logits[l] += (*w)[l];
      return logits;
    };

    if (algo == DecodeAlgo::Greedy) {
      std::string prev = detail::kBos;
      for (std::size_t t = begin; t < end; ++t) {
        const std::vector<double> probs = LinearModel::softmax(with_prev(t, prev));
        std::size_t best = 0;
        bool found = false;
        for (std::size_t l = 0; l < lm.labels.size(); ++l) {
          if (!detail::transition_legal(prev, lm.labels[l])) continue;
          if (!found || probs[l] > probs[best]) {
            best = l;
            found = true;
          }
        }
        out.labels[t] = BIOLabel::parse(lm.labels[best]);
        out.scores[t] = probs;
        prev = lm.labels[best];
      }
    } else {
      const std::size_t n = end - begin;
      const std::size_t L = lm.labels.size();
      constexpr double kNegInf = -1e300;
      std::vector<std::vector<double>> dp(n, std::vector<double>(L, kNegInf));
      std::vector<std::vector<std::size_t>> back(n, std::vector<std::size_t>(L, 0));

      {
        const std::vector<double> logits = with_prev(begin, detail::kBos);
        for (std::size_t l = 0; l < L; ++l)
          if (detail::transition_legal(detail::kBos, lm.labels[l])) dp[0][l] = logits[l];
      }
      for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t p = 0; p < L; ++p) {
          if (dp[i - 1][p] == kNegInf) continue;
          const std::vector<double> logits = with_prev(begin + i, lm.labels[p]);
          for (std::size_t l = 0; l < L; ++l) {
            if (!detail::transition_legal(lm.labels[p], lm.labels[l])) continue;
            const double score = dp[i - 1][p] + logits[l];
            if (score > dp[i][l]) {
              dp[i][l] = score;
              back[i][l] = p;
            }
          }
        }
      }
      std::size_t best = 0;
      for (std::size_t l = 1; l < L; ++l)
        if (dp[n - 1][l] > dp[n - 1][best]) best = l;
      std::vector<std::size_t> path(n);
      path[n - 1] = best;
      for (std::size_t i = n - 1; i > 0; --i) path[i - 1] = back[i][path[i]];
      for (std::size_t i = 0; i < n; ++i) {
        const std::string& prev = i == 0 ? detail::kBos : lm.labels[path[i - 1]];
        out.labels[begin + i] = BIOLabel::parse(lm.labels[path[i]]);
        out.scores[begin + i] = LinearModel::softmax(with_prev(begin + i, prev));
      }
    }
  }
  return out;
}

// Validation metric for early stopping: strict concept micro F1 on the
// validation documents.
inline double validation_f1(const LinearModel& candidate,
                            const std::vector<AnnotatedDoc>& val_docs) {
  TokenClassifierModel m{candidate};
  m.lm.trained = true;
  std::vector<AnnotatedDoc> pred;
  pred.reserve(val_docs.size());
  for (const auto& ad : val_docs) {
    AnnotatedDoc p;
    p.doc = ad.doc;
    const std::vector<Token> tokens = tokenize(ad.doc.text);
    p.entities = decode_bio(ad.doc.text, tokens, predict_tags(m, tokens).labels);
    pred.push_back(std::move(p));
  }
  return score_concepts(val_docs, pred, MatchMode::Strict).micro.f1();
}

inline TokenClassifierModel train_tagger(const std::vector<AnnotatedDoc>& train_docs,
                                         const std::vector<AnnotatedDoc>& val_docs,
                                         const TrainConfig& config, const SDoHSchema& schema) {
  if (train_docs.empty() || val_docs.empty())
    raise("EmptyTrainingSet", "training and validation sets must be non-empty");
  LinearModel base;
  base.labels = bio_label_set(schema);
  base.component = "ner";
  base.schema_version = schema.version;
  base.feature_window = config.feature_window;

  const std::vector<TrainExample> examples = detail::tagger_examples(train_docs, base);
  LinearModel lm = run_training(std::move(base), examples, config,
                                [&](const LinearModel& m) { return validation_f1(m, val_docs); });
  return TokenClassifierModel{std::move(lm)};
}

// Continues training from the model's current weights; max_epochs = 0
// returns the input unchanged.
inline TokenClassifierModel fine_tune_tagger(const TokenClassifierModel& model,
                                             const std::vector<AnnotatedDoc>& train_docs,
                                             const std::vector<AnnotatedDoc>& val_docs,
                                             const TrainConfig& config) {
  if (!model.trained()) raise("UntrainedModel", "fine_tune_tagger requires a trained model");
  if (config.max_epochs == 0) return model;
  if (train_docs.empty() || val_docs.empty())
    raise("EmptyTrainingSet", "training and validation sets must be non-empty");

  const std::vector<TrainExample> examples = detail::tagger_examples(train_docs, model.lm);
  LinearModel lm = run_training(model.lm, examples, config,
                                [&](const LinearModel& m) { return validation_f1(m, val_docs); });
  return TokenClassifierModel{std::move(lm)};
}

}  // namespace sdoh
