#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdoh/error.hpp"
#include "sdoh/rng.hpp"

// Sparse multinomial logistic model over string-named binary features,
// shared by the token tagger and the pair classifier. Training is online
// cross-entropy SGD with weight averaging; everything is deterministic
// given (data order, config, seed).

namespace sdoh {

struct TrainConfig {
  int max_epochs = 30;
  int patience = 5;        // stop after this many epochs without val improvement
  std::uint64_t seed = 1;
  double learning_rate = 0.1;
  int feature_window = 2;  // token context window for the tagger
};

struct LinearModel {
  std::vector<std::string> labels;  // fixed order; index 0 is the null label (O / NONE)
  std::unordered_map<std::string, std::vector<double>> weights;
  std::string component;       // "ner" or "re"
  std::string schema_version;
  int feature_window = 2;      // token context width used when featurizing
  int epochs_run = 0;
  double best_val_f1 = 0.0;
  std::uint64_t seed = 0;
  bool trained = false;

  std::size_t label_index(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) return i;
    raise("SchemaMismatch", "label '" + label + "' not in model label set");
  }

  // Sum of weight vectors for the present features (binary features).
  std::vector<double> logits(const std::vector<std::string>& features) const {
    std::vector<double> out(labels.size(), 0.0);
    for (const auto& f : features) {
      const auto it = weights.find(f);
      if (it == weights.end()) continue;
      for (std::size_t l = 0; l < out.size(); ++l) out[l] += it->second[l];
    }
    return out;
  }

  static std::vector<double> softmax(std::vector<double> logits) {
    double mx = logits.empty() ? 0.0 : logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : logits) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : logits) v /= z;
    return logits;
  }

  // Largest score wins; exact ties go to the lowest label index.
  static std::size_t argmax(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = i;
    return best;
  }

  std::string version_string() const {
    return component + "/" + schema_version + "/seed=" + std::to_string(seed);
  }

  void save(std::ostream& out) const;
  static LinearModel load(std::istream& in);
  void save_file(const std::filesystem::path& path) const;
  static LinearModel load_file(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Model file format (text, LF newlines):
//
//   #sdoh-model v1 <component>
//   schema<TAB><schema version>
//   labels<TAB><label>...
//   meta<TAB>epochs=<n><TAB>best_val_f1=<g17><TAB>seed=<n>
//   <feature><TAB><label><TAB><g17 weight>        (non-zero entries, sorted)

namespace detail {

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      parts.push_back(line.substr(pos));
      return parts;
    }
    parts.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

}  // namespace detail

inline void LinearModel::save(std::ostream& out) const {
  out << "#sdoh-model v1 " << component << "\n";
  out << "schema\t" << schema_version << "\n";
  out << "labels";
  for (const auto& l : labels) out << "\t" << l;
  out << "\n";
  out << "meta\tepochs=" << epochs_run << "\tbest_val_f1=" << detail::g17(best_val_f1)
      << "\tseed=" << seed << "\twindow=" << feature_window << "\n";

  std::vector<const std::string*> names;
  names.reserve(weights.size());
  for (const auto& [name, w] : weights) names.push_back(&name);
  std::sort(names.begin(), names.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  for (const std::string* name : names) {
    const std::vector<double>& w = weights.at(*name);
    for (std::size_t l = 0; l < w.size(); ++l)
      if (w[l] != 0.0) out << *name << "\t" << labels[l] << "\t" << detail::g17(w[l]) << "\n";
  }
}

inline LinearModel LinearModel::load(std::istream& in) {
  LinearModel m;
  std::string line;
  if (!std::getline(in, line) || line.rfind("#sdoh-model v1 ", 0) != 0)
    raise("ModelFormat", "missing '#sdoh-model v1' header");
  m.component = line.substr(15);

  if (!std::getline(in, line)) raise("ModelFormat", "truncated model file");
  auto parts = detail::split_tabs(line);
  if (parts.size() != 2 || parts[0] != "schema") raise("ModelFormat", "expected schema line");
  m.schema_version = parts[1];

  if (!std::getline(in, line)) raise("ModelFormat", "truncated model file");
  parts = detail::split_tabs(line);
  if (parts.size() < 2 || parts[0] != "labels") raise("ModelFormat", "expected labels line");
  m.labels.assign(parts.begin() + 1, parts.end());

  if (!std::getline(in, line)) raise("ModelFormat", "truncated model file");
  parts = detail::split_tabs(line);
  if (parts.size() != 5 || parts[0] != "meta") raise("ModelFormat", "expected meta line");
  m.epochs_run = std::atoi(parts[1].c_str() + 7);
  m.best_val_f1 = std::strtod(parts[2].c_str() + 12, nullptr);
  m.seed = std::strtoull(parts[3].c_str() + 5, nullptr, 10);
  m.feature_window = std::atoi(parts[4].c_str() + 7);

  std::unordered_map<std::string, std::size_t> label_idx;
  for (std::size_t i = 0; i < m.labels.size(); ++i) label_idx[m.labels[i]] = i;
  std::size_t line_no = 4;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    parts = detail::split_tabs(line);
    if (parts.size() != 3)
      raise("ModelFormat", "line " + std::to_string(line_no) + ": expected 3 tab fields");
    const auto li = label_idx.find(parts[1]);
    if (li == label_idx.end())
      raise("ModelFormat", "line " + std::to_string(line_no) + ": unknown label " + parts[1]);
    auto& w = m.weights[parts[0]];
    if (w.empty()) w.assign(m.labels.size(), 0.0);
    w[li->second] = std::strtod(parts[2].c_str(), nullptr);
  }
  m.trained = true;
  return m;
}

inline void LinearModel::save_file(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise("FileWriteFailed", "cannot write " + path.string());
  save(out);
}

inline LinearModel LinearModel::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise("FileNotFound", "cannot open model file " + path.string());
  return load(in);
}

// ---------------------------------------------------------------------------
// Training

struct TrainExample {
  std::vector<std::string> features;
  std::size_t label = 0;
};

// Online cross-entropy SGD with lazily maintained weight averages: the
// returned candidate after each epoch is the running average of all weight
// states, which is what gets validated and kept.
class SgdTrainer {
 public:
  SgdTrainer(LinearModel base, double learning_rate)
      : model_(std::move(base)), lr_(learning_rate) {}

  void update(const TrainExample& ex) {
    ++t_;
    const std::vector<double> probs = LinearModel::softmax(current_logits(ex.features));
    for (const auto& f : ex.features) {
      Entry& e = touch(f);
      catch_up(e);
      for (std::size_t l = 0; l < probs.size(); ++l) {
        const double grad = probs[l] - (l == ex.label ? 1.0 : 0.0);
        e.w[l] -= lr_ * grad;
      }
    }
  }

  // Logits under the live training weights (entries override the base).
  std::vector<double> current_logits(const std::vector<std::string>& features) const {
    std::vector<double> out(model_.labels.size(), 0.0);
    for (const auto& f : features) {
      const std::vector<double>* w = nullptr;
      const auto it = entries_.find(f);
      if (it != entries_.end()) {
        w = &it->second.w;
      } else {
        const auto base = model_.weights.find(f);
        if (base != model_.weights.end()) w = &base->second;
      }
      if (w)
        for (std::size_t l = 0; l < out.size(); ++l) out[l] += (*w)[l];
    }
    return out;
  }

  // Materializes the averaged model at the current step. Features never
  // touched keep their starting weights: they are constant over the whole
  // trajectory, so their average equals the base value.
  LinearModel averaged() const {
    LinearModel out = model_;
    const double steps = static_cast<double>(std::max<std::uint64_t>(t_, 1));
    for (const auto& [name, e] : entries_) {
      std::vector<double> avg(e.w.size());
      for (std::size_t l = 0; l < e.w.size(); ++l) {
        const double total = e.acc[l] + e.w[l] * static_cast<double>(t_ - e.last_t);
        avg[l] = total / steps;
      }
      out.weights[name] = std::move(avg);
    }
    return out;
  }

 private:
  struct Entry {
    std::vector<double> w;    // current weights
    std::vector<double> acc;  // sum of w over steps [0, last_t)
    std::uint64_t last_t = 0;
  };

  Entry& touch(const std::string& feature) {
    auto [it, inserted] = entries_.try_emplace(feature);
    if (inserted) {
      it->second.w.assign(model_.labels.size(), 0.0);
      it->second.acc.assign(model_.labels.size(), 0.0);
      const auto seed = model_.weights.find(feature);
      if (seed != model_.weights.end()) it->second.w = seed->second;
    }
    return it->second;
  }

  void catch_up(Entry& e) {
    const std::uint64_t dt = t_ - 1 - e.last_t;  // steps spent at the current value
    if (dt > 0)
      for (std::size_t l = 0; l < e.w.size(); ++l) e.acc[l] += e.w[l] * static_cast<double>(dt);
    e.last_t = t_ - 1;
  }

  LinearModel model_;  // holds starting weights for features never touched
  std::unordered_map<std::string, Entry> entries_;
  double lr_ = 0.1;
  std::uint64_t t_ = 0;
};

// Shared epoch loop: shuffle examples, run updates, validate the averaged
// snapshot, early-stop on `patience` epochs without improvement, return the
// best snapshot.
template <typename ValidateFn>
inline LinearModel run_training(LinearModel base, const std::vector<TrainExample>& examples,
                                const TrainConfig& config, ValidateFn&& validate) {
  if (examples.empty()) raise("EmptyTrainingSet", "no training examples");
  if (config.max_epochs < 1) raise("InvalidConfig", "max_epochs must be >= 1");
  if (config.patience < 1) raise("InvalidConfig", "patience must be >= 1");
  if (!(config.learning_rate > 0)) raise("InvalidConfig", "learning_rate must be positive");

  SgdTrainer trainer(base, config.learning_rate);
  Rng rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  LinearModel best = base;
  double best_f1 = -1.0;
  int best_epoch = 0;
  int since_best = 0;
  int epoch = 0;
  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) trainer.update(examples[i]);
    LinearModel candidate = trainer.averaged();
    candidate.trained = true;
    const double f1 = validate(candidate);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = std::move(candidate);
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  best.epochs_run = std::min(epoch, config.max_epochs);
  best.best_val_f1 = best_f1;
  best.seed = config.seed;
  best.trained = true;
  (void)best_epoch;
  return best;
}

}  // namespace sdoh
