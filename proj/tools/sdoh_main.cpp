// sdoh: command-line front end for the SDoH extraction toolkit.
//
// One subcommand per pipeline stage; a JSON config file (via --config or the
// SDOH_CONFIG environment variable) supplies defaults that explicit flags
// override. Exit codes: 0 success, 2 usage error, 3 data error, 4 model
// error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <sdoh/sdoh.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;

bool is_model_error(const std::string& kind) {
  return kind == "UntrainedModel" || kind == "ModelFormat" || kind == "SchemaVersionMismatch" ||
         kind == "SchemaMismatch";
}

void log_info(const std::string& message) { std::cerr << "info: " << message << "\n"; }

// --------------------------------------------------------------------------
// Config file: flat JSON object; flags override config, config overrides
// built-in defaults.

class Config {
 public:
  static Config load(int argc, char** argv) {
    Config c;
    std::string path;
    for (int i = 1; i + 1 < argc; ++i)
      if (std::string(argv[i]) == "--config") path = argv[i + 1];
    if (path.empty())
      if (const char* env = std::getenv("SDOH_CONFIG")) path = env;
    if (path.empty()) return c;
    try {
      c.values_ = json::parse(sdoh::read_file(path));
    } catch (const json::exception& e) {
      sdoh::raise("ConfigInvalid", "config file " + path + ": " + e.what());
    }
    if (!c.values_.is_object()) sdoh::raise("ConfigInvalid", "config must be a JSON object");
    c.path_ = path;
    return c;
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return it->get<T>();
    } catch (const json::exception&) {
      sdoh::raise("ConfigInvalid", "config key '" + key + "' has the wrong type");
    }
  }

  const std::string& path() const { return path_; }

 private:
  json values_ = json::object();
  std::string path_;
};

sdoh::SDoHSchema load_schema(const std::string& path) {
  if (path.empty()) return sdoh::SDoHSchema::default_schema();
  return sdoh::SDoHSchema::from_json(sdoh::read_file(path));
}

// --------------------------------------------------------------------------
// Split file: JSON written by `sdoh split`, consumed by the train commands.

json split_to_json(const sdoh::CorpusSplit& split) {
  json j;
  j["seed"] = split.seed;
  j["ratios"] = {{"train", split.ratios.train_frac},
                 {"test", split.ratios.test_frac},
                 {"validation_of_train", split.ratios.val_of_train_frac}};
  j["train"] = split.train;
  j["validation"] = split.validation;
  j["test"] = split.test;
  return j;
}

sdoh::CorpusSplit split_from_file(const std::string& path) {
  json j;
  try {
    j = json::parse(sdoh::read_file(path));
  } catch (const json::exception& e) {
    sdoh::raise("MalformedLine", "split file " + path + ": " + e.what());
  }
  sdoh::CorpusSplit split;
  try {
    split.train = j.at("train").get<std::vector<std::string>>();
    split.validation = j.at("validation").get<std::vector<std::string>>();
    split.test = j.at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    sdoh::raise("MalformedLine", "split file " + path + " is missing lists: " + e.what());
  }
  return split;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-")
    std::cout << content;
  else
    sdoh::write_file(out_path, content);
}

std::vector<std::string> corpus_doc_ids(const std::string& corpus_dir,
                                        const std::string& manifest_path) {
  std::vector<std::string> ids;
  if (!manifest_path.empty()) {
    for (const auto& [id, entry] : sdoh::parse_manifest(sdoh::read_file(manifest_path)))
      ids.push_back(id);
    return ids;
  }
  if (corpus_dir.empty()) sdoh::raise("ConfigInvalid", "need --manifest or --corpus");
  if (fs::exists(fs::path(corpus_dir) / "manifest.tsv")) {
    for (const auto& [id, entry] :
         sdoh::parse_manifest(sdoh::read_file(fs::path(corpus_dir) / "manifest.tsv")))
      ids.push_back(id);
    return ids;
  }
  if (!fs::is_directory(corpus_dir))
    sdoh::raise("FileNotFound", corpus_dir + " is not a directory");
  for (const auto& entry : fs::directory_iterator(corpus_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct ScoreOutput {
  std::string table;
  json machine = json::object();
};

ScoreOutput score_dirs(const std::vector<sdoh::AnnotatedDoc>& gold,
                       const std::vector<sdoh::AnnotatedDoc>& pred, const std::string& mode) {
  using sdoh::MatchMode;
  ScoreOutput out;
  const bool strict = mode == "strict" || mode == "both";
  const bool lenient = mode == "lenient" || mode == "both";

  std::optional<sdoh::EvalReport> cs, cl, rs, rl;
  if (strict) {
    const auto reports = sdoh::score_end_to_end(gold, pred, MatchMode::Strict);
    cs = reports.concepts;
    rs = reports.relations;
  }
  if (lenient) {
    const auto reports = sdoh::score_end_to_end(gold, pred, MatchMode::Lenient);
    cl = reports.concepts;
    rl = reports.relations;
  }
  out.table += sdoh::format_report_table("Concept extraction", cs ? &*cs : nullptr,
                                         cl ? &*cl : nullptr);
  out.table += "\n";
  out.table += sdoh::format_report_table("Relation classification", rs ? &*rs : nullptr,
                                         rl ? &*rl : nullptr);
  auto put = [&](const char* key, const std::optional<sdoh::EvalReport>& r) {
    if (r) out.machine[key] = sdoh::report_to_json(*r);
  };
  put("concept_strict", cs);
  put("concept_lenient", cl);
  put("relation_strict", rs);
  put("relation_lenient", rl);
  return out;
}

// --------------------------------------------------------------------------

int run(int argc, char** argv) {
  const Config config = Config::load(argc, argv);
  if (!config.path().empty()) log_info("using config " + config.path());

  CLI::App app{"Two-stage extraction of social determinants of health from clinical-style text"};
  app.require_subcommand(1);
  std::string config_path_flag;
  app.add_option("--config", config_path_flag,
                 "JSON config file with default flag values (env: SDOH_CONFIG)");

  // shared option values, seeded from the config file
  std::string schema_path = config.get<std::string>("schema", "");
  std::uint64_t seed = config.get<std::uint64_t>("seed", 1);
  int max_sentence_distance = config.get<int>("max_sentence_distance", 1);
  sdoh::TrainConfig train_config;
  train_config.max_epochs = config.get<int>("max_epochs", 30);
  train_config.patience = config.get<int>("patience", 5);
  train_config.learning_rate = config.get<double>("learning_rate", 0.1);
  train_config.feature_window = config.get<int>("window", 2);

  auto add_schema_flag = [&](CLI::App* cmd) {
    cmd->add_option("--schema", schema_path, "Schema JSON file (default: built-in schema)")
        ->capture_default_str();
  };
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--max-epochs", train_config.max_epochs, "Training epoch cap")
        ->capture_default_str();
    cmd->add_option("--patience", train_config.patience,
                    "Early stop after this many epochs without validation improvement")
        ->capture_default_str();
    cmd->add_option("--lr", train_config.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--window", train_config.feature_window, "Token feature context window")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  };

  // ---- ingest ----
  {
    auto* cmd = app.add_subcommand("ingest", "Load and validate a brat corpus, print statistics");
    auto corpus_dir = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    cmd->add_option("--corpus", *corpus_dir, "Directory of <doc_id>.txt/.ann pairs")->required();
    cmd->add_option("--out", *out_dir, "Re-write the normalized corpus here");
    add_schema_flag(cmd);
    cmd->callback([=, &schema_path]() {
      const auto schema = load_schema(schema_path);
      const auto docs = sdoh::load_corpus_dir(*corpus_dir, schema);
      std::size_t entities = 0, relations = 0;
      std::map<std::string, std::size_t> per_category;
      for (const auto& ad : docs) {
        entities += ad.entities.size();
        relations += ad.relations.size();
        for (const auto& e : ad.entities) ++per_category[e.category];
      }
      std::cout << "documents\t" << docs.size() << "\n";
      std::cout << "entities\t" << entities << "\n";
      std::cout << "relations\t" << relations << "\n";
      for (const auto& [category, count] : per_category)
        std::cout << category << "\t" << count << "\n";
      if (!out_dir->empty()) {
        sdoh::write_corpus_dir(*out_dir, docs);
        log_info("wrote normalized corpus to " + *out_dir);
      }
    });
  }

  // ---- validate ----
  {
    auto* cmd = app.add_subcommand("validate", "Report annotation invariant violations");
    auto corpus_dir = std::make_shared<std::string>();
    auto json_out = std::make_shared<std::string>();
    cmd->add_option("--corpus", *corpus_dir, "Directory of <doc_id>.txt/.ann pairs")->required();
    cmd->add_option("--json", *json_out, "Write the machine-readable report here");
    add_schema_flag(cmd);
    cmd->callback([=, &schema_path]() {
      const auto schema = load_schema(schema_path);
      sdoh::ValidationReport report;
      std::vector<sdoh::AnnotatedDoc> parsed;
      for (const auto& id : corpus_doc_ids(*corpus_dir, "")) {
        const fs::path txt = fs::path(*corpus_dir) / (id + ".txt");
        const fs::path ann = fs::path(*corpus_dir) / (id + ".ann");
        try {
          sdoh::AnnotatedDoc ad = sdoh::parse_standoff(
              sdoh::read_file(txt), fs::exists(ann) ? sdoh::read_file(ann) : "", schema, id);
          parsed.push_back(std::move(ad));
        } catch (const sdoh::Error& e) {
          report.violations.push_back({id, e.kind(), "parse", e.what()});
        }
      }
      const auto structural = sdoh::validate_corpus(parsed, schema);
      report.violations.insert(report.violations.end(), structural.violations.begin(),
                               structural.violations.end());
      report.warnings = structural.warnings;

      json j;
      j["violations"] = json::array();
      j["warnings"] = json::array();
      auto render = [&](const std::vector<sdoh::Violation>& rows, const char* label, json& sink) {
        for (const auto& v : rows) {
          std::cout << label << "\t" << v.doc_id << "\t" << v.rule << "\t" << v.location << "\t"
                    << v.message << "\n";
          sink.push_back({{"doc_id", v.doc_id},
                          {"rule", v.rule},
                          {"location", v.location},
                          {"message", v.message}});
        }
      };
      render(report.violations, "violation", j["violations"]);
      render(report.warnings, "warning", j["warnings"]);
      std::cout << "violations\t" << report.violations.size() << "\n";
      std::cout << "warnings\t" << report.warnings.size() << "\n";
      if (!json_out->empty()) sdoh::write_file(*json_out, j.dump(2) + "\n");
    });
  }

  // ---- split ----
  {
    auto* cmd =
        app.add_subcommand("split", "Deterministically split a corpus into train/val/test");
    auto manifest = std::make_shared<std::string>();
    auto corpus_dir = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto ratio = std::make_shared<double>(config.get<double>("train_frac", 0.8));
    auto val = std::make_shared<double>(config.get<double>("val_frac", 0.10));
    cmd->add_option("--manifest", *manifest, "Corpus manifest TSV");
    cmd->add_option("--corpus", *corpus_dir, "Corpus directory (alternative to --manifest)");
    cmd->add_option("--ratio", *ratio, "Training fraction; test gets the rest")
        ->capture_default_str();
    cmd->add_option("--val", *val, "Validation fraction of the training pool")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
    cmd->add_option("--out", *out_path, "Write the split JSON here (default: stdout)");
    cmd->callback([=, &seed]() {
      const auto ids = corpus_doc_ids(*corpus_dir, *manifest);
      const auto split = sdoh::split_corpus(ids, {*ratio, 1.0 - *ratio, *val}, seed);
      log_info("split sizes: train=" + std::to_string(split.train.size()) +
               " validation=" + std::to_string(split.validation.size()) +
               " test=" + std::to_string(split.test.size()));
      emit(*out_path, split_to_json(split).dump(2) + "\n");
    });
  }

  // ---- select ----
  {
    auto* cmd = app.add_subcommand("select", "Keyword-select notes with enough unique mentions");
    auto corpus_dir = std::make_shared<std::string>();
    auto lexicon_path = std::make_shared<std::string>(config.get<std::string>("lexicon", ""));
    auto min_unique = std::make_shared<int>(3);
    auto by_offsets = std::make_shared<bool>(false);
    auto out_path = std::make_shared<std::string>();
    cmd->add_option("--corpus", *corpus_dir, "Directory of <doc_id>.txt files")->required();
    cmd->add_option("--lexicon", *lexicon_path, "Keyword lexicon file, one phrase per line")
        ->required();
    cmd->add_option("--min-unique", *min_unique, "Minimum distinct keyword mentions")
        ->capture_default_str();
    cmd->add_flag("--by-offsets", *by_offsets,
                  "Count distinct match offsets instead of distinct phrases");
    cmd->add_option("--out", *out_path, "Write the selection TSV here (default: stdout)");
    cmd->callback([=]() {
      const auto lexicon = sdoh::KeywordLexicon::parse(sdoh::read_file(*lexicon_path));
      std::vector<std::pair<std::string, std::string>> notes;
      for (const auto& id : corpus_doc_ids(*corpus_dir, ""))
        notes.push_back({id, sdoh::read_file(fs::path(*corpus_dir) / (id + ".txt"))});
      const auto rows = sdoh::select_report(notes, lexicon, *min_unique,
                                            *by_offsets ? sdoh::UniquenessRule::DistinctOffsets
                                                        : sdoh::UniquenessRule::DistinctPhrases);
      std::string out = "# doc_id\tunique_phrases\ttotal_matches\tselected\n";
      std::size_t selected = 0;
      for (const auto& row : rows) {
        out += row.doc_id + "\t" + std::to_string(row.unique_phrases) + "\t" +
               std::to_string(row.total_matches) + "\t" + (row.selected ? "1" : "0") + "\n";
        selected += row.selected;
      }
      log_info("selected " + std::to_string(selected) + " of " + std::to_string(rows.size()) +
               " notes");
      emit(*out_path, out);
    });
  }

  // ---- synth ----
  {
    auto* cmd = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
    auto out_dir = std::make_shared<std::string>();
    auto n_docs = std::make_shared<std::size_t>(100);
    auto shift = std::make_shared<double>(0.0);
    auto domain = std::make_shared<std::string>("synthetic");
    cmd->add_option("--out", *out_dir, "Output corpus directory")->required();
    cmd->add_option("--n", *n_docs, "Number of documents")->capture_default_str();
    cmd->add_option("--seed", seed, "Generation seed")->capture_default_str();
    cmd->add_option("--shift", *shift, "Probability of drawing from the alternate lexicon [0,1]")
        ->capture_default_str();
    cmd->add_option("--domain", *domain, "Domain tag for the manifest")->capture_default_str();
    add_schema_flag(cmd);
    cmd->callback([=, &schema_path, &seed]() {
      const auto schema = load_schema(schema_path);
      const auto docs =
          sdoh::generate_corpus(schema, sdoh::default_templates(), *n_docs, seed, *shift, *domain);
      sdoh::write_corpus_dir(*out_dir, docs);
      log_info("wrote " + std::to_string(docs.size()) + " documents to " + *out_dir);
    });
  }

  // ---- train-ner ----
  {
    auto* cmd = app.add_subcommand("train-ner", "Train the BIO concept tagger");
    auto corpus_dir = std::make_shared<std::string>();
    auto split_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>(config.get<std::string>("ner_model", ""));
    cmd->add_option("--corpus", *corpus_dir, "Annotated corpus directory")->required();
    cmd->add_option("--split", *split_path, "Split JSON from `sdoh split`")->required();
    cmd->add_option("--out", *out_path, "Model file to write")->required();
    add_schema_flag(cmd);
    add_train_flags(cmd);
    cmd->callback([=, &schema_path, &seed, &train_config]() {
      const auto schema = load_schema(schema_path);
      const auto docs = sdoh::load_corpus_dir(*corpus_dir, schema);
      const auto split = split_from_file(*split_path);
      sdoh::TrainConfig cfg = train_config;
      cfg.seed = seed;
      const auto model = sdoh::train_tagger(sdoh::select_docs(docs, split.train),
                                            sdoh::select_docs(docs, split.validation), cfg, schema);
      model.save_file(*out_path);
      log_info("ner model: epochs=" + std::to_string(model.lm.epochs_run) +
               " best_val_f1=" + std::to_string(model.lm.best_val_f1) + " -> " + *out_path);
    });
  }

  // ---- train-re ----
  {
    auto* cmd = app.add_subcommand("train-re", "Train the attribute-linking relation classifier");
    auto corpus_dir = std::make_shared<std::string>();
    auto split_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>(config.get<std::string>("re_model", ""));
    cmd->add_option("--corpus", *corpus_dir, "Annotated corpus directory")->required();
    cmd->add_option("--split", *split_path, "Split JSON from `sdoh split`")->required();
    cmd->add_option("--out", *out_path, "Model file to write")->required();
    cmd->add_option("--max-sentence-distance", max_sentence_distance,
                    "Candidate window in sentences")
        ->capture_default_str();
    add_schema_flag(cmd);
    add_train_flags(cmd);
    cmd->callback([=, &schema_path, &seed, &train_config, &max_sentence_distance]() {
      const auto schema = load_schema(schema_path);
      const auto docs = sdoh::load_corpus_dir(*corpus_dir, schema);
      const auto split = split_from_file(*split_path);
      sdoh::TrainConfig cfg = train_config;
      cfg.seed = seed;
      const auto model = sdoh::train_linker(sdoh::select_docs(docs, split.train),
                                            sdoh::select_docs(docs, split.validation), cfg,
                                            schema, max_sentence_distance);
      for (const auto& w : model.train_warnings) std::cerr << "warning: " << w << "\n";
      model.save_file(*out_path);
      log_info("re model: epochs=" + std::to_string(model.lm.epochs_run) +
               " best_val_f1=" + std::to_string(model.lm.best_val_f1) + " -> " + *out_path);
    });
  }

  // ---- predict ----
  {
    auto* cmd = app.add_subcommand("predict", "Run the two-stage pipeline over documents");
    auto corpus_dir = std::make_shared<std::string>();
    auto ner_path = std::make_shared<std::string>(config.get<std::string>("ner_model", ""));
    auto re_path = std::make_shared<std::string>(config.get<std::string>("re_model", ""));
    auto out_dir = std::make_shared<std::string>();
    auto records_path = std::make_shared<std::string>();
    auto parallelism = std::make_shared<int>(config.get<int>("parallelism", 1));
    auto decoder = std::make_shared<std::string>("greedy");
    cmd->add_option("--corpus", *corpus_dir, "Directory of <doc_id>.txt files")->required();
    cmd->add_option("--ner", *ner_path, "Tagger model file")->required();
    cmd->add_option("--re", *re_path, "Linker model file")->required();
    cmd->add_option("--out", *out_dir, "Directory for predicted standoff files")->required();
    cmd->add_option("--records", *records_path, "Records TSV path (default: <out>/records.tsv)");
    cmd->add_option("--parallelism", *parallelism, "Worker threads")->capture_default_str();
    cmd->add_option("--decoder", *decoder, "Tag decoding: greedy | viterbi")
        ->check(CLI::IsMember({"greedy", "viterbi"}))
        ->capture_default_str();
    cmd->add_option("--max-sentence-distance", max_sentence_distance,
                    "Candidate window in sentences")
        ->capture_default_str();
    add_schema_flag(cmd);
    cmd->callback([=, &schema_path, &max_sentence_distance]() {
      const auto schema = load_schema(schema_path);
      const auto ner = sdoh::TokenClassifierModel::load_file(*ner_path);
      const auto re = sdoh::PairClassifierModel::load_file(*re_path);
      std::vector<sdoh::Document> documents;
      for (auto& ad : sdoh::load_corpus_dir(*corpus_dir, schema))
        documents.push_back(std::move(ad.doc));
      const auto batch = sdoh::run_batch(
          ner, re, documents, schema, *parallelism, max_sentence_distance,
          *decoder == "viterbi" ? sdoh::DecodeAlgo::Viterbi : sdoh::DecodeAlgo::Greedy);
      for (const auto& d : batch.diagnostics) std::cerr << "diagnostic: " << d << "\n";
      sdoh::write_corpus_dir(*out_dir, batch.predictions);
      const std::string records_file =
          records_path->empty() ? (fs::path(*out_dir) / "records.tsv").string() : *records_path;
      sdoh::write_file(records_file, sdoh::serialize_records(batch.records));
      log_info("processed " + std::to_string(batch.predictions.size()) + " documents in " +
               std::to_string(batch.elapsed_ms) + " ms; " + std::to_string(batch.records.size()) +
               " records -> " + records_file);
    });
  }

  // ---- score ----
  {
    auto* cmd = app.add_subcommand("score", "Strict/lenient evaluation against gold annotations");
    auto gold_dir = std::make_shared<std::string>();
    auto pred_dir = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>("both");
    auto json_out = std::make_shared<std::string>();
    cmd->add_option("--gold", *gold_dir, "Gold corpus directory")->required();
    cmd->add_option("--pred", *pred_dir, "Predicted corpus directory")->required();
    cmd->add_option("--mode", *mode, "strict | lenient | both")
        ->check(CLI::IsMember({"strict", "lenient", "both"}))
        ->capture_default_str();
    cmd->add_option("--json", *json_out, "Write the machine-readable report here");
    add_schema_flag(cmd);
    cmd->callback([=, &schema_path]() {
      const auto schema = load_schema(schema_path);
      const auto gold = sdoh::load_corpus_dir(*gold_dir, schema);
      const auto pred = sdoh::load_corpus_dir(*pred_dir, schema);
      const auto out = score_dirs(gold, pred, *mode);
      std::cout << out.table;
      if (!json_out->empty()) sdoh::write_file(*json_out, out.machine.dump(2) + "\n");
    });
  }

  // ---- adapt ----
  {
    auto* cmd = app.add_subcommand(
        "adapt", "Compare direct / fine-tune / merge-retrain transfer onto a target domain");
    auto source_dir = std::make_shared<std::string>();
    auto source_split = std::make_shared<std::string>();
    auto target_dir = std::make_shared<std::string>();
    auto target_split = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto json_out = std::make_shared<std::string>();
    cmd->add_option("--source", *source_dir, "Source-domain corpus directory")->required();
    cmd->add_option("--source-split", *source_split, "Split JSON for the source corpus")
        ->required();
    cmd->add_option("--target", *target_dir, "Target-domain corpus directory")->required();
    cmd->add_option("--target-split", *target_split, "Split JSON for the target corpus")
        ->required();
    cmd->add_option("--out-dir", *out_dir, "Write adapted models under this directory");
    cmd->add_option("--json", *json_out, "Write the machine-readable comparison here");
    cmd->add_option("--max-sentence-distance", max_sentence_distance,
                    "Candidate window in sentences")
        ->capture_default_str();
    add_schema_flag(cmd);
    add_train_flags(cmd);
    cmd->callback([=, &schema_path, &seed, &train_config, &max_sentence_distance]() {
      const auto schema = load_schema(schema_path);
      const auto source = sdoh::load_corpus_dir(*source_dir, schema);
      const auto target = sdoh::load_corpus_dir(*target_dir, schema);
      const auto s_split = split_from_file(*source_split);
      const auto t_split = split_from_file(*target_split);
      sdoh::TrainConfig cfg = train_config;
      cfg.seed = seed;

      const auto source_train = sdoh::select_docs(source, s_split.train);
      const auto source_val = sdoh::select_docs(source, s_split.validation);
      const auto target_train = sdoh::select_docs(target, t_split.train);
      const auto target_val = sdoh::select_docs(target, t_split.validation);
      const auto target_test = sdoh::select_docs(target, t_split.test);

      log_info("training source models on " + std::to_string(source_train.size()) + " documents");
      const auto source_ner = sdoh::train_tagger(source_train, source_val, cfg, schema);
      const auto source_re =
          sdoh::train_linker(source_train, source_val, cfg, schema, max_sentence_distance);

      json machine = json::object();
      char buf[200];
      std::string table;
      std::snprintf(buf, sizeof buf, "%-16s %-23s   %-23s\n", "", "Strict", "Lenient");
      table += buf;
      std::snprintf(buf, sizeof buf, "%-16s %7s %7s %7s   %7s %7s %7s\n", "Strategy", "Prec.",
                    "Rec.", "F(b=1)", "Prec.", "Rec.", "F(b=1)");
      table += buf;

      for (const auto strategy : {sdoh::AdaptStrategy::Direct, sdoh::AdaptStrategy::FineTune,
                                  sdoh::AdaptStrategy::MergeRetrain}) {
        log_info(std::string("running strategy: ") + sdoh::to_string(strategy));
        const auto adapted =
            sdoh::adapt(source_ner, source_re, strategy, source_train, target_train, target_val,
                        cfg, schema, max_sentence_distance);
        std::vector<sdoh::Document> documents;
        for (const auto& ad : target_test) documents.push_back(ad.doc);
        const auto batch =
            sdoh::run_batch(adapted.ner, adapted.re, documents, schema, 1, max_sentence_distance);
        const auto strict =
            sdoh::score_concepts(target_test, batch.predictions, sdoh::MatchMode::Strict);
        const auto lenient =
            sdoh::score_concepts(target_test, batch.predictions, sdoh::MatchMode::Lenient);
        std::snprintf(buf, sizeof buf, "%-16s %7.4f %7.4f %7.4f   %7.4f %7.4f %7.4f\n",
                      sdoh::to_string(strategy), strict.micro.precision(), strict.micro.recall(),
                      strict.micro.f1(), lenient.micro.precision(), lenient.micro.recall(),
                      lenient.micro.f1());
        table += buf;
        machine[sdoh::to_string(strategy)] = {{"concept_strict", sdoh::report_to_json(strict)},
                                              {"concept_lenient", sdoh::report_to_json(lenient)}};
        if (!out_dir->empty()) {
          const fs::path base = fs::path(*out_dir) / sdoh::to_string(strategy);
          adapted.ner.save_file(base.string() + ".ner.model");
          adapted.re.save_file(base.string() + ".re.model");
        }
      }
      std::cout << table;
      if (!json_out->empty()) sdoh::write_file(*json_out, machine.dump(2) + "\n");
    });
  }

  // ---- aggregate ----
  {
    auto* cmd = app.add_subcommand("aggregate", "Patient-level extraction rates from records");
    auto records_path = std::make_shared<std::string>();
    auto manifest_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    cmd->add_option("--records", *records_path, "Records TSV from `sdoh predict`")->required();
    cmd->add_option("--manifest", *manifest_path, "Manifest TSV defining the patient roster")
        ->required();
    cmd->add_option("--out", *out_path, "Write the rate table here (default: stdout)");
    add_schema_flag(cmd);
    cmd->callback([=, &schema_path]() {
      const auto schema = load_schema(schema_path);
      const auto records = sdoh::parse_records(sdoh::read_file(*records_path));
      std::set<std::string> roster;
      for (const auto& [id, entry] : sdoh::parse_manifest(sdoh::read_file(*manifest_path)))
        roster.insert(entry.patient_id);
      const auto table = sdoh::aggregate_rates(records, roster, schema);
      emit(*out_path, sdoh::format_rate_table(table));
    });
  }

  // ---- kappa ----
  {
    auto* cmd = app.add_subcommand(
        "kappa", "Token-level Cohen's kappa between two annotation rounds of the same texts");
    auto dir_a = std::make_shared<std::string>();
    auto dir_b = std::make_shared<std::string>();
    cmd->add_option("--a", *dir_a, "First annotator's corpus directory")->required();
    cmd->add_option("--b", *dir_b, "Second annotator's corpus directory")->required();
    add_schema_flag(cmd);
    cmd->callback([=, &schema_path]() {
      const auto schema = load_schema(schema_path);
      const auto a = sdoh::load_corpus_dir(*dir_a, schema);
      const auto b = sdoh::load_corpus_dir(*dir_b, schema);
      std::map<std::string, const sdoh::AnnotatedDoc*> b_by_id;
      for (const auto& ad : b) b_by_id[ad.doc.doc_id] = &ad;
      std::vector<std::string> labels_a, labels_b;
      for (const auto& ad : a) {
        const auto other = b_by_id.find(ad.doc.doc_id);
        if (other == b_by_id.end())
          sdoh::raise("DocIdMismatch", "doc " + ad.doc.doc_id + " missing from --b");
        if (other->second->doc.text != ad.doc.text)
          sdoh::raise("DocIdMismatch", "doc " + ad.doc.doc_id + " has different texts");
        const auto tokens = sdoh::tokenize(ad.doc.text);
        for (const auto& l : sdoh::encode_bio(tokens, ad.entities)) labels_a.push_back(l.str());
        for (const auto& l : sdoh::encode_bio(tokens, other->second->entities))
          labels_b.push_back(l.str());
      }
      const auto report = sdoh::compute_kappa(labels_a, labels_b);
      char buf[160];
      std::snprintf(buf, sizeof buf, "kappa\t%.4f\np_o\t%.4f\np_e\t%.4f\nunits\t%zu\n",
                    report.kappa, report.p_o, report.p_e, report.unit_count);
      std::cout << buf;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sdoh::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_model_error(e.kind()) ? kExitModel : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
