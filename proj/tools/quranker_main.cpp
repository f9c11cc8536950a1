// quranker: batch driver for the query-understanding ranking pipeline.
//
// Subcommands: gen, parse, intent, csu, featurize, train, eval, report.
// Exit codes: 0 success, 2 config error, 3 missing input, 4 training divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qu/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitDiverged = 4;

struct CliError {
  int code;
  std::string message;
};

struct RunConfig {
  qu::SyntheticConfig gen;
  qu::PipelineConfig pipe;
};

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{kExitConfig, "cannot open config file: " + path};
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CliError{kExitConfig, std::string("bad config json: ") + e.what()};
  }
  auto get = [&](const char* key, auto& slot) {
    if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
  };
  get("seed", cfg.gen.seed);
  get("queries", cfg.gen.n_queries);
  get("products", cfg.gen.n_products);
  get("sessions", cfg.gen.n_sessions);
  get("brands", cfg.gen.n_brands);
  get("colors", cfg.gen.n_colors);
  get("product_types", cfg.gen.n_product_types);
  get("titles", cfg.gen.n_titles);
  get("title_query_rate", cfg.gen.title_query_rate);
  get("noise_rate", cfg.gen.noise_rate);

  get("ner_epochs", cfg.pipe.ner_train.epochs);
  get("ner_learning_rate", cfg.pipe.ner_train.learning_rate);
  get("ner_l2", cfg.pipe.ner_train.l2);
  get("ner_feature_dim", cfg.pipe.ner_features.feature_dim);
  get("evidence_tau", cfg.pipe.ner_features.evidence_tau);
  get("lsh_hashes", cfg.pipe.lsh.num_hashes);
  get("lsh_bands", cfg.pipe.lsh.bands);
  get("shingle_n", cfg.pipe.lsh.shingle_n);
  get("intent_epochs", cfg.pipe.intent_train.epochs);
  get("csu_epochs", cfg.pipe.csu_train.epochs);
  get("theta", cfg.pipe.context_switch_theta);

  get("hidden", cfg.pipe.hidden);
  get("rank_learning_rate", cfg.pipe.rank_learning_rate);
  get("rank_steps", cfg.pipe.rank_steps);
  get("batch_size", cfg.pipe.batch_size);
  get("rank_seed", cfg.pipe.rank_seed);
  get("support_fraction", cfg.pipe.support_fraction);
  get("split_seed", cfg.pipe.split_seed);
  get("alpha", cfg.pipe.scheduler.alpha);
  get("every_n", cfg.pipe.scheduler.every_n);
  get("renormalize", cfg.pipe.scheduler.renormalize);
  get("k", cfg.pipe.eval_k);
  if (j.contains("scheduler")) {
    std::string s = j.at("scheduler").get<std::string>();
    if (s == "dynamic") {
      cfg.pipe.dynamic_scheduler = true;
    } else if (s == "static") {
      cfg.pipe.dynamic_scheduler = false;
    } else {
      throw CliError{kExitConfig, "scheduler must be static or dynamic"};
    }
  }
  get("use_qu_features", cfg.pipe.use_qu_features);
}

void write_file_or_die(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{kExitMissingInput, "cannot write " + path};
  out << content;
}

std::string read_file_or_die(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitMissingInput, "missing input: " + path};
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

qu::Dataset load_dataset_or_die(const std::string& dir) {
  try {
    return qu::load_dataset(dir);
  } catch (const qu::Error& e) {
    throw CliError{kExitMissingInput, std::string("cannot load dataset: ") + e.what()};
  }
}

qu::LshIndex build_index_for(const qu::Dataset& dataset, const qu::PipelineConfig& cfg) {
  return qu::LshIndex(qu::knowledge_entries(dataset.gazetteer), cfg.lsh);
}

int cmd_gen(const RunConfig& cfg, const std::string& out_dir) {
  qu::Dataset dataset;
  try {
    dataset = qu::generate_synthetic(cfg.gen);
  } catch (const qu::InvalidConfig& e) {
    throw CliError{kExitConfig, e.what()};
  }
  qu::write_dataset(dataset, out_dir);
  std::cerr << "wrote dataset to " << out_dir << " (" << dataset.queries.size() << " queries, "
            << dataset.products.size() << " products)\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
  qu::Dataset dataset = load_dataset_or_die(data_dir);
  qu::TrainedPipeline trained;
  try {
    trained = qu::run_training(dataset, cfg.pipe);
  } catch (const qu::TrainingDiverged& e) {
    throw CliError{kExitDiverged, e.what()};
  }
  fs::create_directories(out_dir);
  write_file_or_die(out_dir + "/ner.json", qu::crf_to_json(trained.ner));
  write_file_or_die(out_dir + "/intent.json", trained.intent.to_json());
  {
    json spaces = json::object();
    const auto& space = trained.intent.space();
    for (const auto& m : space.marketplaces()) {
      json labels = json::array();
      for (const auto& g : space.global_labels()) {
        if (g.rfind(m + "/", 0) == 0) labels.push_back(g.substr(m.size() + 1));
      }
      spaces[m] = labels;
    }
    write_file_or_die(out_dir + "/labelspace.json", spaces.dump(2) + "\n");
  }
  if (trained.question_classifier.trained()) {
    write_file_or_die(out_dir + "/csu.json", trained.question_classifier.to_json());
  }
  write_file_or_die(out_dir + "/ranker.json", trained.ranking.model.to_json());
  write_file_or_die(out_dir + "/weights.json", trained.ranking.weights.to_json());
  write_file_or_die(out_dir + "/weights.csv", trained.ranking.weight_log_csv);
  write_file_or_die(out_dir + "/segmenter.json", trained.segmenter.to_json());
  write_file_or_die(out_dir + "/metrics.json", trained.metrics.to_json());
  std::cerr << "trained models written to " << out_dir << "\n";
  return kExitOk;
}

struct LoadedModels {
  qu::CrfModel ner;
  std::optional<qu::IntentModel> intent;
  std::optional<qu::QuestionClassifier> csu;
  qu::RankModel ranker;
  qu::SegmenterConfig segmenter;
};

LoadedModels load_models(const std::string& model_dir) {
  LoadedModels m;
  m.ner = qu::crf_from_json(read_file_or_die(model_dir + "/ner.json"));
  m.ranker = qu::RankModel::from_json(read_file_or_die(model_dir + "/ranker.json"));
  m.segmenter = qu::SegmenterConfig::from_json(read_file_or_die(model_dir + "/segmenter.json"));
  if (fs::exists(model_dir + "/intent.json")) {
    m.intent = qu::IntentModel::from_json(read_file_or_die(model_dir + "/intent.json"));
  }
  if (fs::exists(model_dir + "/csu.json")) {
    m.csu = qu::QuestionClassifier::from_json(read_file_or_die(model_dir + "/csu.json"));
  }
  return m;
}

int cmd_eval(const RunConfig& cfg, const std::string& data_dir, const std::string& model_dir,
             const std::string& out_dir, bool with_segments) {
  qu::Dataset dataset = load_dataset_or_die(data_dir);
  LoadedModels models = load_models(model_dir);
  qu::LshIndex index = build_index_for(dataset, cfg.pipe);
  auto parses = qu::parse_all(dataset.queries, index, models.ner, cfg.pipe.ner_features);
  auto groups = qu::build_groups(dataset, parses, cfg.pipe.use_qu_features, models.segmenter);
  qu::MetricsReport metrics = qu::evaluate(models.ranker, groups, cfg.pipe.eval_k);
  fs::create_directories(out_dir);
  write_file_or_die(out_dir + "/metrics.json", metrics.to_json());
  if (with_segments) {
    qu::SegmentReport report = qu::segment_report(models.ranker, groups, cfg.pipe.eval_k);
    write_file_or_die(out_dir + "/segment_report.json", report.to_json());
    write_file_or_die(out_dir + "/segment_report.csv", report.to_csv());
  }
  std::cerr << "evaluation written to " << out_dir << "\n";
  return kExitOk;
}

int cmd_parse(const RunConfig& cfg, const std::string& data_dir, const std::string& model_path,
              const std::string& out_path) {
  qu::Dataset dataset = load_dataset_or_die(data_dir);
  qu::CrfModel ner = qu::crf_from_json(read_file_or_die(model_path));
  qu::LshIndex index = build_index_for(dataset, cfg.pipe);
  std::string out;
  for (const auto& q : dataset.queries) {
    qu::ParsedQuery parsed = qu::parse_query(q, index, ner, cfg.pipe.ner_features);
    json spans = json::array();
    for (const auto& s : parsed.spans) {
      spans.push_back(json{{"end", s.end},
                           {"start", s.start},
                           {"surface", s.surface},
                           {"type", std::string(qu::entity_type_name(s.type))}});
    }
    json attrs = json::object();
    for (int t = 0; t < qu::kNumEntityTypes; ++t) {
      const auto& attr = parsed.attributes[static_cast<size_t>(t)];
      if (attr) attrs[std::string(qu::entity_type_name(static_cast<qu::EntityType>(t)))] = *attr;
    }
    out += json{{"attributes", attrs}, {"query_id", q.id}, {"spans", spans}}.dump();
    out += '\n';
  }
  write_file_or_die(out_path, out);
  return kExitOk;
}

int cmd_intent(const RunConfig&, const std::string& data_dir, const std::string& model_path,
               const std::string& out_path, double threshold) {
  qu::Dataset dataset = load_dataset_or_die(data_dir);
  qu::IntentModel model = qu::IntentModel::from_json(read_file_or_die(model_path));
  std::string out;
  for (const auto& q : dataset.queries) {
    json preds = json::array();
    for (const auto& s : model.predict(q.text, q.marketplace, threshold)) {
      preds.push_back(json{{"label", s.label}, {"score", s.score}});
    }
    out += json{{"predictions", preds}, {"query_id", q.id}}.dump();
    out += '\n';
  }
  write_file_or_die(out_path, out);
  return kExitOk;
}

int cmd_csu(const RunConfig& cfg, const std::string& data_dir, const std::string& model_dir,
            const std::string& out_path) {
  qu::Dataset dataset = load_dataset_or_die(data_dir);
  LoadedModels models = load_models(model_dir);
  if (!models.csu) throw CliError{kExitMissingInput, "missing csu.json in " + model_dir};
  qu::LshIndex index = build_index_for(dataset, cfg.pipe);
  auto rows = qu::csu_signals(dataset.sessions, *models.csu, index, models.ner,
                              cfg.pipe.ner_features, cfg.pipe.context_switch_theta);
  write_file_or_die(out_path, qu::csu_signals_jsonl(rows));
  return kExitOk;
}

int cmd_featurize(const RunConfig& cfg, const std::string& data_dir,
                  const std::string& model_dir, const std::string& out_path) {
  qu::Dataset dataset = load_dataset_or_die(data_dir);
  LoadedModels models = load_models(model_dir);
  qu::LshIndex index = build_index_for(dataset, cfg.pipe);
  auto parses = qu::parse_all(dataset.queries, index, models.ner, cfg.pipe.ner_features);
  auto groups = qu::build_groups(dataset, parses, cfg.pipe.use_qu_features, std::nullopt);
  std::string out;
  for (const auto& g : groups) {
    for (const auto& c : g.candidates) {
      json vec = json::array();
      for (double v : c.features) vec.push_back(v);
      out += json{{"product_id", c.product_id}, {"query_id", g.query_id}, {"vector", vec}}.dump();
      out += '\n';
    }
  }
  write_file_or_die(out_path, out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query understanding and segment-aware multi-task ranking pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global options like --config may follow the subcommand

  RunConfig cfg;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  std::string gen_out = "data";
  gen->add_option("--out", gen_out, "output directory");
  auto* gen_seed = gen->add_option("--seed", cfg.gen.seed, "generator seed");
  auto* gen_queries = gen->add_option("--queries", cfg.gen.n_queries, "query count");
  auto* gen_products = gen->add_option("--products", cfg.gen.n_products, "product count");
  auto* gen_sessions = gen->add_option("--sessions", cfg.gen.n_sessions, "session count");

  // train
  auto* train = app.add_subcommand("train", "train ner, intent, csu and the ranker");
  std::string train_data = "data";
  std::string train_out = "models";
  std::string scheduler = "static";
  bool no_qu_features = false;
  train->add_option("--data", train_data, "dataset directory");
  train->add_option("--out", train_out, "model output directory");
  auto* train_sched = train->add_option("--scheduler", scheduler, "static | dynamic")
                          ->check(CLI::IsMember({"static", "dynamic"}));
  auto* train_alpha = train->add_option("--alpha", cfg.pipe.scheduler.alpha, "update magnitude");
  auto* train_every = train->add_option("--every-n", cfg.pipe.scheduler.every_n,
                                        "steps between weight updates");
  auto* train_steps = train->add_option("--steps", cfg.pipe.rank_steps, "training steps");
  auto* train_seed = train->add_option("--seed", cfg.pipe.rank_seed, "ranker init seed");
  auto* train_no_qu = train->add_flag("--no-qu-features", no_qu_features,
                                      "drop query-understanding features (ablation arm)");

  // eval / report
  auto* eval = app.add_subcommand("eval", "evaluate a trained model");
  std::string eval_data = "data", eval_models = "models", eval_out = "eval";
  bool eval_segments = false;
  eval->add_option("--data", eval_data, "dataset directory");
  eval->add_option("--models", eval_models, "model directory");
  eval->add_option("--out", eval_out, "report output directory");
  eval->add_flag("--segments", eval_segments, "also write the per-segment report");

  auto* report = app.add_subcommand("report", "write the per-segment evaluation report");
  report->add_option("--data", eval_data, "dataset directory");
  report->add_option("--models", eval_models, "model directory");
  report->add_option("--out", eval_out, "report output directory");

  // parse / intent / csu / featurize
  auto* parse = app.add_subcommand("parse", "tag queries with the trained ner model");
  std::string parse_model = "models/ner.json", parse_out = "parsed.jsonl";
  parse->add_option("--data", train_data, "dataset directory");
  parse->add_option("--model", parse_model, "ner model blob");
  parse->add_option("--out", parse_out, "output jsonl");

  auto* intent = app.add_subcommand("intent", "predict intent labels for queries");
  std::string intent_model = "models/intent.json", intent_out = "intents.jsonl";
  double intent_threshold = 0.5;
  intent->add_option("--data", train_data, "dataset directory");
  intent->add_option("--model", intent_model, "intent model blob");
  intent->add_option("--out", intent_out, "output jsonl");
  intent->add_option("--threshold", intent_threshold, "score threshold");

  auto* csu = app.add_subcommand("csu", "emit conversational signals per session turn");
  std::string csu_out = "csu_signals.jsonl";
  csu->add_option("--data", train_data, "dataset directory");
  csu->add_option("--models", eval_models, "model directory");
  csu->add_option("--out", csu_out, "output jsonl");

  auto* featurize = app.add_subcommand("featurize", "write ranking feature vectors");
  std::string feat_out = "features.jsonl";
  featurize->add_option("--data", train_data, "dataset directory");
  featurize->add_option("--models", eval_models, "model directory");
  featurize->add_option("--out", feat_out, "output jsonl");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      RunConfig from_file;
      apply_config_file(from_file, config_path);
      // flags given on the command line win over the config file
      if (!*gen_seed) cfg.gen.seed = from_file.gen.seed;
      if (!*gen_queries) cfg.gen.n_queries = from_file.gen.n_queries;
      if (!*gen_products) cfg.gen.n_products = from_file.gen.n_products;
      if (!*gen_sessions) cfg.gen.n_sessions = from_file.gen.n_sessions;
      bool keep_alpha = static_cast<bool>(*train_alpha);
      bool keep_every = static_cast<bool>(*train_every);
      bool keep_steps = static_cast<bool>(*train_steps);
      bool keep_seed = static_cast<bool>(*train_seed);
      double alpha = cfg.pipe.scheduler.alpha;
      int every = cfg.pipe.scheduler.every_n;
      int steps = cfg.pipe.rank_steps;
      uint64_t rank_seed = cfg.pipe.rank_seed;
      cfg.gen.n_brands = from_file.gen.n_brands;
      cfg.gen.n_colors = from_file.gen.n_colors;
      cfg.gen.n_product_types = from_file.gen.n_product_types;
      cfg.gen.n_titles = from_file.gen.n_titles;
      cfg.gen.title_query_rate = from_file.gen.title_query_rate;
      cfg.gen.noise_rate = from_file.gen.noise_rate;
      cfg.pipe = from_file.pipe;
      if (keep_alpha) cfg.pipe.scheduler.alpha = alpha;
      if (keep_every) cfg.pipe.scheduler.every_n = every;
      if (keep_steps) cfg.pipe.rank_steps = steps;
      if (keep_seed) cfg.pipe.rank_seed = rank_seed;
    }

    if (train->parsed()) {
      if (*train_sched) cfg.pipe.dynamic_scheduler = scheduler == "dynamic";
      if (*train_no_qu) cfg.pipe.use_qu_features = false;
    }

    if (gen->parsed()) return cmd_gen(cfg, gen_out);
    if (train->parsed()) return cmd_train(cfg, train_data, train_out);
    if (eval->parsed()) return cmd_eval(cfg, eval_data, eval_models, eval_out, eval_segments);
    if (report->parsed()) return cmd_eval(cfg, eval_data, eval_models, eval_out, true);
    if (parse->parsed()) return cmd_parse(cfg, train_data, parse_model, parse_out);
    if (intent->parsed()) return cmd_intent(cfg, train_data, intent_model, intent_out,
                                            intent_threshold);
    if (csu->parsed()) return cmd_csu(cfg, train_data, eval_models, csu_out);
    if (featurize->parsed()) return cmd_featurize(cfg, train_data, eval_models, feat_out);
    std::cerr << "no subcommand\n";
    return kExitConfig;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const qu::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qu::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
