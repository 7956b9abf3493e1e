#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "tader/error.hpp"
#include "tader/experiment.hpp"
#include "tader/ranker.hpp"

namespace fs = std::filesystem;
using namespace tader;

namespace {

// Enum-valued flags are kept as strings until the run starts so that a bad
// value surfaces as a ValidationError (exit 1) with our own message.
struct Flags {
  RunConfig config;
  std::string scorer = "baseline";
  std::string encoder = "cnn";
  std::string activation = "relu";
  std::string negatives = "all";
  bool no_stem_vocab = false;
  fs::path manifest;
  std::string key;
  std::size_t top = 5;
  std::size_t max_units = 1000;
  double holdout = 0.2;

  RunConfig resolve() const {
    RunConfig c = config;
    c.scorer = parse_scorer_kind(scorer);
    c.siamese.encoder = parse_encoder_kind(encoder);
    c.siamese.activation = parse_activation(activation);
    if (negatives == "all") {
      c.negatives = NegativePool::all_unlinked;
    } else if (negatives == "lonely") {
      c.negatives = NegativePool::lonely;
    } else {
      throw ValidationError(fmt::format("unknown negative pool '{}' (expected all or lonely)", negatives));
    }
    c.stem_vocab = !no_stem_vocab;
    return c;
  }
};

void add_run_options(CLI::App* app, Flags& f) {
  app->set_config("--config", "", "TOML file with option defaults; flags override it");
  app->add_option("--data", f.config.data, "Issue export, JSON lines");
  app->add_option("--dataset", f.config.dataset, "Dataset label for reports (default: data file stem)");
  app->add_option("--split-day", f.config.split_day, "Days since the first issue; earlier issues train");
  app->add_option("--out", f.config.out, "Output directory")->capture_default_str();
  auto& c = f.config;
  app->add_option("--features", c.features, "Feature sets such as T, TDS, TDC2CU, or all")->delimiter(',');
  app->add_option("--scorer", f.scorer, "baseline or siamese")->capture_default_str();
  app->add_option("--metric", c.metrics, "cosine, euclidean, manhattan, chebyshev, or all")->delimiter(',');
  app->add_flag("--per-field", c.per_field, "Baseline: one TF-IDF model per text field");
  app->add_option("--filter", c.filters, "Time filters: none, 1m, 2m, 3m, <n>d, or all")->delimiter(',');
  app->add_option("--k", c.ks, "Cut-offs for the metrics")->delimiter(',');
  app->add_option("--embeddings", c.embeddings, "Word-vector text file");
  app->add_option("--dim", c.dim, "Embedding dimension")->capture_default_str();
  app->add_flag("--no-stem-vocab", f.no_stem_vocab, "Look up embedding tokens without stemming them");
  app->add_option("--model", c.model, "Siamese checkpoint to use instead of training");
  app->add_option("--encoder", f.encoder, "cnn, gru or lstm")->capture_default_str();
  app->add_option("--units", c.siamese.units, "Encoder units")->capture_default_str();
  app->add_option("--dense-units", c.siamese.dense_units, "Dense layer units")->capture_default_str();
  app->add_option("--kernel", c.siamese.kernel_size, "Convolution kernel size")->capture_default_str();
  app->add_option("--stride", c.siamese.stride, "Convolution stride")->capture_default_str();
  app->add_option("--activation", f.activation, "Dense activation: relu, leaky_relu, sigmoid")->capture_default_str();
  app->add_option("--max-len", c.siamese.max_len, "Tokens kept per issue")->capture_default_str();
  app->add_option("--lr", c.siamese.learning_rate, "Learning rate")->capture_default_str();
  app->add_option("--epochs", c.siamese.epochs, "Training epochs")->capture_default_str();
  app->add_option("--batch", c.siamese.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--neg-ratio", c.neg_ratio, "Negative pairs per positive pair")->capture_default_str();
  app->add_option("--negatives", f.negatives, "Negative pool: all or lonely")->capture_default_str();
  app->add_option("--seed", c.seed, "Seed for sampling, initialization and shuffling")->capture_default_str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
}

using Outputs = std::vector<std::pair<std::string, fs::path>>;

void write_manifest(const std::string& command, const RunConfig& config, const Outputs& outputs,
                    std::span<const std::string> failures = {}) {
  write_file(config.out / "manifest.json", make_manifest(command, config, outputs, failures));
}

FeatureSet single_feature_set(const RunConfig& c) {
  const auto sets = c.feature_sets();
  if (sets.size() != 1) throw ValidationError("this command takes exactly one feature set");
  return sets.front();
}

int cmd_ingest(const std::string& command, const RunConfig& c) {
  if (c.data.empty()) throw ValidationError("--data is required");
  const IssueSet set = load_issues(c.data);
  fs::create_directories(c.out);
  const fs::path issues = c.out / "issues.jsonl";
  write_issues(set, issues);
  nlohmann::ordered_json stats;
  stats["issues"] = set.size();
  stats["links"] = set.link_count();
  stats["dangling_links"] = set.dangling_links();
  std::size_t lonely = 0;
  for (const Issue& i : set.issues()) lonely += i.links.empty() ? 1 : 0;
  stats["lonely"] = lonely;
  if (!set.empty()) {
    stats["days"] = day_index(set.day_zero(), set.issues().back().created) + 1;
  }
  write_file(c.out / "stats.json", stats.dump(2) + "\n");
  std::cout << stats.dump(2) << "\n";
  write_manifest(command, c, {{"issues", issues}, {"stats", c.out / "stats.json"}});
  return 0;
}

int cmd_split(const std::string& command, const RunConfig& c) {
  if (c.data.empty()) throw ValidationError("--data is required");
  if (c.split_day < 0) throw ValidationError("--split-day must be given and non-negative");
  const IssueSet set = load_issues(c.data);
  const Split split = chronological_split(set, c.split_day);
  fs::create_directories(c.out);
  write_issues(split.train, c.out / "train.jsonl");
  write_issues(split.test, c.out / "test.jsonl");
  nlohmann::ordered_json j;
  j["split_day"] = c.split_day;
  j["train"] = split.train.size();
  j["test"] = split.test.size();
  j["train_links"] = split.train.link_count();
  j["test_links"] = split.test.link_count();
  std::cout << j.dump(2) << "\n";
  write_manifest(command, c, {{"train", c.out / "train.jsonl"}, {"test", c.out / "test.jsonl"}});
  return 0;
}

int cmd_train(const std::string& command, RunConfig c) {
  c.scorer = ScorerKind::siamese;
  c.validate();
  const FeatureSet features = single_feature_set(c);
  const Dataset data = load_dataset(c);
  const EmbeddingTable table = load_embeddings_for(c, data.corpus);
  for (const auto& w : table.warnings()) std::cerr << "warning: " << w << "\n";
  const TrainResult result = train_siamese(c, data, table, features, &std::cerr);
  fs::create_directories(c.out);
  const fs::path model = c.out / "model.json";
  save_checkpoint(result.model, model, {{"dataset", c.dataset_name()}, {"tool_version", std::string(version())}});
  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) loss += fmt::format("{},{:.9g}\n", e + 1, result.epoch_loss[e]);
  write_file(c.out / "loss.csv", loss);
  write_manifest(command, c, {{"model", model}, {"loss", c.out / "loss.csv"}});
  return 0;
}

int cmd_recommend(const std::string& command, const RunConfig& c, const std::string& key, std::size_t top) {
  c.validate();
  if (key.empty()) throw ValidationError("--key is required");
  const FeatureSet features = single_feature_set(c);
  const auto filters = c.filter_list();
  if (filters.size() != 1) throw ValidationError("recommend takes exactly one filter");
  const Dataset data = load_dataset(c);
  const Issue* query = data.corpus.find(key);
  if (query == nullptr) throw ValidationError(fmt::format("no issue with key {}", key));

  std::vector<Recommendation> recs;
  if (c.scorer == ScorerKind::baseline) {
    const auto metrics = c.metric_list();
    if (metrics.size() != 1) throw ValidationError("recommend takes exactly one metric");
    BaselineScorer scorer(data.split.train, features, metrics.front(), BaselineOptions{c.per_field});
    recs = recommend(*query, data.corpus, scorer, filters.front(), top);
  } else {
    if (c.model.empty()) throw ValidationError("siamese recommend needs --model (see the train command)");
    const SiameseModel model = load_checkpoint(c.model);
    const EmbeddingTable table = load_embeddings_for(c, data.corpus);
    SiameseScorer scorer(model, table);
    recs = recommend(*query, data.corpus, scorer, filters.front(), top);
  }
  const std::string out = to_json(recs);
  fs::create_directories(c.out);
  write_file(c.out / "recommendations.json", out + "\n");
  std::cout << out << "\n";
  write_manifest(command, c, {{"recommendations", c.out / "recommendations.json"}});
  return 0;
}

int write_grid(const std::string& command, const RunConfig& c, const std::string& stem) {
  const GridOutcome outcome = run_grid(c, &std::cerr);
  fs::create_directories(c.out);
  const fs::path csv = c.out / (stem + ".csv");
  write_file(csv, outcome.csv);
  Outputs outputs{{stem, csv}};
  if (stem == "evaluate") {
    std::string reports = "[";
    for (std::size_t i = 0; i < outcome.reports.size(); ++i) reports += (i ? ",\n" : "\n") + outcome.reports[i].to_json();
    reports += "\n]\n";
    write_file(c.out / "evaluate.json", reports);
    outputs.emplace_back("reports", c.out / "evaluate.json");
  }
  write_manifest(command, c, outputs, outcome.failures);
  for (const auto& f : outcome.failures) std::cerr << "failed: " << f << "\n";
  std::cout << outcome.csv;
  return outcome.failures.empty() ? 0 : 2;
}

int cmd_evaluate(const std::string& command, const RunConfig& c) {
  c.validate();
  single_feature_set(c);
  if (c.scorer == ScorerKind::baseline && c.metric_list().size() != 1) {
    throw ValidationError("evaluate takes exactly one metric; use grid for several");
  }
  return write_grid(command, c, "evaluate");
}

int cmd_tune(const std::string& command, const RunConfig& c, std::size_t max_units, double holdout) {
  RunConfig config = c;
  config.scorer = ScorerKind::siamese;
  config.validate();
  const FeatureSet features = single_feature_set(config);
  const Dataset data = load_dataset(config);
  const EmbeddingTable table = load_embeddings_for(config, data.corpus);
  const auto objective = [&](const SiameseConfig& candidate) {
    return holdout_accuracy(config, data, table, candidate, holdout);
  };
  const TuneResult result = tune(config.siamese_for(features), objective, max_units, &std::cerr);
  fs::create_directories(config.out);
  write_file(config.out / "tune.json", result.to_json() + "\n");
  std::cout << result.to_json() << "\n";
  write_manifest(command, config, {{"tune", config.out / "tune.json"}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Issue link recommendation: TF-IDF baseline and Siamese scorer"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  // Shared flags live on the top-level app so a TOML --config can set them;
  // subcommands fall through to it.
  Flags f;
  add_run_options(&app, f);
  app.fallthrough();
  auto* ingest = app.add_subcommand("ingest", "Load and validate an export, write normalized issues and stats");
  auto* split = app.add_subcommand("split", "Chronological train/test split");
  auto* train = app.add_subcommand("train", "Train a Siamese model on the training split");
  auto* rec = app.add_subcommand("recommend", "Top-K linked-issue candidates for one issue");
  rec->add_option("--key", f.key, "Query issue key")->required();
  rec->add_option("--top", f.top, "Number of recommendations")->capture_default_str();
  auto* evaluate = app.add_subcommand("evaluate", "Accuracy, MRR and recall at K on the test split");
  auto* grid = app.add_subcommand("grid", "Evaluate every feature set x scorer x filter combination");
  grid->add_option("--manifest", f.manifest, "Re-run the configuration recorded in a manifest");
  auto* tune_cmd = app.add_subcommand("tune", "Sweep unit counts and dense activations");
  tune_cmd->add_option("--max-units", f.max_units, "Largest unit count tried")->capture_default_str();
  tune_cmd->add_option("--holdout", f.holdout, "Newest share of the training split used for validation")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::string command;
  for (int i = 0; i < argc; ++i) command += (i ? " " : "") + std::string(argv[i]);

  try {
    if (*ingest) return cmd_ingest(command, f.config);
    if (*split) return cmd_split(command, f.config);
    RunConfig config = f.resolve();
    if (*grid && !f.manifest.empty()) {
      const fs::path out = app.count("--out") ? config.out : fs::path{};
      config = config_from_manifest(f.manifest);
      if (!out.empty()) config.out = out;
    }
    if (*train) return cmd_train(command, config);
    if (*rec) return cmd_recommend(command, config, f.key, f.top);
    if (*evaluate) return cmd_evaluate(command, config);
    if (*grid) {
      config.validate();
      return write_grid(command, config, "grid");
    }
    return cmd_tune(command, config, f.max_units, f.holdout);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
