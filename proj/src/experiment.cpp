#include "tader/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "tader/error.hpp"

#ifndef TADER_VERSION
#define TADER_VERSION "0.0.0"
#endif

namespace tader {

using json = nlohmann::ordered_json;

std::string_view version() { return TADER_VERSION; }

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      EVP_MD_CTX_free(ctx_);
      throw Error("sha256 unavailable");
    }
  }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  ~Sha256() { EVP_MD_CTX_free(ctx_); }

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }

  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, digest, &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", path.string()));
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string_view to_string(ScorerKind kind) { return kind == ScorerKind::baseline ? "baseline" : "siamese"; }

ScorerKind parse_scorer_kind(std::string_view name) {
  if (name == "baseline" || name == "tfidf") return ScorerKind::baseline;
  if (name == "siamese") return ScorerKind::siamese;
  throw ValidationError(fmt::format("unknown scorer '{}' (expected baseline or siamese)", name));
}

std::vector<FeatureSet> RunConfig::feature_sets() const {
  std::vector<FeatureSet> out;
  for (const auto& name : features) {
    if (name == "all") {
      for (const auto& f : enumerate_feature_combos()) out.push_back(f);
    } else {
      out.push_back(FeatureSet::parse(name));
    }
  }
  return out;
}

std::vector<Metric> RunConfig::metric_list() const {
  std::vector<Metric> out;
  for (const auto& name : metrics) {
    if (name == "all") {
      for (Metric m : {Metric::cosine, Metric::euclidean, Metric::manhattan, Metric::chebyshev}) out.push_back(m);
    } else {
      out.push_back(parse_metric(name));
    }
  }
  return out;
}

std::vector<TimeFilter> RunConfig::filter_list() const {
  std::vector<TimeFilter> out;
  for (const auto& name : filters) {
    if (name == "all") {
      for (const char* f : {"none", "1m", "2m", "3m"}) out.push_back(TimeFilter::parse(f));
    } else {
      out.push_back(TimeFilter::parse(name));
    }
  }
  return out;
}

std::string RunConfig::dataset_name() const { return dataset.empty() ? data.stem().string() : dataset; }

SiameseConfig RunConfig::siamese_for(const FeatureSet& fs) const {
  SiameseConfig c = siamese;
  c.features = fs;
  c.seed = seed;
  return c;
}

PairOptions RunConfig::pair_options() const { return PairOptions{neg_ratio, seed, negatives}; }

void RunConfig::validate() const {
  if (data.empty()) throw ValidationError("--data is required");
  if (split_day < 0) throw ValidationError("--split-day must be given and non-negative");
  if (features.empty()) throw ValidationError("no feature set given");
  if (filters.empty()) throw ValidationError("no time filter given");
  if (ks.empty()) throw ValidationError("K list is empty");
  for (std::size_t k : ks) {
    if (k == 0) throw ValidationError("K must be at least 1");
  }
  const auto fs = feature_sets();
  for (const auto& f : fs) {
    if (!f.has_text()) throw ValidationError(fmt::format("feature set {} has no text field", f.name()));
  }
  filter_list();
  if (scorer == ScorerKind::baseline) {
    if (metrics.empty()) throw ValidationError("no metric given");
    metric_list();
  } else {
    if (embeddings.empty() && model.empty()) throw ValidationError("siamese scorer needs --embeddings");
    if (dim == 0) throw ValidationError("--dim must be positive");
    if (!(neg_ratio >= 0.0) || !std::isfinite(neg_ratio)) throw ValidationError("negative ratio must be >= 0");
    for (const auto& f : fs) siamese_for(f).validate();
  }
}

namespace {

std::string pool_name(NegativePool p) { return p == NegativePool::lonely ? "lonely" : "all"; }

NegativePool parse_pool(std::string_view s) {
  if (s == "all") return NegativePool::all_unlinked;
  if (s == "lonely") return NegativePool::lonely;
  throw ValidationError(fmt::format("unknown negative pool '{}' (expected all or lonely)", s));
}

}  // namespace

std::string RunConfig::to_json() const {
  json j;
  j["data"] = data.string();
  j["dataset"] = dataset;
  j["split_day"] = split_day;
  j["features"] = features;
  j["scorer"] = std::string(tader::to_string(scorer));
  j["metrics"] = metrics;
  j["per_field"] = per_field;
  j["filters"] = filters;
  j["ks"] = ks;
  j["embeddings"] = embeddings.string();
  j["dim"] = dim;
  j["stem_vocab"] = stem_vocab;
  j["model"] = model.string();
  j["encoder"] = std::string(tader::to_string(siamese.encoder));
  j["units"] = siamese.units;
  j["kernel_size"] = siamese.kernel_size;
  j["stride"] = siamese.stride;
  j["dense_units"] = siamese.dense_units;
  j["activation"] = std::string(tader::to_string(siamese.activation));
  j["max_len"] = siamese.max_len;
  j["learning_rate"] = siamese.learning_rate;
  j["epochs"] = siamese.epochs;
  j["batch_size"] = siamese.batch_size;
  j["neg_ratio"] = neg_ratio;
  j["negatives"] = pool_name(negatives);
  j["seed"] = seed;
  j["out"] = out.string();
  return j.dump(2);
}

RunConfig RunConfig::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunConfig c;
    c.data = j.at("data").get<std::string>();
    c.dataset = j.at("dataset").get<std::string>();
    c.split_day = j.at("split_day").get<std::int64_t>();
    c.features = j.at("features").get<std::vector<std::string>>();
    c.scorer = parse_scorer_kind(j.at("scorer").get<std::string>());
    c.metrics = j.at("metrics").get<std::vector<std::string>>();
    c.per_field = j.at("per_field").get<bool>();
    c.filters = j.at("filters").get<std::vector<std::string>>();
    c.ks = j.at("ks").get<std::vector<std::size_t>>();
    c.embeddings = j.at("embeddings").get<std::string>();
    c.dim = j.at("dim").get<std::size_t>();
    c.stem_vocab = j.at("stem_vocab").get<bool>();
    c.model = j.at("model").get<std::string>();
    c.siamese.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
    c.siamese.units = j.at("units").get<std::size_t>();
    c.siamese.kernel_size = j.at("kernel_size").get<std::size_t>();
    c.siamese.stride = j.at("stride").get<std::size_t>();
    c.siamese.dense_units = j.at("dense_units").get<std::size_t>();
    c.siamese.activation = parse_activation(j.at("activation").get<std::string>());
    c.siamese.max_len = j.at("max_len").get<std::size_t>();
    c.siamese.learning_rate = j.at("learning_rate").get<double>();
    c.siamese.epochs = j.at("epochs").get<std::size_t>();
    c.siamese.batch_size = j.at("batch_size").get<std::size_t>();
    c.neg_ratio = j.at("neg_ratio").get<double>();
    c.negatives = parse_pool(j.at("negatives").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.out = j.at("out").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed run config: {}", e.what()));
  }
}

Dataset load_dataset(const RunConfig& config) {
  Dataset d;
  d.corpus = load_issues(config.data);
  d.split = chronological_split(d.corpus, config.split_day);
  if (d.split.train.empty()) throw ValidationError(fmt::format("split day {} leaves the training set empty", config.split_day));
  if (d.split.test.empty()) throw ValidationError(fmt::format("split day {} leaves the test set empty", config.split_day));
  return d;
}

EmbeddingTable load_embeddings_for(const RunConfig& config, const IssueSet& corpus) {
  if (config.embeddings.empty()) throw ValidationError("--embeddings is required for the siamese scorer");
  std::unordered_set<std::string> vocab;
  const FeatureSet all_text{true, true, true, false, false};
  for (const Issue& issue : corpus.issues()) {
    for (auto& t : concat_fields(issue, all_text)) vocab.insert(std::move(t));
  }
  VectorLoadOptions options;
  options.keep = &vocab;
  options.stem_vocab = config.stem_vocab;
  return load_vectors(config.embeddings, config.dim, options);
}

TrainResult train_siamese(const RunConfig& config, const Dataset& data, const EmbeddingTable& table,
                          const FeatureSet& features, std::ostream* log) {
  const SiameseConfig sc = config.siamese_for(features);
  const auto pairs = generate_training_pairs(data.split.train, config.pair_options());
  const IssueEncoder encoder(table, features, sc.max_len);
  auto result = train(SiameseModel(sc, table.dim()), pairs, data.split.train, encoder);
  if (log != nullptr) {
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      *log << fmt::format("  {} epoch {}: loss {:.6f}\n", features.name(), e + 1, result.epoch_loss[e]);
    }
  }
  return result;
}

GridOutcome run_grid(const RunConfig& config, std::ostream* log) {
  config.validate();
  const Dataset data = load_dataset(config);
  const auto filters = config.filter_list();
  EvalOptions options;
  options.dataset = config.dataset_name();
  options.ks = config.ks;

  GridOutcome outcome;
  auto evaluate_all = [&](const Scorer& scorer) {
    for (const auto& filter : filters) {
      options.filter = filter;
      auto report = evaluate(data.corpus, data.split.test, scorer, options);
      if (log != nullptr) {
        *log << fmt::format("{} {} {}: acc@1 {:.4f} over {} queries\n", report.features, report.scorer, report.filter,
                            report.metrics.front().accuracy, report.queries);
      }
      outcome.reports.push_back(std::move(report));
    }
  };

  std::optional<EmbeddingTable> table;
  std::optional<SiameseModel> checkpoint;
  for (const FeatureSet& fs : config.feature_sets()) {
    if (config.scorer == ScorerKind::baseline) {
      for (Metric metric : config.metric_list()) {
        try {
          BaselineScorer scorer(data.split.train, fs, metric, BaselineOptions{config.per_field});
          scorer.index(data.corpus);
          evaluate_all(scorer);
        } catch (const std::exception& e) {
          outcome.failures.push_back(fmt::format("{}/tfidf-{}: {}", fs.name(), to_string(metric), e.what()));
        }
      }
      continue;
    }
    try {
      if (!table) table = load_embeddings_for(config, data.corpus);
      if (!config.model.empty()) {
        if (!checkpoint) checkpoint = load_checkpoint(config.model);
        if (checkpoint->config().features != fs) {
          throw ValidationError(fmt::format("checkpoint was trained on {}, not {}", checkpoint->config().features.name(),
                                            fs.name()));
        }
        SiameseScorer scorer(*checkpoint, *table);
        scorer.index(data.corpus);
        evaluate_all(scorer);
      } else {
        const TrainResult trained = train_siamese(config, data, *table, fs, log);
        SiameseScorer scorer(trained.model, *table);
        scorer.index(data.corpus);
        evaluate_all(scorer);
      }
    } catch (const std::exception& e) {
      outcome.failures.push_back(fmt::format("{}/siamese-{}: {}", fs.name(), to_string(config.siamese.encoder), e.what()));
    }
  }

  outcome.csv = EvalReport::csv_header();
  for (const auto& r : outcome.reports) outcome.csv += r.csv_rows();
  return outcome;
}

std::string make_manifest(std::string_view command, const RunConfig& config,
                          const std::vector<std::pair<std::string, std::filesystem::path>>& outputs,
                          std::span<const std::string> failures) {
  json j;
  j["tool"] = "tader";
  j["version"] = std::string(version());
  j["command"] = std::string(command);
  j["config"] = json::parse(config.to_json());
  j["seeds"] = {{"seed", config.seed}, {"pairs", config.seed}, {"model", config.seed}};
  json inputs = json::object();
  if (!config.data.empty() && std::filesystem::exists(config.data)) inputs["data"] = sha256_file(config.data);
  if (!config.embeddings.empty() && std::filesystem::exists(config.embeddings)) {
    inputs["embeddings"] = sha256_file(config.embeddings);
  }
  if (!config.model.empty() && std::filesystem::exists(config.model)) inputs["model"] = sha256_file(config.model);
  j["inputs"] = inputs;
  json outs = json::object();
  for (const auto& [name, path] : outputs) {
    outs[name] = {{"path", path.filename().string()}, {"sha256", sha256_file(path)}};
  }
  j["outputs"] = outs;
  j["failures"] = std::vector<std::string>(failures.begin(), failures.end());
  return j.dump(2) + "\n";
}

RunConfig config_from_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open manifest {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed manifest {}: {}", path.string(), e.what()));
  }
  if (!j.contains("config")) throw ValidationError(fmt::format("{} has no config section", path.string()));
  RunConfig config = RunConfig::from_json(j.at("config").dump());
  const auto inputs = j.value("inputs", nlohmann::json::object());
  auto verify = [&](const char* name, const std::filesystem::path& file) {
    if (!inputs.contains(name)) return;
    if (sha256_file(file) != inputs.at(name).get<std::string>()) {
      throw ValidationError(fmt::format("{} ({}) no longer matches the manifest checksum", name, file.string()));
    }
  };
  verify("data", config.data);
  verify("embeddings", config.embeddings);
  verify("model", config.model);
  return config;
}

bool unit_sweep_done(std::span<const std::optional<double>> metrics) {
  if (metrics.empty()) return false;
  if (!metrics.back()) return true;
  for (std::size_t i = 0; i + 1 < metrics.size(); ++i) {
    if (metrics[i] && *metrics[i] >= *metrics.back()) return true;
  }
  return false;
}

std::optional<std::size_t> best_step(std::span<const std::optional<double>> metrics) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    if (metrics[i] && (!best || *metrics[i] > *metrics[*best])) best = i;
  }
  return best;
}

TuneResult tune(const SiameseConfig& base, const TuneObjective& objective, std::size_t max_units, std::ostream* log) {
  constexpr std::size_t kStep = 50;
  if (max_units < kStep) throw ValidationError(fmt::format("max units must be at least {}", kStep));
  TuneResult result;
  auto run = [&](SiameseConfig c) {
    TuneStep step{c.units, c.activation, std::nullopt, {}};
    try {
      step.metric = objective(c);
    } catch (const TrainingDiverged& e) {
      step.note = e.what();
    }
    if (log != nullptr) {
      *log << fmt::format("units {} {}: {}\n", c.units, to_string(c.activation),
                          step.metric ? fmt::format("{:.4f}", *step.metric) : "diverged");
    }
    result.trace.push_back(step);
    return step.metric;
  };

  std::vector<std::optional<double>> sweep;
  std::vector<std::size_t> widths;
  for (std::size_t units = kStep; units <= max_units; units += kStep) {
    SiameseConfig c = base;
    c.units = units;
    c.dense_units = units;
    sweep.push_back(run(c));
    widths.push_back(units);
    if (sweep.size() == 1 && !sweep.front()) {
      throw TrainingDiverged(fmt::format("first configuration ({} units, learning rate {}) diverged: {}", units,
                                         base.learning_rate, result.trace.front().note));
    }
    if (unit_sweep_done(sweep)) break;
  }
  const std::size_t best_width = widths[*best_step(sweep)];
  result.best = base;
  result.best.units = best_width;
  result.best.dense_units = best_width;
  result.best_metric = *sweep[*best_step(sweep)];

  for (Activation a : {Activation::relu, Activation::leaky_relu, Activation::sigmoid}) {
    if (a == base.activation) continue;
    SiameseConfig c = result.best;
    c.activation = a;
    const auto metric = run(c);
    if (metric && *metric > result.best_metric) {
      result.best = c;
      result.best_metric = *metric;
    }
  }
  return result;
}

std::string TuneResult::to_json() const {
  json j;
  j["best"] = {{"units", best.units},
               {"dense_units", best.dense_units},
               {"activation", std::string(to_string(best.activation))},
               {"metric", best_metric}};
  auto& t = j["trace"] = json::array();
  for (const auto& s : trace) {
    json row;
    row["units"] = s.units;
    row["activation"] = std::string(to_string(s.activation));
    row["metric"] = s.metric ? json(*s.metric) : json(nullptr);
    if (!s.note.empty()) row["note"] = s.note;
    t.push_back(std::move(row));
  }
  return j.dump(2);
}

double holdout_accuracy(const RunConfig& config, const Dataset& data, const EmbeddingTable& table,
                        const SiameseConfig& candidate, double holdout) {
  if (!(holdout > 0.0 && holdout < 1.0)) throw ValidationError("holdout share must lie in (0, 1)");
  const IssueSet& train_all = data.split.train;
  const auto cut = static_cast<std::size_t>(
      std::llround(static_cast<double>(train_all.size()) * (1.0 - holdout)));
  auto position = [&](const Issue& i) { return *train_all.index_of(i.key); };
  const IssueSet fit = train_all.subset([&](const Issue& i) { return position(i) < cut; });
  const IssueSet validation = train_all.subset([&](const Issue& i) { return position(i) >= cut; });

  const auto pairs = generate_training_pairs(fit, config.pair_options());
  const IssueEncoder encoder(table, candidate.features, candidate.max_len);
  const TrainResult trained = train(SiameseModel(candidate, table.dim()), pairs, fit, encoder);
  SiameseScorer scorer(trained.model, table);
  scorer.index(train_all);
  std::size_t excluded = 0;
  const auto results =
      rank_queries(train_all, validation, scorer, config.filter_list().front(), 1, &excluded, nullptr);
  return accuracy_at_k(results, 1);
}

}  // namespace tader
