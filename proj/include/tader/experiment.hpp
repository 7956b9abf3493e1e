#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tader/corpus.hpp"
#include "tader/metrics.hpp"
#include "tader/siamese.hpp"

namespace tader {

/// Version string recorded in manifests.
std::string_view version();

/// Lowercase hex SHA-256 of a file's bytes. Throws Error if unreadable.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

enum class ScorerKind { baseline, siamese };

std::string_view to_string(ScorerKind kind);
ScorerKind parse_scorer_kind(std::string_view name);

/// Everything needed to reproduce one CLI run.
struct RunConfig {
  std::filesystem::path data;
  std::string dataset;  ///< defaults to the data file stem
  std::int64_t split_day = -1;
  /// Feature-set names; "all" expands to the 28 grid combinations.
  std::vector<std::string> features{"TDS"};
  ScorerKind scorer = ScorerKind::baseline;
  std::vector<std::string> metrics{"cosine"};
  bool per_field = false;
  std::vector<std::string> filters{"none"};
  std::vector<std::size_t> ks = kDefaultKs;
  std::filesystem::path embeddings;
  std::size_t dim = 100;
  bool stem_vocab = true;  ///< stem embedding-file tokens before lookup
  std::filesystem::path model;  ///< checkpoint to evaluate instead of training
  SiameseConfig siamese;
  double neg_ratio = 1.0;
  NegativePool negatives = NegativePool::all_unlinked;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";

  /// Throws ValidationError naming the first bad field.
  void validate() const;

  std::vector<FeatureSet> feature_sets() const;
  std::vector<Metric> metric_list() const;
  std::vector<TimeFilter> filter_list() const;
  std::string dataset_name() const;
  /// Seed actually used for model init, shuffling and negative sampling.
  SiameseConfig siamese_for(const FeatureSet& features) const;
  PairOptions pair_options() const;

  std::string to_json() const;
  static RunConfig from_json(std::string_view text);
};

/// Corpus plus its chronological split.
struct Dataset {
  IssueSet corpus;
  Split split;
};

Dataset load_dataset(const RunConfig& config);

/// Embedding table restricted to the stems that occur in `corpus`.
EmbeddingTable load_embeddings_for(const RunConfig& config, const IssueSet& corpus);

/// Trains a Siamese model for `features` on the training split.
TrainResult train_siamese(const RunConfig& config, const Dataset& data, const EmbeddingTable& table,
                          const FeatureSet& features, std::ostream* log = nullptr);

struct GridOutcome {
  std::vector<EvalReport> reports;
  std::vector<std::string> failures;  ///< "<features>/<scorer>: message"
  std::string csv;                     ///< header plus one row per report per K
};

/// Evaluates every (feature set x scorer x filter) of `config`. A failing
/// sub-run is recorded and the remaining ones still run.
GridOutcome run_grid(const RunConfig& config, std::ostream* log = nullptr);

/// JSON manifest: tool version, command, config, seeds, input checksums and
/// output checksums.
std::string make_manifest(std::string_view command, const RunConfig& config,
                          const std::vector<std::pair<std::string, std::filesystem::path>>& outputs,
                          std::span<const std::string> failures = {});

/// Reads the config back from a manifest and checks the recorded input
/// checksums. Throws ValidationError when an input changed.
RunConfig config_from_manifest(const std::filesystem::path& path);

/// True once the unit sweep should end: the last configuration diverged
/// (nullopt) or failed to beat every earlier one.
bool unit_sweep_done(std::span<const std::optional<double>> metrics);

/// Index of the first best finite metric, or nullopt when all diverged.
std::optional<std::size_t> best_step(std::span<const std::optional<double>> metrics);

struct TuneStep {
  std::size_t units = 0;
  Activation activation = Activation::relu;
  std::optional<double> metric;  ///< nullopt: training diverged
  std::string note;
};

struct TuneResult {
  SiameseConfig best;
  double best_metric = 0.0;
  std::vector<TuneStep> trace;

  std::string to_json() const;
};

/// Validation score of a configuration; throws TrainingDiverged on divergence.
using TuneObjective = std::function<double(const SiameseConfig&)>;

/// Sweeps encoder and dense units 50, 100, ... up to `max_units` until
/// unit_sweep_done(), then tries each dense activation at the best width.
/// Throws TrainingDiverged when the first configuration diverges.
TuneResult tune(const SiameseConfig& base, const TuneObjective& objective, std::size_t max_units = 1000,
                std::ostream* log = nullptr);

/// Accuracy@1 on the newest `holdout` share of the training split, after
/// training on the rest. Used as the tune objective.
double holdout_accuracy(const RunConfig& config, const Dataset& data, const EmbeddingTable& table,
                        const SiameseConfig& candidate, double holdout = 0.2);

}  // namespace tader
