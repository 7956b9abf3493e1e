#include "tader/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include <fmt/format.h>
#include <json.hpp>

#include "tader/error.hpp"
#include "tader/rng.hpp"

namespace tader {

namespace {

constexpr std::size_t kPairWeight = 0;
constexpr std::size_t kDiffWeight = 1;
constexpr std::size_t kDenseBias = 2;
constexpr std::size_t kOutWeight = 3;
constexpr std::size_t kOutBias = 4;

constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;

}  // namespace

void SiameseConfig::validate() const {
  if (units == 0) throw ValidationError("units must be positive");
  if (dense_units == 0) throw ValidationError("dense units must be positive");
  if (kernel_size == 0 || stride == 0) throw ValidationError("kernel size and stride must be positive");
  if (max_len == 0) throw ValidationError("max_len must be positive");
  if (encoder == EncoderKind::cnn && max_len < kernel_size) {
    throw ValidationError(fmt::format("max_len {} is shorter than the kernel ({})", max_len, kernel_size));
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be a non-negative finite number");
  }
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  if (!features.has_text()) throw ValidationError("text feature required");
}

SiameseModel::SiameseModel(const SiameseConfig& config, std::size_t embedding_dim)
    : config_(config), embedding_dim_(embedding_dim) {
  config_.validate();
  if (embedding_dim == 0) throw ValidationError("embedding dimension must be positive");
  Rng rng(config_.seed);
  EncoderSpec spec{embedding_dim, config_.units, config_.kernel_size, config_.stride};
  encoder_ = make_encoder(config_.encoder, spec, rng);

  const std::size_t f = encoder_->output_dim();
  const std::size_t h = config_.dense_units;
  const std::size_t head_in = h + scalar_count();
  head_.emplace_back("dense.pair_weight", std::vector<std::size_t>{h, f});
  head_.emplace_back("dense.diff_weight", std::vector<std::size_t>{h, f});
  head_.emplace_back("dense.bias", std::vector<std::size_t>{h});
  head_.emplace_back("output.weight", std::vector<std::size_t>{2, head_in});
  head_.emplace_back("output.bias", std::vector<std::size_t>{2});
  detail::glorot_uniform(head_[kPairWeight], 3 * f, h, rng);
  detail::glorot_uniform(head_[kDiffWeight], 3 * f, h, rng);
  detail::glorot_uniform(head_[kOutWeight], head_in, 2, rng);

  norm_.mean.assign(scalar_count(), 0.0);
  norm_.stddev.assign(scalar_count(), 1.0);
}

SiameseModel::SiameseModel(const SiameseModel& other)
    : config_(other.config_),
      embedding_dim_(other.embedding_dim_),
      encoder_(other.encoder_->clone()),
      head_(other.head_),
      norm_(other.norm_) {}

SiameseModel& SiameseModel::operator=(const SiameseModel& other) {
  if (this != &other) {
    SiameseModel copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void SiameseModel::set_scalar_norm(ScalarNorm norm) {
  if (norm.mean.size() != scalar_count() || norm.stddev.size() != scalar_count()) {
    throw ValidationError("scalar normalization does not match the configured features");
  }
  for (double s : norm.stddev) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("scalar standard deviation must be positive");
  }
  norm_ = std::move(norm);
}

std::vector<Tensor*> SiameseModel::parameters() {
  std::vector<Tensor*> out;
  for (auto& t : encoder_->params()) out.push_back(&t);
  for (auto& t : head_) out.push_back(&t);
  return out;
}

std::vector<const Tensor*> SiameseModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& t : std::as_const(*encoder_).params()) out.push_back(&t);
  for (const auto& t : head_) out.push_back(&t);
  return out;
}

void SiameseModel::zero_weights() {
  for (Tensor* t : parameters()) t->zero();
}

SiameseModel::Projection SiameseModel::project(const EncodedSeq& x) const {
  if (static_cast<std::size_t>(x.matrix.cols()) != embedding_dim_) {
    throw ValidationError(fmt::format("input encoded with dimension {}, model expects {}", x.matrix.cols(), embedding_dim_));
  }
  return project(encoder_->forward(x));
}

SiameseModel::Projection SiameseModel::project(Vector features) const {
  Projection p;
  p.pair_term = head_[kPairWeight].matrix() * features;
  p.features = std::move(features);
  return p;
}

std::vector<double> SiameseModel::normalize(std::span<const double> raw_scalars) const {
  if (raw_scalars.size() != scalar_count()) {
    if (scalar_count() == 0) throw ValidationError("scalar features given but the model was trained without CC/CU");
    throw ValidationError(
        fmt::format("model expects {} scalar feature(s), got {}", scalar_count(), raw_scalars.size()));
  }
  std::vector<double> out(raw_scalars.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (raw_scalars[i] - norm_.mean[i]) / norm_.stddev[i];
  return out;
}

Eigen::Vector2d SiameseModel::head_forward(const Projection& a, const Projection& b, std::span<const double> raw_scalars,
                                           HeadTape* tape) const {
  const std::vector<double> scalars = normalize(raw_scalars);
  const Vector delta = a.features - b.features;
  const Vector diff = delta.cwiseAbs();
  const Vector pre = (a.pair_term + b.pair_term) + head_[kDiffWeight].matrix() * diff + head_[kDenseBias].vector();
  const auto h = pre.size();
  Vector hidden_in(h + static_cast<Eigen::Index>(scalars.size()));
  hidden_in.head(h) = activate(config_.activation, pre);
  for (std::size_t i = 0; i < scalars.size(); ++i) hidden_in[h + static_cast<Eigen::Index>(i)] = scalars[i];

  const Vector logits = head_[kOutWeight].matrix() * hidden_in + head_[kOutBias].vector();
  const Vector probs = softmax(logits);
  Eigen::Vector2d out(probs[0], probs[1]);
  if (tape != nullptr) {
    tape->diff_sign = delta.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    tape->diff = diff;
    tape->pre = pre;
    tape->hidden_in = std::move(hidden_in);
    tape->probs = out;
  }
  return out;
}

std::pair<Vector, Vector> SiameseModel::head_backward(const HeadTape& tape, const Projection& a, const Projection& b,
                                                      const Eigen::Vector2d& d_probs,
                                                      std::span<Tensor> head_grads) const {
  // Softmax Jacobian: dz_k = p_k (g_k - sum_j p_j g_j).
  const double mean = tape.probs.dot(d_probs);
  const Eigen::Vector2d d_logits = tape.probs.cwiseProduct(d_probs - Eigen::Vector2d::Constant(mean));

  head_grads[kOutWeight].matrix() += d_logits * tape.hidden_in.transpose();
  head_grads[kOutBias].vector() += d_logits;

  const auto h = tape.pre.size();
  const Vector d_hidden = (head_[kOutWeight].matrix().transpose() * d_logits).head(h);
  const Vector d_pre = d_hidden.cwiseProduct(activation_derivative(config_.activation, tape.pre));

  head_grads[kDenseBias].vector() += d_pre;
  head_grads[kDiffWeight].matrix() += d_pre * tape.diff.transpose();
  head_grads[kPairWeight].matrix() += d_pre * (a.features + b.features).transpose();

  const Vector through_pair = head_[kPairWeight].matrix().transpose() * d_pre;
  const Vector through_diff = (head_[kDiffWeight].matrix().transpose() * d_pre).cwiseProduct(tape.diff_sign);
  return {through_pair + through_diff, through_pair - through_diff};
}

Eigen::Vector2d SiameseModel::probabilities(const Projection& a, const Projection& b,
                                            std::span<const double> raw_scalars) const {
  return head_forward(a, b, raw_scalars, nullptr);
}

double SiameseModel::forward(const EncodedSeq& a, const EncodedSeq& b, std::span<const double> raw_scalars) const {
  return probabilities(project(a), project(b), raw_scalars)[1];
}

std::vector<double> pair_scalars(const FeatureSet& features, const Issue& query, const Issue& candidate) {
  std::vector<double> out;
  if (features.cc) out.push_back(time_gap_cc(query, candidate));
  if (features.cu) out.push_back(time_gap_cu(query, candidate));
  return out;
}

IssueEncoder::IssueEncoder(const EmbeddingTable& table, FeatureSet features, std::size_t max_len,
                           const TextPreprocessor& prep)
    : table_(&table), features_(features), max_len_(max_len), prep_(prep) {
  if (!features.has_text()) throw ValidationError("text feature required");
  if (max_len == 0) throw ValidationError("max_len must be positive");
}

namespace {

// Accumulates summed (not averaged) loss and gradients for `examples`.
// Each distinct issue slot is encoded once; its feature gradient is the sum
// over every example that references it.
double accumulate(const SiameseModel& model, std::span<const PairExample> examples, const EncodedLookup& lookup,
                  std::span<Tensor> grads) {
  std::map<std::size_t, std::size_t> slot_of;
  for (const auto& ex : examples) {
    slot_of.emplace(ex.query, 0);
    slot_of.emplace(ex.candidate, 0);
  }
  std::vector<std::unique_ptr<EncoderTape>> tapes;
  std::vector<SiameseModel::Projection> projections;
  tapes.reserve(slot_of.size());
  projections.reserve(slot_of.size());
  for (auto& [issue, slot] : slot_of) {
    slot = tapes.size();
    std::unique_ptr<EncoderTape> tape;
    const EncodedSeq encoded = lookup(issue);
    Vector features = model.encoder().forward(encoded, tape);
    tapes.push_back(std::move(tape));
    projections.push_back(model.project(std::move(features)));
  }

  const std::size_t n_encoder = model.encoder_param_count();
  const auto head_grads = grads.subspan(n_encoder);
  std::vector<Vector> d_features(projections.size(), Vector::Zero(static_cast<Eigen::Index>(model.encoder().output_dim())));
  double loss = 0.0;
  for (const auto& ex : examples) {
    const std::size_t qa = slot_of.at(ex.query);
    const std::size_t cb = slot_of.at(ex.candidate);
    SiameseModel::HeadTape tape;
    const Eigen::Vector2d probs = model.head_forward(projections[qa], projections[cb], ex.raw_scalars, &tape);
    const Eigen::Vector2d target = ex.label == 1 ? Eigen::Vector2d(0.0, 1.0) : Eigen::Vector2d(1.0, 0.0);
    const Eigen::Vector2d residual = probs - target;
    loss += 0.5 * residual.squaredNorm();
    // L = mean_k (p_k - t_k)^2 over the two outputs, so dL/dp = p - t.
    auto [d_a, d_b] = model.head_backward(tape, projections[qa], projections[cb], residual, head_grads);
    d_features[qa] += d_a;
    d_features[cb] += d_b;
  }
  for (std::size_t s = 0; s < tapes.size(); ++s) {
    model.encoder().backward(*tapes[s], d_features[s], grads.first(n_encoder));
  }
  return loss;
}

void scale(std::span<Tensor> grads, double factor) {
  for (auto& g : grads) g.vector() *= factor;
}

bool all_finite(const SiameseModel& model) {
  for (const Tensor* t : model.parameters()) {
    if (!t->vector().allFinite()) return false;
  }
  return true;
}

}  // namespace

GradientResult compute_gradients(const SiameseModel& model, std::span<const PairExample> examples,
                                 const EncodedLookup& lookup) {
  GradientResult out;
  const auto params = model.parameters();
  out.grads = zeros_like(params);
  if (examples.empty()) return out;
  const double inv = 1.0 / static_cast<double>(examples.size());
  out.loss = accumulate(model, examples, lookup, out.grads) * inv;
  scale(out.grads, inv);
  return out;
}

double compute_loss(const SiameseModel& model, std::span<const PairExample> examples, const EncodedLookup& lookup) {
  if (examples.empty()) return 0.0;
  std::map<std::size_t, SiameseModel::Projection> cache;
  auto projection = [&](std::size_t slot) -> const SiameseModel::Projection& {
    auto it = cache.find(slot);
    if (it == cache.end()) it = cache.emplace(slot, model.project(lookup(slot))).first;
    return it->second;
  };
  double loss = 0.0;
  for (const auto& ex : examples) {
    const Eigen::Vector2d probs = model.probabilities(projection(ex.query), projection(ex.candidate), ex.raw_scalars);
    const Eigen::Vector2d target = ex.label == 1 ? Eigen::Vector2d(0.0, 1.0) : Eigen::Vector2d(1.0, 0.0);
    loss += 0.5 * (probs - target).squaredNorm();
  }
  return loss / static_cast<double>(examples.size());
}

TrainResult train(SiameseModel model, std::span<const LabeledPair> pairs, const IssueSet& corpus,
                  const IssueEncoder& encoder) {
  const SiameseConfig& config = model.config();
  if (pairs.empty()) throw ValidationError("no training pairs");
  if (encoder.table().dim() != model.embedding_dim()) {
    throw ValidationError(fmt::format("embedding dimension {} does not match the model ({})", encoder.table().dim(),
                                      model.embedding_dim()));
  }
  if (encoder.max_len() != config.max_len) throw ValidationError("encoder max_len does not match the model");
  const FeatureSet& fs = config.features;
  const FeatureSet& es = encoder.features();
  if (fs.title != es.title || fs.description != es.description || fs.summary != es.summary) {
    throw ValidationError("encoder text fields do not match the model features");
  }

  // Slots are corpus positions; the later-created issue of a pair is the query.
  std::vector<PairExample> examples;
  examples.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const auto ia = corpus.index_of(pair.a);
    const auto ib = corpus.index_of(pair.b);
    if (!ia) throw ValidationError(fmt::format("training pair references unknown issue {}", pair.a));
    if (!ib) throw ValidationError(fmt::format("training pair references unknown issue {}", pair.b));
    const std::size_t query = std::max(*ia, *ib);
    const std::size_t candidate = std::min(*ia, *ib);
    examples.push_back({query, candidate, pair_scalars(fs, corpus[query], corpus[candidate]), pair.label});
  }

  if (model.scalar_count() > 0) {
    ScalarNorm norm;
    const std::size_t k = model.scalar_count();
    norm.mean.assign(k, 0.0);
    norm.stddev.assign(k, 0.0);
    for (const auto& ex : examples) {
      for (std::size_t i = 0; i < k; ++i) norm.mean[i] += ex.raw_scalars[i];
    }
    for (auto& m : norm.mean) m /= static_cast<double>(examples.size());
    for (const auto& ex : examples) {
      for (std::size_t i = 0; i < k; ++i) norm.stddev[i] += std::pow(ex.raw_scalars[i] - norm.mean[i], 2);
    }
    for (auto& s : norm.stddev) {
      s = std::sqrt(s / static_cast<double>(examples.size()));
      if (!(s > 0.0)) s = 1.0;
    }
    model.set_scalar_norm(std::move(norm));
  }

  std::map<std::size_t, TokenSeq> tokens;
  for (const auto& ex : examples) {
    for (std::size_t slot : {ex.query, ex.candidate}) {
      if (!tokens.contains(slot)) tokens.emplace(slot, encoder.tokens(corpus[slot]));
    }
  }
  const EncodedLookup lookup = [&](std::size_t slot) { return encoder.encode_tokens(tokens.at(slot)); };

  Rng rng(config.seed ^ kShuffleStream);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<PairExample> batch;
  TrainResult result{std::move(model), {}};
  SiameseModel& m = result.model;
  const auto params = m.parameters();
  std::vector<Tensor> grads = zeros_like(std::as_const(m).parameters());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      for (auto& g : grads) g.zero();
      const double batch_loss = accumulate(m, batch, lookup, grads);
      if (!std::isfinite(batch_loss)) {
        throw TrainingDiverged(
            fmt::format("non-finite loss in epoch {} (learning rate {})", epoch + 1, config.learning_rate));
      }
      loss_sum += batch_loss;
      const double step = config.learning_rate / static_cast<double>(batch.size());
      if (step != 0.0) {
        for (std::size_t p = 0; p < params.size(); ++p) params[p]->vector() -= step * grads[p].vector();
      }
    }
    if (!all_finite(m)) {
      throw TrainingDiverged(
          fmt::format("non-finite weights after epoch {} (learning rate {})", epoch + 1, config.learning_rate));
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(examples.size()));
  }
  return result;
}

double gradient_check(const SiameseModel& model, std::span<const PairSample> sample, double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1e-2) throw ValidationError("epsilon must lie in (0, 1e-2]");
  if (sample.empty()) throw ValidationError("gradient check needs at least one pair");

  std::vector<PairExample> examples;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    examples.push_back({2 * i, 2 * i + 1, sample[i].raw_scalars, sample[i].label});
  }
  const EncodedLookup lookup = [&](std::size_t slot) {
    const PairSample& s = sample[slot / 2];
    return slot % 2 == 0 ? s.query : s.candidate;
  };

  const GradientResult analytic = compute_gradients(model, examples, lookup);
  SiameseModel probe(model);
  const auto params = probe.parameters();
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double> numeric(params[p]->size());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      double& w = params[p]->data[i];
      const double saved = w;
      w = saved + epsilon;
      const double plus = compute_loss(probe, examples, lookup);
      w = saved - epsilon;
      const double minus = compute_loss(probe, examples, lookup);
      w = saved;
      numeric[i] = (plus - minus) / (2.0 * epsilon);
    }
    const Eigen::Map<const Vector> fd(numeric.data(), static_cast<Eigen::Index>(numeric.size()));
    const auto g = analytic.grads[p].vector();
    const double scale_norm = std::max(g.norm(), fd.norm());
    const double err = (g - fd).norm();
    worst = std::max(worst, scale_norm < 1e-10 ? err : err / scale_norm);
  }
  return worst;
}

namespace {

nlohmann::ordered_json config_to_json(const SiameseConfig& c) {
  nlohmann::ordered_json j;
  j["encoder"] = std::string(to_string(c.encoder));
  j["units"] = c.units;
  j["kernel_size"] = c.kernel_size;
  j["stride"] = c.stride;
  j["dense_units"] = c.dense_units;
  j["activation"] = std::string(to_string(c.activation));
  j["max_len"] = c.max_len;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["features"] = c.features.name();
  return j;
}

SiameseConfig config_from_json(const nlohmann::json& j) {
  SiameseConfig c;
  c.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
  c.units = j.at("units").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.stride = j.at("stride").get<std::size_t>();
  c.dense_units = j.at("dense_units").get<std::size_t>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.max_len = j.at("max_len").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.features = FeatureSet::parse(j.at("features").get<std::string>());
  return c;
}

constexpr const char* kCheckpointFormat = "tader-siamese";
constexpr int kCheckpointVersion = 1;

}  // namespace

std::string checkpoint_json(const SiameseModel& model, const std::map<std::string, std::string>& metadata) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(model.config());
  j["embedding_dim"] = model.embedding_dim();
  j["scalar_norm"] = {{"mean", model.scalar_norm().mean}, {"stddev", model.scalar_norm().stddev}};
  auto& tensors = j["tensors"] = nlohmann::ordered_json::array();
  for (const Tensor* t : model.parameters()) {
    nlohmann::ordered_json entry;
    entry["name"] = t->name;
    entry["shape"] = t->shape;
    entry["data"] = t->data;
    tensors.push_back(std::move(entry));
  }
  j["metadata"] = metadata;
  return j.dump();
}

SiameseModel model_from_checkpoint_json(std::string_view text, std::map<std::string, std::string>* metadata) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw ParseError("not a siamese checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ParseError(fmt::format("unsupported checkpoint version {}", j.at("version").get<int>()));
    }
    SiameseModel model(config_from_json(j.at("config")), j.at("embedding_dim").get<std::size_t>());
    const auto params = model.parameters();
    const auto& tensors = j.at("tensors");
    if (tensors.size() != params.size()) throw ParseError("checkpoint tensor count does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = tensors[i];
      if (entry.at("name").get<std::string>() != params[i]->name ||
          entry.at("shape").get<std::vector<std::size_t>>() != params[i]->shape) {
        throw ParseError(fmt::format("checkpoint tensor {} does not match the model layout", i));
      }
      auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != params[i]->size()) throw ParseError(fmt::format("tensor {} has the wrong size", params[i]->name));
      params[i]->data = std::move(data);
    }
    ScalarNorm norm;
    norm.mean = j.at("scalar_norm").at("mean").get<std::vector<double>>();
    norm.stddev = j.at("scalar_norm").at("stddev").get<std::vector<double>>();
    model.set_scalar_norm(std::move(norm));
    if (metadata != nullptr && j.contains("metadata")) {
      *metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const SiameseModel& model, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << checkpoint_json(model, metadata);
}

SiameseModel load_checkpoint(const std::filesystem::path& path, std::map<std::string, std::string>* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open checkpoint {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_checkpoint_json(buffer.str(), metadata);
}

}  // namespace tader
