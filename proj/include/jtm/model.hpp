#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jtm/coattention.hpp"
#include "jtm/eval.hpp"
#include "jtm/io.hpp"
#include "jtm/poincare.hpp"
#include "jtm/reasoning.hpp"
#include "jtm/semantic.hpp"
#include "jtm/syntactic.hpp"

namespace jtm::model {

using numerics::Parameter;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;
using syntactic::Taxonomy;

enum class Variant {
  kFull,          // co-attention + reasoning
  kSemanticOnly,  // fusion over x_b alone
  kConcat,        // fusion over [x_h; x_b; x_s], no co-attention or reasoning
};

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kSemanticOnly: return "semantic_only";
    case Variant::kConcat: return "concat";
  }
  return "unknown";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "semantic_only") return Variant::kSemanticOnly;
  if (s == "concat") return Variant::kConcat;
  throw ConfigError("unknown model variant '" + s + "' (full, semantic_only, concat)");
}

// Per-title views, one row per title: h is N×d_h, b is N×d_b, s is N×|Y|.
struct Features {
  Tensor h, b, s;

  std::size_t rows() const { return b.rows(); }

  Features subset(const std::vector<std::size_t>& idx) const {
    auto pick = [&](const Tensor& t) {
      Tensor out({idx.size(), t.cols()});
      for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(t.data() + idx[r] * t.cols(), t.cols(), out.data() + r * t.cols());
      return out;
    };
    return {pick(h), pick(b), pick(s)};
  }
};

// Builds the three views of arbitrary titles against a fixed taxonomy.
// Titles absent from the hyperbolic table get x_h = 0.
class FeatureBuilder {
 public:
  FeatureBuilder(const Taxonomy& taxonomy, const poincare::HyperbolicEmbeddingTable& hyperbolic,
                 const semantic::SemanticProvider& semantic,
                 const semantic::SemanticProvider* fallback = nullptr)
      : taxonomy_(taxonomy),
        hyperbolic_(hyperbolic),
        semantic_(semantic),
        fallback_(fallback),
        index_(taxonomy) {
    if (fallback_ && fallback_->dim() != semantic_.dim()) {
      throw ConfigError("fallback semantic dimension differs from the provider's");
    }
  }

  std::size_t d_h() const { return hyperbolic_.dim(); }
  std::size_t d_b() const { return semantic_.dim(); }
  std::size_t d_s() const { return taxonomy_.size(); }

  std::vector<double> semantic_vector(const std::string& canonical) const {
    if (semantic_.covers(canonical)) return semantic_.embed(canonical);
    if (fallback_) return fallback_->embed(canonical);
    throw LookupError("no semantic vector for title '" + canonical + "'");
  }

  Features build(const std::vector<std::string>& titles) const {
    if (titles.empty()) throw DegenerateInputError("no titles to featurize");
    Features f{Tensor({titles.size(), d_h()}), Tensor({titles.size(), d_b()}),
               Tensor({titles.size(), d_s()})};
    for (std::size_t r = 0; r < titles.size(); ++r) {
      const std::string t = graph::canonicalize_title(titles[r]);
      const auto h = hyperbolic_.lookup_or_zero(t);
      std::copy(h.begin(), h.end(), f.h.data() + r * d_h());
      const auto b = semantic_vector(t);
      if (b.size() != d_b()) throw DimensionError("semantic vector of '" + t + "' has wrong dimension");
      std::copy(b.begin(), b.end(), f.b.data() + r * d_b());
      index_.fill(t, {f.s.data() + r * d_s(), d_s()});
    }
    return f;
  }

  // Candidate matrices: semantic (|Y|×d_b) and syntactic (|Y|×|Y|) vectors of
  // the standard titles.
  Features candidates() const { return build(taxonomy_.titles()); }

 private:
  const Taxonomy& taxonomy_;
  const poincare::HyperbolicEmbeddingTable& hyperbolic_;
  const semantic::SemanticProvider& semantic_;
  const semantic::SemanticProvider* fallback_;
  syntactic::SyntacticIndex index_;
};

struct ModelConfig {
  std::size_t d_h = 128;
  std::size_t d_b = 128;
  std::size_t d_r = 64;
  Variant variant = Variant::kFull;
  double reg_weight = 1.0;
  double clause_weight = 0.1;
  // Event rows sampled per batch and view for the logical regularizers.
  std::size_t reg_samples = 256;
  // Initial fusion bias. A positive start keeps every class logit above the
  // relu kink so all classes receive gradient from the first step.
  double fusion_bias = 1.0;
  std::uint64_t seed = 0;
};

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["d_h"] = c.d_h;
  j["d_b"] = c.d_b;
  j["d_r"] = c.d_r;
  j["variant"] = variant_name(c.variant);
  j["reg_weight"] = c.reg_weight;
  j["clause_weight"] = c.clause_weight;
  j["reg_samples"] = c.reg_samples;
  j["fusion_bias"] = c.fusion_bias;
  j["seed"] = c.seed;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d_h = j.at("d_h").get<std::size_t>();
    c.d_b = j.at("d_b").get<std::size_t>();
    c.d_r = j.at("d_r").get<std::size_t>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.reg_weight = j.at("reg_weight").get<double>();
    c.clause_weight = j.at("clause_weight").get<double>();
    c.reg_samples = j.at("reg_samples").get<std::size_t>();
    c.fusion_bias = j.at("fusion_bias").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  return c;
}

// Terms of one training objective evaluation.
struct LossTerms {
  Var total;
  Var cross_entropy;
  Var regularizers;  // total_b + total_s
  Var clause;        // clause_b + clause_s
};

struct RankedMapping {
  std::vector<std::pair<std::string, double>> entries;  // descending probability
  bool clamped = false;                                 // k exceeded |Y|
};

class MapperModel {
 public:
  MapperModel() = default;

  // Fresh parameters drawn from config.seed. v_b and v_s are the candidate
  // matrices of the taxonomy's standard titles.
  MapperModel(Taxonomy taxonomy, ModelConfig config, Tensor v_b, Tensor v_s)
      : taxonomy_(std::move(taxonomy)), config_(config), v_b_(std::move(v_b)), v_s_(std::move(v_s)) {
    const std::size_t y = taxonomy_.size();
    if (y == 0) throw DegenerateInputError("taxonomy is empty");
    if (config_.d_h == 0 || config_.d_r == 0 || config_.d_b == 0) {
      throw ConfigError("model dimensions must be positive");
    }
    if (v_b_.rows() != y || v_b_.cols() != config_.d_b || v_s_.rows() != y || v_s_.cols() != y) {
      throw DimensionError("candidate matrices " + numerics::shape_string(v_b_.shape()) + " and " +
                           numerics::shape_string(v_s_.shape()) + " do not match |Y|=" +
                           std::to_string(y) + ", d_b=" + std::to_string(config_.d_b));
    }
    std::mt19937_64 rng(config_.seed);
    coatt_ = coattention::CoAttentionParams::init({config_.d_h, config_.d_b, y}, rng);
    reason_b_ = reasoning::ReasoningParams::init("reason_b", config_.d_b, config_.d_b, config_.d_r, rng);
    reason_s_ = reasoning::ReasoningParams::init("reason_s", y, y, config_.d_r, rng);
    fusion_w_ = numerics::uniform_parameter("fusion.W", {y, fusion_width()}, rng);
    fusion_b_ = Parameter("fusion.b", Tensor({y}, config_.fusion_bias));
  }

  const Taxonomy& taxonomy() const noexcept { return taxonomy_; }
  const ModelConfig& config() const noexcept { return config_; }
  std::size_t classes() const noexcept { return taxonomy_.size(); }
  const Tensor& candidate_semantic() const noexcept { return v_b_; }
  const Tensor& candidate_syntactic() const noexcept { return v_s_; }

  std::size_t fusion_width() const {
    const std::size_t y = taxonomy_.size();
    switch (config_.variant) {
      case Variant::kFull: return config_.d_h + config_.d_b + y + 2 * config_.d_r;
      case Variant::kSemanticOnly: return config_.d_b;
      case Variant::kConcat: return config_.d_h + config_.d_b + y;
    }
    return 0;
  }

  // Parameters that the variant actually trains.
  std::vector<Parameter*> trainable() {
    std::vector<Parameter*> out;
    if (config_.variant == Variant::kFull) {
      for (auto* p : coatt_.parameters()) out.push_back(p);
      for (auto* p : reason_b_.parameters()) out.push_back(p);
      for (auto* p : reason_s_.parameters()) out.push_back(p);
    }
    out.push_back(&fusion_w_);
    out.push_back(&fusion_b_);
    return out;
  }

  // Every stored tensor in serialization order.
  std::vector<Parameter*> all_parameters() {
    std::vector<Parameter*> out = coatt_.parameters();
    for (auto* p : reason_b_.parameters()) out.push_back(p);
    for (auto* p : reason_s_.parameters()) out.push_back(p);
    out.push_back(&fusion_w_);
    out.push_back(&fusion_b_);
    return out;
  }

  void renormalize_anchors() {
    reason_b_.renormalize_truth();
    reason_s_.renormalize_truth();
  }

  void check_features(const Features& f) const {
    const std::size_t n = f.b.rows();
    if (f.h.rows() != n || f.s.rows() != n || f.h.cols() != config_.d_h ||
        f.b.cols() != config_.d_b || f.s.cols() != classes()) {
      throw DimensionError("features " + numerics::shape_string(f.h.shape()) + ", " +
                           numerics::shape_string(f.b.shape()) + ", " +
                           numerics::shape_string(f.s.shape()) + " do not match model (" +
                           std::to_string(config_.d_h) + ", " + std::to_string(config_.d_b) +
                           ", " + std::to_string(classes()) + ")");
    }
  }

  // relu(W_f · z + b) for every row. With `labels`, also builds the loss;
  // `rng` drives the fold order and regularizer sampling (taxonomy order
  // and no sampling when null).
  Var logits(Tape& tape, const Features& f, std::mt19937_64* rng,
             const std::vector<std::size_t>* labels = nullptr, LossTerms* terms = nullptr) {
    using namespace numerics;
    check_features(f);
    const std::size_t n = f.rows();
    if (labels) {
      if (labels->size() != n) {
        throw DimensionError(std::to_string(labels->size()) + " labels for " + std::to_string(n) +
                             " titles");
      }
      for (std::size_t y : *labels) {
        if (y >= classes()) {
          throw DataError("label index " + std::to_string(y) + " outside taxonomy of size " +
                          std::to_string(classes()));
        }
      }
    }
    Var xh = tape.constant(f.h), xb = tape.constant(f.b), xs = tape.constant(f.s);
    Var z;
    Var reg = tape.constant(Tensor::scalar(0.0)), clause = tape.constant(Tensor::scalar(0.0));
    switch (config_.variant) {
      case Variant::kSemanticOnly: z = xb; break;
      case Variant::kConcat: z = concat({xh, xb, xs}, 1); break;
      case Variant::kFull: {
        const auto co = coattention::co_attend(tape, coatt_, xh, xb, xs);
        const auto order = reasoning::fold_order(classes(), rng);
        auto view = [&](reasoning::ReasoningParams& p, Var x, const Tensor& v) {
          const reasoning::Logic l = reasoning::bind_logic(tape, p);
          Var events = reasoning::encode_events(tape, p, x, tape.constant(v));
          Var x_prime = reasoning::fold_negated(l, events, n, order);
          if (labels) {
            std::vector<std::size_t> correct(n);
            for (std::size_t i = 0; i < n; ++i) correct[i] = (*labels)[i] * n + i;
            Var truth = reasoning::clause_truth_loss(l, x_prime, gather_rows(events, correct));
            clause = add(clause, truth);
            reg = add(reg, reasoning::logical_regularizers(l, gather_rows(events, sample_rows(n, rng))).total);
          }
          return x_prime;
        };
        Var xb_prime = view(reason_b_, xb, v_b_);
        Var xs_prime = view(reason_s_, xs, v_s_);
        // softmax(K) ⊙ x shrinks each attended view by about its width, so
        // the fusion weights act on width-scaled copies. The effective
        // weight on x̂ is W_f · diag(gain); only Adam's step scale changes.
        auto gained = [](Var x) { return scale(x, static_cast<double>(x.value().cols())); };
        z = concat({gained(co.h), gained(co.b), gained(co.s), xb_prime, xs_prime}, 1);
        break;
      }
    }
    Var out = relu(linear(z, tape.param(fusion_w_), tape.param(fusion_b_)));
    if (labels) {
      Var ce = softmax_cross_entropy(out, *labels);
      Var total = add(add(ce, scale(reg, config_.reg_weight)), scale(clause, config_.clause_weight));
      if (terms) *terms = {total, ce, reg, clause};
    }
    return out;
  }

  LossTerms loss(Tape& tape, const Features& f, const std::vector<std::size_t>& labels,
                 std::mt19937_64* rng) {
    LossTerms terms;
    logits(tape, f, rng, &labels, &terms);
    return terms;
  }

  // Row-wise class probabilities, computed in chunks of `chunk` titles.
  Tensor probabilities(const Features& f, std::size_t chunk = 256) const {
    check_features(f);
    // Inference only reads parameter values, so concurrent calls are safe.
    auto& self = const_cast<MapperModel&>(*this);
    Tensor out({f.rows(), classes()});
    for (std::size_t begin = 0; begin < f.rows(); begin += chunk) {
      const std::size_t count = std::min(chunk, f.rows() - begin);
      std::vector<std::size_t> idx(count);
      std::iota(idx.begin(), idx.end(), begin);
      Tape tape;
      const Tensor p = numerics::softmax_values(self.logits(tape, f.subset(idx), nullptr).value());
      std::copy(p.data(), p.data() + p.numel(), out.data() + begin * classes());
    }
    return out;
  }

  bool operator==(const MapperModel& o) const {
    if (!(taxonomy_ == o.taxonomy_) || !(v_b_ == o.v_b_) || !(v_s_ == o.v_s_)) return false;
    if (nlohmann::json(to_json(config_)) != nlohmann::json(to_json(o.config_))) return false;
    auto a = const_cast<MapperModel&>(*this).all_parameters();
    auto b = const_cast<MapperModel&>(o).all_parameters();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!(a[i]->value == b[i]->value)) return false;
    }
    return true;
  }

 private:
  std::vector<std::size_t> sample_rows(std::size_t n, std::mt19937_64* rng) const {
    const std::size_t total = classes() * n;
    const std::size_t m = std::min(config_.reg_samples, total);
    std::vector<std::size_t> rows(m);
    if (!rng || m == total) {
      // Evenly spaced rows when no generator is supplied.
      for (std::size_t i = 0; i < m; ++i) rows[i] = i * total / m;
      return rows;
    }
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (auto& r : rows) r = pick(*rng);
    return rows;
  }

  Taxonomy taxonomy_;
  ModelConfig config_;
  Tensor v_b_, v_s_;
  coattention::CoAttentionParams coatt_;
  reasoning::ReasoningParams reason_b_, reason_s_;
  Parameter fusion_w_, fusion_b_;
};

// Top-k standard titles by probability, ties to the lower taxonomy index.
inline RankedMapping rank_probabilities(const Taxonomy& taxonomy, std::span<const double> probs,
                                        std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  RankedMapping out;
  if (k > probs.size()) {
    out.clamped = true;
    k = probs.size();
  }
  const auto order = eval::rank_descending(probs);
  for (std::size_t r = 0; r < k; ++r) out.entries.emplace_back(taxonomy.title(order[r]), probs[order[r]]);
  return out;
}

inline std::vector<RankedMapping> map_topk(const MapperModel& model, const Features& f, std::size_t k) {
  const Tensor p = model.probabilities(f);
  std::vector<RankedMapping> out;
  for (std::size_t r = 0; r < f.rows(); ++r) {
    out.push_back(rank_probabilities(model.taxonomy(),
                                     {p.data() + r * model.classes(), model.classes()}, k));
  }
  return out;
}

// Ranked queries for the metric functions: full class ranking per row,
// relevant = the gold label.
inline std::vector<eval::RankedQuery> ranked_queries(const MapperModel& model, const Features& f,
                                                     const std::vector<std::size_t>& labels) {
  const Tensor p = model.probabilities(f);
  std::vector<eval::RankedQuery> q;
  for (std::size_t r = 0; r < f.rows(); ++r) {
    q.push_back({eval::rank_descending({p.data() + r * model.classes(), model.classes()}), {labels[r]}});
  }
  return q;
}

// ----------------------------------------------------------------- training

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::array<double, 3> split = {0.64, 0.16, 0.20};
  std::uint64_t split_seed = 0;
  std::uint64_t shuffle_seed = 0;
};

inline void validate(const TrainConfig& c) {
  if (!(c.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (c.batch_size == 0) throw ConfigError("batch size must be positive");
  if (c.max_epochs == 0) throw ConfigError("max_epochs must be positive");
  double s = 0.0;
  for (double f : c.split) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    s += f;
  }
  if (std::abs(s - 1.0) > 1e-9) throw ConfigError("split fractions sum to " + std::to_string(s) + ", not 1");
}

struct Split {
  std::vector<std::size_t> train, val, test;
};

// Seeded shuffle, then round(n·f_train) train and round(n·f_val) validation
// rows; the remainder is test.
inline Split split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions[0]));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions[1]));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw ConfigError("split of " + std::to_string(n) + " examples leaves an empty partition");
  }
  Split s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double cross_entropy = 0.0;
  double regularizers = 0.0;
  double clause = 0.0;
  double val_p1 = 0.0;
  double val_p10 = 0.0;    // strict precision, |rel ∩ top-10| / 10
  double val_hit10 = 0.0;  // fraction of titles whose label is in the top 10
};

inline std::string curve_to_csv(const std::vector<EpochRecord>& curve) {
  std::string out = "epoch,train_loss,cross_entropy,regularizers,clause,val_p1,val_p10,val_hit10\n";
  for (const auto& r : curve) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.cross_entropy, r.regularizers, r.clause, r.val_p1, r.val_p10, r.val_hit10}) {
      out += ',' + io::format_double(v);
    }
    out += '\n';
  }
  return out;
}

struct TrainResult {
  MapperModel model;  // best-validation checkpoint
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
  std::vector<std::string> warnings;
};

using EpochHook = std::function<void(const EpochRecord&)>;

// Adam on mini-batches of `train` rows; after each epoch the validation
// top-10 hit rate (ties broken by P@1) decides the checkpoint, and training stops once
// `patience` consecutive epochs fail to improve it.
inline TrainResult train(MapperModel model, const Features& features,
                         const std::vector<std::size_t>& labels, const std::vector<std::size_t>& train_rows,
                         const std::vector<std::size_t>& val_rows, const TrainConfig& config,
                         const EpochHook& on_epoch = {}) {
  validate(config);
  if (labels.size() != features.rows()) throw DimensionError("labels do not match features");
  if (train_rows.empty() || val_rows.empty()) throw ConfigError("empty training or validation split");
  TrainResult result;
  if (train_rows.size() < model.classes()) {
    result.warnings.push_back("only " + std::to_string(train_rows.size()) +
                              " training examples for " + std::to_string(model.classes()) + " classes");
  }
  const Features val = features.subset(val_rows);
  std::vector<std::size_t> val_labels;
  for (std::size_t r : val_rows) val_labels.push_back(labels[r]);

  std::mt19937_64 rng(config.shuffle_seed);
  numerics::AdamState adam(numerics::AdamConfig{config.lr});
  std::vector<Parameter*> params = model.trainable();
  std::vector<std::size_t> order = train_rows;

  double best_hit = -1.0, best_p1 = -1.0;
  std::size_t bad_epochs = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - begin);
      std::vector<std::size_t> rows(order.begin() + begin, order.begin() + begin + count);
      std::vector<std::size_t> y;
      for (std::size_t r : rows) y.push_back(labels[r]);
      Tape tape;
      const LossTerms t = model.loss(tape, features.subset(rows), y, &rng);
      const double total = t.total.value().item();
      if (!std::isfinite(total)) throw NumericError("training loss is not finite at epoch " + std::to_string(epoch));
      const double w = static_cast<double>(count) / static_cast<double>(order.size());
      rec.train_loss += w * total;
      rec.cross_entropy += w * t.cross_entropy.value().item();
      rec.regularizers += w * t.regularizers.value().item();
      rec.clause += w * t.clause.value().item();
      numerics::zero_grads(params);
      tape.backward(t.total);
      numerics::adam_step(adam, params);
      model.renormalize_anchors();
    }
    const auto q = ranked_queries(model, val, val_labels);
    rec.val_p1 = eval::precision_at_n(q, 1);
    rec.val_p10 = eval::precision_at_n(q, 10);
    rec.val_hit10 = eval::hit_rate_at_n(q, 10);
    result.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_hit10 > best_hit || (rec.val_hit10 == best_hit && rec.val_p1 > best_p1)) {
      best_hit = rec.val_hit10;
      best_p1 = rec.val_p1;
      result.model = model;
      result.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs > config.patience) {
      break;
    }
  }
  return result;
}

// --------------------------------------------------------------- artifacts

inline constexpr const char* kArtifactHeader = "#jtm-model v1";

inline std::string tensor_line(const std::string& name, const Tensor& t) {
  std::string dims;
  for (std::size_t i = 0; i < t.rank(); ++i) dims += (i ? "x" : "") + std::to_string(t.shape()[i]);
  return "tensor " + name + " " + dims + "\t" + io::join_numbers(t.values()) + "\n";
}

inline std::string serialize(const MapperModel& model) {
  auto& m = const_cast<MapperModel&>(model);
  std::string out = std::string(kArtifactHeader) + "\n";
  out += "taxonomy_version " + model.taxonomy().version() + "\n";
  out += "config " + to_json(model.config()).dump() + "\n";
  out += "taxonomy " + std::to_string(model.classes()) + "\n";
  out += syntactic::taxonomy_to_tsv(model.taxonomy());
  out += tensor_line("candidates.semantic", model.candidate_semantic());
  out += tensor_line("candidates.syntactic", model.candidate_syntactic());
  for (const Parameter* p : m.all_parameters()) out += tensor_line(p->name, p->value);
  out += "end\n";
  return out;
}

inline MapperModel deserialize(const std::string& text, const std::string& source = "model") {
  const auto lines = io::lines_of(text);
  std::size_t i = 0;
  auto next = [&](const char* what) -> const std::string& {
    if (i >= lines.size()) throw FormatError(source + ": truncated before " + what);
    return lines[i++];
  };
  auto expect_prefix = [&](const std::string& line, const std::string& prefix) {
    if (line.rfind(prefix, 0) != 0) {
      throw FormatError(source + " line " + std::to_string(i) + ": expected '" + prefix + "'");
    }
    return line.substr(prefix.size());
  };
  if (next("header") != kArtifactHeader) throw FormatError(source + ": not a model artifact (bad header)");
  const std::string version = expect_prefix(next("taxonomy version"), "taxonomy_version ");
  nlohmann::json cfg_json;
  try {
    cfg_json = nlohmann::json::parse(expect_prefix(next("config"), "config "));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(source + ": config is not valid JSON: " + e.what());
  }
  const ModelConfig config = model_config_from_json(cfg_json);
  const auto y = static_cast<std::size_t>(
      io::parse_double(expect_prefix(next("taxonomy"), "taxonomy "), "taxonomy size"));
  std::vector<std::string> tax_lines;
  for (std::size_t k = 0; k < y; ++k) tax_lines.push_back(next("taxonomy rows"));
  Taxonomy taxonomy = syntactic::parse_taxonomy(tax_lines, source);
  if (taxonomy.size() != y) throw FormatError(source + ": taxonomy row count mismatch");
  if (taxonomy.version() != version) {
    throw FormatError(source + ": taxonomy hash " + taxonomy.version() + " does not match recorded " + version);
  }

  auto read_tensor = [&](const std::string& name, const numerics::Shape& shape) {
    const std::string line = next(name.c_str());
    const std::string rest = expect_prefix(line, "tensor " + name + " ");
    const auto tab = rest.find('\t');
    if (tab == std::string::npos) throw FormatError(source + ": tensor " + name + " has no values");
    numerics::Shape got;
    for (auto d : io::split(std::string_view(rest).substr(0, tab), 'x')) {
      got.push_back(static_cast<std::size_t>(io::parse_double(d, name)));
    }
    if (got != shape) {
      throw FormatError(source + ": tensor " + name + " has shape " + numerics::shape_string(got) +
                        ", expected " + numerics::shape_string(shape));
    }
    const auto values = io::split_numbers(std::string_view(rest).substr(tab + 1), name);
    if (values.size() != numerics::shape_numel(shape)) {
      throw FormatError(source + ": tensor " + name + " has " + std::to_string(values.size()) +
                        " values, expected " + std::to_string(numerics::shape_numel(shape)));
    }
    return Tensor(shape, values);
  };
  Tensor v_b = read_tensor("candidates.semantic", {y, config.d_b});
  Tensor v_s = read_tensor("candidates.syntactic", {y, y});
  MapperModel model(std::move(taxonomy), config, v_b, v_s);
  for (Parameter* p : model.all_parameters()) {
    p->value = read_tensor(p->name, p->value.shape());
    p->value.requires_grad = true;
  }
  if (next("end") != "end") throw FormatError(source + ": missing end marker");
  return model;
}

inline void save_model(const MapperModel& model, const std::filesystem::path& path) {
  io::atomic_write(path, serialize(model));
}

inline MapperModel load_model(const std::filesystem::path& path) {
  return deserialize(io::read_file(path), path.string());
}

// ------------------------------------------------------------ labeled data

struct LabeledTitle {
  std::string title;  // canonical raw title
  std::size_t label;  // taxonomy index
};

// "raw<TAB>standard" rows; the standard title must be in the taxonomy.
inline std::vector<LabeledTitle> parse_labels(const std::vector<std::string>& lines,
                                              const Taxonomy& taxonomy, const std::string& source) {
  std::vector<LabeledTitle> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    const std::string where = source + " line " + std::to_string(i + 1);
    const auto cols = io::split(lines[i], '\t');
    if (cols.size() != 2) throw FormatError(where + ": expected raw_title<TAB>standard_title");
    try {
      const std::string raw = graph::canonicalize_title(cols[0]);
      const auto k = taxonomy.index_of(graph::canonicalize_title(cols[1]));
      if (!k) throw DataError(where + ": '" + std::string(cols[1]) + "' is not in the taxonomy");
      out.push_back({raw, *k});
    } catch (const DegenerateInputError&) {
      throw DataError(where + ": empty title");
    }
  }
  if (out.empty()) throw DataError(source + ": no labeled titles");
  return out;
}

inline std::vector<LabeledTitle> read_labels(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  return parse_labels(io::read_lines(path), taxonomy, path.string());
}

}  // namespace jtm::model
