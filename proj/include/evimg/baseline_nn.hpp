#pragma once

// Fully connected baseline classifier trained on fixed-length feature vectors:
// ReLU hidden layers with inverted dropout, softmax cross-entropy, Adam.
// Templated on the scalar so training can run in float while gradient checks
// run in double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "error.hpp"
#include "event_model.hpp"
#include "random.hpp"

namespace evimg {

// ---------------------------------------------------------------------------
// Features

enum class FeatureLayout { Complex, Dimuon };

NLOHMANN_JSON_SERIALIZE_ENUM(FeatureLayout, {{FeatureLayout::Complex, "complex"},
                                             {FeatureLayout::Dimuon, "dimuon"}})

struct FeatureSpec {
  FeatureLayout layout = FeatureLayout::Complex;
  int max_jets = 6;
  double default_fill = 0.0;

  std::size_t length() const {
    if (layout == FeatureLayout::Dimuon) return 6;
    return 5 + 4 * static_cast<std::size_t>(max_jets) + 2;
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FeatureSpec, layout, max_jets, default_fill)

struct FeaturizeStats {
  std::size_t truncated_jets = 0;
};

/// Fixed-length numeric view of an event.
///
/// Complex layout: leading lepton [pT, eta, phi, is_electron, is_muon], then
/// max_jets slots of [pT, eta, phi, is_btagged] in descending pT, then
/// [|MET|, phi_MET]. Dimuon layout: the two leading muons' [pT, eta, phi] as
/// given. Missing slots hold default_fill.
inline std::vector<double> featurize(const Event& ev, const FeatureSpec& spec,
                                     FeaturizeStats* stats = nullptr) {
  std::vector<double> out(spec.length(), spec.default_fill);
  auto by_pt = [](const PhysicsObject* a, const PhysicsObject* b) { return a->pt > b->pt; };

  if (spec.layout == FeatureLayout::Dimuon) {
    std::vector<const PhysicsObject*> muons;
    for (const auto& o : ev.objects)
      if (o.kind == ObjectKind::Muon) muons.push_back(&o);
    std::stable_sort(muons.begin(), muons.end(), by_pt);
    for (std::size_t i = 0; i < std::min<std::size_t>(2, muons.size()); ++i) {
      out[3 * i] = muons[i]->pt;
      out[3 * i + 1] = muons[i]->eta;
      out[3 * i + 2] = muons[i]->phi;
    }
    return out;
  }

  std::vector<const PhysicsObject*> leptons, jets;
  const PhysicsObject* met = ev.met ? &*ev.met : nullptr;
  for (const auto& o : ev.objects) {
    if (is_lepton(o.kind)) leptons.push_back(&o);
    else if (is_jet(o.kind)) jets.push_back(&o);
    else if (o.kind == ObjectKind::MET && !met) met = &o;
  }
  std::stable_sort(leptons.begin(), leptons.end(), by_pt);
  std::stable_sort(jets.begin(), jets.end(), by_pt);
  if (!leptons.empty()) {
    const auto& l = *leptons.front();
    out[0] = l.pt;
    out[1] = l.eta;
    out[2] = l.phi;
    out[3] = l.kind == ObjectKind::Electron ? 1.0 : 0.0;
    out[4] = l.kind == ObjectKind::Muon ? 1.0 : 0.0;
  }
  const auto max_jets = static_cast<std::size_t>(spec.max_jets);
  if (jets.size() > max_jets && stats) stats->truncated_jets += jets.size() - max_jets;
  for (std::size_t i = 0; i < std::min(max_jets, jets.size()); ++i) {
    const std::size_t base = 5 + 4 * i;
    out[base] = jets[i]->pt;
    out[base + 1] = jets[i]->eta;
    out[base + 2] = jets[i]->phi;
    out[base + 3] = jets[i]->kind == ObjectKind::BJet ? 1.0 : 0.0;
  }
  if (met) {
    out[out.size() - 2] = met->pt;
    out[out.size() - 1] = met->phi;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Network

struct MlpConfig {
  int input_dim = 0;
  int hidden_layers = 5;
  int hidden_units = 500;
  double dropout_rate = 0.5;
  int n_classes = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int epochs = 40;
  std::uint64_t seed = 1;
  bool standardize = true;

  void validate() const {
    if (input_dim <= 0 || n_classes <= 0 || hidden_units <= 0 || hidden_layers < 0)
      throw ConfigError("mlp: dimensions must be > 0");
    if (!(dropout_rate >= 0 && dropout_rate < 1)) throw ConfigError("mlp: dropout_rate in [0, 1)");
    if (batch_size <= 0 || epochs < 0) throw ConfigError("mlp: bad batch_size/epochs");
    if (!(learning_rate > 0)) throw ConfigError("mlp: learning_rate must be > 0");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MlpConfig, input_dim, hidden_layers, hidden_units,
                                                dropout_rate, n_classes, learning_rate, beta1,
                                                beta2, epsilon, batch_size, epochs, seed,
                                                standardize)

enum class Mode { Train, Infer };

template <class Scalar>
struct MlpGradients {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

template <class Scalar>
struct ForwardCache {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  /// Input of each layer (after ReLU and dropout for hidden layers).
  std::vector<Matrix> inputs;
  /// Pre-activation of each hidden layer.
  std::vector<Matrix> pre;
  /// Dropout keep masks, already scaled by 1/(1-p); empty in infer mode.
  std::vector<Matrix> masks;
  Matrix logits;
  std::uint64_t model_version = 0;
};

template <class Scalar>
class Mlp {
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Mlp() = default;

  /// Uniform fan-in initialisation, U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
  explicit Mlp(const MlpConfig& cfg) : config_(cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "mlp.init"));
    std::vector<int> dims{cfg.input_dim};
    for (int i = 0; i < cfg.hidden_layers; ++i) dims.push_back(cfg.hidden_units);
    dims.push_back(cfg.n_classes);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const double bound = std::sqrt(6.0 / dims[l]);
      Matrix w(dims[l], dims[l + 1]);
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r)
          w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
      weights_.push_back(std::move(w));
      biases_.push_back(Vector::Zero(dims[l + 1]));
    }
    reset_optimizer();
    feature_mean_ = Vector::Zero(cfg.input_dim);
    feature_scale_ = Vector::Ones(cfg.input_dim);
  }

  const MlpConfig& config() const { return config_; }
  std::size_t layer_count() const { return weights_.size(); }
  Matrix& weight(std::size_t l) { return weights_[l]; }
  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  Vector& bias(std::size_t l) { return biases_[l]; }
  const Vector& bias(std::size_t l) const { return biases_[l]; }
  std::uint64_t step() const { return step_; }
  std::uint64_t version() const { return version_; }
  /// Call after editing parameters by hand so outstanding caches go stale.
  void touch() { ++version_; }

  const MlpGradients<Scalar>& first_moment() const { return m_; }
  const MlpGradients<Scalar>& second_moment() const { return v_; }

  const Vector& feature_mean() const { return feature_mean_; }
  const Vector& feature_scale() const { return feature_scale_; }

  /// Per-feature mean/std from the given rows; constant features keep scale 1.
  void fit_standardization(const Matrix& x) {
    feature_mean_ = x.colwise().mean().transpose();
    feature_scale_ = Vector::Ones(x.cols());
    if (x.rows() < 2) return;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const Scalar var = (x.col(c).array() - feature_mean_(c)).square().mean();
      if (var > Scalar(0)) feature_scale_(c) = std::sqrt(var);
    }
  }

  Matrix standardized(const Matrix& x) const {
    return (x.rowwise() - feature_mean_.transpose()).array().rowwise() /
           feature_scale_.transpose().array();
  }

  void set_standardization(Vector mean, Vector scale) {
    feature_mean_ = std::move(mean);
    feature_scale_ = std::move(scale);
  }

  void reset_optimizer() {
    m_.weights.clear();
    m_.biases.clear();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      m_.weights.push_back(Matrix::Zero(weights_[l].rows(), weights_[l].cols()));
      m_.biases.push_back(Vector::Zero(biases_[l].size()));
    }
    v_ = m_;
    step_ = 0;
  }

  bool operator==(const Mlp& o) const {
    if (weights_.size() != o.weights_.size() || step_ != o.step_) return false;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      if (weights_[l] != o.weights_[l] || biases_[l] != o.biases_[l]) return false;
    return feature_mean_ == o.feature_mean_ && feature_scale_ == o.feature_scale_;
  }

private:
  template <class S>
  friend void adam_step(Mlp<S>&, const MlpGradients<S>&, const MlpConfig&);
  template <class S>
  friend Mlp<S> mlp_from_json(const nlohmann::json&);

  MlpConfig config_;
  std::vector<Matrix> weights_; // layer l maps rows of width in_l to width out_l
  std::vector<Vector> biases_;
  MlpGradients<Scalar> m_, v_;
  std::uint64_t step_ = 0;
  std::uint64_t version_ = 0;
  Vector feature_mean_, feature_scale_;
};

/// Forward pass on a batch (one sample per row).
///
/// In train mode each hidden activation is multiplied by a keep mask drawn
/// from `rng` with probability 1-p and scaled by 1/(1-p); infer mode applies
/// neither, and rng may be null.
template <class Scalar>
ForwardCache<Scalar> forward(const Mlp<Scalar>& model,
                             const typename Mlp<Scalar>::Matrix& batch, Mode mode, Rng* rng) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  if (batch.cols() != model.config().input_dim)
    throw InvalidInput("forward: batch width " + std::to_string(batch.cols()) +
                       " != input_dim " + std::to_string(model.config().input_dim));
  const double p = model.config().dropout_rate;
  const bool drop = mode == Mode::Train && p > 0;
  if (drop && !rng) throw InvalidInput("forward: train mode with dropout needs an rng");
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - p));

  ForwardCache<Scalar> cache;
  cache.model_version = model.version();
  cache.inputs.push_back(batch);
  const std::size_t n_layers = model.layer_count();
  for (std::size_t l = 0; l < n_layers; ++l) {
    Matrix z = cache.inputs.back() * model.weight(l);
    z.rowwise() += model.bias(l).transpose();
    if (l + 1 == n_layers) {
      cache.logits = std::move(z);
      break;
    }
    Matrix a = z.cwiseMax(Scalar(0));
    cache.pre.push_back(std::move(z));
    if (drop) {
      Matrix mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
          mask(r, c) = rng->bernoulli(p) ? Scalar(0) : keep_scale;
      a.array() *= mask.array();
      cache.masks.push_back(std::move(mask));
    }
    cache.inputs.push_back(std::move(a));
  }
  return cache;
}

/// Row-wise softmax with max subtraction.
template <class Derived>
auto softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> p =
      (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

/// Mean over rows of -log softmax(logits)[label].
template <class Derived>
double loss_softmax_xent(const Eigen::MatrixBase<Derived>& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw InvalidInput("loss_softmax_xent: label count mismatch");
  if (labels.empty()) return 0.0;
  double total = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= logits.cols()) throw InvalidInput("loss_softmax_xent: label out of range");
    const double mx = static_cast<double>(logits.row(r).maxCoeff());
    double s = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      s += std::exp(static_cast<double>(logits(r, c)) - mx);
    total += -(static_cast<double>(logits(r, y)) - mx - std::log(s));
  }
  return total / static_cast<double>(logits.rows());
}

/// Gradient of the mean softmax cross-entropy with respect to every parameter,
/// reusing the activations and dropout masks of `cache`.
template <class Scalar>
MlpGradients<Scalar> backward(const Mlp<Scalar>& model, const ForwardCache<Scalar>& cache,
                              const std::vector<int>& labels) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  if (cache.model_version != model.version())
    throw InvalidInput("backward: cache was produced by a different model state");
  const auto batch = cache.logits.rows();
  if (static_cast<std::size_t>(batch) != labels.size())
    throw InvalidInput("backward: label count mismatch");
  const std::size_t n_layers = model.layer_count();

  Matrix delta = softmax_rows(cache.logits);
  for (Eigen::Index r = 0; r < batch; ++r) {
    const int y = labels[r];
    if (y < 0 || y >= delta.cols()) throw InvalidInput("backward: label out of range");
    delta(r, y) -= Scalar(1);
  }
  delta /= static_cast<Scalar>(batch);

  MlpGradients<Scalar> g;
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    g.weights[l].noalias() = cache.inputs[l].transpose() * delta;
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix upstream = delta * model.weight(l).transpose();
    upstream.array() *= (cache.pre[l - 1].array() > Scalar(0)).template cast<Scalar>();
    if (!cache.masks.empty()) upstream.array() *= cache.masks[l - 1].array();
    delta = std::move(upstream);
  }
  return g;
}

/// One bias-corrected Adam update; increments the step counter.
template <class Scalar>
void adam_step(Mlp<Scalar>& model, const MlpGradients<Scalar>& grads, const MlpConfig& cfg) {
  model.step_ += 1;
  const double t = static_cast<double>(model.step_);
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, t));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, t));
  const auto lr = static_cast<Scalar>(cfg.learning_rate);
  const auto eps = static_cast<Scalar>(cfg.epsilon);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < model.weights_.size(); ++l) {
    update(model.weights_[l], model.m_.weights[l], model.v_.weights[l], grads.weights[l]);
    update(model.biases_[l], model.m_.biases[l], model.v_.biases[l], grads.biases[l]);
  }
  ++model.version_;
}

template <class Scalar>
std::vector<int> argmax_rows(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best;
    m.row(r).maxCoeff(&best);
    out[r] = static_cast<int>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

template <class Scalar>
struct LabelledSet {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
};

template <class Scalar>
LabelledSet<Scalar> make_set(const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels) {
  if (rows.size() != labels.size()) throw InvalidInput("make_set: row/label count mismatch");
  LabelledSet<Scalar> s;
  const Eigen::Index width = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  s.x.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != width)
      throw InvalidInput("make_set: ragged rows");
    for (Eigen::Index c = 0; c < width; ++c) s.x(r, c) = static_cast<Scalar>(rows[r][c]);
  }
  s.y = labels;
  return s;
}

struct EpochStats {
  int epoch = 0; // 1-based
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
};

struct Evaluation {
  double loss = 0;
  double accuracy = 0;
  std::vector<int> predictions;
};

/// Infer-mode loss/accuracy on standardized-as-needed raw features.
template <class Scalar>
Evaluation evaluate(const Mlp<Scalar>& model, const LabelledSet<Scalar>& set,
                    Eigen::Index chunk = 2048) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  Evaluation ev;
  if (set.size() == 0) return ev;
  double loss_sum = 0;
  std::size_t correct = 0;
  for (Eigen::Index start = 0; start < set.x.rows(); start += chunk) {
    const Eigen::Index n = std::min(chunk, set.x.rows() - start);
    Matrix xb = set.x.middleRows(start, n);
    if (model.config().standardize) xb = model.standardized(xb);
    auto cache = forward(model, xb, Mode::Infer, nullptr);
    std::vector<int> yb(set.y.begin() + start, set.y.begin() + start + n);
    loss_sum += loss_softmax_xent(cache.logits, yb) * static_cast<double>(n);
    auto pred = argmax_rows<Scalar>(cache.logits);
    for (Eigen::Index i = 0; i < n; ++i) correct += pred[i] == yb[i];
    ev.predictions.insert(ev.predictions.end(), pred.begin(), pred.end());
  }
  ev.loss = loss_sum / static_cast<double>(set.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return ev;
}

/// Class probabilities for each row.
template <class Scalar>
typename Mlp<Scalar>::Matrix predict_proba(const Mlp<Scalar>& model,
                                           const typename Mlp<Scalar>::Matrix& x) {
  const auto xs = model.config().standardize ? model.standardized(x) : x;
  return softmax_rows(forward(model, xs, Mode::Infer, nullptr).logits);
}

template <class Scalar>
struct TrainResult {
  Mlp<Scalar> model;
  std::vector<EpochStats> history;
};

/// Mini-batch training. One shuffle stream and one dropout stream, both
/// derived from cfg.seed, so a fixed config reproduces the weights exactly.
/// `on_epoch` may return false to stop early.
template <class Scalar>
TrainResult<Scalar> train(const LabelledSet<Scalar>& train_set, const LabelledSet<Scalar>& val_set,
                          const MlpConfig& cfg,
                          const std::function<bool(const EpochStats&)>& on_epoch = {}) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  cfg.validate();
  if (train_set.size() == 0) throw InvalidInput("train: empty training split");
  if (val_set.size() == 0) throw InvalidInput("train: empty validation split");
  if (train_set.x.cols() != cfg.input_dim || val_set.x.cols() != cfg.input_dim)
    throw InvalidInput("train: feature width does not match input_dim");
  for (int y : train_set.y)
    if (y < 0 || y >= cfg.n_classes) throw InvalidInput("train: label out of range");

  TrainResult<Scalar> result{Mlp<Scalar>(cfg), {}};
  auto& model = result.model;
  if (cfg.standardize) model.fit_standardization(train_set.x);
  const Matrix x_train = cfg.standardize ? model.standardized(train_set.x) : train_set.x;

  Rng shuffle_rng(derive_seed(cfg.seed, "mlp.shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "mlp.dropout"));
  std::vector<Eigen::Index> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      Matrix xb(static_cast<Eigen::Index>(n), x_train.cols());
      std::vector<int> yb(n);
      for (std::size_t i = 0; i < n; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = x_train.row(order[start + i]);
        yb[i] = train_set.y[static_cast<std::size_t>(order[start + i])];
      }
      auto cache = forward(model, xb, Mode::Train, &dropout_rng);
      adam_step(model, backward(model, cache, yb), cfg);
    }
    EpochStats s;
    s.epoch = epoch;
    const auto tr = evaluate(model, train_set);
    const auto va = evaluate(model, val_set);
    s.train_loss = tr.loss;
    s.train_acc = tr.accuracy;
    s.val_loss = va.loss;
    s.val_acc = va.accuracy;
    result.history.push_back(s);
    if (on_epoch && !on_epoch(s)) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr const char* kModelFormat = "evimg-mlp";
inline constexpr int kModelFormatVersion = 1;

template <class Scalar>
nlohmann::json mlp_to_json(const Mlp<Scalar>& model) {
  auto flat = [](const auto& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(static_cast<double>(m(r, c)));
    return v;
  };
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelFormatVersion;
  j["scalar"] = sizeof(Scalar) == 4 ? "float32" : "float64";
  j["config"] = model.config();
  j["step"] = model.step();
  j["feature_mean"] = flat(model.feature_mean());
  j["feature_scale"] = flat(model.feature_scale());
  j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < model.layer_count(); ++l)
    j["layers"].push_back({{"rows", model.weight(l).rows()},
                           {"cols", model.weight(l).cols()},
                           {"weights", flat(model.weight(l))},
                           {"bias", flat(model.bias(l))}});
  return j;
}

template <class Scalar>
Mlp<Scalar> mlp_from_json(const nlohmann::json& j) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  using Vector = typename Mlp<Scalar>::Vector;
  if (j.value("format", std::string{}) != kModelFormat)
    throw ConfigError("model file: unknown format");
  if (j.value("version", 0) != kModelFormatVersion)
    throw ConfigError("model file: unsupported version");
  const auto cfg = j.at("config").get<MlpConfig>();
  Mlp<Scalar> model(cfg);
  const auto& layers = j.at("layers");
  if (layers.size() != model.layer_count()) throw ConfigError("model file: layer count mismatch");
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto w = layers[l].at("weights").get<std::vector<double>>();
    const auto b = layers[l].at("bias").get<std::vector<double>>();
    Matrix& wm = model.weights_[l];
    Vector& bv = model.biases_[l];
    if (w.size() != static_cast<std::size_t>(wm.size()) ||
        b.size() != static_cast<std::size_t>(bv.size()))
      throw ConfigError("model file: layer " + std::to_string(l) + " has the wrong shape");
    for (Eigen::Index r = 0; r < wm.rows(); ++r)
      for (Eigen::Index c = 0; c < wm.cols(); ++c)
        wm(r, c) = static_cast<Scalar>(w[static_cast<std::size_t>(r * wm.cols() + c)]);
    for (Eigen::Index i = 0; i < bv.size(); ++i) bv(i) = static_cast<Scalar>(b[static_cast<std::size_t>(i)]);
  }
  auto vec = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(cfg.input_dim))
      throw ConfigError(std::string("model file: bad ") + key);
    Vector out(cfg.input_dim);
    for (int i = 0; i < cfg.input_dim; ++i) out(i) = static_cast<Scalar>(v[static_cast<std::size_t>(i)]);
    return out;
  };
  model.feature_mean_ = vec("feature_mean");
  model.feature_scale_ = vec("feature_scale");
  model.step_ = j.value("step", std::uint64_t{0});
  return model;
}

/// CSV with one row per epoch.
inline std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (const auto& s : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", s.epoch, s.train_loss, s.train_acc,
                  s.val_loss, s.val_acc);
    out += buf;
  }
  return out;
}

} // namespace evimg
