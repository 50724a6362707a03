// crf.hpp
// Linear-chain conditional random field over the 7 BIO tags: potential
// scoring, forward-backward, Viterbi decoding, and maximum-likelihood
// training with a Gaussian (L2) prior.
//
// All lattice arithmetic is done in the log domain with log-sum-exp, so
// partition functions stay finite for any finite weights. The parameter
// vector is laid out as
//   [ n_features x 7 emission | 7 x 7 transition | 7 start | 7 stop ]
// and the feature space is pruned to features observed in training data;
// unseen test-time features simply contribute nothing.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdm/corpus.hpp"
#include "tdm/errors.hpp"
#include "tdm/features.hpp"
#include "tdm/optim.hpp"

namespace tdm {

struct TrainConfig {
  double l2_variance = 1.0;  // sigma^2 of the Gaussian prior
  int max_iterations = 200;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (!(l2_variance > 0)) throw InvalidInput("l2_variance must be > 0");
    if (!(tolerance > 0)) throw InvalidInput("tolerance must be > 0");
    if (max_iterations < 1) throw InvalidInput("max_iterations must be >= 1");
    if (threads < 1) throw InvalidInput("threads must be >= 1");
  }
};

struct TrainReport {
  int iterations = 0;
  double final_objective = 0.0;  // regularized log-likelihood
  double gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;
  long long sentence_count = 0;
  long long feature_count = 0;
};

// ---------------------------------------------------------------------------
// Model

class CrfModel {
 public:
  static constexpr int kFormatVersion = 1;
  static constexpr int kLabels = kNumBioTags;

  CrfModel() : CrfModel(FeatureConfig{}, {}) {}

  CrfModel(FeatureConfig config, std::vector<std::string> feature_names)
      : config_(std::move(config)), feature_names_(std::move(feature_names)) {
    std::sort(feature_names_.begin(), feature_names_.end());
    feature_names_.erase(
        std::unique(feature_names_.begin(), feature_names_.end()),
        feature_names_.end());
    for (std::size_t i = 0; i < feature_names_.size(); ++i)
      feature_index_[feature_names_[i]] = static_cast<int>(i);
    weights_.assign(parameter_count(), 0.0);
  }

  const FeatureConfig& config() const { return config_; }
  const std::vector<std::string>& feature_names() const {
    return feature_names_;
  }
  int feature_count() const { return static_cast<int>(feature_names_.size()); }

  std::optional<int> feature_index(std::string_view name) const {
    auto it = feature_index_.find(std::string(name));
    if (it == feature_index_.end()) return std::nullopt;
    return it->second;
  }

  int parameter_count() const {
    return feature_count() * kLabels + kLabels * kLabels + 2 * kLabels;
  }

  const std::vector<double>& weights() const { return weights_; }
  void set_weights(std::vector<double> w) {
    if (static_cast<int>(w.size()) != parameter_count())
      throw InvalidInput("set_weights: expected " +
                         std::to_string(parameter_count()) + " parameters, got " +
                         std::to_string(w.size()));
    weights_ = std::move(w);
  }
  void set_weight(int index, double value) { weights_.at(index) = value; }

  int emission_index(int feature, BioTag y) const {
    return feature * kLabels + static_cast<int>(y);
  }
  int transition_index(BioTag from, BioTag to) const {
    return feature_count() * kLabels + static_cast<int>(from) * kLabels +
           static_cast<int>(to);
  }
  int start_index(BioTag y) const {
    return feature_count() * kLabels + kLabels * kLabels + static_cast<int>(y);
  }
  int stop_index(BioTag y) const { return start_index(y) + kLabels; }

  double transition_weight(BioTag from, BioTag to) const {
    return weights_[transition_index(from, to)];
  }
  double start_weight(BioTag y) const { return weights_[start_index(y)]; }
  double stop_weight(BioTag y) const { return weights_[stop_index(y)]; }

  // Weight of a named feature under a tag; 0 for unseen features.
  double feature_weight(std::string_view name, BioTag y) const {
    const auto idx = feature_index(name);
    return idx ? weights_[emission_index(*idx, y)] : 0.0;
  }

  bool convergence_warning() const { return convergence_warning_; }
  void set_convergence_warning(bool v) { convergence_warning_ = v; }

  void check_finite() const {
    for (double w : weights_)
      if (!std::isfinite(w)) throw NumericalError("model weight is not finite");
  }

  // -- serialization --------------------------------------------------------

  nlohmann::json to_json() const {
    check_finite();
    nlohmann::json j;
    j["format"] = "tdm-crf-model";
    j["format_version"] = kFormatVersion;
    nlohmann::json labels = nlohmann::json::array();
    for (int y = 0; y < kLabels; ++y)
      labels.push_back(std::string(to_string(static_cast<BioTag>(y))));
    j["labels"] = labels;

    nlohmann::json cfg;
    cfg["use_pos"] = config_.use_pos;
    cfg["use_shape"] = config_.use_shape;
    cfg["char_ngram_lengths"] = config_.char_ngram_lengths;
    cfg["shape_window"] = config_.shape_window;
    cfg["pos_window"] = config_.pos_window;
    cfg["unknown_token"] = config_.unknown_token;
    nlohmann::json gazetteers = nlohmann::json::array();
    for (const auto& g : config_.gazetteers) {
      nlohmann::json gj;
      gj["name"] = g.name;
      gj["case_insensitive"] = g.match_case_insensitive;
      gj["phrases"] = g.phrases;
      gazetteers.push_back(std::move(gj));
    }
    cfg["gazetteers"] = std::move(gazetteers);
    j["config"] = std::move(cfg);

    j["features"] = feature_names_;
    const int nf = feature_count();
    j["weights"]["emission"] = std::vector<double>(
        weights_.begin(), weights_.begin() + nf * kLabels);
    j["weights"]["transition"] = std::vector<double>(
        weights_.begin() + nf * kLabels,
        weights_.begin() + nf * kLabels + kLabels * kLabels);
    j["weights"]["start"] = std::vector<double>(
        weights_.begin() + nf * kLabels + kLabels * kLabels,
        weights_.begin() + nf * kLabels + kLabels * kLabels + kLabels);
    j["weights"]["stop"] = std::vector<double>(
        weights_.begin() + nf * kLabels + kLabels * kLabels + kLabels,
        weights_.end());
    j["convergence_warning"] = convergence_warning_;
    return j;
  }

  std::string serialize() const { return to_json().dump(2) + "\n"; }

  static CrfModel from_json(const nlohmann::json& j) {
    try {
      if (j.at("format").get<std::string>() != "tdm-crf-model")
        throw FormatError("not a tdm-crf-model file");
      if (j.at("format_version").get<int>() != kFormatVersion)
        throw FormatError("model format version mismatch: expected " +
                          std::to_string(kFormatVersion) + ", found " +
                          j.at("format_version").dump());
      std::vector<std::string> labels =
          j.at("labels").get<std::vector<std::string>>();
      for (int y = 0; y < kLabels; ++y)
        if (labels.size() != kLabels ||
            labels[y] != to_string(static_cast<BioTag>(y)))
          throw FormatError("model label set mismatch");

      const auto& cfg = j.at("config");
      FeatureConfig config;
      config.use_pos = cfg.at("use_pos").get<bool>();
      config.use_shape = cfg.at("use_shape").get<bool>();
      config.char_ngram_lengths =
          cfg.at("char_ngram_lengths").get<std::vector<int>>();
      config.shape_window = cfg.at("shape_window").get<int>();
      config.pos_window = cfg.at("pos_window").get<int>();
      config.unknown_token = cfg.at("unknown_token").get<std::string>();
      for (const auto& gj : cfg.at("gazetteers")) {
        config.gazetteers.push_back(Gazetteer::from_phrases(
            gj.at("name").get<std::string>(),
            gj.at("phrases").get<std::vector<std::string>>(),
            gj.at("case_insensitive").get<bool>()));
      }

      CrfModel model(std::move(config),
                     j.at("features").get<std::vector<std::string>>());
      const auto& wj = j.at("weights");
      std::vector<double> w = wj.at("emission").get<std::vector<double>>();
      const auto transition = wj.at("transition").get<std::vector<double>>();
      const auto start = wj.at("start").get<std::vector<double>>();
      const auto stop = wj.at("stop").get<std::vector<double>>();
      w.insert(w.end(), transition.begin(), transition.end());
      w.insert(w.end(), start.begin(), start.end());
      w.insert(w.end(), stop.begin(), stop.end());
      model.set_weights(std::move(w));
      model.check_finite();
      if (j.contains("convergence_warning"))
        model.convergence_warning_ = j.at("convergence_warning").get<bool>();
      return model;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed model file: ") + e.what());
    }
  }

  static CrfModel deserialize(std::string_view text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("model file is not valid JSON: ") +
                        e.what());
    }
    return from_json(j);
  }

 private:
  FeatureConfig config_;
  std::vector<std::string> feature_names_;
  std::unordered_map<std::string, int> feature_index_;
  std::vector<double> weights_;
  bool convergence_warning_ = false;
};

// ---------------------------------------------------------------------------
// Lattice computations

namespace detail {

constexpr int kL = CrfModel::kLabels;

struct EncodedSentence {
  std::vector<std::vector<int>> features;  // active feature ids per position
  std::vector<int> gold;                   // gold tag per position (may be empty)
};

inline EncodedSentence encode_sentence(const CrfModel& model,
                                       const FeatureExtractor& extractor,
                                       const Sentence& s, bool with_gold) {
  EncodedSentence enc;
  const auto feats = extractor.sentence_features(s);
  enc.features.resize(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (const auto& f : feats[i])
      if (auto idx = model.feature_index(f)) enc.features[i].push_back(*idx);
  }
  if (with_gold) {
    const auto tags = to_bio(s);
    enc.gold.reserve(tags.size());
    for (BioTag t : tags) enc.gold.push_back(static_cast<int>(t));
  }
  return enc;
}

inline double log_sum_exp(const double* v, int n) {
  double m = v[0];
  for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;  // all -inf stays -inf
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// emission scores for one position, all labels
inline void emission_scores(const std::vector<double>& w, int n_features,
                            const std::vector<int>& active,
                            std::array<double, kL>& out) {
  (void)n_features;
  out.fill(0.0);
  for (int f : active) {
    const double* base = w.data() + static_cast<std::size_t>(f) * kL;
    for (int y = 0; y < kL; ++y) out[y] += base[y];
  }
}

struct Lattice {
  double log_partition = 0.0;
  std::vector<std::array<double, kL>> alpha;
  std::vector<std::array<double, kL>> beta;
  std::vector<std::array<double, kL>> emit;
};

inline Lattice run_forward_backward(const CrfModel& model,
                                    const EncodedSentence& enc) {
  const int T = static_cast<int>(enc.features.size());
  if (T == 0) throw InvalidInput("forward_backward: empty sentence");
  const auto& w = model.weights();
  const int nf = model.feature_count();
  const double* trans = w.data() + static_cast<std::size_t>(nf) * kL;
  const double* start = trans + kL * kL;
  const double* stop = start + kL;

  Lattice lat;
  lat.emit.resize(T);
  for (int i = 0; i < T; ++i)
    emission_scores(w, nf, enc.features[i], lat.emit[i]);

  lat.alpha.resize(T);
  for (int y = 0; y < kL; ++y) lat.alpha[0][y] = start[y] + lat.emit[0][y];
  std::array<double, kL> scratch;
  for (int i = 1; i < T; ++i) {
    for (int y = 0; y < kL; ++y) {
      for (int p = 0; p < kL; ++p)
        scratch[p] = lat.alpha[i - 1][p] + trans[p * kL + y];
      lat.alpha[i][y] = log_sum_exp(scratch.data(), kL) + lat.emit[i][y];
    }
  }
  for (int y = 0; y < kL; ++y) scratch[y] = lat.alpha[T - 1][y] + stop[y];
  lat.log_partition = log_sum_exp(scratch.data(), kL);
  if (!std::isfinite(lat.log_partition))
    throw NumericalError("log partition is not finite");

  lat.beta.resize(T);
  for (int y = 0; y < kL; ++y) lat.beta[T - 1][y] = stop[y];
  for (int i = T - 2; i >= 0; --i) {
    for (int y = 0; y < kL; ++y) {
      for (int q = 0; q < kL; ++q)
        scratch[q] = trans[y * kL + q] + lat.emit[i + 1][q] + lat.beta[i + 1][q];
      lat.beta[i][y] = log_sum_exp(scratch.data(), kL);
    }
  }
  return lat;
}

}  // namespace detail

// Unnormalized log potential of a full tag sequence: emission weights of
// active features plus transition, start and stop weights.
inline double sequence_score(const CrfModel& model, const Sentence& s,
                             const std::vector<BioTag>& tags) {
  if (tags.size() != s.tokens.size())
    throw InvalidInput("sequence_score: tag count does not match token count");
  const FeatureExtractor extractor(model.config());
  const auto enc = detail::encode_sentence(model, extractor, s, false);
  const auto& w = model.weights();
  double score = 0.0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const int y = static_cast<int>(tags[i]);
    for (int f : enc.features[i])
      score += w[static_cast<std::size_t>(f) * detail::kL + y];
    if (i == 0)
      score += model.start_weight(tags[0]);
    else
      score += model.transition_weight(tags[i - 1], tags[i]);
  }
  if (!tags.empty()) score += model.stop_weight(tags.back());
  return score;
}

struct Marginals {
  double log_partition = 0.0;
  // node[i][y]: posterior of label y at position i
  std::vector<std::array<double, detail::kL>> node;
  // edge[i][a][b]: posterior of (label a at i, label b at i+1)
  std::vector<std::array<std::array<double, detail::kL>, detail::kL>> edge;
};

inline Marginals forward_backward(const CrfModel& model, const Sentence& s) {
  if (s.tokens.empty()) throw InvalidInput("forward_backward: empty sentence");
  model.check_finite();
  const FeatureExtractor extractor(model.config());
  const auto enc = detail::encode_sentence(model, extractor, s, false);
  const auto lat = detail::run_forward_backward(model, enc);
  const int T = s.size();
  const auto& w = model.weights();
  const double* trans =
      w.data() + static_cast<std::size_t>(model.feature_count()) * detail::kL;

  Marginals m;
  m.log_partition = lat.log_partition;
  m.node.resize(T);
  for (int i = 0; i < T; ++i)
    for (int y = 0; y < detail::kL; ++y)
      m.node[i][y] = std::exp(lat.alpha[i][y] + lat.beta[i][y] - lat.log_partition);
  m.edge.resize(T - 1);
  for (int i = 0; i + 1 < T; ++i)
    for (int a = 0; a < detail::kL; ++a)
      for (int b = 0; b < detail::kL; ++b)
        m.edge[i][a][b] =
            std::exp(lat.alpha[i][a] + trans[a * detail::kL + b] +
                     lat.emit[i + 1][b] + lat.beta[i + 1][b] - lat.log_partition);
  return m;
}

struct ViterbiResult {
  std::vector<BioTag> tags;
  double score = 0.0;
};

// Max-product decoding. Ties are broken toward the smaller tag index at
// every step, so an all-zero model deterministically decodes to all O.
// With constrain_bio set, transitions into I-X from anything other than
// B-X/I-X (and I-X at the sentence start) are forbidden outright.
inline ViterbiResult viterbi(const CrfModel& model, const Sentence& s,
                             bool constrain_bio = false) {
  if (s.tokens.empty()) throw InvalidInput("viterbi: empty sentence");
  model.check_finite();
  constexpr int L = detail::kL;
  constexpr double kForbidden = -1e30;

  const FeatureExtractor extractor(model.config());
  const auto enc = detail::encode_sentence(model, extractor, s, false);
  const int T = static_cast<int>(enc.features.size());
  const auto& w = model.weights();
  const int nf = model.feature_count();
  const double* trans = w.data() + static_cast<std::size_t>(nf) * L;
  const double* start = trans + L * L;
  const double* stop = start + L;

  auto transition_allowed = [&](int from, int to) {
    if (!constrain_bio) return true;
    const BioTag t = static_cast<BioTag>(to);
    if (!is_inside(t)) return true;
    const auto lab = tag_label(t);
    const BioTag f = static_cast<BioTag>(from);
    return tag_label(f) == lab;
  };

  std::vector<std::array<double, L>> delta(T);
  std::vector<std::array<int, L>> back(T);
  std::array<double, L> emit;
  detail::emission_scores(w, nf, enc.features[0], emit);
  for (int y = 0; y < L; ++y) {
    const bool ok = !constrain_bio || !is_inside(static_cast<BioTag>(y));
    delta[0][y] = (ok ? start[y] : kForbidden) + emit[y];
    back[0][y] = -1;
  }
  for (int i = 1; i < T; ++i) {
    detail::emission_scores(w, nf, enc.features[i], emit);
    for (int y = 0; y < L; ++y) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int p = 0; p < L; ++p) {
        const double cand =
            delta[i - 1][p] +
            (transition_allowed(p, y) ? trans[p * L + y] : kForbidden);
        if (cand > best) {
          best = cand;
          arg = p;
        }
      }
      delta[i][y] = best + emit[y];
      back[i][y] = arg;
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (int y = 0; y < L; ++y) {
    const double cand = delta[T - 1][y] + stop[y];
    if (cand > best) {
      best = cand;
      arg = y;
    }
  }

  ViterbiResult result;
  result.tags.resize(T);
  for (int i = T - 1; i >= 0; --i) {
    result.tags[i] = static_cast<BioTag>(arg);
    arg = back[i][arg];
  }
  result.score = sequence_score(model, s, result.tags);
  return result;
}

// ---------------------------------------------------------------------------
// Training objective

struct Objective {
  double value = 0.0;            // regularized log-likelihood
  std::vector<double> gradient;  // same layout as the weight vector
};

namespace detail {

// Adds one sentence's log-likelihood to *value and its gradient into grad.
inline void accumulate_sentence(const std::vector<double>& w, int nf,
                                const EncodedSentence& enc, double* value,
                                std::vector<double>& grad) {
  const int T = static_cast<int>(enc.features.size());
  if (T == 0) return;
  const std::size_t trans_base = static_cast<std::size_t>(nf) * kL;
  const std::size_t start_base = trans_base + kL * kL;
  const std::size_t stop_base = start_base + kL;

  // forward-backward on raw arrays
  std::vector<std::array<double, kL>> emit(T), alpha(T), beta(T);
  for (int i = 0; i < T; ++i) emission_scores(w, nf, enc.features[i], emit[i]);
  std::array<double, kL> scratch;
  const double* trans = w.data() + trans_base;
  const double* start = w.data() + start_base;
  const double* stop = w.data() + stop_base;
  for (int y = 0; y < kL; ++y) alpha[0][y] = start[y] + emit[0][y];
  for (int i = 1; i < T; ++i)
    for (int y = 0; y < kL; ++y) {
      for (int p = 0; p < kL; ++p)
        scratch[p] = alpha[i - 1][p] + trans[p * kL + y];
      alpha[i][y] = log_sum_exp(scratch.data(), kL) + emit[i][y];
    }
  for (int y = 0; y < kL; ++y) scratch[y] = alpha[T - 1][y] + stop[y];
  const double log_z = log_sum_exp(scratch.data(), kL);
  if (!std::isfinite(log_z))
    throw NumericalError("log partition is not finite during training");
  for (int y = 0; y < kL; ++y) beta[T - 1][y] = stop[y];
  for (int i = T - 2; i >= 0; --i)
    for (int y = 0; y < kL; ++y) {
      for (int q = 0; q < kL; ++q)
        scratch[q] = trans[y * kL + q] + emit[i + 1][q] + beta[i + 1][q];
      beta[i][y] = log_sum_exp(scratch.data(), kL);
    }

  // gold score
  double gold_score = 0.0;
  for (int i = 0; i < T; ++i) {
    const int y = enc.gold[i];
    for (int f : enc.features[i])
      gold_score += w[static_cast<std::size_t>(f) * kL + y];
    gold_score += i == 0 ? start[y] : trans[enc.gold[i - 1] * kL + y];
  }
  gold_score += stop[enc.gold[T - 1]];
  *value += gold_score - log_z;

  // empirical minus expected counts
  for (int i = 0; i < T; ++i) {
    std::array<double, kL> post;
    for (int y = 0; y < kL; ++y)
      post[y] = std::exp(alpha[i][y] + beta[i][y] - log_z);
    for (int f : enc.features[i]) {
      double* base = grad.data() + static_cast<std::size_t>(f) * kL;
      base[enc.gold[i]] += 1.0;
      for (int y = 0; y < kL; ++y) base[y] -= post[y];
    }
    if (i == 0) {
      grad[start_base + enc.gold[0]] += 1.0;
      for (int y = 0; y < kL; ++y) grad[start_base + y] -= post[y];
    }
    if (i == T - 1) {
      grad[stop_base + enc.gold[T - 1]] += 1.0;
      for (int y = 0; y < kL; ++y) grad[stop_base + y] -= post[y];
    }
  }
  for (int i = 1; i < T; ++i) {
    grad[trans_base + enc.gold[i - 1] * kL + enc.gold[i]] += 1.0;
    for (int a = 0; a < kL; ++a) {
      const double left = alpha[i - 1][a];
      for (int b = 0; b < kL; ++b) {
        const double p =
            std::exp(left + trans[a * kL + b] + emit[i][b] + beta[i][b] - log_z);
        grad[trans_base + a * kL + b] -= p;
      }
    }
  }
}

// Evaluates the regularized log-likelihood and gradient over encoded
// sentences. Partial sums from worker threads are reduced in a fixed chunk
// order, so the result is reproducible for a given thread count.
inline Objective evaluate_objective(const std::vector<double>& w, int nf,
                                    const std::vector<EncodedSentence>& data,
                                    double l2_variance, int threads) {
  Objective obj;
  obj.gradient.assign(w.size(), 0.0);
  const int n = static_cast<int>(data.size());
  const int workers = std::max(1, std::min(threads, n == 0 ? 1 : n));

  if (workers == 1) {
    for (const auto& enc : data)
      accumulate_sentence(w, nf, enc, &obj.value, obj.gradient);
  } else {
    std::vector<double> values(workers, 0.0);
    std::vector<std::vector<double>> grads(
        workers, std::vector<double>(w.size(), 0.0));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t]() {
        try {
          const int lo = t * chunk;
          const int hi = std::min(n, lo + chunk);
          for (int i = lo; i < hi; ++i)
            accumulate_sentence(w, nf, data[i], &values[t], grads[t]);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (int t = 0; t < workers; ++t) {
      obj.value += values[t];
      for (std::size_t i = 0; i < w.size(); ++i)
        obj.gradient[i] += grads[t][i];
    }
  }

  for (std::size_t i = 0; i < w.size(); ++i) {
    obj.value -= w[i] * w[i] / (2.0 * l2_variance);
    obj.gradient[i] -= w[i] / l2_variance;
  }
  if (!std::isfinite(obj.value))
    throw NumericalError("objective is not finite");
  return obj;
}

}  // namespace detail

// Regularized log-likelihood of the corpus under the model, plus its
// gradient with respect to the model's weights.
inline Objective log_likelihood_and_gradient(const CrfModel& model,
                                             const Corpus& corpus,
                                             double l2_variance = 1.0,
                                             int threads = 1) {
  if (!(l2_variance > 0)) throw InvalidInput("l2_variance must be > 0");
  model.check_finite();
  const FeatureExtractor extractor(model.config());
  std::vector<detail::EncodedSentence> data;
  for (const auto& s : corpus.sentences) {
    if (s.tokens.empty()) continue;
    data.push_back(detail::encode_sentence(model, extractor, s, true));
  }
  return detail::evaluate_objective(model.weights(), model.feature_count(),
                                    data, l2_variance, threads);
}

// Trains a CRF by maximizing the L2-regularized log-likelihood with L-BFGS.
// The feature space is exactly the set of features observed in the training
// corpus. Fully deterministic for a fixed corpus order and configuration;
// if the iteration budget runs out the best model so far is returned with
// its convergence warning flag set.
inline CrfModel train(const Corpus& corpus, const FeatureConfig& feature_config,
                      const TrainConfig& train_config = {},
                      TrainReport* report = nullptr) {
  train_config.validate();
  const FeatureExtractor extractor(feature_config);

  std::vector<const Sentence*> usable;
  for (const auto& s : corpus.sentences)
    if (!s.tokens.empty()) usable.push_back(&s);
  if (usable.empty()) throw InvalidInput("train: corpus has no sentences");

  // Collect the observed feature vocabulary.
  std::vector<std::string> names;
  {
    std::set<std::string> seen;
    for (const Sentence* s : usable)
      for (const auto& position : extractor.sentence_features(*s))
        for (const auto& f : position) seen.insert(f);
    names.assign(seen.begin(), seen.end());
  }

  CrfModel model(feature_config, std::move(names));
  std::vector<detail::EncodedSentence> data;
  data.reserve(usable.size());
  for (const Sentence* s : usable)
    data.push_back(detail::encode_sentence(model, extractor, *s, true));

  const int nf = model.feature_count();
  auto objective = [&](const std::vector<double>& w,
                       std::vector<double>& grad) {
    // minimize the negated log-likelihood
    Objective obj = detail::evaluate_objective(
        w, nf, data, train_config.l2_variance, train_config.threads);
    grad.resize(obj.gradient.size());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = -obj.gradient[i];
    return -obj.value;
  };

  OptimOptions opt;
  opt.max_iterations = train_config.max_iterations;
  opt.tolerance = train_config.tolerance;
  OptimResult res = minimize_lbfgs(objective, std::vector<double>(
                                                  model.parameter_count(), 0.0),
                                   opt);
  model.set_weights(std::move(res.x));
  model.set_convergence_warning(!res.converged);

  if (report) {
    report->iterations = res.iterations;
    report->final_objective = -res.value;
    report->gradient_norm = res.gradient_norm;
    report->converged = res.converged;
    report->objective_trace.clear();
    for (double v : res.trace) report->objective_trace.push_back(-v);
    report->sentence_count = static_cast<long long>(data.size());
    report->feature_count = nf;
  }
  return model;
}

// Viterbi decode followed by BIO span recovery; IOB repairs are counted.
inline std::vector<EntitySpan> tag(const CrfModel& model, const Sentence& s,
                                   bool constrain_bio = false,
                                   int* repairs = nullptr) {
  if (s.tokens.empty()) return {};
  const auto decoded = viterbi(model, s, constrain_bio);
  return from_bio(s.tokens, decoded.tags, repairs);
}

}  // namespace tdm
