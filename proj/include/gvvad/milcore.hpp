#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gvvad/config.hpp"
#include "gvvad/datamodel.hpp"
#include "gvvad/numerics.hpp"
#include "gvvad/rng.hpp"

namespace gvvad {

/// Per-clip scorer D → H (ReLU) → 1 (sigmoid).
struct ScorerParams {
  MatrixXd w1;  // H x D
  VectorXd b1;  // H
  VectorXd w2;  // H, the single output row
  double b2 = 0.0;

  std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t size() const { return hidden() * dim() + 2 * hidden() + 1; }

  static constexpr double output_init_bound = 0.01;

  static ScorerParams zeros(std::size_t hidden, std::size_t dim);
  /// Xavier-uniform W1, W2 uniform in ±output_init_bound, zero biases.
  static ScorerParams initialize(std::size_t hidden, std::size_t dim, std::uint64_t seed);

  /// Layout: w1 (row-major), b1, w2, b2.
  VectorXd flatten() const;
  static ScorerParams unflatten(const Eigen::Ref<const VectorXd>& flat, std::size_t hidden, std::size_t dim);

  friend bool operator==(const ScorerParams& a, const ScorerParams& b) {
    return a.w1.rows() == b.w1.rows() && a.w1.cols() == b.w1.cols() && a.w1 == b.w1 && a.b1 == b.b1 &&
           a.w2 == b.w2 && a.b2 == b.b2;
  }
};

void save_params(const ScorerParams& params, const std::filesystem::path& path);
ScorerParams load_params(const std::filesystem::path& path);

/// How many top clips form the bag score.
struct TopKRule {
  enum class Kind { divisor, fixed, fraction };
  Kind kind = Kind::divisor;
  double value = 16.0;

  /// divisor: max(1, ⌊T/value⌋); fixed: min(value, T); fraction: max(1, ⌊value·T⌋).
  std::size_t k_for(std::size_t clips) const;
  /// Accepts `div:<n>`, `fixed:<k>`, `frac:<f>`.
  static TopKRule parse(const std::string& text);
  std::string to_string() const;
};

enum class SslsGranularity { pair, sample };

struct TrainConfig {
  double lambda = 0.5;
  bool lambda_learnable = false;
  /// Off: losses are summed without any scaling step.
  bool ssls_enabled = true;
  SslsGranularity granularity = SslsGranularity::pair;
  TopKRule k_rule;
  double lr = 1e-3;
  double weight_decay = 5e-3;
  std::size_t epochs = 30;
  std::size_t batch_pairs = 8;
  double clamp_eps = default_clamp_eps;
  std::size_t hidden = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<std::pair<std::string, std::string>> train_config_keys();
TrainConfig train_from_config(const RunConfig& cfg);
std::string serialize_train(const TrainConfig& config);

/// Forward pass intermediates for one video.
struct ScorerForward {
  MatrixXd input;      // T x D
  MatrixXd pre;        // T x H
  MatrixXd hidden;     // T x H
  VectorXd scores;     // T
};

ScorerForward forward(const ScorerParams& params, const FeatureSequence& features);

/// Per-clip anomaly scores in (0, 1).
VectorXd score_segments(const ScorerParams& params, const FeatureSequence& features);

/// Gradient of a scalar w.r.t. the parameters, given its gradient w.r.t. the scores.
ScorerParams backprop(const ScorerParams& params, const ScorerForward& fwd, const VectorXd& score_grad);

struct TopKSelection {
  double mean = 0.0;
  std::vector<std::size_t> indices;  // selected clips, best first
};

/// Mean of the k largest scores; ties go to the lower clip index.
TopKSelection topk_select(std::span<const double> scores, std::size_t k);
double topk_mean(std::span<const double> scores, std::size_t k);

/// bce(1, ŷ_a) + bce(0, ŷ_n).
double mil_loss(double y_hat_anomalous, double y_hat_normal, double clamp_eps = default_clamp_eps);

struct LossBreakdown {
  std::vector<double> raw;
  std::vector<double> scaled;
  std::vector<std::uint8_t> source;
  double total = 0.0;
  double mil = 0.0;  // unscaled sum of MIL terms
  double lap = 0.0;  // unscaled sum of LAP terms
  double lambda = 1.0;
};

/// L'_i = L_i for real entries and λ·L_i for synthetic ones; total sums L'_i
/// in ascending index order.
LossBreakdown ssls_scale(std::span<const double> raw_losses, std::span<const std::uint8_t> source_labels,
                         double lambda);

/// Additional loss term on one (anomalous, normal) pair of score vectors.
struct LapTerm {
  double value = 0.0;
  VectorXd grad_anomalous;  // d value / d anomalous scores (empty = zero)
  VectorXd grad_normal;
};
using LapHook = std::function<LapTerm(const VectorXd& scores_anomalous, const VectorXd& scores_normal)>;

/// Temporal smoothness penalty weight·Σ(s_t − s_{t−1})² on both videos. Used
/// to exercise the hook path in tests and the gradient check.
LapHook smoothness_hook(double weight);

struct VideoPair {
  const VideoSample* anomalous = nullptr;
  const VideoSample* normal = nullptr;
};

struct LossAndGrads {
  LossBreakdown loss;
  VectorXd grad;          // flat, ScorerParams layout
  double grad_rho = 0.0;  // d L_total / d ρ when λ = σ(ρ) is learnable
};

/// Exact L_total and its gradient. A pair counts as synthetic if either
/// member is. With a learnable λ, λ = σ(rho).
LossAndGrads total_loss_and_grads(const ScorerParams& params, std::span<const VideoPair> batch,
                                  const TrainConfig& config, const LapHook& lap_hook = {}, double rho = 0.0);

/// Effective λ for a config and the learnable logit.
double effective_lambda(const TrainConfig& config, double rho);

enum class FilterPolicy { none, centroid_distance };

struct FilterConfig {
  FilterPolicy policy = FilterPolicy::none;
  double percentile = 95.0;
};

struct Rejection {
  std::string id;
  double distance = 0.0;
  double threshold = 0.0;
};

struct FilterResult {
  std::vector<VideoSample> synthetic_anomalous;
  std::vector<VideoSample> synthetic_normal;
  std::vector<Rejection> rejected;
};

VectorXd mean_feature(const FeatureSequence& features);
/// Linear-interpolation percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Keeps a synthetic video iff its mean feature lies within the p-th
/// percentile of the real same-class distances to the real centroid.
FilterResult filter_synthetic(const std::vector<VideoSample>& real_anomalous,
                              const std::vector<VideoSample>& real_normal,
                              const std::vector<VideoSample>& synthetic_anomalous,
                              const std::vector<VideoSample>& synthetic_normal, const FilterConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_total = 0.0;  // mean L_total per step
  double mil_mean = 0.0;    // mean MIL term per pair
  double lap_mean = 0.0;    // mean LAP term per pair
  std::optional<double> val_auc;
  double lambda_effective = 1.0;
};

struct TrainResult {
  ScorerParams params;
  std::vector<EpochRecord> history;
  double rho = 0.0;
};

using Validator = std::function<double(const ScorerParams&)>;

/// The pairs formed for one epoch: same-source pairs first, leftovers
/// crossed, then shuffled together. Exposed for tests.
std::vector<VideoPair> epoch_pairs(const MixedDataset& dataset, Rng& rng);

TrainResult train(const MixedDataset& dataset, const TrainConfig& config, const LapHook& lap_hook = {},
                  const Validator& validator = {});

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace gvvad
