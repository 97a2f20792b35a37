#include "gvvad/milcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "gvvad/errors.hpp"
#include "text_util.hpp"

namespace gvvad {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Parameters

ScorerParams ScorerParams::zeros(std::size_t hidden, std::size_t dim) {
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto d = static_cast<Eigen::Index>(dim);
  return {MatrixXd::Zero(h, d), VectorXd::Zero(h), VectorXd::Zero(h), 0.0};
}

ScorerParams ScorerParams::initialize(std::size_t hidden, std::size_t dim, std::uint64_t seed) {
  auto p = zeros(hidden, dim);
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(hidden + dim));
  // A near-flat initial scorer lets the first top-k selections follow the data
  // instead of a random ranking that can hide the anomalous clips for good.
  const double a2 = output_init_bound;
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = a1 * (2.0 * rng.uniform() - 1.0);
  }
  for (auto& w : p.w2) w = a2 * (2.0 * rng.uniform() - 1.0);
  return p;
}

VectorXd ScorerParams::flatten() const {
  VectorXd flat(static_cast<Eigen::Index>(size()));
  Eigen::Index i = 0;
  for (Eigen::Index r = 0; r < w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < w1.cols(); ++c) flat[i++] = w1(r, c);
  }
  flat.segment(i, b1.size()) = b1;
  i += b1.size();
  flat.segment(i, w2.size()) = w2;
  i += w2.size();
  flat[i] = b2;
  return flat;
}

ScorerParams ScorerParams::unflatten(const Eigen::Ref<const VectorXd>& flat, std::size_t hidden, std::size_t dim) {
  auto p = zeros(hidden, dim);
  if (static_cast<std::size_t>(flat.size()) != p.size()) {
    throw ShapeError("parameter vector of length " + std::to_string(flat.size()) + " does not fit a " +
                     std::to_string(hidden) + "x" + std::to_string(dim) + " scorer");
  }
  Eigen::Index i = 0;
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = flat[i++];
  }
  p.b1 = flat.segment(i, p.b1.size());
  i += p.b1.size();
  p.w2 = flat.segment(i, p.w2.size());
  i += p.w2.size();
  p.b2 = flat[i];
  return p;
}

void save_params(const ScorerParams& params, const fs::path& path) {
  const VectorXd flat = params.flatten();
  std::vector<char> payload;
  payload.reserve(static_cast<std::size_t>(flat.size()) * 8);
  for (const double v : flat) detail::put_f64(payload, v);
  detail::write_envelope(path, "GVPM", static_cast<std::uint32_t>(params.hidden()),
                         static_cast<std::uint32_t>(params.dim()), payload);
}

ScorerParams load_params(const fs::path& path) {
  auto env = detail::read_envelope(path, "GVPM", [](std::uint64_t h, std::uint64_t d) { return 8 * (h * d + 2 * h + 1); });
  if (env.rows == 0 || env.cols == 0) throw IntegrityError(path.string() + ": empty scorer shape");
  VectorXd flat(static_cast<Eigen::Index>(env.payload.size() / 8));
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = detail::get_f64(env.payload.data() + 8 * i);
  if (!flat.allFinite()) throw IntegrityError(path.string() + ": non-finite parameter");
  return ScorerParams::unflatten(flat, env.rows, env.cols);
}

// ---------------------------------------------------------------------------
// Configuration

std::size_t TopKRule::k_for(std::size_t clips) const {
  if (clips == 0) throw ValidationError("top-k on an empty bag");
  const double t = static_cast<double>(clips);
  std::size_t k = 1;
  switch (kind) {
    case Kind::divisor: k = static_cast<std::size_t>(std::floor(t / value)); break;
    case Kind::fixed: k = static_cast<std::size_t>(value); break;
    case Kind::fraction: k = static_cast<std::size_t>(std::floor(value * t)); break;
  }
  return std::clamp<std::size_t>(k, 1, clips);
}

TopKRule TopKRule::parse(const std::string& text) {
  const auto colon = text.find(':');
  const auto value = colon == std::string::npos ? std::nullopt : detail::parse_double(text.substr(colon + 1));
  const std::string kind = text.substr(0, colon);
  TopKRule rule;
  if (value && *value > 0) {
    rule.value = *value;
    if (kind == "div") { rule.kind = Kind::divisor; return rule; }
    if (kind == "fixed" && *value == std::floor(*value)) { rule.kind = Kind::fixed; return rule; }
    if (kind == "frac" && *value <= 1.0) { rule.kind = Kind::fraction; return rule; }
  }
  throw ValidationError("k_rule must be div:<n>, fixed:<k> or frac:<f in (0,1]>, got '" + text + "'");
}

std::string TopKRule::to_string() const {
  switch (kind) {
    case Kind::divisor: return "div:" + detail::format_double(value);
    case Kind::fixed: return "fixed:" + detail::format_double(value);
    case Kind::fraction: return "frac:" + detail::format_double(value);
  }
  return {};
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be >= 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_pairs < 1) throw ValidationError("batch_pairs must be >= 1");
  if (hidden < 1) throw ValidationError("hidden must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ValidationError("clamp_eps must be in (0, 0.5)");
}

std::vector<std::pair<std::string, std::string>> train_config_keys() {
  const TrainConfig d;
  auto num = [](double v) { return detail::format_double(v); };
  return {
      {"lambda", num(d.lambda)},
      {"lambda_learnable", "false"},
      {"ssls", "true"},
      {"ssls_granularity", "pair"},
      {"k_rule", d.k_rule.to_string()},
      {"lr", num(d.lr)},
      {"weight_decay", num(d.weight_decay)},
      {"epochs", std::to_string(d.epochs)},
      {"batch_pairs", std::to_string(d.batch_pairs)},
      {"clamp_eps", num(d.clamp_eps)},
      {"hidden", std::to_string(d.hidden)},
  };
}

TrainConfig train_from_config(const RunConfig& cfg) {
  TrainConfig c;
  const auto& lambda = cfg.get("lambda");
  if (lambda == "learnable") {
    c.lambda_learnable = true;
  } else {
    c.lambda = cfg.get_double("lambda");
    c.lambda_learnable = cfg.get_bool("lambda_learnable");
  }
  c.ssls_enabled = cfg.get_bool("ssls");
  const auto& granularity = cfg.get("ssls_granularity");
  if (granularity == "pair") c.granularity = SslsGranularity::pair;
  else if (granularity == "sample") c.granularity = SslsGranularity::sample;
  else throw ValidationError("ssls_granularity must be pair or sample, got '" + granularity + "'");
  c.k_rule = TopKRule::parse(cfg.get("k_rule"));
  c.lr = cfg.get_double("lr");
  c.weight_decay = cfg.get_double("weight_decay");
  c.epochs = cfg.get_uint("epochs");
  c.batch_pairs = cfg.get_uint("batch_pairs");
  c.clamp_eps = cfg.get_double("clamp_eps");
  c.hidden = cfg.get_uint("hidden");
  if (cfg.knows("seed")) c.seed = cfg.get_uint("seed");
  c.validate();
  return c;
}

std::string serialize_train(const TrainConfig& c) {
  std::ostringstream os;
  os << "lambda=" << detail::format_double(c.lambda) << '\n'
     << "lambda_learnable=" << (c.lambda_learnable ? "true" : "false") << '\n'
     << "ssls=" << (c.ssls_enabled ? "true" : "false") << '\n'
     << "ssls_granularity=" << (c.granularity == SslsGranularity::pair ? "pair" : "sample") << '\n'
     << "k_rule=" << c.k_rule.to_string() << '\n'
     << "lr=" << detail::format_double(c.lr) << '\n'
     << "weight_decay=" << detail::format_double(c.weight_decay) << '\n'
     << "epochs=" << c.epochs << '\n'
     << "batch_pairs=" << c.batch_pairs << '\n'
     << "clamp_eps=" << detail::format_double(c.clamp_eps) << '\n'
     << "hidden=" << c.hidden << '\n'
     << "seed=" << c.seed << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Scorer

ScorerForward forward(const ScorerParams& params, const FeatureSequence& features) {
  if (features.dim() != params.dim()) {
    throw ShapeError("features have dim " + std::to_string(features.dim()) + " but the scorer expects " +
                     std::to_string(params.dim()));
  }
  ScorerForward f;
  f.input = features.values().cast<double>();
  f.pre = (f.input * params.w1.transpose()).rowwise() + params.b1.transpose();
  f.hidden = f.pre.cwiseMax(0.0);
  const VectorXd logits = (f.hidden * params.w2).array() + params.b2;
  f.scores = stable_sigmoid(logits.array()).matrix();
  return f;
}

VectorXd score_segments(const ScorerParams& params, const FeatureSequence& features) {
  return forward(params, features).scores;
}

ScorerParams backprop(const ScorerParams& params, const ScorerForward& fwd, const VectorXd& score_grad) {
  ScorerParams g;
  const VectorXd logit_grad = score_grad.cwiseProduct(fwd.scores.cwiseProduct((1.0 - fwd.scores.array()).matrix()));
  g.w2 = fwd.hidden.transpose() * logit_grad;
  g.b2 = logit_grad.sum();
  const MatrixXd hidden_grad =
      (logit_grad * params.w2.transpose()).cwiseProduct((fwd.pre.array() > 0.0).cast<double>().matrix());
  g.w1 = hidden_grad.transpose() * fwd.input;
  g.b1 = hidden_grad.colwise().sum().transpose();
  return g;
}

TopKSelection topk_select(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw ValidationError("top-k: k=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  order.resize(k);
  TopKSelection sel;
  double sum = 0.0;
  for (const auto i : order) sum += scores[i];
  sel.mean = sum / static_cast<double>(k);
  sel.indices = std::move(order);
  return sel;
}

double topk_mean(std::span<const double> scores, std::size_t k) { return topk_select(scores, k).mean; }

double mil_loss(double y_hat_anomalous, double y_hat_normal, double clamp_eps) {
  return bce(1, y_hat_anomalous, clamp_eps) + bce(0, y_hat_normal, clamp_eps);
}

// ---------------------------------------------------------------------------
// Loss scaling

LossBreakdown ssls_scale(std::span<const double> raw_losses, std::span<const std::uint8_t> source_labels,
                         double lambda) {
  if (raw_losses.size() != source_labels.size()) {
    throw ShapeError("ssls_scale: " + std::to_string(raw_losses.size()) + " losses but " +
                     std::to_string(source_labels.size()) + " source labels");
  }
  LossBreakdown out;
  out.lambda = lambda;
  out.raw.assign(raw_losses.begin(), raw_losses.end());
  out.source.assign(source_labels.begin(), source_labels.end());
  out.scaled.resize(raw_losses.size());
  for (std::size_t i = 0; i < raw_losses.size(); ++i) {
    if (source_labels[i] > 1) throw ValidationError("ssls_scale: source label must be 0 or 1");
    out.scaled[i] = source_labels[i] == 1 ? lambda * raw_losses[i] : raw_losses[i];
    out.total += out.scaled[i];
  }
  return out;
}

double effective_lambda(const TrainConfig& config, double rho) {
  if (!config.ssls_enabled) return 1.0;
  return config.lambda_learnable ? stable_sigmoid(rho) : config.lambda;
}

LapHook smoothness_hook(double weight) {
  return [weight](const VectorXd& sa, const VectorXd& sn) {
    LapTerm term;
    auto one = [&](const VectorXd& s, VectorXd& grad) {
      grad = VectorXd::Zero(s.size());
      double v = 0.0;
      for (Eigen::Index t = 1; t < s.size(); ++t) {
        const double d = s[t] - s[t - 1];
        v += d * d;
        grad[t] += 2.0 * weight * d;
        grad[t - 1] -= 2.0 * weight * d;
      }
      return weight * v;
    };
    term.value = one(sa, term.grad_anomalous) + one(sn, term.grad_normal);
    return term;
  };
}

namespace {

struct BagTerms {
  ScorerForward fwd;
  TopKSelection sel;
  VectorXd bce_grad;  // d bce / d scores
  double bce = 0.0;
};

BagTerms bag_terms(const ScorerParams& params, const VideoSample& video, int label, const TrainConfig& config) {
  BagTerms b;
  b.fwd = forward(params, video.features);
  const auto k = config.k_rule.k_for(video.features.num_clips());
  b.sel = topk_select(std::span<const double>(b.fwd.scores.data(), static_cast<std::size_t>(b.fwd.scores.size())), k);
  b.bce = bce(label, b.sel.mean, config.clamp_eps);
  const double upstream = bce_grad(label, b.sel.mean, config.clamp_eps) / static_cast<double>(k);
  b.bce_grad = VectorXd::Zero(b.fwd.scores.size());
  for (const auto i : b.sel.indices) b.bce_grad[static_cast<Eigen::Index>(i)] = upstream;
  return b;
}

VectorXd flat_grad(const ScorerParams& params, const ScorerForward& fwd, const VectorXd& score_grad) {
  return backprop(params, fwd, score_grad).flatten();
}

VectorXd or_zero(const VectorXd& v, Eigen::Index n) { return v.size() == 0 ? VectorXd::Zero(n) : v; }

}  // namespace

LossAndGrads total_loss_and_grads(const ScorerParams& params, std::span<const VideoPair> batch,
                                  const TrainConfig& config, const LapHook& lap_hook, double rho) {
  const auto n_params = static_cast<Eigen::Index>(params.size());
  std::vector<double> raw;
  std::vector<std::uint8_t> source;
  std::vector<VectorXd> entry_grads;
  double mil_sum = 0.0;
  double lap_sum = 0.0;

  for (const auto& pair : batch) {
    if (!pair.anomalous || !pair.normal || pair.anomalous->y != Label::anomalous || pair.normal->y != Label::normal) {
      throw ValidationError("batch pair must hold one anomalous and one normal video");
    }
    const auto a = bag_terms(params, *pair.anomalous, 1, config);
    const auto n = bag_terms(params, *pair.normal, 0, config);
    const double mil = a.bce + n.bce;
    mil_sum += mil;

    LapTerm lap;
    if (lap_hook) lap = lap_hook(a.fwd.scores, n.fwd.scores);
    lap_sum += lap.value;
    const VectorXd lap_a = or_zero(lap.grad_anomalous, a.fwd.scores.size());
    const VectorXd lap_n = or_zero(lap.grad_normal, n.fwd.scores.size());

    const bool syn_a = pair.anomalous->source == Source::synthetic;
    const bool syn_n = pair.normal->source == Source::synthetic;
    if (config.granularity == SslsGranularity::pair) {
      raw.push_back(mil + lap.value);
      source.push_back(syn_a || syn_n ? 1 : 0);
      entry_grads.push_back(flat_grad(params, a.fwd, a.bce_grad + lap_a) +
                            flat_grad(params, n.fwd, n.bce_grad + lap_n));
    } else {
      const double half = 0.5 * lap.value;
      raw.push_back(a.bce + half);
      source.push_back(syn_a ? 1 : 0);
      raw.push_back(n.bce + half);
      source.push_back(syn_n ? 1 : 0);
      if (lap_hook) {
        entry_grads.push_back(flat_grad(params, a.fwd, a.bce_grad + 0.5 * lap_a) + flat_grad(params, n.fwd, 0.5 * lap_n));
        entry_grads.push_back(flat_grad(params, n.fwd, n.bce_grad + 0.5 * lap_n) + flat_grad(params, a.fwd, 0.5 * lap_a));
      } else {
        entry_grads.push_back(flat_grad(params, a.fwd, a.bce_grad));
        entry_grads.push_back(flat_grad(params, n.fwd, n.bce_grad));
      }
    }
  }

  LossAndGrads out;
  out.grad = VectorXd::Zero(n_params);
  if (config.ssls_enabled) {
    const double lambda = effective_lambda(config, rho);
    out.loss = ssls_scale(raw, source, lambda);
    for (std::size_t i = 0; i < entry_grads.size(); ++i) {
      const double scale = source[i] == 1 ? lambda : 1.0;
      out.grad += scale * entry_grads[i];
    }
    if (config.lambda_learnable) {
      double synthetic_raw = 0.0;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (source[i] == 1) synthetic_raw += raw[i];
      }
      out.grad_rho = lambda * (1.0 - lambda) * synthetic_raw;
    }
  } else {
    out.loss.raw = raw;
    out.loss.scaled = raw;
    out.loss.source = source;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out.loss.total += raw[i];
      out.grad += entry_grads[i];
    }
  }
  out.loss.mil = mil_sum;
  out.loss.lap = lap_sum;
  if (!std::isfinite(out.loss.total) || !out.grad.allFinite()) throw NumericError("non-finite loss or gradient");
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic-video filter

VectorXd mean_feature(const FeatureSequence& features) {
  return features.values().cast<double>().colwise().mean().transpose();
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

std::vector<VideoSample> filter_class(const std::vector<VideoSample>& real, const std::vector<VideoSample>& synthetic,
                                      double p, const std::string& name, std::vector<Rejection>& rejected) {
  if (real.empty()) throw ValidationError("video filtering needs real " + name + " videos");
  std::vector<VectorXd> means;
  means.reserve(real.size());
  VectorXd centroid = VectorXd::Zero(static_cast<Eigen::Index>(real.front().features.dim()));
  for (const auto& s : real) {
    means.push_back(mean_feature(s.features));
    if (means.back().size() != centroid.size()) throw ShapeError("real " + name + " videos differ in feature dim");
    centroid += means.back();
  }
  centroid /= static_cast<double>(real.size());
  std::vector<double> distances;
  distances.reserve(means.size());
  for (const auto& m : means) distances.push_back((m - centroid).norm());
  const double threshold = percentile(distances, p);

  std::vector<VideoSample> kept;
  for (const auto& s : synthetic) {
    const VectorXd m = mean_feature(s.features);
    if (m.size() != centroid.size()) throw ShapeError("synthetic video " + s.id + " has a different feature dim");
    const double d = (m - centroid).norm();
    if (d <= threshold) kept.push_back(s);
    else rejected.push_back({s.id, d, threshold});
  }
  return kept;
}

}  // namespace

FilterResult filter_synthetic(const std::vector<VideoSample>& real_anomalous, const std::vector<VideoSample>& real_normal,
                              const std::vector<VideoSample>& synthetic_anomalous,
                              const std::vector<VideoSample>& synthetic_normal, const FilterConfig& config) {
  FilterResult out;
  if (config.policy == FilterPolicy::none) {
    out.synthetic_anomalous = synthetic_anomalous;
    out.synthetic_normal = synthetic_normal;
    return out;
  }
  out.synthetic_anomalous = filter_class(real_anomalous, synthetic_anomalous, config.percentile, "anomalous", out.rejected);
  out.synthetic_normal = filter_class(real_normal, synthetic_normal, config.percentile, "normal", out.rejected);
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::vector<VideoPair> epoch_pairs(const MixedDataset& dataset, Rng& rng) {
  auto indices_of = [](const std::vector<VideoSample>& pool, Source s) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].source == s) idx.push_back(i);
    }
    return idx;
  };
  auto ra = indices_of(dataset.anomalous, Source::real);
  auto va = indices_of(dataset.anomalous, Source::synthetic);
  auto rn = indices_of(dataset.normal, Source::real);
  auto vn = indices_of(dataset.normal, Source::synthetic);
  for (auto* v : {&ra, &va, &rn, &vn}) rng.shuffle(std::span(*v));

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> left_a, left_n;
  auto match = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& n) {
    const auto m = std::min(a.size(), n.size());
    for (std::size_t i = 0; i < m; ++i) pairs.emplace_back(a[i], n[i]);
    left_a.insert(left_a.end(), a.begin() + static_cast<std::ptrdiff_t>(m), a.end());
    left_n.insert(left_n.end(), n.begin() + static_cast<std::ptrdiff_t>(m), n.end());
  };
  match(ra, rn);
  match(va, vn);

  // The smaller class is cycled through a fresh shuffle so every video of the
  // larger class appears exactly once.
  auto top_up = [&rng](std::vector<std::size_t>& short_side, std::size_t target, std::size_t pool_size) {
    std::vector<std::size_t> cycle(pool_size);
    while (short_side.size() < target) {
      std::iota(cycle.begin(), cycle.end(), std::size_t{0});
      rng.shuffle(std::span(cycle));
      for (std::size_t i = 0; i < cycle.size() && short_side.size() < target; ++i) short_side.push_back(cycle[i]);
    }
  };
  if (left_a.size() < left_n.size()) top_up(left_a, left_n.size(), dataset.anomalous.size());
  if (left_n.size() < left_a.size()) top_up(left_n, left_a.size(), dataset.normal.size());
  for (std::size_t i = 0; i < left_a.size(); ++i) pairs.emplace_back(left_a[i], left_n[i]);

  rng.shuffle(std::span(pairs));
  std::vector<VideoPair> out;
  out.reserve(pairs.size());
  for (const auto& [a, n] : pairs) out.push_back({&dataset.anomalous[a], &dataset.normal[n]});
  return out;
}

TrainResult train(const MixedDataset& dataset, const TrainConfig& config, const LapHook& lap_hook,
                  const Validator& validator) {
  config.validate();
  dataset.validate();
  if (dataset.anomalous.empty() || dataset.normal.empty()) {
    throw ValidationError("training needs at least one anomalous and one normal video");
  }
  const std::size_t dim = dataset.anomalous.front().features.dim();
  for (const auto* pool : {&dataset.anomalous, &dataset.normal}) {
    for (const auto& s : *pool) {
      if (s.features.dim() != dim) throw ShapeError("video " + s.id + " has feature dim " + std::to_string(s.features.dim()));
    }
  }

  const Rng root(config.seed);
  TrainResult result;
  result.params = ScorerParams::initialize(config.hidden, dim, derive_seed(config.seed, "init"));
  Rng pairing = root.split("pairing");

  VectorXd flat = result.params.flatten();
  AdamState adam = AdamState::for_size(flat.size(), config.lr, config.weight_decay);
  VectorXd rho = VectorXd::Zero(1);
  AdamState rho_adam = AdamState::for_size(1, config.lr, 0.0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto pairs = epoch_pairs(dataset, pairing);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < pairs.size(); start += config.batch_pairs) {
      const auto len = std::min(config.batch_pairs, pairs.size() - start);
      const auto lg = total_loss_and_grads(result.params, std::span(pairs).subspan(start, len), config, lap_hook, rho[0]);
      rec.loss_total += lg.loss.total;
      rec.mil_mean += lg.loss.mil;
      rec.lap_mean += lg.loss.lap;
      ++steps;

      adam_step(flat, lg.grad, adam);
      result.params = ScorerParams::unflatten(flat, config.hidden, dim);
      if (config.ssls_enabled && config.lambda_learnable) {
        adam_step(rho, VectorXd::Constant(1, lg.grad_rho), rho_adam);
      }
    }
    rec.loss_total /= static_cast<double>(steps);
    rec.mil_mean /= static_cast<double>(pairs.size());
    rec.lap_mean /= static_cast<double>(pairs.size());
    rec.lambda_effective = effective_lambda(config, rho[0]);
    if (validator) rec.val_auc = validator(result.params);
    result.history.push_back(rec);
  }
  result.rho = rho[0];
  return result;
}

void write_history_csv(const std::vector<EpochRecord>& history, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "epoch,L_total,L_MIL_mean,L_LAP_mean,val_auc,lambda_effective\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << detail::format_double(r.loss_total) << ',' << detail::format_double(r.mil_mean) << ','
        << detail::format_double(r.lap_mean) << ',' << (r.val_auc ? detail::format_double(*r.val_auc) : "") << ','
        << detail::format_double(r.lambda_effective) << '\n';
  }
}

}  // namespace gvvad
