#include "gvvad/worldsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gvvad/errors.hpp"
#include "gvvad/rng.hpp"
#include "text_util.hpp"

namespace gvvad {

namespace fs = std::filesystem;

namespace {

VectorXd seeded_normal(std::size_t dim, std::string_view label) {
  Rng rng(derive_seed(0x5eedULL, label));
  VectorXd v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = rng.normal();
  return v;
}

void check_vector(const VectorXd& v, std::size_t dim, const std::string& name) {
  if (static_cast<std::size_t>(v.size()) != dim) {
    throw ValidationError("world: " + name + " has " + std::to_string(v.size()) + " entries, dim is " +
                          std::to_string(dim));
  }
  if (!v.allFinite()) throw ValidationError("world: " + name + " is not finite");
}

}  // namespace

VectorXd anomaly_direction(std::size_t dim) { return seeded_normal(dim, "anomaly-direction").normalized(); }

VectorXd domain_direction(std::size_t dim, double alignment) {
  if (!(alignment >= -1.0 && alignment <= 1.0)) {
    throw ValidationError("world: domain_alignment must be in [-1, 1]");
  }
  const VectorXd a = anomaly_direction(dim);
  if (dim == 1) return alignment < 0.0 ? VectorXd(-a) : a;
  VectorXd d = seeded_normal(dim, "domain-direction");
  d -= d.dot(a) * a;
  d.normalize();
  return alignment * a + std::sqrt(1.0 - alignment * alignment) * d;
}

VectorXd default_center(std::size_t dim) { return seeded_normal(dim, "normal-center"); }

void WorldConfig::validate() const {
  if (dim < 1) throw ValidationError("world: dim must be at least 1");
  if (clips_min < 1 || clips_min > clips_max) {
    throw ValidationError("world: need 1 <= clips_min <= clips_max");
  }
  if (clip_len < 1) throw ValidationError("world: clip_len must be at least 1");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("world: noise_sigma must be positive");
  }
  if (!(anomaly_frac_min > 0.0 && anomaly_frac_min <= anomaly_frac_max && anomaly_frac_max <= 1.0)) {
    throw ValidationError("world: need 0 < anomaly_frac_min <= anomaly_frac_max <= 1");
  }
  if (!(element_effect_scale >= 0.0) || !std::isfinite(element_effect_scale)) {
    throw ValidationError("world: element_effect_scale must be non-negative");
  }
  check_vector(normal_center, dim, "normal_center");
  check_vector(anomaly_offset, dim, "anomaly_offset");
  check_vector(domain_offset, dim, "domain_offset");
}

WorldConfig WorldConfig::with_gaps(std::size_t dim, double anomaly_gap, double domain_gap, double noise_sigma,
                                   double domain_alignment) {
  WorldConfig w;
  w.dim = dim;
  w.noise_sigma = noise_sigma;
  w.normal_center = default_center(dim);
  w.anomaly_offset = anomaly_gap * noise_sigma * anomaly_direction(dim);
  w.domain_offset = domain_gap * noise_sigma * domain_direction(dim, domain_alignment);
  return w;
}

std::vector<std::pair<std::string, std::string>> world_config_keys() {
  const WorldConfig d;
  auto num = [](double v) { return detail::format_double(v); };
  return {
      {"dim", std::to_string(d.dim)},
      {"clips_min", std::to_string(d.clips_min)},
      {"clips_max", std::to_string(d.clips_max)},
      {"clip_len", std::to_string(d.clip_len)},
      {"noise_sigma", num(d.noise_sigma)},
      {"anomaly_frac_min", num(d.anomaly_frac_min)},
      {"anomaly_frac_max", num(d.anomaly_frac_max)},
      {"element_effect_scale", num(d.element_effect_scale)},
      {"anomaly_gap", "1.5"},
      {"domain_gap", "1"},
      {"domain_alignment", num(default_domain_alignment)},
      {"normal_center", ""},
      {"anomaly_offset", ""},
      {"domain_offset", ""},
  };
}

WorldConfig world_from_config(const RunConfig& cfg) {
  const auto dim = static_cast<std::size_t>(cfg.get_uint("dim"));
  WorldConfig w = WorldConfig::with_gaps(dim, cfg.get_double("anomaly_gap"), cfg.get_double("domain_gap"),
                                         cfg.get_double("noise_sigma"), cfg.get_double("domain_alignment"));
  w.clips_min = cfg.get_uint("clips_min");
  w.clips_max = cfg.get_uint("clips_max");
  w.clip_len = cfg.get_uint("clip_len");
  w.anomaly_frac_min = cfg.get_double("anomaly_frac_min");
  w.anomaly_frac_max = cfg.get_double("anomaly_frac_max");
  w.element_effect_scale = cfg.get_double("element_effect_scale");
  auto explicit_vector = [&](const std::string& key, VectorXd& target) {
    const auto values = cfg.get_doubles(key);
    if (values.empty()) return;
    target = Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  };
  explicit_vector("normal_center", w.normal_center);
  explicit_vector("anomaly_offset", w.anomaly_offset);
  explicit_vector("domain_offset", w.domain_offset);
  w.validate();
  return w;
}

std::string serialize_world(const WorldConfig& w) {
  auto vec = [](const VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += detail::format_double(v[i]);
    }
    return out;
  };
  std::ostringstream os;
  os << "dim=" << w.dim << '\n'
     << "clips_min=" << w.clips_min << '\n'
     << "clips_max=" << w.clips_max << '\n'
     << "clip_len=" << w.clip_len << '\n'
     << "noise_sigma=" << detail::format_double(w.noise_sigma) << '\n'
     << "anomaly_frac_min=" << detail::format_double(w.anomaly_frac_min) << '\n'
     << "anomaly_frac_max=" << detail::format_double(w.anomaly_frac_max) << '\n'
     << "element_effect_scale=" << detail::format_double(w.element_effect_scale) << '\n'
     << "normal_center=" << vec(w.normal_center) << '\n'
     << "anomaly_offset=" << vec(w.anomaly_offset) << '\n'
     << "domain_offset=" << vec(w.domain_offset) << '\n';
  return os.str();
}

VectorXd element_perturbation(const ElementTuple& t, std::size_t dim, double scale) {
  std::string key = t.viewpoint;
  key += '\x1f';
  key += t.location;
  key += '\x1f';
  key += t.subject;
  key += '\x1f';
  key += t.event;
  Rng rng(fnv1a64(key));
  VectorXd v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

GeneratedVideo generate_video(const WorldConfig& config, const DescriptionPair& pair, Label y, Source source,
                              std::uint64_t seed, std::string id) {
  config.validate();
  Rng rng(seed);
  Rng length_rng = rng.split("length");
  Rng segment_rng = rng.split("segment");
  Rng noise_rng = rng.split("noise");

  const auto span = config.clips_max - config.clips_min + 1;
  const std::size_t clips = config.clips_min + static_cast<std::size_t>(length_rng.below(span));

  GeneratedVideo out;
  if (y == Label::anomalous) {
    const double t = static_cast<double>(clips);
    const auto lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(config.anomaly_frac_min * t)));
    const auto hi = std::max(lo, std::min(clips, static_cast<std::size_t>(std::floor(config.anomaly_frac_max * t))));
    out.segment_length = lo + static_cast<std::size_t>(segment_rng.below(hi - lo + 1));
    out.segment_start = static_cast<std::size_t>(segment_rng.below(clips - out.segment_length + 1));
  }

  VectorXd base = config.normal_center + element_perturbation(pair.elements, config.dim, config.element_effect_scale);
  if (source == Source::synthetic) base += config.domain_offset;
  const VectorXd anomalous_base = base + config.anomaly_offset;

  FeatureMatrix values(static_cast<Eigen::Index>(clips), static_cast<Eigen::Index>(config.dim));
  std::vector<std::uint8_t> frame_labels(clips * config.clip_len, 0);
  for (std::size_t c = 0; c < clips; ++c) {
    const bool in_segment = c >= out.segment_start && c < out.segment_start + out.segment_length;
    const VectorXd& mean = in_segment ? anomalous_base : base;
    for (std::size_t d = 0; d < config.dim; ++d) {
      values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d)) =
          static_cast<float>(mean[static_cast<Eigen::Index>(d)] + config.noise_sigma * noise_rng.normal());
    }
    if (in_segment) {
      std::fill_n(frame_labels.begin() + static_cast<std::ptrdiff_t>(c * config.clip_len), config.clip_len, 1);
    }
  }

  if (id.empty()) {
    id = std::string(source == Source::synthetic ? "v" : "r") + (y == Label::anomalous ? "a" : "n") + "-p" +
         std::to_string(pair.index) + "-s" + std::to_string(seed);
  }
  out.sample.id = std::move(id);
  out.sample.features = FeatureSequence(std::move(values));
  out.sample.y = y;
  out.sample.source = source;
  out.sample.frame_labels = std::move(frame_labels);
  out.provenance = {pair.index, y, source, seed};
  return out;
}

namespace {

std::vector<VideoSample> generate_set(const WorldConfig& config, const std::vector<DescriptionPair>& pairs,
                                      std::size_t count, Label y, Source source, std::uint64_t base_seed,
                                      const std::string& prefix) {
  std::vector<VideoSample> out;
  out.reserve(count);
  const std::string tag = std::string(source == Source::synthetic ? "v" : "r") + (y == Label::anomalous ? "a" : "n");
  for (std::size_t j = 0; j < count; ++j) {
    char num[32];
    std::snprintf(num, sizeof(num), "%05zu", j);
    const std::string stem = prefix + "-" + tag + "-" + num;
    // Synthetic videos of both classes are rendered from the same description
    // pair; real footage has no pairing, so each real video gets its own scene.
    const auto pick = source == Source::synthetic
                          ? j % pairs.size()
                          : static_cast<std::size_t>(Rng(derive_seed(base_seed, stem)).below(pairs.size()));
    const auto& pair = pairs[pick];
    std::string id = stem + "-p" + std::to_string(pair.index);
    const auto seed = derive_seed(base_seed, id);
    out.push_back(generate_video(config, pair, y, source, seed, std::move(id)).sample);
  }
  return out;
}

}  // namespace

WorldSets generate_dataset(const WorldConfig& config, const std::vector<DescriptionPair>& pairs,
                           const SetCounts& counts, std::uint64_t base_seed, const std::string& prefix) {
  config.validate();
  const auto total = counts.real_anomalous + counts.real_normal + counts.synthetic_anomalous + counts.synthetic_normal;
  if (total > 0 && pairs.empty()) throw ValidationError("world generation needs at least one description pair");
  WorldSets sets;
  sets.real_anomalous = generate_set(config, pairs, counts.real_anomalous, Label::anomalous, Source::real, base_seed, prefix);
  sets.real_normal = generate_set(config, pairs, counts.real_normal, Label::normal, Source::real, base_seed, prefix);
  sets.synthetic_anomalous =
      generate_set(config, pairs, counts.synthetic_anomalous, Label::anomalous, Source::synthetic, base_seed, prefix);
  sets.synthetic_normal =
      generate_set(config, pairs, counts.synthetic_normal, Label::normal, Source::synthetic, base_seed, prefix);
  return sets;
}

DatasetManifest write_samples(const std::vector<VideoSample>& samples, const fs::path& dir, std::size_t dim,
                              std::size_t clip_len) {
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "labels");
  DatasetManifest manifest;
  manifest.feature_dim = dim;
  manifest.clip_len = clip_len;
  manifest.base_dir = dir;
  for (const auto& s : samples) {
    ManifestEntry e;
    e.id = s.id;
    e.feature_path = "features/" + s.id + ".gvft";
    e.y = s.y;
    e.source = s.source;
    write_features(dir / e.feature_path, s.features);
    if (s.frame_labels) {
      e.frame_label_path = "labels/" + s.id + ".gvlb";
      write_frame_labels(dir / *e.frame_label_path, *s.frame_labels);
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace gvvad
