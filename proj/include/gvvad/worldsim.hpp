#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gvvad/config.hpp"
#include "gvvad/datamodel.hpp"
#include "gvvad/numerics.hpp"
#include "gvvad/promptgen.hpp"

namespace gvvad {

/// Gaussian-cluster feature world. A clip's feature is
///   normal_center + element_perturbation(pair)
///   + anomaly_offset   (clips inside the anomalous segment)
///   + domain_offset    (synthetic-source videos)
///   + N(0, noise_sigma² I).
inline constexpr double default_domain_alignment = 0.5;

struct WorldConfig {
  std::size_t dim = 16;
  std::size_t clips_min = 64;
  std::size_t clips_max = 96;
  std::size_t clip_len = default_clip_len;
  VectorXd normal_center;
  VectorXd anomaly_offset;
  VectorXd domain_offset;
  double noise_sigma = 1.0;
  double anomaly_frac_min = 0.1;
  double anomaly_frac_max = 0.4;
  /// Per-dimension standard deviation of the description-driven shift.
  double element_effect_scale = 0.25;

  /// Throws ValidationError on inconsistent fields.
  void validate() const;

  /// Builds a world whose offsets have the given norms, measured in units of
  /// noise_sigma, along fixed unit directions. `domain_alignment` is the
  /// cosine between the domain and anomaly directions.
  static WorldConfig with_gaps(std::size_t dim, double anomaly_gap, double domain_gap,
                               double noise_sigma = 1.0,
                               double domain_alignment = default_domain_alignment);
};

/// Unit directions used by with_gaps(): anomaly, domain and the center.
/// The domain direction has cosine `alignment` with the anomaly direction.
VectorXd anomaly_direction(std::size_t dim);
VectorXd domain_direction(std::size_t dim, double alignment = default_domain_alignment);
VectorXd default_center(std::size_t dim);

/// Config keys with defaults (`anomaly_gap`/`domain_gap` are used when the
/// explicit offset vectors are left empty).
std::vector<std::pair<std::string, std::string>> world_config_keys();
WorldConfig world_from_config(const RunConfig& cfg);
/// key=value text that world_from_config() reproduces exactly.
std::string serialize_world(const WorldConfig& world);

/// Deterministic shift for a description tuple.
VectorXd element_perturbation(const ElementTuple& elements, std::size_t dim, double scale);

struct VideoProvenance {
  std::uint64_t description_index = 0;
  Label y = Label::normal;
  Source source = Source::real;
  std::uint64_t seed = 0;
};

struct GeneratedVideo {
  VideoSample sample;
  VideoProvenance provenance;
  /// First anomalous clip and clip count; count is 0 for normal videos.
  std::size_t segment_start = 0;
  std::size_t segment_length = 0;
};

GeneratedVideo generate_video(const WorldConfig& config, const DescriptionPair& pair, Label y, Source source,
                              std::uint64_t seed, std::string id = {});

struct SetCounts {
  std::size_t real_anomalous = 0;
  std::size_t real_normal = 0;
  std::size_t synthetic_anomalous = 0;
  std::size_t synthetic_normal = 0;
};

struct WorldSets {
  std::vector<VideoSample> real_anomalous;
  std::vector<VideoSample> real_normal;
  std::vector<VideoSample> synthetic_anomalous;
  std::vector<VideoSample> synthetic_normal;
};

/// Synthetic video j of either class uses pairs[j mod |pairs|]; real videos
/// draw their scene from a seed derived from their id. Every video's seed is
/// derived from (base_seed, id) so generation order does not matter. `prefix` namespaces
/// the ids (e.g. "train", "test").
WorldSets generate_dataset(const WorldConfig& config, const std::vector<DescriptionPair>& pairs,
                           const SetCounts& counts, std::uint64_t base_seed, const std::string& prefix = "w");

/// Writes features/labels under `dir` and returns a manifest with paths
/// relative to `dir`.
DatasetManifest write_samples(const std::vector<VideoSample>& samples, const std::filesystem::path& dir,
                              std::size_t dim, std::size_t clip_len);

}  // namespace gvvad
