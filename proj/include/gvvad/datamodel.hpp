#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gvvad {

/// Clip features, one row per 16-frame clip. Stored as f32 so that the
/// in-memory values are exactly what the binary format holds.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Label : std::uint8_t { normal = 0, anomalous = 1 };
enum class Source : std::uint8_t { real = 0, synthetic = 1 };

inline int to_int(Label y) { return static_cast<int>(y); }
inline int to_int(Source s) { return static_cast<int>(s); }

inline constexpr std::size_t default_clip_len = 16;

class FeatureSequence {
 public:
  FeatureSequence() = default;
  /// Throws ValidationError unless T ≥ 1, D ≥ 1 and every value is finite.
  explicit FeatureSequence(FeatureMatrix values);

  std::size_t num_clips() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  const FeatureMatrix& values() const { return values_; }

  friend bool operator==(const FeatureSequence& a, const FeatureSequence& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           a.values_ == b.values_;
  }

 private:
  FeatureMatrix values_;
};

struct VideoSample {
  std::string id;
  FeatureSequence features;
  Label y = Label::normal;
  Source source = Source::real;
  /// Per-frame ground truth (num_clips · clip_len entries); evaluation only.
  std::optional<std::vector<std::uint8_t>> frame_labels;

  /// Checks the frame-label invariants against this sample's class.
  void validate(std::size_t clip_len) const;
};

struct ManifestEntry {
  std::string id;
  std::string feature_path;
  Label y = Label::normal;
  Source source = Source::real;
  std::optional<std::string> frame_label_path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::size_t feature_dim = 16;
  std::size_t clip_len = default_clip_len;
  /// Directory relative paths resolve against; not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const;

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.entries == b.entries && a.feature_dim == b.feature_dim && a.clip_len == b.clip_len;
  }
};

/// Parses and fully validates a manifest; referenced files must exist.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

FeatureSequence read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureSequence& seq);

std::vector<std::uint8_t> read_frame_labels(const std::filesystem::path& path);
void write_frame_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// Reads every sample a manifest references and checks the feature dim.
std::vector<VideoSample> load_samples(const DatasetManifest& manifest);

/// Pooled anomalous and normal sets used for training.
struct MixedDataset {
  std::vector<VideoSample> anomalous;
  std::vector<VideoSample> normal;

  std::size_t count(Label y, Source s) const;
  /// Throws ValidationError on class impurity or duplicate ids.
  void validate() const;
};

/// Anomalous = synth_a ∪ real_a, normal = synth_n ∪ real_n. Sources are kept.
MixedDataset mix_datasets(std::vector<VideoSample> real_a, std::vector<VideoSample> real_n,
                          std::vector<VideoSample> synth_a, std::vector<VideoSample> synth_n);

/// Groups loaded samples by class.
MixedDataset to_mixed(std::vector<VideoSample> samples);

/// Keeps ⌈fraction·n⌉ real samples per class (seeded); synthetic untouched.
MixedDataset subsample_real(const MixedDataset& dataset, double fraction, std::uint64_t seed);

}  // namespace gvvad
