#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "gvvad/datamodel.hpp"
#include "gvvad/rng.hpp"

namespace gvvad::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gvvad-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline FeatureMatrix random_features(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  FeatureMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<float>(rng.normal());
  }
  return m;
}

/// Sample with a contiguous anomalous segment of clips [start, start+len).
inline VideoSample make_sample(const std::string& id, Label y, Source s, FeatureMatrix features,
                               std::size_t clip_len = 1, std::size_t start = 0, std::size_t len = 1) {
  VideoSample v;
  v.id = id;
  const auto clips = static_cast<std::size_t>(features.rows());
  v.features = FeatureSequence(std::move(features));
  v.y = y;
  v.source = s;
  std::vector<std::uint8_t> labels(clips * clip_len, 0);
  if (y == Label::anomalous) {
    for (std::size_t c = start; c < start + len && c < clips; ++c) {
      for (std::size_t f = 0; f < clip_len; ++f) labels[c * clip_len + f] = 1;
    }
  }
  v.frame_labels = std::move(labels);
  return v;
}

}  // namespace gvvad::testing
