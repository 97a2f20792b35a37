#include "gvvad/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "gvvad/errors.hpp"
#include "gvvad/rng.hpp"
#include "text_util.hpp"

namespace gvvad {

namespace fs = std::filesystem;

FeatureSequence::FeatureSequence(FeatureMatrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ValidationError("feature sequence must be at least 1x1, got " +
                          std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
  }
  if (!values_.allFinite()) throw ValidationError("feature sequence contains a non-finite value");
}

void VideoSample::validate(std::size_t clip_len) const {
  if (!frame_labels) return;
  const auto& labels = *frame_labels;
  if (labels.size() != features.num_clips() * clip_len) {
    throw ValidationError(id + ": " + std::to_string(labels.size()) + " frame labels for " +
                          std::to_string(features.num_clips()) + " clips of " +
                          std::to_string(clip_len) + " frames");
  }
  bool any = false;
  for (auto v : labels) {
    if (v > 1) throw ValidationError(id + ": frame label outside {0,1}");
    any = any || v == 1;
  }
  if (y == Label::normal && any) throw ValidationError(id + ": normal video has anomalous frames");
  if (y == Label::anomalous && !any) throw ValidationError(id + ": anomalous video has no anomalous frame");
}

fs::path DatasetManifest::resolve(const std::string& relative) const {
  fs::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

namespace {

constexpr std::string_view manifest_magic = "gvvad-manifest";

std::size_t parse_header_count(const std::string& token, std::string_view key, std::size_t line) {
  const std::string prefix = std::string(key) + "=";
  if (token.rfind(prefix, 0) != 0) {
    throw ValidationError("manifest line " + std::to_string(line) + ": expected " + prefix + "<n>");
  }
  const auto v = detail::parse_uint(token.substr(prefix.size()));
  if (!v || *v == 0) {
    throw ValidationError("manifest line " + std::to_string(line) + ": invalid " + std::string(key));
  }
  return static_cast<std::size_t>(*v);
}

template <typename Enum>
Enum parse_binary_field(const std::string& text, std::string_view field, std::size_t line) {
  if (text == "0") return static_cast<Enum>(0);
  if (text == "1") return static_cast<Enum>(1);
  throw ValidationError("manifest line " + std::to_string(line) + ": field " + std::string(field) +
                        " must be 0 or 1, got '" + text + "'");
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());

  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ValidationError("manifest line 1: missing header");
  ++line_no;
  {
    std::istringstream header(line);
    std::string magic, version, dim, clip;
    header >> magic >> version >> dim >> clip;
    if (magic != manifest_magic || version != "v1") {
      throw ValidationError("manifest line 1: expected 'gvvad-manifest v1 dim=<D> clip_len=<L>'");
    }
    manifest.feature_dim = parse_header_count(dim, "dim", line_no);
    manifest.clip_len = parse_header_count(clip, "clip_len", line_no);
  }

  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 5) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": expected 5 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.id = fields[0];
    if (e.id.empty()) throw ValidationError("manifest line " + std::to_string(line_no) + ": empty id");
    e.feature_path = fields[1];
    e.y = parse_binary_field<Label>(fields[2], "y", line_no);
    e.source = parse_binary_field<Source>(fields[3], "y_s", line_no);
    if (fields[4] != "-") e.frame_label_path = fields[4];

    if (!ids.insert(e.id).second) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": duplicate id '" + e.id + "'");
    }
    if (!fs::exists(manifest.resolve(e.feature_path))) {
      throw IoError("manifest line " + std::to_string(line_no) + ": missing feature file " + e.feature_path);
    }
    if (e.frame_label_path && !fs::exists(manifest.resolve(*e.frame_label_path))) {
      throw IoError("manifest line " + std::to_string(line_no) + ": missing frame-label file " +
                    *e.frame_label_path);
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << manifest_magic << " v1 dim=" << manifest.feature_dim << " clip_len=" << manifest.clip_len << '\n';
  for (const auto& e : manifest.entries) {
    out << e.id << '\t' << e.feature_path << '\t' << to_int(e.y) << '\t' << to_int(e.source) << '\t'
        << e.frame_label_path.value_or("-") << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureSequence read_features(const fs::path& path) {
  auto env = detail::read_envelope(path, "GVFT", [](std::uint64_t t, std::uint64_t d) { return 4 * t * d; });
  FeatureMatrix values(env.rows, env.cols);
  const char* p = env.payload.data();
  for (Eigen::Index i = 0; i < values.size(); ++i, p += 4) {
    const float v = detail::get_f32(p);
    if (!std::isfinite(v)) throw IntegrityError(path.string() + ": non-finite value in payload");
    values.data()[i] = v;
  }
  return FeatureSequence(std::move(values));
}

void write_features(const fs::path& path, const FeatureSequence& seq) {
  const auto& values = seq.values();
  std::vector<char> payload;
  payload.reserve(static_cast<std::size_t>(values.size()) * 4);
  for (Eigen::Index i = 0; i < values.size(); ++i) detail::put_f32(payload, values.data()[i]);
  detail::write_envelope(path, "GVFT", static_cast<std::uint32_t>(values.rows()),
                         static_cast<std::uint32_t>(values.cols()), payload);
}

std::vector<std::uint8_t> read_frame_labels(const fs::path& path) {
  auto env = detail::read_envelope(path, "GVLB", [](std::uint64_t t, std::uint64_t d) { return t * d; });
  std::vector<std::uint8_t> labels(env.payload.begin(), env.payload.end());
  for (auto v : labels) {
    if (v > 1) throw IntegrityError(path.string() + ": frame label outside {0,1}");
  }
  return labels;
}

void write_frame_labels(const fs::path& path, std::span<const std::uint8_t> labels) {
  std::vector<char> payload(labels.begin(), labels.end());
  detail::write_envelope(path, "GVLB", static_cast<std::uint32_t>(labels.size()), 1, payload);
}

std::vector<VideoSample> load_samples(const DatasetManifest& manifest) {
  std::vector<VideoSample> samples;
  samples.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    VideoSample s;
    s.id = e.id;
    s.features = read_features(manifest.resolve(e.feature_path));
    if (s.features.dim() != manifest.feature_dim) {
      throw ValidationError(e.id + ": feature dim " + std::to_string(s.features.dim()) +
                            " does not match manifest dim " + std::to_string(manifest.feature_dim));
    }
    s.y = e.y;
    s.source = e.source;
    if (e.frame_label_path) s.frame_labels = read_frame_labels(manifest.resolve(*e.frame_label_path));
    s.validate(manifest.clip_len);
    samples.push_back(std::move(s));
  }
  return samples;
}

std::size_t MixedDataset::count(Label y, Source s) const {
  const auto& pool = y == Label::anomalous ? anomalous : normal;
  return static_cast<std::size_t>(
      std::count_if(pool.begin(), pool.end(), [s](const VideoSample& v) { return v.source == s; }));
}

void MixedDataset::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& s : anomalous) {
    if (s.y != Label::anomalous) throw ValidationError("anomalous set contains normal sample " + s.id);
    if (!ids.insert(s.id).second) throw ValidationError("duplicate sample id " + s.id);
  }
  for (const auto& s : normal) {
    if (s.y != Label::normal) throw ValidationError("normal set contains anomalous sample " + s.id);
    if (!ids.insert(s.id).second) throw ValidationError("duplicate sample id " + s.id);
  }
}

namespace {

void require_class(const std::vector<VideoSample>& set, Label y, std::string_view name) {
  for (const auto& s : set) {
    if (s.y != y) throw ValidationError(std::string(name) + " contains sample of the wrong class: " + s.id);
  }
}

}  // namespace

MixedDataset mix_datasets(std::vector<VideoSample> real_a, std::vector<VideoSample> real_n,
                          std::vector<VideoSample> synth_a, std::vector<VideoSample> synth_n) {
  require_class(real_a, Label::anomalous, "real anomalous set");
  require_class(synth_a, Label::anomalous, "synthetic anomalous set");
  require_class(real_n, Label::normal, "real normal set");
  require_class(synth_n, Label::normal, "synthetic normal set");

  MixedDataset mixed;
  mixed.anomalous = std::move(synth_a);
  mixed.anomalous.insert(mixed.anomalous.end(), std::make_move_iterator(real_a.begin()),
                         std::make_move_iterator(real_a.end()));
  mixed.normal = std::move(synth_n);
  mixed.normal.insert(mixed.normal.end(), std::make_move_iterator(real_n.begin()),
                      std::make_move_iterator(real_n.end()));
  mixed.validate();
  return mixed;
}

MixedDataset to_mixed(std::vector<VideoSample> samples) {
  MixedDataset mixed;
  for (auto& s : samples) {
    (s.y == Label::anomalous ? mixed.anomalous : mixed.normal).push_back(std::move(s));
  }
  mixed.validate();
  return mixed;
}

namespace {

std::vector<VideoSample> subsample_pool(const std::vector<VideoSample>& pool, double fraction, Rng rng) {
  std::vector<std::size_t> real_idx;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].source == Source::real) real_idx.push_back(i);
  }
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(real_idx.size()) - 1e-9));
  rng.shuffle(std::span(real_idx));
  std::vector<bool> kept(pool.size(), false);
  for (std::size_t i = 0; i < keep; ++i) kept[real_idx[i]] = true;

  std::vector<VideoSample> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].source == Source::synthetic || kept[i]) out.push_back(pool[i]);
  }
  return out;
}

}  // namespace

MixedDataset subsample_real(const MixedDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("subsample fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const Rng rng(seed);
  MixedDataset out;
  out.anomalous = subsample_pool(dataset.anomalous, fraction, rng.split("anomalous"));
  out.normal = subsample_pool(dataset.normal, fraction, rng.split("normal"));
  return out;
}

}  // namespace gvvad
