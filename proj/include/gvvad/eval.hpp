#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gvvad/datamodel.hpp"
#include "gvvad/milcore.hpp"
#include "gvvad/numerics.hpp"

namespace gvvad {

/// Repeats each clip score clip_len times.
std::vector<double> clip_to_frame_scores(std::span<const double> clip_scores, std::size_t clip_len);

/// Mann-Whitney ROC-AUC with midranks for ties:
///   (R_pos − P(P+1)/2) / (P·N).
/// Throws ValidationError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

enum class Averaging { micro, macro };

struct VideoCurve {
  std::string id;
  std::vector<double> frame_scores;
  std::vector<std::uint8_t> frame_labels;
};

struct EvalResult {
  double auc = 0.5;
  std::size_t num_frames = 0;
  Averaging averaging = Averaging::micro;
  std::vector<VideoCurve> per_video;  // sorted by id
};

/// Frame-level AUC over a labelled test set. Micro: one ROC over all frames
/// concatenated in ascending id order. Macro: mean of per-video AUCs over the
/// videos that contain both classes.
EvalResult evaluate(const ScorerParams& params, const std::vector<VideoSample>& test_set, std::size_t clip_len,
                    Averaging averaging = Averaging::micro);

/// `key value` lines.
void write_metrics(const EvalResult& result, const std::filesystem::path& path);

/// CSV `frame,score,gt` for one video, and optionally an SVG line plot with
/// the ground-truth anomalous frames shaded.
void export_score_curve(const EvalResult& result, const std::string& video_id, const std::filesystem::path& csv_path,
                        const std::filesystem::path& svg_path = {});

std::string render_score_svg(const VideoCurve& curve);

}  // namespace gvvad
