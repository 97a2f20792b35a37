#include "gvvad/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gvvad/errors.hpp"
#include "text_util.hpp"

namespace gvvad {

namespace fs = std::filesystem;

std::vector<double> clip_to_frame_scores(std::span<const double> clip_scores, std::size_t clip_len) {
  if (clip_len < 1) throw ValidationError("clip_len must be at least 1");
  std::vector<double> frames;
  frames.reserve(clip_scores.size() * clip_len);
  for (const double s : clip_scores) frames.insert(frames.end(), clip_len, s);
  return frames;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("roc_auc: " + std::to_string(scores.size()) + " scores but " + std::to_string(labels.size()) +
                     " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Neumaier-compensated sum of positive midranks.
  double sum = 0.0, comp = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] > 1) throw ValidationError("roc_auc: labels must be 0 or 1");
      if (labels[order[t]] != 1) continue;
      ++positives;
      const double next = sum + midrank;
      comp += std::abs(sum) >= midrank ? (sum - next) + midrank : (midrank - next) + sum;
      sum = next;
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ValidationError("roc_auc is undefined with a single label class");
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return ((sum + comp) - p * (p + 1.0) / 2.0) / (p * n);
}

EvalResult evaluate(const ScorerParams& params, const std::vector<VideoSample>& test_set, std::size_t clip_len,
                    Averaging averaging) {
  std::vector<const VideoSample*> ordered;
  ordered.reserve(test_set.size());
  for (const auto& s : test_set) {
    if (!s.frame_labels) throw ValidationError("evaluation needs frame labels; '" + s.id + "' has none");
    ordered.push_back(&s);
  }
  std::sort(ordered.begin(), ordered.end(), [](const VideoSample* a, const VideoSample* b) { return a->id < b->id; });

  EvalResult result;
  result.averaging = averaging;
  std::vector<double> all_scores;
  std::vector<std::uint8_t> all_labels;
  for (const auto* s : ordered) {
    s->validate(clip_len);
    const VectorXd clip_scores = score_segments(params, s->features);
    VideoCurve curve;
    curve.id = s->id;
    curve.frame_scores = clip_to_frame_scores(std::span<const double>(clip_scores.data(), static_cast<std::size_t>(clip_scores.size())), clip_len);
    curve.frame_labels = *s->frame_labels;
    all_scores.insert(all_scores.end(), curve.frame_scores.begin(), curve.frame_scores.end());
    all_labels.insert(all_labels.end(), curve.frame_labels.begin(), curve.frame_labels.end());
    result.per_video.push_back(std::move(curve));
  }
  result.num_frames = all_scores.size();

  if (averaging == Averaging::micro) {
    result.auc = roc_auc(all_scores, all_labels);
  } else {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& v : result.per_video) {
      const auto pos = std::count(v.frame_labels.begin(), v.frame_labels.end(), std::uint8_t{1});
      if (pos == 0 || static_cast<std::size_t>(pos) == v.frame_labels.size()) continue;
      sum += roc_auc(v.frame_scores, v.frame_labels);
      ++counted;
    }
    if (counted == 0) throw ValidationError("macro AUC needs at least one video with both frame classes");
    result.auc = sum / static_cast<double>(counted);
  }
  return result;
}

void write_metrics(const EvalResult& result, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "averaging " << (result.averaging == Averaging::micro ? "micro" : "macro") << '\n'
      << "auc " << detail::format_double(result.auc) << '\n'
      << "num_frames " << result.num_frames << '\n'
      << "num_videos " << result.per_video.size() << '\n';
}

std::string render_score_svg(const VideoCurve& curve) {
  constexpr double width = 640, height = 240, pad = 30;
  const double n = static_cast<double>(std::max<std::size_t>(curve.frame_scores.size(), 1));
  const double plot_w = width - 2 * pad, plot_h = height - 2 * pad;
  auto x_of = [&](double frame) { return pad + plot_w * frame / n; };
  auto y_of = [&](double score) { return pad + plot_h * (1.0 - score); };
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
  };
  auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
      }
    }
    return out;
  };

  std::ostringstream svg;
  svg << R"(<?xml version="1.0" encoding="UTF-8"?>)" << '\n'
      << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << width << R"(" height=")" << height << R"(">)" << '\n'
      << "<title>" << escape(curve.id) << "</title>\n"
      << R"(<rect x="0" y="0" width=")" << width << R"(" height=")" << height << R"(" fill="white"/>)" << '\n';
  // Ground-truth anomalous regions.
  for (std::size_t i = 0; i < curve.frame_labels.size();) {
    if (curve.frame_labels[i] != 1) { ++i; continue; }
    std::size_t j = i;
    while (j < curve.frame_labels.size() && curve.frame_labels[j] == 1) ++j;
    svg << R"(<rect x=")" << num(x_of(static_cast<double>(i))) << R"(" y=")" << pad << R"(" width=")"
        << num(x_of(static_cast<double>(j)) - x_of(static_cast<double>(i))) << R"(" height=")" << plot_h
        << R"(" fill="red" fill-opacity="0.25"/>)" << '\n';
    i = j;
  }
  svg << R"(<line x1=")" << pad << R"(" y1=")" << pad + plot_h << R"(" x2=")" << pad + plot_w << R"(" y2=")"
      << pad + plot_h << R"(" stroke="black"/>)" << '\n'
      << R"(<line x1=")" << pad << R"(" y1=")" << pad << R"(" x2=")" << pad << R"(" y2=")" << pad + plot_h
      << R"(" stroke="black"/>)" << '\n';
  if (!curve.frame_scores.empty()) {
    svg << R"(<polyline fill="none" stroke="blue" stroke-width="1.5" points=")";
    for (std::size_t i = 0; i < curve.frame_scores.size(); ++i) {
      if (i) svg << ' ';
      svg << num(x_of(static_cast<double>(i) + 0.5)) << ',' << num(y_of(curve.frame_scores[i]));
    }
    svg << R"("/>)" << '\n';
  }
  svg << "</svg>\n";
  return svg.str();
}

void export_score_curve(const EvalResult& result, const std::string& video_id, const fs::path& csv_path,
                        const fs::path& svg_path) {
  const auto it = std::find_if(result.per_video.begin(), result.per_video.end(),
                               [&](const VideoCurve& v) { return v.id == video_id; });
  if (it == result.per_video.end()) throw ValidationError("no video with id '" + video_id + "' in the evaluation");

  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw IoError("cannot open for writing: " + csv_path.string());
  csv << "frame,score,gt\n";
  for (std::size_t i = 0; i < it->frame_scores.size(); ++i) {
    csv << i << ',' << detail::format_double(it->frame_scores[i]) << ',' << int{it->frame_labels[i]} << '\n';
  }
  if (!svg_path.empty()) {
    std::ofstream svg(svg_path, std::ios::trunc);
    if (!svg) throw IoError("cannot open for writing: " + svg_path.string());
    svg << render_score_svg(*it);
  }
}

}  // namespace gvvad
