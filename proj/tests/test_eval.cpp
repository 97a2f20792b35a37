#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gvvad/ablation.hpp"
#include "gvvad/errors.hpp"
#include "gvvad/eval.hpp"
#include "gvvad/worldsim.hpp"
#include "helpers.hpp"

using namespace gvvad;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double wins = 0.0, p = 0.0, n = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    (y[i] ? p : n) += 1.0;
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[j]) wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / (p * n);
}

/// One hidden unit reading the anomaly direction; linear while its input
/// stays positive. `sign` flips the ranking.
ScorerParams projection_scorer(std::size_t dim, double sign) {
  auto p = ScorerParams::zeros(1, dim);
  p.w1.row(0) = anomaly_direction(dim).transpose();
  p.b1[0] = 50.0;
  p.w2[0] = 0.05 * sign;
  p.b2 = -2.5 * sign;
  return p;
}

std::vector<VideoSample> test_world(double gap, std::uint64_t seed, std::size_t per_class = 20) {
  const auto world = WorldConfig::with_gaps(16, gap, 1.0);
  const auto sets = generate_dataset(world, build_repository(ElementInventory::standard(), 50, 1),
                                     {per_class, per_class, 0, 0}, seed, "test");
  std::vector<VideoSample> out = sets.real_anomalous;
  out.insert(out.end(), sets.real_normal.begin(), sets.real_normal.end());
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("clip scores expand to frames") {
  const std::vector<double> clips{0.1, 0.7};
  CHECK(clip_to_frame_scores(clips, 3) == std::vector<double>{0.1, 0.1, 0.1, 0.7, 0.7, 0.7});
  CHECK(clip_to_frame_scores(clips, 16).size() == 32);
}

TEST_CASE("AUC small cases") {
  CHECK(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<std::uint8_t>{0, 1}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{0, 1}) == 0.0);
  CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<std::uint8_t>{0, 1, 1}) == 0.5);
  CHECK(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<std::uint8_t>{0, 0, 1, 1}) == 0.75);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), ValidationError);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, std::vector<std::uint8_t>{1, 0}), ShapeError);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{0, 2}), ValidationError);
}

TEST_CASE("AUC equals the pairwise oracle, with and without ties") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(200);
    const std::uint64_t levels = trial % 2 ? 4 : 1u << 20;
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(levels));
      y[i] = static_cast<std::uint8_t>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    REQUIRE(roc_auc(s, y) == pairwise_auc(s, y));
  }
}

TEST_CASE("AUC invariances") {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng.below(100);
    std::vector<double> s(n), t(n), flipped(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.uniform();
      t[i] = std::log(s[i] + 1e-3) * 4.0 + 1.0;
      flipped[i] = -s[i];
      y[i] = static_cast<std::uint8_t>(i % 2);
    }
    const double auc = roc_auc(s, y);
    CHECK(std::abs(roc_auc(t, y) - auc) < 1e-12);
    CHECK(std::abs(roc_auc(flipped, y) - (1.0 - auc)) < 1e-12);
  }
}

TEST_CASE("oracle, constant and anti-oracle scorers") {
  const auto test = test_world(3.0, 5);
  const double oracle = evaluate(projection_scorer(16, 1.0), test, default_clip_len).auc;
  const double anti = evaluate(projection_scorer(16, -1.0), test, default_clip_len).auc;
  CHECK(oracle > 0.9);
  CHECK(std::abs(oracle + anti - 1.0) < 1e-12);
  CHECK(evaluate(ScorerParams::zeros(4, 16), test, default_clip_len).auc == 0.5);
}

TEST_CASE("micro AUC is the AUC of the concatenated frames") {
  const auto test = test_world(1.5, 6, 6);
  const auto params = ScorerParams::initialize(8, 16, 3);
  const auto result = evaluate(params, test, default_clip_len);
  std::vector<const VideoSample*> sorted;
  for (const auto& v : test) sorted.push_back(&v);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (const auto* v : sorted) {
    const VectorXd s = score_segments(params, v->features);
    for (Eigen::Index c = 0; c < s.size(); ++c) scores.insert(scores.end(), default_clip_len, s[c]);
    labels.insert(labels.end(), v->frame_labels->begin(), v->frame_labels->end());
  }
  CHECK(result.auc == roc_auc(scores, labels));
  CHECK(result.num_frames == scores.size());
  CHECK(result.per_video.size() == test.size());
  for (std::size_t i = 1; i < result.per_video.size(); ++i) CHECK(result.per_video[i - 1].id < result.per_video[i].id);

  const auto macro = evaluate(params, test, default_clip_len, Averaging::macro);
  double sum = 0.0;
  int counted = 0;
  for (const auto& v : result.per_video) {
    if (std::count(v.frame_labels.begin(), v.frame_labels.end(), 1) == 0) continue;
    sum += roc_auc(v.frame_scores, v.frame_labels);
    ++counted;
  }
  CHECK(macro.auc == doctest::Approx(sum / counted).epsilon(1e-15));
}

TEST_CASE("evaluation needs frame labels") {
  auto test = test_world(1.5, 7, 2);
  test[0].frame_labels.reset();
  CHECK_THROWS_AS(evaluate(ScorerParams::zeros(2, 16), test, default_clip_len), ValidationError);
}

TEST_CASE("metrics and score curve export") {
  testing::TempDir dir("curves");
  const auto test = test_world(3.0, 8, 3);
  const auto result = evaluate(projection_scorer(16, 1.0), test, default_clip_len);
  write_metrics(result, dir / "metrics.txt");
  const auto metrics = slurp(dir / "metrics.txt");
  CHECK(metrics.find("averaging micro\n") == 0);
  CHECK(metrics.find("\nauc ") != std::string::npos);
  CHECK(metrics.find("num_videos 6\n") != std::string::npos);

  const auto& curve = result.per_video.front();
  export_score_curve(result, curve.id, dir / "c.csv", dir / "c.svg");
  std::ifstream csv(dir / "c.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "frame,score,gt");
  std::size_t rows = 0, ones = 0;
  while (std::getline(csv, line)) {
    ++rows;
    ones += line.back() == '1';
  }
  CHECK(rows == curve.frame_scores.size());
  CHECK(ones == static_cast<std::size_t>(std::count(curve.frame_labels.begin(), curve.frame_labels.end(), 1)));

  const auto svg = slurp(dir / "c.svg");
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '<') == std::count(svg.begin(), svg.end(), '>'));
  CHECK_THROWS_AS(export_score_curve(result, "nope", dir / "x.csv"), ValidationError);
}

TEST_CASE("svg escapes the title") {
  VideoCurve c{"a<b&c", {0.1, 0.9}, {0, 1}};
  const auto svg = render_score_svg(c);
  CHECK(svg.find("a&lt;b&amp;c") != std::string::npos);
}

TEST_CASE("ablation runner") {
  AblationSpec spec;
  spec.kind = AblationKind::module_ablation;
  spec.grid = module_ablation_grid();
  spec.seeds = {3};
  spec.world = WorldConfig::with_gaps(16, 1.5, 3.0);
  spec.world.clips_min = 20;
  spec.world.clips_max = 30;
  spec.pairs = build_repository(ElementInventory::standard(), 40, 1);
  spec.real_per_class = 8;
  spec.synthetic_per_class = 6;
  spec.test_per_class = 6;
  spec.base_train.epochs = 2;
  const auto a = run_ablation(spec);
  const auto b = run_ablation(spec);
  REQUIRE(a.summary.size() == 5);
  CHECK(a.rows.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.rows[i].auc == b.rows[i].auc);
    CHECK(a.summary[i].setting == spec.grid[i]);
    CHECK(a.summary[i].std_auc == 0.0);
  }

  spec.kind = AblationKind::data_scale_sweep;
  spec.grid = {"0.5"};
  spec.seeds = {1, 2};
  const auto scale = run_ablation(spec);
  REQUIRE(scale.summary.size() == 2);
  CHECK(scale.summary[0].setting == "50%");
  CHECK(scale.summary[1].setting == "50%+VG");
  CHECK(scale.summary[0].n_seeds == 2);
  const double m = 0.5 * (scale.auc("50%", 1) + scale.auc("50%", 2));
  CHECK(scale.at("50%").mean_auc == doctest::Approx(m));
  CHECK(scale.at("50%").std_auc == doctest::Approx(std::abs(scale.auc("50%", 1) - scale.auc("50%", 2)) / std::sqrt(2.0)));

  testing::TempDir dir("ablation");
  write_ablation_csv(scale, dir.path());
  std::ifstream rows(dir / "ablation.csv");
  std::string header;
  std::getline(rows, header);
  CHECK(header == "setting,seed,auc");
  std::ifstream summary(dir / "summary.csv");
  std::getline(summary, header);
  CHECK(header == "setting,mean_auc,std_auc,n_seeds");

  spec.kind = AblationKind::lambda_sweep;
  spec.grid = {"-1"};
  CHECK_THROWS_AS(run_ablation(spec), ValidationError);
  CHECK_THROWS_AS(parse_ablation_kind("nope"), ValidationError);
}
