#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>

#include "gvvad/datamodel.hpp"
#include "gvvad/errors.hpp"
#include "helpers.hpp"

using namespace gvvad;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::vector<VideoSample> samples_of(Rng& rng, Label y, Source s, std::size_t n, const std::string& tag) {
  std::vector<VideoSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(testing::make_sample(tag + std::to_string(i), y, s, testing::random_features(rng, 4, 2)));
  }
  return out;
}

std::set<std::string> ids_of(const std::vector<VideoSample>& v) {
  std::set<std::string> ids;
  for (const auto& s : v) ids.insert(s.id);
  return ids;
}

}  // namespace

TEST_CASE("feature sequence validation") {
  CHECK_THROWS_AS(FeatureSequence(FeatureMatrix(0, 3)), ValidationError);
  FeatureMatrix bad = FeatureMatrix::Zero(2, 2);
  bad(1, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(FeatureSequence{bad}, ValidationError);
  const FeatureSequence ok(FeatureMatrix::Ones(3, 2));
  CHECK(ok.num_clips() == 3);
  CHECK(ok.dim() == 2);
}

TEST_CASE("frame label invariants") {
  Rng rng(1);
  auto a = testing::make_sample("a", Label::anomalous, Source::real, testing::random_features(rng, 3, 2), 4, 1, 1);
  CHECK_NOTHROW(a.validate(4));
  CHECK_THROWS_AS(a.validate(16), ValidationError);
  a.frame_labels->assign(12, 0);
  CHECK_THROWS_AS(a.validate(4), ValidationError);
  auto n = testing::make_sample("n", Label::normal, Source::real, testing::random_features(rng, 3, 2), 4);
  CHECK_NOTHROW(n.validate(4));
  (*n.frame_labels)[5] = 1;
  CHECK_THROWS_AS(n.validate(4), ValidationError);
}

TEST_CASE("empty manifest keeps header dims") {
  testing::TempDir dir("manifest-empty");
  write_text(dir / "m.txt", "gvvad-manifest v1 dim=24 clip_len=8\n");
  const auto m = load_manifest(dir / "m.txt");
  CHECK(m.entries.empty());
  CHECK(m.feature_dim == 24);
  CHECK(m.clip_len == 8);
}

TEST_CASE("manifest with y=2 names the line and field") {
  testing::TempDir dir("manifest-bad");
  write_features(dir / "f.gvft", FeatureSequence(FeatureMatrix::Ones(1, 16)));
  write_text(dir / "m.txt",
             "gvvad-manifest v1 dim=16 clip_len=16\n"
             "v0\tf.gvft\t0\t0\t-\n"
             "v1\tf.gvft\t2\t0\t-\n");
  try {
    load_manifest(dir / "m.txt");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("field y") != std::string::npos);
  }
}

TEST_CASE("manifest rejects duplicates, wrong arity and missing files") {
  testing::TempDir dir("manifest-misc");
  write_features(dir / "f.gvft", FeatureSequence(FeatureMatrix::Ones(1, 16)));
  write_text(dir / "dup.txt",
             "gvvad-manifest v1 dim=16 clip_len=16\nv\tf.gvft\t0\t0\t-\nv\tf.gvft\t0\t0\t-\n");
  CHECK_THROWS_AS(load_manifest(dir / "dup.txt"), ValidationError);
  write_text(dir / "arity.txt", "gvvad-manifest v1 dim=16 clip_len=16\nv\tf.gvft\t0\n");
  CHECK_THROWS_AS(load_manifest(dir / "arity.txt"), ValidationError);
  write_text(dir / "missing.txt", "gvvad-manifest v1 dim=16 clip_len=16\nv\tnope.gvft\t0\t0\t-\n");
  CHECK_THROWS_AS(load_manifest(dir / "missing.txt"), IoError);
  write_text(dir / "header.txt", "not a manifest\n");
  CHECK_THROWS_AS(load_manifest(dir / "header.txt"), ValidationError);
  CHECK_THROWS_AS(load_manifest(dir / "absent.txt"), IoError);
}

TEST_CASE("manifest save/load round trip") {
  testing::TempDir dir("manifest-rt");
  Rng rng(2);
  DatasetManifest m;
  m.feature_dim = 3;
  m.clip_len = 2;
  for (int i = 0; i < 5; ++i) {
    const auto id = "vid" + std::to_string(i);
    const auto y = i % 2 ? Label::anomalous : Label::normal;
    auto s = testing::make_sample(id, y, i < 3 ? Source::real : Source::synthetic,
                                  testing::random_features(rng, 4, 3), 2, 1, 2);
    write_features(dir / (id + ".gvft"), s.features);
    write_frame_labels(dir / (id + ".gvlb"), *s.frame_labels);
    m.entries.push_back({id, id + ".gvft", y, s.source, id + ".gvlb"});
  }
  save_manifest(m, dir / "m.txt");
  const auto loaded = load_manifest(dir / "m.txt");
  CHECK(loaded == m);
  const auto samples = load_samples(loaded);
  REQUIRE(samples.size() == 5);
  CHECK(samples[1].frame_labels->size() == 8);
  CHECK(samples[3].source == Source::synthetic);
}

TEST_CASE("load_samples checks the feature dim") {
  testing::TempDir dir("manifest-dim");
  write_features(dir / "f.gvft", FeatureSequence(FeatureMatrix::Ones(2, 5)));
  write_text(dir / "m.txt", "gvvad-manifest v1 dim=16 clip_len=16\nv\tf.gvft\t0\t0\t-\n");
  CHECK_THROWS_AS(load_samples(load_manifest(dir / "m.txt")), ValidationError);
}

TEST_CASE("feature file layout") {
  testing::TempDir dir("gvft");
  FeatureMatrix one(1, 1);
  one(0, 0) = 1.5f;
  write_features(dir / "one.gvft", FeatureSequence(one));
  CHECK(fs::file_size(dir / "one.gvft") == 28);
  std::ifstream in(dir / "one.gvft", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "GVFT");
}

TEST_CASE("corrupted payload raises IntegrityError") {
  testing::TempDir dir("gvft-corrupt");
  Rng rng(4);
  write_features(dir / "f.gvft", FeatureSequence(testing::random_features(rng, 3, 4)));
  {
    std::fstream f(dir / "f.gvft", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(20);
    char c = 0x5a;
    f.write(&c, 1);
  }
  CHECK_THROWS_AS(read_features(dir / "f.gvft"), IntegrityError);

  write_features(dir / "g.gvft", FeatureSequence(testing::random_features(rng, 3, 4)));
  fs::resize_file(dir / "g.gvft", fs::file_size(dir / "g.gvft") - 3);
  CHECK_THROWS_AS(read_features(dir / "g.gvft"), IntegrityError);

  const std::vector<std::uint8_t> labels{0, 1, 1, 0};
  write_frame_labels(dir / "l.gvlb", labels);
  {
    std::fstream f(dir / "l.gvlb", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(17);
    char c = 0x00;
    f.write(&c, 1);
  }
  CHECK_THROWS_AS(read_frame_labels(dir / "l.gvlb"), IntegrityError);
  CHECK_THROWS_AS(read_features(dir / "l.gvlb"), IntegrityError);
}

TEST_CASE("random feature and label round trips are exact") {
  testing::TempDir dir("gvft-rt");
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(20));
    const auto cols = static_cast<Eigen::Index>(1 + rng.below(20));
    FeatureMatrix m(rows, cols);
    for (auto& v : m.reshaped()) v = static_cast<float>(rng.normal() * std::pow(10.0, rng.below(10) - 5.0));
    const FeatureSequence seq(m);
    write_features(dir / "f.gvft", seq);
    REQUIRE(read_features(dir / "f.gvft") == seq);

    std::vector<std::uint8_t> labels(1 + rng.below(64));
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(2));
    write_frame_labels(dir / "l.gvlb", labels);
    REQUIRE(read_frame_labels(dir / "l.gvlb") == labels);
  }
}

TEST_CASE("mix_datasets preserves cardinality and sources") {
  Rng rng(5);
  auto ra = samples_of(rng, Label::anomalous, Source::real, 3, "ra");
  auto rn = samples_of(rng, Label::normal, Source::real, 4, "rn");
  auto sa = samples_of(rng, Label::anomalous, Source::synthetic, 5, "sa");
  auto sn = samples_of(rng, Label::normal, Source::synthetic, 6, "sn");
  const auto mixed = mix_datasets(ra, rn, sa, sn);
  CHECK(mixed.anomalous.size() == 8);
  CHECK(mixed.normal.size() == 10);
  CHECK(mixed.count(Label::anomalous, Source::synthetic) == 5);
  CHECK(mixed.count(Label::normal, Source::real) == 4);
  CHECK_NOTHROW(mixed.validate());

  const auto swapped = mix_datasets(ra, rn, sa, sn);
  CHECK(ids_of(mixed.anomalous) == ids_of(swapped.anomalous));

  CHECK_THROWS_AS(mix_datasets(rn, rn, sa, sn), ValidationError);
  CHECK_THROWS_AS(mix_datasets(ra, rn, ra, sn).validate(), ValidationError);
}

TEST_CASE("to_mixed groups by class") {
  Rng rng(6);
  auto all = samples_of(rng, Label::anomalous, Source::real, 2, "a");
  auto n = samples_of(rng, Label::normal, Source::synthetic, 3, "n");
  all.insert(all.end(), n.begin(), n.end());
  const auto mixed = to_mixed(all);
  CHECK(mixed.anomalous.size() == 2);
  CHECK(mixed.normal.size() == 3);
}

TEST_CASE("subsample_real") {
  Rng rng(7);
  const auto mixed = mix_datasets(samples_of(rng, Label::anomalous, Source::real, 100, "ra"),
                                  samples_of(rng, Label::normal, Source::real, 100, "rn"),
                                  samples_of(rng, Label::anomalous, Source::synthetic, 10, "sa"),
                                  samples_of(rng, Label::normal, Source::synthetic, 10, "sn"));
  const auto quarter = subsample_real(mixed, 0.25, 42);
  CHECK(quarter.count(Label::anomalous, Source::real) == 25);
  CHECK(quarter.count(Label::normal, Source::real) == 25);
  CHECK(quarter.count(Label::anomalous, Source::synthetic) == 10);
  CHECK(ids_of(subsample_real(mixed, 0.25, 42).anomalous) == ids_of(quarter.anomalous));
  CHECK(ids_of(subsample_real(mixed, 0.25, 43).anomalous) != ids_of(quarter.anomalous));

  const auto full = subsample_real(mixed, 1.0, 42);
  CHECK(ids_of(full.anomalous) == ids_of(mixed.anomalous));
  CHECK(ids_of(full.normal) == ids_of(mixed.normal));

  CHECK(subsample_real(mixed, 0.011, 1).count(Label::normal, Source::real) == 2);
  CHECK_THROWS_AS(subsample_real(mixed, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(subsample_real(mixed, 1.5, 1), ValidationError);
}
