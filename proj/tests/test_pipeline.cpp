#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "mrstitch/error.hpp"
#include "mrstitch/eval.hpp"
#include "mrstitch/pipeline.hpp"
#include "mrstitch/synth.hpp"
#include "test_util.hpp"

using namespace mrstitch;
namespace fs = std::filesystem;

namespace {

// The panorama pixels that sit over the reference footprint.
Image reference_footprint(const StitchResult& r, Size size) {
  Image out(size.width, size.height);
  for (int y = 0; y < size.height; ++y)
    for (int x = 0; x < size.width; ++x) {
      const Point2 c = r.canvas.to_canvas({double(x), double(y)});
      const int cx = static_cast<int>(c.x), cy = static_cast<int>(c.y);
      if (r.panorama.in_bounds(cx, cy) && r.panorama.valid(cx, cy))
        out.set(x, y, r.panorama.at(cx, cy));
    }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_scene(const SyntheticScene& s, const fs::path& dir) {
  save_image(s.reference, dir / "reference.png");
  save_image(s.candidate, dir / "candidate.png");
  std::ofstream out(dir / "pairs.txt");
  for (const Correspondence& c : s.correspondences.pairs)
    out << c.p0.x << ' ' << c.p0.y << ' ' << c.p1.x << ' ' << c.p1.y << '\n';
}

}  // namespace

TEST_CASE("a candidate identical to the reference stitches to the reference") {
  const SyntheticScene s = make_synthetic_scene(SceneType::kSinglePlane, 1, 320, 240);
  CorrespondenceSet set;
  for (const Correspondence& c : s.correspondences.pairs) set.pairs.push_back({c.p0, c.p0});
  const StitchResult r = stitch_images(s.reference, s.reference, set, RunConfig{});
  CHECK(r.panorama.size() == s.reference.size());
  CHECK(ms_ssim(reference_footprint(r, s.reference.size()), s.reference) > 0.99);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("single-plane scene") {
  const SyntheticScene s = make_synthetic_scene(SceneType::kSinglePlane, 2, 320, 240);
  const StitchResult r = stitch_images(s.reference, s.candidate, s.correspondences, RunConfig{});
  CHECK(r.registration.candidates.size() == 1);
  CHECK_FALSE(r.reference_only);
  CHECK(r.canvas.size.width == 320 + 30);
  CHECK(r.canvas.size.height == 240);
  CHECK(psnr(reference_footprint(r, s.reference.size()), s.reference) > 30.0);
  // The candidate-only band gets filled from the candidate.
  CHECK(r.panorama.valid(0, 120));
  CHECK(r.labels.width == r.canvas.size.width);
  CHECK(r.expansion.final.total <= r.expansion.initial.total + 1e-9);
  REQUIRE(r.blend.has_value());
  for (const auto& c : r.blend->channels) CHECK(c.relative_residual <= 1e-6);
}

TEST_CASE("registration diagnostics add up") {
  const SyntheticScene s = make_synthetic_scene(SceneType::kStripsTranslation, 4, 320, 240);
  const StitchResult r = stitch_images(s.reference, s.candidate, s.correspondences, RunConfig{});
  const RegistrationDiagnostics& d = r.registration.diagnostics;
  CHECK(d.generated == d.screened_out_total() + d.dedup_dropped + d.kept);
  CHECK(d.kept == static_cast<int>(r.registration.candidates.size()));
}

TEST_CASE("strips scene uses more than one registration in the seam") {
  const SyntheticScene s = make_synthetic_scene(SceneType::kStripsTranslation, 3, 320, 240);
  const StitchResult r = stitch_images(s.reference, s.candidate, s.correspondences, RunConfig{});
  CHECK(r.registration.candidates.size() >= 2);
  std::set<int> used;
  for (int l : r.labels.labels)
    if (l > 0) used.insert(l);
  CHECK(used.size() >= 2);
}

TEST_CASE("too few correspondences is a registration failure") {
  const SyntheticScene s = make_synthetic_scene(SceneType::kSinglePlane, 2, 160, 120);
  CorrespondenceSet set;
  set.pairs.assign(s.correspondences.pairs.begin(), s.correspondences.pairs.begin() + 3);
  try {
    stitch_images(s.reference, s.candidate, set, RunConfig{});
    FAIL("expected NoRegistrationError");
  } catch (const NoRegistrationError& e) {
    CHECK(exit_code_for(e) == 3);
  }
}

TEST_CASE("exit codes by stage") {
  CHECK(exit_code_for(ConfigError("lambda_d", 1, "bad")) == 2);
  CHECK(exit_code_for(NoRegistrationError("none")) == 3);
  CHECK(exit_code_for(IoError("disk")) == 4);
  CHECK(exit_code_for(EvaluationError("eval")) == 1);
}

TEST_CASE("label colors are distinct") {
  std::set<std::array<double, 3>> seen;
  for (int l = 0; l < 8; ++l) {
    const Color c = label_color(l);
    CHECK(seen.insert({c[0], c[1], c[2]}).second);
  }
}

TEST_CASE("run_pipeline writes a deterministic output directory") {
  const auto dir = testutil::temp_dir("pipeline");
  const SyntheticScene s = make_synthetic_scene(SceneType::kDuplicationTrap, 6, 256, 192);
  write_scene(s, dir);
  RunConfig cfg;
  cfg.reference = dir / "reference.png";
  cfg.candidate = dir / "candidate.png";
  cfg.correspondences = dir / "pairs.txt";
  cfg.dump_labels = true;
  cfg.dump_candidates = true;
  cfg.energy_log = true;
  cfg.eval_crop = 20;
  cfg.out_dir = dir / "a";
  const RunReport a = run_pipeline(cfg);
  cfg.out_dir = dir / "b";
  const RunReport b = run_pipeline(cfg);

  CHECK(a.correspondence_count == s.correspondences.pairs.size());
  for (const char* f : {"panorama.png", "labels.png", "labels.txt", "energy.log", "eval.csv",
                        "report.txt", "candidates/candidate_1.png", "candidates/candidate_1.txt"})
    CHECK_MESSAGE(fs::exists(dir / "a" / f), f);
  CHECK(slurp(dir / "a" / "panorama.png") == slurp(dir / "b" / "panorama.png"));
  CHECK(slurp(dir / "a" / "labels.png") == slurp(dir / "b" / "labels.png"));
  REQUIRE(a.eval.has_value());
  CHECK(a.eval->rows.size() == 4);

  const std::string log = slurp(dir / "a" / "energy.log");
  CHECK(log.rfind("cycle label E_m E_w E_s E_d total\n0 -1 ", 0) == 0);
  std::istringstream lines(log);
  std::string line;
  std::getline(lines, line);
  int moves = 0;
  while (std::getline(lines, line)) ++moves;
  CHECK(moves == static_cast<int>(a.result.expansion.accepted.size()) + 1);

  const std::string report = slurp(dir / "a" / "report.txt");
  for (const char* section : {"[timings_ms]", "[registration]", "[seam]", "[blend]", "[eval]",
                              "[warnings]", "[outputs]"})
    CHECK_MESSAGE(report.find(section) != std::string::npos, section);
}

TEST_CASE("missing and corrupt inputs are io errors") {
  const auto dir = testutil::temp_dir("pipeline_io");
  RunConfig cfg;
  cfg.reference = dir / "nope.png";
  cfg.candidate = dir / "nope.png";
  cfg.out_dir = dir / "out";
  try {
    run_pipeline(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(exit_code_for(e) == 4);
  }
  {
    std::ofstream f(dir / "junk.png");
    f << "definitely not a png";
  }
  cfg.reference = dir / "junk.png";
  cfg.candidate = dir / "junk.png";
  try {
    run_pipeline(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(exit_code_for(e) == 4);
  }
}
