#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mrstitch/error.hpp"
#include "mrstitch/eval.hpp"
#include "test_util.hpp"

using namespace mrstitch;

namespace {

Image with_noise(const Image& a, double sigma, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  Image out = a;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      Color c = a.at(x, y);
      for (int ch = 0; ch < 3; ++ch) c[ch] = std::clamp(c[ch] + n(rng), 0.0, 255.0);
      out.set(x, y, c);
    }
  return out;
}

Image inverted(const Image& a) {
  Image out = a;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      Color c = a.at(x, y);
      for (int ch = 0; ch < 3; ++ch) c[ch] = 255.0 - c[ch];
      out.set(x, y, c);
    }
  return out;
}

}  // namespace

TEST_CASE("psnr") {
  const Image a = testutil::constant_image(20, 20, {100, 100, 100});
  CHECK(std::isinf(psnr(a, a)));
  const Image b = testutil::constant_image(20, 20, {116, 116, 116});
  CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(255.0 * 255.0 / 256.0)));
  CHECK(psnr(a, b) == doctest::Approx(24.05).epsilon(1e-3));
  CHECK_THROWS_AS(psnr(a, testutil::constant_image(20, 21, {0, 0, 0})), EvaluationError);
  CHECK_THROWS_AS(psnr(a, Image(20, 20)), EvaluationError);
}

TEST_CASE("psnr ignores pixels invalid in either image") {
  const Image a = testutil::constant_image(10, 10, {50, 50, 50});
  Image b = a;
  b.set(3, 3, {0, 0, 0});
  b.set_invalid(3, 3);
  CHECK(std::isinf(psnr(a, b)));
}

TEST_CASE("ms-ssim identity, noise ordering and symmetry") {
  const Image a = testutil::textured_image(128, 96, 11);
  MsSsimInfo info;
  CHECK(ms_ssim(a, a, &info) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(info.scales == 4);  // 128 / 2^4 = 8 < 11 drops the coarsest scale

  double prev = 1.0;
  for (double sigma : {2.0, 8.0, 32.0}) {
    const double s = ms_ssim(a, with_noise(a, sigma, 3));
    CHECK(s < prev);
    prev = s;
  }
  CHECK(ms_ssim(a, inverted(a)) < 0.5);

  const Image b = with_noise(a, 10.0, 4);
  CHECK(ms_ssim(a, b) == doctest::Approx(ms_ssim(b, a)).epsilon(1e-12));
  const double v = ms_ssim(a, b);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);
}

TEST_CASE("ms-ssim uses all five scales on large images") {
  const Image a = testutil::textured_image(200, 180, 12);
  MsSsimInfo info;
  ms_ssim(a, with_noise(a, 4, 1), &info);
  CHECK(info.scales == 5);
}

TEST_CASE("ms-ssim input checks") {
  const Image small = testutil::constant_image(15, 40, {1, 2, 3});
  CHECK_THROWS_AS(ms_ssim(small, small), EvaluationError);
  const Image a = testutil::textured_image(40, 40, 1);
  CHECK_THROWS_AS(ms_ssim(a, testutil::textured_image(41, 40, 1)), EvaluationError);
  // a mask with no complete 11x11 window
  Image holes = a;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x)
      if ((x % 8) == 0) holes.set_invalid(x, y);
  CHECK_THROWS_AS(ms_ssim(a, holes), EvaluationError);
}

TEST_CASE("ms-ssim ignores invalid regions") {
  const Image a = testutil::textured_image(96, 96, 21);
  Image b = a;
  for (int y = 0; y < 96; ++y)
    for (int x = 60; x < 96; ++x) {
      b.set(x, y, {0, 0, 0});
      b.set_invalid(x, y);
    }
  CHECK(ms_ssim(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("crop side names") {
  CHECK(parse_crop_side("left") == CropSide::kLeft);
  CHECK(parse_crop_side("bottom") == CropSide::kBottom);
  CHECK(to_string(CropSide::kTop) == "top");
  CHECK_THROWS_AS(parse_crop_side("middle"), ConfigError);
}

TEST_CASE("crop and band split the reference") {
  const Image ref = testutil::textured_image(60, 40, 5);
  for (CropSide side : {CropSide::kLeft, CropSide::kRight, CropSide::kTop, CropSide::kBottom}) {
    const Image kept = crop_reference(ref, 10, side);
    const Image band = crop_band(ref, 10, side);
    const bool h = side == CropSide::kLeft || side == CropSide::kRight;
    CHECK(kept.width() == (h ? 50 : 60));
    CHECK(kept.height() == (h ? 40 : 30));
    CHECK(band.width() == (h ? 10 : 60));
    CHECK(band.height() == (h ? 40 : 10));
  }
  CHECK(crop_reference(ref, 10, CropSide::kLeft).at(0, 0) == ref.at(10, 0));
  CHECK(crop_band(ref, 10, CropSide::kRight).at(0, 0) == ref.at(50, 0));
  CHECK(crop_reference(ref, 10, CropSide::kTop).at(0, 0) == ref.at(0, 10));
  CHECK_THROWS_AS(crop_reference(ref, 60, CropSide::kLeft), EvaluationError);
  CHECK_THROWS_AS(crop_reference(ref, 0, CropSide::kTop), EvaluationError);
}

TEST_CASE("crop evaluation with an oracle stitcher") {
  const Image ref = testutil::textured_image(120, 90, 8);
  const Image cand = testutil::textured_image(120, 90, 9);
  SUBCASE("perfect recovery of the band") {
    const StitchFn oracle = [&](const Image& kept, const Image&) {
      CHECK(kept.width() == 100);
      return StitchOutput{ref, Canvas{{120, 90}, 20, 0}};
    };
    const EvalReport r = crop_eval("synthetic", ref, cand, 20, CropSide::kLeft, oracle);
    REQUIRE(r.rows.size() == 4);
    for (const auto& row : r.rows) {
      CHECK(row.dataset == "synthetic");
      CHECK(row.status == "ok");
    }
    CHECK(r.rows[0].region == "ground-truth-region");
    CHECK(r.rows[0].metric == "MS-SSIM");
    CHECK(r.rows[0].score == doctest::Approx(1.0));
    CHECK(std::isinf(r.rows[1].score));
    CHECK(r.rows[2].region == "uncropped-reference");
  }
  SUBCASE("band content only affects the ground-truth rows through the band") {
    // Stitcher fills the band with the wrong image; the kept part is exact.
    const StitchFn wrong_band = [&](const Image& kept, const Image&) {
      Image pano = cand;
      for (int y = 0; y < kept.height(); ++y)
        for (int x = 0; x < kept.width(); ++x) pano.set(x + 20, y, kept.at(x, y));
      return StitchOutput{pano, Canvas{{120, 90}, 20, 0}};
    };
    const EvalReport r = crop_eval("d", ref, cand, 20, CropSide::kLeft, wrong_band);
    const double band_psnr = psnr(crop_band(ref, 20, CropSide::kLeft), crop_band(cand, 20, CropSide::kLeft));
    CHECK(r.rows[1].score == doctest::Approx(band_psnr));
    CHECK(r.rows[3].score > r.rows[1].score);
  }
  SUBCASE("top side reads the kept part below the band") {
    const StitchFn oracle = [&](const Image& kept, const Image&) {
      Image pano(130, 100);
      for (int y = 0; y < 90; ++y)
        for (int x = 0; x < 120; ++x) pano.set(x + 5, y + 7, ref.at(x, y));
      CHECK(kept.height() == 70);
      return StitchOutput{pano, Canvas{{130, 100}, 5, 27}};
    };
    const EvalReport r = crop_eval("d", ref, cand, 20, CropSide::kTop, oracle);
    CHECK(r.rows[0].score == doctest::Approx(1.0));
    CHECK(std::isinf(r.rows[3].score));
  }
  SUBCASE("stitch failure gives four failed rows") {
    const StitchFn failing = [](const Image&, const Image&) -> StitchOutput {
      throw NoRegistrationError("nothing");
    };
    const EvalReport r = crop_eval("d", ref, cand, 20, CropSide::kLeft, failing);
    REQUIRE(r.rows.size() == 4);
    for (const auto& row : r.rows) {
      CHECK(row.status == "failed to stitch");
      CHECK(std::isnan(row.score));
    }
  }
  SUBCASE("uncovered band scores as an evaluation failure") {
    const StitchFn kept_only = [](const Image& kept, const Image&) {
      return StitchOutput{kept, Canvas{kept.size(), 0, 0}};
    };
    const EvalReport r = crop_eval("d", ref, cand, 20, CropSide::kLeft, kept_only);
    REQUIRE(r.rows.size() == 4);
    CHECK(r.rows[0].status != "ok");
    CHECK(std::isnan(r.rows[1].score));
    CHECK(std::isinf(r.rows[3].score));
  }
}

TEST_CASE("eval csv") {
  EvalReport r;
  r.rows.push_back({"a", "ground-truth-region", "PSNR", std::numeric_limits<double>::infinity(), "ok"});
  r.rows.push_back({"a", "uncropped-reference", "MS-SSIM", 0.5, "ok"});
  r.rows.push_back({"a", "uncropped-reference", "PSNR", std::nan(""), "failed to stitch"});
  std::ostringstream out;
  write_eval_csv(r, out);
  CHECK(out.str() ==
        "dataset,region,metric,score,status\n"
        "a,ground-truth-region,PSNR,inf,ok\n"
        "a,uncropped-reference,MS-SSIM,0.500000,ok\n"
        "a,uncropped-reference,PSNR,,failed to stitch\n");
}
