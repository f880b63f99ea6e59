#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mrstitch/geometry.hpp"
#include "mrstitch/image.hpp"

namespace mrstitch {

// 10*log10(255^2 / MSE) over RGB on pixels valid in both images. Identical
// inputs give +infinity.
double psnr(const Image& a, const Image& b);

struct MsSsimInfo {
  int scales = 0;  // scales actually used (5 unless the image is small)
};

// Multi-scale SSIM on luma, restricted to windows fully inside both masks.
double ms_ssim(const Image& a, const Image& b, MsSsimInfo* info = nullptr);

enum class CropSide { kLeft, kRight, kTop, kBottom };

CropSide parse_crop_side(const std::string& text);
std::string to_string(CropSide side);

struct StitchOutput {
  Image panorama;
  Canvas canvas;  // where the (cropped) reference sits in the panorama
};

using StitchFn = std::function<StitchOutput(const Image& reference, const Image& candidate)>;

struct EvalRow {
  std::string dataset;
  std::string region;  // "ground-truth-region" or "uncropped-reference"
  std::string metric;  // "MS-SSIM" or "PSNR"
  double score = 0.0;
  std::string status;  // "ok" or a failure description
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

// Removes a band of `crop_px` from one side of the reference, stitches the
// rest with the candidate, and scores the recovered band and the whole
// reference footprint against the original. Always four rows.
EvalReport crop_eval(const std::string& dataset, const Image& reference,
                     const Image& candidate, int crop_px, CropSide side,
                     const StitchFn& stitch);

// The reference with the band removed, and the band itself.
Image crop_reference(const Image& reference, int crop_px, CropSide side);
Image crop_band(const Image& reference, int crop_px, CropSide side);

void write_eval_csv(const EvalReport& report, std::ostream& out);

}  // namespace mrstitch
