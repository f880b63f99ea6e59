#include "mrstitch/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "mrstitch/error.hpp"

namespace mrstitch {

namespace {

constexpr std::array<double, 5> kScaleWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

void require_same_size(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw EvaluationError("images differ in size: " + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                          "x" + std::to_string(b.height()));
}

struct Luma {
  int width = 0;
  int height = 0;
  std::vector<double> a, b;
  std::vector<char> mask;
};

Luma joint_luma(const Image& a, const Image& b) {
  Luma l;
  l.width = a.width();
  l.height = a.height();
  const std::size_t n = static_cast<std::size_t>(l.width) * l.height;
  l.a.assign(n, 0.0);
  l.b.assign(n, 0.0);
  l.mask.assign(n, 0);
  auto luma = [](const Color& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; };
  for (int y = 0; y < l.height; ++y)
    for (int x = 0; x < l.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * l.width + x;
      if (!a.valid(x, y) || !b.valid(x, y)) continue;
      l.a[i] = luma(a.at(x, y));
      l.b[i] = luma(b.at(x, y));
      l.mask[i] = 1;
    }
  return l;
}

Luma downsample(const Luma& in) {
  Luma out;
  out.width = in.width / 2;
  out.height = in.height / 2;
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
  out.a.assign(n, 0.0);
  out.b.assign(n, 0.0);
  out.mask.assign(n, 0);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      double sa = 0.0, sb = 0.0;
      bool ok = true;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const std::size_t j = static_cast<std::size_t>(2 * y + dy) * in.width + 2 * x + dx;
          ok = ok && in.mask[j];
          sa += in.a[j];
          sb += in.b[j];
        }
      if (!ok) continue;
      const std::size_t i = static_cast<std::size_t>(y) * out.width + x;
      out.a[i] = sa / 4.0;
      out.b[i] = sb / 4.0;
      out.mask[i] = 1;
    }
  return out;
}

// Separable Gaussian filtering without padding: output is (w-10) x (h-10).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::array<double, kWindow>& k) {
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < kWindow; ++t) s += k[t] * src[static_cast<std::size_t>(y) * w + x + t];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < kWindow; ++t) s += k[t] * tmp[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

struct ScaleStats {
  bool any = false;
  double luminance = 0.0;
  double contrast_structure = 0.0;
};

ScaleStats ssim_scale(const Luma& l) {
  ScaleStats st;
  const int w = l.width;
  const int h = l.height;
  if (w < kWindow || h < kWindow) return st;

  std::array<double, kWindow> k{};
  double ksum = 0.0;
  for (int t = 0; t < kWindow; ++t) {
    const double d = t - kWindow / 2;
    k[t] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    ksum += k[t];
  }
  for (double& v : k) v /= ksum;

  const std::size_t n = l.a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = l.a[i] * l.a[i];
    bb[i] = l.b[i] * l.b[i];
    ab[i] = l.a[i] * l.b[i];
  }
  const auto mu_a = filter_valid(l.a, w, h, k);
  const auto mu_b = filter_valid(l.b, w, h, k);
  const auto e_aa = filter_valid(aa, w, h, k);
  const auto e_bb = filter_valid(bb, w, h, k);
  const auto e_ab = filter_valid(ab, w, h, k);

  // Summed-area table of the mask to find fully valid windows.
  std::vector<long> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      sat[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
          l.mask[static_cast<std::size_t>(y) * w + x] +
          sat[static_cast<std::size_t>(y) * (w + 1) + x + 1] +
          sat[static_cast<std::size_t>(y + 1) * (w + 1) + x] -
          sat[static_cast<std::size_t>(y) * (w + 1) + x];
  auto window_sum = [&](int x, int y) {
    const int x1 = x + kWindow;
    const int y1 = y + kWindow;
    return sat[static_cast<std::size_t>(y1) * (w + 1) + x1] -
           sat[static_cast<std::size_t>(y) * (w + 1) + x1] -
           sat[static_cast<std::size_t>(y1) * (w + 1) + x] +
           sat[static_cast<std::size_t>(y) * (w + 1) + x];
  };

  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  double sum_l = 0.0, sum_cs = 0.0;
  long count = 0;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      if (window_sum(x, y) != kWindow * kWindow) continue;
      const std::size_t i = static_cast<std::size_t>(y) * ow + x;
      const double ma = mu_a[i];
      const double mb = mu_b[i];
      const double va = e_aa[i] - ma * ma;
      const double vb = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      sum_l += (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
      sum_cs += (2.0 * cov + kC2) / (va + vb + kC2);
      ++count;
    }
  if (count == 0) return st;
  st.any = true;
  st.luminance = sum_l / count;
  st.contrast_structure = sum_cs / count;
  return st;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_size(a, b);
  double sse = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!a.valid(x, y) || !b.valid(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = a.channel(x, y, c) - b.channel(x, y, c);
        sse += d * d;
      }
      ++count;
    }
  if (count == 0) throw EvaluationError("no pixels valid in both images");
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / (3.0 * static_cast<double>(count));
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ms_ssim(const Image& a, const Image& b, MsSsimInfo* info) {
  require_same_size(a, b);
  if (a.width() < 16 || a.height() < 16)
    throw EvaluationError("images smaller than 16 px cannot be scored with MS-SSIM");

  std::vector<ScaleStats> stats;
  Luma level = joint_luma(a, b);
  for (int s = 0; s < static_cast<int>(kScaleWeights.size()); ++s) {
    if (s > 0) {
      level = downsample(level);
      if (std::min(level.width, level.height) < kWindow) break;
    }
    ScaleStats st = ssim_scale(level);
    if (!st.any) break;
    stats.push_back(st);
  }
  if (stats.empty()) throw EvaluationError("no 11x11 window is valid in both images");

  const int m = static_cast<int>(stats.size());
  double weight_sum = 0.0;
  for (int s = 0; s < m; ++s) weight_sum += kScaleWeights[s];
  double score = 1.0;
  for (int s = 0; s < m; ++s) {
    double term = std::max(0.0, stats[s].contrast_structure);
    if (s == m - 1) term *= std::max(0.0, stats[s].luminance);
    score *= std::pow(term, kScaleWeights[s] / weight_sum);
  }
  if (info) info->scales = m;
  return std::clamp(score, 0.0, 1.0);
}

CropSide parse_crop_side(const std::string& text) {
  if (text == "left") return CropSide::kLeft;
  if (text == "right") return CropSide::kRight;
  if (text == "top") return CropSide::kTop;
  if (text == "bottom") return CropSide::kBottom;
  throw ConfigError("eval_side", 0, "unknown crop side '" + text + "'");
}

std::string to_string(CropSide side) {
  switch (side) {
    case CropSide::kLeft: return "left";
    case CropSide::kRight: return "right";
    case CropSide::kTop: return "top";
    case CropSide::kBottom: return "bottom";
  }
  return "left";
}

namespace {

bool horizontal(CropSide side) { return side == CropSide::kLeft || side == CropSide::kRight; }

void check_crop(const Image& reference, int crop_px, CropSide side) {
  const int extent = horizontal(side) ? reference.width() : reference.height();
  if (crop_px <= 0 || crop_px >= extent)
    throw EvaluationError("crop of " + std::to_string(crop_px) + " px does not fit a side of " +
                          std::to_string(extent) + " px");
}

Image copy_region(const Image& src, int x0, int y0, int w, int h) {
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (src.valid(x0 + x, y0 + y)) out.set(x, y, src.at(x0 + x, y0 + y));
  return out;
}

// Offset of the kept part of the reference inside the original.
Point2 kept_origin(int crop_px, CropSide side) {
  if (side == CropSide::kLeft) return {static_cast<double>(crop_px), 0.0};
  if (side == CropSide::kTop) return {0.0, static_cast<double>(crop_px)};
  return {0.0, 0.0};
}

}  // namespace

Image crop_reference(const Image& reference, int crop_px, CropSide side) {
  check_crop(reference, crop_px, side);
  const Point2 o = kept_origin(crop_px, side);
  const int w = horizontal(side) ? reference.width() - crop_px : reference.width();
  const int h = horizontal(side) ? reference.height() : reference.height() - crop_px;
  return copy_region(reference, static_cast<int>(o.x), static_cast<int>(o.y), w, h);
}

Image crop_band(const Image& reference, int crop_px, CropSide side) {
  check_crop(reference, crop_px, side);
  switch (side) {
    case CropSide::kLeft: return copy_region(reference, 0, 0, crop_px, reference.height());
    case CropSide::kRight:
      return copy_region(reference, reference.width() - crop_px, 0, crop_px, reference.height());
    case CropSide::kTop: return copy_region(reference, 0, 0, reference.width(), crop_px);
    case CropSide::kBottom:
      return copy_region(reference, 0, reference.height() - crop_px, reference.width(), crop_px);
  }
  return {};
}

EvalReport crop_eval(const std::string& dataset, const Image& reference,
                     const Image& candidate, int crop_px, CropSide side,
                     const StitchFn& stitch) {
  const Image cropped = crop_reference(reference, crop_px, side);
  const Image band = crop_band(reference, crop_px, side);

  EvalReport report;
  auto add = [&](const std::string& region, const std::string& metric, double score,
                 const std::string& status) {
    report.rows.push_back({dataset, region, metric, score, status});
  };
  auto fail_all = [&](const std::string& status) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const char* region : {"ground-truth-region", "uncropped-reference"})
      for (const char* metric : {"MS-SSIM", "PSNR"}) add(region, metric, nan, status);
  };

  StitchOutput out;
  try {
    out = stitch(cropped, candidate);
  } catch (const Error&) {
    fail_all("failed to stitch");
    return report;
  }

  // Read back the original reference footprint from the panorama.
  const Point2 o = kept_origin(crop_px, side);
  Image recovered(reference.width(), reference.height());
  for (int y = 0; y < reference.height(); ++y)
    for (int x = 0; x < reference.width(); ++x) {
      const Point2 c = out.canvas.to_canvas({x - o.x, y - o.y});
      const int cx = static_cast<int>(c.x);
      const int cy = static_cast<int>(c.y);
      if (out.panorama.in_bounds(cx, cy) && out.panorama.valid(cx, cy))
        recovered.set(x, y, out.panorama.at(cx, cy));
    }
  const Image recovered_band = crop_band(recovered, crop_px, side);

  auto score = [&](const std::string& region, const Image& a, const Image& b) {
    for (const char* metric : {"MS-SSIM", "PSNR"}) {
      try {
        const double v = std::string(metric) == "PSNR" ? psnr(a, b) : ms_ssim(a, b);
        add(region, metric, v, "ok");
      } catch (const EvaluationError& e) {
        add(region, metric, std::numeric_limits<double>::quiet_NaN(), e.what());
      }
    }
  };
  score("ground-truth-region", band, recovered_band);
  score("uncropped-reference", reference, recovered);
  return report;
}

void write_eval_csv(const EvalReport& report, std::ostream& out) {
  out << "dataset,region,metric,score,status\n";
  for (const EvalRow& r : report.rows) {
    std::string score;
    if (std::isnan(r.score)) {
      score = "";
    } else if (std::isinf(r.score)) {
      score = "inf";
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", r.score);
      score = buf;
    }
    out << r.dataset << ',' << r.region << ',' << r.metric << ',' << score << ',' << r.status
        << '\n';
  }
}

}  // namespace mrstitch
