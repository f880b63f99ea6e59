#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mrstitch/correspond.hpp"
#include "mrstitch/error.hpp"

namespace mrstitch {

namespace {

struct Corner {
  int x;
  int y;
  double response;
};

// 1-D Gaussian blur along both axes with replicated borders.
Plane blur(const Plane& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  const int w = in.width();
  const int h = in.height();
  Plane tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * in(std::clamp(x + i, 0, w - 1), y);
      }
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp(x, std::clamp(y + i, 0, h - 1));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

bool patch_valid(const Image& img, int cx, int cy, int half) {
  for (int y = cy - half; y <= cy + half; ++y) {
    for (int x = cx - half; x <= cx + half; ++x) {
      if (!img.in_bounds(x, y) || !img.valid(x, y)) return false;
    }
  }
  return true;
}

std::vector<Corner> harris_corners(const Image& img, const Plane& gray,
                                   const MatcherParams& params) {
  const int w = gray.width();
  const int h = gray.height();
  Plane ixx(w, h), iyy(w, h), ixy(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx =
          0.5 * (gray(std::min(x + 1, w - 1), y) - gray(std::max(x - 1, 0), y));
      const double gy =
          0.5 * (gray(x, std::min(y + 1, h - 1)) - gray(x, std::max(y - 1, 0)));
      ixx(x, y) = gx * gx;
      iyy(x, y) = gy * gy;
      ixy(x, y) = gx * gy;
    }
  }
  const Plane sxx = blur(ixx, 1.0);
  const Plane syy = blur(iyy, 1.0);
  const Plane sxy = blur(ixy, 1.0);
  Plane response(w, h);
  double max_response = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double det = sxx(x, y) * syy(x, y) - sxy(x, y) * sxy(x, y);
      const double tr = sxx(x, y) + syy(x, y);
      response(x, y) = det - params.harris_k * tr * tr;
      max_response = std::max(max_response, response(x, y));
    }
  }
  const double threshold = std::max(1e-6, 0.01 * max_response);
  const int half = params.patch_size / 2;
  const int r = params.nms_radius;
  std::vector<Corner> corners;
  for (int y = half; y < h - half; ++y) {
    for (int x = half; x < w - half; ++x) {
      const double v = response(x, y);
      if (v <= threshold) continue;
      bool is_max = true;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r) && is_max; ++yy) {
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
          const double o = response(xx, yy);
          // Ties resolve to the first pixel in raster order.
          if (o > v || (o == v && (yy < y || (yy == y && xx < x)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max && patch_valid(img, x, y, half)) corners.push_back({x, y, v});
    }
  }
  std::stable_sort(corners.begin(), corners.end(),
                   [](const Corner& a, const Corner& b) { return a.response > b.response; });
  if (corners.size() > static_cast<std::size_t>(params.max_corners)) {
    corners.resize(params.max_corners);
  }
  return corners;
}

// Zero-mean, unit-norm patch vectors; corners on flat patches are dropped.
std::vector<float> describe(const Plane& gray, std::vector<Corner>& corners,
                            int patch_size) {
  const int half = patch_size / 2;
  const std::size_t dim = static_cast<std::size_t>(patch_size) * patch_size;
  std::vector<float> out;
  std::vector<Corner> kept;
  std::vector<double> v(dim);
  for (const Corner& c : corners) {
    std::size_t k = 0;
    double mean = 0;
    for (int y = -half; y <= half; ++y) {
      for (int x = -half; x <= half; ++x) {
        v[k] = gray(c.x + x, c.y + y);
        mean += v[k++];
      }
    }
    mean /= static_cast<double>(dim);
    double ss = 0;
    for (double& e : v) {
      e -= mean;
      ss += e * e;
    }
    if (ss < 1e-9) continue;
    const double inv = 1.0 / std::sqrt(ss);
    for (double e : v) out.push_back(static_cast<float>(e * inv));
    kept.push_back(c);
  }
  corners = std::move(kept);
  return out;
}

}  // namespace

CorrespondenceSet detect_and_match(const Image& i0, const Image& i1,
                                   const MatcherParams& params) {
  const Plane g0 = to_grayscale(i0);
  const Plane g1 = to_grayscale(i1);
  std::vector<Corner> c0 = harris_corners(i0, g0, params);
  std::vector<Corner> c1 = harris_corners(i1, g1, params);
  const std::vector<float> d0 = describe(g0, c0, params.patch_size);
  const std::vector<float> d1 = describe(g1, c1, params.patch_size);
  const std::size_t dim = static_cast<std::size_t>(params.patch_size) * params.patch_size;

  const std::size_t n0 = c0.size();
  const std::size_t n1 = c1.size();
  std::vector<std::size_t> best01(n0, n1);
  std::vector<float> score01(n0, -2.0f);
  std::vector<std::size_t> best10(n1, n0);
  std::vector<float> score10(n1, -2.0f);
  for (std::size_t a = 0; a < n0; ++a) {
    const float* da = &d0[a * dim];
    for (std::size_t b = 0; b < n1; ++b) {
      const float* db = &d1[b * dim];
      float dot = 0.0f;
      for (std::size_t k = 0; k < dim; ++k) dot += da[k] * db[k];
      if (dot > score01[a]) {
        score01[a] = dot;
        best01[a] = b;
      }
      if (dot > score10[b]) {
        score10[b] = dot;
        best10[b] = a;
      }
    }
  }

  CorrespondenceSet out;
  out.source = CorrespondenceSource::kBuiltinMatcher;
  for (std::size_t a = 0; a < n0; ++a) {
    const std::size_t b = best01[a];
    if (b == n1 || best10[b] != a || score01[a] < params.min_ncc) continue;
    out.pairs.push_back({{double(c0[a].x), double(c0[a].y)},
                         {double(c1[b].x), double(c1[b].y)},
                         std::min(1.0, static_cast<double>(score01[a]))});
  }
  if (out.size() < params.min_matches) {
    throw InsufficientMatchesError("built-in matcher found " + std::to_string(out.size()) +
                                   " matches, need at least " +
                                   std::to_string(params.min_matches));
  }
  return out;
}

}  // namespace mrstitch
