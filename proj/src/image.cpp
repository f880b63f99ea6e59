#include "mrstitch/image.hpp"

#include <algorithm>
#include <cmath>

namespace mrstitch {

double color_distance(const Color& a, const Color& b) {
  const double dr = a[0] - b[0];
  const double dg = a[1] - b[1];
  const double db = a[2] - b[2];
  return std::sqrt(dr * dr + dg * dg + db * db);
}

Image::Image(int width, int height)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(width) * height * 3, 0.0),
      mask_(static_cast<std::size_t>(width) * height, 0) {}

void Image::set(int x, int y, const Color& c) {
  const std::size_t i = index(x, y);
  pixels_[i * 3] = c[0];
  pixels_[i * 3 + 1] = c[1];
  pixels_[i * 3 + 2] = c[2];
  mask_[i] = 1;
}

void Image::set_invalid(int x, int y) {
  const std::size_t i = index(x, y);
  pixels_[i * 3] = kSentinelColor[0];
  pixels_[i * 3 + 1] = kSentinelColor[1];
  pixels_[i * 3 + 2] = kSentinelColor[2];
  mask_[i] = 0;
}

std::size_t Image::valid_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1));
}

std::uint8_t quantize(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

Plane to_grayscale(const Image& img) {
  Plane out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!img.valid(x, y)) continue;
      const Color c = img.at(x, y);
      out(x, y) = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
    }
  }
  return out;
}

Plane gradient_magnitude(const Plane& p) {
  const int w = p.width();
  const int h = p.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const double gx = 0.5 * (p(xp, y) - p(xm, y));
      const double gy = 0.5 * (p(x, yp) - p(x, ym));
      out(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

namespace {

double luma(const Color& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

}  // namespace

double masked_gradient_at(const Image& img, int x, int y) {
  if (!img.valid(x, y)) return 0.0;
  const double center = luma(img.at(x, y));
  auto sample = [&](int xx, int yy) {
    return img.in_bounds(xx, yy) && img.valid(xx, yy) ? luma(img.at(xx, yy)) : center;
  };
  const double gx = 0.5 * (sample(x + 1, y) - sample(x - 1, y));
  const double gy = 0.5 * (sample(x, y + 1) - sample(x, y - 1));
  return std::sqrt(gx * gx + gy * gy);
}

Plane masked_gradient_magnitude(const Image& img) {
  Plane out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out(x, y) = masked_gradient_at(img, x, y);
  }
  return out;
}

namespace {

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-6 ? r : v;
}

}  // namespace

Sample bilinear_sample(const Image& img, double x, double y) {
  x = snap(x);
  y = snap(y);
  if (!std::isfinite(x) || !std::isfinite(y)) return {};
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  if (fx0 < -1.0 || fy0 < -1.0 || fx0 > img.width() || fy0 > img.height()) {
    return {};
  }
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double ax = x - fx0;
  const double ay = y - fy0;
  const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay,
                         ax * ay};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  Sample s;
  s.valid = true;
  for (int k = 0; k < 4; ++k) {
    if (wts[k] == 0.0) continue;
    if (!img.in_bounds(xs[k], ys[k]) || !img.valid(xs[k], ys[k])) return {};
    const Color c = img.at(xs[k], ys[k]);
    for (int ch = 0; ch < 3; ++ch) s.color[ch] += wts[k] * c[ch];
  }
  return s;
}

}  // namespace mrstitch
