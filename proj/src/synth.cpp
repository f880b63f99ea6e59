#include "mrstitch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "mrstitch/error.hpp"

namespace mrstitch {

namespace {

struct Blob {
  Point2 centre;
  double radius;
  Color color;
};

struct Block {
  Point2 min, max;
  Color color;
};

// Procedural texture defined on continuous reference coordinates, so both
// images can sample it exactly through any motion.
class Texture {
 public:
  Texture(std::mt19937_64& rng, double x0, double y0, double x1, double y1, Color base) {
    base_ = base;
    std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1), uc(0.0, 255.0);
    std::uniform_real_distribution<double> ur(6.0, 28.0), us(4.0, 22.0);
    const double area = (x1 - x0) * (y1 - y0);
    const int blobs = static_cast<int>(area / 2500.0);
    const int blocks = static_cast<int>(area / 3000.0);
    for (int i = 0; i < blobs; ++i) blobs_.push_back({{ux(rng), uy(rng)}, ur(rng), {uc(rng), uc(rng), uc(rng)}});
    for (int i = 0; i < blocks; ++i) {
      const Point2 a{ux(rng), uy(rng)};
      blocks_.push_back({a, {a.x + us(rng), a.y + us(rng) * 0.6}, {uc(rng), uc(rng), uc(rng)}});
    }
  }

  Color operator()(Point2 p) const {
    Color c{base_[0] + 0.05 * p.x, base_[1] + 0.05 * p.y, base_[2]};
    for (const Blob& b : blobs_) {
      const double dx = p.x - b.centre.x;
      const double dy = p.y - b.centre.y;
      const double d2 = dx * dx + dy * dy;
      if (d2 > 9.0 * b.radius * b.radius) continue;
      const double a = std::exp(-d2 / (2.0 * b.radius * b.radius));
      for (int k = 0; k < 3; ++k) c[k] = (1.0 - a) * c[k] + a * b.color[k];
    }
    for (const Block& r : blocks_) {
      // Soft edges one pixel wide keep the texture band limited.
      const double ax = std::clamp(std::min(p.x - r.min.x, r.max.x - p.x) + 0.5, 0.0, 1.0);
      const double ay = std::clamp(std::min(p.y - r.min.y, r.max.y - p.y) + 0.5, 0.0, 1.0);
      const double a = ax * ay;
      if (a <= 0.0) continue;
      for (int k = 0; k < 3; ++k) c[k] = (1.0 - a) * c[k] + a * r.color[k];
    }
    for (double& v : c) v = std::clamp(v, 0.0, 255.0);
    return c;
  }

 private:
  Color base_;
  std::vector<Blob> blobs_;
  std::vector<Block> blocks_;
};

// High-contrast letter-like mark in a square of side `size` centred at 0.
Color glyph_color(Point2 local, double size) {
  const double u = local.x / size + 0.5;
  const double v = local.y / size + 0.5;
  const bool stroke = (u < 0.25) || (v < 0.2) || (v > 0.8) || (v > 0.42 && v < 0.58 && u < 0.75);
  return stroke ? Color{20.0, 20.0, 160.0} : Color{250.0, 240.0, 60.0};
}

bool inside_square(Point2 p, Point2 centre, double half) {
  return std::abs(p.x - centre.x) <= half && std::abs(p.y - centre.y) <= half;
}

Homography projective(double dx, double dy, double g, double h) {
  Eigen::Matrix3d m;
  m << 1.0, 0.0, dx, 0.0, 1.0, dy, g, h, 1.0;
  return Homography(m);
}

struct Layout {
  std::vector<Homography> motions;
  // Layer visible at a reference / candidate pixel.
  std::function<int(Point2)> reference_layer;
  std::function<int(Point2)> candidate_layer;
};

}  // namespace

SceneType parse_scene_type(const std::string& name) {
  if (name == "single-plane") return SceneType::kSinglePlane;
  if (name == "two-plane") return SceneType::kTwoPlane;
  if (name == "strips-translation") return SceneType::kStripsTranslation;
  if (name == "duplication-trap") return SceneType::kDuplicationTrap;
  throw ConfigError("scene", 0, "unknown scene type '" + name + "'");
}

std::string to_string(SceneType type) {
  switch (type) {
    case SceneType::kSinglePlane: return "single-plane";
    case SceneType::kTwoPlane: return "two-plane";
    case SceneType::kStripsTranslation: return "strips-translation";
    case SceneType::kDuplicationTrap: return "duplication-trap";
  }
  return "single-plane";
}

std::vector<std::size_t> SyntheticScene::layer_indices(int layer) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layer_of.size(); ++i)
    if (layer_of[i] == layer) out.push_back(i);
  return out;
}

SyntheticScene make_synthetic_scene(SceneType type, std::uint64_t seed, int width, int height) {
  if (width < 64 || height < 64) throw ValidationError("synth", "scene must be at least 64x64");
  std::mt19937_64 rng(seed);
  const double w = width;
  const double h = height;
  const double split = std::floor(h / 2.0);

  Layout layout;
  switch (type) {
    case SceneType::kSinglePlane:
      layout.motions = {Homography::translation(30.0, 0.0)};
      break;
    case SceneType::kTwoPlane:
      layout.motions = {Homography::translation(0.375 * w, 0.0),
                        projective(0.42 * w, 8.0, 2e-5, 0.0)};
      break;
    case SceneType::kStripsTranslation:
      layout.motions = {Homography::translation(0.3 * w, 0.0),
                        Homography::translation(0.3 * w + 36.0, 0.0)};
      break;
    case SceneType::kDuplicationTrap:
      layout.motions = {Homography::translation(0.47 * w, 0.0)};
      break;
  }
  if (layout.motions.size() == 1) {
    layout.reference_layer = [](Point2) { return 0; };
    layout.candidate_layer = [](Point2) { return 0; };
  } else {
    layout.reference_layer = [split](Point2 p) { return p.y < split ? 0 : 1; };
    layout.candidate_layer = [split](Point2 p) { return p.y < split ? 0 : 1; };
  }

  std::vector<Texture> textures;
  for (std::size_t l = 0; l < layout.motions.size(); ++l) {
    std::uniform_real_distribution<double> base(60.0, 180.0);
    textures.emplace_back(rng, -0.1 * w, -0.1 * h, 2.1 * w, 1.1 * h,
                          Color{base(rng), base(rng), base(rng)});
  }

  SyntheticScene scene;
  scene.type = type;
  scene.motions = layout.motions;
  const bool trap = type == SceneType::kDuplicationTrap;
  if (trap) {
    scene.glyph_size = 44.0;
    scene.glyph_reference = {std::round(0.66 * w), std::round(0.42 * h)};
    scene.glyph_candidate = scene.glyph_reference;
  }
  const double half = scene.glyph_size / 2.0;

  scene.reference = Image(width, height);
  scene.candidate = Image(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      if (trap && inside_square(p, scene.glyph_reference, half)) {
        scene.reference.set(x, y, glyph_color(p - scene.glyph_reference, scene.glyph_size));
      } else {
        scene.reference.set(x, y, textures[static_cast<std::size_t>(layout.reference_layer(p))](p));
      }
      if (trap && inside_square(p, scene.glyph_candidate, half)) {
        scene.candidate.set(x, y, glyph_color(p - scene.glyph_candidate, scene.glyph_size));
      } else {
        const int l = layout.candidate_layer(p);
        const auto world = scene.motions[static_cast<std::size_t>(l)].apply(p);
        scene.candidate.set(x, y, textures[static_cast<std::size_t>(l)](*world));
      }
    }
  }

  // Background matches on a jittered grid of integer candidate pixels.
  scene.correspondences.source = CorrespondenceSource::kSynthetic;
  const int stride = 16;
  std::uniform_int_distribution<int> jitter(0, stride - 1);
  const double margin = half + 8.0;
  for (int gy = 0; gy + stride <= height; gy += stride) {
    for (int gx = 0; gx + stride <= width; gx += stride) {
      const Point2 p1{static_cast<double>(gx + jitter(rng)), static_cast<double>(gy + jitter(rng))};
      const int l = layout.candidate_layer(p1);
      const auto p0 = scene.motions[static_cast<std::size_t>(l)].apply(p1);
      if (!p0 || p0->x < 0 || p0->y < 0 || p0->x > w - 1 || p0->y > h - 1) continue;
      if (layout.reference_layer(*p0) != l) continue;
      if (trap && (inside_square(p1, scene.glyph_candidate, margin) ||
                   inside_square(*p0, scene.glyph_reference, margin)))
        continue;
      scene.correspondences.pairs.push_back({*p0, p1, 1.0});
      scene.layer_of.push_back(l);
    }
  }

  // The glyph's own matches disagree with the background motion.
  if (trap) {
    const int steps = 5;
    for (int j = 0; j < steps; ++j)
      for (int i = 0; i < steps; ++i) {
        const Point2 offset{std::round((i - 2) * 0.2 * scene.glyph_size),
                            std::round((j - 2) * 0.2 * scene.glyph_size)};
        scene.correspondences.pairs.push_back(
            {scene.glyph_reference + offset, scene.glyph_candidate + offset, 1.0});
        scene.layer_of.push_back(1);
      }
  }
  return scene;
}

}  // namespace mrstitch
