#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrstitch/correspond.hpp"
#include "mrstitch/homography.hpp"
#include "mrstitch/image.hpp"

namespace mrstitch {

enum class SceneType { kSinglePlane, kTwoPlane, kStripsTranslation, kDuplicationTrap };

// Throws ConfigError for unknown names.
SceneType parse_scene_type(const std::string& name);
std::string to_string(SceneType type);

struct SyntheticScene {
  SceneType type = SceneType::kSinglePlane;
  Image reference;
  Image candidate;
  CorrespondenceSet correspondences;
  // Candidate -> reference motion of each layer.
  std::vector<Homography> motions;
  // Layer of each correspondence (parallel to correspondences.pairs).
  std::vector<int> layer_of;
  // Duplication trap only: glyph centre in each image.
  Point2 glyph_reference{0, 0};
  Point2 glyph_candidate{0, 0};
  double glyph_size = 0.0;

  std::vector<std::size_t> layer_indices(int layer) const;
};

SyntheticScene make_synthetic_scene(SceneType type, std::uint64_t seed, int width = 640,
                                    int height = 480);

}  // namespace mrstitch
