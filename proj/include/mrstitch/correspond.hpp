#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "mrstitch/geometry.hpp"
#include "mrstitch/homography.hpp"
#include "mrstitch/image.hpp"

namespace mrstitch {

struct Correspondence {
  Point2 p0;  // reference image
  Point2 p1;  // candidate image
  double score = 1.0;
  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

enum class CorrespondenceSource { kFile, kBuiltinMatcher, kSynthetic };

// Ordered match list. Indices are stable for a pipeline run; inlier sets
// refer to them.
struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  CorrespondenceSource source = CorrespondenceSource::kFile;
  std::size_t duplicates_dropped = 0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  const Correspondence& operator[](std::size_t i) const { return pairs[i]; }
};

// "x0 y0 x1 y1 [score]" per line, '#' comments. Exact duplicate pairs are
// dropped and counted.
CorrespondenceSet parse_correspondences(std::istream& in);
CorrespondenceSet read_correspondences(const std::filesystem::path& path);

// Canonical form; round-trips through parse_correspondences exactly.
void write_correspondences(std::ostream& out, const CorrespondenceSet& set);

// Throws ValidationError naming the first pair with a point outside its
// image's pixel domain [0,w-1]x[0,h-1].
void validate_bounds(const CorrespondenceSet& set, Size reference, Size candidate);

struct MatcherParams {
  double harris_k = 0.04;
  int nms_radius = 5;
  int max_corners = 2000;
  int patch_size = 11;
  double min_ncc = 0.8;
  std::size_t min_matches = 8;
};

// Harris corners + mutual-best NCC patch matching. Throws
// InsufficientMatchesError below params.min_matches.
CorrespondenceSet detect_and_match(const Image& i0, const Image& i1,
                                   const MatcherParams& params = {});

inline constexpr double kReprojectionAtInfinity = 1e12;

// Distance in reference pixels between H(p1) and p0.
double reprojection_error(const Homography& h, const Correspondence& c);

}  // namespace mrstitch
