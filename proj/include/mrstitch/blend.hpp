#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrstitch/image.hpp"
#include "mrstitch/seam.hpp"

namespace mrstitch {

enum class PixelRole : std::uint8_t { kOutside, kFixed, kFree };

// Gradient-domain blending setup. Guidance along each 4-neighbor edge is the
// color difference "right minus left" / "down minus up" per channel.
struct BlendProblem {
  Image composite;
  std::vector<PixelRole> roles;
  std::vector<Color> guidance_x;  // edge (x,y)-(x+1,y)
  std::vector<Color> guidance_y;  // edge (x,y)-(x,y+1)

  int width() const { return composite.width(); }
  int height() const { return composite.height(); }
  std::size_t fixed_count() const;
  std::size_t free_count() const;
};

// Same-label edges take that source's gradient; seam edges average the two
// sources' gradients where available. Reference-labeled valid pixels are
// the Dirichlet boundary. Throws EmptyProblemError without valid pixels.
BlendProblem build_guidance(const Image& composite, const Labeling& labels,
                            const std::vector<Image>& sources);

struct ChannelStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = true;
};

struct BlendReport {
  std::vector<ChannelStats> channels;
  std::size_t free_pixels = 0;
  std::size_t unanchored_pixels = 0;  // free components with no boundary
  std::vector<std::string> warnings;
};

struct PoissonOptions {
  double tolerance = 1e-6;
  int max_iterations = 10000;
};

// Per-channel conjugate gradient on the 4-neighbor Poisson system; output
// clamped to [0,255].
Image solve_poisson(const BlendProblem& problem, BlendReport* report = nullptr,
                    const PoissonOptions& options = {});

}  // namespace mrstitch
