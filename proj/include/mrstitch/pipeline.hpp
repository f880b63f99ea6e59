#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrstitch/blend.hpp"
#include "mrstitch/config.hpp"
#include "mrstitch/correspond.hpp"
#include "mrstitch/error.hpp"
#include "mrstitch/eval.hpp"
#include "mrstitch/registration.hpp"
#include "mrstitch/seam.hpp"

namespace mrstitch {

struct StitchResult {
  Image panorama;
  Image raw_composite;
  Labeling labels;
  Canvas canvas;
  RegistrationResult registration;
  StitchProblem problem;
  ExpansionResult expansion;
  std::optional<BlendReport> blend;
  std::vector<std::pair<std::string, double>> timings_ms;
  std::vector<std::string> warnings;
  bool reference_only = false;  // every candidate was a near-identity
};

// The in-memory pipeline: registration, seam finding, optional blending.
StitchResult stitch_images(const Image& reference, const Image& candidate,
                           const CorrespondenceSet& correspondences, const RunConfig& cfg);

// Builds the seam problem for a set of registrations.
StitchProblem make_stitch_problem(const Image& reference, const CorrespondenceSet& set,
                                  const RegistrationResult& registration,
                                  const EnergyParams& params);

struct RunReport {
  StitchResult result;
  CorrespondenceSource correspondence_source = CorrespondenceSource::kFile;
  std::size_t correspondence_count = 0;
  std::optional<EvalReport> eval;
  std::vector<std::filesystem::path> outputs;
  std::vector<std::pair<std::string, double>> timings_ms;
};

// Loads inputs, stitches, and writes the output directory.
RunReport run_pipeline(const RunConfig& cfg);

void write_report(const RunReport& report, const RunConfig& cfg, std::ostream& out);

// Labels rendered with a fixed palette; black where no source is valid.
Color label_color(int label);

// 0 success, 2 config, 3 registration failure, 4 input/output, 1 otherwise.
int exit_code_for(const Error& error);

}  // namespace mrstitch
