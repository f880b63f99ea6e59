#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mrstitch/correspond.hpp"
#include "mrstitch/eval.hpp"
#include "mrstitch/registration.hpp"
#include "mrstitch/seam.hpp"

namespace mrstitch {

struct RunConfig {
  std::filesystem::path reference;
  std::filesystem::path candidate;
  std::optional<std::filesystem::path> correspondences;
  std::filesystem::path out_dir = "out";

  RegistrationParams registration;
  EnergyParams energy;
  MatcherParams matcher;
  int max_cycles = 100;
  bool blend = true;

  int eval_crop = 0;  // 0 disables the crop evaluation
  CropSide eval_side = CropSide::kLeft;
  std::string dataset = "run";

  std::uint64_t seed = 0;
  bool dump_candidates = false;
  bool dump_labels = false;
  bool energy_log = false;
  // Explicit destinations; default to fixed names inside out_dir.
  std::optional<std::filesystem::path> labels_path;
  std::optional<std::filesystem::path> candidates_dir;
  std::optional<std::filesystem::path> energy_log_path;
};

// Applies one "key = value" setting. `line` is reported in errors (0 for
// command-line overrides).
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, int line);

// Checks constraints that involve more than one key.
void check_config(const RunConfig& cfg);

// Flat "key = value" text, '#' starts a comment. Starts from `base`.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base = {});

// Splits "key=value" as given to --set.
std::pair<std::string, std::string> split_override(const std::string& text);

std::vector<std::string> config_keys();

}  // namespace mrstitch
