#include "mrstitch/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mrstitch/error.hpp"

namespace mrstitch {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw std::invalid_argument("expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

// "12" is pixels, "15%" a fraction of the image diagonal.
Length to_length(const std::string& v) {
  if (!v.empty() && v.back() == '%') return {to_double(trim(v.substr(0, v.size() - 1))) / 100.0, true};
  return {to_double(v), false};
}

double positive(double x) {
  if (!(x > 0)) throw std::invalid_argument("must be positive");
  return x;
}

double nonnegative(double x) {
  if (!(x >= 0)) throw std::invalid_argument("must be nonnegative");
  return x;
}

int positive_int(long long x) {
  if (x <= 0 || x > 1'000'000'000) throw std::invalid_argument("must be a positive integer");
  return static_cast<int>(x);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"reference", [](RunConfig& c, const std::string& v) { c.reference = v; }},
      {"candidate", [](RunConfig& c, const std::string& v) { c.candidate = v; }},
      {"correspondences", [](RunConfig& c, const std::string& v) {
         if (v.empty()) c.correspondences.reset();
         else c.correspondences = v;
       }},
      {"out", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"tau_h", [](RunConfig& c, const std::string& v) {
         c.registration.iterations = positive_int(to_integer(v));
       }},
      {"r_h", [](RunConfig& c, const std::string& v) {
         Length l = to_length(v);
         positive(l.value);
         c.registration.seed_radius = l;
       }},
      {"t_h", [](RunConfig& c, const std::string& v) {
         c.registration.inlier_threshold = positive(to_double(v));
       }},
      {"r_d", [](RunConfig& c, const std::string& v) {
         Length l = to_length(v);
         positive(l.value);
         c.registration.growth_radius = l;
       }},
      {"theta_h", [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         if (!(x > 0 && x <= 1)) throw std::invalid_argument("must lie in (0, 1]");
         c.registration.dedup_threshold = x;
       }},
      {"n_h", [](RunConfig& c, const std::string& v) {
         c.registration.max_homographies = positive_int(to_integer(v));
       }},
      {"sim_dev_max", [](RunConfig& c, const std::string& v) {
         c.registration.sim_dev_max = positive(to_double(v));
       }},
      {"scale_min", [](RunConfig& c, const std::string& v) {
         c.registration.scale_min = positive(to_double(v));
       }},
      {"scale_max", [](RunConfig& c, const std::string& v) {
         c.registration.scale_max = positive(to_double(v));
       }},
      {"overlap_identity_max", [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         if (!(x > 0 && x < 1)) throw std::invalid_argument("must lie in (0, 1)");
         c.registration.overlap_identity_max = x;
       }},
      {"diag_min_frac", [](RunConfig& c, const std::string& v) {
         c.registration.diag_min_frac = positive(to_double(v));
       }},
      {"cpw_grid", [](RunConfig& c, const std::string& v) {
         c.registration.cpw.grid = positive_int(to_integer(v));
       }},
      {"cpw_data_weight", [](RunConfig& c, const std::string& v) {
         c.registration.cpw.data_weight = positive(to_double(v));
       }},
      {"cpw_similarity_weight", [](RunConfig& c, const std::string& v) {
         c.registration.cpw.similarity_weight = positive(to_double(v));
       }},
      {"lambda_m", [](RunConfig& c, const std::string& v) { c.energy.lambda_m = nonnegative(to_double(v)); }},
      {"lambda_w", [](RunConfig& c, const std::string& v) { c.energy.lambda_w = nonnegative(to_double(v)); }},
      {"lambda_c", [](RunConfig& c, const std::string& v) { c.energy.lambda_c = nonnegative(to_double(v)); }},
      {"lambda_s", [](RunConfig& c, const std::string& v) { c.energy.lambda_s = nonnegative(to_double(v)); }},
      {"lambda_e", [](RunConfig& c, const std::string& v) { c.energy.lambda_e = nonnegative(to_double(v)); }},
      {"lambda_potts", [](RunConfig& c, const std::string& v) {
         c.energy.lambda_potts = nonnegative(to_double(v));
       }},
      {"lambda_d", [](RunConfig& c, const std::string& v) { c.energy.lambda_d = nonnegative(to_double(v)); }},
      {"r_patch", [](RunConfig& c, const std::string& v) { c.energy.r_patch = nonnegative(to_double(v)); }},
      {"r_dup", [](RunConfig& c, const std::string& v) { c.energy.r_dup = nonnegative(to_double(v)); }},
      {"sigma_m", [](RunConfig& c, const std::string& v) { c.energy.sigma_m = positive(to_double(v)); }},
      {"sigma_d", [](RunConfig& c, const std::string& v) { c.energy.sigma_d = positive(to_double(v)); }},
      {"truncation", [](RunConfig& c, const std::string& v) {
         if (v == "lower-current") c.energy.truncation = TruncationPolicy::kLowerCurrent;
         else if (v == "raise-mixed") c.energy.truncation = TruncationPolicy::kRaiseMixed;
         else throw std::invalid_argument("expected lower-current or raise-mixed");
       }},
      {"max_cycles", [](RunConfig& c, const std::string& v) { c.max_cycles = positive_int(to_integer(v)); }},
      {"matcher_max_corners", [](RunConfig& c, const std::string& v) {
         c.matcher.max_corners = positive_int(to_integer(v));
       }},
      {"matcher_min_ncc", [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         if (!(x > -1 && x <= 1)) throw std::invalid_argument("must lie in (-1, 1]");
         c.matcher.min_ncc = x;
       }},
      {"blend", [](RunConfig& c, const std::string& v) { c.blend = to_bool(v); }},
      {"eval_crop", [](RunConfig& c, const std::string& v) {
         const long long x = to_integer(v);
         if (x < 0) throw std::invalid_argument("must be nonnegative");
         c.eval_crop = static_cast<int>(x);
       }},
      {"eval_side", [](RunConfig& c, const std::string& v) {
         if (v != "left" && v != "right" && v != "top" && v != "bottom")
           throw std::invalid_argument("expected left, right, top or bottom");
         c.eval_side = parse_crop_side(v);
       }},
      {"dataset", [](RunConfig& c, const std::string& v) {
         if (v.empty() || v.find(',') != std::string::npos)
           throw std::invalid_argument("must be nonempty and contain no commas");
         c.dataset = v;
       }},
      {"seed", [](RunConfig& c, const std::string& v) {
         std::uint64_t out = 0;
         const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
         if (res.ec != std::errc() || res.ptr != v.data() + v.size())
           throw std::invalid_argument("expected an unsigned integer");
         c.seed = out;
       }},
      {"dump_candidates", [](RunConfig& c, const std::string& v) { c.dump_candidates = to_bool(v); }},
      {"dump_labels", [](RunConfig& c, const std::string& v) { c.dump_labels = to_bool(v); }},
      {"energy_log", [](RunConfig& c, const std::string& v) { c.energy_log = to_bool(v); }},
  };
  return table;
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, int line) {
  const auto& table = setters();
  const auto it = table.find(key);
  const std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
  if (it == table.end()) throw ConfigError(key, line, where + "unknown key '" + key + "'");
  try {
    it->second(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, line, where + key + ": " + e.what());
  }
}

void check_config(const RunConfig& cfg) {
  if (!(cfg.registration.scale_max > cfg.registration.scale_min))
    throw ConfigError("scale_max", 0, "scale_max must exceed scale_min");
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string raw;
  int line = 0;
  int scale_line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", line, "line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    apply_setting(base, key, value, line);
    if (key == "scale_min" || key == "scale_max") scale_line = line;
  }
  try {
    check_config(base);
  } catch (const ConfigError& e) {
    throw ConfigError(e.key(), scale_line, e.what());
  }
  return base;
}

RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open config file " + path.string());
  return parse_config(in, std::move(base));
}

std::pair<std::string, std::string> split_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos)
    throw ConfigError(text, 0, "override '" + text + "' is not of the form key=value");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace mrstitch
