#include "mrstitch/correspond.hpp"

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "mrstitch/error.hpp"

namespace mrstitch {

namespace {

bool parse_real(const std::string& tok, double& out) {
  const char* s = tok.c_str();
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s, &end);
  return end != s && *end == '\0' && errno == 0 && std::isfinite(out);
}

}  // namespace

CorrespondenceSet parse_correspondences(std::istream& in) {
  CorrespondenceSet set;
  set.source = CorrespondenceSource::kFile;
  std::set<std::array<double, 4>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      double v = 0.0;
      if (!parse_real(tok, v)) {
        throw ParseError("line " + std::to_string(line_no) + ": not a number: '" +
                             tok + "'",
                         line_no);
      }
      values.push_back(v);
    }
    if (values.size() != 4 && values.size() != 5) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 or 5 fields, got " +
                           std::to_string(values.size()),
                       line_no);
    }
    Correspondence c{{values[0], values[1]}, {values[2], values[3]},
                     values.size() == 5 ? values[4] : 1.0};
    if (c.score < 0.0) {
      throw ParseError("line " + std::to_string(line_no) + ": negative score", line_no);
    }
    if (!seen.insert({c.p0.x, c.p0.y, c.p1.x, c.p1.y}).second) {
      ++set.duplicates_dropped;
      continue;
    }
    set.pairs.push_back(c);
  }
  return set;
}

CorrespondenceSet read_correspondences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open correspondences '" + path.string() + "'");
  return parse_correspondences(in);
}

void write_correspondences(std::ostream& out, const CorrespondenceSet& set) {
  char buf[160];
  for (const auto& c : set.pairs) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g\n", c.p0.x,
                  c.p0.y, c.p1.x, c.p1.y, c.score);
    out << buf;
  }
}

void validate_bounds(const CorrespondenceSet& set, Size reference, Size candidate) {
  auto inside = [](Point2 p, Size s) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= s.width - 1 && p.y <= s.height - 1;
  };
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& c = set[i];
    if (!inside(c.p0, reference) || !inside(c.p1, candidate)) {
      throw ValidationError("correspondences",
                            "correspondence " + std::to_string(i) +
                                " lies outside its image bounds");
    }
  }
}

double reprojection_error(const Homography& h, const Correspondence& c) {
  const auto mapped = h.apply(c.p1);
  if (!mapped) return kReprojectionAtInfinity;
  const double e = distance(*mapped, c.p0);
  return std::isfinite(e) ? e : kReprojectionAtInfinity;
}

}  // namespace mrstitch
