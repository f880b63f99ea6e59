#include "mrstitch/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mrstitch/error.hpp"

namespace mrstitch {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Image place_on_canvas(const Image& img, const Canvas& canvas) {
  Image out(canvas.size.width, canvas.size.height);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.valid(x, y)) out.set(x + canvas.offset_x, y + canvas.offset_y, img.at(x, y));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_energy(const EnergyBreakdown& e) {
  std::ostringstream s;
  s << std::setprecision(10) << e.mask << ' ' << e.warp << ' ' << e.smooth << ' '
    << e.duplication << ' ' << e.total;
  return s.str();
}

// Palette entry 0 marks pixels with no valid source; label l uses entry l+1.
void write_labels_png(const Labeling& labels, const Image& composite, int num_labels,
                      const std::filesystem::path& path) {
  std::vector<std::array<std::uint8_t, 3>> palette{{0, 0, 0}};
  for (int l = 0; l < num_labels; ++l) {
    const Color c = label_color(l);
    palette.push_back({quantize(c[0]), quantize(c[1]), quantize(c[2])});
  }
  std::vector<std::uint8_t> indices(static_cast<std::size_t>(labels.width) * labels.height, 0);
  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x)
      if (composite.valid(x, y))
        indices[static_cast<std::size_t>(y) * labels.width + x] =
            static_cast<std::uint8_t>(labels.at(x, y) + 1);
  write_indexed_png(path, labels.width, labels.height, indices, palette);

  std::filesystem::path legend = path;
  legend.replace_extension(".txt");
  std::ofstream out(legend);
  if (!out) throw IoError("cannot write " + legend.string());
  out << "index label rgb\n0 none 0,0,0\n";
  for (int l = 0; l < num_labels; ++l) {
    const auto& c = palette[static_cast<std::size_t>(l) + 1];
    out << l + 1 << ' ' << (l == 0 ? std::string("reference") : "candidate_" + std::to_string(l))
        << ' ' << int(c[0]) << ',' << int(c[1]) << ',' << int(c[2]) << '\n';
  }
}

// Correspondences for a reference with a band removed.
CorrespondenceSet crop_correspondences(const CorrespondenceSet& set, Size reference, int crop,
                                       CropSide side) {
  CorrespondenceSet out;
  out.source = set.source;
  for (Correspondence c : set.pairs) {
    switch (side) {
      case CropSide::kLeft: c.p0.x -= crop; break;
      case CropSide::kTop: c.p0.y -= crop; break;
      default: break;
    }
    const bool horizontal = side == CropSide::kLeft || side == CropSide::kRight;
    const double w = reference.width - (horizontal ? crop : 0);
    const double h = reference.height - (horizontal ? 0 : crop);
    if (c.p0.x < 0 || c.p0.y < 0 || c.p0.x > w - 1 || c.p0.y > h - 1) continue;
    out.pairs.push_back(c);
  }
  return out;
}

}  // namespace

Color label_color(int label) {
  static const Color palette[] = {
      {128, 128, 128}, {230, 25, 75},  {0, 130, 200},  {60, 180, 75},
      {255, 225, 25},  {145, 30, 180}, {70, 240, 240}, {245, 130, 48},
  };
  constexpr int n = static_cast<int>(sizeof palette / sizeof palette[0]);
  return palette[((label % n) + n) % n];
}

StitchProblem make_stitch_problem(const Image& reference, const CorrespondenceSet& set,
                                  const RegistrationResult& registration,
                                  const EnergyParams& params) {
  const Canvas& canvas = registration.canvas;
  const Point2 offset{static_cast<double>(canvas.offset_x), static_cast<double>(canvas.offset_y)};
  StitchProblem problem;
  problem.canvas = canvas.size;
  problem.params = params;
  problem.sources.push_back(place_on_canvas(reference, canvas));
  problem.inliers.emplace_back();
  problem.matches.emplace_back();
  for (const CandidateRegistration& reg : registration.candidates) {
    problem.sources.push_back(reg.warped);
    std::vector<Point2> inliers;
    for (std::size_t i : reg.inliers) inliers.push_back(set[i].p0 + offset);
    problem.inliers.push_back(std::move(inliers));

    // Every match, not only this candidate's inliers: a match that the
    // candidate moves away from its reference position is what reveals a
    // duplicated object.
    std::vector<CanvasMatch> matches;
    for (const Correspondence& c : set.pairs) {
      const auto guess = reg.refined.apply(c.p1);
      if (!guess) continue;
      std::optional<Point2> q = reg.mesh.forward(c.p1, *guess);
      if (!q) q = guess;
      matches.push_back({c.p0 + offset, *q + offset});
    }
    problem.matches.push_back(std::move(matches));
  }
  return problem;
}

StitchResult stitch_images(const Image& reference, const Image& candidate,
                           const CorrespondenceSet& correspondences, const RunConfig& cfg) {
  StitchResult out;
  auto start = Clock::now();
  try {
    out.registration = build_registrations(reference, candidate, correspondences,
                                           cfg.registration, cfg.seed);
  } catch (const NoRegistrationError& e) {
    if (!e.only_near_identity()) throw;
    // The candidate lies on top of the reference: the reference alone is
    // the panorama.
    out.timings_ms.emplace_back("registration", ms_since(start));
    out.reference_only = true;
    out.canvas = Canvas{reference.size(), 0, 0};
    out.panorama = reference;
    out.raw_composite = reference;
    out.labels = Labeling(reference.width(), reference.height(), 0);
    out.warnings.push_back(std::string("every candidate is a near-identity of the reference; "
                                       "panorama is the reference alone (") +
                           e.what() + ")");
    return out;
  }
  out.timings_ms.emplace_back("registration", ms_since(start));
  out.canvas = out.registration.canvas;
  for (const std::string& w : out.registration.diagnostics.warnings) out.warnings.push_back(w);

  start = Clock::now();
  out.problem = make_stitch_problem(reference, correspondences, out.registration, cfg.energy);
  const SeamEnergy energy = SeamEnergy::from_problem(out.problem);
  out.timings_ms.emplace_back("energy", ms_since(start));

  start = Clock::now();
  out.expansion = alpha_expansion(energy, std::nullopt, cfg.max_cycles);
  out.labels = out.expansion.labeling;
  out.raw_composite = composite(out.labels, out.problem);
  out.timings_ms.emplace_back("seam", ms_since(start));

  start = Clock::now();
  if (cfg.blend) {
    BlendReport rep;
    const BlendProblem bp = build_guidance(out.raw_composite, out.labels, out.problem.sources);
    out.panorama = solve_poisson(bp, &rep);
    for (const std::string& w : rep.warnings) out.warnings.push_back(w);
    out.blend = rep;
  } else {
    out.panorama = out.raw_composite;
  }
  out.timings_ms.emplace_back("blend", ms_since(start));
  return out;
}

RunReport run_pipeline(const RunConfig& cfg) {
  RunReport report;
  const auto total_start = Clock::now();
  auto start = Clock::now();
  if (cfg.reference.empty() || cfg.candidate.empty())
    throw ConfigError(cfg.reference.empty() ? "reference" : "candidate", 0,
                      "both --reference and --candidate are required");
  const Image reference = load_image(cfg.reference);
  const Image candidate = load_image(cfg.candidate);
  CorrespondenceSet set;
  if (cfg.correspondences) {
    set = read_correspondences(*cfg.correspondences);
    validate_bounds(set, reference.size(), candidate.size());
  } else {
    set = detect_and_match(reference, candidate, cfg.matcher);
  }
  report.correspondence_source = set.source;
  report.correspondence_count = set.size();
  report.timings_ms.emplace_back("load", ms_since(start));

  report.result = stitch_images(reference, candidate, set, cfg);
  for (const auto& t : report.result.timings_ms) report.timings_ms.push_back(t);

  start = Clock::now();
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());

  const auto panorama_path = cfg.out_dir / "panorama.png";
  save_image(report.result.panorama, panorama_path);
  report.outputs.push_back(panorama_path);

  if (cfg.dump_labels) {
    const auto path = cfg.labels_path.value_or(cfg.out_dir / "labels.png");
    const int n = report.result.reference_only ? 1 : report.result.problem.num_labels();
    write_labels_png(report.result.labels, report.result.raw_composite, n, path);
    report.outputs.push_back(path);
  }

  if (cfg.dump_candidates) {
    const auto dir = cfg.candidates_dir.value_or(cfg.out_dir / "candidates");
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const auto& cands = report.result.registration.candidates;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const std::string stem = "candidate_" + std::to_string(i + 1);
      save_image(cands[i].warped, dir / (stem + ".png"), true);
      std::ofstream side(dir / (stem + ".txt"));
      if (!side) throw IoError("cannot write " + (dir / (stem + ".txt")).string());
      const Eigen::Matrix3d& m = cands[i].refined.matrix();
      side << "homography";
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) side << ' ' << format_double(m(r, c));
      side << "\ninitial";
      const Eigen::Matrix3d& m0 = cands[i].initial.matrix();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) side << ' ' << format_double(m0(r, c));
      side << "\ninliers " << cands[i].inliers.size() << "\nseed "
           << format_double(cands[i].seed.x) << ' ' << format_double(cands[i].seed.y)
           << "\nobjective " << format_double(cands[i].f_initial) << ' '
           << format_double(cands[i].f_refined) << "\ncpw_fell_back "
           << (cands[i].cpw_fell_back ? "true" : "false") << "\ncanvas_offset "
           << report.result.canvas.offset_x << ' ' << report.result.canvas.offset_y << '\n';
      report.outputs.push_back(dir / (stem + ".png"));
    }
  }

  if (cfg.energy_log) {
    const auto path = cfg.energy_log_path.value_or(cfg.out_dir / "energy.log");
    std::ofstream log(path);
    if (!log) throw IoError("cannot write " + path.string());
    log << "cycle label E_m E_w E_s E_d total\n";
    if (!report.result.reference_only) {
      log << "0 -1 " << format_energy(report.result.expansion.initial) << '\n';
      for (const MoveRecord& m : report.result.expansion.accepted)
        log << m.cycle << ' ' << m.label << ' ' << format_energy(m.energy) << '\n';
    }
    report.outputs.push_back(path);
  }
  report.timings_ms.emplace_back("write", ms_since(start));

  if (cfg.eval_crop > 0) {
    start = Clock::now();
    RunConfig inner = cfg;
    inner.eval_crop = 0;
    const StitchFn fn = [&](const Image& cropped, const Image& cand) {
      CorrespondenceSet s;
      if (cfg.correspondences)
        s = crop_correspondences(set, reference.size(), cfg.eval_crop, cfg.eval_side);
      else
        s = detect_and_match(cropped, cand, cfg.matcher);
      StitchResult r = stitch_images(cropped, cand, s, inner);
      return StitchOutput{r.panorama, r.canvas};
    };
    report.eval = crop_eval(cfg.dataset, reference, candidate, cfg.eval_crop, cfg.eval_side, fn);
    const auto path = cfg.out_dir / "eval.csv";
    std::ofstream csv(path);
    if (!csv) throw IoError("cannot write " + path.string());
    write_eval_csv(*report.eval, csv);
    report.outputs.push_back(path);
    report.timings_ms.emplace_back("eval", ms_since(start));
  }

  report.timings_ms.emplace_back("total", ms_since(total_start));
  const auto path = cfg.out_dir / "report.txt";
  std::ofstream txt(path);
  if (!txt) throw IoError("cannot write " + path.string());
  report.outputs.push_back(path);
  write_report(report, cfg, txt);
  return report;
}

void write_report(const RunReport& report, const RunConfig& cfg, std::ostream& out) {
  const StitchResult& r = report.result;
  const RegistrationDiagnostics& d = r.registration.diagnostics;
  out << "reference " << cfg.reference.string() << "\ncandidate " << cfg.candidate.string()
      << "\ncorrespondences " << report.correspondence_count << " ("
      << (report.correspondence_source == CorrespondenceSource::kBuiltinMatcher ? "builtin matcher"
                                                                               : "file")
      << ")\nseed " << cfg.seed << "\n\n[timings_ms]\n";
  for (const auto& [stage, ms] : report.timings_ms)
    out << stage << ' ' << std::fixed << std::setprecision(1) << ms << '\n';
  out.unsetf(std::ios::floatfield);

  out << "\n[registration]\ngenerated " << d.generated << "\nscreened_out "
      << d.screened_out_total() << '\n';
  for (const auto& [reason, count] : d.screened_out)
    out << "  " << to_string(reason) << ' ' << count << '\n';
  out << "dedup_dropped " << d.dedup_dropped << "\nkept " << d.kept << '\n';
  out << "seeds_too_few_neighbors " << d.generation.too_few_neighbors
      << "\nseeds_estimation_failed " << d.generation.estimation_failed << '\n';
  out << "canvas " << r.canvas.size.width << 'x' << r.canvas.size.height << " offset "
      << r.canvas.offset_x << ' ' << r.canvas.offset_y << '\n';
  for (std::size_t i = 0; i < r.registration.candidates.size(); ++i) {
    const CandidateRegistration& c = r.registration.candidates[i];
    out << "candidate " << i + 1 << " inliers " << c.inliers.size() << " objective "
        << std::setprecision(10) << c.f_initial << " -> " << c.f_refined
        << (c.cpw_fell_back ? " cpw_fell_back" : "") << '\n';
  }

  out << "\n[seam]\n";
  if (r.reference_only) {
    out << "skipped (reference only)\n";
  } else {
    out << "labels " << r.problem.num_labels() << "\ncycles " << r.expansion.cycles
        << "\naccepted_moves " << r.expansion.accepted.size()
        << "\nlegend";
    for (int l = 0; l < r.problem.num_labels(); ++l) {
      const Color c = label_color(l);
      out << ' ' << l << "=rgb(" << c[0] << ',' << c[1] << ',' << c[2] << ')';
    }
    out << "\ninitial_energy E_m E_w E_s E_d total " << format_energy(r.expansion.initial)
        << "\nfinal_energy E_m E_w E_s E_d total " << format_energy(r.expansion.final)
        << "\nduplication_satisfied " << r.expansion.final.duplication_satisfied << '\n';
  }

  out << "\n[blend]\n";
  if (!r.blend) {
    out << "disabled\n";
  } else {
    out << "free_pixels " << r.blend->free_pixels << "\nunanchored_pixels "
        << r.blend->unanchored_pixels << '\n';
    for (std::size_t c = 0; c < r.blend->channels.size(); ++c) {
      const ChannelStats& s = r.blend->channels[c];
      out << "channel " << c << " iterations " << s.iterations << " relative_residual "
          << std::setprecision(3) << s.relative_residual
          << (s.converged ? " converged" : " not_converged") << '\n';
    }
  }

  if (report.eval) {
    out << "\n[eval]\n";
    write_eval_csv(*report.eval, out);
  }

  out << "\n[warnings]\n";
  for (const std::string& w : r.warnings) out << w << '\n';
  out << "\n[outputs]\n";
  for (const auto& p : report.outputs) out << p.string() << '\n';
}

int exit_code_for(const Error& error) {
  if (error.stage() == "config") return 2;
  if (error.stage() == "registration") return 3;
  if (error.stage() == "io" || error.stage() == "correspondences") return 4;
  return 1;
}

}  // namespace mrstitch
