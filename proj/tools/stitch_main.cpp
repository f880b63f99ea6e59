#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mrstitch/config.hpp"
#include "mrstitch/error.hpp"
#include "mrstitch/pipeline.hpp"
#include "mrstitch/synth.hpp"

using namespace mrstitch;

namespace {

struct Flags {
  std::string reference, candidate, correspondences, config, out;
  std::string eval_side, dataset;
  int eval_crop = -1;
  std::uint64_t seed = 0;
  std::string dump_candidates, dump_labels, energy_log;
  bool no_blend = false;
  std::vector<std::string> overrides;
};

void add_run_options(CLI::App& app, Flags& f) {
  app.add_option("--reference", f.reference, "Reference image (PNG or PPM)");
  app.add_option("--candidate", f.candidate, "Candidate image (PNG or PPM)");
  app.add_option("--correspondences", f.correspondences,
                 "Match file 'x0 y0 x1 y1 [score]'; omitted: built-in matcher");
  app.add_option("--config", f.config, "Config file of 'key = value' lines");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--seed", f.seed, "Random seed");
  app.add_option("--eval-crop", f.eval_crop, "Crop-evaluation band width in pixels");
  app.add_option("--eval-side", f.eval_side, "Crop side: left, right, top or bottom");
  app.add_option("--dataset", f.dataset, "Dataset name for eval.csv");
  app.add_option("--set", f.overrides, "Override a config key: --set key=value");
}

RunConfig build_config(CLI::App& app, const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = parse_config_file(f.config, cfg);
  auto set = [&](const char* flag, const std::string& key, const std::string& value) {
    if (app.count(flag) > 0) apply_setting(cfg, key, value, 0);
  };
  set("--reference", "reference", f.reference);
  set("--candidate", "candidate", f.candidate);
  set("--correspondences", "correspondences", f.correspondences);
  set("--out", "out", f.out);
  set("--seed", "seed", std::to_string(f.seed));
  set("--eval-crop", "eval_crop", std::to_string(f.eval_crop));
  set("--eval-side", "eval_side", f.eval_side);
  set("--dataset", "dataset", f.dataset);
  // Output flags take an optional destination.
  auto dump = [&](const char* flag, const std::string& value, bool& enabled,
                  std::optional<std::filesystem::path>& path) {
    if (app.count(flag) == 0) return;
    enabled = true;
    if (!value.empty()) path = value;
  };
  dump("--dump-candidates", f.dump_candidates, cfg.dump_candidates, cfg.candidates_dir);
  dump("--dump-labels", f.dump_labels, cfg.dump_labels, cfg.labels_path);
  dump("--energy-log", f.energy_log, cfg.energy_log, cfg.energy_log_path);
  if (f.no_blend) cfg.blend = false;
  for (const std::string& o : f.overrides) {
    const auto [key, value] = split_override(o);
    apply_setting(cfg, key, value, 0);
  }
  check_config(cfg);
  return cfg;
}

void write_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_image(scene.reference, dir / "reference.png");
  save_image(scene.candidate, dir / "candidate.png");
  {
    std::ofstream out(dir / "correspondences.txt");
    if (!out) throw IoError("cannot write " + (dir / "correspondences.txt").string());
    write_correspondences(out, scene.correspondences);
  }
  std::ofstream truth(dir / "truth.txt");
  if (!truth) throw IoError("cannot write " + (dir / "truth.txt").string());
  truth.precision(17);
  truth << "scene " << to_string(scene.type) << '\n';
  for (std::size_t l = 0; l < scene.motions.size(); ++l) {
    truth << "motion " << l;
    const auto& m = scene.motions[l].matrix();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) truth << ' ' << m(r, c);
    truth << " correspondences " << scene.layer_indices(static_cast<int>(l)).size() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-registration image stitcher"};
  Flags flags;
  add_run_options(app, flags);
  app.add_option("--dump-candidates", flags.dump_candidates,
                 "Write warped candidates (default OUT/candidates)")
      ->expected(0, 1);
  app.add_option("--dump-labels", flags.dump_labels, "Write the label map (default OUT/labels.png)")
      ->expected(0, 1);
  app.add_option("--energy-log", flags.energy_log, "Write the energy trace (default OUT/energy.log)")
      ->expected(0, 1);
  app.add_flag("--no-blend", flags.no_blend, "Skip Poisson blending");

  auto* synth = app.add_subcommand("synth", "Render a synthetic test scene");
  std::string scene_name = "two-plane";
  std::string synth_out = "scene";
  std::uint64_t synth_seed = 0;
  int width = 640, height = 480;
  synth->add_option("--scene", scene_name,
                    "single-plane, two-plane, strips-translation or duplication-trap");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--width", width, "Image width");
  synth->add_option("--height", height, "Image height");

  auto* eval = app.add_subcommand("eval", "Crop-based evaluation only");
  Flags eval_flags;
  add_run_options(*eval, eval_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const SyntheticScene scene =
          make_synthetic_scene(parse_scene_type(scene_name), synth_seed, width, height);
      write_scene(scene, synth_out);
      std::cout << "wrote " << to_string(scene.type) << " scene to " << synth_out << " ("
                << scene.correspondences.size() << " correspondences)\n";
      return 0;
    }
    if (*eval) {
      RunConfig cfg = build_config(*eval, eval_flags);
      if (cfg.eval_crop <= 0) cfg.eval_crop = 50;
      const Image reference = load_image(cfg.reference);
      const Image candidate = load_image(cfg.candidate);
      CorrespondenceSet set;
      if (cfg.correspondences) set = read_correspondences(*cfg.correspondences);
      const StitchFn fn = [&](const Image& cropped, const Image& cand) {
        CorrespondenceSet s;
        if (cfg.correspondences) {
          for (Correspondence c : set.pairs) {
            if (cfg.eval_side == CropSide::kLeft) c.p0.x -= cfg.eval_crop;
            if (cfg.eval_side == CropSide::kTop) c.p0.y -= cfg.eval_crop;
            if (c.p0.x < 0 || c.p0.y < 0 || c.p0.x > cropped.width() - 1 ||
                c.p0.y > cropped.height() - 1)
              continue;
            s.pairs.push_back(c);
          }
        } else {
          s = detect_and_match(cropped, cand, cfg.matcher);
        }
        const StitchResult r = stitch_images(cropped, cand, s, cfg);
        return StitchOutput{r.panorama, r.canvas};
      };
      const EvalReport report =
          crop_eval(cfg.dataset, reference, candidate, cfg.eval_crop, cfg.eval_side, fn);
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream csv(cfg.out_dir / "eval.csv");
      if (!csv) throw IoError("cannot write " + (cfg.out_dir / "eval.csv").string());
      write_eval_csv(report, csv);
      write_eval_csv(report, std::cout);
      return 0;
    }

    const RunConfig cfg = build_config(app, flags);
    const RunReport report = run_pipeline(cfg);
    std::cout << "panorama " << (cfg.out_dir / "panorama.png").string() << " ("
              << report.result.panorama.width() << 'x' << report.result.panorama.height()
              << ", " << report.result.registration.candidates.size() << " registrations)\n";
    for (const std::string& w : report.result.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
