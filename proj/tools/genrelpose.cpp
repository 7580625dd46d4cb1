// Command line front end: solve problems, generate synthetic fixtures, run
// noise benchmarks, and evaluate trajectory chains.
// Exit codes: 0 ok, 1 malformed input, 2 degenerate translation, 3 solver failure.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include <genrelpose/genrelpose.hpp>

namespace grp = genrelpose;

namespace {

std::string truth_path_for(const std::string& out) {
  const std::string suffix = ".json";
  if (out.size() > suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
    return out.substr(0, out.size() - suffix.size()) + ".truth.json";
  return out + ".truth.json";
}

grp::SolveMode parse_mode(const std::string& s) {
  if (s == "full") return grp::SolveMode::full;
  if (s == "linearized") return grp::SolveMode::linearized;
  throw grp::IoError("mode: expected 'full' or 'linearized', got '" + s + "'");
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-")
    std::cout << text;
  else
    grp::write_text_file(out_path, text);
}

int cmd_solve(const std::string& problem_path, const std::string& mode_s,
              const std::string& out_path) {
  const grp::Problem p = grp::load_problem(problem_path);
  const grp::SolveReport rep =
      grp::solve(p.corrs, p.rig, p.att_i, p.att_j, parse_mode(mode_s));
  emit(out_path, grp::solution_to_json(rep).dump(2) + "\n");
  if (rep.degenerate_translation) {
    std::cerr << "warning: translation scale is degenerate\n";
    return 2;
  }
  return 0;
}

int cmd_synth(const std::string& mode_s, int planes, std::uint64_t seed,
              double noise_pixel, double noise_pitch, double noise_roll,
              double noise_erot, double noise_etrans, bool affine_from_clean,
              const std::string& out_path) {
  grp::Rng rng(seed);
  const grp::MotionSample motion = grp::sample_motion(grp::motion_from_name(mode_s), rng);
  const grp::SyntheticInstance clean =
      grp::generate_instance(grp::default_rig(), motion, planes, rng);
  grp::NoiseSpec ns;
  ns.pixel_sigma = noise_pixel;
  ns.pitch_sigma_deg = noise_pitch;
  ns.roll_sigma_deg = noise_roll;
  ns.extrinsic_rot_perturb = noise_erot;
  ns.extrinsic_trans_perturb = noise_etrans;
  ns.affine_from_noisy_points = !affine_from_clean;
  const grp::SyntheticInstance obs = grp::apply_noise(clean, ns, rng);

  grp::Problem p;
  p.rig = obs.rig;
  p.att_i = obs.att_i;
  p.att_j = obs.att_j;
  p.corrs = obs.corrs;
  grp::save_problem(p, out_path);

  grp::Truth truth;
  truth.aligned = clean.truth_aligned;
  truth.pose = clean.truth_pose;
  truth.att_i = clean.att_i;
  truth.att_j = clean.att_j;
  grp::save_truth(truth, truth_path_for(out_path));
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_path) {
  const grp::BenchConfig cfg = grp::load_bench_config(config_path);
  const grp::BenchReport rep = grp::run_bench(cfg);
  emit(out_path, grp::bench_csv(rep));
  return 0;
}

int cmd_traj(const std::string& poses_path, const std::string& gt_path) {
  const auto est = grp::load_pose_chain(poses_path);
  const auto gt = grp::load_pose_chain(gt_path);
  if (est.size() != gt.size())
    throw grp::IoError("pose chains differ in length: " + std::to_string(est.size()) +
                       " vs " + std::to_string(gt.size()));
  const auto west = grp::accumulate_trajectory(est);
  const auto wgt = grp::accumulate_trajectory(gt);
  std::cout << "frame,err_m\n";
  char buf[64];
  for (std::size_t k = 1; k < west.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.9g", (west[k].t - wgt[k].t).norm());
    std::cout << k << ',' << buf << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.9g", grp::ate(west, wgt));
  std::cout << "# ate_m=" << buf << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relative pose of a calibrated multi-camera rig with known vertical"};
  app.require_subcommand(1);

  std::string problem_path, out_path, mode_s = "full";
  CLI::App* solve = app.add_subcommand("solve", "solve a problem file");
  solve->add_option("-p,--problem", problem_path, "problem JSON")->required();
  solve->add_option("-m,--mode", mode_s, "full|linearized");
  solve->add_option("-o,--out", out_path, "solution JSON (default stdout)");

  std::string synth_mode = "random", synth_out;
  int planes = 100;
  std::uint64_t seed = 0;
  double n_pixel = 0, n_pitch = 0, n_roll = 0, n_erot = 0, n_etrans = 0;
  bool affine_from_clean = false;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic problem + truth sidecar");
  synth->add_option("-m,--mode", synth_mode, "random|forward|planar|sideways");
  synth->add_option("-n,--planes", planes, "number of plane correspondences");
  synth->add_option("-s,--seed", seed, "rng seed");
  synth->add_option("--noise-pixel", n_pixel, "pixel noise sigma");
  synth->add_option("--noise-pitch", n_pitch, "pitch noise sigma, degrees");
  synth->add_option("--noise-roll", n_roll, "roll noise sigma, degrees");
  synth->add_option("--noise-extrinsic-rot", n_erot, "extrinsic rotation perturbation, radians");
  synth->add_option("--noise-extrinsic-trans", n_etrans, "extrinsic translation perturbation, meters");
  synth->add_flag("--affine-from-clean", affine_from_clean,
                  "keep affine frames from the noise-free points");
  synth->add_option("-o,--out", synth_out, "problem JSON path")->required();

  std::string config_path, bench_out;
  CLI::App* bench = app.add_subcommand("bench", "run a synthetic noise benchmark");
  bench->add_option("-c,--config", config_path, "bench config JSON")->required();
  bench->add_option("-o,--out", bench_out, "CSV output (default stdout)");

  std::string poses_path, gt_path;
  CLI::App* traj = app.add_subcommand("traj", "compare pose chains, print per-frame errors and ATE");
  traj->add_option("--poses", poses_path, "estimated chain, 12 numbers per line [R|t]")->required();
  traj->add_option("--gt", gt_path, "ground-truth chain")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand(solve)) return cmd_solve(problem_path, mode_s, out_path);
    if (app.got_subcommand(synth))
      return cmd_synth(synth_mode, planes, seed, n_pixel, n_pitch, n_roll, n_erot,
                       n_etrans, affine_from_clean, synth_out);
    if (app.got_subcommand(bench)) return cmd_bench(config_path, bench_out);
    if (app.got_subcommand(traj)) return cmd_traj(poses_path, gt_path);
  } catch (const grp::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const grp::GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
