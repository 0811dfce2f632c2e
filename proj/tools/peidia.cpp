// Command-line front end: solve, oracle, report, calibrate, holo.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "peidia/calibration.hpp"
#include "peidia/config.hpp"
#include "peidia/error.hpp"
#include "peidia/holography.hpp"
#include "peidia/physical_rig.hpp"
#include "peidia/pipeline.hpp"

using namespace peidia;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kCapacity = 3, kNumerical = 4 };

void emit(const json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

struct ProblemArgs {
  std::string file;
  std::string generator;
  std::size_t n = 0;
  std::uint64_t seed = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("problem", file, "Problem JSON file");
    cmd->add_option("--generator", generator, "mobius-ladder | random-glass")
        ->check(CLI::IsMember({"mobius-ladder", "random-glass"}));
    cmd->add_option("--n", n, "Spin count for --generator");
    cmd->add_option("--problem-seed", seed, "Seed for random-glass");
  }

  IsingModel load() const {
    if (!file.empty()) return load_problem(file);
    if (generator.empty()) throw ConfigError("give a problem file or --generator");
    ProblemSource p;
    p.generator = generator;
    p.n = n;
    p.seed = seed;
    return p.load();
  }
};

json spins_json(const SpinState& s) {
  json a = json::array();
  for (auto v : s.values()) a.push_back(int(v));
  return a;
}

json budget_json(const NoiseBudget& b) {
  return {{"delta_q", b.delta_q},
          {"delta_d", b.delta_d},
          {"delta_r", b.delta_r},
          {"delta_p_max", b.delta_p_max},
          {"delta_i_dark", b.delta_i_dark},
          {"delta_i_max", b.delta_i_max},
          {"delta_h", b.delta_h},
          {"delta_h_averaged", b.delta_h_averaged},
          {"snr_db", b.snr_db},
          {"r", b.r},
          {"delta_h_r", b.delta_h_r},
          {"resolvable", b.resolvable}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-encoding intensity-detection Ising annealer simulator"};
  app.require_subcommand(1);

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Run an annealing manifest");
  std::string manifest_path, out_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::size_t> runs_override, threads_override;
  solve_cmd->add_option("manifest", manifest_path, "Run manifest JSON")->required();
  solve_cmd->add_option("--output", out_override, "Output directory (overrides manifest)");
  solve_cmd->add_option("--seed", seed_override, "Seed (overrides manifest)");
  solve_cmd->add_option("--runs", runs_override, "Run count (overrides manifest)");
  solve_cmd->add_option("--threads", threads_override, "Worker threads, 0 = all cores");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force ground state");
  ProblemArgs oracle_problem;
  oracle_problem.add(oracle_cmd);
  std::string oracle_out;
  oracle_cmd->add_option("-o,--output", oracle_out, "Write JSON here instead of stdout");

  // report
  auto* report_cmd = app.add_subcommand("report", "Noise, performance or geometry report");
  std::string report_kind, report_out, camera_file, perf_file;
  std::size_t report_n = 20;
  double h0 = 3e5, h_min = -26.0, delta_h_min = 2.0;
  double wavelength = 1.55e-6, l12 = 0.754;
  std::size_t ap_nx = 1920, ap_ny = 1080;
  double ap_pitch = 8e-6;
  std::optional<double> region_radius;
  report_cmd->add_option("kind", report_kind, "noise | perf | geometry")
      ->required()
      ->check(CLI::IsMember({"noise", "perf", "geometry"}));
  report_cmd->add_option("--n", report_n, "Spin count");
  report_cmd->add_option("--camera", camera_file, "Camera JSON (default: baseline camera)");
  report_cmd->add_option("--h0", h0, "Ground-state Hamiltonian magnitude in electrons");
  report_cmd->add_option("--h-min", h_min, "Ground energy in model units");
  report_cmd->add_option("--delta-h-min", delta_h_min, "Smallest energy gap to resolve");
  report_cmd->add_option("--perf", perf_file, "Timing JSON (default: baseline timings)");
  report_cmd->add_option("--wavelength", wavelength, "m");
  report_cmd->add_option("--l12", l12, "SLM1-SLM2 distance, m");
  report_cmd->add_option("--nx", ap_nx, "Modulator pixels along x");
  report_cmd->add_option("--ny", ap_ny, "Modulator pixels along y");
  report_cmd->add_option("--pitch", ap_pitch, "Modulator pitch, m");
  report_cmd->add_option("--radius", region_radius, "Region radius, m (default 1.5 w_slm)");
  report_cmd->add_option("-o,--output", report_out, "Write JSON here instead of stdout");

  // calibrate
  auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate a rig against the DFT benchmark");
  std::string cal_rig = "matrix", tables_out, cal_out, cal_camera;
  std::size_t cal_n = 8;
  std::uint64_t inject = 1;
  double gain_lo = 0.7, gain_hi = 1.3;
  cal_cmd->add_option("--rig", cal_rig, "matrix | physical")
      ->check(CLI::IsMember({"matrix", "physical"}));
  cal_cmd->add_option("--n", cal_n, "Beam count");
  cal_cmd->add_option("--inject", inject, "Seed of the injected matrix-rig errors");
  cal_cmd->add_option("--gain-lo", gain_lo, "Lower bound of injected gains");
  cal_cmd->add_option("--gain-hi", gain_hi, "Upper bound of injected gains");
  cal_cmd->add_option("--camera", cal_camera, "Camera JSON or profile name (default: noiseless)");
  cal_cmd->add_option("--tables", tables_out, "Write calibration tables JSON here");
  cal_cmd->add_option("-o,--output", cal_out, "Write the report here instead of stdout");

  // holo
  auto* holo_cmd = app.add_subcommand("holo", "Synthesise and export modulator patterns");
  ProblemArgs holo_problem;
  holo_problem.add(holo_cmd);
  std::string holo_dir = "holograms";
  std::size_t holo_pixels = 256;
  std::size_t refine = 0;
  bool dump_field = false;
  holo_cmd->add_option("--pixels", holo_pixels, "Modulator grid size");
  holo_cmd->add_option("--out-dir", holo_dir, "Directory for PGM and field files");
  holo_cmd->add_option("--refine", refine,
                       "Gradient iterations refining SLM0 against its ideal output");
  holo_cmd->add_flag("--field", dump_field, "Also dump the detector field for all spins up");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*solve_cmd) {
      json doc = read_json_file(manifest_path);
      if (seed_override) doc["seed"] = *seed_override;
      if (runs_override) doc["runs"] = *runs_override;
      if (threads_override) doc["threads"] = *threads_override;
      if (!out_override.empty()) doc["output_dir"] = fs::absolute(out_override).string();
      const RunManifest m = manifest_from_json(doc, fs::path(manifest_path).parent_path());
      const SolveResult r = solve(m);
      std::cout << r.summary.dump(2) << '\n';
      std::cerr << "wrote " << r.files.size() << " files under " << m.output_dir.string() << '\n';
    } else if (*oracle_cmd) {
      const IsingModel model = oracle_problem.load();
      const GroundState g = brute_force_ground(model);
      emit({{"n", model.size()}, {"h_min", g.h}, {"state", spins_json(g.state)}}, oracle_out);
    } else if (*report_cmd) {
      json doc;
      if (report_kind == "noise") {
        const DetectorModel det =
            camera_file.empty() ? DetectorModel::baseline_camera() : detector_from_json(read_json_file(camera_file));
        doc = {{"kind", "noise"},
               {"n", report_n},
               {"h0", h0},
               {"h_min", h_min},
               {"camera", detector_to_json(det)},
               {"budget", budget_json(noise_budget(det, report_n, h0, h_min, delta_h_min))}};
      } else if (report_kind == "perf") {
        const PerfModel p =
            perf_file.empty() ? PerfModel::baseline_setup() : perf_from_json(read_json_file(perf_file));
        const PerfReport r = perf_report(report_n, p);
        doc = {{"kind", "perf"},       {"n", report_n},        {"timing", perf_to_json(p)},
               {"flops", r.flops},     {"t_iter", r.t_iter},   {"rate_flop_per_s", r.rate},
               {"e_ff_j_per_flop", r.e_ff}};
      } else {
        const BeamGeometry b = beam_geometry(wavelength, l12 / 2.0);
        const double radius = region_radius.value_or(1.5 * b.w_slm);
        const SlmAperture ap{ap_nx, ap_ny, ap_pitch};
        doc = {{"kind", "geometry"},
               {"wavelength", wavelength},
               {"l12", l12},
               {"w0", b.w0},
               {"w_slm", b.w_slm},
               {"region_radius", radius},
               {"aperture", {{"nx", ap_nx}, {"ny", ap_ny}, {"pitch", ap_pitch}}},
               {"capacity", layout_capacity(ap, radius)}};
      }
      emit(doc, report_out);
    } else if (*cal_cmd) {
      std::unique_ptr<Rig> rig;
      CalibrationOptions opts;
      std::optional<DetectorModel> det;
      if (!cal_camera.empty()) {
        det = fs::exists(cal_camera) ? detector_from_json(read_json_file(cal_camera))
                                     : detector_from_json(json(cal_camera));
      }
      json doc = {{"rig", cal_rig}, {"n", cal_n}};
      if (cal_rig == "matrix") {
        rig = std::make_unique<MatrixRig>(RigError::random(cal_n, inject, gain_lo, gain_hi), det,
                                          inject);
        doc["inject"] = inject;
        doc["gain_range"] = {gain_lo, gain_hi};
      } else {
        DiffractionRigOptions o;
        o.detector = det;
        rig = std::make_unique<DiffractionRig>(desk_geometry(cal_n), o);
        opts = physical_calibration();
      }
      const ComplexMatrix w = dft_matrix(cal_n);
      const double before = dft_benchmark(*rig, nullptr);
      const CalibrationSession s = calibrate(*rig, w, opts);
      const double after = dft_benchmark(*rig, &s.tables);
      doc["fidelity_before"] = before;
      doc["fidelity_after"] = after;
      doc["phase_unmeasurable"] = s.phase.unmeasurable.cast<int>().sum();
      doc["phase_max_excursion"] = s.phase.max_excursion;
      doc["slm1_residual"] = s.slm1.residual;
      doc["slm1_flagged"] = s.slm1.flagged.cast<int>().sum();
      doc["slm0_dead"] = std::count(s.slm0.dead.begin(), s.slm0.dead.end(), 1);
      if (!tables_out.empty()) {
        std::ofstream out(tables_out);
        if (!out) throw ConfigError("cannot write " + tables_out);
        out << tables_to_json(s.tables).dump(2) << '\n';
        doc["tables"] = tables_out;
      }
      emit(doc, cal_out);
    } else if (*holo_cmd) {
      ComplexMatrix target;
      std::vector<std::int8_t> up;
      if (!holo_problem.file.empty() || !holo_problem.generator.empty()) {
        const IsingModel model = holo_problem.load();
        target = spectral_transform(model).a;
      } else {
        if (holo_problem.n == 0) throw ConfigError("give a problem or --n for a DFT pattern");
        target = dft_matrix(holo_problem.n);
      }
      const auto n = static_cast<std::size_t>(target.rows());
      const DeskGeometry g = desk_geometry(n, holo_pixels);
      DiffractionRig rig(g);
      rig.set_matrix(target);
      fs::create_directories(holo_dir);
      const fs::path dir(holo_dir);
      Hologram h0p = rig.slm0_hologram();
      write_pgm(h0p, dir / "slm0.pgm");
      write_pgm(rig.slm1_hologram(), dir / "slm1.pgm");
      write_pgm(rig.slm2_hologram(), dir / "slm2.pgm");
      json doc = {{"n", n},
                  {"pixels", holo_pixels},
                  {"files", {(dir / "slm0.pgm").string(), (dir / "slm1.pgm").string(),
                             (dir / "slm2.pgm").string()}}};
      if (refine > 0) {
        const auto& o = g.optics;
        const FieldGrid incident =
            gaussian_beam(holo_pixels, holo_pixels, o.slm.pitch, o.slm.pitch, g.input_waist);
        const Propagator prop(holo_pixels, holo_pixels, o.slm.pitch, o.slm.pitch, o.l01,
                              o.wavelength, PixelModel::kRect);
        ComplexMatrix alpha = ComplexMatrix::Ones(static_cast<Eigen::Index>(n), 1);
        const FieldGrid ideal = ideal_modulation(SlmRole::kSplit0, o, alpha);
        const FieldGrid u_target = target_field(ideal, incident, prop);
        HologramOptions ho;
        ho.iterations = refine;
        const HologramFit fit = optimize_hologram(h0p, incident, u_target, prop, ho);
        write_pgm(fit.hologram, dir / "slm0_refined.pgm");
        doc["refine"] = {{"iterations", fit.iterations},
                         {"initial_loss", fit.initial_loss},
                         {"best_loss", fit.best_loss},
                         {"diverged", fit.diverged}};
        doc["files"].push_back((dir / "slm0_refined.pgm").string());
      }
      if (dump_field) {
        const std::vector<cplx> x(n, 1.0);
        write_field(rig.detector_field(x), g.optics.wavelength, dir / "detector_field.bin");
        doc["files"].push_back((dir / "detector_field.bin").string());
      }
      std::cout << doc.dump(2) << '\n';
    }
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << " (limit " << e.limit() << ")\n";
    return kCapacity;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
