#include "peidia/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "peidia/error.hpp"
#include "peidia/physical_rig.hpp"

namespace peidia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Salt for the reference runs so they never share streams with the solve.
constexpr std::uint64_t kReferenceSalt = 0x7265666572656e63ULL;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  return out;
}

}  // namespace

Reference reference_minimum(const IsingModel& model, const RunManifest& m) {
  if (m.reference_h) return {*m.reference_h, "manifest", std::nullopt};
  if (model.size() <= kBruteForceCap) {
    GroundState g = brute_force_ground(model);
    return {g.h, "brute_force", std::move(g.state)};
  }
  AnnealConfig cfg = m.reference_anneal.value_or(m.anneal);
  cfg.seed = m.seed ^ kReferenceSalt;
  auto shared = std::make_shared<const IsingModel>(model);
  const ExactEvaluator exact(shared);
  const auto runs = anneal_replicas(model, exact, cfg, m.reference_runs, m.threads);
  const auto best = std::min_element(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
    return a.best_h < b.best_h;
  });
  return {best->best_h, "best_of_runs", best->best_state};
}

TierEvaluator make_tier_evaluator(const RunManifest& m, std::shared_ptr<const IsingModel> model,
                                  double h_ref) {
  TierEvaluator out;
  if (m.tier == Tier::kExact) {
    out.evaluator = std::make_unique<ExactEvaluator>(std::move(model));
    return out;
  }
  auto t = std::make_shared<const SpectralTransform>(spectral_transform(*model));
  out.info["negative_eigenvalues"] = t->negative_count();
  switch (m.tier) {
    case Tier::kIdeal:
      out.evaluator = std::make_unique<IdealOpticalEvaluator>(t);
      break;
    case Tier::kNoisy: {
      const double ref = m.exposure_reference.value_or(h_ref);
      const double k = exposure_for_reference(*m.camera, ref);
      out.info["exposure_scale"] = k;
      out.info["exposure_reference"] = ref;
      out.info["camera"] = detector_to_json(*m.camera);
      out.evaluator = std::make_unique<NoisyOpticalEvaluator>(t, *m.camera, k, m.seed);
      break;
    }
    case Tier::kPhysical: {
      const PhysicalConfig& g = *m.geometry;
      DiffractionRigOptions o;
      o.pixel = g.pixel;
      o.readout_pixels = g.readout_pixels;
      o.detector = m.camera;
      o.seed = m.seed;
      // desk_geometry surfaces capacity errors before any propagation work
      (void)g.geometry(model->size());
      auto setup = make_physical_evaluator(t, o);
      out.info["geometry"] = physical_to_json(g);
      out.info["intensity_scale"] = setup.scale;
      out.info["matrix_fidelity"] = setup.matrix_fidelity;
      if (m.camera) out.info["camera"] = detector_to_json(*m.camera);
      out.evaluator = std::move(setup.evaluator);
      break;
    }
    case Tier::kExact:
      break;
  }
  return out;
}

std::string artifact_header(const RunManifest& m) {
  return "# schema_version=" + std::to_string(kSchemaVersion) +
         " manifest_hash=" + hex64(m.hash()) + " seed=" + std::to_string(m.seed);
}

void write_trace_csv(std::ostream& out, const AnnealResult& r, std::size_t run,
                     const IsingModel& model, const std::string& header) {
  out << header << '\n'
      << "run,iteration,stage,T,H_evaluator,H_exact,accepted_flag,flip_count\n";
  const double t_start = r.temperature.empty() ? 0.0 : r.temperature.front();
  out << run << ",0,0," << num(t_start) << ',' << num(r.initial_h) << ','
      << num(hamiltonian_exact(model, r.initial)) << ",1,0\n";
  for (std::size_t k = 0; k < r.iterations(); ++k) {
    out << run << ',' << k + 1 << ',' << r.stage[k] << ',' << num(r.temperature[k]) << ','
        << num(r.accepted_h[k]) << ',' << num(r.exact_h[k]) << ',' << int(r.accepted[k]) << ','
        << r.flip_count(k) << '\n';
  }
}

void write_probability_csv(std::ostream& out, const std::vector<double>& p,
                           const std::string& header) {
  out << header << '\n' << "iteration,probability\n";
  for (std::size_t k = 0; k < p.size(); ++k) out << k + 1 << ',' << num(p[k]) << '\n';
}

SolveResult solve(const RunManifest& m, bool write) {
  m.validate();
  const auto start = std::chrono::steady_clock::now();
  auto model = std::make_shared<const IsingModel>(m.problem.load());
  SolveResult res;
  res.reference = reference_minimum(*model, m);
  TierEvaluator tier = make_tier_evaluator(m, model, res.reference.h_min);

  res.runs = anneal_replicas(*model, *tier.evaluator, m.anneal, m.runs, m.threads);
  res.probability = ground_state_probability(res.runs, res.reference.h_min, *model);

  double best = std::numeric_limits<double>::infinity();
  std::size_t below = 0;
  std::vector<double> h_eval, h_exact;
  std::uint64_t evaluations = 0;
  for (const auto& r : res.runs) {
    best = std::min(best, r.best_h);
    if (r.best_h < res.reference.h_min && !same_energy(r.best_h, res.reference.h_min)) ++below;
    h_eval.insert(h_eval.end(), r.accepted_h.begin(), r.accepted_h.end());
    h_exact.insert(h_exact.end(), r.exact_h.begin(), r.exact_h.end());
    evaluations += r.evaluations;
  }
  const ResolvedSchedule sched = resolve_schedule(*model, m.anneal);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json& s = res.summary;
  s["schema_version"] = kSchemaVersion;
  s["manifest_hash"] = hex64(m.hash());
  s["seed"] = m.seed;
  s["problem"] = m.problem.label();
  s["n"] = model->size();
  s["tier"] = std::string(tier_name(m.tier));
  s["tier_info"] = tier.info;
  s["runs"] = m.runs;
  s["iterations"] = m.anneal.iterations();
  s["schedule"] = {{"t0", sched.t0},       {"alpha", sched.alpha}, {"n_step", sched.n_step},
                   {"n_temp", sched.n_temp}, {"eta", sched.eta}};
  s["reference_h"] = res.reference.h_min;
  s["reference_source"] = res.reference.source;
  s["best_h"] = best;
  s["best_found"] = same_energy(best, res.reference.h_min) || best < res.reference.h_min;
  s["runs_below_reference"] = below;
  s["final_probability"] = res.probability.empty() ? 0.0 : res.probability.back();
  s["evaluations"] = evaluations;
  if (m.tier != Tier::kExact) {
    try {
      const auto k = normalization_coefficient(h_eval, h_exact);
      s["k_statistics"] = {{"mean", k.k_mean}, {"std", k.k_std}, {"count", k.count}};
    } catch (const Error&) {
      s["k_statistics"] = nullptr;
    }
  }
  s["wall_clock_s"] = wall;

  if (write) {
    const std::string header = artifact_header(m);
    const fs::path traces = m.output_dir / "traces";
    std::error_code ec;
    fs::create_directories(traces, ec);
    if (ec) throw ConfigError("cannot create " + traces.string() + ": " + ec.message());
    for (std::size_t r = 0; r < res.runs.size(); ++r) {
      char name[32];
      std::snprintf(name, sizeof name, "run_%04zu.csv", r);
      const fs::path p = traces / name;
      auto out = open_out(p);
      write_trace_csv(out, res.runs[r], r, *model, header);
      res.files.push_back(p);
    }
    const fs::path prob = m.output_dir / "probability.csv";
    {
      auto out = open_out(prob);
      write_probability_csv(out, res.probability, header);
    }
    res.files.push_back(prob);
    const fs::path summary = m.output_dir / "summary.json";
    {
      auto out = open_out(summary);
      out << s.dump(2) << '\n';
    }
    res.files.push_back(summary);
  }
  return res;
}

}  // namespace peidia
