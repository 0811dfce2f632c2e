#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "peidia/annealer.hpp"
#include "peidia/config.hpp"

namespace peidia {

struct Reference {
  double h_min = 0.0;
  std::string source;  // "brute_force" | "manifest" | "best_of_runs"
  std::optional<SpinState> state;
};

/// Ground energy that the probability curve counts against.
Reference reference_minimum(const IsingModel& model, const RunManifest& m);

struct TierEvaluator {
  std::unique_ptr<HamiltonianEvaluator> evaluator;
  /// Tier parameters worth recording next to the results (exposure scale,
  /// calibration fidelity, ...).
  nlohmann::json info = nlohmann::json::object();
};

/// Builds the evaluator of the manifest's tier. `h_ref` is the reference
/// ground energy used by the noisy exposure convention.
TierEvaluator make_tier_evaluator(const RunManifest& m, std::shared_ptr<const IsingModel> model,
                                  double h_ref);

/// Artifact header line: "# schema_version=1 manifest_hash=<hex> seed=<s>".
std::string artifact_header(const RunManifest& m);

/// Columns: run, iteration, stage, T, H_evaluator, H_exact, accepted_flag,
/// flip_count. Iteration 0 is the initial state.
void write_trace_csv(std::ostream& out, const AnnealResult& r, std::size_t run,
                     const IsingModel& model, const std::string& header);

/// Columns: iteration, probability.
void write_probability_csv(std::ostream& out, const std::vector<double>& p,
                           const std::string& header);

struct SolveResult {
  Reference reference;
  std::vector<AnnealResult> runs;
  std::vector<double> probability;  // per iteration
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;  // written artifacts
};

/// Loads the problem, builds the tier evaluator, runs the replicas and, when
/// `write` is set, writes traces/run_XXXX.csv, probability.csv and
/// summary.json under the manifest's output directory.
SolveResult solve(const RunManifest& m, bool write = true);

}  // namespace peidia
