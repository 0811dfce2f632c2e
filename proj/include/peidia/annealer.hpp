#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "peidia/evaluator.hpp"
#include "peidia/ising.hpp"

namespace peidia {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream, salt). Streams with different
/// keys are statistically independent for practical purposes.
Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0);

struct AnnealConfig {
  /// Initial temperature; unset picks the mean single-flip |dH| (estimate_t0).
  std::optional<double> t0;
  std::size_t n_step = 30;
  std::size_t n_temp = 20;
  double eta = 0.9;
  /// Cauchy scale coefficient; unset picks alpha * t0 = n / 8.
  std::optional<double> alpha;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t iterations() const { return n_step * n_temp; }
};

/// AnnealConfig with every default filled in for a particular model.
struct ResolvedSchedule {
  double t0 = 0.0;
  double alpha = 0.0;
  std::size_t n_step = 0;
  std::size_t n_temp = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;

  double temperature(std::size_t stage) const;
};

ResolvedSchedule resolve_schedule(const IsingModel& model, const AnnealConfig& cfg);

/// Default initial temperature: mean |dH| of single-spin flips taken from
/// `probes` uniformly random states.
double estimate_t0(const IsingModel& model, std::uint64_t seed, std::size_t probes = 32);

/// Folded-Cauchy flip count. Draws x ~ Cauchy(0, alpha * t) until
/// round(|x|) < n, then maps 0 -> 1 and m > n/2 -> n - m. The number of
/// rejected draws is added to `rejections` when given.
std::size_t sample_flip_count(double t, double alpha, std::size_t n, Rng& rng,
                              std::uint64_t* rejections = nullptr);

/// Metropolis rule; never accepts an uphill move at t == 0.
bool metropolis_accept(double delta_h, double t, Rng& rng);

struct AnnealResult {
  SpinState initial;
  double initial_h = 0.0;  // evaluator value

  // One entry per iteration.
  std::vector<double> temperature;
  std::vector<std::uint32_t> stage;
  std::vector<double> proposed_h;  // evaluator value of the proposal
  std::vector<double> accepted_h;  // evaluator value of the retained state
  std::vector<double> exact_h;     // oracle value of the retained state
  std::vector<std::uint8_t> accepted;
  /// Flip log in CSR form: proposal k flipped flip_index[flip_offset[k] ..
  /// flip_offset[k+1]).
  std::vector<std::uint32_t> flip_offset;
  std::vector<std::uint16_t> flip_index;

  SpinState final_state;
  SpinState best_state;
  double best_h = 0.0;  // exact
  std::uint64_t evaluations = 0;

  std::size_t iterations() const { return accepted.size(); }
  std::size_t flip_count(std::size_t k) const {
    return flip_offset[k + 1] - flip_offset[k];
  }
};

/// One annealing run. `initial` defaults to a random state drawn from the
/// run's stream.
AnnealResult anneal(const IsingModel& model, HamiltonianEvaluator& evaluator,
                    const ResolvedSchedule& schedule, std::uint64_t run_index,
                    const std::optional<SpinState>& initial = {});

AnnealResult anneal(const IsingModel& model, HamiltonianEvaluator& evaluator,
                    const AnnealConfig& cfg,
                    const std::optional<SpinState>& initial = {});

/// Runs `runs` replicas on up to `threads` workers (0 = hardware
/// concurrency). Replica r anneals a clone of `prototype` keyed by r, so the
/// output does not depend on the thread count.
std::vector<AnnealResult> anneal_replicas(const IsingModel& model,
                                          const HamiltonianEvaluator& prototype,
                                          const AnnealConfig& cfg, std::size_t runs,
                                          std::size_t threads = 0,
                                          const std::optional<SpinState>& initial = {});

/// Retained spin state after every iteration, rebuilt from the flip log.
std::vector<SpinState> replay(const AnnealResult& result);

/// Fraction of runs whose retained state has exact H == h_min, per iteration.
/// States come from replaying the flip logs, and `model` scores them.
std::vector<double> ground_state_probability(const std::vector<AnnealResult>& results,
                                             double h_min, const IsingModel& model);

bool same_energy(double a, double b);

}  // namespace peidia
