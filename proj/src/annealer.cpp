#include "peidia/annealer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "peidia/error.hpp"

namespace peidia {

Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

void AnnealConfig::validate() const {
  if (t0 && !(*t0 > 0.0 && std::isfinite(*t0))) {
    throw ConfigError("anneal t0 must be positive, got " + std::to_string(*t0));
  }
  if (n_step < 1 || n_temp < 1) throw ConfigError("n_step and n_temp must be >= 1");
  if (!(eta > 0.0 && eta < 1.0)) {
    throw ConfigError("anneal eta must lie in (0, 1), got " + std::to_string(eta));
  }
  if (alpha && !(*alpha > 0.0 && std::isfinite(*alpha))) {
    throw ConfigError("anneal alpha must be positive, got " + std::to_string(*alpha));
  }
}

double ResolvedSchedule::temperature(std::size_t stage) const {
  return t0 * std::pow(eta, static_cast<double>(stage));
}

double estimate_t0(const IsingModel& model, std::uint64_t seed, std::size_t probes) {
  // Mean |dH| of single-spin flips from random states: dH_i = 2 s_i h_i with
  // local field h_i = sum_k J_ik s_k.
  Rng rng = make_stream(seed, 0, 0x7430);
  const std::size_t n = model.size();
  const RealMatrix& j = model.couplings();
  double total = 0.0;
  for (std::size_t p = 0; p < probes; ++p) {
    const SpinState s = SpinState::random(n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      double field = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        field += j(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * s[k];
      }
      total += 2.0 * std::abs(field);
    }
  }
  const double t0 = total / static_cast<double>(probes * n);
  // A model with no couplings still needs a positive scale.
  return t0 > 0.0 ? t0 : 1.0;
}

ResolvedSchedule resolve_schedule(const IsingModel& model, const AnnealConfig& cfg) {
  cfg.validate();
  ResolvedSchedule s;
  s.t0 = cfg.t0 ? *cfg.t0 : estimate_t0(model, cfg.seed);
  s.alpha = cfg.alpha ? *cfg.alpha : static_cast<double>(model.size()) / (8.0 * s.t0);
  s.n_step = cfg.n_step;
  s.n_temp = cfg.n_temp;
  s.eta = cfg.eta;
  s.seed = cfg.seed;
  return s;
}

std::size_t sample_flip_count(double t, double alpha, std::size_t n, Rng& rng,
                              std::uint64_t* rejections) {
  if (n < 2) throw ConfigError("flip sampling needs n >= 2");
  if (!(t >= 0.0) || !(alpha > 0.0)) {
    throw ConfigError("flip sampling needs t >= 0 and alpha > 0");
  }
  const double scale = alpha * t;
  if (scale == 0.0) return 1;
  std::cauchy_distribution<double> cauchy(0.0, scale);
  const double limit = static_cast<double>(n);
  double m = 0.0;
  for (;;) {
    m = std::round(std::abs(cauchy(rng)));
    if (m < limit) break;
    if (rejections) ++*rejections;
  }
  auto count = static_cast<std::size_t>(m);
  if (count == 0) {
    count = 1;
  } else if (2 * count > n) {
    count = n - count;
  }
  return count;
}

bool metropolis_accept(double delta_h, double t, Rng& rng) {
  if (delta_h <= 0.0) return true;
  if (t <= 0.0) return false;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < std::exp(-delta_h / t);
}

namespace {

[[noreturn]] void rethrow_at(std::size_t iteration) {
  const std::string where = "evaluation failed at iteration " + std::to_string(iteration) + ": ";
  try {
    throw;
  } catch (const CapacityError& e) {
    throw CapacityError(where + e.what(), e.limit());
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(where + e.what());
  } catch (const std::exception& e) {
    throw Error(where + e.what());
  }
}

}  // namespace

AnnealResult anneal(const IsingModel& model, HamiltonianEvaluator& evaluator,
                    const ResolvedSchedule& schedule, std::uint64_t run_index,
                    const std::optional<SpinState>& initial) {
  const std::size_t n = model.size();
  if (evaluator.size() != n) {
    throw DimensionError("evaluator is bound to " + std::to_string(evaluator.size()) +
                         " spins, model has " + std::to_string(n));
  }
  if (n > 65535) throw CapacityError("flip log stores 16-bit spin indices", 65535);
  Rng rng = make_stream(schedule.seed, run_index);

  AnnealResult r;
  if (initial) {
    if (initial->size() != n) throw DimensionError("initial state has the wrong length");
    r.initial = *initial;
  } else {
    r.initial = SpinState::random(n, rng);
  }
  SpinState current = r.initial;
  try {
    r.initial_h = evaluator.evaluate(current).h;
  } catch (...) {
    rethrow_at(0);
  }
  r.evaluations = 1;
  double h = r.initial_h;
  double h_exact = hamiltonian_exact(model, current);
  r.best_state = current;
  r.best_h = h_exact;

  const std::size_t total = schedule.n_step * schedule.n_temp;
  r.temperature.reserve(total);
  r.stage.reserve(total);
  r.proposed_h.reserve(total);
  r.accepted_h.reserve(total);
  r.exact_h.reserve(total);
  r.accepted.reserve(total);
  r.flip_offset.reserve(total + 1);
  r.flip_offset.push_back(0);

  std::vector<std::uint16_t> order(n);
  std::iota(order.begin(), order.end(), std::uint16_t{0});

  std::size_t iteration = 0;
  for (std::size_t stage = 0; stage < schedule.n_temp; ++stage) {
    const double t = schedule.temperature(stage);
    for (std::size_t step = 0; step < schedule.n_step; ++step, ++iteration) {
      const std::size_t m = sample_flip_count(t, schedule.alpha, n, rng);
      // partial Fisher-Yates: the first m entries become a uniform m-subset
      SpinState next = current;
      for (std::size_t k = 0; k < m; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(order[k], order[pick(rng)]);
        next.flip(order[k]);
        r.flip_index.push_back(order[k]);
      }
      r.flip_offset.push_back(static_cast<std::uint32_t>(r.flip_index.size()));

      double h_next = 0.0;
      try {
        h_next = evaluator.evaluate(next).h;
      } catch (...) {
        rethrow_at(iteration + 1);
      }
      ++r.evaluations;

      const bool accept = metropolis_accept(h_next - h, t, rng);
      if (accept) {
        current = std::move(next);
        h = h_next;
        h_exact = hamiltonian_exact(model, current);
        if (h_exact < r.best_h) {
          r.best_h = h_exact;
          r.best_state = current;
        }
      }
      r.temperature.push_back(t);
      r.stage.push_back(static_cast<std::uint32_t>(stage));
      r.proposed_h.push_back(h_next);
      r.accepted_h.push_back(h);
      r.exact_h.push_back(h_exact);
      r.accepted.push_back(accept ? 1 : 0);
    }
  }
  r.final_state = std::move(current);
  return r;
}

AnnealResult anneal(const IsingModel& model, HamiltonianEvaluator& evaluator,
                    const AnnealConfig& cfg, const std::optional<SpinState>& initial) {
  return anneal(model, evaluator, resolve_schedule(model, cfg), 0, initial);
}

std::vector<AnnealResult> anneal_replicas(const IsingModel& model,
                                          const HamiltonianEvaluator& prototype,
                                          const AnnealConfig& cfg, std::size_t runs,
                                          std::size_t threads,
                                          const std::optional<SpinState>& initial) {
  const ResolvedSchedule schedule = resolve_schedule(model, cfg);
  std::vector<AnnealResult> results(runs);
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(runs, 1));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= runs) return;
      try {
        auto evaluator = prototype.clone(r);
        results[r] = anneal(model, *evaluator, schedule, r, initial);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(runs);
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<SpinState> replay(const AnnealResult& result) {
  std::vector<SpinState> states;
  states.reserve(result.iterations());
  SpinState current = result.initial;
  for (std::size_t k = 0; k < result.iterations(); ++k) {
    if (result.accepted[k]) {
      for (auto i = result.flip_offset[k]; i < result.flip_offset[k + 1]; ++i) {
        current.flip(result.flip_index[i]);
      }
    }
    states.push_back(current);
  }
  return states;
}

bool same_energy(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

std::vector<double> ground_state_probability(const std::vector<AnnealResult>& results,
                                             double h_min, const IsingModel& model) {
  if (results.empty()) return {};
  const std::size_t iters = results.front().iterations();
  std::vector<double> hits(iters, 0.0);
  for (const auto& r : results) {
    if (r.iterations() != iters) {
      throw DimensionError("runs have different iteration counts (" +
                           std::to_string(r.iterations()) + " vs " +
                           std::to_string(iters) + ")");
    }
    SpinState current = r.initial;
    double h = hamiltonian_exact(model, current);
    for (std::size_t k = 0; k < iters; ++k) {
      if (r.accepted[k]) {
        for (auto i = r.flip_offset[k]; i < r.flip_offset[k + 1]; ++i) {
          current.flip(r.flip_index[i]);
        }
        h = hamiltonian_exact(model, current);
      }
      if (same_energy(h, h_min)) hits[k] += 1.0;
    }
  }
  for (auto& v : hits) v /= static_cast<double>(results.size());
  return hits;
}

}  // namespace peidia
