#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "peidia/annealer.hpp"
#include "peidia/error.hpp"
#include "peidia/optical_sim.hpp"

using namespace peidia;

TEST_CASE("flip count bounds and zero temperature") {
  Rng rng(1);
  for (int i = 0; i < 20000; ++i) {
    const auto m = sample_flip_count(5.0, 1.0, 20, rng);
    CHECK(m >= 1);
    CHECK(m <= 10);
  }
  CHECK(sample_flip_count(0.0, 3.0, 20, rng) == 1);
  std::size_t ones = 0;
  for (int i = 0; i < 1000; ++i) ones += sample_flip_count(1e-9, 1.0, 20, rng) == 1;
  CHECK(ones == 1000);
  CHECK_THROWS_AS(sample_flip_count(1.0, 1.0, 1, rng), ConfigError);
}

TEST_CASE("flip count rejection rate follows the folded Cauchy tail") {
  // P(round|x| >= n) = P(|x| >= n - 1/2) = 1 - (2/pi) atan((n - 1/2)/scale)
  const std::size_t n = 20;
  const double scale = 6.0;
  const double p = 1.0 - 2.0 / std::numbers::pi * std::atan((n - 0.5) / scale);
  Rng rng(2024);
  std::uint64_t rejected = 0;
  const std::uint64_t accepted = 1'000'000;
  for (std::uint64_t i = 0; i < accepted; ++i) sample_flip_count(scale, 1.0, n, rng, &rejected);
  // Each accepted draw ends a geometric run, so the rejected share of all draws is p.
  const double draws = static_cast<double>(accepted + rejected);
  const double rate = static_cast<double>(rejected) / draws;
  const double sigma = std::sqrt(p * (1.0 - p) / draws);
  CHECK(std::abs(rate - p) <= 3.0 * sigma);
}

TEST_CASE("metropolis rule") {
  Rng rng(9);
  CHECK(metropolis_accept(-5.0, 0.0, rng));
  CHECK(metropolis_accept(-5.0, 3.0, rng));
  CHECK(metropolis_accept(0.0, 0.0, rng));
  CHECK_FALSE(metropolis_accept(1.0, 0.0, rng));
  const double t = 2.0;
  const int trials = 100000;
  int hits = 0;
  for (int i = 0; i < trials; ++i) hits += metropolis_accept(t * std::log(2.0), t, rng);
  const double sigma = std::sqrt(0.25 / trials);
  CHECK(std::abs(hits / double(trials) - 0.5) <= 3.0 * sigma);
}

TEST_CASE("config validation and schedule") {
  AnnealConfig cfg;
  cfg.eta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.eta = 0.9;
  cfg.t0 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.t0 = 4.0;
  cfg.n_temp = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.n_temp = 5;

  const auto model = mobius_ladder(8);
  const auto s = resolve_schedule(model, cfg);
  CHECK(s.alpha * s.t0 == doctest::Approx(1.0));  // n / 8
  for (std::size_t i = 0; i < 5; ++i) CHECK(s.temperature(i) == 4.0 * std::pow(0.9, double(i)));

  AnnealConfig autot;
  const auto a = resolve_schedule(model, autot);
  CHECK(a.t0 > 0.0);
  CHECK(a.t0 == estimate_t0(model, autot.seed));
}

TEST_CASE("anneal trace bookkeeping") {
  auto model = std::make_shared<const IsingModel>(random_glass(10, 7));
  ExactEvaluator exact(model);
  AnnealConfig cfg;
  cfg.n_step = 20;
  cfg.n_temp = 10;
  cfg.seed = 77;
  const auto r = anneal(*model, exact, cfg);
  REQUIRE(r.iterations() == 200);
  CHECK(r.evaluations == 201);
  CHECK(r.flip_offset.size() == 201);

  const auto states = replay(r);
  double best = hamiltonian_exact(*model, r.initial);
  double prev = r.initial_h;
  for (std::size_t k = 0; k < r.iterations(); ++k) {
    const double h = hamiltonian_exact(*model, states[k]);
    CHECK(h == doctest::Approx(r.exact_h[k]));
    CHECK(h == doctest::Approx(r.accepted_h[k]));
    if (r.accepted[k]) {
      CHECK(r.accepted_h[k] == r.proposed_h[k]);
    } else {
      CHECK(r.accepted_h[k] == prev);
    }
    if (r.accepted[k] && r.proposed_h[k] <= prev) CHECK(r.accepted_h[k] <= prev);
    CHECK(r.flip_count(k) >= 1);
    CHECK(r.flip_count(k) <= 5);
    // distinct indices per proposal
    for (auto i = r.flip_offset[k]; i < r.flip_offset[k + 1]; ++i) {
      for (auto j = i + 1; j < r.flip_offset[k + 1]; ++j) {
        CHECK(r.flip_index[i] != r.flip_index[j]);
      }
    }
    CHECK(r.temperature[k] == doctest::Approx(resolve_schedule(*model, cfg).temperature(k / 20)));
    best = std::min(best, h);
    prev = r.accepted_h[k];
  }
  CHECK(states.back() == r.final_state);
  CHECK(r.best_h == best);
  CHECK(hamiltonian_exact(*model, r.best_state) == best);
}

TEST_CASE("anneal is deterministic and independent of thread count") {
  auto model = std::make_shared<const IsingModel>(random_glass(12, 3));
  auto t = std::make_shared<const SpectralTransform>(spectral_transform(*model));
  NoisyOpticalEvaluator noisy(t, DetectorModel::baseline_camera(),
                              exposure_for_reference(DetectorModel::baseline_camera(), 20.0), 5);
  AnnealConfig cfg;
  cfg.n_step = 10;
  cfg.n_temp = 8;
  cfg.seed = 42;
  const auto a = anneal_replicas(*model, noisy, cfg, 6, 1);
  const auto b = anneal_replicas(*model, noisy, cfg, 6, 3);
  REQUIRE(a.size() == 6);
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(a[r].accepted_h == b[r].accepted_h);
    CHECK(a[r].proposed_h == b[r].proposed_h);
    CHECK(a[r].flip_index == b[r].flip_index);
    CHECK(a[r].initial == b[r].initial);
  }
  CHECK(a[0].accepted_h != a[1].accepted_h);
}

TEST_CASE("zero-temperature anneal stays in the ground state") {
  auto model = std::make_shared<const IsingModel>(mobius_ladder(12));
  const auto g = brute_force_ground(*model);
  ExactEvaluator exact(model);
  AnnealConfig cfg;
  cfg.t0 = 1e-300;
  cfg.alpha = 1.0;
  cfg.n_step = 50;
  cfg.n_temp = 4;
  const auto r = anneal(*model, exact, cfg, g.state);
  for (double h : r.exact_h) CHECK(h == g.h);
  const auto p = ground_state_probability({r, r}, g.h, *model);
  for (double v : p) CHECK(v == 1.0);
}

TEST_CASE("ground state probability on a small glass") {
  auto model = std::make_shared<const IsingModel>(random_glass(10, 21));
  const double h_min = brute_force_ground(*model).h;
  ExactEvaluator exact(model);
  AnnealConfig cfg;
  cfg.n_step = 30;
  cfg.n_temp = 20;
  cfg.t0 = 2.0;
  cfg.seed = 5;
  const auto runs = anneal_replicas(*model, exact, cfg, 200);
  const auto p = ground_state_probability(runs, h_min, *model);
  REQUIRE(p.size() == 600);
  std::size_t finals = 0;
  for (const auto& r : runs) finals += same_energy(r.exact_h.back(), h_min);
  CHECK(p.back() == doctest::Approx(finals / 200.0));
  CHECK(p.back() > 0.5);

  const auto again = anneal_replicas(*model, exact, cfg, 200);
  for (std::size_t r = 0; r < 200; ++r) CHECK(again[r].accepted_h == runs[r].accepted_h);

  auto shorter = runs;
  shorter[3].accepted.pop_back();
  CHECK_THROWS_AS(ground_state_probability(shorter, h_min, *model), DimensionError);
}

TEST_CASE("evaluator errors carry the iteration index") {
  struct Failing final : HamiltonianEvaluator {
    int calls = 0;
    Evaluation evaluate(const SpinState&) override {
      if (++calls == 4) throw NumericalError("boom");
      return {0.0, {}, false};
    }
    std::unique_ptr<HamiltonianEvaluator> clone(std::uint64_t) const override {
      return std::make_unique<Failing>();
    }
    std::string_view name() const override { return "failing"; }
    std::size_t size() const override { return 4; }
  };
  Failing f;
  AnnealConfig cfg;
  cfg.t0 = 1.0;
  try {
    anneal(mobius_ladder(4), f, cfg);
    FAIL("expected an exception");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("iteration 3") != std::string::npos);
  }
}
