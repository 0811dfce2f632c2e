#include <doctest.h>

#include <cmath>
#include <random>

#include "peidia/error.hpp"
#include "peidia/ising.hpp"

using namespace peidia;

namespace {

RealMatrix random_matrix(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  RealMatrix m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Straight double sum over the raw (possibly asymmetric) matrix.
double quadratic_oracle(const RealMatrix& raw, const SpinState& s) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index k = 0; k < raw.cols(); ++k) {
      if (i != k) acc += raw(i, k) * s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(k)];
    }
  }
  return -0.5 * acc;
}

}  // namespace

TEST_CASE("symmetrize keeps the symmetric part") {
  RealMatrix raw(2, 2);
  raw << 0, 2, 0, 0;
  const auto m = IsingModel::symmetrize(raw);
  CHECK(m.coupling(0, 1) == 1.0);
  CHECK(m.coupling(1, 0) == 1.0);
  CHECK(m.coupling(0, 0) == 0.0);

  RealMatrix sym(3, 3);
  sym << 0, 1, -2, 1, 0, 3, -2, 3, 0;
  CHECK(IsingModel::symmetrize(sym).couplings() == sym);
}

TEST_CASE("symmetrize rejects bad input") {
  CHECK_THROWS_AS(IsingModel::symmetrize(RealMatrix::Zero(2, 3)), DimensionError);
  CHECK_THROWS_AS(IsingModel::symmetrize(RealMatrix::Zero(1, 1)), DimensionError);
  RealMatrix bad = RealMatrix::Zero(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(IsingModel::symmetrize(bad), ConfigError);
}

TEST_CASE("antisymmetric part does not change H") {
  std::mt19937_64 rng(3);
  const RealMatrix raw = random_matrix(6, rng);
  const auto m = IsingModel::symmetrize(raw);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = SpinState::random(6, rng);
    CHECK(hamiltonian_exact(m, s) == doctest::Approx(quadratic_oracle(raw, s)).epsilon(1e-12));
  }
}

TEST_CASE("hamiltonian_exact basics") {
  RealMatrix j(2, 2);
  j << 0, 1, 1, 0;
  const auto m = IsingModel::symmetrize(j);
  CHECK(hamiltonian_exact(m, SpinState({1, 1})) == -1.0);
  CHECK_THROWS_AS(hamiltonian_exact(m, SpinState({1, 1, 1})), DimensionError);
  CHECK_THROWS_AS(SpinState({1, 0}), ConfigError);

  std::mt19937_64 rng(5);
  const auto g = IsingModel::symmetrize(random_matrix(8, rng));
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = SpinState::random(8, rng);
    CHECK(hamiltonian_exact(g, s) ==
          doctest::Approx(quadratic_oracle(g.couplings(), s)).epsilon(1e-12));
    CHECK(hamiltonian_exact(g, s) == doctest::Approx(hamiltonian_exact(g, s.negated())));
  }
}

TEST_CASE("spectral transform reconstructs J") {
  RealMatrix j2(2, 2);
  j2 << 0, 1, 1, 0;
  const auto t2 = spectral_transform(IsingModel::symmetrize(j2));
  CHECK(t2.eigenvalues(0) == doctest::Approx(-1.0));
  CHECK(t2.eigenvalues(1) == doctest::Approx(1.0));
  CHECK(t2.negative_count() == 1);

  std::mt19937_64 rng(8);
  for (std::size_t n : {2U, 8U, 17U, 64U}) {
    CAPTURE(n);
    const auto m = IsingModel::symmetrize(random_matrix(n, rng));
    const auto t = spectral_transform(m);
    const Eigen::MatrixXcd a = t.a;
    const Eigen::MatrixXcd recon = a.transpose() * a;
    CHECK((recon.real() - m.couplings()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(recon.imag().cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((t.q * t.q.transpose() - RealMatrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(t.eigenvalues.sum()) <= 1e-9 * static_cast<double>(n));
    for (Eigen::Index i = 0; i < t.a.rows(); ++i) {
      const bool neg = t.negative[static_cast<std::size_t>(i)] != 0;
      CHECK(neg == (t.eigenvalues(i) < 0.0));
      const double stray = neg ? t.a.row(i).real().cwiseAbs().maxCoeff()
                               : t.a.row(i).imag().cwiseAbs().maxCoeff();
      CHECK(stray == 0.0);
    }
    for (Eigen::Index i = 1; i < t.eigenvalues.size(); ++i) {
      CHECK(t.eigenvalues(i - 1) <= t.eigenvalues(i));
    }
  }
}

TEST_CASE("zero eigenvalues count as nonnegative") {
  // one coupled pair plus two free spins: eigenvalues {-1, 0, 0, 1}
  RealMatrix z = RealMatrix::Zero(4, 4);
  z(0, 1) = z(1, 0) = 1.0;
  const auto t = spectral_transform(IsingModel::symmetrize(z));
  CHECK(t.negative_count() == 1);
  CHECK_THROWS_AS(spectral_transform(IsingModel::symmetrize(z), -1.0), ConfigError);
}

TEST_CASE("Moebius ladder n=20") {
  const auto m = mobius_ladder(20);
  const auto t = spectral_transform(m);
  CHECK(t.negative_count() == 11);
  const auto g = brute_force_ground(m);
  CHECK(g.h == -26.0);
  CHECK(hamiltonian_exact(m, g.state) == -26.0);
  CHECK(g.state[0] == 1);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(m.coupling(i, (i + 1) % 20) == -1.0);
    CHECK(m.coupling(i, (i + 10) % 20) == -1.0);
  }
  CHECK_THROWS_AS(mobius_ladder(7), ConfigError);
}

TEST_CASE("brute force against plain enumeration") {
  RealMatrix ferro = RealMatrix::Ones(4, 4);
  const auto f = brute_force_ground(IsingModel::symmetrize(ferro));
  CHECK(f.h == -6.0);
  CHECK(f.state == SpinState::all_up(4));

  for (std::uint64_t seed : {1U, 2U, 3U}) {
    const auto m = random_glass(10, seed);
    double best = 1e300;
    for (std::uint64_t bits = 0; bits < 1024; ++bits) {
      best = std::min(best, hamiltonian_exact(m, SpinState::from_bits(10, bits)));
    }
    const auto g = brute_force_ground(m);
    CHECK(g.h == best);
    CHECK(hamiltonian_exact(m, g.state) == best);
  }
  CHECK_THROWS_AS(brute_force_ground(random_glass(25, 1)), CapacityError);
  CHECK_THROWS_AS(brute_force_ground(random_glass(10, 1), 8), CapacityError);
}

TEST_CASE("random glass entries") {
  const auto m = random_glass(12, 4);
  for (std::size_t a = 0; a < 12; ++a) {
    for (std::size_t b = 0; b < 12; ++b) {
      if (a == b) {
        CHECK(m.coupling(a, b) == 0.0);
      } else {
        CHECK(std::abs(m.coupling(a, b)) == 1.0);
      }
    }
  }
  CHECK(random_glass(12, 4).couplings() == m.couplings());
}

TEST_CASE("problem JSON round trip") {
  const auto doc = nlohmann::json::parse(R"({"n": 3, "edges": [[0, 1, 1.5], [1, 0, 0.5], [1, 2, -1]]})");
  const auto m = problem_from_json(doc);
  CHECK(m.coupling(0, 1) == 2.0);  // duplicates summed
  CHECK(m.coupling(2, 1) == -1.0);
  const auto back = problem_from_json(problem_to_json(m));
  CHECK(back.couplings() == m.couplings());

  const auto dense = problem_from_json(nlohmann::json::parse(R"({"matrix": [[0, 2], [0, 0]]})"));
  CHECK(dense.coupling(0, 1) == 1.0);

  CHECK_THROWS_AS(problem_from_json(nlohmann::json::parse(R"({"n": 2, "edges": [[0, 5, 1]]})")),
                  ConfigError);
  CHECK_THROWS_AS(problem_from_json(nlohmann::json::parse(R"({"matrix": [[0, 1]]})")),
                  DimensionError);
  CHECK_THROWS_AS(problem_from_json(nlohmann::json::parse(R"({"edges": []})")), ConfigError);
}
