#include <cmath>
#include <numbers>

#include <doctest.h>

#include "peidia/calibration.hpp"
#include "peidia/error.hpp"

using namespace peidia;

namespace {

constexpr double kPi = std::numbers::pi;

double wrapped_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

// Ground truth for the phase table: the correction cancels the injected
// within-row phase of column j against column 0.
double injected_correction(const RigError& e, Eigen::Index i, Eigen::Index j) {
  return -(e.phase(i, j) - e.phase(i, 0));
}

ComplexMatrix random_target(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 3, 77);
  std::uniform_real_distribution<double> mag(0.2, 1.0), ph(-kPi, kPi);
  const auto m = static_cast<Eigen::Index>(n);
  ComplexMatrix a(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = std::polar(mag(rng), ph(rng));
  return a;
}

DetectorModel baseline_noise() { return DetectorModel::baseline_camera(); }

}  // namespace

TEST_CASE("rig error draws respect the band and validate shapes") {
  const auto e = RigError::random(6, 11);
  CHECK(e.gain.minCoeff() >= 0.5);
  CHECK(e.gain.maxCoeff() <= 1.5);
  CHECK(e.phase.cwiseAbs().maxCoeff() <= kPi);
  for (double b : e.input_gain) CHECK((b >= 0.5 && b <= 1.5));
  CHECK_THROWS_AS(e.validate(5), DimensionError);
  CHECK_THROWS_AS(RigError::random(4, 1, 1.2, 0.8), ConfigError);
  CHECK_THROWS_AS(MatrixRig(RigError::none(1)), ConfigError);
}

TEST_CASE("matrix rig measures |T x|^2") {
  const auto err = RigError::random(3, 5);
  MatrixRig rig(err);
  const ComplexMatrix w = random_target(3, 1);
  rig.set_matrix(w);
  const std::vector<cplx> x{1.0, cplx(0, 1), -1.0};
  const auto y = rig.measure(x);
  Eigen::VectorXcd xv(3);
  xv << x[0], x[1], x[2];
  const Eigen::VectorXcd out = rig.effective() * xv;
  for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(std::norm(out(i))).epsilon(1e-12));
  CHECK(rig.measurements() == 1);
}

TEST_CASE("phase calibration on a rig without phase error returns zeros") {
  MatrixRig rig(RigError::none(5));
  const auto pc = phase_calibrate(rig);
  CHECK(pc.delta_phi.rows() == 5);
  CHECK(pc.delta_phi.cols() == 4);
  CHECK(pc.delta_phi.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(pc.measurements == 16);
  CHECK((pc.unmeasurable.array() == 0).all());
}

TEST_CASE("phase calibration recovers random injected phases") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto err = RigError::random(8, seed);
    MatrixRig rig(err);
    const auto pc = phase_calibrate(rig);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < 8; ++i)
      for (Eigen::Index j = 1; j < 8; ++j)
        worst = std::max(worst, wrapped_gap(pc.delta_phi(i, j - 1), injected_correction(err, i, j)));
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("phase calibration takes the negative branch when M2 exceeds M3 + M4") {
  auto err = RigError::none(2);
  err.phase(0, 1) = -kPi / 2;
  MatrixRig rig(err);
  // Realised relative phase -pi/2: |1 + i e^{-i pi/2}|^2 = 4 > M3 + M4.
  const auto m2 = rig.measure(std::vector<cplx>{1.0, cplx(0, 1)});
  CHECK(m2[0] == doctest::Approx(4.0));
  const auto pc = phase_calibrate(rig);
  CHECK(pc.delta_phi(0, 0) == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(pc.delta_phi(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("phase calibration flags a dead beam") {
  auto err = RigError::none(3);
  err.input_gain[2] = 0.0;
  MatrixRig rig(err);
  const auto pc = phase_calibrate(rig);
  CHECK((pc.unmeasurable.col(1).array() == 1).all());
  CHECK((pc.unmeasurable.col(0).array() == 0).all());
}

TEST_CASE("phase correction makes the realised matrix match the target up to row phases") {
  const auto err = RigError::random(6, 9);
  MatrixRig rig(err);
  const ComplexMatrix a = random_target(6, 4);
  const auto pc = phase_calibrate(rig);
  rig.set_matrix(apply_phase_correction(a, pc.delta_phi));
  const ComplexMatrix t = rig.effective();
  for (Eigen::Index i = 0; i < 6; ++i) {
    const double row = std::arg(t(i, 0)) - std::arg(a(i, 0));
    for (Eigen::Index j = 1; j < 6; ++j) {
      CHECK(wrapped_gap(std::arg(t(i, j)) - std::arg(a(i, j)), row) <= 1e-9);
    }
  }
}

TEST_CASE("SLM1 amplitude rounds converge with a non-increasing residual") {
  const std::size_t n = 8;
  const ComplexMatrix a = random_target(n, 6);
  SUBCASE("no amplitude error converges in one round") {
    MatrixRig rig(RigError::none(n));
    const auto ac = amplitude_calibrate_slm1(rig, a, a, 4);
    REQUIRE(ac.residual.size() == 4);
    CHECK(ac.residual[0] <= 1e-12);
    CHECK(ac.initial_residual <= 1e-12);
  }
  SUBCASE("+-30% gains") {
    auto err = RigError::random(n, 21, 0.7, 1.3, 1.0, 1.0);
    MatrixRig rig(err);
    const auto pc = phase_calibrate(rig);
    const auto ac = amplitude_calibrate_slm1(rig, a, apply_phase_correction(a, pc.delta_phi), 4);
    CHECK(ac.residual.back() <= 0.01 * a.norm());
    double prev = ac.initial_residual;
    for (double r : ac.residual) {
      CHECK(r <= prev + 1e-12);
      prev = r;
    }
    CHECK(ac.initial_residual > 0.05 * a.norm());
  }
}

TEST_CASE("SLM1 amplitude rounds flag entries the rig cannot light") {
  auto err = RigError::none(3);
  err.gain(1, 2) = 0.0;
  MatrixRig rig(err);
  const ComplexMatrix a = ComplexMatrix::Ones(3, 3);
  const auto ac = amplitude_calibrate_slm1(rig, a, a, 2);
  CHECK(ac.flagged(1, 2) == 1);
  CHECK(ac.flagged.cast<int>().sum() == 1);
  CHECK(std::abs(ac.matrix(1, 2)) == doctest::Approx(1.0));
}

TEST_CASE("SLM0 input calibration") {
  const std::size_t n = 6;
  const ComplexMatrix a = random_target(n, 8);
  SUBCASE("uniform input is a no-op") {
    MatrixRig rig(RigError::none(n));
    rig.set_matrix(a);
    const auto ic = amplitude_calibrate_slm0(rig, a, 3);
    for (double e : ic.e_in) CHECK(e == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("injected column gains are equalised") {
    auto err = RigError::none(n);
    for (std::size_t j = 0; j < n; ++j) err.input_gain[j] = 0.5 + static_cast<double>(j) / (n - 1);
    MatrixRig rig(err);
    const ComplexMatrix ones = ComplexMatrix::Ones(n, n);
    rig.set_matrix(ones);
    const auto ic = amplitude_calibrate_slm0(rig, ones, 3);
    const auto [lo, hi] = std::minmax_element(ic.column_peak.begin(), ic.column_peak.end());
    CHECK(*hi / *lo - 1.0 <= 0.01);
    for (std::size_t j = 0; j < n; ++j) CHECK(ic.e_in[j] * err.input_gain[j] == doctest::Approx(1.0));
  }
  SUBCASE("dead column is flagged") {
    auto err = RigError::none(n);
    err.input_gain[3] = 0.0;
    MatrixRig rig(err);
    rig.set_matrix(a);
    const auto ic = amplitude_calibrate_slm0(rig, a, 2);
    CHECK(ic.dead[3] == 1);
    CHECK(ic.dead[0] == 0);
  }
}

TEST_CASE("full calibration reproduces the target intensity matrix") {
  const std::size_t n = 10;
  const ComplexMatrix a = random_target(n, 12);
  MatrixRig rig(RigError::random(n, 31));
  const auto s = calibrate(rig, a);
  const RealMatrix c = measure_columns(rig, ComplexMatrix::Identity(n, n));
  CHECK(fidelity_matrix(a.cwiseAbs2(), c) >= 0.999);
  for (double v : s.tables.slm0_input) CHECK(v > 0.0);
  CHECK((s.tables.slm1_amplitude.array() > 0.0).all());
  CHECK(s.tables.delta_phi.cwiseAbs().maxCoeff() <= kPi);
}

TEST_CASE("DFT matrix is unitary") {
  for (std::size_t n : {1u, 4u, 7u, 20u}) {
    const ComplexMatrix w = dft_matrix(n);
    CHECK((w * w.adjoint() - ComplexMatrix::Identity(n, n)).norm() <= 1e-12);
  }
  CHECK(std::arg(dft_matrix(4)(1, 1)) == doctest::Approx(-kPi / 2));
}

TEST_CASE("DFT benchmark") {
  SUBCASE("ideal rig scores one") {
    MatrixRig rig(RigError::none(8));
    CHECK(dft_benchmark(rig) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("calibration beats the raw erroneous rig on the same seed") {
    MatrixRig raw(RigError::random(8, 3));
    const double before = dft_benchmark(raw);
    MatrixRig rig(RigError::random(8, 3));
    const auto s = calibrate(rig, dft_matrix(8));
    const double after = dft_benchmark(rig, &s.tables);
    CHECK(before < after);
    CHECK(after >= 0.999999);
  }
  SUBCASE("camera noise, n = 20") {
    MatrixRig rig(RigError::random(20, 7, 0.7, 1.3, 0.7, 1.3), baseline_noise(), 7);
    const auto s = calibrate(rig, dft_matrix(20));
    CHECK(s.phase.max_excursion < 0.1);
    CHECK(dft_benchmark(rig, &s.tables) >= 0.999);
  }
}

TEST_CASE("calibration tables round-trip through JSON") {
  MatrixRig rig(RigError::random(4, 2));
  const auto t = calibrate(rig, dft_matrix(4)).tables;
  const auto back = tables_from_json(nlohmann::json::parse(tables_to_json(t).dump()));
  CHECK(back.delta_phi.isApprox(t.delta_phi, 1e-15));
  CHECK(back.slm1_amplitude.isApprox(t.slm1_amplitude, 1e-15));
  CHECK(back.slm0_input == t.slm0_input);
  auto bad = tables_to_json(t);
  bad["slm1_amplitude_ratio"][0][0] = -1.0;
  CHECK_THROWS_AS(tables_from_json(bad), ConfigError);
  bad = tables_to_json(t);
  bad["delta_phi_rad"].erase(0);
  CHECK_THROWS_AS(tables_from_json(bad), DimensionError);
  CHECK_THROWS_AS(tables_from_json(nlohmann::json::object()), ConfigError);
}

TEST_CASE("rig evaluator error shrinks with calibration rounds") {
  const auto model = std::make_shared<IsingModel>(random_glass(8, 4));
  const auto t = std::make_shared<const SpectralTransform>(spectral_transform(*model));
  Rng rng = make_stream(99, 0, 0);
  std::vector<SpinState> states;
  for (int k = 0; k < 40; ++k) states.push_back(SpinState::random(8, rng));

  double prev = std::numeric_limits<double>::infinity();
  double uncalibrated = 0.0;
  for (std::size_t rounds : {0u, 1u, 2u, 4u}) {
    auto rig = std::make_unique<MatrixRig>(RigError::random(8, 17, 0.7, 1.3, 0.7, 1.3));
    CalibrationOptions o;
    o.slm1_rounds = rounds;
    o.slm0_rounds = 0;
    calibrate(*rig, t->a, o);
    const double k = intensity_scale(*rig, t->a);
    RigEvaluator ev(std::move(rig), t, k);
    double err = 0.0;
    for (const auto& s : states) err = std::max(err, std::abs(ev.evaluate(s).h - hamiltonian_exact(*model, s)));
    // a noiseless linear rig is exact after one round, so allow rounding
    CHECK(err <= prev + 1e-12);
    if (rounds == 0) uncalibrated = err;
    prev = err;
  }
  CHECK(uncalibrated > 0.1);
  CHECK(prev <= 1e-9);
}
