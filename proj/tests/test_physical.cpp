#include <cmath>
#include <complex>

#include <doctest.h>

#include "peidia/error.hpp"
#include "peidia/physical_rig.hpp"

using namespace peidia;

namespace {

IsingModel open_chain() {
  RealMatrix j = RealMatrix::Zero(4, 4);
  j(0, 1) = j(1, 0) = 1.0;
  j(1, 2) = j(2, 1) = -1.0;
  j(2, 3) = j(3, 2) = 1.0;
  return symmetrize(j);
}

std::vector<cplx> random_input(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0, 5);
  std::normal_distribution<double> g;
  std::vector<cplx> x(n);
  for (auto& v : x) v = {g(rng), g(rng)};
  return x;
}

double spot(const FieldGrid& f, Vec2 c) {
  const auto ix = static_cast<std::size_t>(std::lround(c.x / f.dx) + static_cast<long>(f.nx / 2));
  const auto iy = static_cast<std::size_t>(std::lround(c.y / f.dy) + static_cast<long>(f.ny / 2));
  return std::norm(f.at(ix, iy));
}

}  // namespace

TEST_CASE("desk geometry") {
  const auto d = desk_geometry(4);
  const auto& g = d.optics;
  CHECK_NOTHROW(g.validate());
  CHECK(g.size() == 4);
  for (const Vec2& c : g.beam_positions_slm1) {
    CHECK(std::abs(c.x / g.slm.pitch - std::round(c.x / g.slm.pitch)) < 1e-9);
    CHECK(std::abs(c.y / g.slm.pitch - std::round(c.y / g.slm.pitch)) < 1e-9);
  }
  CHECK(g.region_radius >= 1.5 * d.w_slm * (1.0 - 1e-12));
  // w_slm is the minimum radius on both modulators for the chosen spacing
  const auto b = beam_geometry(g.wavelength, g.l12 / 2.0);
  CHECK(b.w_slm == doctest::Approx(d.w_slm).epsilon(1e-12));
  CHECK(g.l2p == doctest::Approx(0.4 * g.l12));
  CHECK(g.lens_f1 > 0.0);
  CHECK(g.lens_f2 > 0.0);
  CHECK_NOTHROW(desk_geometry(9));
  CHECK_THROWS_AS(desk_geometry(4, 256, 8e-6, 1.55e-6, 0.03, 0.0), ConfigError);
  CHECK_THROWS_AS(desk_geometry(400, 32), CapacityError);
}

TEST_CASE("cached region responses match full propagation of the chain") {
  DiffractionRig rig(desk_geometry(4));
  Rng rng = make_stream(4, 0, 1);
  ComplexMatrix w(4, 4);
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) w(i, j) = {g(rng), g(rng)};
  rig.set_matrix(w);
  rig.set_input_amplitudes(std::vector<double>{1.0, 0.6, 1.3, 0.9});
  for (std::uint64_t seed : {1u, 2u}) {
    const auto x = random_input(4, seed);
    const auto cached = rig.expected(x);
    const FieldGrid f = rig.detector_field(x);
    for (std::size_t m = 0; m < 4; ++m) {
      CHECK(cached[m] == doctest::Approx(spot(f, rig.geometry().optics.beam_positions_slm2[m])).epsilon(1e-9));
    }
  }
}

TEST_CASE("each region lands on its own spot when SLM1 is programmed diagonally") {
  DiffractionRig rig(desk_geometry(4));
  rig.set_matrix(ComplexMatrix::Identity(4, 4));
  const RealMatrix c = measure_columns(rig, ComplexMatrix::Identity(4, 4));
  for (Eigen::Index j = 0; j < 4; ++j) {
    for (Eigen::Index i = 0; i < 4; ++i) {
      if (i != j) CHECK(c(i, j) < 0.02 * c(j, j));
    }
  }
  // deactivating every region leaves only stray light
  const auto dark = rig.expected(std::vector<cplx>(4, 0.0));
  for (double v : dark) CHECK(v < 1e-4 * c.maxCoeff());
}

TEST_CASE("pinhole image keeps the spots and nothing else") {
  DiffractionRig rig(desk_geometry(4));
  const std::vector<cplx> x{1.0, -1.0, 1.0, 1.0};
  const auto img = rig.filtered_image(x);
  const FieldGrid f = rig.detector_field(x);
  const auto& spots = rig.geometry().optics.beam_positions_slm2;
  for (const Vec2& c : spots) {
    const auto ix = static_cast<std::size_t>(std::lround(c.x / f.dx) + 128);
    const auto iy = static_cast<std::size_t>(std::lround(c.y / f.dy) + 128);
    CHECK(img[iy * f.nx + ix] == doctest::Approx(spot(f, c)));
  }
  CHECK(img[0] == 0.0);
  CHECK(img[f.size() - 1] == 0.0);
}

TEST_CASE("readout options") {
  DiffractionRigOptions o;
  o.readout_pixels = 4;
  CHECK_THROWS_AS(DiffractionRig(desk_geometry(4), o), ConfigError);
  o.readout_pixels = 9;
  DiffractionRig nine(desk_geometry(4), o);
  DiffractionRig one(desk_geometry(4));
  nine.set_matrix(ComplexMatrix::Identity(4, 4));
  one.set_matrix(ComplexMatrix::Identity(4, 4));
  const std::vector<cplx> x{1.0, 0.0, 0.0, 0.0};
  const double centre = one.expected(x)[0];
  const double mean9 = nine.expected(x)[0];
  // a smooth peak: the 3 x 3 mean sits a little below the centre pixel
  CHECK(mean9 < centre);
  CHECK(mean9 > 0.8 * centre);
}

TEST_CASE("clones reproduce noiseless measurements and noisy ones scatter around them") {
  DiffractionRigOptions o;
  DiffractionRig rig(desk_geometry(4), o);
  auto copy = rig.clone(3);
  const auto x = random_input(4, 9);
  const auto a = rig.measure(x);
  const auto b = copy->measure(x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

  o.detector = DetectorModel::baseline_camera();
  DiffractionRig noisy(desk_geometry(4), o);
  const auto y = noisy.measure(x);
  const double peak = *std::max_element(a.begin(), a.end());
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(y[i] - a[i]) < 0.02 * peak);
}

TEST_CASE("calibrated diffraction chain reproduces the toy model Hamiltonians") {
  const auto model = std::make_shared<IsingModel>(open_chain());
  const auto t = std::make_shared<const SpectralTransform>(spectral_transform(*model));
  auto setup = make_physical_evaluator(t);
  CHECK(setup.matrix_fidelity >= 0.999);
  CHECK(setup.scale > 0.0);

  const GroundState gs = brute_force_ground(*model);
  double best = std::numeric_limits<double>::infinity();
  SpinState best_state;
  for (std::uint64_t bits = 0; bits < 16; ++bits) {
    const SpinState s = SpinState::from_bits(4, bits);
    const double exact = hamiltonian_exact(*model, s);
    const double h = setup.evaluator->evaluate(s).h;
    CHECK(std::abs(h - exact) <= 0.05 * std::abs(exact));
    if (h < best) {
      best = h;
      best_state = s;
    }
  }
  CHECK(hamiltonian_exact(*model, best_state) == doctest::Approx(gs.h));

  // global flip: a pi mask on every region is a global phase, apart from
  // stray light that misses all regions
  const SpinState up = SpinState::all_up(4);
  const double h_up = setup.evaluator->evaluate(up).h;
  const double h_down = setup.evaluator->evaluate(up.negated()).h;
  CHECK(h_down == doctest::Approx(h_up).epsilon(0.02));
}
