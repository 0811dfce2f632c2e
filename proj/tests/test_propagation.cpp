#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "peidia/error.hpp"
#include "peidia/field.hpp"

using namespace peidia;

namespace {

FieldGrid random_field(std::size_t n, double d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FieldGrid f(n, n, d, d);
  for (auto& v : f.samples) v = {g(rng), g(rng)};
  return f;
}

cplx inner(const FieldGrid& a, const FieldGrid& b) {
  cplx s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a.samples[i]) * b.samples[i];
  return s;
}

double gaussian_radius(double w0, double z, double lambda) {
  const double zr = std::numbers::pi * w0 * w0 / lambda;
  return w0 * std::sqrt(1.0 + (z / zr) * (z / zr));
}

}  // namespace

TEST_CASE("field grid basics") {
  FieldGrid f(4, 3, 1e-3, 2e-3);
  CHECK(f.size() == 12);
  CHECK(f.x(2) == 0.0);
  CHECK(f.y(0) == doctest::Approx(-2e-3));
  f.at(1, 1) = {3.0, 4.0};
  CHECK(f.power() == doctest::Approx(25.0 * 2e-6));
  CHECK_THROWS_AS(FieldGrid(1, 4, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(FieldGrid(4, 4, 0.0, 1.0), ConfigError);
}

TEST_CASE("second moment radius of a sampled gaussian") {
  const auto g = gaussian_beam(256, 256, 4e-6, 4e-6, 100e-6, 40e-6, -20e-6);
  CHECK(second_moment_radius(g) == doctest::Approx(2.0 * 100e-6).epsilon(1e-3));
}

TEST_CASE("propagation is linear") {
  Propagator p(48, 40, 8e-6, 8e-6, 0.05, 1.55e-6, PixelModel::kRect);
  const auto a = random_field(48, 8e-6, 1);
  auto b = random_field(48, 8e-6, 2);
  b.ny = 40;
  b.samples.resize(48 * 40);
  auto a40 = a;
  a40.ny = 40;
  a40.samples.resize(48 * 40);
  FieldGrid sum = a40;
  const cplx c{0.3, -1.7};
  for (std::size_t i = 0; i < sum.size(); ++i) sum.samples[i] += c * b.samples[i];
  const auto ta = p.forward(a40), tb = p.forward(b), ts = p.forward(sum);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    err = std::max(err, std::abs(ts.samples[i] - ta.samples[i] - c * tb.samples[i]));
    ref = std::max(ref, std::abs(ts.samples[i]));
  }
  CHECK(err <= 1e-10 * ref);
}

TEST_CASE("adjoint consistency") {
  for (auto pixel : {PixelModel::kPoint, PixelModel::kRect}) {
    Propagator p(64, 64, 10e-6, 10e-6, 0.08, 1.55e-6, pixel);
    const auto u = random_field(64, 10e-6, 3);
    const auto v = random_field(64, 10e-6, 4);
    const cplx lhs = inner(p.forward(u), v);
    const cplx rhs = inner(u, p.adjoint(v));
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::abs(lhs));
  }
}

TEST_CASE("direct convolution oracle") {
  // Brute-force sum over the sampled kernel on a tiny grid.
  const std::size_t n = 6;
  const double d = 5e-6, z = 2e-3, lambda = 0.8e-6;
  const double k = 2.0 * std::numbers::pi / lambda;
  const auto u = random_field(n, d, 9);
  const auto out = propagate(u, z, lambda);
  for (std::size_t py = 0; py < n; ++py) {
    for (std::size_t px = 0; px < n; ++px) {
      cplx s{};
      for (std::size_t qy = 0; qy < n; ++qy) {
        for (std::size_t qx = 0; qx < n; ++qx) {
          const double x = (double(px) - double(qx)) * d, y = (double(py) - double(qy)) * d;
          const double r = std::sqrt(x * x + y * y + z * z);
          const cplx h = z / (2.0 * std::numbers::pi * r * r) * cplx(1.0 / r, k) *
                         std::exp(cplx(0.0, -k * r));
          s += h * u.at(qx, qy) * d * d;
        }
      }
      CHECK(std::abs(out.at(px, py) - s) <= 1e-12 * std::abs(s) + 1e-15);
    }
  }
}

TEST_CASE("gaussian beam radius follows the free-space law") {
  const double lambda = 1.55e-6, w0 = 431e-6, d = 12e-6;
  const auto u = gaussian_beam(512, 512, d, d, w0);
  for (double z : {0.1, 0.377, 0.754}) {
    const auto out = propagate(u, z, lambda);
    CHECK(second_moment_radius(out) == doctest::Approx(gaussian_radius(w0, z, lambda)).epsilon(0.01));
    CHECK(out.power() >= 0.99 * u.power());
  }
}

TEST_CASE("on-axis phase advances as exp(-ikz)") {
  // A wide Gaussian approximates a plane wave; the remaining Gouy term
  // atan(z/zR) is added to the analytic phase.
  const double lambda = 1.55e-6, w0 = 100e-6, d = 4e-6, z = 10e-3;
  const double k = 2.0 * std::numbers::pi / lambda;
  const double zr = std::numbers::pi * w0 * w0 / lambda;
  const auto out = propagate(gaussian_beam(256, 256, d, d, w0), z, lambda);
  const double expected = -k * z + std::atan(z / zr);
  const double got = std::arg(out.at(128, 128));
  const double diff = std::remainder(got - expected, 2.0 * std::numbers::pi);
  CHECK(std::abs(diff) <= 1e-3);
  CHECK(std::abs(out.at(128, 128)) == doctest::Approx(w0 / gaussian_radius(w0, z, lambda)).epsilon(1e-3));
}

TEST_CASE("undersampled kernel is rejected") {
  CHECK_THROWS_AS(Propagator(512, 512, 12e-6, 12e-6, 0.01, 1.55e-6), NumericalError);
  CHECK_THROWS_AS(Propagator(16, 16, 1e-6, 1e-6, -1.0, 1.55e-6), ConfigError);
}
