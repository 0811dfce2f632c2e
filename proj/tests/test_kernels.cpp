#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "peidia/kernels.hpp"

using peidia::kernels::cplx;
namespace k = peidia::kernels;

namespace {

std::vector<cplx> random_complex(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<cplx> v(n);
  for (auto& z : v) z = {g(rng), g(rng)};
  return v;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("active kernel table is usable") {
  const auto& t = k::active();
  CHECK((t.name == "scalar" || t.name == "avx2"));
}

#if defined(PEIDIA_HAVE_AVX2)
TEST_CASE("avx2 kernels agree with scalar reference") {
  if (!k::avx2_supported()) {
    MESSAGE("CPU lacks AVX2/FMA; skipping equivalence");
    return;
  }
  const auto& s = k::scalar_table();
  const auto& v = k::avx2_table();
  std::mt19937_64 rng(11);
  // odd lengths exercise the scalar tails
  for (std::size_t n : {1U, 2U, 3U, 7U, 8U, 33U, 1000U}) {
    CAPTURE(n);
    const auto a = random_complex(n, rng);
    auto b = random_complex(n, rng);

    std::vector<cplx> o1(n), o2(n);
    s.complex_multiply(a, b, o1);
    v.complex_multiply(a, b, o2);
    CHECK(max_abs_diff(o1, o2) <= 1e-14);

    s.complex_multiply_conj(a, b, o1);
    v.complex_multiply_conj(a, b, o2);
    CHECK(max_abs_diff(o1, o2) <= 1e-14);

    std::vector<double> i1(n), i2(n);
    s.intensity(a, i1);
    v.intensity(a, i2);
    for (std::size_t i = 0; i < n; ++i) CHECK(i1[i] == doctest::Approx(i2[i]).epsilon(1e-15));

    b[0] = 0.0;
    s.phase_normalize(b, o1);
    v.phase_normalize(b, o2);
    CHECK(max_abs_diff(o1, o2) <= 1e-15);
    CHECK(o2[0] == cplx{1.0, 0.0});

    std::vector<std::uint8_t> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = (rng() & 1U) ? 1 : 0;
    CHECK(s.signed_sum(i1, mask) == doctest::Approx(v.signed_sum(i1, mask)).epsilon(1e-12));

    const double delta = 0.8;
    const double l1 = s.huber(a, b, delta, o1);
    const double l2 = v.huber(a, b, delta, o2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    CHECK(max_abs_diff(o1, o2) <= 1e-14);
  }
  for (std::size_t n : {2U, 5U, 20U, 31U}) {
    CAPTURE(n);
    const auto a = random_complex(n * n, rng);
    std::vector<double> spins(n);
    for (auto& x : spins) x = (rng() & 1U) ? 1.0 : -1.0;
    std::vector<cplx> o1(n), o2(n);
    s.spin_matvec(a, spins, o1);
    v.spin_matvec(a, spins, o2);
    CHECK(max_abs_diff(o1, o2) <= 1e-12);
  }
}
#endif

TEST_CASE("huber kernel matches the piecewise definition") {
  const auto& s = k::scalar_table();
  std::vector<cplx> field{{0.1, 0.0}, {3.0, 4.0}};
  std::vector<cplx> target{{0.0, 0.0}, {0.0, 0.0}};
  std::vector<cplx> grad(2);
  const double loss = s.huber(field, target, 1.0, grad);
  // 0.5 * 0.01 + (1 * 5 - 0.5)
  CHECK(loss == doctest::Approx(0.005 + 4.5));
  CHECK(std::abs(grad[0] - cplx{0.05, 0.0}) < 1e-15);
  CHECK(std::abs(grad[1] - cplx{0.3, 0.4}) < 1e-15);
}
