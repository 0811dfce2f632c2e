#include <cmath>

#include "peidia/kernels.hpp"

namespace peidia::kernels {
namespace {

void complex_multiply(std::span<const cplx> a, std::span<const cplx> b,
                      std::span<cplx> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] = {ar * br - ai * bi, ar * bi + ai * br};
  }
}

void complex_multiply_conj(std::span<const cplx> a, std::span<const cplx> b,
                           std::span<cplx> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] = {ar * br + ai * bi, ai * br - ar * bi};
  }
}

void intensity(std::span<const cplx> in, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = in[i].real() * in[i].real() + in[i].imag() * in[i].imag();
  }
}

void phase_normalize(std::span<const cplx> in, std::span<cplx> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mag = std::sqrt(in[i].real() * in[i].real() +
                                 in[i].imag() * in[i].imag());
    out[i] = mag > 0.0 ? cplx{in[i].real() / mag, in[i].imag() / mag}
                       : cplx{1.0, 0.0};
  }
}

double signed_sum(std::span<const double> values,
                  std::span<const std::uint8_t> negative) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += negative[i] ? values[i] : -values[i];
  }
  return acc;
}

void spin_matvec(std::span<const cplx> a, std::span<const double> spins,
                 std::span<cplx> out) {
  const std::size_t n = spins.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double re = 0.0, im = 0.0;
    const cplx* row = a.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) {
      re += row[c].real() * spins[c];
      im += row[c].imag() * spins[c];
    }
    out[r] = {re, im};
  }
}

double huber(std::span<const cplx> field, std::span<const cplx> target,
             double delta, std::span<cplx> grad) {
  double loss = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double rr = field[i].real() - target[i].real();
    const double ri = field[i].imag() - target[i].imag();
    const double mag = std::sqrt(rr * rr + ri * ri);
    if (mag <= delta) {
      loss += 0.5 * mag * mag;
      grad[i] = {0.5 * rr, 0.5 * ri};
    } else {
      loss += delta * mag - 0.5 * delta * delta;
      const double s = 0.5 * delta / mag;
      grad[i] = {s * rr, s * ri};
    }
  }
  return loss;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",        complex_multiply, complex_multiply_conj, intensity,
      phase_normalize, signed_sum,       spin_matvec,           huber,
  };
  return table;
}

}  // namespace peidia::kernels
