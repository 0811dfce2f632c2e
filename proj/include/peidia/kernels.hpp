#pragma once

// Data-parallel inner loops of the optical simulation. Each kernel has a
// scalar reference implementation and, on x86-64, an AVX2/FMA variant. The
// variant is picked once at startup from CPUID; PEIDIA_SIMD=scalar|avx2|auto
// overrides the choice.

#include <complex>
#include <cstdint>
#include <span>
#include <string_view>

namespace peidia::kernels {

using cplx = std::complex<double>;

struct KernelTable {
  std::string_view name;

  /// out[i] = a[i] * b[i]
  void (*complex_multiply)(std::span<const cplx> a, std::span<const cplx> b,
                           std::span<cplx> out);
  /// out[i] = a[i] * conj(b[i])
  void (*complex_multiply_conj)(std::span<const cplx> a,
                                std::span<const cplx> b, std::span<cplx> out);
  /// out[i] = |in[i]|^2
  void (*intensity)(std::span<const cplx> in, std::span<double> out);
  /// out[i] = in[i] / |in[i]|, zero magnitude maps to 1.
  void (*phase_normalize)(std::span<const cplx> in, std::span<cplx> out);
  /// sum over negative[i] != 0 of values[i] minus the sum over the rest.
  double (*signed_sum)(std::span<const double> values,
                       std::span<const std::uint8_t> negative);
  /// out = A * spins for a row-major n x n complex A and real spins.
  void (*spin_matvec)(std::span<const cplx> a, std::span<const double> spins,
                      std::span<cplx> out);
  /// Huber loss of r = field - target summed over elements; writes the
  /// Wirtinger derivative dL/d(field*) into grad.
  double (*huber)(std::span<const cplx> field, std::span<const cplx> target,
                  double delta, std::span<cplx> grad);
};

const KernelTable& scalar_table();
#if defined(PEIDIA_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

bool avx2_supported();

/// Table selected for this process.
const KernelTable& active();

}  // namespace peidia::kernels
