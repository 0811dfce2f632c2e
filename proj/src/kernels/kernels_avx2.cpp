// AVX2/FMA variants. A __m256d holds two interleaved complex doubles
// [re0, im0, re1, im1]; tails fall back to the scalar table.

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "peidia/kernels.hpp"

namespace peidia::kernels {
namespace {

inline const double* dp(const cplx* p) {
  return reinterpret_cast<const double*>(p);
}
inline double* dp(cplx* p) { return reinterpret_cast<double*>(p); }

inline __m256d cmul(__m256d a, __m256d b) {
  const __m256d b_re = _mm256_movedup_pd(b);
  const __m256d b_im = _mm256_permute_pd(b, 0xF);
  const __m256d a_swap = _mm256_permute_pd(a, 0x5);
  return _mm256_fmaddsub_pd(a, b_re, _mm256_mul_pd(a_swap, b_im));
}

inline __m256d cmul_conj(__m256d a, __m256d b) {
  const __m256d b_re = _mm256_movedup_pd(b);
  const __m256d b_im = _mm256_permute_pd(b, 0xF);
  const __m256d a_swap = _mm256_permute_pd(a, 0x5);
  return _mm256_fmsubadd_pd(a, b_re, _mm256_mul_pd(a_swap, b_im));
}

// |z|^2 broadcast into both lanes of each complex.
inline __m256d norm2_dup(__m256d v) {
  const __m256d s = _mm256_mul_pd(v, v);
  return _mm256_add_pd(s, _mm256_permute_pd(s, 0x5));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void complex_multiply(std::span<const cplx> a, std::span<const cplx> b,
                      std::span<cplx> out) {
  const std::size_t n = out.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(dp(a.data() + i));
    const __m256d vb = _mm256_loadu_pd(dp(b.data() + i));
    _mm256_storeu_pd(dp(out.data() + i), cmul(va, vb));
  }
  if (i < n) {
    scalar_table().complex_multiply(a.subspan(i), b.subspan(i), out.subspan(i));
  }
}

void complex_multiply_conj(std::span<const cplx> a, std::span<const cplx> b,
                           std::span<cplx> out) {
  const std::size_t n = out.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(dp(a.data() + i));
    const __m256d vb = _mm256_loadu_pd(dp(b.data() + i));
    _mm256_storeu_pd(dp(out.data() + i), cmul_conj(va, vb));
  }
  if (i < n) {
    scalar_table().complex_multiply_conj(a.subspan(i), b.subspan(i),
                                         out.subspan(i));
  }
}

void intensity(std::span<const cplx> in, std::span<double> out) {
  const std::size_t n = out.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(dp(in.data() + i));
    const __m256d v1 = _mm256_loadu_pd(dp(in.data() + i + 2));
    const __m256d h =
        _mm256_hadd_pd(_mm256_mul_pd(v0, v0), _mm256_mul_pd(v1, v1));
    _mm256_storeu_pd(out.data() + i, _mm256_permute4x64_pd(h, 0xD8));
  }
  if (i < n) {
    scalar_table().intensity(in.subspan(i), out.subspan(i));
  }
}

void phase_normalize(std::span<const cplx> in, std::span<cplx> out) {
  const std::size_t n = out.size();
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one_re = _mm256_setr_pd(1.0, 0.0, 1.0, 0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d v = _mm256_loadu_pd(dp(in.data() + i));
    const __m256d mag = _mm256_sqrt_pd(norm2_dup(v));
    const __m256d is_zero = _mm256_cmp_pd(mag, zero, _CMP_EQ_OQ);
    const __m256d q = _mm256_div_pd(v, mag);
    _mm256_storeu_pd(dp(out.data() + i), _mm256_blendv_pd(q, one_re, is_zero));
  }
  if (i < n) {
    scalar_table().phase_normalize(in.subspan(i), out.subspan(i));
  }
}

double signed_sum(std::span<const double> values,
                  std::span<const std::uint8_t> negative) {
  const std::size_t n = values.size();
  const __m256d plus = _mm256_set1_pd(1.0);
  const __m256d minus = _mm256_set1_pd(-1.0);
  const __m256i zero = _mm256_setzero_si256();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    std::int32_t bytes;
    std::memcpy(&bytes, negative.data() + i, sizeof(bytes));
    const __m256i m = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(bytes));
    const __m256d is_neg =
        _mm256_castsi256_pd(_mm256_cmpgt_epi64(m, zero));
    const __m256d sign = _mm256_blendv_pd(minus, plus, is_neg);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(values.data() + i), sign, acc);
  }
  double total = hsum(acc);
  if (i < n) {
    total += scalar_table().signed_sum(values.subspan(i), negative.subspan(i));
  }
  return total;
}

void spin_matvec(std::span<const cplx> a, std::span<const double> spins,
                 std::span<cplx> out) {
  const std::size_t n = spins.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    const cplx* row = a.data() + r * n;
    __m256d acc = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 2 <= n; c += 2) {
      const __m256d s = _mm256_permute4x64_pd(
          _mm256_castpd128_pd256(_mm_loadu_pd(spins.data() + c)), 0x50);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(dp(row + c)), s, acc);
    }
    const __m128d folded = _mm_add_pd(_mm256_castpd256_pd128(acc),
                                      _mm256_extractf128_pd(acc, 1));
    double re = _mm_cvtsd_f64(folded);
    double im = _mm_cvtsd_f64(_mm_unpackhi_pd(folded, folded));
    for (; c < n; ++c) {
      re += row[c].real() * spins[c];
      im += row[c].imag() * spins[c];
    }
    out[r] = {re, im};
  }
}

double huber(std::span<const cplx> field, std::span<const cplx> target,
             double delta, std::span<cplx> grad) {
  const std::size_t n = field.size();
  const __m256d vdelta = _mm256_set1_pd(delta);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d half_delta_sq = _mm256_set1_pd(0.5 * delta * delta);
  const __m256d half_delta = _mm256_set1_pd(0.5 * delta);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d r = _mm256_sub_pd(_mm256_loadu_pd(dp(field.data() + i)),
                                    _mm256_loadu_pd(dp(target.data() + i)));
    const __m256d m2 = norm2_dup(r);
    const __m256d mag = _mm256_sqrt_pd(m2);
    const __m256d quad = _mm256_cmp_pd(mag, vdelta, _CMP_LE_OQ);
    const __m256d loss_q = _mm256_mul_pd(half, m2);
    const __m256d loss_l = _mm256_fmsub_pd(vdelta, mag, half_delta_sq);
    acc = _mm256_add_pd(acc, _mm256_blendv_pd(loss_l, loss_q, quad));
    const __m256d scale =
        _mm256_blendv_pd(_mm256_div_pd(half_delta, mag), half, quad);
    _mm256_storeu_pd(dp(grad.data() + i), _mm256_mul_pd(scale, r));
  }
  // Each element's loss sits in both of its lanes.
  double loss = 0.5 * hsum(acc);
  if (i < n) {
    loss += scalar_table().huber(field.subspan(i), target.subspan(i), delta,
                                 grad.subspan(i));
  }
  return loss;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{
      "avx2",          complex_multiply, complex_multiply_conj, intensity,
      phase_normalize, signed_sum,       spin_matvec,           huber,
  };
  return table;
}

}  // namespace peidia::kernels
