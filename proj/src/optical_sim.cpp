#include "peidia/optical_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "peidia/error.hpp"
#include "peidia/kernels.hpp"

namespace peidia {

std::vector<cplx> ovmm_ideal(const SpectralTransform& t, const SpinState& s) {
  const std::size_t n = t.size();
  if (s.size() != n) {
    throw DimensionError("spin state length " + std::to_string(s.size()) +
                         " does not match transform size " + std::to_string(n));
  }
  std::vector<double> spins(n);
  s.to_doubles(spins);
  std::vector<cplx> e(n);
  kernels::active().spin_matvec({t.a.data(), n * n}, spins, e);
  return e;
}

double hamiltonian_from_intensities(std::span<const double> intensities,
                                    std::span<const std::uint8_t> negative, double scale,
                                    NegativeIntensity policy) {
  if (intensities.size() != negative.size()) {
    throw DimensionError("intensity vector and sign mask differ in length");
  }
  if (!(scale > 0.0)) throw ConfigError("intensity scale must be positive");
  if (policy == NegativeIntensity::kReject) {
    for (std::size_t i = 0; i < intensities.size(); ++i) {
      if (intensities[i] < 0.0) {
        throw NumericalError("negative intensity " + std::to_string(intensities[i]) +
                             " at beam " + std::to_string(i));
      }
    }
  }
  return kernels::active().signed_sum(intensities, negative) / (2.0 * scale);
}

void DetectorModel::validate() const {
  if (!(full_well > 0.0)) throw ConfigError("detector full_well must be positive");
  if (adc_bits < 1 || adc_bits > 32) throw ConfigError("detector adc_bits must be in [1, 32]");
  if (dark_current < 0.0 || exposure <= 0.0 || readout_noise < 0.0) {
    throw ConfigError("detector dark_current/readout_noise must be >= 0 and exposure > 0");
  }
  if (frames_averaged < 1) throw ConfigError("detector frames_averaged must be >= 1");
  if (black_level < 0.0) throw ConfigError("detector black_level must be >= 0");
}

double DetectorModel::delta_q() const {
  return full_well / std::ldexp(1.0, adc_bits - 1) / std::sqrt(12.0);
}

double DetectorModel::delta_d() const {
  return std::sqrt(dark_current * exposure / kElementaryCharge);
}

double DetectorModel::adc_step() const { return full_well / std::ldexp(1.0, adc_bits); }

double DetectorModel::dark_sigma() const {
  return std::hypot(readout_noise, delta_d());
}

DetectorModel DetectorModel::baseline_camera() {
  DetectorModel d;
  d.black_level = 8000.0;
  return d;
}

DetectorModel DetectorModel::ideal() {
  DetectorModel d;
  d.dark_current = 0.0;
  d.readout_noise = 0.0;
  d.frames_averaged = 1;
  d.shot_noise = false;
  d.quantize = false;
  return d;
}

Detection detect(std::span<const double> intensities, const DetectorModel& det,
                 double exposure_scale, Rng& rng) {
  det.validate();
  if (!(exposure_scale > 0.0)) throw ConfigError("exposure_scale must be positive");
  const double dark2 = det.dark_sigma() * det.dark_sigma();
  const double top = det.full_well + det.black_level;
  const double step = det.adc_step();
  const int frames = det.frames_averaged;
  std::normal_distribution<double> gauss(0.0, 1.0);

  Detection out;
  out.electrons.resize(intensities.size());
  for (std::size_t i = 0; i < intensities.size(); ++i) {
    const double mu = exposure_scale * intensities[i];
    if (mu > det.full_well) out.saturated = true;
    const double var = dark2 + (det.shot_noise ? std::max(mu, 0.0) : 0.0);
    const double sigma = std::sqrt(var);
    double acc = 0.0;
    for (int f = 0; f < frames; ++f) {
      double v = mu + det.black_level;
      if (sigma > 0.0) v += sigma * gauss(rng);
      v = std::clamp(v, 0.0, top);
      if (det.quantize) v = std::round(v / step) * step;
      acc += v;
    }
    out.electrons[i] = acc / frames - det.black_level;
  }
  return out;
}

Detection detect(std::span<const cplx> field, const DetectorModel& det,
                 double exposure_scale, Rng& rng) {
  std::vector<double> intensity(field.size());
  kernels::active().intensity(field, intensity);
  return detect(intensity, det, exposure_scale, rng);
}

double noisy_hamiltonian(const SpectralTransform& t, const SpinState& s,
                         const DetectorModel& det, double exposure_scale, Rng& rng) {
  const auto e = ovmm_ideal(t, s);
  const auto d = detect(std::span<const cplx>(e), det, exposure_scale, rng);
  return hamiltonian_from_intensities(d.electrons, t.negative, 1.0,
                                      NegativeIntensity::kAllow);
}

double exposure_for_reference(const DetectorModel& det, double h_ref) {
  if (h_ref == 0.0) throw ConfigError("reference Hamiltonian must be nonzero");
  return 0.5 * det.full_well / std::abs(h_ref);
}

double fidelity_vector(std::span<const double> i_exp, std::span<const double> i_theo) {
  if (i_exp.size() != i_theo.size()) throw DimensionError("fidelity vectors differ in length");
  double dot = 0.0, ne = 0.0, nt = 0.0;
  for (std::size_t i = 0; i < i_exp.size(); ++i) {
    dot += i_exp[i] * i_theo[i];
    ne += i_exp[i] * i_exp[i];
    nt += i_theo[i] * i_theo[i];
  }
  if (ne == 0.0 || nt == 0.0) throw NumericalError("fidelity undefined for a zero vector");
  return std::min(1.0, std::abs(dot) / std::sqrt(ne * nt));
}

double fidelity_matrix(const RealMatrix& i_theo, const RealMatrix& i_exp) {
  if (i_theo.rows() != i_exp.rows() || i_theo.cols() != i_exp.cols()) {
    throw DimensionError("fidelity matrices differ in shape");
  }
  return fidelity_vector({i_exp.data(), static_cast<std::size_t>(i_exp.size())},
                         {i_theo.data(), static_cast<std::size_t>(i_theo.size())});
}

NoiseBudget noise_budget(const DetectorModel& det, std::size_t n, double h0, double h_min,
                         double delta_h_min) {
  det.validate();
  if (h0 == 0.0) throw ConfigError("noise budget needs a nonzero h0");
  if (h_min == 0.0) throw ConfigError("noise budget needs a nonzero h_min");
  if (n < 1) throw ConfigError("noise budget needs n >= 1");
  NoiseBudget b;
  b.delta_q = det.delta_q();
  b.delta_d = det.delta_d();
  b.delta_r = det.readout_noise;
  b.delta_p_max = std::sqrt(det.full_well);
  b.delta_i_dark = det.dark_sigma();
  b.delta_i_max = std::hypot(b.delta_i_dark, b.delta_p_max);
  b.delta_h = 0.5 * std::sqrt(static_cast<double>(n - 1) * b.delta_i_dark * b.delta_i_dark +
                              b.delta_i_max * b.delta_i_max);
  b.delta_h_averaged = b.delta_h / std::sqrt(static_cast<double>(det.frames_averaged));
  b.snr_db = 20.0 * std::log10(std::abs(h0) / b.delta_h);
  b.r = std::abs(b.delta_h / h0);
  b.delta_h_r = std::abs(delta_h_min / h_min);
  b.resolvable = b.delta_h_r > b.r;
  return b;
}

void PerfModel::validate() const {
  if (t_p < 0.0 || t_u < 0.0 || t_d < 0.0 || t_e < 0.0 || power < 0.0) {
    throw ConfigError("performance timings and power must be nonnegative");
  }
  if (!(t_iter() > 0.0)) throw ConfigError("iteration time must be positive");
}

PerfModel PerfModel::baseline_setup() {
  PerfModel p;
  p.t_p = 5e-9;
  p.t_u = 0.15;
  p.t_d = 0.17;
  p.t_e = 0.0;
  p.power = 16.0 + 6e-6;  // camera + laser
  return p;
}

PerfReport perf_report(std::size_t n, const PerfModel& perf) {
  perf.validate();
  PerfReport r;
  const auto nd = static_cast<double>(n);
  r.flops = 2.0 * nd * nd + 2.0 * nd;
  r.t_iter = perf.t_iter();
  r.rate = r.flops / r.t_iter;
  r.e_ff = perf.power / r.rate;
  return r;
}

NormalizationStats normalization_coefficient(std::span<const double> h_exp,
                                             std::span<const double> h_theo) {
  if (h_exp.size() != h_theo.size()) throw DimensionError("sample lists differ in length");
  std::vector<double> k;
  for (std::size_t i = 0; i < h_exp.size(); ++i) {
    if (h_theo[i] != 0.0) k.push_back(h_exp[i] / h_theo[i]);
  }
  if (k.empty()) throw NumericalError("no samples with nonzero theoretical Hamiltonian");
  NormalizationStats s;
  s.count = k.size();
  double sum = 0.0;
  for (double v : k) sum += v;
  s.k_mean = sum / static_cast<double>(k.size());
  double var = 0.0;
  for (double v : k) var += (v - s.k_mean) * (v - s.k_mean);
  s.k_std = k.size() > 1 ? std::sqrt(var / static_cast<double>(k.size() - 1)) : 0.0;
  return s;
}

IdealOpticalEvaluator::IdealOpticalEvaluator(std::shared_ptr<const SpectralTransform> t)
    : t_(std::move(t)), spins_(t_->size()), field_(t_->size()) {}

Evaluation IdealOpticalEvaluator::evaluate(const SpinState& s) {
  const std::size_t n = t_->size();
  if (s.size() != n) throw DimensionError("spin state does not match transform size");
  s.to_doubles(spins_);
  const auto& k = kernels::active();
  k.spin_matvec({t_->a.data(), n * n}, spins_, field_);
  Evaluation out;
  out.intensities.resize(n);
  k.intensity(field_, out.intensities);
  out.h = hamiltonian_from_intensities(out.intensities, t_->negative);
  return out;
}

std::unique_ptr<HamiltonianEvaluator> IdealOpticalEvaluator::clone(std::uint64_t) const {
  return std::make_unique<IdealOpticalEvaluator>(t_);
}

NoisyOpticalEvaluator::NoisyOpticalEvaluator(std::shared_ptr<const SpectralTransform> t,
                                             DetectorModel det, double exposure_scale,
                                             std::uint64_t seed, std::uint64_t stream)
    : t_(std::move(t)),
      det_(det),
      exposure_(exposure_scale),
      seed_(seed),
      rng_(make_stream(seed, stream, 0xde7ec7)) {
  det_.validate();
  if (!(exposure_ > 0.0)) throw ConfigError("exposure_scale must be positive");
}

Evaluation NoisyOpticalEvaluator::evaluate(const SpinState& s) {
  const auto e = ovmm_ideal(*t_, s);
  auto d = detect(std::span<const cplx>(e), det_, exposure_, rng_);
  Evaluation out;
  out.h = hamiltonian_from_intensities(d.electrons, t_->negative, exposure_,
                                       NegativeIntensity::kAllow);
  out.intensities = std::move(d.electrons);
  out.saturated = d.saturated;
  return out;
}

std::unique_ptr<HamiltonianEvaluator> NoisyOpticalEvaluator::clone(std::uint64_t stream) const {
  return std::make_unique<NoisyOpticalEvaluator>(t_, det_, exposure_, seed_, stream);
}

}  // namespace peidia
