#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "peidia/annealer.hpp"
#include "peidia/evaluator.hpp"
#include "peidia/ising.hpp"

namespace peidia {

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

/// E = A * sigma with unit input amplitude.
std::vector<cplx> ovmm_ideal(const SpectralTransform& t, const SpinState& s);

enum class NegativeIntensity {
  kReject,  // ideal intensities are never negative
  kAllow,   // dark-subtracted detector counts may dip below zero
};

/// H = (sum over negative-eigenvalue beams - sum over the rest) / (2 scale).
double hamiltonian_from_intensities(std::span<const double> intensities,
                                    std::span<const std::uint8_t> negative,
                                    double scale = 1.0,
                                    NegativeIntensity policy = NegativeIntensity::kReject);

/// Camera noise and digitization parameters. Electron units throughout.
struct DetectorModel {
  double full_well = 6e5;        // C_well
  int adc_bits = 14;             // B_ADC
  double dark_current = 60e-15;  // i_d, A
  double exposure = 16.7e-3;     // dt, s
  double readout_noise = 1000.0; // delta_r, e- RMS
  int frames_averaged = 3;
  /// Electron pedestal added before digitization and subtracted after, so
  /// noise around zero signal is not clipped away. 0 reproduces a plain
  /// clamp at zero.
  double black_level = 0.0;
  bool shot_noise = true;
  bool quantize = true;

  void validate() const;

  /// (C_well / 2^(B-1)) / sqrt(12)
  double delta_q() const;
  /// sqrt(i_d dt / e)
  double delta_d() const;
  /// full_well / 2^B
  double adc_step() const;
  /// sqrt(delta_r^2 + delta_d^2), per frame
  double dark_sigma() const;

  static DetectorModel baseline_camera();
  /// No noise, no quantization, one frame.
  static DetectorModel ideal();
};

struct Detection {
  std::vector<double> electrons;  // dark-subtracted, frame-averaged
  bool saturated = false;         // some expected signal exceeded full well
};

/// Expected signal mu_i = exposure_scale * I_i plus Gaussian readout, dark
/// and shot noise per frame; each frame is clamped to the ADC range and
/// quantized, then frames are averaged.
Detection detect(std::span<const double> intensities, const DetectorModel& det,
                 double exposure_scale, Rng& rng);
Detection detect(std::span<const cplx> field, const DetectorModel& det,
                 double exposure_scale, Rng& rng);

/// Hamiltonian in electron units measured through `det`.
double noisy_hamiltonian(const SpectralTransform& t, const SpinState& s,
                         const DetectorModel& det, double exposure_scale, Rng& rng);

/// Electrons per unit intensity that put |h_ref| at half the full well,
/// i.e. H_ref maps to -C_well/2.
double exposure_for_reference(const DetectorModel& det, double h_ref);

double fidelity_vector(std::span<const double> i_exp, std::span<const double> i_theo);
double fidelity_matrix(const RealMatrix& i_theo, const RealMatrix& i_exp);

struct NoiseBudget {
  double delta_q = 0.0;
  double delta_d = 0.0;
  double delta_r = 0.0;
  double delta_p_max = 0.0;   // shot noise at full well
  double delta_i_dark = 0.0;  // dark beam, single frame
  double delta_i_max = 0.0;   // full-well beam, single frame
  double delta_h = 0.0;       // single frame
  double delta_h_averaged = 0.0;
  double snr_db = 0.0;
  double r = 0.0;
  double delta_h_r = 0.0;
  bool resolvable = false;
};

/// Ground-state approximation: one beam at full well, n-1 dark beams.
NoiseBudget noise_budget(const DetectorModel& det, std::size_t n, double h0,
                         double h_min, double delta_h_min = 2.0);

struct PerfModel {
  double t_p = 0.0;  // propagation, s
  double t_u = 0.0;  // modulator update, s
  double t_d = 0.0;  // detection, s
  double t_e = 0.0;  // electronics, s
  double power = 0.0;  // W

  void validate() const;
  double t_iter() const { return t_p + t_u + t_d + t_e; }
  static PerfModel baseline_setup();
};

struct PerfReport {
  double flops = 0.0;
  double t_iter = 0.0;
  double rate = 0.0;  // FLOP/s
  double e_ff = 0.0;  // J/FLOP
};

PerfReport perf_report(std::size_t n, const PerfModel& perf);

struct NormalizationStats {
  double k_mean = 0.0;
  double k_std = 0.0;
  std::size_t count = 0;
};

/// K = h_exp / h_theo over pairs with h_theo != 0.
NormalizationStats normalization_coefficient(std::span<const double> h_exp,
                                             std::span<const double> h_theo);

/// Noiseless optical evaluation: A sigma, intensities, signed sum.
class IdealOpticalEvaluator final : public HamiltonianEvaluator {
 public:
  explicit IdealOpticalEvaluator(std::shared_ptr<const SpectralTransform> t);

  Evaluation evaluate(const SpinState& s) override;
  std::unique_ptr<HamiltonianEvaluator> clone(std::uint64_t stream) const override;
  std::string_view name() const override { return "ideal"; }
  std::size_t size() const override { return t_->size(); }

 private:
  std::shared_ptr<const SpectralTransform> t_;
  std::vector<double> spins_;
  std::vector<cplx> field_;
};

/// Ideal field measured by a noisy camera. Returns H in model units
/// (electron-unit H divided by the exposure scale); intensities in electrons.
class NoisyOpticalEvaluator final : public HamiltonianEvaluator {
 public:
  NoisyOpticalEvaluator(std::shared_ptr<const SpectralTransform> t, DetectorModel det,
                        double exposure_scale, std::uint64_t seed,
                        std::uint64_t stream = 0);

  Evaluation evaluate(const SpinState& s) override;
  std::unique_ptr<HamiltonianEvaluator> clone(std::uint64_t stream) const override;
  std::string_view name() const override { return "noisy"; }
  std::size_t size() const override { return t_->size(); }

  double exposure_scale() const { return exposure_; }
  const DetectorModel& detector() const { return det_; }

 private:
  std::shared_ptr<const SpectralTransform> t_;
  DetectorModel det_;
  double exposure_;
  std::uint64_t seed_;
  Rng rng_;
};

}  // namespace peidia
