#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "peidia/annealer.hpp"
#include "peidia/evaluator.hpp"
#include "peidia/ising.hpp"
#include "peidia/optical_sim.hpp"

namespace peidia {

using ByteMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Intensity-only view of an optical matrix multiplier. Calibration code
/// sees nothing else, so it works identically on the matrix-level model and
/// on the diffraction chain.
class Rig {
 public:
  virtual ~Rig() = default;

  virtual std::size_t size() const = 0;
  /// Programs the splitting matrix (SLM1 weights, row = output, column = beam).
  virtual void set_matrix(const ComplexMatrix& w) = 0;
  virtual const ComplexMatrix& matrix() const = 0;
  /// SLM0 amplitude of each beam.
  virtual void set_input_amplitudes(std::span<const double> e) = 0;
  virtual const std::vector<double>& input_amplitudes() const = 0;
  /// Output intensities for per-region transmissions x: 0 deactivates a
  /// region, -1 flips its spin, i adds pi/2.
  virtual std::vector<double> measure(std::span<const cplx> x) = 0;
  virtual std::unique_ptr<Rig> clone(std::uint64_t stream) const = 0;
};

/// Systematic errors of a matrix-level rig: A'_ij = gain_ij e^{i phase_ij}
/// times the programmed weight, and a per-beam input amplitude factor.
struct RigError {
  RealMatrix gain;
  RealMatrix phase;
  std::vector<double> input_gain;

  static RigError none(std::size_t n);
  /// Gains uniform in [gain_lo, gain_hi], phases uniform in (-pi, pi],
  /// input gains uniform in [input_lo, input_hi].
  static RigError random(std::size_t n, std::uint64_t seed, double gain_lo = 0.5,
                         double gain_hi = 1.5, double input_lo = 0.5, double input_hi = 1.5);
  void validate(std::size_t n) const;
};

/// out_i = sum_j gain_ij e^{i phase_ij} w_ij input_gain_j e_j x_j. With a
/// detector, each measurement is auto-exposed so the brightest expected
/// output sits at half the full well, and counts are returned divided by the
/// exposure scale.
class MatrixRig final : public Rig {
 public:
  MatrixRig(RigError error, std::optional<DetectorModel> detector = {}, std::uint64_t seed = 1,
            std::uint64_t stream = 0);

  std::size_t size() const override { return n_; }
  void set_matrix(const ComplexMatrix& w) override;
  const ComplexMatrix& matrix() const override { return w_; }
  void set_input_amplitudes(std::span<const double> e) override;
  const std::vector<double>& input_amplitudes() const override { return e_; }
  std::vector<double> measure(std::span<const cplx> x) override;
  std::unique_ptr<Rig> clone(std::uint64_t stream) const override;

  std::uint64_t measurements() const { return count_; }
  /// Effective complex transform currently realised (test access only).
  ComplexMatrix effective() const;

 private:
  std::size_t n_;
  RigError err_;
  std::optional<DetectorModel> det_;
  std::uint64_t seed_;
  Rng rng_;
  ComplexMatrix w_;
  std::vector<double> e_;
  std::uint64_t count_ = 0;
};

struct PhaseCalibration {
  RealMatrix delta_phi;    // n x (n-1); column j refers to beam j+1 against beam 0
  ByteMatrix unmeasurable; // dead beam in the pair
  double max_excursion = 0.0;  // largest |arccos argument| - 1 that was clamped
  std::size_t measurements = 0;
};

enum class PhaseEstimator {
  kArccos,  // arccos of the M1 interference term, sign from M2 (clamped)
  kAtan2,   // atan2 of both interference terms; well conditioned near 0 and pi
};

/// Four-measurement protocol per column pair (beam 0, beam j+1):
/// M1 both, M2 with +pi/2 on j+1, M3 beam 0 only, M4 beam j+1 only.
/// The rig is loaded with `loaded` (default all ones); the result is the
/// phase to add to column j+1 so the realised relative phase matches the
/// loaded one.
PhaseCalibration phase_calibrate(Rig& rig, const std::optional<ComplexMatrix>& loaded = {},
                                 PhaseEstimator estimator = PhaseEstimator::kArccos);

/// target(i, j) * exp(i delta_phi(i, j-1)) for j >= 1.
ComplexMatrix apply_phase_correction(const ComplexMatrix& target, const RealMatrix& delta_phi);

enum class ScaleFit {
  kNone,       // sqrt(C) is compared with |A| as measured
  kPerColumn,  // each column of sqrt(C) is first scaled onto |A| (least squares)
};

struct AmplitudeCalibration {
  ComplexMatrix matrix;          // final SLM1 weights
  double initial_residual = 0.0;
  std::vector<double> residual;  // ||sqrt(C) - |A|||_F after each round
  ByteMatrix flagged;            // C == 0 where |A| > 0; update skipped
};

/// Identity-input rounds of w_ij <- w_ij (|A_ij| / sqrt(C_ij))^damping,
/// starting from `start` (normally the phase-corrected target).
AmplitudeCalibration amplitude_calibrate_slm1(Rig& rig, const ComplexMatrix& target,
                                              const ComplexMatrix& start,
                                              std::size_t n_rounds = 4,
                                              ScaleFit fit = ScaleFit::kNone,
                                              double damping = 1.0);

struct InputCalibration {
  std::vector<double> e_in;
  std::vector<double> column_peak;  // sqrt(max_i F_j) after the last round
  std::vector<std::uint8_t> dead;
};

/// e_j <- max_i|A_ij| / sqrt(max_i C_ij), then n_rounds of
/// e_j <- e_j max_i|A_ij| / sqrt(max_i F_j) with only region j active.
/// Each factor is raised to `damping`; a phase-only splitter responds
/// super-linearly to its weights and needs damping < 1 to settle.
InputCalibration amplitude_calibrate_slm0(Rig& rig, const ComplexMatrix& target,
                                          std::size_t n_rounds = 3, double damping = 1.0);

struct CalibrationTables {
  RealMatrix delta_phi;       // n x (n-1), radians in (-pi, pi]
  RealMatrix slm1_amplitude;  // n x n ratios |w| / |A| (1 where A vanishes)
  std::vector<double> slm0_input;

  std::size_t size() const { return slm0_input.size(); }
  static CalibrationTables identity(std::size_t n);
};

nlohmann::json tables_to_json(const CalibrationTables& t);
CalibrationTables tables_from_json(const nlohmann::json& j);

/// target .* exp(i delta_phi) .* slm1_amplitude
ComplexMatrix program_matrix(const ComplexMatrix& target, const CalibrationTables& t);

struct CalibrationOptions {
  std::size_t slm1_rounds = 4;
  double slm1_damping = 1.0;
  std::size_t slm0_rounds = 3;
  double slm0_damping = 1.0;
  ScaleFit fit = ScaleFit::kNone;
  PhaseEstimator estimator = PhaseEstimator::kArccos;
  /// Phase measurement followed by SLM1 and SLM0 rounds, repeated. Later
  /// passes measure at the current operating point (loaded = current SLM1
  /// matrix), for rigs whose phase error depends on the programmed weights.
  std::size_t passes = 1;
};

struct CalibrationSession {
  CalibrationTables tables;
  PhaseCalibration phase;  // last pass
  AmplitudeCalibration slm1;  // last pass
  InputCalibration slm0;
};

/// Phase, SLM1 amplitude and SLM0 input calibration for `target`; leaves the
/// rig programmed with the result.
CalibrationSession calibrate(Rig& rig, const ComplexMatrix& target,
                             const CalibrationOptions& options = {});

/// Unitary DFT matrix W_jk = omega^{jk} / sqrt(n), omega = exp(-2 pi i / n).
ComplexMatrix dft_matrix(std::size_t n);

/// Programs W (through `tables` when given), feeds the columns of W^H and
/// scores the output intensity matrix against the identity.
double dft_benchmark(Rig& rig, const CalibrationTables* tables = nullptr);

/// Intensity matrix for the columns of `inputs` (column k -> column k).
RealMatrix measure_columns(Rig& rig, const ComplexMatrix& inputs);

/// Least-squares K with C ~ K |A|^2 from an identity-input measurement.
double intensity_scale(Rig& rig, const ComplexMatrix& target);

/// Hamiltonian read out through a calibrated rig: sigma is applied as region
/// signs and H = signed intensity sum / (2 K).
class RigEvaluator final : public HamiltonianEvaluator {
 public:
  RigEvaluator(std::unique_ptr<Rig> rig, std::shared_ptr<const SpectralTransform> t,
               double scale);

  Evaluation evaluate(const SpinState& s) override;
  std::unique_ptr<HamiltonianEvaluator> clone(std::uint64_t stream) const override;
  std::string_view name() const override { return name_; }
  std::size_t size() const override { return t_->size(); }
  double scale() const { return scale_; }
  void set_name(std::string name) { name_ = std::move(name); }

 private:
  std::unique_ptr<Rig> rig_;
  std::shared_ptr<const SpectralTransform> t_;
  double scale_;
  std::string name_ = "rig";
};

}  // namespace peidia
