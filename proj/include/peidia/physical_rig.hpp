#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "peidia/calibration.hpp"
#include "peidia/field.hpp"
#include "peidia/holography.hpp"

namespace peidia {

/// Small-grid version of the three-modulator chain: beams on a square
/// lattice at whole-pixel positions, regions of 1.5 w_slm, the SLM1-SLM2
/// spacing chosen so w_slm is the minimum radius, lenses placing the waists
/// midway between SLM1 and SLM2 and on the detector at l2p = l2p_ratio l12.
/// Mixing orders of the SLM2 gratings land (r_k - sum c_n r_n) l2p / l12
/// away from a spot; a ratio of 1/2 puts the third-order ones exactly on
/// neighbouring spots, 0.4 keeps them at least a fifth of the spacing away.
struct DeskGeometry {
  OpticalGeometry optics;
  double input_waist = 0.0;  // incident Gaussian on SLM0
  double w_slm = 0.0;
};

DeskGeometry desk_geometry(std::size_t n, std::size_t pixels = 256, double pitch = 8e-6,
                           double wavelength = 1.55e-6, double l01 = 0.03,
                           double l2p_ratio = 0.4);

struct DiffractionRigOptions {
  PixelModel pixel = PixelModel::kRect;
  /// 1: beam-centre pixel; 9: mean of the central 3 x 3 pixels.
  std::size_t readout_pixels = 1;
  std::optional<DetectorModel> detector;
  /// Electrons per intensity unit. Unset: each measurement is exposed so its
  /// brightest spot sits at half the full well.
  std::optional<double> exposure_scale;
  std::uint64_t seed = 1;
};

/// Rig realised by diffraction: incident Gaussian -> SLM0 -> l01 -> SLM1
/// (regions times x_n) -> l12 -> SLM2 -> l2p -> spots at R_m. All three
/// modulators are phase-only projections of their ideal patterns. The
/// detector field is linear in the region transmissions, so the rig caches
/// one detector response per SLM1 region (plus the light that misses every
/// region) and rebuilds them when a pattern changes.
class DiffractionRig final : public Rig {
 public:
  DiffractionRig(const DeskGeometry& geometry, DiffractionRigOptions options = {});
  ~DiffractionRig() override;

  std::size_t size() const override { return n_; }
  void set_matrix(const ComplexMatrix& w) override;
  const ComplexMatrix& matrix() const override { return w_; }
  void set_input_amplitudes(std::span<const double> e) override;
  const std::vector<double>& input_amplitudes() const override { return e_; }
  std::vector<double> measure(std::span<const cplx> x) override;
  std::unique_ptr<Rig> clone(std::uint64_t stream) const override;

  /// Noiseless spot intensities from the cached responses.
  std::vector<double> expected(std::span<const cplx> x);
  /// Full propagation of the whole chain for transmissions x.
  FieldGrid detector_field(std::span<const cplx> x);
  /// |detector_field|^2 behind circular pinholes of half the spot spacing.
  std::vector<double> filtered_image(std::span<const cplx> x);

  const DeskGeometry& geometry() const { return *geo_; }
  Hologram slm0_hologram() const;
  Hologram slm1_hologram() const;
  Hologram slm2_hologram() const;

 private:
  struct Optics;
  void refresh();

  std::size_t n_;
  std::shared_ptr<const DeskGeometry> geo_;
  std::shared_ptr<const Optics> optics_;
  DiffractionRigOptions opt_;
  Rng rng_;
  ComplexMatrix w_;
  std::vector<double> e_;
  bool input_dirty_ = true;
  bool slm1_dirty_ = true;
  FieldGrid at_slm1_;            // field arriving at SLM1
  FieldGrid slm1_;               // phase-only SLM1 modulation
  std::vector<std::vector<cplx>> response_;  // [region n or n = background][m * px + p]
};

struct PhysicalEvaluatorSetup {
  std::unique_ptr<RigEvaluator> evaluator;
  CalibrationSession session;
  double scale = 0.0;
  double matrix_fidelity = 0.0;  // identity-input intensities against |A|^2
};

/// Settings for phase-only modulators: SLM1 column scale is set by SLM0
/// alone (per-column fit), amplitude and phase are coupled (repeated damped
/// passes), and real targets put relative phases at 0 or pi where the
/// arccos rule is ill conditioned (atan2 estimator).
CalibrationOptions physical_calibration();

/// Calibrates a diffraction rig for `t` and wraps it as an evaluator.
PhysicalEvaluatorSetup make_physical_evaluator(std::shared_ptr<const SpectralTransform> t,
                                               const DiffractionRigOptions& options = {},
                                               const CalibrationOptions& calibration = physical_calibration());

}  // namespace peidia
