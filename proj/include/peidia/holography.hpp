#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "peidia/field.hpp"
#include "peidia/ising.hpp"

namespace peidia {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Pixelated modulator aperture.
struct SlmAperture {
  std::size_t nx = 1920;
  std::size_t ny = 1080;
  double pitch = 8e-6;

  double width() const { return static_cast<double>(nx) * pitch; }
  double height() const { return static_cast<double>(ny) * pitch; }
};

/// Unfolded three-modulator chain: SLM0 at z = 0 splits the input beam,
/// SLM1 at l01 applies the splitting matrix and spin phases, SLM2 at
/// l01 + l12 recombines, and the detector sits l2p further on.
struct OpticalGeometry {
  double wavelength = 1.55e-6;
  double l01 = 0.0;
  double l12 = 0.0;
  double l2p = 0.0;
  SlmAperture slm;
  std::vector<Vec2> beam_positions_slm1;  // r_n
  std::vector<Vec2> beam_positions_slm2;  // R_m
  double region_radius = 0.0;
  double slm0_radius = 0.0;  // illuminated region on SLM0, centred on axis
  double lens_f1 = 0.0;      // 0 disables the lens term
  double lens_f2 = 0.0;
  RealMatrix theta;          // theta(m, n); empty means zero

  std::size_t size() const { return beam_positions_slm1.size(); }
  double wavenumber() const;
  /// Positive distances, positions inside the aperture, regions disjoint.
  void validate() const;
};

nlohmann::json geometry_to_json(const OpticalGeometry& g);
OpticalGeometry geometry_from_json(const nlohmann::json& j);

struct BeamGeometry {
  double w0 = 0.0;     // waist radius, half way between the modulators
  double w_slm = 0.0;  // radius on the modulators
};

/// Smallest beam on both modulators separated by 2 z_half:
/// w0 = sqrt(lambda z_half / pi), w_slm = sqrt(2) w0.
BeamGeometry beam_geometry(double wavelength, double z_half);

/// Gaussian 1/e^2 radius at distance z from a waist w0.
double gaussian_radius(double w0, double z, double wavelength);

/// Lens focal length that turns a beam with complex parameter q_in into one
/// whose waist lies `waist_distance` downstream. Uses the real part of 1/q.
double lens_for_waist(double w_in, double distance_from_waist, double wavelength,
                      double waist_distance);

struct SpinLayout {
  std::vector<Vec2> centers;
  std::size_t capacity = 0;
  double spacing = 0.0;
};

/// Number of circles of `radius` that fit in the aperture on the best
/// triangular lattice found (two orientations, swept lattice offsets).
std::size_t layout_capacity(const SlmAperture& aperture, double radius);

/// Places n circles on that lattice, nearest the centre first. Throws
/// CapacityError carrying the capacity when n does not fit.
SpinLayout layout_spins(std::size_t n, const SlmAperture& aperture, double radius);

/// As above with the geometry's aperture and region radius. Also requires
/// region_radius >= 1.5 w_slm for the beams implied by l12.
SpinLayout layout_spins(std::size_t n, const OpticalGeometry& geometry);

enum class SlmRole { kSplit0, kSplit1, kRecombine2 };

struct ModulationOptions {
  /// Superpose a 4-pixel blazed carrier along x over the whole pattern.
  bool blazed_carrier = false;
};

/// Complex (not yet phase-only) modulation of one modulator.
///  kSplit0:     weights n x 1 (alpha_n), one region of slm0_radius on axis.
///  kSplit1:     weights n x n (beta(m, n)); region n carries sigma_n times
///               the sum over m, with lens f1 and theta(m, n).
///  kRecombine2: weights n x n (gamma(m, n)); region m sums over n, lens f2.
/// Pixels outside every region hold the 0/pi checkerboard (even parity 0).
FieldGrid ideal_modulation(SlmRole role, const OpticalGeometry& geometry,
                           const ComplexMatrix& weights,
                           std::span<const std::int8_t> spins = {},
                           const ModulationOptions& options = {});

/// Grid matching the geometry's modulator, centred on the axis.
FieldGrid slm_grid(const OpticalGeometry& geometry);

/// Closest phase-only pattern: phase = arg(h) in [0, 2 pi); |h| == 0 -> 0.
Hologram phase_only_project(const FieldGrid& h);

/// Pixel mask of the circle of `radius` about `center`.
std::vector<std::uint8_t> region_mask(const FieldGrid& grid, Vec2 center, double radius);

struct HologramOptions {
  std::size_t iterations = 500;
  double learning_rate = 0.01;
  std::optional<double> huber_delta;  // default 0.1 max|u_target|
  std::size_t patience = 25;          // consecutive loss increases before giving up
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 0.0;  // added to sqrt(v); zero second moments give a zero step
};

struct HologramFit {
  Hologram hologram;  // N(P) at the best loss seen
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::vector<double> history;  // loss per iteration, before the step
  std::size_t iterations = 0;
  bool diverged = false;
};

/// Huber loss of T(N(P) .* u_incident) against u_target. When `grad` is
/// given it receives dL/dP* (Wirtinger), so dL = 2 Re sum conj(grad) dP.
double hologram_loss(std::span<const cplx> p, const FieldGrid& u_incident,
                     const FieldGrid& u_target, const Propagator& prop, double delta,
                     std::span<cplx> grad = {});

/// Rectified-Adam descent on the complex parameter array P, starting from
/// exp(i p0). Returns the best phase-only pattern; `diverged` is set when
/// the loss rose for `patience` consecutive steps and the run stopped.
HologramFit optimize_hologram(const Hologram& p0, const FieldGrid& u_incident,
                              const FieldGrid& u_target, const Propagator& prop,
                              const HologramOptions& options = {});

HologramFit optimize_hologram(const Hologram& p0, const FieldGrid& u_incident,
                              const FieldGrid& u_target, double z, double wavelength,
                              const HologramOptions& options = {});

/// T(modulation .* u_incident) rescaled to carry the incident power, the
/// usual synthesis target for a phase-only modulator.
FieldGrid target_field(const FieldGrid& modulation, const FieldGrid& u_incident,
                       const Propagator& prop);

/// 8-bit binary PGM, grey level round(256 phase / 2 pi) mod 256.
void write_pgm(const Hologram& h, const std::filesystem::path& path);
/// Raw little-endian complex128 samples (row-major) plus `<path>.json`
/// describing shape, spacing and wavelength.
void write_field(const FieldGrid& f, double wavelength, const std::filesystem::path& path);
FieldGrid read_field(const std::filesystem::path& path);

}  // namespace peidia
