#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace peidia {

using cplx = std::complex<double>;

/// Complex field sampled on an nx x ny grid centred on the optical axis.
/// Storage is row-major: sample (ix, iy) lives at iy * nx + ix, and sits at
/// x = (ix - nx/2) dx, y = (iy - ny/2) dy.
struct FieldGrid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  std::vector<cplx> samples;

  FieldGrid() = default;
  FieldGrid(std::size_t nx, std::size_t ny, double dx, double dy);

  std::size_t size() const noexcept { return samples.size(); }
  cplx& at(std::size_t ix, std::size_t iy) { return samples[iy * nx + ix]; }
  const cplx& at(std::size_t ix, std::size_t iy) const { return samples[iy * nx + ix]; }
  double x(std::size_t ix) const {
    return (static_cast<double>(ix) - static_cast<double>(nx / 2)) * dx;
  }
  double y(std::size_t iy) const {
    return (static_cast<double>(iy) - static_cast<double>(ny / 2)) * dy;
  }
  /// sum |u|^2 dx dy
  double power() const;
  bool same_grid(const FieldGrid& other) const;
  std::vector<double> intensity() const;
};

/// Phase-only SLM pattern, phases in [0, 2 pi).
struct Hologram {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  std::vector<double> phase;

  /// exp(i phase) on the hologram grid.
  FieldGrid modulation() const;
};

/// Circular Gaussian exp(-r^2 / w^2) centred at (cx, cy), unit peak amplitude.
FieldGrid gaussian_beam(std::size_t nx, std::size_t ny, double dx, double dy, double waist,
                        double cx = 0.0, double cy = 0.0);

/// 1/e^2 intensity radius from the second moment of |u|^2 about its centroid
/// (w = 2 sqrt(<x^2>) along x, averaged with y).
double second_moment_radius(const FieldGrid& u);

enum class PixelModel {
  kPoint,  // samples are ideal points; M = 1
  kRect,   // each pixel radiates a uniform rectangle; M = sinc(fx dx) sinc(fy dy)
};

/// Discrete Rayleigh-Sommerfeld propagation over distance z on a fixed grid:
/// zero-pad to 3nx x 3ny, multiply the spectrum by the transform of the
/// sampled impulse response (z / 2 pi r^2)(ik + 1/r) e^{-ikr}, transform
/// back, clip and scale by dx dy. Immutable after construction and safe to
/// share across threads.
class Propagator {
 public:
  Propagator(std::size_t nx, std::size_t ny, double dx, double dy, double z,
             double wavelength, PixelModel pixel = PixelModel::kPoint);
  ~Propagator();
  Propagator(const Propagator&) = delete;
  Propagator& operator=(const Propagator&) = delete;

  /// T_z(u)
  FieldGrid forward(const FieldGrid& u) const;
  /// T'_z(v), the exact adjoint of forward under <a, b> = sum conj(a) b.
  FieldGrid adjoint(const FieldGrid& v) const;

  void forward(std::span<const cplx> in, std::span<cplx> out) const;
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const;

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  double dx() const noexcept { return dx_; }
  double dy() const noexcept { return dy_; }
  double distance() const noexcept { return z_; }
  double wavelength() const noexcept { return wavelength_; }

 private:
  void apply(std::span<const cplx> in, std::span<cplx> out, bool conjugate) const;

  std::size_t nx_, ny_, px_, py_;
  double dx_, dy_, z_, wavelength_;
  std::vector<cplx> transfer_;  // H .* M on the padded grid, pre-divided by the DFT size
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

/// One-shot convenience wrapper around Propagator.
FieldGrid propagate(const FieldGrid& u, double z, double wavelength,
                    PixelModel pixel = PixelModel::kPoint);

}  // namespace peidia
