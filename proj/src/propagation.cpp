#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "peidia/error.hpp"
#include "peidia/field.hpp"

namespace peidia {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

void check_grid(std::size_t nx, std::size_t ny, double dx, double dy) {
  if (nx < 2 || ny < 2) throw ConfigError("field grid needs at least 2x2 samples");
  if (!(dx > 0.0 && dy > 0.0 && std::isfinite(dx) && std::isfinite(dy))) {
    throw ConfigError("field grid spacing must be positive and finite");
  }
}

}  // namespace

FieldGrid::FieldGrid(std::size_t nx_, std::size_t ny_, double dx_, double dy_)
    : nx(nx_), ny(ny_), dx(dx_), dy(dy_) {
  check_grid(nx, ny, dx, dy);
  samples.assign(nx * ny, cplx{});
}

double FieldGrid::power() const {
  double s = 0.0;
  for (const auto& v : samples) s += std::norm(v);
  return s * dx * dy;
}

bool FieldGrid::same_grid(const FieldGrid& o) const {
  return nx == o.nx && ny == o.ny && dx == o.dx && dy == o.dy;
}

std::vector<double> FieldGrid::intensity() const {
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [](const cplx& v) { return std::norm(v); });
  return out;
}

FieldGrid Hologram::modulation() const {
  FieldGrid g(nx, ny, dx, dy);
  if (phase.size() != nx * ny) throw DimensionError("hologram phase array has the wrong size");
  for (std::size_t i = 0; i < phase.size(); ++i) g.samples[i] = std::polar(1.0, phase[i]);
  return g;
}

FieldGrid gaussian_beam(std::size_t nx, std::size_t ny, double dx, double dy, double waist,
                        double cx, double cy) {
  if (!(waist > 0.0)) throw ConfigError("beam waist must be positive");
  FieldGrid g(nx, ny, dx, dy);
  const double w2 = waist * waist;
  for (std::size_t iy = 0; iy < ny; ++iy) {
    const double y = g.y(iy) - cy;
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const double x = g.x(ix) - cx;
      g.at(ix, iy) = std::exp(-(x * x + y * y) / w2);
    }
  }
  return g;
}

double second_moment_radius(const FieldGrid& u) {
  double total = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t iy = 0; iy < u.ny; ++iy) {
    for (std::size_t ix = 0; ix < u.nx; ++ix) {
      const double p = std::norm(u.at(ix, iy));
      total += p;
      mx += p * u.x(ix);
      my += p * u.y(iy);
    }
  }
  if (!(total > 0.0)) throw NumericalError("second moment of an empty field");
  mx /= total;
  my /= total;
  double vx = 0.0, vy = 0.0;
  for (std::size_t iy = 0; iy < u.ny; ++iy) {
    for (std::size_t ix = 0; ix < u.nx; ++ix) {
      const double p = std::norm(u.at(ix, iy));
      vx += p * (u.x(ix) - mx) * (u.x(ix) - mx);
      vy += p * (u.y(iy) - my) * (u.y(iy) - my);
    }
  }
  // Gaussian intensity exp(-2x^2/w^2) has <x^2> = w^2/4.
  return std::sqrt(vx / total) + std::sqrt(vy / total);
}

struct Propagator::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

Propagator::Propagator(std::size_t nx, std::size_t ny, double dx, double dy, double z,
                       double wavelength, PixelModel pixel)
    : nx_(nx), ny_(ny), px_(3 * nx), py_(3 * ny), dx_(dx), dy_(dy), z_(z),
      wavelength_(wavelength) {
  check_grid(nx, ny, dx, dy);
  if (!(z > 0.0 && std::isfinite(z))) throw ConfigError("propagation distance must be positive");
  if (!(wavelength > 0.0 && std::isfinite(wavelength))) {
    throw ConfigError("wavelength must be positive");
  }
  // The kernel phase k r has slope k x / r along x; it must stay below the
  // grid Nyquist limit pi / dx out to the largest offset the convolution uses.
  const auto limit = [&](double d, double pitch, const char* axis) {
    const double slope = d / std::hypot(d, z);
    const double nyquist = wavelength / (2.0 * pitch);
    if (slope > nyquist) {
      throw NumericalError(std::string("propagation kernel is undersampled along ") + axis +
                           ": sin(theta) = " + std::to_string(slope) + " exceeds lambda/2d = " +
                           std::to_string(nyquist) + " (increase z or refine the grid)");
    }
  };
  limit(static_cast<double>(nx - 1) * dx, dx, "x");
  limit(static_cast<double>(ny - 1) * dy, dy, "y");

  const std::size_t total = px_ * py_;
  transfer_.assign(total, cplx{});
  const double k = 2.0 * std::numbers::pi / wavelength;
  const auto wrap = [](std::ptrdiff_t d, std::size_t p) {
    return static_cast<std::size_t>(d < 0 ? d + static_cast<std::ptrdiff_t>(p) : d);
  };
  const auto sx = static_cast<std::ptrdiff_t>(nx);
  const auto sy = static_cast<std::ptrdiff_t>(ny);
  for (std::ptrdiff_t j = -(sy - 1); j <= sy - 1; ++j) {
    const double y = static_cast<double>(j) * dy;
    for (std::ptrdiff_t i = -(sx - 1); i <= sx - 1; ++i) {
      const double x = static_cast<double>(i) * dx;
      const double r2 = x * x + y * y + z * z;
      const double r = std::sqrt(r2);
      const cplx h = z / (2.0 * std::numbers::pi * r2) * cplx(1.0 / r, k) *
                     std::polar(1.0, -k * r);
      transfer_[wrap(j, py_) * px_ + wrap(i, px_)] = h;
    }
  }

  plans_ = std::make_unique<Plans>();
  std::vector<cplx> scratch(total);
  {
    std::lock_guard lock(planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plans_->forward = fftw_plan_dft_2d(static_cast<int>(py_), static_cast<int>(px_),
                                       as_fftw(scratch.data()), as_fftw(scratch.data()),
                                       FFTW_FORWARD, flags);
    plans_->backward = fftw_plan_dft_2d(static_cast<int>(py_), static_cast<int>(px_),
                                        as_fftw(scratch.data()), as_fftw(scratch.data()),
                                        FFTW_BACKWARD, flags);
  }
  if (!plans_->forward || !plans_->backward) throw NumericalError("FFTW planning failed");

  fftw_execute_dft(plans_->forward, as_fftw(transfer_.data()), as_fftw(transfer_.data()));
  // Fold the unnormalised inverse DFT and the dx dy quadrature weight into H.
  const double weight = dx * dy / static_cast<double>(total);
  for (std::size_t v = 0; v < py_; ++v) {
    // DFT frequency of bin v on a grid of p samples, signed.
    const double fy = (v <= py_ / 2 ? double(v) : double(v) - double(py_)) / (double(py_) * dy);
    const double my = pixel == PixelModel::kRect ? sinc(fy * dy) : 1.0;
    for (std::size_t u = 0; u < px_; ++u) {
      const double fx =
          (u <= px_ / 2 ? double(u) : double(u) - double(px_)) / (double(px_) * dx);
      const double mx = pixel == PixelModel::kRect ? sinc(fx * dx) : 1.0;
      transfer_[v * px_ + u] *= weight * mx * my;
    }
  }
}

Propagator::~Propagator() = default;

void Propagator::apply(std::span<const cplx> in, std::span<cplx> out, bool conjugate) const {
  const std::size_t n = nx_ * ny_;
  if (in.size() != n || out.size() != n) {
    throw DimensionError("propagator expects " + std::to_string(nx_) + "x" +
                         std::to_string(ny_) + " samples");
  }
  std::vector<cplx> buf(px_ * py_, cplx{});
  for (std::size_t iy = 0; iy < ny_; ++iy) {
    std::copy_n(in.data() + iy * nx_, nx_, buf.data() + iy * px_);
  }
  fftw_execute_dft(plans_->forward, as_fftw(buf.data()), as_fftw(buf.data()));
  if (conjugate) {
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= std::conj(transfer_[i]);
  } else {
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= transfer_[i];
  }
  fftw_execute_dft(plans_->backward, as_fftw(buf.data()), as_fftw(buf.data()));
  for (std::size_t iy = 0; iy < ny_; ++iy) {
    std::copy_n(buf.data() + iy * px_, nx_, out.data() + iy * nx_);
  }
}

void Propagator::forward(std::span<const cplx> in, std::span<cplx> out) const {
  apply(in, out, false);
}

void Propagator::adjoint(std::span<const cplx> in, std::span<cplx> out) const {
  apply(in, out, true);
}

FieldGrid Propagator::forward(const FieldGrid& u) const {
  if (u.nx != nx_ || u.ny != ny_) throw DimensionError("field does not match propagator grid");
  FieldGrid out(nx_, ny_, dx_, dy_);
  apply(u.samples, out.samples, false);
  return out;
}

FieldGrid Propagator::adjoint(const FieldGrid& v) const {
  if (v.nx != nx_ || v.ny != ny_) throw DimensionError("field does not match propagator grid");
  FieldGrid out(nx_, ny_, dx_, dy_);
  apply(v.samples, out.samples, true);
  return out;
}

FieldGrid propagate(const FieldGrid& u, double z, double wavelength, PixelModel pixel) {
  return Propagator(u.nx, u.ny, u.dx, u.dy, z, wavelength, pixel).forward(u);
}

}  // namespace peidia
