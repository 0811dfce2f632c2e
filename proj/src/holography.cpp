#include "peidia/holography.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "peidia/error.hpp"
#include "peidia/kernels.hpp"

namespace peidia {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_positive(double v, const char* what) {
  if (!(v > 0.0 && std::isfinite(v))) {
    throw ConfigError(std::string(what) + " must be positive and finite");
  }
}

bool inside_aperture(const SlmAperture& a, Vec2 c, double r) {
  return std::abs(c.x) + r <= 0.5 * a.width() + 1e-12 &&
         std::abs(c.y) + r <= 0.5 * a.height() + 1e-12;
}

void check_disjoint(const std::vector<Vec2>& c, double r, const char* plane) {
  for (std::size_t a = 0; a < c.size(); ++a) {
    for (std::size_t b = a + 1; b < c.size(); ++b) {
      if (std::hypot(c[a].x - c[b].x, c[a].y - c[b].y) < 2.0 * r * (1.0 - 1e-12)) {
        throw ConfigError(std::string("regions ") + std::to_string(a) + " and " +
                          std::to_string(b) + " overlap on " + plane);
      }
    }
  }
}

nlohmann::json points_to_json(const std::vector<Vec2>& pts) {
  auto a = nlohmann::json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

std::vector<Vec2> points_from_json(const nlohmann::json& j) {
  std::vector<Vec2> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw ConfigError("beam positions must be [x, y] pairs");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

// Lattice points inside the aperture for one orientation and offset.
std::vector<Vec2> lattice_points(const SlmAperture& a, double radius, bool rotated,
                                 double ox, double oy) {
  const double s = 2.0 * radius;
  const double row = s * std::sqrt(3.0) / 2.0;
  // Rotation by 90 degrees is handled by swapping the aperture axes.
  const double hw = 0.5 * (rotated ? a.height() : a.width()) - radius;
  const double hh = 0.5 * (rotated ? a.width() : a.height()) - radius;
  std::vector<Vec2> pts;
  if (hw < 0.0 || hh < 0.0) return pts;
  const auto jmax = static_cast<long>(std::ceil((hh + std::abs(oy)) / row)) + 1;
  const auto imax = static_cast<long>(std::ceil((hw + std::abs(ox)) / s)) + 2;
  for (long j = -jmax; j <= jmax; ++j) {
    const double y = oy + static_cast<double>(j) * row;
    if (std::abs(y) > hh + 1e-12) continue;
    const double shift = (j & 1) ? 0.5 * s : 0.0;
    for (long i = -imax; i <= imax; ++i) {
      const double x = ox + shift + static_cast<double>(i) * s;
      if (std::abs(x) > hw + 1e-12) continue;
      pts.push_back(rotated ? Vec2{y, x} : Vec2{x, y});
    }
  }
  return pts;
}

std::vector<Vec2> best_lattice(const SlmAperture& a, double radius) {
  require_positive(radius, "region radius");
  const double s = 2.0 * radius;
  const double row = s * std::sqrt(3.0) / 2.0;
  constexpr int kSteps = 24;
  std::vector<Vec2> best;
  for (bool rotated : {false, true}) {
    for (int u = 0; u < kSteps; ++u) {
      for (int v = 0; v < kSteps; ++v) {
        const double ox = s * u / kSteps;
        const double oy = 2.0 * row * v / kSteps;
        auto pts = lattice_points(a, radius, rotated, ox, oy);
        if (pts.size() > best.size()) best = std::move(pts);
      }
    }
  }
  return best;
}

double checker(std::size_t ix, std::size_t iy) { return ((ix + iy) & 1U) ? -1.0 : 1.0; }

}  // namespace

double OpticalGeometry::wavenumber() const { return kTwoPi / wavelength; }

void OpticalGeometry::validate() const {
  require_positive(wavelength, "wavelength");
  require_positive(l01, "l01");
  require_positive(l12, "l12");
  require_positive(l2p, "l2p");
  require_positive(slm.pitch, "pixel pitch");
  require_positive(region_radius, "region radius");
  require_positive(slm0_radius, "SLM0 radius");
  if (slm.nx < 2 || slm.ny < 2) throw ConfigError("modulator needs at least 2x2 pixels");
  if (lens_f1 < 0.0 || lens_f2 < 0.0) throw ConfigError("focal lengths must be >= 0");
  const std::size_t n = size();
  if (n == 0) throw ConfigError("geometry has no beams");
  if (beam_positions_slm2.size() != n) {
    throw DimensionError("SLM1 has " + std::to_string(n) + " beam positions, SLM2 has " +
                         std::to_string(beam_positions_slm2.size()));
  }
  if (theta.size() != 0 &&
      (theta.rows() != static_cast<Eigen::Index>(n) || theta.cols() != static_cast<Eigen::Index>(n))) {
    throw DimensionError("theta must be n x n");
  }
  for (const auto* plane : {&beam_positions_slm1, &beam_positions_slm2}) {
    for (const auto& c : *plane) {
      if (!inside_aperture(slm, c, region_radius)) {
        throw ConfigError("region at (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                          ") leaves the modulator aperture");
      }
    }
  }
  if (!inside_aperture(slm, {0.0, 0.0}, slm0_radius)) {
    throw ConfigError("SLM0 region leaves the aperture");
  }
  check_disjoint(beam_positions_slm1, region_radius, "SLM1");
  check_disjoint(beam_positions_slm2, region_radius, "SLM2");
}

nlohmann::json geometry_to_json(const OpticalGeometry& g) {
  nlohmann::json j{
      {"wavelength", g.wavelength},
      {"l01", g.l01},
      {"l12", g.l12},
      {"l2p", g.l2p},
      {"slm_pixels", {g.slm.nx, g.slm.ny}},
      {"pixel_pitch", g.slm.pitch},
      {"beam_positions_slm1", points_to_json(g.beam_positions_slm1)},
      {"beam_positions_slm2", points_to_json(g.beam_positions_slm2)},
      {"region_radius", g.region_radius},
      {"slm0_radius", g.slm0_radius},
      {"lens_f1", g.lens_f1},
      {"lens_f2", g.lens_f2},
  };
  auto theta = nlohmann::json::array();
  for (Eigen::Index r = 0; r < g.theta.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < g.theta.cols(); ++c) row.push_back(g.theta(r, c));
    theta.push_back(row);
  }
  j["phase_compensation"] = theta;
  return j;
}

OpticalGeometry geometry_from_json(const nlohmann::json& j) {
  try {
    OpticalGeometry g;
    g.wavelength = j.at("wavelength").get<double>();
    g.l01 = j.at("l01").get<double>();
    g.l12 = j.at("l12").get<double>();
    g.l2p = j.at("l2p").get<double>();
    if (j.contains("slm_pixels")) {
      g.slm.nx = j["slm_pixels"].at(0).get<std::size_t>();
      g.slm.ny = j["slm_pixels"].at(1).get<std::size_t>();
    }
    g.slm.pitch = j.value("pixel_pitch", g.slm.pitch);
    g.beam_positions_slm1 = points_from_json(j.at("beam_positions_slm1"));
    g.beam_positions_slm2 = points_from_json(j.at("beam_positions_slm2"));
    g.region_radius = j.at("region_radius").get<double>();
    g.slm0_radius = j.value("slm0_radius", g.region_radius);
    g.lens_f1 = j.value("lens_f1", 0.0);
    g.lens_f2 = j.value("lens_f2", 0.0);
    if (j.contains("phase_compensation") && !j["phase_compensation"].empty()) {
      const auto& t = j["phase_compensation"];
      const auto n = static_cast<Eigen::Index>(t.size());
      g.theta = RealMatrix::Zero(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        if (t[r].size() != static_cast<std::size_t>(n)) throw DimensionError("theta must be square");
        for (Eigen::Index c = 0; c < n; ++c) g.theta(r, c) = t[r][c].get<double>();
      }
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
}

BeamGeometry beam_geometry(double wavelength, double z_half) {
  require_positive(wavelength, "wavelength");
  require_positive(z_half, "half modulator spacing");
  BeamGeometry b;
  b.w0 = std::sqrt(wavelength * z_half / std::numbers::pi);
  b.w_slm = std::sqrt(2.0) * b.w0;
  return b;
}

double gaussian_radius(double w0, double z, double wavelength) {
  const double zr = std::numbers::pi * w0 * w0 / wavelength;
  return w0 * std::sqrt(1.0 + (z / zr) * (z / zr));
}

double lens_for_waist(double w_in, double distance_from_waist, double wavelength,
                      double waist_distance) {
  require_positive(w_in, "beam waist");
  require_positive(waist_distance, "waist distance");
  const double zr = std::numbers::pi * w_in * w_in / wavelength;
  // 1/q = a - i b for q = d + i zR
  const double den = distance_from_waist * distance_from_waist + zr * zr;
  const double a = distance_from_waist / den;
  const double b = zr / den;
  const double disc = 1.0 - 4.0 * waist_distance * waist_distance * b * b;
  if (disc < 0.0) {
    throw ConfigError("no lens places the waist " + std::to_string(waist_distance) +
                      " m downstream: the beam cannot be focused that far");
  }
  const double c = (-1.0 + std::sqrt(disc)) / (2.0 * waist_distance);
  return 1.0 / (a - c);
}

std::size_t layout_capacity(const SlmAperture& aperture, double radius) {
  return best_lattice(aperture, radius).size();
}

SpinLayout layout_spins(std::size_t n, const SlmAperture& aperture, double radius) {
  auto pts = best_lattice(aperture, radius);
  SpinLayout out;
  out.capacity = pts.size();
  out.spacing = 2.0 * radius;
  if (n > out.capacity) {
    throw CapacityError(std::to_string(n) + " spins do not fit: the aperture holds at most " +
                            std::to_string(out.capacity) + " regions of radius " +
                            std::to_string(radius) + " m",
                        out.capacity);
  }
  std::stable_sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    const double da = a.x * a.x + a.y * a.y, db = b.x * b.x + b.y * b.y;
    if (std::abs(da - db) > 1e-18) return da < db;
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  pts.resize(n);
  out.centers = std::move(pts);
  return out;
}

SpinLayout layout_spins(std::size_t n, const OpticalGeometry& geometry) {
  const auto beam = beam_geometry(geometry.wavelength, 0.5 * geometry.l12);
  if (geometry.region_radius < 1.5 * beam.w_slm * (1.0 - 1e-9)) {
    throw ConfigError("region radius " + std::to_string(geometry.region_radius) +
                      " m is below 1.5 w_slm = " + std::to_string(1.5 * beam.w_slm) + " m");
  }
  return layout_spins(n, geometry.slm, geometry.region_radius);
}

FieldGrid slm_grid(const OpticalGeometry& g) {
  return FieldGrid(g.slm.nx, g.slm.ny, g.slm.pitch, g.slm.pitch);
}

std::vector<std::uint8_t> region_mask(const FieldGrid& grid, Vec2 c, double radius) {
  std::vector<std::uint8_t> m(grid.size(), 0);
  const double r2 = radius * radius;
  for (std::size_t iy = 0; iy < grid.ny; ++iy) {
    const double dy = grid.y(iy) - c.y;
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const double dx = grid.x(ix) - c.x;
      if (dx * dx + dy * dy <= r2) m[iy * grid.nx + ix] = 1;
    }
  }
  return m;
}

FieldGrid ideal_modulation(SlmRole role, const OpticalGeometry& g, const ComplexMatrix& w,
                           std::span<const std::int8_t> spins, const ModulationOptions& options) {
  g.validate();
  const std::size_t n = g.size();
  const auto ni = static_cast<Eigen::Index>(n);
  const double k = g.wavenumber();
  FieldGrid out = slm_grid(g);
  std::vector<std::uint8_t> covered(out.size(), 0);

  if (role == SlmRole::kSplit0) {
    if (w.rows() != ni || w.cols() != 1) throw DimensionError("split0 weights must be n x 1");
  } else if (w.rows() != ni || w.cols() != ni) {
    throw DimensionError("split1/recombine2 weights must be n x n");
  }
  if (!spins.empty()) {
    if (role != SlmRole::kSplit1) throw ConfigError("spin phases apply to SLM1 only");
    if (spins.size() != n) throw DimensionError("spin vector does not match the geometry");
  }
  const auto theta = [&](std::size_t m, std::size_t j) {
    return g.theta.size() == 0 ? 0.0 : g.theta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
  };

  // Fills one circular region with value(x, y).
  const auto paint = [&](Vec2 c, double radius, auto&& value) {
    const double r2 = radius * radius;
    for (std::size_t iy = 0; iy < out.ny; ++iy) {
      const double y = out.y(iy);
      for (std::size_t ix = 0; ix < out.nx; ++ix) {
        const double x = out.x(ix);
        const double dx = x - c.x, dy = y - c.y;
        if (dx * dx + dy * dy > r2) continue;
        const std::size_t idx = iy * out.nx + ix;
        out.samples[idx] = value(x, y, dx * dx + dy * dy);
        covered[idx] = 1;
      }
    }
  };

  switch (role) {
    case SlmRole::kSplit0:
      // sum_n alpha_n exp(-ik r_n . r / L01)
      paint({0.0, 0.0}, g.slm0_radius, [&](double x, double y, double) {
        cplx s{};
        for (std::size_t j = 0; j < n; ++j) {
          const Vec2 r = g.beam_positions_slm1[j];
          s += w(static_cast<Eigen::Index>(j), 0) * std::polar(1.0, -k * (r.x * x + r.y * y) / g.l01);
        }
        return s;
      });
      break;
    case SlmRole::kSplit1:
      // region n: sigma_n sum_m beta_mn exp[-ik((R_m - r_n)/L12 - r_n/L01) . (r - r_n) + i theta_mn]
      for (std::size_t j = 0; j < n; ++j) {
        const Vec2 rn = g.beam_positions_slm1[j];
        const double sigma = spins.empty() ? 1.0 : static_cast<double>(spins[j]);
        paint(rn, g.region_radius, [&](double x, double y, double rho2) {
          cplx s{};
          for (std::size_t m = 0; m < n; ++m) {
            const Vec2 rm = g.beam_positions_slm2[m];
            const double kx = (rm.x - rn.x) / g.l12 - rn.x / g.l01;
            const double ky = (rm.y - rn.y) / g.l12 - rn.y / g.l01;
            s += w(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
                 std::polar(1.0, -k * (kx * (x - rn.x) + ky * (y - rn.y)) + theta(m, j));
          }
          if (g.lens_f1 > 0.0) s *= std::polar(1.0, k * rho2 / (2.0 * g.lens_f1));
          return sigma * s;
        });
      }
      break;
    case SlmRole::kRecombine2:
      // region m: sum_n gamma_mn exp[+ik (R_m - r_n)/L12 . (r - R_m)]; the
      // recombined beam leaves along the axis towards detector spot m.
      for (std::size_t m = 0; m < n; ++m) {
        const Vec2 rm = g.beam_positions_slm2[m];
        paint(rm, g.region_radius, [&](double x, double y, double rho2) {
          cplx s{};
          for (std::size_t j = 0; j < n; ++j) {
            const Vec2 rn = g.beam_positions_slm1[j];
            const double kx = (rm.x - rn.x) / g.l12, ky = (rm.y - rn.y) / g.l12;
            s += w(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
                 std::polar(1.0, k * (kx * (x - rm.x) + ky * (y - rm.y)));
          }
          if (g.lens_f2 > 0.0) s *= std::polar(1.0, k * rho2 / (2.0 * g.lens_f2));
          return s;
        });
      }
      break;
  }

  for (std::size_t iy = 0; iy < out.ny; ++iy) {
    for (std::size_t ix = 0; ix < out.nx; ++ix) {
      const std::size_t idx = iy * out.nx + ix;
      if (!covered[idx]) out.samples[idx] = checker(ix, iy);
      if (options.blazed_carrier) {
        out.samples[idx] *= std::polar(1.0, kTwoPi * static_cast<double>(ix % 4) / 4.0);
      }
    }
  }
  return out;
}

Hologram phase_only_project(const FieldGrid& h) {
  Hologram out{h.nx, h.ny, h.dx, h.dy, std::vector<double>(h.size())};
  for (std::size_t i = 0; i < h.size(); ++i) {
    const cplx v = h.samples[i];
    if (v == cplx{}) continue;
    double p = std::arg(v);
    if (p < 0.0) p += kTwoPi;
    if (p >= kTwoPi) p = 0.0;
    out.phase[i] = p;
  }
  return out;
}

double hologram_loss(std::span<const cplx> p, const FieldGrid& u_incident,
                     const FieldGrid& u_target, const Propagator& prop, double delta,
                     std::span<cplx> grad) {
  const std::size_t n = u_incident.size();
  if (p.size() != n || u_target.size() != n || prop.nx() * prop.ny() != n) {
    throw DimensionError("hologram, incident field, target and propagator grids differ");
  }
  const auto& kt = kernels::active();
  std::vector<cplx> unit(n), field(n), out(n), dfield(n);
  kt.phase_normalize(p, unit);
  kt.complex_multiply(unit, u_incident.samples, field);
  prop.forward(field, out);
  const double loss = kt.huber(out, u_target.samples, delta, dfield);
  if (grad.empty()) return loss;
  if (grad.size() != n) throw DimensionError("gradient buffer has the wrong size");

  // W = T'(dL/dg*) .* conj(U_I); dL/dP* = i N Im(W conj N) / |P|.
  std::vector<cplx> back(n);
  prop.adjoint(dfield, back);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx wv = back[i] * std::conj(u_incident.samples[i]);
    const double mag = std::abs(p[i]);
    if (mag == 0.0) {
      grad[i] = {};
      continue;
    }
    const double tangential = (wv * std::conj(unit[i])).imag();
    grad[i] = cplx(0.0, tangential / mag) * unit[i];
  }
  return loss;
}

HologramFit optimize_hologram(const Hologram& p0, const FieldGrid& u_incident,
                              const FieldGrid& u_target, const Propagator& prop,
                              const HologramOptions& opt) {
  if (!u_incident.same_grid(u_target)) throw DimensionError("incident and target grids differ");
  if (p0.nx != u_incident.nx || p0.ny != u_incident.ny) {
    throw DimensionError("hologram does not match the field grid");
  }
  require_positive(opt.learning_rate, "learning rate");
  if (!(opt.beta1 >= 0.0 && opt.beta1 < 1.0 && opt.beta2 > 0.0 && opt.beta2 < 1.0)) {
    throw ConfigError("Adam moments must lie in [0, 1)");
  }
  double delta = 0.0;
  if (opt.huber_delta) {
    delta = *opt.huber_delta;
  } else {
    for (const auto& v : u_target.samples) delta = std::max(delta, std::abs(v));
    delta *= 0.1;
  }
  require_positive(delta, "Huber threshold");

  const std::size_t n = u_incident.size();
  std::vector<cplx> p = p0.modulation().samples;
  std::vector<cplx> grad(n);
  // Moments of the real and imaginary parts, kept in one complex array each.
  std::vector<cplx> m1(n), m2(n);

  HologramFit fit;
  std::vector<cplx> best = p;
  double loss = hologram_loss(p, u_incident, u_target, prop, delta, grad);
  fit.initial_loss = fit.best_loss = loss;
  double previous = loss;
  std::size_t rising = 0;

  const double rho_inf = 2.0 / (1.0 - opt.beta2) - 1.0;
  double b1t = 1.0, b2t = 1.0;
  for (std::size_t t = 1; t <= opt.iterations; ++t) {
    fit.history.push_back(loss);
    b1t *= opt.beta1;
    b2t *= opt.beta2;
    const double rho = rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
    double rect = 0.0;
    if (rho > 4.0) {
      rect = std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf /
                       ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
    }
    for (std::size_t i = 0; i < n; ++i) {
      // real-valued gradient of L w.r.t. (Re P, Im P) is 2 dL/dP*
      const cplx gi = 2.0 * grad[i];
      m1[i] = opt.beta1 * m1[i] + (1.0 - opt.beta1) * gi;
      m2[i] = opt.beta2 * m2[i] +
              (1.0 - opt.beta2) * cplx(gi.real() * gi.real(), gi.imag() * gi.imag());
      const cplx mhat = m1[i] / (1.0 - b1t);
      cplx step = mhat;
      if (rho > 4.0) {
        const double vr = std::sqrt(m2[i].real() / (1.0 - b2t)) + opt.epsilon;
        const double vi = std::sqrt(m2[i].imag() / (1.0 - b2t)) + opt.epsilon;
        step = cplx(vr > 0.0 ? rect * mhat.real() / vr : 0.0,
                    vi > 0.0 ? rect * mhat.imag() / vi : 0.0);
      }
      p[i] -= opt.learning_rate * step;
    }
    loss = hologram_loss(p, u_incident, u_target, prop, delta, grad);
    fit.iterations = t;
    if (!std::isfinite(loss)) {
      fit.diverged = true;
      break;
    }
    if (loss < fit.best_loss) {
      fit.best_loss = loss;
      best = p;
    }
    rising = loss > previous ? rising + 1 : 0;
    previous = loss;
    if (opt.patience > 0 && rising >= opt.patience) {
      fit.diverged = true;
      break;
    }
  }
  FieldGrid unit(u_incident.nx, u_incident.ny, u_incident.dx, u_incident.dy);
  kernels::active().phase_normalize(best, unit.samples);
  fit.hologram = phase_only_project(unit);
  return fit;
}

HologramFit optimize_hologram(const Hologram& p0, const FieldGrid& u_incident,
                              const FieldGrid& u_target, double z, double wavelength,
                              const HologramOptions& options) {
  const Propagator prop(u_incident.nx, u_incident.ny, u_incident.dx, u_incident.dy, z,
                        wavelength, PixelModel::kRect);
  return optimize_hologram(p0, u_incident, u_target, prop, options);
}

FieldGrid target_field(const FieldGrid& modulation, const FieldGrid& u_incident,
                       const Propagator& prop) {
  if (!modulation.same_grid(u_incident)) throw DimensionError("modulation and field grids differ");
  FieldGrid lit = u_incident;
  kernels::active().complex_multiply(modulation.samples, u_incident.samples, lit.samples);
  FieldGrid out = prop.forward(lit);
  const double p = out.power();
  if (!(p > 0.0)) throw NumericalError("target field carries no power");
  const double s = std::sqrt(u_incident.power() / p);
  for (auto& v : out.samples) v *= s;
  return out;
}

void write_pgm(const Hologram& h, const std::filesystem::path& path) {
  if (h.phase.size() != h.nx * h.ny) throw DimensionError("hologram phase array has the wrong size");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
  f << "P5\n" << h.nx << ' ' << h.ny << "\n255\n";
  std::vector<unsigned char> row(h.nx);
  for (std::size_t iy = 0; iy < h.ny; ++iy) {
    for (std::size_t ix = 0; ix < h.nx; ++ix) {
      const long level = std::lround(h.phase[iy * h.nx + ix] / kTwoPi * 256.0);
      row[ix] = static_cast<unsigned char>(((level % 256) + 256) % 256);
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw ConfigError("failed writing " + path.string());
}

void write_field(const FieldGrid& fgrid, double wavelength, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "field dumps assume little endian");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(fgrid.samples.data()),
          static_cast<std::streamsize>(fgrid.samples.size() * sizeof(cplx)));
  if (!f) throw ConfigError("failed writing " + path.string());
  const nlohmann::json meta{{"shape", {fgrid.ny, fgrid.nx}},
                            {"order", "row-major"},
                            {"dtype", "complex128-le"},
                            {"dx", fgrid.dx},
                            {"dy", fgrid.dy},
                            {"wavelength", wavelength}};
  std::ofstream side(path.string() + ".json");
  side << meta.dump(2) << '\n';
  if (!side) throw ConfigError("failed writing sidecar for " + path.string());
}

FieldGrid read_field(const std::filesystem::path& path) {
  std::ifstream side(path.string() + ".json");
  if (!side) throw ConfigError("missing sidecar " + path.string() + ".json");
  nlohmann::json meta;
  try {
    side >> meta;
    FieldGrid g(meta.at("shape").at(1).get<std::size_t>(), meta.at("shape").at(0).get<std::size_t>(),
                meta.at("dx").get<double>(), meta.at("dy").get<double>());
    std::ifstream f(path, std::ios::binary);
    f.read(reinterpret_cast<char*>(g.samples.data()),
           static_cast<std::streamsize>(g.samples.size() * sizeof(cplx)));
    if (!f || f.gcount() != static_cast<std::streamsize>(g.samples.size() * sizeof(cplx))) {
      throw ConfigError("field dump " + path.string() + " is truncated");
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("field sidecar: " + std::string(e.what()));
  }
}

}  // namespace peidia
