#include "peidia/physical_rig.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "peidia/error.hpp"

namespace peidia {

DeskGeometry desk_geometry(std::size_t n, std::size_t pixels, double pitch, double wavelength,
                           double l01, double l2p_ratio) {
  if (n < 1) throw ConfigError("desk geometry needs at least one beam");
  if (pixels < 16) throw ConfigError("desk geometry needs at least 16 x 16 pixels");
  if (!(pitch > 0.0 && wavelength > 0.0 && l01 > 0.0 && l2p_ratio > 0.0)) {
    throw ConfigError("pitch, wavelength, l01 and l2p_ratio must be positive");
  }
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t rows = (n + side - 1) / side;
  // even spacing keeps half-lattice offsets on whole pixels
  auto spacing = static_cast<std::size_t>(static_cast<double>(pixels) / (static_cast<double>(side) + 0.5));
  spacing -= spacing % 2;
  if (spacing < 8) throw CapacityError("desk grid too small for " + std::to_string(n) + " beams", 0);

  DeskGeometry d;
  OpticalGeometry& g = d.optics;
  g.wavelength = wavelength;
  g.slm = {pixels, pixels, pitch};
  const double step = static_cast<double>(spacing) * pitch;
  for (std::size_t k = 0; k < n; ++k) {
    const double col = static_cast<double>(k % side) - 0.5 * static_cast<double>(side - 1);
    const double row = static_cast<double>(k / side) - 0.5 * static_cast<double>(rows - 1);
    g.beam_positions_slm1.push_back({col * step, row * step});
  }
  g.beam_positions_slm2 = g.beam_positions_slm1;
  g.region_radius = 0.499 * step;

  d.w_slm = g.region_radius / 1.5;
  const double w0 = d.w_slm / std::sqrt(2.0);
  const double z_half = std::numbers::pi * w0 * w0 / wavelength;
  g.l01 = l01;
  g.l12 = 2.0 * z_half;
  g.l2p = l2p_ratio * g.l12;
  d.input_waist = d.w_slm;
  g.slm0_radius = std::min(3.0 * d.input_waist, 0.5 * static_cast<double>(pixels - 2) * pitch);
  g.lens_f1 = lens_for_waist(d.input_waist, l01, wavelength, z_half);
  g.lens_f2 = lens_for_waist(w0, z_half, wavelength, g.l2p);
  g.validate();
  return d;
}

struct DiffractionRig::Optics {
  Optics(const DeskGeometry& d, const DiffractionRigOptions& o)
      : p01(d.optics.slm.nx, d.optics.slm.ny, d.optics.slm.pitch, d.optics.slm.pitch, d.optics.l01,
            d.optics.wavelength, o.pixel),
        p12(d.optics.slm.nx, d.optics.slm.ny, d.optics.slm.pitch, d.optics.slm.pitch, d.optics.l12,
            d.optics.wavelength, o.pixel),
        p2p(d.optics.slm.nx, d.optics.slm.ny, d.optics.slm.pitch, d.optics.slm.pitch, d.optics.l2p,
            d.optics.wavelength, o.pixel) {}

  Propagator p01, p12, p2p;
  FieldGrid incident;
  FieldGrid slm2;
  std::vector<std::vector<std::uint8_t>> masks;  // per SLM1 region
  std::vector<std::uint8_t> background;          // pixels outside every region
  std::vector<std::vector<std::size_t>> readout;  // detector pixels per spot
};

namespace {

std::size_t nearest_pixel(double pos, std::size_t count, double pitch) {
  const double i = std::round(pos / pitch) + static_cast<double>(count / 2);
  if (i < 1.0 || i > static_cast<double>(count) - 2.0) throw ConfigError("readout spot too close to the grid edge");
  return static_cast<std::size_t>(i);
}

FieldGrid multiply(const FieldGrid& a, const FieldGrid& b) {
  FieldGrid out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] *= b.samples[i];
  return out;
}

}  // namespace

DiffractionRig::DiffractionRig(const DeskGeometry& geometry, DiffractionRigOptions options)
    : n_(geometry.optics.size()),
      geo_(std::make_shared<const DeskGeometry>(geometry)),
      opt_(std::move(options)),
      rng_(make_stream(opt_.seed, 0, 0xd1ff)),
      w_(ComplexMatrix::Ones(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_))),
      e_(n_, 1.0) {
  geo_->optics.validate();
  if (opt_.readout_pixels != 1 && opt_.readout_pixels != 9) {
    throw ConfigError("readout_pixels must be 1 or 9");
  }
  if (opt_.detector) opt_.detector->validate();
  if (opt_.exposure_scale && !(*opt_.exposure_scale > 0.0)) {
    throw ConfigError("exposure scale must be positive");
  }

  const OpticalGeometry& g = geo_->optics;
  auto o = std::make_shared<Optics>(*geo_, opt_);
  const double p = g.slm.pitch;
  o->incident = gaussian_beam(g.slm.nx, g.slm.ny, p, p, geo_->input_waist);
  o->slm2 = phase_only_project(ideal_modulation(
                SlmRole::kRecombine2, g,
                ComplexMatrix::Ones(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_))))
                .modulation();
  o->background.assign(o->incident.size(), 1);
  for (const Vec2& c : g.beam_positions_slm1) {
    o->masks.push_back(region_mask(o->incident, c, g.region_radius));
    for (std::size_t i = 0; i < o->background.size(); ++i) {
      if (o->masks.back()[i]) o->background[i] = 0;
    }
  }
  for (const Vec2& c : g.beam_positions_slm2) {
    const std::size_t cx = nearest_pixel(c.x, g.slm.nx, p);
    const std::size_t cy = nearest_pixel(c.y, g.slm.ny, p);
    std::vector<std::size_t> px;
    if (opt_.readout_pixels == 1) {
      px.push_back(cy * g.slm.nx + cx);
    } else {
      for (std::size_t iy = cy - 1; iy <= cy + 1; ++iy)
        for (std::size_t ix = cx - 1; ix <= cx + 1; ++ix) px.push_back(iy * g.slm.nx + ix);
    }
    o->readout.push_back(std::move(px));
  }
  optics_ = std::move(o);
}

DiffractionRig::~DiffractionRig() = default;

void DiffractionRig::set_matrix(const ComplexMatrix& w) {
  if (w.rows() != static_cast<Eigen::Index>(n_) || w.cols() != static_cast<Eigen::Index>(n_)) {
    throw DimensionError("SLM1 matrix does not match the rig");
  }
  if (!w.allFinite()) throw ConfigError("SLM1 matrix must be finite");
  w_ = w;
  slm1_dirty_ = true;
}

void DiffractionRig::set_input_amplitudes(std::span<const double> e) {
  if (e.size() != n_) throw DimensionError("input amplitude vector has the wrong length");
  for (double v : e) {
    if (!(v >= 0.0 && std::isfinite(v))) throw ConfigError("input amplitudes must be >= 0");
  }
  e_.assign(e.begin(), e.end());
  input_dirty_ = true;
}

Hologram DiffractionRig::slm0_hologram() const {
  ComplexMatrix a(static_cast<Eigen::Index>(n_), 1);
  for (std::size_t j = 0; j < n_; ++j) a(static_cast<Eigen::Index>(j), 0) = e_[j];
  return phase_only_project(ideal_modulation(SlmRole::kSplit0, geo_->optics, a));
}

Hologram DiffractionRig::slm1_hologram() const {
  return phase_only_project(ideal_modulation(SlmRole::kSplit1, geo_->optics, w_));
}

Hologram DiffractionRig::slm2_hologram() const {
  const auto ni = static_cast<Eigen::Index>(n_);
  return phase_only_project(ideal_modulation(SlmRole::kRecombine2, geo_->optics, ComplexMatrix::Ones(ni, ni)));
}

void DiffractionRig::refresh() {
  const Optics& o = *optics_;
  if (input_dirty_) {
    at_slm1_ = o.p01.forward(multiply(o.incident, slm0_hologram().modulation()));
    input_dirty_ = false;
    slm1_dirty_ = true;
  }
  if (!slm1_dirty_) return;
  slm1_ = slm1_hologram().modulation();
  const FieldGrid lit = multiply(at_slm1_, slm1_);
  const std::size_t px = opt_.readout_pixels;
  response_.assign(n_ + 1, std::vector<cplx>(n_ * px));
  for (std::size_t r = 0; r <= n_; ++r) {
    const auto& mask = r < n_ ? o.masks[r] : o.background;
    FieldGrid u = lit;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (!mask[i]) u.samples[i] = 0.0;
    }
    const FieldGrid out = o.p2p.forward(multiply(o.p12.forward(u), o.slm2));
    for (std::size_t m = 0; m < n_; ++m) {
      for (std::size_t p = 0; p < px; ++p) response_[r][m * px + p] = out.samples[o.readout[m][p]];
    }
  }
  slm1_dirty_ = false;
}

std::vector<double> DiffractionRig::expected(std::span<const cplx> x) {
  if (x.size() != n_) throw DimensionError("rig input has the wrong length");
  refresh();
  const std::size_t px = opt_.readout_pixels;
  std::vector<double> out(n_, 0.0);
  for (std::size_t m = 0; m < n_; ++m) {
    for (std::size_t p = 0; p < px; ++p) {
      cplx f = response_[n_][m * px + p];
      for (std::size_t j = 0; j < n_; ++j) f += x[j] * response_[j][m * px + p];
      out[m] += std::norm(f);
    }
    out[m] /= static_cast<double>(px);
  }
  return out;
}

std::vector<double> DiffractionRig::measure(std::span<const cplx> x) {
  std::vector<double> out = expected(x);
  if (!opt_.detector) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  if (!opt_.exposure_scale && peak == 0.0) return out;
  const double exposure = opt_.exposure_scale ? *opt_.exposure_scale : 0.5 * opt_.detector->full_well / peak;
  const auto d = detect(std::span<const double>(out), *opt_.detector, exposure, rng_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = d.electrons[i] / exposure;
  return out;
}

FieldGrid DiffractionRig::detector_field(std::span<const cplx> x) {
  if (x.size() != n_) throw DimensionError("rig input has the wrong length");
  refresh();
  const Optics& o = *optics_;
  FieldGrid u = multiply(at_slm1_, slm1_);
  for (std::size_t j = 0; j < n_; ++j) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (o.masks[j][i]) u.samples[i] *= x[j];
    }
  }
  return o.p2p.forward(multiply(o.p12.forward(u), o.slm2));
}

std::vector<double> DiffractionRig::filtered_image(std::span<const cplx> x) {
  const FieldGrid f = detector_field(x);
  const auto& spots = geo_->optics.beam_positions_slm2;
  double sep = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < spots.size(); ++a)
    for (std::size_t b = a + 1; b < spots.size(); ++b)
      sep = std::min(sep, std::hypot(spots[a].x - spots[b].x, spots[a].y - spots[b].y));
  const double radius = std::isfinite(sep) ? 0.5 * sep : geo_->optics.region_radius;
  std::vector<std::uint8_t> pinhole(f.size(), 0);
  for (const Vec2& c : spots) {
    const auto m = region_mask(f, c, radius);
    for (std::size_t i = 0; i < m.size(); ++i) pinhole[i] |= m[i];
  }
  std::vector<double> img = f.intensity();
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!pinhole[i]) img[i] = 0.0;
  }
  return img;
}

std::unique_ptr<Rig> DiffractionRig::clone(std::uint64_t stream) const {
  auto r = std::unique_ptr<DiffractionRig>(new DiffractionRig(*this));
  r->rng_ = make_stream(opt_.seed, stream, 0xd1ff);
  return r;
}

CalibrationOptions physical_calibration() {
  CalibrationOptions o;
  o.slm1_rounds = 3;
  o.slm1_damping = 0.6;
  o.slm0_rounds = 6;
  o.slm0_damping = 0.1;
  o.fit = ScaleFit::kPerColumn;
  o.estimator = PhaseEstimator::kAtan2;
  o.passes = 6;
  return o;
}

PhysicalEvaluatorSetup make_physical_evaluator(std::shared_ptr<const SpectralTransform> t,
                                               const DiffractionRigOptions& options,
                                               const CalibrationOptions& calibration) {
  if (!t) throw ConfigError("physical evaluator needs a transform");
  auto rig = std::make_unique<DiffractionRig>(desk_geometry(t->size()), options);
  PhysicalEvaluatorSetup s;
  s.session = calibrate(*rig, t->a, calibration);
  s.scale = intensity_scale(*rig, t->a);
  const auto n = static_cast<Eigen::Index>(t->size());
  s.matrix_fidelity = fidelity_matrix(t->a.cwiseAbs2(), measure_columns(*rig, ComplexMatrix::Identity(n, n)).cwiseMax(0.0));
  s.evaluator = std::make_unique<RigEvaluator>(std::move(rig), std::move(t), s.scale);
  s.evaluator->set_name("physical");
  return s;
}

}  // namespace peidia
