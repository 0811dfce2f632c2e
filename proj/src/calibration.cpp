#include "peidia/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "peidia/error.hpp"

namespace peidia {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_phase(double p) {
  p = std::remainder(p, 2.0 * kPi);  // [-pi, pi]
  return p <= -kPi ? p + 2.0 * kPi : p;
}

std::vector<cplx> unit_input(std::size_t n, std::size_t j, cplx v = 1.0) {
  std::vector<cplx> x(n, cplx{});
  x[j] = v;
  return x;
}

void check_square(const ComplexMatrix& m, std::size_t n, const char* what) {
  if (m.rows() != static_cast<Eigen::Index>(n) || m.cols() != static_cast<Eigen::Index>(n)) {
    throw DimensionError(std::string(what) + " must be " + std::to_string(n) + " x " +
                         std::to_string(n));
  }
}

// Entries this small relative to the largest are treated as structural zeros.
double zero_floor(const ComplexMatrix& a) { return 1e-12 * a.cwiseAbs().maxCoeff(); }

}  // namespace

RigError RigError::none(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  return {RealMatrix::Ones(m, m), RealMatrix::Zero(m, m), std::vector<double>(n, 1.0)};
}

RigError RigError::random(std::size_t n, std::uint64_t seed, double gain_lo, double gain_hi,
                          double input_lo, double input_hi) {
  if (!(gain_lo > 0.0 && gain_hi >= gain_lo && input_lo > 0.0 && input_hi >= input_lo)) {
    throw ConfigError("rig error bands must be positive and ordered");
  }
  Rng rng = make_stream(seed, 0, 0x5219);
  std::uniform_real_distribution<double> gain(gain_lo, gain_hi);
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  std::uniform_real_distribution<double> input(input_lo, input_hi);
  RigError e = none(n);
  for (Eigen::Index i = 0; i < e.gain.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.gain.cols(); ++j) {
      e.gain(i, j) = gain(rng);
      e.phase(i, j) = wrap_phase(phase(rng));
    }
  }
  for (auto& b : e.input_gain) b = input(rng);
  return e;
}

void RigError::validate(std::size_t n) const {
  const auto m = static_cast<Eigen::Index>(n);
  if (gain.rows() != m || gain.cols() != m || phase.rows() != m || phase.cols() != m ||
      input_gain.size() != n) {
    throw DimensionError("rig error tables do not match n = " + std::to_string(n));
  }
  if (!gain.allFinite() || !phase.allFinite()) throw ConfigError("rig errors must be finite");
  if ((gain.array() < 0.0).any()) throw ConfigError("rig gains must be nonnegative");
  for (double b : input_gain) {
    if (!(b >= 0.0 && std::isfinite(b))) throw ConfigError("input gains must be nonnegative");
  }
}

MatrixRig::MatrixRig(RigError error, std::optional<DetectorModel> detector, std::uint64_t seed,
                     std::uint64_t stream)
    : n_(error.input_gain.size()),
      err_(std::move(error)),
      det_(std::move(detector)),
      seed_(seed),
      rng_(make_stream(seed, stream, 0x816)),
      w_(ComplexMatrix::Ones(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_))),
      e_(n_, 1.0) {
  if (n_ < 2) throw ConfigError("a rig needs at least two beams");
  err_.validate(n_);
  if (det_) det_->validate();
}

void MatrixRig::set_matrix(const ComplexMatrix& w) {
  check_square(w, n_, "SLM1 matrix");
  if (!w.allFinite()) throw ConfigError("SLM1 matrix must be finite");
  w_ = w;
}

void MatrixRig::set_input_amplitudes(std::span<const double> e) {
  if (e.size() != n_) throw DimensionError("input amplitude vector has the wrong length");
  for (double v : e) {
    if (!(v >= 0.0 && std::isfinite(v))) throw ConfigError("input amplitudes must be >= 0");
  }
  e_.assign(e.begin(), e.end());
}

ComplexMatrix MatrixRig::effective() const {
  ComplexMatrix t = w_;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      const auto ju = static_cast<std::size_t>(j);
      t(i, j) *= std::polar(err_.gain(i, j), err_.phase(i, j)) * err_.input_gain[ju] * e_[ju];
    }
  }
  return t;
}

std::vector<double> MatrixRig::measure(std::span<const cplx> x) {
  if (x.size() != n_) throw DimensionError("rig input has the wrong length");
  ++count_;
  const ComplexMatrix t = effective();
  std::vector<double> out(n_);
  double peak = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    cplx s{};
    for (std::size_t j = 0; j < n_; ++j) s += t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
    out[i] = std::norm(s);
    peak = std::max(peak, out[i]);
  }
  if (!det_ || peak == 0.0) return out;
  const double exposure = 0.5 * det_->full_well / peak;
  auto d = detect(std::span<const double>(out), *det_, exposure, rng_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = d.electrons[i] / exposure;
  return out;
}

std::unique_ptr<Rig> MatrixRig::clone(std::uint64_t stream) const {
  auto r = std::make_unique<MatrixRig>(err_, det_, seed_, stream);
  r->w_ = w_;
  r->e_ = e_;
  return r;
}

PhaseCalibration phase_calibrate(Rig& rig, const std::optional<ComplexMatrix>& loaded,
                                 PhaseEstimator estimator) {
  const std::size_t n = rig.size();
  const auto ni = static_cast<Eigen::Index>(n);
  const ComplexMatrix w = loaded ? *loaded : ComplexMatrix::Ones(ni, ni);
  check_square(w, n, "loaded matrix");
  rig.set_matrix(w);

  PhaseCalibration pc;
  pc.delta_phi = RealMatrix::Zero(ni, ni - 1);
  pc.unmeasurable = ByteMatrix::Zero(ni, ni - 1);
  for (std::size_t j = 1; j < n; ++j) {
    std::vector<cplx> both(n, cplx{}), quad(n, cplx{});
    both[0] = quad[0] = 1.0;
    both[j] = 1.0;
    quad[j] = cplx(0.0, 1.0);
    const auto m1 = rig.measure(both);
    const auto m2 = rig.measure(quad);
    const auto m3 = rig.measure(unit_input(n, 0));
    const auto m4 = rig.measure(unit_input(n, j));
    pc.measurements += 4;
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max({peak, m3[i], m4[i]});
    const auto jc = static_cast<Eigen::Index>(j - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double a3 = std::max(m3[i], 0.0), a4 = std::max(m4[i], 0.0);
      const double prod = a3 * a4;
      if (!(prod > 1e-18 * peak * peak)) {
        pc.unmeasurable(ii, jc) = 1;
        continue;
      }
      double c = (m1[i] - a3 - a4) / (2.0 * std::sqrt(prod));
      if (std::abs(c) > 1.0) {
        pc.max_excursion = std::max(pc.max_excursion, std::abs(c) - 1.0);
        c = std::clamp(c, -1.0, 1.0);
      }
      // M2 - M3 - M4 = -2 |a||b| sin(psi), psi = arg(b) - arg(a)
      const double quad_term = m2[i] - a3 - a4;
      double psi = 0.0;
      if (estimator == PhaseEstimator::kAtan2) {
        psi = std::atan2(-quad_term, m1[i] - a3 - a4);
      } else {
        psi = quad_term >= 0.0 ? -std::acos(c) : std::acos(c);
      }
      const double wanted = std::arg(w(ii, static_cast<Eigen::Index>(j))) - std::arg(w(ii, 0));
      pc.delta_phi(ii, jc) = wrap_phase(wanted - psi);
    }
  }
  return pc;
}

ComplexMatrix apply_phase_correction(const ComplexMatrix& target, const RealMatrix& delta_phi) {
  if (delta_phi.rows() != target.rows() || delta_phi.cols() != target.cols() - 1) {
    throw DimensionError("phase table must be n x (n-1)");
  }
  ComplexMatrix out = target;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 1; j < out.cols(); ++j) out(i, j) *= std::polar(1.0, delta_phi(i, j - 1));
  }
  return out;
}

RealMatrix measure_columns(Rig& rig, const ComplexMatrix& inputs) {
  const std::size_t n = rig.size();
  if (inputs.rows() != static_cast<Eigen::Index>(n)) throw DimensionError("input columns have the wrong length");
  RealMatrix out(static_cast<Eigen::Index>(n), inputs.cols());
  std::vector<cplx> x(n);
  for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
    for (std::size_t j = 0; j < n; ++j) x[j] = inputs(static_cast<Eigen::Index>(j), k);
    const auto y = rig.measure(x);
    for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i), k) = y[i];
  }
  return out;
}

namespace {

double amplitude_residual(const RealMatrix& c, const ComplexMatrix& target, ScaleFit fit) {
  const RealMatrix root = c.cwiseMax(0.0).cwiseSqrt();
  const RealMatrix mag = target.cwiseAbs();
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    double s = 1.0;
    if (fit == ScaleFit::kPerColumn) {
      const double den = root.col(j).squaredNorm();
      s = den > 0.0 ? root.col(j).dot(mag.col(j)) / den : 1.0;
    }
    r2 += (s * root.col(j) - mag.col(j)).squaredNorm();
  }
  return std::sqrt(r2);
}

}  // namespace

AmplitudeCalibration amplitude_calibrate_slm1(Rig& rig, const ComplexMatrix& target,
                                              const ComplexMatrix& start, std::size_t n_rounds,
                                              ScaleFit fit, double damping) {
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("SLM1 damping must be in (0, 1]");
  const std::size_t n = rig.size();
  const auto ni = static_cast<Eigen::Index>(n);
  check_square(target, n, "target matrix");
  check_square(start, n, "start matrix");
  const ComplexMatrix identity = ComplexMatrix::Identity(ni, ni);
  const double floor = zero_floor(target);

  AmplitudeCalibration ac;
  ac.matrix = start;
  ac.flagged = ByteMatrix::Zero(ni, ni);
  rig.set_matrix(ac.matrix);
  RealMatrix c = measure_columns(rig, identity);
  ac.initial_residual = amplitude_residual(c, target, fit);
  for (std::size_t round = 0; round < n_rounds; ++round) {
    for (Eigen::Index j = 0; j < ni; ++j) {
      double s = 1.0;
      if (fit == ScaleFit::kPerColumn) {
        const Eigen::VectorXd root = c.col(j).cwiseMax(0.0).cwiseSqrt();
        const double den = root.squaredNorm();
        s = den > 0.0 ? root.dot(target.col(j).cwiseAbs()) / den : 1.0;
      }
      for (Eigen::Index i = 0; i < ni; ++i) {
        const double a = std::abs(target(i, j));
        if (a <= floor) {
          ac.matrix(i, j) = 0.0;
          continue;
        }
        if (!(c(i, j) > 0.0)) {
          ac.flagged(i, j) = 1;
          continue;
        }
        ac.matrix(i, j) *= std::pow(a / (s * std::sqrt(c(i, j))), damping);
      }
    }
    rig.set_matrix(ac.matrix);
    c = measure_columns(rig, identity);
    ac.residual.push_back(amplitude_residual(c, target, fit));
  }
  return ac;
}

InputCalibration amplitude_calibrate_slm0(Rig& rig, const ComplexMatrix& target,
                                          std::size_t n_rounds, double damping) {
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("SLM0 damping must be in (0, 1]");
  const std::size_t n = rig.size();
  check_square(target, n, "target matrix");
  InputCalibration ic;
  ic.e_in = rig.input_amplitudes();
  ic.dead.assign(n, 0);
  ic.column_peak.assign(n, 0.0);

  // Column j of the identity-input matrix C and the isolated-region
  // measurement F_j are the same reading on a region-addressed rig.
  const auto column_peaks = [&] {
    std::vector<double> peak(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto y = rig.measure(unit_input(n, j));
      for (double v : y) peak[j] = std::max(peak[j], v);
    }
    return peak;
  };
  const auto update = [&](const std::vector<double>& peak) {
    for (std::size_t j = 0; j < n; ++j) {
      const double want = target.col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff();
      if (!(peak[j] > 0.0) || want == 0.0) {
        ic.dead[j] = 1;
        continue;
      }
      ic.e_in[j] *= std::pow(want / std::sqrt(peak[j]), damping);
    }
    rig.set_input_amplitudes(ic.e_in);
  };

  update(column_peaks());
  for (std::size_t round = 0; round < n_rounds; ++round) update(column_peaks());
  const auto final_peak = column_peaks();
  for (std::size_t j = 0; j < n; ++j) ic.column_peak[j] = std::sqrt(std::max(final_peak[j], 0.0));
  return ic;
}

CalibrationTables CalibrationTables::identity(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  return {RealMatrix::Zero(m, m - 1), RealMatrix::Ones(m, m), std::vector<double>(n, 1.0)};
}

nlohmann::json tables_to_json(const CalibrationTables& t) {
  const auto rows = [](const RealMatrix& m) {
    auto a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      auto r = nlohmann::json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
      a.push_back(r);
    }
    return a;
  };
  return {{"n", t.size()},
          {"delta_phi_rad", rows(t.delta_phi)},
          {"slm1_amplitude_ratio", rows(t.slm1_amplitude)},
          {"slm0_input_ratio", t.slm0_input}};
}

CalibrationTables tables_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("n").get<std::size_t>();
    if (n < 2) throw ConfigError("calibration tables need n >= 2");
    const auto ni = static_cast<Eigen::Index>(n);
    const auto read = [&](const nlohmann::json& a, Eigen::Index rows, Eigen::Index cols) {
      if (a.size() != static_cast<std::size_t>(rows)) throw DimensionError("calibration table has the wrong shape");
      RealMatrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (a[r].size() != static_cast<std::size_t>(cols)) throw DimensionError("calibration table has the wrong shape");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[r][c].get<double>();
      }
      return m;
    };
    CalibrationTables t;
    t.delta_phi = read(j.at("delta_phi_rad"), ni, ni - 1);
    t.slm1_amplitude = read(j.at("slm1_amplitude_ratio"), ni, ni);
    t.slm0_input = j.at("slm0_input_ratio").get<std::vector<double>>();
    if (t.slm0_input.size() != n) throw DimensionError("slm0 table has the wrong length");
    if ((t.slm1_amplitude.array() <= 0.0).any()) throw ConfigError("amplitude corrections must be positive");
    for (double v : t.slm0_input) {
      if (!(v > 0.0)) throw ConfigError("input corrections must be positive");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("calibration tables: ") + e.what());
  }
}

ComplexMatrix program_matrix(const ComplexMatrix& target, const CalibrationTables& t) {
  check_square(target, t.size(), "target matrix");
  ComplexMatrix w = apply_phase_correction(target, t.delta_phi);
  return w.cwiseProduct(t.slm1_amplitude.cast<cplx>());
}

CalibrationSession calibrate(Rig& rig, const ComplexMatrix& target, const CalibrationOptions& o) {
  const std::size_t n = rig.size();
  const auto ni = static_cast<Eigen::Index>(n);
  check_square(target, n, "target matrix");
  if (o.passes < 1) throw ConfigError("calibration needs at least one pass");
  const double floor = zero_floor(target);

  // Target phases with the measured correction, magnitudes taken from the
  // current weights once there are any.
  const auto retarget = [&](const RealMatrix& delta_phi, const ComplexMatrix* current) {
    ComplexMatrix w = apply_phase_correction(target, delta_phi);
    if (!current) return w;
    for (Eigen::Index i = 0; i < ni; ++i) {
      for (Eigen::Index j = 0; j < ni; ++j) {
        const double a = std::abs(target(i, j));
        if (a > floor) w(i, j) *= std::abs((*current)(i, j)) / a;
      }
    }
    return w;
  };

  CalibrationSession s;
  ComplexMatrix w;
  for (std::size_t pass = 0; pass < o.passes; ++pass) {
    if (pass == 0) {
      s.phase = phase_calibrate(rig, std::nullopt, o.estimator);
      w = retarget(s.phase.delta_phi, nullptr);
    } else {
      s.phase = phase_calibrate(rig, w, o.estimator);
      w = retarget(s.phase.delta_phi, &w);
    }
    s.slm1 = amplitude_calibrate_slm1(rig, target, w, o.slm1_rounds, o.fit, o.slm1_damping);
    w = s.slm1.matrix;
    rig.set_matrix(w);
    s.slm0 = amplitude_calibrate_slm0(rig, target, o.slm0_rounds, o.slm0_damping);
  }
  if (o.passes > 1) {
    // amplitude rounds move the phases of a coupled rig; close on a phase step
    s.phase = phase_calibrate(rig, w, o.estimator);
    w = retarget(s.phase.delta_phi, &w);
    rig.set_matrix(w);
  }

  // Tables describe the final matrix relative to the target.
  s.tables.delta_phi = s.phase.delta_phi;
  s.tables.slm1_amplitude = RealMatrix::Ones(ni, ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j < ni; ++j) {
      const double a = std::abs(target(i, j));
      if (a <= floor) continue;
      s.tables.slm1_amplitude(i, j) = std::abs(w(i, j)) / a;
      if (j > 0) s.tables.delta_phi(i, j - 1) = std::arg(w(i, j) / target(i, j));
    }
  }
  s.tables.slm0_input = s.slm0.e_in;
  return s;
}

ComplexMatrix dft_matrix(std::size_t n) {
  if (n < 1) throw ConfigError("DFT size must be positive");
  const auto ni = static_cast<Eigen::Index>(n);
  ComplexMatrix w(ni, ni);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < ni; ++j) {
    for (Eigen::Index k = 0; k < ni; ++k) {
      // reduce jk mod n before scaling to keep the angle exact
      const auto e = static_cast<double>((j * k) % ni);
      w(j, k) = std::polar(norm, -2.0 * kPi * e / static_cast<double>(n));
    }
  }
  return w;
}

double dft_benchmark(Rig& rig, const CalibrationTables* tables) {
  const std::size_t n = rig.size();
  const ComplexMatrix w = dft_matrix(n);
  if (tables) {
    rig.set_matrix(program_matrix(w, *tables));
    rig.set_input_amplitudes(tables->slm0_input);
  } else {
    rig.set_matrix(w);
    rig.set_input_amplitudes(std::vector<double>(n, 1.0));
  }
  const RealMatrix out = measure_columns(rig, w.adjoint()).cwiseMax(0.0);
  const auto ni = static_cast<Eigen::Index>(n);
  return fidelity_matrix(RealMatrix::Identity(ni, ni), out);
}

double intensity_scale(Rig& rig, const ComplexMatrix& target) {
  const auto ni = static_cast<Eigen::Index>(rig.size());
  check_square(target, rig.size(), "target matrix");
  const RealMatrix c = measure_columns(rig, ComplexMatrix::Identity(ni, ni));
  const RealMatrix a2 = target.cwiseAbs2();
  const double den = a2.squaredNorm();
  if (!(den > 0.0)) throw NumericalError("intensity scale of a zero target");
  const double k = c.cwiseProduct(a2).sum() / den;
  if (!(k > 0.0)) throw NumericalError("rig delivers no light on the target pattern");
  return k;
}

RigEvaluator::RigEvaluator(std::unique_ptr<Rig> rig, std::shared_ptr<const SpectralTransform> t,
                           double scale)
    : rig_(std::move(rig)), t_(std::move(t)), scale_(scale) {
  if (!rig_ || !t_) throw ConfigError("rig evaluator needs a rig and a transform");
  if (rig_->size() != t_->size()) throw DimensionError("rig and transform sizes differ");
  if (!(scale_ > 0.0)) throw ConfigError("rig intensity scale must be positive");
}

Evaluation RigEvaluator::evaluate(const SpinState& s) {
  if (s.size() != t_->size()) throw DimensionError("spin state does not match the rig");
  std::vector<cplx> x(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) x[i] = static_cast<double>(s[i]);
  Evaluation e;
  e.intensities = rig_->measure(x);
  e.h = hamiltonian_from_intensities(e.intensities, t_->negative, scale_, NegativeIntensity::kAllow);
  return e;
}

std::unique_ptr<HamiltonianEvaluator> RigEvaluator::clone(std::uint64_t stream) const {
  auto c = std::make_unique<RigEvaluator>(rig_->clone(stream), t_, scale_);
  c->name_ = name_;
  return c;
}

}  // namespace peidia
