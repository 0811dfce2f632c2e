#include "peidia/ising.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "peidia/error.hpp"

namespace peidia {

IsingModel IsingModel::symmetrize(const RealMatrix& raw) {
  if (raw.rows() != raw.cols()) {
    std::ostringstream msg;
    msg << "coupling matrix must be square, got " << raw.rows() << "x"
        << raw.cols();
    throw DimensionError(msg.str());
  }
  if (raw.rows() < 2) {
    throw DimensionError("an Ising model needs at least 2 spins");
  }
  if (!raw.allFinite()) {
    throw ConfigError("coupling matrix has non-finite entries");
  }
  RealMatrix j = 0.5 * (raw + raw.transpose());
  j.diagonal().setZero();
  return IsingModel(std::move(j));
}

SpinState::SpinState(std::vector<std::int8_t> spins) : spins_(std::move(spins)) {
  for (auto v : spins_) {
    if (v != 1 && v != -1) throw ConfigError("spin entries must be +1 or -1");
  }
}

SpinState SpinState::all_up(std::size_t n) {
  return SpinState(std::vector<std::int8_t>(n, 1));
}

SpinState SpinState::from_bits(std::size_t n, std::uint64_t bits) {
  std::vector<std::int8_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = (bits >> i) & 1U ? -1 : 1;
  return SpinState(std::move(s));
}

SpinState SpinState::negated() const {
  SpinState out = *this;
  for (auto& v : out.spins_) v = static_cast<std::int8_t>(-v);
  return out;
}

void SpinState::to_doubles(std::span<double> out) const {
  for (std::size_t i = 0; i < spins_.size(); ++i) out[i] = spins_[i];
}

std::size_t SpectralTransform::negative_count() const {
  return static_cast<std::size_t>(std::count(negative.begin(), negative.end(), 1));
}

SpectralTransform spectral_transform(const IsingModel& model,
                                     std::optional<double> zero_tol) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(model.couplings());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver did not converge");
  }
  const auto n = static_cast<Eigen::Index>(model.size());
  SpectralTransform t;
  t.eigenvalues = solver.eigenvalues();
  t.q = solver.eigenvectors().transpose();
  const double scale = t.eigenvalues.cwiseAbs().maxCoeff();
  const double tol = zero_tol.value_or(1e-12 * scale);
  if (tol < 0.0) throw ConfigError("zero_tol must be nonnegative");

  t.a.resize(n, n);
  t.negative.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lambda = t.eigenvalues(i);
    const bool neg = lambda < -tol;
    t.negative[static_cast<std::size_t>(i)] = neg ? 1 : 0;
    const cplx root = neg ? cplx{0.0, std::sqrt(-lambda)}
                          : cplx{std::sqrt(std::max(lambda, 0.0)), 0.0};
    for (Eigen::Index k = 0; k < n; ++k) t.a(i, k) = root * t.q(i, k);
  }
  return t;
}

double hamiltonian_exact(const IsingModel& model, const SpinState& s) {
  const std::size_t n = model.size();
  if (s.size() != n) {
    throw DimensionError("spin state length " + std::to_string(s.size()) +
                         " does not match model size " + std::to_string(n));
  }
  const RealMatrix& j = model.couplings();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t k = i + 1; k < n; ++k) {
      row += j(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * s[k];
    }
    acc += s[i] * row;
  }
  return -acc;
}

GroundState brute_force_ground(const IsingModel& model, std::size_t cap) {
  const std::size_t n = model.size();
  if (n > cap || n > 63) {
    throw CapacityError("brute force limited to " + std::to_string(cap) +
                            " spins, model has " + std::to_string(n),
                        cap);
  }
  const RealMatrix& j = model.couplings();
  std::vector<double> spins(n, 1.0);
  // local field h_k = sum_i J_ki s_i; flipping spin b changes H by 2 s_b h_b
  std::vector<double> field(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      field[k] += j(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
    }
  }
  SpinState current = SpinState::all_up(n);
  double h = hamiltonian_exact(model, current);
  double best = h;
  std::uint64_t best_gray = 0;

  const std::uint64_t count = std::uint64_t{1} << (n - 1);
  for (std::uint64_t step = 1; step < count; ++step) {
    // Gray code over spins 1..n-1: flip bit ctz(step)
    const auto b = static_cast<std::size_t>(std::countr_zero(step)) + 1;
    h += 2.0 * spins[b] * field[b];
    spins[b] = -spins[b];
    const double twice = 2.0 * spins[b];
    for (std::size_t k = 0; k < n; ++k) {
      field[k] += twice * j(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b));
    }
    if (h < best) {
      best = h;
      best_gray = step ^ (step >> 1);
    }
  }
  GroundState g{SpinState::from_bits(n, best_gray << 1), 0.0};
  g.h = hamiltonian_exact(model, g.state);
  return g;
}

IsingModel mobius_ladder(std::size_t n) {
  if (n < 4 || n % 2 != 0) {
    throw ConfigError("Moebius ladder needs an even spin count >= 4");
  }
  RealMatrix j = RealMatrix::Zero(static_cast<Eigen::Index>(n),
                                  static_cast<Eigen::Index>(n));
  auto link = [&](std::size_t a, std::size_t b) {
    j(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = -1.0;
    j(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = -1.0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    link(i, (i + 1) % n);
    link(i, (i + n / 2) % n);
  }
  return IsingModel::symmetrize(j);
}

IsingModel random_glass(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  const auto dim = static_cast<Eigen::Index>(n);
  RealMatrix j = RealMatrix::Zero(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = a + 1; b < dim; ++b) {
      const double w = coin(rng) ? 1.0 : -1.0;
      j(a, b) = w;
      j(b, a) = w;
    }
  }
  return IsingModel::symmetrize(j);
}

IsingModel problem_from_json(const nlohmann::json& doc) {
  try {
    if (doc.contains("matrix")) {
      const auto& rows = doc.at("matrix");
      const auto n = static_cast<Eigen::Index>(rows.size());
      RealMatrix raw(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = rows.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != n) {
          throw DimensionError("problem matrix row " + std::to_string(r) +
                               " has " + std::to_string(row.size()) +
                               " entries, expected " + std::to_string(n));
        }
        for (Eigen::Index c = 0; c < n; ++c) {
          raw(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
      }
      return IsingModel::symmetrize(raw);
    }
    const auto n = doc.at("n").get<std::int64_t>();
    if (n < 2) throw ConfigError("problem \"n\" must be at least 2");
    RealMatrix raw = RealMatrix::Zero(n, n);
    for (const auto& edge : doc.at("edges")) {
      if (edge.size() != 3) throw ConfigError("edges must be [i, j, w] triples");
      const auto a = edge.at(0).get<std::int64_t>();
      const auto b = edge.at(1).get<std::int64_t>();
      if (a < 0 || b < 0 || a >= n || b >= n) {
        throw ConfigError("edge index out of range: [" + std::to_string(a) +
                          ", " + std::to_string(b) + "]");
      }
      // Summing into both triangles keeps the symmetric part equal to the
      // sum of the listed weights.
      const double w = edge.at(2).get<double>();
      raw(a, b) += w;
      raw(b, a) += w;
    }
    return IsingModel::symmetrize(raw);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed problem file: ") + e.what());
  }
}

nlohmann::json problem_to_json(const IsingModel& model) {
  nlohmann::json edges = nlohmann::json::array();
  const std::size_t n = model.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double w = model.coupling(a, b);
      if (w != 0.0) edges.push_back({a, b, w});
    }
  }
  return {{"n", n}, {"edges", edges}};
}

IsingModel load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open problem file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("problem file " + path.string() + ": " + e.what());
  }
  return problem_from_json(doc);
}

}  // namespace peidia
