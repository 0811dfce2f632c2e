#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

namespace peidia {

using cplx = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix =
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Symmetric, zero-diagonal coupling matrix of an n-spin Ising problem
/// without external field. Immutable once built.
class IsingModel {
 public:
  /// Takes the symmetric part of `raw` and zeroes its diagonal.
  static IsingModel symmetrize(const RealMatrix& raw);

  std::size_t size() const noexcept { return static_cast<std::size_t>(j_.rows()); }
  const RealMatrix& couplings() const noexcept { return j_; }
  double coupling(std::size_t i, std::size_t k) const {
    return j_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  }

 private:
  explicit IsingModel(RealMatrix j) : j_(std::move(j)) {}
  RealMatrix j_;
};

inline IsingModel symmetrize(const RealMatrix& raw) {
  return IsingModel::symmetrize(raw);
}

/// Vector of +1/-1 spins.
class SpinState {
 public:
  SpinState() = default;
  explicit SpinState(std::vector<std::int8_t> spins);

  static SpinState all_up(std::size_t n);
  template <class Rng>
  static SpinState random(std::size_t n, Rng& rng) {
    std::vector<std::int8_t> s(n);
    std::bernoulli_distribution coin(0.5);
    for (auto& v : s) v = coin(rng) ? 1 : -1;
    return SpinState(std::move(s));
  }
  /// Spin i is -1 when bit i of `bits` is set.
  static SpinState from_bits(std::size_t n, std::uint64_t bits);

  std::size_t size() const noexcept { return spins_.size(); }
  std::int8_t operator[](std::size_t i) const { return spins_[i]; }
  void flip(std::size_t i) { spins_[i] = static_cast<std::int8_t>(-spins_[i]); }
  std::span<const std::int8_t> values() const noexcept { return spins_; }
  SpinState negated() const;
  void to_doubles(std::span<double> out) const;

  bool operator==(const SpinState&) const = default;

 private:
  std::vector<std::int8_t> spins_;
};

/// A = sqrt(D) Q with J = Q^T D Q. Rows of A belonging to negative
/// eigenvalues are purely imaginary, the rest purely real.
struct SpectralTransform {
  ComplexMatrix a;
  Eigen::VectorXd eigenvalues;  // ascending
  RealMatrix q;                 // rows are eigenvectors
  std::vector<std::uint8_t> negative;  // 1 where eigenvalue < -zero_tol

  std::size_t size() const noexcept { return negative.size(); }
  std::size_t negative_count() const;
};

/// Eigen-decomposes the couplings. `zero_tol` defaults to 1e-12 max|lambda|;
/// eigenvalues within it count as nonnegative.
SpectralTransform spectral_transform(const IsingModel& model,
                                     std::optional<double> zero_tol = {});

/// -1/2 s^T J s
double hamiltonian_exact(const IsingModel& model, const SpinState& s);

struct GroundState {
  SpinState state;
  double h = 0.0;
};

inline constexpr std::size_t kBruteForceCap = 24;

/// Exhaustive search over the 2^(n-1) states with spin 0 fixed to +1.
GroundState brute_force_ground(const IsingModel& model,
                               std::size_t cap = kBruteForceCap);

/// Antiferromagnetic Moebius ladder: ring i~i+1 plus rungs i~i+n/2, J=-1.
IsingModel mobius_ladder(std::size_t n);

/// Fully connected glass with J_ij drawn uniformly from {-1, +1}.
IsingModel random_glass(std::size_t n, std::uint64_t seed);

/// Problem file: {"n": int, "edges": [[i, j, w], ...]} or {"matrix": [[...]]}.
IsingModel problem_from_json(const nlohmann::json& doc);
nlohmann::json problem_to_json(const IsingModel& model);
IsingModel load_problem(const std::filesystem::path& path);

}  // namespace peidia
