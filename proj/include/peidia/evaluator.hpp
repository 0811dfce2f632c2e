#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "peidia/ising.hpp"

namespace peidia {

struct Evaluation {
  double h = 0.0;
  /// Per-beam intensities behind `h`; empty for the exact oracle.
  std::vector<double> intensities;
  bool saturated = false;
};

/// Computes the Hamiltonian of a spin state, possibly through a simulated
/// measurement. Instances may carry mutable state (RNG, scratch buffers), so
/// each annealing replica works on its own clone.
class HamiltonianEvaluator {
 public:
  virtual ~HamiltonianEvaluator() = default;

  virtual Evaluation evaluate(const SpinState& s) = 0;
  /// Independent copy whose random stream is keyed by `stream`.
  virtual std::unique_ptr<HamiltonianEvaluator> clone(std::uint64_t stream) const = 0;
  virtual std::string_view name() const = 0;
  virtual std::size_t size() const = 0;
};

/// The quadratic form itself.
class ExactEvaluator final : public HamiltonianEvaluator {
 public:
  explicit ExactEvaluator(std::shared_ptr<const IsingModel> model)
      : model_(std::move(model)) {}

  Evaluation evaluate(const SpinState& s) override {
    return {hamiltonian_exact(*model_, s), {}, false};
  }
  std::unique_ptr<HamiltonianEvaluator> clone(std::uint64_t) const override {
    return std::make_unique<ExactEvaluator>(model_);
  }
  std::string_view name() const override { return "exact"; }
  std::size_t size() const override { return model_->size(); }

 private:
  std::shared_ptr<const IsingModel> model_;
};

}  // namespace peidia
