#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "peidia/annealer.hpp"
#include "peidia/ising.hpp"
#include "peidia/optical_sim.hpp"
#include "peidia/physical_rig.hpp"

namespace peidia {

inline constexpr int kSchemaVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

nlohmann::json anneal_config_to_json(const AnnealConfig& c);
/// Unknown keys are rejected so typos do not silently fall back to defaults.
AnnealConfig anneal_config_from_json(const nlohmann::json& j);

/// Either a profile name ("baseline", "ideal") or an object whose optional
/// "profile" key picks the base values that the remaining keys override.
DetectorModel detector_from_json(const nlohmann::json& j);
nlohmann::json detector_to_json(const DetectorModel& d);

PerfModel perf_from_json(const nlohmann::json& j);
nlohmann::json perf_to_json(const PerfModel& p);

/// Desk-scale diffraction chain used by the physical tier.
struct PhysicalConfig {
  std::size_t pixels = 256;
  double pitch = 8e-6;
  double wavelength = 1.55e-6;
  double l01 = 0.03;
  double l2p_ratio = 0.4;
  std::size_t readout_pixels = 1;
  PixelModel pixel = PixelModel::kRect;

  DeskGeometry geometry(std::size_t n) const;
};

PhysicalConfig physical_from_json(const nlohmann::json& j);
nlohmann::json physical_to_json(const PhysicalConfig& p);

enum class Tier { kExact, kIdeal, kNoisy, kPhysical };

std::string_view tier_name(Tier t);
Tier parse_tier(std::string_view s);

/// A problem file or one of the built-in generators.
struct ProblemSource {
  std::optional<std::filesystem::path> path;
  std::string generator;  // "mobius-ladder" | "random-glass" when no path
  std::size_t n = 0;
  std::uint64_t seed = 0;

  IsingModel load() const;
  std::string label() const;
};

/// "path/to/problem.json" (relative to `base`) or
/// {"generator": "random-glass", "n": 20, "seed": 5}.
ProblemSource problem_source_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base);

struct RunManifest {
  ProblemSource problem;
  Tier tier = Tier::kExact;
  AnnealConfig anneal;
  std::size_t runs = 100;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::optional<DetectorModel> camera;
  std::optional<PhysicalConfig> geometry;
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  /// Reference ground energy. Unset: brute force when n fits the cap,
  /// otherwise the best of `reference_runs` independent exact runs.
  std::optional<double> reference_h;
  std::size_t reference_runs = 200;
  /// Schedule of the reference runs. Unset: `anneal`.
  std::optional<AnnealConfig> reference_anneal;
  /// Exposure convention for the noisy tier: |h| mapped to half the full
  /// well. Unset: the reference ground energy.
  std::optional<double> exposure_reference;

  /// Source document as read; its canonical dump is what gets hashed.
  nlohmann::json document;

  void validate() const;
  std::uint64_t hash() const;
};

/// Paths inside the manifest resolve against `base`.
RunManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base);
RunManifest load_manifest(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace peidia
