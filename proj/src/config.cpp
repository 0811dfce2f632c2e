#include "peidia/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "peidia/error.hpp"

namespace peidia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::string_view what,
                    std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      throw ConfigError(std::string(what) + ": unknown key '" + key + "' (expected one of " +
                        list + ")");
    }
  }
}

template <class T>
T get(const json& j, const char* key, std::string_view what) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(what) + ": field '" + key + "' is missing or has the wrong type");
  }
}

template <class T>
void maybe(const json& j, const char* key, std::string_view what, T& out) {
  if (j.contains(key)) out = get<T>(j, key, what);
}

std::size_t get_count(const json& j, const char* key, std::string_view what) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string(what) + ": field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json anneal_config_to_json(const AnnealConfig& c) {
  json j{{"n_step", c.n_step}, {"n_temp", c.n_temp}, {"eta", c.eta}, {"seed", c.seed}};
  if (c.t0) j["t0"] = *c.t0;
  if (c.alpha) j["alpha"] = *c.alpha;
  return j;
}

AnnealConfig anneal_config_from_json(const json& j) {
  constexpr std::string_view what = "anneal";
  reject_unknown(j, what, {"t0", "n_step", "n_temp", "eta", "alpha", "seed"});
  AnnealConfig c;
  if (j.contains("t0")) c.t0 = get<double>(j, "t0", what);
  if (j.contains("alpha")) c.alpha = get<double>(j, "alpha", what);
  if (j.contains("n_step")) c.n_step = get_count(j, "n_step", what);
  if (j.contains("n_temp")) c.n_temp = get_count(j, "n_temp", what);
  maybe(j, "eta", what, c.eta);
  maybe(j, "seed", what, c.seed);
  c.validate();
  return c;
}

DetectorModel detector_from_json(const json& j) {
  constexpr std::string_view what = "camera";
  auto profile = [](const std::string& name) {
    if (name == "baseline") return DetectorModel::baseline_camera();
    if (name == "ideal") return DetectorModel::ideal();
    throw ConfigError("camera profile must be 'baseline' or 'ideal', got '" + name + "'");
  };
  if (j.is_string()) return profile(j.get<std::string>());
  reject_unknown(j, what,
                 {"profile", "full_well", "adc_bits", "dark_current", "exposure", "readout_noise",
                  "frames_averaged", "black_level", "shot_noise", "quantize"});
  DetectorModel d = profile(j.value("profile", std::string("baseline")));
  maybe(j, "full_well", what, d.full_well);
  maybe(j, "adc_bits", what, d.adc_bits);
  maybe(j, "dark_current", what, d.dark_current);
  maybe(j, "exposure", what, d.exposure);
  maybe(j, "readout_noise", what, d.readout_noise);
  maybe(j, "frames_averaged", what, d.frames_averaged);
  maybe(j, "black_level", what, d.black_level);
  maybe(j, "shot_noise", what, d.shot_noise);
  maybe(j, "quantize", what, d.quantize);
  d.validate();
  return d;
}

json detector_to_json(const DetectorModel& d) {
  return {{"full_well", d.full_well},       {"adc_bits", d.adc_bits},
          {"dark_current", d.dark_current}, {"exposure", d.exposure},
          {"readout_noise", d.readout_noise}, {"frames_averaged", d.frames_averaged},
          {"black_level", d.black_level},   {"shot_noise", d.shot_noise},
          {"quantize", d.quantize}};
}

PerfModel perf_from_json(const json& j) {
  constexpr std::string_view what = "perf";
  if (j.is_string()) {
    if (j.get<std::string>() == "baseline") return PerfModel::baseline_setup();
    throw ConfigError("perf profile must be 'baseline'");
  }
  reject_unknown(j, what, {"t_p", "t_u", "t_d", "t_e", "power"});
  PerfModel p = PerfModel::baseline_setup();
  maybe(j, "t_p", what, p.t_p);
  maybe(j, "t_u", what, p.t_u);
  maybe(j, "t_d", what, p.t_d);
  maybe(j, "t_e", what, p.t_e);
  maybe(j, "power", what, p.power);
  p.validate();
  return p;
}

json perf_to_json(const PerfModel& p) {
  return {{"t_p", p.t_p}, {"t_u", p.t_u}, {"t_d", p.t_d}, {"t_e", p.t_e}, {"power", p.power}};
}

DeskGeometry PhysicalConfig::geometry(std::size_t n) const {
  return desk_geometry(n, pixels, pitch, wavelength, l01, l2p_ratio);
}

PhysicalConfig physical_from_json(const json& j) {
  constexpr std::string_view what = "geometry";
  reject_unknown(j, what,
                 {"pixels", "pitch", "wavelength", "l01", "l2p_ratio", "readout_pixels", "pixel"});
  PhysicalConfig p;
  if (j.contains("pixels")) p.pixels = get_count(j, "pixels", what);
  maybe(j, "pitch", what, p.pitch);
  maybe(j, "wavelength", what, p.wavelength);
  maybe(j, "l01", what, p.l01);
  maybe(j, "l2p_ratio", what, p.l2p_ratio);
  if (j.contains("readout_pixels")) p.readout_pixels = get_count(j, "readout_pixels", what);
  if (p.readout_pixels != 1 && p.readout_pixels != 9) {
    throw ConfigError("geometry: readout_pixels must be 1 or 9");
  }
  if (j.contains("pixel")) {
    const auto s = get<std::string>(j, "pixel", what);
    if (s == "rect") p.pixel = PixelModel::kRect;
    else if (s == "point") p.pixel = PixelModel::kPoint;
    else throw ConfigError("geometry: pixel must be 'rect' or 'point'");
  }
  return p;
}

json physical_to_json(const PhysicalConfig& p) {
  return {{"pixels", p.pixels},
          {"pitch", p.pitch},
          {"wavelength", p.wavelength},
          {"l01", p.l01},
          {"l2p_ratio", p.l2p_ratio},
          {"readout_pixels", p.readout_pixels},
          {"pixel", p.pixel == PixelModel::kRect ? "rect" : "point"}};
}

std::string_view tier_name(Tier t) {
  switch (t) {
    case Tier::kExact: return "exact";
    case Tier::kIdeal: return "ideal";
    case Tier::kNoisy: return "noisy";
    case Tier::kPhysical: return "physical";
  }
  return "?";
}

Tier parse_tier(std::string_view s) {
  for (Tier t : {Tier::kExact, Tier::kIdeal, Tier::kNoisy, Tier::kPhysical}) {
    if (tier_name(t) == s) return t;
  }
  throw ConfigError("tier must be one of exact|ideal|noisy|physical, got '" + std::string(s) + "'");
}

IsingModel ProblemSource::load() const {
  if (path) return load_problem(*path);
  if (generator == "mobius-ladder") return mobius_ladder(n);
  if (generator == "random-glass") return random_glass(n, seed);
  throw ConfigError("problem generator must be 'mobius-ladder' or 'random-glass', got '" +
                    generator + "'");
}

std::string ProblemSource::label() const {
  if (path) return path->filename().string();
  std::string s = generator + "-" + std::to_string(n);
  if (generator == "random-glass") s += "-s" + std::to_string(seed);
  return s;
}

ProblemSource problem_source_from_json(const json& j, const fs::path& base) {
  ProblemSource p;
  if (j.is_string()) {
    fs::path path = j.get<std::string>();
    if (path.is_relative()) path = base / path;
    if (!fs::exists(path)) throw ConfigError("problem file not found: " + path.string());
    p.path = path;
    return p;
  }
  constexpr std::string_view what = "problem";
  reject_unknown(j, what, {"generator", "n", "seed"});
  p.generator = get<std::string>(j, "generator", what);
  p.n = get_count(j, "n", what);
  maybe(j, "seed", what, p.seed);
  if (p.generator != "mobius-ladder" && p.generator != "random-glass") {
    throw ConfigError("problem generator must be 'mobius-ladder' or 'random-glass', got '" +
                      p.generator + "'");
  }
  return p;
}

void RunManifest::validate() const {
  if (runs == 0) throw ConfigError("manifest: runs must be >= 1");
  if (tier == Tier::kNoisy && !camera) {
    throw ConfigError("manifest: the noisy tier needs a 'camera' entry (e.g. \"camera\": \"baseline\")");
  }
  if (tier == Tier::kPhysical && !geometry) {
    throw ConfigError("manifest: the physical tier needs a 'geometry' entry (use {} for defaults)");
  }
  if (reference_runs == 0) throw ConfigError("manifest: reference_runs must be >= 1");
  anneal.validate();
}

std::uint64_t RunManifest::hash() const {
  json d = document;
  // neither where results go nor the worker count changes them
  if (d.is_object()) {
    d.erase("output_dir");
    d.erase("threads");
  }
  return fnv1a(d.dump());
}

RunManifest manifest_from_json(const json& j, const fs::path& base) {
  constexpr std::string_view what = "manifest";
  reject_unknown(j, what,
                 {"problem", "tier", "anneal", "runs", "threads", "camera", "geometry",
                  "output_dir", "seed", "reference_h", "reference_runs", "reference_anneal",
                  "exposure_reference"});
  RunManifest m;
  m.document = j;
  if (!j.contains("problem")) throw ConfigError("manifest: 'problem' is required");
  m.problem = problem_source_from_json(j.at("problem"), base);
  m.tier = parse_tier(get<std::string>(j, "tier", what));
  if (j.contains("anneal")) {
    if (j.at("anneal").contains("seed")) {
      throw ConfigError("manifest: set 'seed' at the top level, not inside 'anneal'");
    }
    m.anneal = anneal_config_from_json(j.at("anneal"));
  }
  if (j.contains("runs")) m.runs = get_count(j, "runs", what);
  if (j.contains("threads")) m.threads = get_count(j, "threads", what);
  if (j.contains("camera")) m.camera = detector_from_json(j.at("camera"));
  if (j.contains("geometry")) m.geometry = physical_from_json(j.at("geometry"));
  fs::path out = j.value("output_dir", std::string("results"));
  m.output_dir = out.is_relative() ? base / out : out;
  maybe(j, "seed", what, m.seed);
  m.anneal.seed = m.seed;
  if (j.contains("reference_h")) m.reference_h = get<double>(j, "reference_h", what);
  if (j.contains("reference_runs")) m.reference_runs = get_count(j, "reference_runs", what);
  if (j.contains("reference_anneal")) {
    m.reference_anneal = anneal_config_from_json(j.at("reference_anneal"));
  }
  if (j.contains("exposure_reference")) {
    m.exposure_reference = get<double>(j, "exposure_reference", what);
  }
  m.validate();
  return m;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunManifest load_manifest(const fs::path& path) {
  return manifest_from_json(read_json_file(path), path.parent_path());
}

}  // namespace peidia
