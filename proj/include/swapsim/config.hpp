// config.hpp
//
// Experiment configuration: a single JSON document with unit-suffixed keys
// (rate_hz, duration_s, ...).  Every report embeds the resolved config so a
// run can be reproduced from its own output.  The seed is always explicit;
// there is no wall-clock default.

#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "swapsim/measurement.hpp"
#include "swapsim/state_algebra.hpp"
#include "swapsim/tomography.hpp"

namespace swapsim {

inline constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HomScanConfig {
  double center_um = 11.42;
  double width_um = 10.0;
  double baseline_rate_hz = 2.0;
  double scan_min_um = -40.0;
  double scan_max_um = 60.0;
  int points = 51;
  double dwell_s = 60.0;
};

struct PurifyConfig {
  std::string filter = "x";  // "x" or "singlet"
  int levels = 2;            // N for the |x> filter
  int mode_a = -1, mode_b = 1;  // singlet filter modes
};

struct ExperimentConfig {
  int truncation = 2;
  std::vector<Complex> spectrum;  // c_0..c_N, normalized inside the pipeline
  double visibility = 0.71;
  double peak_fourfold_rate_hz = 4.0;  // 100x the 0.04 Hz lab-scale rate
  double duration_s = 600.0;
  RatesConfig rates;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> subspaces;
  std::string output_dir = ".";
  std::string reconstruction_method = "mle";  // "mle" or "linear"
  int bootstrap_resamples = 200;
  std::vector<double> visibility_grid;
  HomScanConfig hom;
  PurifyConfig purify;
  std::vector<std::string> matrix_files;  // optional assemble4d inputs

  SpiralSpectrum spiral() const { return SpiralSpectrum{spectrum}; }

  ReconstructionMethod method() const {
    if (reconstruction_method == "mle") return ReconstructionMethod::mle;
    if (reconstruction_method == "linear") return ReconstructionMethod::linear;
    throw ConfigError("reconstruction_method must be 'mle' or 'linear'");
  }

  void validate() const {
    if (truncation < 1) throw ConfigError("truncation must be >= 1");
    if (spectrum.size() != static_cast<std::size_t>(truncation) + 1)
      throw ConfigError("spectrum must list c_0..c_N for truncation N");
    double nrm = 0.0;
    for (const auto& c : spectrum) nrm += std::norm(c);
    if (nrm <= 0.0) throw ConfigError("spectrum must not be all zero");
    if (visibility < 0.0 || visibility > 1.0) throw ConfigError("visibility must be in [0,1]");
    if (peak_fourfold_rate_hz < 0.0) throw ConfigError("peak_fourfold_rate_hz must be >= 0");
    if (duration_s <= 0.0) throw ConfigError("duration_s must be > 0");
    for (double r : {rates.singles_a_hz, rates.singles_b_hz, rates.singles_c_hz,
                     rates.singles_d_hz, rates.pair_ab_hz, rates.pair_cd_hz, rates.pair_ac_hz,
                     rates.pair_bd_hz})
      if (r < 0.0) throw ConfigError("background rates must be >= 0");
    if (rates.rep_rate_hz <= 0.0) throw ConfigError("rep_rate_hz must be > 0");
    for (auto [a, b] : subspaces) {
      if (a == b) throw ConfigError("subspaces must pair distinct modes");
      if (std::abs(a) > truncation || std::abs(b) > truncation)
        throw ConfigError("subspace mode outside the configured truncation");
    }
    if (bootstrap_resamples < 100) throw ConfigError("bootstrap_resamples must be >= 100");
    for (double v : visibility_grid)
      if (v < 0.0 || v > 1.0) throw ConfigError("visibility_grid values must be in [0,1]");
    if (hom.width_um <= 0.0) throw ConfigError("hom.width_um must be > 0");
    if (hom.baseline_rate_hz <= 0.0) throw ConfigError("hom.baseline_rate_hz must be > 0");
    if (hom.points < 5) throw ConfigError("hom.points must be >= 5");
    if (hom.scan_max_um <= hom.scan_min_um)
      throw ConfigError("hom scan range must have scan_max_um > scan_min_um");
    if (hom.dwell_s <= 0.0) throw ConfigError("hom.dwell_s must be > 0");
    if (purify.filter != "x" && purify.filter != "singlet")
      throw ConfigError("purify.filter must be 'x' or 'singlet'");
    if (purify.filter == "x" && (purify.levels < 1 || purify.levels > truncation))
      throw ConfigError("purify.levels must be in [1, truncation]");
    if (purify.filter == "singlet" && purify.mode_a == purify.mode_b)
      throw ConfigError("purify singlet filter needs distinct modes");
  }
};

namespace detail {

inline Complex complex_from_json(const nlohmann::json& j, const char* what) {
  if (j.is_number()) return Complex{j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Complex{j[0].get<double>(), j[1].get<double>()};
  throw ConfigError(std::string(what) + ": expected a number or [re, im]");
}

inline nlohmann::ordered_json complex_to_json(const Complex& c) {
  if (c.imag() == 0.0) return c.real();
  return nlohmann::ordered_json::array({c.real(), c.imag()});
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline std::vector<std::pair<int, int>> default_subspaces() {
  return {{-1, 1}, {-2, 2}, {-2, -1}, {-2, 1}, {-1, 2}, {1, 2}};
}

inline std::vector<Complex> default_spectrum() {
  // |c1|^2 / |c2|^2 = 2, matching the 4:1 ratio of the two subspace rates
  return {Complex{0.0, 0.0}, Complex{std::sqrt(2.0 / 3.0), 0.0},
          Complex{std::sqrt(1.0 / 3.0), 0.0}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  ExperimentConfig cfg;
  cfg.truncation = detail::get_or(j, "truncation", 2);

  if (j.contains("spectrum")) {
    if (!j.at("spectrum").is_array()) throw ConfigError("spectrum must be an array");
    for (const auto& e : j.at("spectrum")) cfg.spectrum.push_back(detail::complex_from_json(e, "spectrum"));
  } else {
    cfg.spectrum = default_spectrum();
  }

  cfg.visibility = detail::get_or(j, "visibility", 0.71);
  cfg.peak_fourfold_rate_hz = detail::get_or(j, "peak_fourfold_rate_hz", 4.0);
  cfg.duration_s = detail::get_or(j, "duration_s", 600.0);

  if (j.contains("singles_hz")) {
    const auto& s = j.at("singles_hz");
    cfg.rates.singles_a_hz = detail::get_or(s, "a", 0.0);
    cfg.rates.singles_b_hz = detail::get_or(s, "b", 0.0);
    cfg.rates.singles_c_hz = detail::get_or(s, "c", 0.0);
    cfg.rates.singles_d_hz = detail::get_or(s, "d", 0.0);
  }
  if (j.contains("pair_rates_hz")) {
    const auto& p = j.at("pair_rates_hz");
    cfg.rates.pair_ab_hz = detail::get_or(p, "ab", 0.0);
    cfg.rates.pair_cd_hz = detail::get_or(p, "cd", 0.0);
    cfg.rates.pair_ac_hz = detail::get_or(p, "ac", 0.0);
    cfg.rates.pair_bd_hz = detail::get_or(p, "bd", 0.0);
  }
  cfg.rates.rep_rate_hz = detail::get_or(j, "rep_rate_hz", 8.0e7);

  if (!j.contains("seed")) throw ConfigError("seed is required (no wall-clock default)");
  cfg.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("subspaces")) {
    for (const auto& s : j.at("subspaces")) {
      if (!s.is_array() || s.size() != 2) throw ConfigError("subspaces entries must be [a, b]");
      cfg.subspaces.push_back({s[0].get<int>(), s[1].get<int>()});
    }
  } else {
    cfg.subspaces = default_subspaces();
  }

  cfg.output_dir = detail::get_or<std::string>(j, "output_dir", ".");
  cfg.reconstruction_method = detail::get_or<std::string>(j, "reconstruction_method", "mle");
  cfg.bootstrap_resamples = detail::get_or(j, "bootstrap_resamples", 200);

  if (j.contains("visibility_grid"))
    for (const auto& v : j.at("visibility_grid")) cfg.visibility_grid.push_back(v.get<double>());

  if (j.contains("hom")) {
    const auto& h = j.at("hom");
    cfg.hom.center_um = detail::get_or(h, "center_um", cfg.hom.center_um);
    cfg.hom.width_um = detail::get_or(h, "width_um", cfg.hom.width_um);
    cfg.hom.baseline_rate_hz = detail::get_or(h, "baseline_rate_hz", cfg.hom.baseline_rate_hz);
    cfg.hom.scan_min_um = detail::get_or(h, "scan_min_um", cfg.hom.scan_min_um);
    cfg.hom.scan_max_um = detail::get_or(h, "scan_max_um", cfg.hom.scan_max_um);
    cfg.hom.points = detail::get_or(h, "points", cfg.hom.points);
    cfg.hom.dwell_s = detail::get_or(h, "dwell_s", cfg.hom.dwell_s);
  }

  if (j.contains("purify")) {
    const auto& p = j.at("purify");
    cfg.purify.filter = detail::get_or<std::string>(p, "filter", "x");
    cfg.purify.levels = detail::get_or(p, "levels", 2);
    if (p.contains("modes")) {
      const auto& m = p.at("modes");
      if (!m.is_array() || m.size() != 2) throw ConfigError("purify.modes must be [a, b]");
      cfg.purify.mode_a = m[0].get<int>();
      cfg.purify.mode_b = m[1].get<int>();
    }
  }

  if (j.contains("assemble4d")) {
    const auto& a = j.at("assemble4d");
    if (a.contains("matrix_files"))
      for (const auto& f : a.at("matrix_files"))
        cfg.matrix_files.push_back(f.get<std::string>());
  }

  cfg.validate();
  return cfg;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["truncation"] = cfg.truncation;
  j["spectrum"] = nlohmann::ordered_json::array();
  for (const auto& c : cfg.spectrum) j["spectrum"].push_back(detail::complex_to_json(c));
  j["visibility"] = cfg.visibility;
  j["peak_fourfold_rate_hz"] = cfg.peak_fourfold_rate_hz;
  j["duration_s"] = cfg.duration_s;
  j["singles_hz"] = {{"a", cfg.rates.singles_a_hz},
                     {"b", cfg.rates.singles_b_hz},
                     {"c", cfg.rates.singles_c_hz},
                     {"d", cfg.rates.singles_d_hz}};
  j["pair_rates_hz"] = {{"ab", cfg.rates.pair_ab_hz},
                        {"cd", cfg.rates.pair_cd_hz},
                        {"ac", cfg.rates.pair_ac_hz},
                        {"bd", cfg.rates.pair_bd_hz}};
  j["rep_rate_hz"] = cfg.rates.rep_rate_hz;
  j["seed"] = cfg.seed;
  j["subspaces"] = nlohmann::ordered_json::array();
  for (auto [a, b] : cfg.subspaces) j["subspaces"].push_back({a, b});
  j["output_dir"] = cfg.output_dir;
  j["reconstruction_method"] = cfg.reconstruction_method;
  j["bootstrap_resamples"] = cfg.bootstrap_resamples;
  if (!cfg.visibility_grid.empty()) j["visibility_grid"] = cfg.visibility_grid;
  j["hom"] = {{"center_um", cfg.hom.center_um},
              {"width_um", cfg.hom.width_um},
              {"baseline_rate_hz", cfg.hom.baseline_rate_hz},
              {"scan_min_um", cfg.hom.scan_min_um},
              {"scan_max_um", cfg.hom.scan_max_um},
              {"points", cfg.hom.points},
              {"dwell_s", cfg.hom.dwell_s}};
  j["purify"] = {{"filter", cfg.purify.filter},
                 {"levels", cfg.purify.levels},
                 {"modes", {cfg.purify.mode_a, cfg.purify.mode_b}}};
  if (!cfg.matrix_files.empty()) j["assemble4d"] = {{"matrix_files", cfg.matrix_files}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace swapsim
