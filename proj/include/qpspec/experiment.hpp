#pragma once

// Experiment configuration shared by the command-line tool and its tests.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "serialization.hpp"

namespace qpspec {

struct EnergyGridConfig {
  double min = -4.0;
  double max = 4.0;
  std::size_t count = 200;
  double imag = 0.0;

  /// count equispaced points on [min, max] (just min when count == 1), shifted by i*imag.
  std::vector<cplx> points() const {
    detail::require(count >= 1, "energy.count must be >= 1");
    detail::require(count == 1 || max > min, "energy.max must exceed energy.min");
    std::vector<cplx> out;
    for (std::size_t i = 0; i < count; ++i) {
      const double re = count == 1 ? min
                                   : min + (max - min) * static_cast<double>(i) /
                                               static_cast<double>(count - 1);
      out.emplace_back(re, imag);
    }
    return out;
  }
};

struct LyapunovConfig {
  std::string method = "growth";
  double X = 1000.0;
  double h = 0.005;
  std::string omega_scheme = "grid";
  std::size_t omega_count = 1;
  std::uint64_t seed = 0;
  double m_tol = 1e-6;
};

struct MfunConfig {
  double X = 0.0;  // 0: automatic horizon
  double tol = 1e-6;
};

struct MRConfig {
  double R = 2.0;
  double tau = 0.05;
  std::size_t grid_n = 400;
};

struct CouplingConfig {
  double Lambda = 1.0;
  std::size_t lambda_n = 4;
};

struct PerturbConfig {
  double eps = 0.4;
  std::size_t n = 4;
  std::size_t itinerary_symbols = 10000;
  double ell_factor = 3.0;
  std::size_t max_period = 200;
  std::size_t sup_grid_n = 128;
  std::size_t scan_per_axis = 16;
  bool emit_boxes = false;
};

struct MollifyConfig {
  std::vector<double> scales{0.1, 0.05, 0.025, 0.0125};
  int order = 16;
  std::size_t norm_grid_n = 64;
  std::string target = "fepsn";  // or "f"
  bool with_coupling = false;
};

struct PiecesConfig {
  std::string input;          // itinerary JSON lines; empty: build from the perturb section
  double ell = 0.0;           // 0: ell_factor * max duration
  std::size_t prefix_len = 0; // 0: whole sequence
  std::size_t max_period = 200;
};

struct MinimalityConfig {
  long bound = 50;
  double tol = 1e-9;
};

struct ExperimentConfig {
  FlowParams flow{{1.0, std::sqrt(2.0)}, {0.0, 0.0}};
  SamplingFunction f = SamplingFunction::trig({{{1, 0}, 1.0, 0.0}, {{0, 1}, 1.0, 0.0}});
  EnergyGridConfig energy;
  LyapunovConfig lyapunov;
  MfunConfig mfun;
  MRConfig mr;
  CouplingConfig coupling;
  PerturbConfig perturb;
  MollifyConfig mollify;
  PiecesConfig pieces;
  MinimalityConfig minimality;
  std::string output_dir = "out";

  LyapunovParams lyapunov_params(std::size_t workers) const {
    LyapunovParams lp;
    lp.X = lyapunov.X;
    lp.h = lyapunov.h;
    lp.m_tol = lyapunov.m_tol;
    lp.workers = workers;
    lp.omegas = sample_omegas(flow, lyapunov.omega_count, parse_sampling_scheme(lyapunov.omega_scheme),
                              lyapunov.seed);
    return lp;
  }
};

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void reject_unknown(const json& j, const std::string& where, std::set<std::string> allowed) {
  detail::require(j.is_object(), where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    detail::require(allowed.count(it.key()) > 0, "unknown key '" + it.key() + "' in " + where);
}

}  // namespace detail

/// Fully resolved configuration; every default is written out explicitly.
inline json to_json(const ExperimentConfig& c) {
  return json{
      {"flow", to_json(c.flow)},
      {"f", to_json(c.f)},
      {"energy", {{"min", c.energy.min}, {"max", c.energy.max}, {"count", c.energy.count}, {"imag", c.energy.imag}}},
      {"lyapunov",
       {{"method", c.lyapunov.method},
        {"X", c.lyapunov.X},
        {"h", c.lyapunov.h},
        {"omega_scheme", c.lyapunov.omega_scheme},
        {"omega_count", c.lyapunov.omega_count},
        {"seed", c.lyapunov.seed},
        {"m_tol", c.lyapunov.m_tol}}},
      {"mfun", {{"X", c.mfun.X}, {"tol", c.mfun.tol}}},
      {"mr", {{"R", c.mr.R}, {"tau", c.mr.tau}, {"grid_n", c.mr.grid_n}}},
      {"coupling", {{"Lambda", c.coupling.Lambda}, {"lambda_n", c.coupling.lambda_n}}},
      {"perturb",
       {{"eps", c.perturb.eps},
        {"n", c.perturb.n},
        {"itinerary_symbols", c.perturb.itinerary_symbols},
        {"ell_factor", c.perturb.ell_factor},
        {"max_period", c.perturb.max_period},
        {"sup_grid_n", c.perturb.sup_grid_n},
        {"scan_per_axis", c.perturb.scan_per_axis},
        {"emit_boxes", c.perturb.emit_boxes}}},
      {"mollify",
       {{"scales", c.mollify.scales},
        {"order", c.mollify.order},
        {"norm_grid_n", c.mollify.norm_grid_n},
        {"target", c.mollify.target},
        {"with_coupling", c.mollify.with_coupling}}},
      {"pieces",
       {{"input", c.pieces.input},
        {"ell", c.pieces.ell},
        {"prefix_len", c.pieces.prefix_len},
        {"max_period", c.pieces.max_period}}},
      {"minimality", {{"bound", c.minimality.bound}, {"tol", c.minimality.tol}}},
      {"output", {{"dir", c.output_dir}}}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    detail::reject_unknown(j, "config", {"flow", "f", "energy", "lyapunov", "mfun", "mr", "coupling", "perturb",
                                         "mollify", "pieces", "minimality", "output"});
    if (j.contains("flow")) c.flow = flow_from_json(j.at("flow"));
    if (j.contains("f")) c.f = function_from_json(j.at("f"));
    if (j.contains("energy")) {
      const auto& e = j.at("energy");
      detail::reject_unknown(e, "energy", {"min", "max", "count", "imag"});
      detail::read_opt(e, "min", c.energy.min);
      detail::read_opt(e, "max", c.energy.max);
      detail::read_opt(e, "count", c.energy.count);
      detail::read_opt(e, "imag", c.energy.imag);
    }
    if (j.contains("lyapunov")) {
      const auto& l = j.at("lyapunov");
      detail::reject_unknown(l, "lyapunov", {"method", "X", "h", "omega_scheme", "omega_count", "seed", "m_tol"});
      detail::read_opt(l, "method", c.lyapunov.method);
      detail::read_opt(l, "X", c.lyapunov.X);
      detail::read_opt(l, "h", c.lyapunov.h);
      detail::read_opt(l, "omega_scheme", c.lyapunov.omega_scheme);
      detail::read_opt(l, "omega_count", c.lyapunov.omega_count);
      detail::read_opt(l, "seed", c.lyapunov.seed);
      detail::read_opt(l, "m_tol", c.lyapunov.m_tol);
    }
    if (j.contains("mfun")) {
      const auto& m = j.at("mfun");
      detail::reject_unknown(m, "mfun", {"X", "tol"});
      detail::read_opt(m, "X", c.mfun.X);
      detail::read_opt(m, "tol", c.mfun.tol);
    }
    if (j.contains("mr")) {
      const auto& m = j.at("mr");
      detail::reject_unknown(m, "mr", {"R", "tau", "grid_n"});
      detail::read_opt(m, "R", c.mr.R);
      detail::read_opt(m, "tau", c.mr.tau);
      detail::read_opt(m, "grid_n", c.mr.grid_n);
    }
    if (j.contains("coupling")) {
      const auto& m = j.at("coupling");
      detail::reject_unknown(m, "coupling", {"Lambda", "lambda_n"});
      detail::read_opt(m, "Lambda", c.coupling.Lambda);
      detail::read_opt(m, "lambda_n", c.coupling.lambda_n);
    }
    if (j.contains("perturb")) {
      const auto& m = j.at("perturb");
      detail::reject_unknown(m, "perturb", {"eps", "n", "itinerary_symbols", "ell_factor", "max_period",
                                            "sup_grid_n", "scan_per_axis", "emit_boxes"});
      detail::read_opt(m, "eps", c.perturb.eps);
      detail::read_opt(m, "n", c.perturb.n);
      detail::read_opt(m, "itinerary_symbols", c.perturb.itinerary_symbols);
      detail::read_opt(m, "ell_factor", c.perturb.ell_factor);
      detail::read_opt(m, "max_period", c.perturb.max_period);
      detail::read_opt(m, "sup_grid_n", c.perturb.sup_grid_n);
      detail::read_opt(m, "scan_per_axis", c.perturb.scan_per_axis);
      detail::read_opt(m, "emit_boxes", c.perturb.emit_boxes);
    }
    if (j.contains("mollify")) {
      const auto& m = j.at("mollify");
      detail::reject_unknown(m, "mollify", {"scales", "order", "norm_grid_n", "target", "with_coupling"});
      detail::read_opt(m, "scales", c.mollify.scales);
      detail::read_opt(m, "order", c.mollify.order);
      detail::read_opt(m, "norm_grid_n", c.mollify.norm_grid_n);
      detail::read_opt(m, "target", c.mollify.target);
      detail::read_opt(m, "with_coupling", c.mollify.with_coupling);
    }
    if (j.contains("pieces")) {
      const auto& m = j.at("pieces");
      detail::reject_unknown(m, "pieces", {"input", "ell", "prefix_len", "max_period"});
      detail::read_opt(m, "input", c.pieces.input);
      detail::read_opt(m, "ell", c.pieces.ell);
      detail::read_opt(m, "prefix_len", c.pieces.prefix_len);
      detail::read_opt(m, "max_period", c.pieces.max_period);
    }
    if (j.contains("minimality")) {
      const auto& m = j.at("minimality");
      detail::reject_unknown(m, "minimality", {"bound", "tol"});
      detail::read_opt(m, "bound", c.minimality.bound);
      detail::read_opt(m, "tol", c.minimality.tol);
    }
    if (j.contains("output")) {
      const auto& m = j.at("output");
      detail::reject_unknown(m, "output", {"dir"});
      detail::read_opt(m, "dir", c.output_dir);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  parse_sampling_scheme(c.lyapunov.omega_scheme);
  parse_lyapunov_method(c.lyapunov.method);
  detail::require(c.mollify.target == "fepsn" || c.mollify.target == "f",
                  "mollify.target must be \"fepsn\" or \"f\"");
  const std::size_t hint = c.f.dim_hint();
  detail::require(hint == 0 || hint == c.flow.dim(), "config: f and flow have different dimensions");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a of the resolved config without its output section.
inline std::string config_fingerprint(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("output");
  return fnv1a_hex(j.dump());
}

}  // namespace qpspec
