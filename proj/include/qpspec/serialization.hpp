#pragma once

// JSON / CSV surfaces (nlohmann/json).

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "errors.hpp"
#include "perturb.hpp"
#include "pieces.hpp"
#include "sampling.hpp"
#include "torus_flow.hpp"
#include "zero_measure.hpp"

namespace qpspec {

using json = nlohmann::json;

inline json to_json(const FlowParams& p) {
  return json{{"d", p.dim()},
              {"alpha", std::vector<double>(p.alpha().begin(), p.alpha().end())},
              {"omega", std::vector<double>(p.omega().begin(), p.omega().end())}};
}

inline FlowParams flow_from_json(const json& j) {
  try {
    auto alpha = j.at("alpha").get<std::vector<double>>();
    std::vector<double> omega =
        j.contains("omega") ? j.at("omega").get<std::vector<double>>() : std::vector<double>(alpha.size(), 0.0);
    if (j.contains("d"))
      detail::require(j.at("d").get<std::size_t>() == alpha.size(), "flow: d does not match alpha");
    return FlowParams(std::move(alpha), std::move(omega));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("flow: ") + e.what());
  }
}

inline json to_json(const BoxPartition& part) {
  return json{{"flow", to_json(part.flow())},
              {"counts", part.counts()},
              {"pivot", part.pivot()},
              {"ell", part.ell()},
              {"delta", part.delta()},
              {"boxes", part.size()}};
}

inline BoxPartition partition_from_json(const json& j) {
  try {
    return BoxPartition(flow_from_json(j.at("flow")), j.at("counts").get<std::vector<std::size_t>>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("partition: ") + e.what());
  }
}

inline json to_json(const SamplingFunction& f) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, fn::Constant>) {
          return json{{"type", "constant"}, {"value", v.value}};
        } else if constexpr (std::is_same_v<T, fn::TrigPoly>) {
          json terms = json::array();
          for (const auto& t : v.terms)
            terms.push_back(json{{"k", t.k}, {"cos", t.cos_coeff}, {"sin", t.sin_coeff}});
          return json{{"type", "trigpoly"}, {"terms", terms}};
        } else if constexpr (std::is_same_v<T, fn::BoxStep>) {
          json profs = json::array();
          for (const auto& pr : *v.profiles) profs.push_back(json{{"mid", pr.mid}, {"amp", pr.amp}});
          return json{{"type", "boxstep"}, {"partition", to_json(*v.partition)}, {"profiles", profs}};
        } else if constexpr (std::is_same_v<T, fn::Scaled>) {
          return json{{"type", "scaled"}, {"lambda", v.lambda}, {"inner", to_json(*v.inner)}};
        } else {
          return json{{"type", "mollified"}, {"eps", v.eps}, {"order", v.order}, {"inner", to_json(*v.inner)}};
        }
      },
      f.variant());
}

inline SamplingFunction function_from_json(const json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "constant") return SamplingFunction::constant(j.at("value").get<double>());
    if (type == "trigpoly") {
      std::vector<fn::TrigTerm> terms;
      for (const auto& t : j.at("terms"))
        terms.push_back({t.at("k").get<std::vector<long>>(), t.value("cos", 0.0), t.value("sin", 0.0)});
      return SamplingFunction::trig(std::move(terms));
    }
    if (type == "scaled")
      return SamplingFunction::scaled(j.at("lambda").get<double>(), function_from_json(j.at("inner")));
    if (type == "mollified")
      return mollify(function_from_json(j.at("inner")), j.at("eps").get<double>(), j.value("order", 16));
    if (type == "boxstep") {
      auto part = std::make_shared<const BoxPartition>(partition_from_json(j.at("partition")));
      std::vector<BoxProfile> profs;
      for (const auto& pr : j.at("profiles"))
        profs.push_back({pr.at("mid").get<double>(), pr.at("amp").get<double>(), part->ell_d()});
      return SamplingFunction::box_step(part, std::move(profs));
    }
    throw ConfigError("unknown sampling function type: " + type);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sampling function: ") + e.what());
  }
}

/// Trace CSV with columns x,V.
inline std::string trace_csv(const PotentialTrace& tr) {
  std::ostringstream os;
  os << "x,V\n";
  for (std::size_t i = 0; i < tr.values.size(); ++i)
    os << fmt17(static_cast<double>(i) * tr.h) << ',' << fmt17(tr.values[i]) << '\n';
  return os.str();
}

inline json to_json(const PieceProfile& p) {
  json j{{"reflected", p.reflected}};
  switch (p.kind) {
    case PieceProfile::Kind::constant:
      j["kind"] = "constant";
      j["value"] = p.mid;
      break;
    case PieceProfile::Kind::raised_cosine:
      j["kind"] = "raised_cosine";
      j["mid"] = p.mid;
      j["amp"] = p.amp;
      break;
    case PieceProfile::Kind::step:
      j["kind"] = "step";
      j["breaks"] = p.breaks;
      j["values"] = p.values;
      break;
  }
  return j;
}

inline PieceProfile profile_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  PieceProfile p;
  if (kind == "constant") p = PieceProfile::constant(j.at("value").get<double>());
  else if (kind == "raised_cosine")
    p = PieceProfile::raised_cosine(j.at("mid").get<double>(), j.at("amp").get<double>());
  else if (kind == "step")
    p = PieceProfile::step(j.at("breaks").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
  else
    throw ConfigError("unknown piece profile kind: " + kind);
  p.reflected = j.value("reflected", false);
  return p;
}

/// JSON lines: an alphabet header record, then one {"sym","dur","enter_x"} per piece.
inline std::string sequence_jsonl(const PieceSequence& seq, const std::vector<double>& enter_x = {}) {
  json alphabet = json::array();
  for (const auto& p : seq.alphabet.pieces())
    alphabet.push_back(json{{"id", p.id}, {"dur", p.duration}, {"profile", to_json(p.profile)}});
  std::ostringstream os;
  os << json{{"alphabet", alphabet}, {"start_offset", seq.start_offset}}.dump() << '\n';
  double x = seq.start_offset;
  for (std::size_t i = 0; i < seq.symbols.size(); ++i) {
    const double ex = i < enter_x.size() ? enter_x[i] : x;
    os << json{{"sym", seq.symbols[i]}, {"dur", seq.duration(i)}, {"enter_x", ex}}.dump() << '\n';
    x += seq.duration(i);
  }
  return os.str();
}

inline PieceSequence sequence_from_jsonl(std::istream& in) {
  PieceSequence seq;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto j = json::parse(line);
      if (!header) {
        for (const auto& a : j.at("alphabet")) {
          const int id = seq.alphabet.push_unchecked(a.at("dur").get<double>(), profile_from_json(a.at("profile")));
          detail::require(id == a.at("id").get<int>(), "itinerary: alphabet ids must be 0..n-1 in order");
        }
        seq.start_offset = j.value("start_offset", 0.0);
        header = true;
        continue;
      }
      const int sym = j.at("sym").get<int>();
      detail::require(sym >= 0 && static_cast<std::size_t>(sym) < seq.alphabet.size(),
                      "itinerary line " + std::to_string(lineno) + ": symbol outside the alphabet");
      if (j.contains("dur"))
        detail::require(std::abs(j.at("dur").get<double>() - seq.alphabet[sym].duration) <= 1e-9,
                        "itinerary line " + std::to_string(lineno) + ": duration disagrees with alphabet");
      seq.symbols.push_back(sym);
    }
  } catch (const json::exception& e) {
    throw ConfigError("itinerary line " + std::to_string(lineno) + ": " + e.what());
  }
  detail::require(header, "itinerary: missing alphabet header");
  return seq;
}

inline json to_json(const MREstimate& est) {
  return json{{"R", est.R}, {"tau", est.tau}, {"grid_n", est.grid_n}, {"measure", est.measure},
              {"failures", est.failures}};
}

inline std::string mr_flags_csv(const MREstimate& est) {
  std::ostringstream os;
  os << "E,L,flag\n";
  for (std::size_t i = 0; i < est.energies.size(); ++i)
    os << fmt17(est.energies[i]) << ',' << fmt17(est.lyapunov[i]) << ',' << (est.flags[i] ? 1 : 0) << '\n';
  return os.str();
}

inline json to_json(const SimpleFdpResult& r) {
  json j{{"holds", r.holds}, {"positions_checked", r.positions_checked}, {"context_classes", r.context_classes}};
  if (r.witness)
    j["witness"] = json{{"first", r.witness->first},
                        {"second", r.witness->second},
                        {"context", r.witness->context},
                        {"next_first", r.witness->next_first},
                        {"next_second", r.witness->next_second}};
  return j;
}

inline json to_json(const EventualPeriodicityResult& r) {
  json j{{"falsified", r.falsified}};
  if (!r.falsified) {
    j["period"] = r.period;
    j["start"] = r.start;
  } else {
    json ev = json::array();
    for (const auto& b : r.evidence) ev.push_back(json{{"period", b.period}, {"break_at", b.position}});
    j["evidence"] = ev;
  }
  return j;
}

inline json to_json(const VerificationReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks)
    checks.push_back(json{{"name", c.name}, {"status", c.passed ? "pass" : "fail"}, {"detail", c.detail}});
  return json{{"checks", checks},
              {"all_passed", rep.all_passed()},
              {"max_variation", rep.max_variation},
              {"sup_distance", rep.sup_distance},
              {"ell", rep.ell},
              {"symbols", rep.symbols},
              {"alphabet_size", rep.fdp.alphabet_size},
              {"simple_fdp_forward", to_json(rep.simple_forward)},
              {"simple_fdp_reverse", to_json(rep.simple_reverse)},
              {"eventual_periodicity_forward", to_json(rep.periodic_forward)},
              {"eventual_periodicity_reverse", to_json(rep.periodic_reverse)}};
}

}  // namespace qpspec
