// qpspec command-line tool: runs one experiment from a JSON config and writes
// CSV/JSON artifacts into the output directory.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpspec/experiment.hpp"
#include "qpspec/qpspec.hpp"
#include "qpspec/serialization.hpp"

namespace fs = std::filesystem;
using namespace qpspec;

namespace {

constexpr double kOmegaAgreementTol = 0.05;

struct Artifact {
  std::string name;
  std::string content;
};

struct RunContext {
  ExperimentConfig cfg;
  std::string fingerprint;
  std::size_t workers = 1;
  json minimality;
  std::vector<Artifact> artifacts;

  void add(std::string name, std::string content) { artifacts.push_back({std::move(name), std::move(content)}); }

  std::string csv_header() const {
    std::string rel = minimality["relation"].is_null() ? "none" : minimality["relation"].dump();
    return "# config_fingerprint=" + fingerprint + "\n# minimality_bound=" +
           std::to_string(cfg.minimality.bound) + " relation=" + rel + "\n";
  }

  json stamp(json j) const {
    j["config_fingerprint"] = fingerprint;
    j["minimality"] = minimality;
    return j;
  }
};

json minimality_record(const ExperimentConfig& cfg) {
  auto rel = find_rational_dependence(cfg.flow.alpha(), cfg.minimality.bound, cfg.minimality.tol);
  json j{{"bound", cfg.minimality.bound}, {"tol", cfg.minimality.tol}, {"minimal_on_bound", !rel.has_value()}};
  j["relation"] = rel ? json(*rel) : json(nullptr);
  return j;
}

std::string strip_header(const std::string& csv) {
  // curve_csv starts with its own fingerprint line when one is set; ours is prepended instead.
  return csv.rfind("# ", 0) == 0 ? csv.substr(csv.find('\n') + 1) : csv;
}

// ---------------------------------------------------------------------------

void run_lyapunov(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto method = parse_lyapunov_method(cfg.lyapunov.method);
  auto curve = sweep_curve(cfg.f, cfg.flow, cfg.energy.points(), method, cfg.lyapunov_params(ctx.workers));
  ctx.add("lyapunov_curve.csv", ctx.csv_header() + strip_header(curve_csv(curve)));

  std::size_t failures = 0;
  double max_spread = 0.0;
  for (const auto& e : curve.estimates) {
    if (!e.ok) ++failures;
    else max_spread = std::max(max_spread, e.spread);
  }
  ctx.add("lyapunov_summary.json",
          ctx.stamp(json{{"method", std::string(to_string(method))},
                         {"points", curve.estimates.size()},
                         {"failures", failures},
                         {"max_spread", max_spread},
                         {"omega_agreement_tol", kOmegaAgreementTol},
                         {"omega_agreement", max_spread <= kOmegaAgreementTol}})
                  .dump(2) + "\n");
}

void run_mfun(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto energies = cfg.energy.points();
  const auto lp = cfg.lyapunov_params(1);
  const std::size_t nw = lp.omegas.size();
  std::vector<MFunctionValue> vals(energies.size() * nw);
  parallel_for(vals.size(), ctx.workers, [&](std::size_t k) {
    const auto& w = lp.omegas[k / energies.size()];
    vals[k] = m_plus(cfg.f, cfg.flow.with_omega(w), energies[k % energies.size()], cfg.mfun.X, cfg.lyapunov.h,
                     cfg.mfun.tol);
  });
  std::ostringstream os;
  os << ctx.csv_header() << "omega_index,E_re,E_im,m_re,m_im,X,error_estimate\n";
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const auto& v = vals[k];
    os << k / energies.size() << ',' << fmt17(v.E.real()) << ',' << fmt17(v.E.imag()) << ',' << fmt17(v.m.real())
       << ',' << fmt17(v.m.imag()) << ',' << fmt17(v.X) << ',' << fmt17(v.error_estimate) << '\n';
  }
  ctx.add("mfun.csv", os.str());
}

void run_mr(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  auto est = estimate_mr(cfg.f, cfg.flow, cfg.mr.R, cfg.mr.tau, cfg.mr.grid_n, cfg.lyapunov_params(ctx.workers));
  auto j = to_json(est);
  j["flags_file"] = "mr_flags.csv";
  j["X"] = cfg.lyapunov.X;
  j["h"] = cfg.lyapunov.h;
  j["omega_count"] = cfg.lyapunov_params(1).omegas.size();
  ctx.add("mr.json", ctx.stamp(j).dump(2) + "\n");
  ctx.add("mr_flags.csv", ctx.csv_header() + mr_flags_csv(est));
}

void run_coupling(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  auto est = coupling_integral(cfg.f, cfg.flow, cfg.mr.R, cfg.coupling.Lambda, cfg.coupling.lambda_n, cfg.mr.tau,
                               cfg.mr.grid_n, cfg.lyapunov_params(ctx.workers));
  json nodes = json::array();
  std::ostringstream os;
  os << ctx.csv_header() << "lambda,measure,failures\n";
  for (std::size_t i = 0; i < est.lambda_nodes.size(); ++i) {
    nodes.push_back(json{{"lambda", est.lambda_nodes[i]}, {"measure", est.per_node[i].measure}});
    os << fmt17(est.lambda_nodes[i]) << ',' << fmt17(est.per_node[i].measure) << ',' << est.per_node[i].failures
       << '\n';
  }
  ctx.add("coupling.json", ctx.stamp(json{{"Lambda", est.Lambda},
                                          {"lambda_n", est.lambda_nodes.size()},
                                          {"R", cfg.mr.R},
                                          {"tau", cfg.mr.tau},
                                          {"grid_n", cfg.mr.grid_n},
                                          {"integral", est.integral},
                                          {"nodes", nodes}})
                                   .dump(2) + "\n");
  ctx.add("coupling_nodes.csv", os.str());
}

struct Construction {
  AperiodicityAdjustment adjustment;
  double eps_used = 0.0;
  std::optional<BoxPartition> partition;
  std::optional<Approximant> approx;
};

Construction construct(const ExperimentConfig& cfg) {
  Construction c{ensure_aperiodic(cfg.f, cfg.flow.dim(), cfg.perturb.eps), cfg.perturb.eps, {}, {}};
  // The adjustment spends eps/16 of the budget; the construction gets the rest.
  if (c.adjustment.adjusted) c.eps_used = cfg.perturb.eps - c.adjustment.sup_change;
  PartitionOptions popt;
  popt.scan_per_axis = cfg.perturb.scan_per_axis;
  c.partition.emplace(build_partition(c.adjustment.function, cfg.flow, c.eps_used, cfg.perturb.n, popt));
  c.approx.emplace(build_fepsn(c.adjustment.function, *c.partition, c.eps_used, cfg.perturb.n));
  return c;
}

json adjustment_json(const Construction& c) {
  return json{{"adjusted", c.adjustment.adjusted},
              {"rank_before", c.adjustment.rank_before},
              {"sup_change", c.adjustment.sup_change},
              {"eps_used", c.eps_used}};
}

void run_perturb(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  auto c = construct(cfg);
  VerificationOptions vopt;
  vopt.sup_grid_n = cfg.perturb.sup_grid_n;
  vopt.itinerary_symbols = cfg.perturb.itinerary_symbols;
  vopt.ell_factor = cfg.perturb.ell_factor;
  vopt.max_period = cfg.perturb.max_period;
  auto rep = verify_construction(c.adjustment.function, *c.approx, cfg.flow, c.eps_used, cfg.perturb.n, vopt);

  auto j = to_json(rep);
  j["eps"] = cfg.perturb.eps;
  j["n"] = cfg.perturb.n;
  j["adjustment"] = adjustment_json(c);
  j["sup_distance_to_f"] = sup_distance(cfg.f, c.approx->function, cfg.perturb.sup_grid_n, cfg.flow.dim());
  j["partition"] = to_json(*c.partition);
  ctx.add("perturb_report.json", ctx.stamp(j).dump(2) + "\n");

  auto pj = to_json(*c.partition);
  pj["amplitude"] = c.approx->amplitude;
  pj["alphabet_size"] = c.approx->alphabet_size;
  if (cfg.perturb.emit_boxes) {
    json boxes = json::array();
    for (std::size_t b = 0; b < c.partition->size(); ++b) {
      const auto box = c.partition->box(b);
      const auto& pr = c.approx->profiles()[b];
      boxes.push_back(json{{"gamma", std::vector<double>(box.gamma.coords().begin(), box.gamma.coords().end())},
                           {"ell", box.ell},
                           {"mid", pr.mid},
                           {"amp", pr.amp},
                           {"symbol", c.approx->box_symbol[b]}});
    }
    pj["box_list"] = boxes;
  }
  ctx.add("partition.json", ctx.stamp(pj).dump(2) + "\n");

  auto it = itinerary_symbols(c.approx->function, cfg.flow, cfg.perturb.itinerary_symbols);
  ctx.add("itinerary.jsonl", sequence_jsonl(it.sequence, it.enter_x));
}

void run_pieces(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  PieceSequence seq;
  std::string source;
  if (!cfg.pieces.input.empty()) {
    std::ifstream in(cfg.pieces.input);
    if (!in) throw ConfigError("cannot open itinerary file " + cfg.pieces.input);
    seq = sequence_from_jsonl(in);
    source = cfg.pieces.input;
  } else {
    auto c = construct(cfg);
    seq = itinerary_symbols(c.approx->function, cfg.flow, cfg.perturb.itinerary_symbols).sequence;
    source = "constructed";
  }
  detail::require(!seq.symbols.empty(), "pieces: empty itinerary");
  double max_dur = 0.0;
  for (const auto& p : seq.alphabet.pieces()) max_dur = std::max(max_dur, p.duration);
  const double ell = cfg.pieces.ell > 0.0 ? cfg.pieces.ell : cfg.perturb.ell_factor * max_dur;
  const std::size_t prefix = cfg.pieces.prefix_len ? cfg.pieces.prefix_len : seq.symbols.size();
  detail::require(prefix <= seq.symbols.size(), "pieces.prefix_len exceeds the itinerary length");
  const std::size_t maxq = std::min(cfg.pieces.max_period, prefix / 3);
  detail::require(maxq >= 1, "pieces: itinerary too short for a periodicity scan");

  PieceSequence head = seq;
  head.symbols.resize(prefix);
  const auto rev = reverse(head);
  const auto fdp = check_fdp(head);
  json j{{"source", source},
         {"symbols", prefix},
         {"ell", ell},
         {"max_period", maxq},
         {"fdp", {{"holds", fdp.holds}, {"alphabet_size", fdp.alphabet_size}, {"used_symbols", fdp.used_symbols}}},
         {"simple_fdp_forward", to_json(check_simple_fdp(head, ell, prefix))},
         {"simple_fdp_reverse", to_json(check_simple_fdp(rev, ell, prefix))},
         {"eventual_periodicity_forward", to_json(falsify_eventual_periodicity(head, maxq))},
         {"eventual_periodicity_reverse", to_json(falsify_eventual_periodicity(rev, maxq))}};
  ctx.add("pieces_report.json", ctx.stamp(j).dump(2) + "\n");
}

SamplingFunction mollify_target(const ExperimentConfig& cfg) {
  if (cfg.mollify.target == "f") return cfg.f;
  return construct(cfg).approx->function;
}

void run_mollify(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto target = mollify_target(cfg);
  const std::size_t d = cfg.flow.dim();
  std::vector<std::vector<double>> rows(cfg.mollify.scales.size());
  for (std::size_t i = 1; i < cfg.mollify.scales.size(); ++i)
    detail::require(cfg.mollify.scales[i] < cfg.mollify.scales[i - 1], "mollify.scales must be strictly decreasing");
  parallel_for(rows.size(), ctx.workers, [&](std::size_t i) {
    const double e = cfg.mollify.scales[i];
    auto g = mollify(target, e, cfg.mollify.order);
    rows[i] = {e, l1_distance(g, target, cfg.mollify.norm_grid_n, d), sup_distance(g, target, cfg.mollify.norm_grid_n, d),
               sup_distance(g, cfg.f, cfg.mollify.norm_grid_n, d), g.sup_bound()};
  });
  std::ostringstream os;
  os << ctx.csv_header() << "# target=" << cfg.mollify.target << " mollifier_constant=" << fmt17(mollifier_constant())
     << "\neps_m,l1_to_target,sup_to_target,sup_to_f,sup_bound\n";
  for (const auto& r : rows)
    os << fmt17(r[0]) << ',' << fmt17(r[1]) << ',' << fmt17(r[2]) << ',' << fmt17(r[3]) << ',' << fmt17(r[4]) << '\n';
  ctx.add("mollify.csv", os.str());
}

void run_semicontinuity(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto target = mollify_target(cfg);
  SemicontinuityConfig sc;
  sc.R = cfg.mr.R;
  sc.tau = cfg.mr.tau;
  sc.grid_n = cfg.mr.grid_n;
  sc.lyapunov = cfg.lyapunov_params(ctx.workers);
  sc.norm_grid_n = cfg.mollify.norm_grid_n;
  sc.mollify_order = cfg.mollify.order;
  sc.with_coupling = cfg.mollify.with_coupling;
  sc.Lambda = cfg.coupling.Lambda;
  sc.lambda_n = cfg.coupling.lambda_n;
  auto rows = semicontinuity_experiment(target, cfg.f, cfg.flow, cfg.mollify.scales, sc);
  ctx.add("semicontinuity.csv", ctx.csv_header() + semicontinuity_csv(rows));
  json jr = json::array();
  for (const auto& r : rows) {
    json row{{"eps_m", r.eps_m}, {"l1_to_ftilde", r.l1_to_ftilde}, {"sup_to_f", r.sup_to_f}, {"mr", r.mr}};
    row["coupling_integral"] = std::isnan(r.coupling) ? json(nullptr) : json(r.coupling);
    jr.push_back(row);
  }
  ctx.add("semicontinuity.json",
          ctx.stamp(json{{"target", cfg.mollify.target},
                         {"rows", jr},
                         {"verdict", nullptr},
                         {"note", "inspection table only; no spectral conclusion is drawn from these numbers"}})
                  .dump(2) + "\n");
}

// ---------------------------------------------------------------------------

void write_artifacts(const fs::path& dir, const std::vector<Artifact>& artifacts) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  try {
    for (const auto& a : artifacts) {
      const auto tmp = dir / (a.name + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary);
        out << a.content;
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
      }
      written.push_back(tmp);
    }
    for (const auto& a : artifacts) fs::rename(dir / (a.name + ".tmp"), dir / a.name);
  } catch (...) {
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

using Runner = void (*)(RunContext&);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-periodic Schroedinger experiments: Lyapunov exponents, m-functions, M_R, perturbations"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  std::string config_path, out_dir;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "experiment config (JSON); defaults are used when omitted")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  app.add_option("--workers", workers, "worker threads; does not affect results")->check(CLI::Range(1, 1024));
  app.add_option("--seed", seed, "seed for seeded-random omega sampling (overrides lyapunov.seed)");

  const std::vector<std::pair<std::string, std::pair<std::string, Runner>>> commands{
      {"lyapunov", {"Lyapunov exponent curve over the energy grid", run_lyapunov}},
      {"mfun", {"m-function table over omega and the energy grid", run_mfun}},
      {"mr", {"zero-Lyapunov measure M_R with per-energy flags", run_mr}},
      {"coupling", {"coupling integral of M_R(lambda f) over [0, Lambda]", run_coupling}},
      {"perturb", {"build the box partition and approximant, verify the construction", run_perturb}},
      {"pieces", {"simple-FDP and eventual-periodicity checks on an itinerary", run_pieces}},
      {"mollify", {"mollification distance table", run_mollify}},
      {"demo-semicontinuity", {"mollify the approximant at decreasing scales and tabulate M_R", run_semicontinuity}},
  };
  for (const auto& [name, info] : commands) app.add_subcommand(name, info.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunContext ctx;
    ctx.cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (!out_dir.empty()) ctx.cfg.output_dir = out_dir;
    if (seed) ctx.cfg.lyapunov.seed = *seed;
    ctx.workers = workers;
    ctx.fingerprint = config_fingerprint(ctx.cfg);
    ctx.minimality = minimality_record(ctx.cfg);

    Runner run = nullptr;
    std::string name;
    for (const auto& [n, info] : commands)
      if (app.got_subcommand(n)) {
        run = info.second;
        name = n;
      }
    run(ctx);
    auto resolved = to_json(ctx.cfg);
    resolved.erase("output");  // artifacts must not depend on where they are written
    resolved["config_fingerprint"] = ctx.fingerprint;
    resolved["command"] = name;
    ctx.add("config.json", resolved.dump(2) + "\n");
    write_artifacts(ctx.cfg.output_dir, ctx.artifacts);
    std::cout << name << ": wrote " << ctx.artifacts.size() << " artifacts to " << ctx.cfg.output_dir
              << " (config " << ctx.fingerprint << ")\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
