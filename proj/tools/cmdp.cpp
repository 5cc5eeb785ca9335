#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "cmdp/agent.hpp"
#include "cmdp/converter.hpp"
#include "cmdp/dp_solver.hpp"
#include "cmdp/generators.hpp"
#include "cmdp/verifier.hpp"

using nlohmann::json;
using namespace cmdp;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Global {
  std::string report = "text";
  double tol = 1e-9;
  double oracle_tol = 1e-6;
  bool timing = false;
};

// Removes every "seconds" field unless timing output was requested.
void strip_timing(json& j) {
  if (j.is_object()) {
    j.erase("seconds");
    for (auto& [k, v] : j.items()) strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timing(v);
  }
}

void render_text(const json& j, const std::string& prefix, std::ostream& os) {
  if (j.is_object()) {
    for (auto& [k, v] : j.items()) {
      if (v.is_object() || (v.is_array() && !v.empty() && v.front().is_object()))
        render_text(v, prefix + k + ".", os);
      else
        os << prefix << k << ": " << v.dump() << "\n";
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) render_text(j[i], prefix + std::to_string(i) + ".", os);
  } else {
    os << prefix << ": " << j.dump() << "\n";
  }
}

void emit(json report, const Global& g) {
  if (!g.timing) strip_timing(report);
  if (g.report == "json") {
    std::cout << report.dump(1) << "\n";
  } else {
    render_text(report, "", std::cout);
  }
}

void require_distinct(const std::string& in, const std::string& out) {
  if (!in.empty() && in == out) throw ValidationError("input and output paths must differ: " + in);
}

void require_epsilon(double eps) {
  if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
}

json validation_json(const ValidationReport& v) {
  json warnings = json::array();
  for (const Issue& w : v.warnings) warnings.push_back(w.message);
  return warnings;
}

// ---- generate ----------------------------------------------------------------

struct GenerateArgs {
  std::string kind, graph, out;
  std::uint64_t seed = kToy2Seed;
  int states = 2, actions = 2, horizon = 2;
  double sparsity = 0.0;
};

json run_generate(const GenerateArgs& a) {
  Instance inst;
  if (a.kind == "gap") {
    inst = gen_gap();
  } else if (a.kind == "vertex-cover") {
    if (a.graph.empty()) throw ValidationError("--kind vertex-cover needs --graph");
    inst = gen_vertex_cover(GraphSpec::load(a.graph));
  } else {
    inst = gen_random(a.seed, a.states, a.actions, a.horizon, a.sparsity);
  }
  ValidationReport v = validate_instance(inst);
  if (!v.ok()) throw ValidationError(v.summary());
  save_instance(inst, a.out);
  json r{{"command", "generate"},
         {"kind", a.kind},
         {"out", a.out},
         {"horizon", inst.horizon},
         {"num_states", inst.num_states},
         {"num_actions", inst.num_actions},
         {"payment_bound", inst.payment_bound},
         {"warnings", validation_json(v)}};
  if (a.kind == "random") r["seed"] = a.seed;
  return r;
}

// ---- solve -----------------------------------------------------------------------

struct SolveArgs {
  std::string instance, out, dump_tables, dump_lp;
  std::vector<long long> lp_cell;
  double epsilon = 0.0, delta = 0.0;
  int threads = 0;
};

json run_solve(const SolveArgs& a) {
  require_epsilon(a.epsilon);
  require_distinct(a.instance, a.out);
  Instance inst = load_instance(a.instance);
  DpOptions opt;
  opt.delta_override = a.delta;
  opt.threads = a.threads > 0 ? a.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  DpResult res = solve(inst, a.epsilon, opt);
  save_policy(res.policy, a.out);
  if (!a.dump_tables.empty()) table_dump(res.table, a.dump_tables);
  ValueTables vt = evaluate(res.policy, inst);
  json r{{"command", "solve"}, {"instance", a.instance}, {"out", a.out}, {"threads", opt.threads}};
  r["solver"] = report_to_json(res.report);
  r["value"] = vt.value;
  r["ic_epsilon"] = ic_epsilon(res.policy, inst, vt).epsilon;
  r["honesty_residual"] = honesty_residual(res.policy, inst).max;
  r["local_ic_residual"] = local_ic_residual(res.policy, inst);
  if (!a.dump_lp.empty()) {
    if (a.lp_cell.size() != 3) throw ValidationError("--lp-cell needs h,s,k");
    const long long h = a.lp_cell[0], s = a.lp_cell[1], k = a.lp_cell[2];
    if (h < 1 || h > inst.horizon || s < 0 || s >= inst.num_states || k < 0 || k >= res.table.grid.size)
      throw ValidationError("--lp-cell out of range");
    const int t = static_cast<int>(h - 1);
    CellLp cell = build_lp(inst, t, static_cast<int>(s), k, res.table.grid, res.table.M[t + 1], LpForm::Full);
    std::ofstream out(a.dump_lp);
    if (!out) throw ValidationError("cannot write LP file " + a.dump_lp);
    out << cell.lp.dump();
    LpSolution sol = solve_lp(cell);
    r["lp_dump"] = {{"path", a.dump_lp},
                    {"h", h},
                    {"s", s},
                    {"k", k},
                    {"variables", cell.lp.num_vars},
                    {"rows", cell.lp.rows.size()},
                    {"feasible", sol.feasible},
                    {"objective", sol.feasible ? json(sol.objective) : json(nullptr)}};
  }
  return r;
}

// ---- convert ---------------------------------------------------------------------

struct ConvertArgs {
  std::string policy, instance, out, tie = "incumbent";
  double epsilon = 0.0;
};

json run_convert(const ConvertArgs& a) {
  require_epsilon(a.epsilon);
  require_distinct(a.policy, a.out);
  require_distinct(a.instance, a.out);
  Instance inst = load_instance(a.instance);
  PromiseFormPolicy sigma = load_policy(a.policy);
  ConversionResult res = convert(sigma, a.epsilon, inst, a.tie == "principal" ? TieRule::Principal : TieRule::Incumbent);
  save_policy(res.policy, a.out);
  json r{{"command", "convert"}, {"policy", a.policy}, {"out", a.out}, {"tie", a.tie}};
  r["conversion"] = conversion_report_to_json(res.report);
  return r;
}

// ---- evaluate --------------------------------------------------------------------

struct EvaluateArgs {
  std::string policy, instance, mode = "exact", agent = "best", dump_traj;
  long long episodes = 10000;
  std::uint64_t seed = 1;
};

json run_evaluate(const EvaluateArgs& a) {
  Instance inst = load_instance(a.instance);
  PromiseFormPolicy sigma = load_policy(a.policy);
  AgentPolicy agent = a.agent == "recommended" ? recommended_agent(sigma, inst)
                      : a.agent == "adversarial" ? best_response(sigma, inst, AgentTie::Adversarial)
                      : a.agent == "lexicographic" ? best_response(sigma, inst, AgentTie::Lexicographic)
                                                   : best_response(sigma, inst, AgentTie::Recommendation);
  json r{{"command", "evaluate"}, {"policy", a.policy}, {"mode", a.mode}, {"agent", a.agent}};
  ValueTables vt = evaluate(sigma, inst);
  r["recommended_value"] = vt.value;
  r["ic_epsilon"] = ic_epsilon(sigma, inst, vt).epsilon;
  if (a.mode == "exact") {
    ExactValue ev = exact_value(sigma, agent, inst);
    r["principal_value"] = ev.principal;
    r["agent_value"] = ev.agent;
    r["histories"] = ev.histories;
  } else {
    require_distinct(a.policy, a.dump_traj);
    SimulationResult sim = simulate(sigma, agent, inst, a.seed, a.episodes, !a.dump_traj.empty());
    r["seed"] = a.seed;
    r["episodes"] = sim.episodes;
    r["principal_mean"] = sim.mean_principal;
    r["principal_se"] = sim.se_principal;
    r["agent_mean"] = sim.mean_agent;
    r["agent_se"] = sim.se_agent;
    if (!a.dump_traj.empty()) {
      std::ofstream out(a.dump_traj);
      if (!out) throw ValidationError("cannot write trajectory file " + a.dump_traj);
      for (const Trajectory& tr : sim.trajectories) out << trajectory_to_json(tr).dump() << "\n";
      r["trajectories"] = a.dump_traj;
    }
  }
  return r;
}

// ---- verify ------------------------------------------------------------------------

struct VerifyArgs {
  std::string instance, policy, suite = "all";
  double grid_step = 0.125, epsilon = 0.1;
  std::size_t cap = 0;
};

json markovian_json(const MarkovianResult& m) {
  json contracts = json::array(), actions = json::array();
  for (std::size_t t = 0; t < m.policy.actions.size(); ++t) {
    json ct = json::array();
    for (const Contract& c : m.policy.contracts[t]) ct.push_back(c.pay);
    contracts.push_back(ct);
    actions.push_back(m.policy.actions[t]);
  }
  return {{"feasible", m.feasible},
          {"value", m.feasible ? json(m.value) : json(nullptr)},
          {"min_payment_value", m.min_payment_value > kNegInf ? json(m.min_payment_value) : json(nullptr)},
          {"assignments", m.assignments},
          {"actions", actions},
          {"contracts", contracts}};
}

json run_verify(const VerifyArgs& a, const Global& g, bool& all_pass) {
  require_epsilon(a.epsilon);
  Instance inst = load_instance(a.instance);
  EnumConfig cfg;
  cfg.contract_grid_step = a.grid_step;
  if (a.cap > 0) cfg.history_cap = cfg.work_cap = a.cap;
  cfg.check();
  const bool every = a.suite == "all";
  const bool have_policy = !a.policy.empty();
  PromiseFormPolicy sigma;
  if (have_policy) sigma = load_policy(a.policy);
  json r{{"command", "verify"}, {"instance", a.instance}, {"suite", a.suite}, {"grid_step", a.grid_step}};
  all_pass = true;
  auto record = [&](json& section, bool pass) {
    section["pass"] = pass;
    all_pass = all_pass && pass;
  };
  if (every || a.suite == "equivalence") {
    PromiseFormPolicy target = have_policy ? sigma : solve(inst, a.epsilon).policy;
    json s{{"policy", have_policy ? a.policy : std::string("solver")}};
    double d = max_table_discrepancy(target, inst, cfg.history_cap);
    s["max_discrepancy"] = d;
    s["tolerance"] = g.tol;
    record(s, d <= g.tol);
    r["equivalence"] = s;
  }
  if (every || a.suite == "markovian") {
    MarkovianResult m = enumerate_markovian(inst, cfg);
    json s = markovian_json(m);
    record(s, m.feasible);
    r["markovian"] = s;
  }
  if (every || a.suite == "opt") {
    OptResult o = enumerate_opt(inst, cfg);
    json s{{"value", o.value}, {"combinations", o.combinations}};
    bool pass = true;
    if (have_policy) {
      double v = evaluate(sigma, inst).value;
      s["policy_value"] = v;
      s["tolerance"] = g.oracle_tol;
      pass = v >= o.value - g.oracle_tol;
    }
    record(s, pass);
    r["opt"] = s;
  }
  if (every || a.suite == "lemmas") {
    LemmaReport rep;
    if (have_policy) {
      rep = check_policy_lemmas(sigma, inst);
    } else {
      SuiteOptions so;
      so.epsilon = a.epsilon;
      so.enum_config = cfg;
      rep = check_lemma_suite(inst, so);
    }
    json s = rep.to_json();
    if (g.report != "json") std::cout << rep.text();
    record(s, rep.all_pass());
    r["lemmas"] = s;
  }
  r["all_pass"] = all_pass;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incentive-compatible commitment policies for a principal and a hidden-action agent"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  Global g;
  bool version = false;
  app.add_flag("--version", version, "Print the program and file schema versions");
  app.add_option("--report", g.report, "Report format")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--tol", g.tol, "Structural tolerance (default 1e-9)");
  app.add_option("--oracle-tol", g.oracle_tol, "Cross-oracle tolerance (default 1e-6)");
  app.add_flag("--timing", g.timing, "Include wall-clock timings in reports");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Write a constructed or random instance");
  gen->add_option("--kind", ga.kind)->required()->check(CLI::IsMember({"gap", "vertex-cover", "random"}));
  gen->add_option("--graph", ga.graph, "Graph file {vertices, edges} for vertex-cover")->check(CLI::ExistingFile);
  gen->add_option("--seed", ga.seed);
  gen->add_option("--states", ga.states);
  gen->add_option("--actions", ga.actions);
  gen->add_option("--horizon", ga.horizon);
  gen->add_option("--sparsity", ga.sparsity);
  gen->add_option("--out", ga.out)->required();

  SolveArgs sa;
  auto* sol = app.add_subcommand("solve", "Compute an approximately IC promise-form policy");
  sol->add_option("--instance", sa.instance)->required()->check(CLI::ExistingFile);
  sol->add_option("--epsilon", sa.epsilon)->required();
  sol->add_option("--out", sa.out)->required();
  sol->add_option("--delta", sa.delta, "Promise grid step override");
  sol->add_option("--threads", sa.threads, "Worker threads (default: available cores)");
  sol->add_option("--dump-tables", sa.dump_tables, "CSV of the value tables");
  sol->add_option("--dump-lp", sa.dump_lp, "Write the linear program of one cell");
  sol->add_option("--lp-cell", sa.lp_cell, "Cell h,s,k for --dump-lp (h from 1)")->delimiter(',')->expected(3);

  ConvertArgs ca;
  auto* conv = app.add_subcommand("convert", "Turn an approximately IC policy into an exactly IC honest one");
  conv->add_option("--policy", ca.policy)->required()->check(CLI::ExistingFile);
  conv->add_option("--instance", ca.instance)->required()->check(CLI::ExistingFile);
  conv->add_option("--epsilon", ca.epsilon)->required();
  conv->add_option("--out", ca.out)->required();
  conv->add_option("--tie", ca.tie)->check(CLI::IsMember({"incumbent", "principal"}));

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Value of a policy against an agent");
  ev->add_option("--policy", ea.policy)->required()->check(CLI::ExistingFile);
  ev->add_option("--instance", ea.instance)->required()->check(CLI::ExistingFile);
  ev->add_option("--mode", ea.mode)->check(CLI::IsMember({"exact", "mc"}));
  ev->add_option("--agent", ea.agent)->check(CLI::IsMember({"best", "recommended", "adversarial", "lexicographic"}));
  ev->add_option("--episodes", ea.episodes);
  ev->add_option("--seed", ea.seed);
  ev->add_option("--dump-traj", ea.dump_traj, "JSON-lines trajectory file (mc mode)");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Run brute-force checks on a small instance");
  ver->add_option("--instance", va.instance)->required()->check(CLI::ExistingFile);
  ver->add_option("--policy", va.policy)->check(CLI::ExistingFile);
  ver->add_option("--suite", va.suite)->check(CLI::IsMember({"equivalence", "markovian", "opt", "lemmas", "all"}));
  ver->add_option("--grid-step", va.grid_step, "Contract grid step");
  ver->add_option("--cap", va.cap, "Enumeration cap");
  ver->add_option("--epsilon", va.epsilon, "Solver epsilon for the pipeline checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (version) {
    std::cout << "cmdp " << kVersion << "\ninstance schema " << kInstanceSchemaVersion << "\npolicy schema "
              << kPolicySchemaVersion << "\n";
    return 0;
  }
  try {
    if (*gen) {
      emit(run_generate(ga), g);
    } else if (*sol) {
      emit(run_solve(sa), g);
    } else if (*conv) {
      emit(run_convert(ca), g);
    } else if (*ev) {
      emit(run_evaluate(ea), g);
    } else if (*ver) {
      bool pass = true;
      emit(run_verify(va, g, pass), g);
      return pass ? 0 : 1;
    } else {
      std::cerr << app.help();
      return 1;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const CapExceeded& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
