#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "cmdp/agent.hpp"
#include "cmdp/converter.hpp"
#include "cmdp/dp_solver.hpp"
#include "cmdp/generators.hpp"
#include "cmdp/lp_oracle.hpp"
#include "cmdp/verifier.hpp"

using namespace cmdp;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

Instance toy2(std::uint64_t seed) { return gen_random(seed, 2, 2, 2, 0.0); }

// The criterion-2 run is shared by criteria 3 and 8.
DpResult& gap_solution() {
  static DpResult dp = solve(gen_gap(), 0.04);
  return dp;
}

Outcome gap_reproduction() {
  Outcome o;
  Instance inst = gen_gap();
  MarkovianResult mk = enumerate_markovian(inst);
  o.require(mk.feasible && std::abs(mk.value - 2.0) <= 1e-9, "markovian value " + fmt(mk.value) + " vs 2");
  if (mk.feasible) {
    double p01 = mk.policy.contracts[0][0].pay[1], p34 = mk.policy.contracts[2][3].pay[4];
    o.require(std::abs(p01 - 0.25) <= 1e-9, "payment s0->s1 " + fmt(p01) + " vs 0.25");
    o.require(std::abs(p34 - 0.75) <= 1e-9, "payment s3->s4 " + fmt(p34) + " vs 0.75");
  }
  EnumConfig cfg;
  cfg.contract_grid_step = 0.125;
  OptResult opt = enumerate_opt(inst, cfg);
  o.require(opt.value >= 2.25 - 1e-9, "history-dependent value " + fmt(opt.value) + " vs 2.25");
  o.note("markovian=" + fmt(mk.value) + " history_dependent=" + fmt(opt.value));
  return o;
}

Outcome solver_dominance() {
  Outcome o;
  Instance inst = gen_gap();
  const DpResult& dp = gap_solution();
  const double delta = 0.04 / 36;
  ValueTables vt = evaluate(dp.policy, inst);
  double ic = ic_epsilon(dp.policy, inst, vt).epsilon, hon = honesty_residual(dp.policy, inst).max;
  o.require(std::abs(dp.report.delta - delta) <= 1e-15, "grid step " + fmt(dp.report.delta));
  o.require(vt.value >= 2.25 - 1e-6, "value " + fmt(vt.value) + " vs 2.25");
  o.require(ic <= 0.04 + 1e-6, "ic epsilon " + fmt(ic) + " vs 0.04");
  o.require(hon <= 2 * delta + 1e-9, "honesty " + fmt(hon) + " vs " + fmt(2 * delta));
  o.note("value=" + fmt(vt.value) + " ic=" + fmt(ic) + " honesty=" + fmt(hon));
  return o;
}

Outcome conversion_guarantee() {
  Outcome o;
  Instance inst = gen_gap();
  ConversionResult res = convert(gap_solution().policy, 0.04, inst);
  ValueTables vt = evaluate(res.policy, inst);
  double ic = ic_epsilon(res.policy, inst, vt).epsilon, hon = honesty_residual(res.policy, inst).max;
  const double bound = 2.25 - 4 * std::sqrt(0.04) - 1e-6;
  o.require(ic <= 1e-9, "ic epsilon " + fmt(ic));
  o.require(hon <= 1e-9, "honesty " + fmt(hon));
  o.require(vt.value >= bound, "value " + fmt(vt.value) + " vs " + fmt(bound));
  o.note("value=" + fmt(vt.value) + " ic=" + fmt(ic) + " honesty=" + fmt(hon));
  return o;
}

Outcome value_equivalence() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Instance inst = toy2(seed);
    PromiseFormPolicy sigma = random_policy(inst, seed);
    double d = max_table_discrepancy(sigma, inst);
    worst = std::max(worst, d);
    o.require(d <= 1e-9, "seed " + std::to_string(seed) + " discrepancy " + fmt(d));
  }
  o.note("max_discrepancy=" + fmt(worst));
  return o;
}

Outcome oracle_sandwich() {
  Outcome o;
  double worst_upper = 0.0, worst_lower = 0.0, worst_honesty = 0.0, worst_lic_q = 0.0, worst_lic_z = 0.0;
  int cells = 0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Instance inst = toy2(seed);
    DpOptions opt;
    opt.delta_override = 0.025;
    opt.early_exit = false;
    DpResult dp = solve(inst, 0.1, opt);
    const PromiseGrid& grid = dp.table.grid;
    const StepTable& next = dp.table.M[1];
    for (int t = 0; t <= inst.horizon; ++t)
      for (int s = 0; s < inst.num_states; ++s) {
        const StepTable& M = dp.table.M[t];
        o.require(M.is_prefix(s), "prefix at seed " + std::to_string(seed));
        for (std::int64_t k = 1; k + 1 < M.prefix_length(s); ++k) {
          double curv = M.value[s][k - 1] + M.value[s][k + 1] - 2 * M.value[s][k];
          o.require(curv <= 1e-6, "concavity " + fmt(curv) + " at seed " + std::to_string(seed));
        }
      }
    const std::vector<double>& row = dp.table.M[0].value[0];
    const std::int64_t k = std::max_element(row.begin(), row.end()) - row.begin();
    OracleResult r = approximation_oracle(inst, 0, 0, k, grid, next);
    if (!r.feasible) {
      o.require(false, "infeasible cell at seed " + std::to_string(seed));
      continue;
    }
    ++cells;
    double f = principal_objective(inst, 0, 0, next, grid, r.alpha, r.contracts, r.z);
    double brute = brute_force_cell(inst, 0, 0, k, grid, next, 0.125, grid.delta);
    worst_upper = std::max(worst_upper, r.value - f);
    if (brute > kNegInf) worst_lower = std::max(worst_lower, brute - r.value);
    o.require(r.value <= f + 1e-9, "value above objective at seed " + std::to_string(seed));
    o.require(brute == kNegInf || r.value >= brute - 1e-6, "value below brute force at seed " + std::to_string(seed));
    std::vector<double> zv(r.z.size(), 0.0);
    for (std::size_t i = 0; i < r.z.size(); ++i) {
      const int a = static_cast<int>(i) / inst.num_states, s2 = static_cast<int>(i) % inst.num_states;
      if (inst.P(0, 0, a, s2) == 0.0) continue;
      o.require(next.at(s2, r.z[i]) > kNegInf, "infeasible next promise");
      o.require(std::abs(grid.value(r.z[i]) - r.q[i]) < grid.delta, "next promise outside the window");
      zv[i] = grid.value(r.z[i]);
    }
    double hon = std::abs(promised_agent_value(inst, 0, 0, r.alpha, r.contracts, zv) - grid.value(k));
    worst_honesty = std::max(worst_honesty, hon);
    o.require(hon <= 2 * grid.delta + 1e-9, "honesty " + fmt(hon));
    double lic_q = local_ic_violation(inst, 0, 0, r.alpha, r.contracts, r.q);
    worst_lic_q = std::max(worst_lic_q, lic_q);
    o.require(lic_q <= 1e-9, "local incentive violation " + fmt(lic_q));
    worst_lic_z = std::max(worst_lic_z, local_ic_violation(inst, 0, 0, r.alpha, r.contracts, zv));
  }
  o.note("cells=" + std::to_string(cells) + " max(v-F)=" + fmt(worst_upper) + " max(brute-v)=" + fmt(worst_lower) +
         " honesty=" + fmt(worst_honesty) + " local_ic(q)=" + fmt(worst_lic_q) + " local_ic(z)=" + fmt(worst_lic_z));
  return o;
}

Outcome lemma_suite() {
  Outcome o;
  SuiteOptions opt;
  auto run = [&](const Instance& inst, const std::string& name) {
    LemmaReport rep = check_lemma_suite(inst, opt);
    for (const LemmaCheck& c : rep.checks)
      o.require(c.pass, name + " " + c.name + " measured=" + fmt(c.measured) + " bound=" + fmt(c.bound));
  };
  run(gen_gap(), "gap");
  for (std::uint64_t seed = 1; seed <= 50; ++seed) run(toy2(seed), "seed" + std::to_string(seed));
  o.note("instances=51");
  return o;
}

Outcome reduction_formula() {
  Outcome o;
  EnumConfig cfg;
  cfg.contract_grid_step = 0.125;
  MarkovianResult mk = enumerate_markovian(gen_vertex_cover(GraphSpec::path(3)), cfg);
  const double target = 39.0 / 80.0 - 1.0 / 240.0;
  o.require(std::abs(mk.value - target) <= 1e-9, "value " + fmt(mk.value) + " vs " + fmt(target));
  o.note("value=" + fmt(mk.value) + " target=" + fmt(target));
  return o;
}

Outcome size_bounds() {
  Outcome o;
  auto check = [&](const Instance& inst, const DpResult& dp, double eps, const std::string& name) {
    const DpReport& r = dp.report;
    const std::size_t bound =
        static_cast<std::size_t>(std::floor(inst.horizon * inst.payment_bound / r.delta + 1e-9) + 1) * inst.horizon *
        inst.num_states;
    o.require(r.promise_count <= bound, name + " promises " + std::to_string(r.promise_count));
    o.require(r.menu_count <= r.promise_count * inst.num_actions, name + " menus " + std::to_string(r.menu_count));
    ConversionResult c = convert(dp.policy, eps, inst);
    o.require(c.report.promises_out <= c.report.promises_in, name + " conversion grew the promise count");
    o.require(c.report.menu_out <= c.report.menu_in, name + " conversion grew the menu count");
  };
  check(gen_gap(), gap_solution(), 0.04, "gap");
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Instance inst = toy2(seed);
    for (double eps : {0.1, 0.02}) check(inst, solve(inst, eps), eps, "seed" + std::to_string(seed));
  }
  const DpReport& g = gap_solution().report;
  o.note("gap promises=" + std::to_string(g.promise_count) + " bound=" + std::to_string(g.promise_bound) +
         " menus=" + std::to_string(g.menu_count));
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "gap_reproduction", 10, gap_reproduction},
      {2, "solver_dominance", 60, solver_dominance},
      {3, "conversion_guarantee", 10, conversion_guarantee},
      {4, "value_equivalence", 30, value_equivalence},
      {5, "oracle_sandwich", 60, oracle_sandwich},
      {6, "lemma_suite", 120, lemma_suite},
      {7, "reduction_formula", 60, reduction_formula},
      {8, "size_bounds", 0, size_bounds},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget > 0) o.require(secs < c.budget, "runtime " + fmt(secs) + " s over " + fmt(c.budget) + " s");
    if (!o.pass) ++failed;
    std::printf("%s %d %s time=%.2fs", o.pass ? "PASS" : "FAIL", c.id, c.name, secs);
    if (c.budget > 0) std::printf(" budget=%.0fs", c.budget);
    std::printf(" %s\n", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
