#include <doctest.h>

#include <cmath>

#include "cmdp/dp_solver.hpp"
#include "cmdp/lp_oracle.hpp"
#include "cmdp/simplex.hpp"
#include "cmdp/verifier.hpp"
#include "fixtures.hpp"

using namespace cmdp;

namespace {

enum { s0, s1, s2, s3, s4, s5 };

struct Step {
  PromiseGrid grid;
  StepTable next;
};

// Grid and next-step table of toy-2 at step index t, solved with grid step delta.
Step toy_step(const Instance& inst, int t, double delta) {
  DpOptions opt;
  opt.delta_override = delta;
  opt.early_exit = false;
  DpResult dp = solve(inst, 0.1, opt);
  return Step{dp.table.grid, dp.table.M[t + 1]};
}

}  // namespace

TEST_CASE("promise grid covers [0, H B]") {
  Instance inst = gen_gap();
  PromiseGrid g = PromiseGrid::make(inst, 0.125);
  CHECK(g.size == 49);
  CHECK(g.value(48) == 6.0);
  CHECK(g.floor_index(0.3) == 2);
  CHECK(g.ceil_index(0.3) == 3);
  CHECK(g.floor_index(0.25 - 1e-12) == 2);
  CHECK(g.ceil_index(0.25 + 1e-12) == 2);
  CHECK(g.exact_index(0.375).value() == 3);
  CHECK_FALSE(g.exact_index(0.3).has_value());
  bool clamped = false;
  PromiseGrid tiny = PromiseGrid::make(fixtures::toy2(), 1e-9, &clamped);
  CHECK(clamped);
  CHECK(tiny.delta == 1e-7);
}

TEST_CASE("terminal step collapses to the one-step contract program") {
  Instance inst = fixtures::toy2();
  PromiseGrid g = PromiseGrid::make(inst, 0.025);
  StepTable term = terminal_table(2, g);
  CHECK(term.prefix_length(0) == 1);
  CHECK(term.value[1][0] == 0.0);
  CHECK(term.value[1][1] == kNegInf);
  CellLp cell = build_lp(inst, 1, 0, 0, g, term, LpForm::Full);
  // nu, gamma and one promise weight per (action, next state).
  CHECK(cell.lp.num_vars == 2 + 4 + 4);
}

TEST_CASE("variable count at the first toy-2 step") {
  Instance inst = fixtures::toy2();
  Step st = toy_step(inst, 0, 0.025);
  const std::int64_t d0 = st.next.prefix_length(0), d1 = st.next.prefix_length(1);
  CHECK(d0 > 1);
  CellLp cell = build_lp(inst, 0, 0, 3, st.grid, st.next, LpForm::Full);
  CHECK(cell.lp.num_vars == 2 + 4 + 2 * (d0 + d1));
}

TEST_CASE("gap cell at the last step with promise 1/4 is worth 5/4") {
  Instance inst = gen_gap();
  PromiseGrid g = PromiseGrid::make(inst, 0.125);
  StepTable term = terminal_table(6, g);
  for (LpForm form : {LpForm::Full, LpForm::Reduced}) {
    LpSolution sol = solve_lp(build_lp(inst, 2, s3, 2, g, term, form));
    REQUIRE(sol.feasible);
    CHECK(sol.objective == doctest::Approx(1.25).epsilon(1e-12));
  }
  // Independent value: best IC grid contract with pure or even-mix actions.
  double brute = brute_force_cell(inst, 2, s3, 2, g, term, 1.0 / 16, 0.125);
  CHECK(brute == doctest::Approx(1.25).epsilon(1e-12));
  OracleResult o = approximation_oracle(inst, 2, s3, 2, g, term);
  CHECK(o.value == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("an honesty window with no achievable agent value is infeasible") {
  Instance inst = Instance::zeros(1, 1, 1, 1.0);
  inst.initial[0] = 1.0;
  inst.P(0, 0, 0, 0) = 1.0;
  PromiseGrid g = PromiseGrid::make(inst, 0.25);
  StepTable term = terminal_table(1, g);
  // Feasible at 0 and at the top of the grid only through the payment bound.
  CHECK(solve_lp(build_lp(inst, 0, 0, 0, g, term)).feasible);
  CHECK(solve_lp(build_lp(inst, 0, 0, 4, g, term)).feasible);
  // With B = 1 the agent can get at most 1, so promises beyond 1 + delta fail.
  Instance two = Instance::zeros(2, 1, 1, 1.0);
  two.initial[0] = 1.0;
  two.P(0, 0, 0, 0) = two.P(1, 0, 0, 0) = 1.0;
  PromiseGrid g2 = PromiseGrid::make(two, 0.25);
  StepTable term2 = terminal_table(1, g2);
  CHECK(g2.size == 9);
  CHECK_FALSE(solve_lp(build_lp(two, 1, 0, 8, g2, term2)).feasible);
  OracleResult o = approximation_oracle(two, 1, 0, 8, g2, term2);
  CHECK_FALSE(o.feasible);
  CHECK(o.value == kNegInf);
}

TEST_CASE("blocked next states are handled per action") {
  Instance inst = fixtures::toy2();
  PromiseGrid g = PromiseGrid::make(inst, 0.05);
  StepTable next = terminal_table(2, g);
  next.value[1][0] = kNegInf;
  CellLp cell = build_lp(inst, 1, 0, 0, g, next);
  bool any_action_blocked_everywhere = true;
  for (int a = 0; a < 2; ++a)
    if (inst.P(1, 0, a, 1) == 0.0) any_action_blocked_everywhere = false;
  CHECK(cell.structurally_infeasible == any_action_blocked_everywhere);
  StepTable dead = terminal_table(2, g);
  dead.value[0][0] = dead.value[1][0] = kNegInf;
  CHECK(build_lp(inst, 1, 0, 0, g, dead).structurally_infeasible);
  CHECK_FALSE(approximation_oracle(inst, 1, 0, 0, g, dead).feasible);
}

TEST_CASE("relaxed solutions and the linear program map into each other") {
  Instance inst = fixtures::toy2();
  Step st = toy_step(inst, 0, 0.025);
  for (std::int64_t k : {0, 2, 5, 9}) {
    CellLp cell = build_lp(inst, 0, 1, k, st.grid, st.next);
    LpSolution sol = solve_lp(cell);
    if (!sol.feasible) continue;
    RelaxedSolution rel = lp_to_relaxed(sol, inst, 0, st.grid);
    LpSolution back = relaxed_to_lp(rel);
    for (std::size_t a = 0; a < sol.nu.size(); ++a) CHECK(std::abs(back.nu[a] - sol.nu[a]) <= 1e-9);
    for (std::size_t i = 0; i < sol.gamma.size(); ++i) CHECK(std::abs(back.gamma[i] - sol.gamma[i]) <= 1e-9);
    CHECK(std::abs(relaxed_objective(inst, 0, 1, st.next, rel) - sol.objective) <= 1e-9);
    double u = promised_agent_value(inst, 0, 1, rel.alpha, rel.contracts, rel.q);
    CHECK(std::abs(u - st.grid.value(k)) <= st.grid.delta + 1e-9);
    CHECK(local_ic_violation(inst, 0, 1, rel.alpha, rel.contracts, rel.q) <= 1e-9);
  }
}

TEST_CASE("zero-probability actions carry the zero contract") {
  LpSolution sol;
  sol.feasible = true;
  sol.objective = 0.0;
  sol.nu = {1.0, 0.0};
  sol.gamma = {0.25, 0.0, 0.0, 0.0};
  sol.xi.assign(4, {});
  sol.xi[0] = {{0, 1.0}};
  sol.xi[1] = {{0, 1.0}};
  Instance inst = fixtures::toy2();
  PromiseGrid g = PromiseGrid::make(inst, 0.25);
  RelaxedSolution rel = lp_to_relaxed(sol, inst, 0, g);
  CHECK(rel.alpha == std::vector<double>{1.0, 0.0});
  CHECK(rel.contracts[0].pay == std::vector<double>{0.25, 0.0});
  CHECK(rel.contracts[1] == Contract::zero(2));
}

TEST_CASE("discretization picks the best feasible point strictly within delta") {
  Instance inst = fixtures::toy2();
  PromiseGrid g = PromiseGrid::make(inst, 0.1);
  std::vector<double> row(g.size, 0.0);
  row[3] = 5.0;
  row[4] = 7.0;
  CHECK(discretize(0.35, row, g).value() == 4);
  row[4] = 5.0;
  CHECK(discretize(0.35, row, g).value() == 3);
  CHECK(discretize(0.3, row, g).value() == 3);
  std::vector<double> prefix(g.size, kNegInf);
  prefix[0] = 0.0;
  CHECK_FALSE(discretize(0.5, prefix, g).has_value());
}

TEST_CASE("oracle outputs satisfy the approximate membership conditions") {
  for (std::uint64_t seed : {1, 2, 3, 7}) {
    Instance inst = fixtures::toy2(seed);
    Step st = toy_step(inst, 0, 0.025);
    for (int s = 0; s < 2; ++s)
      for (std::int64_t k = 0; k < st.grid.size; k += 3) {
        OracleResult o = approximation_oracle(inst, 0, s, k, st.grid, st.next);
        if (!o.feasible) continue;
        double f = principal_objective(inst, 0, s, st.next, st.grid, o.alpha, o.contracts, o.z);
        CHECK(o.value <= f + 1e-9);
        std::vector<double> zv(o.z.size(), 0.0);
        for (std::size_t i = 0; i < o.z.size(); ++i) {
          const int s2 = static_cast<int>(i % 2);
          if (inst.P(0, s, static_cast<int>(i / 2), s2) == 0.0) continue;
          CHECK(st.next.at(s2, o.z[i]) > kNegInf);
          CHECK(std::abs(st.grid.value(o.z[i]) - o.q[i]) < st.grid.delta);
          zv[i] = st.grid.value(o.z[i]);
        }
        double u = promised_agent_value(inst, 0, s, o.alpha, o.contracts, zv);
        CHECK(std::abs(u - st.grid.value(k)) <= 2 * st.grid.delta + 1e-9);
        double sum = 0.0;
        for (double a : o.alpha) sum += a;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        for (const Contract& p : o.contracts) CHECK(p.within_bound(inst.payment_bound, 1e-12));
      }
  }
}

TEST_CASE("oracle value dominates the grid brute force over the honesty window") {
  Instance inst = fixtures::toy2();
  Step st = toy_step(inst, 0, 0.025);
  for (int s = 0; s < 2; ++s)
    for (std::int64_t k : {0, 4, 10, 20}) {
      OracleResult o = approximation_oracle(inst, 0, s, k, st.grid, st.next);
      double brute = brute_force_cell(inst, 0, s, k, st.grid, st.next, 0.125, st.grid.delta);
      if (brute > kNegInf) {
        REQUIRE(o.feasible);
        CHECK(o.value >= brute - 1e-6);
      }
    }
}

TEST_CASE("warm-started sweep matches cold solves") {
  Instance inst = fixtures::toy2(11);
  Step st = toy_step(inst, 0, 0.05);
  for (int s = 0; s < 2; ++s) {
    CellSweep sweep(inst, 0, s, st.grid, st.next);
    for (std::int64_t k = 0; k < st.grid.size; ++k) {
      OracleResult warm = sweep.solve(k);
      OracleResult cold = approximation_oracle(inst, 0, s, k, st.grid, st.next);
      REQUIRE(warm.feasible == cold.feasible);
      if (cold.feasible) CHECK(std::abs(warm.value - cold.value) <= 1e-9);
    }
  }
}
