#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmdp/agent.hpp"
#include "cmdp/converter.hpp"
#include "cmdp/dp_solver.hpp"
#include "cmdp/policy.hpp"

namespace cmdp {

struct EnumConfig {
  double contract_grid_step = 0.125;  // payments {0, step, ..., B}
  std::size_t history_cap = 1000000;
  std::size_t work_cap = 50000000;    // combinations examined by the searches
  std::vector<double> promise_probes;

  void check() const;
};

// ---- history-indexed values -------------------------------------------------

struct OfferValues {
  Offer offer;
  double qp = 0.0, qa = 0.0, qa_dev = 0.0;
};

struct HistoryValues {
  History history;
  double vp = 0.0, va = 0.0, va_dev = 0.0;
  std::vector<OfferValues> offers;
};

// Every history that the policy supports (through offered pairs and next
// states some action can reach), with values from the literal history recursion.
std::vector<HistoryValues> enumerate_values(const PromiseFormPolicy& sigma, const Instance& inst,
                                            std::size_t cap = 1000000);

// Largest difference between the history-indexed values and the promise
// tables reached by folding each history, over all six functions.
double max_table_discrepancy(const PromiseFormPolicy& sigma, const Instance& inst, std::size_t cap = 1000000);

// Random valid promise-form policy for property tests: up to `max_promises`
// promises per (step, state), menus of one or two entries, dyadic lotteries.
PromiseFormPolicy random_policy(const Instance& inst, std::uint64_t seed, int max_promises = 3);

// ---- Markovian policies ------------------------------------------------------

struct MarkovianResult {
  bool feasible = false;
  double value = kNegInf;              // best IC value, contracts optimized jointly
  double min_payment_value = kNegInf;  // best value with per-step minimum-payment contracts
  MarkovianPolicy policy;              // witness of `value`
  std::vector<std::vector<double>> agent_value;      // [t][s] under the witness
  std::vector<std::vector<double>> principal_value;  // [t][s] under the witness
  std::size_t assignments = 0;
};

// Exhausts deterministic action assignments over reachable (step, state)
// pairs. For each, the payments are found by linear programming.
MarkovianResult enumerate_markovian(const Instance& inst, const EnumConfig& cfg = {});

// Best IC value over Markovian policies whose contracts lie on the grid
// (payments outside the recommended action's support are zero).
MarkovianResult markovian_grid_search(const Instance& inst, const EnumConfig& cfg = {});

// Principal and agent values of a Markovian policy followed by the agent, and
// the largest one-step deviation gain at reachable states.
struct MarkovianEvaluation {
  double value = 0.0;
  double ic_gap = 0.0;
  std::vector<std::vector<double>> agent_value, principal_value;
};
MarkovianEvaluation evaluate_markovian(const MarkovianPolicy& rho, const Instance& inst);

// ---- history-dependent lower bound on OPT -----------------------------------

struct OptResult {
  double value = kNegInf;
  PromiseFormPolicy witness;  // honest and IC
  std::size_t combinations = 0;
};

// Deterministic direct history-dependent policies with grid contracts, found
// by a backward search over (agent value, principal value) pairs.
OptResult enumerate_opt(const Instance& inst, const EnumConfig& cfg = {});

// ---- single-cell brute force ---------------------------------------------------

// Best F(alpha, p, z) over pure actions and even two-action mixes, grid
// contracts and feasible grid promises z, subject to exact honesty for some
// promise within `window` of the cell promise and exact local incentive
// constraints. Returns kNegInf when nothing on the grid qualifies.
double brute_force_cell(const Instance& inst, int t, int s, std::int64_t k, const PromiseGrid& grid,
                        const StepTable& next, double contract_step, double window);

// ---- lemma checks --------------------------------------------------------------

struct LemmaCheck {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string detail;
};

struct LemmaReport {
  std::vector<LemmaCheck> checks;
  bool all_pass() const;
  std::string text() const;
  nlohmann::json to_json() const;
};

// Checks that hold for any policy: honesty propagation, the local-IC lifting
// bound and the agent-function value identities.
LemmaReport check_policy_lemmas(const PromiseFormPolicy& sigma, const Instance& inst);

struct SuiteOptions {
  double epsilon = 0.1;
  double delta_override = 0.0;
  bool with_opt = true;  // compare against the history-dependent search
  EnumConfig enum_config;
};

// Solves, converts, and checks every lemma-level inequality of the pipeline.
LemmaReport check_lemma_suite(const Instance& inst, const SuiteOptions& options = {});

}  // namespace cmdp
