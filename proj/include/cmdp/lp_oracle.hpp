#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "cmdp/model.hpp"
#include "cmdp/simplex.hpp"

namespace cmdp {

// Uniform promise grid {k * delta : 0 <= k < size} with size = floor(H*B/delta) + 1.
struct PromiseGrid {
  double delta = 0.0;
  std::int64_t size = 0;

  // Clamps delta to at least 1e-7 (see lp_oracle notes in the README).
  static PromiseGrid make(const Instance& inst, double delta, bool* clamped = nullptr);
  double value(std::int64_t k) const { return static_cast<double>(k) * delta; }
  // Grid index rounding with 1e-9 snapping to the nearest grid point.
  std::int64_t floor_index(double x) const;
  std::int64_t ceil_index(double x) const;
  // Index k with |k*delta - x| <= 1e-9 * delta when x is grid aligned.
  std::optional<std::int64_t> exact_index(double x) const;
};

// Table of principal continuation values for one step over all states.
// Entries are kNegInf where the promise is infeasible.
struct StepTable {
  std::vector<std::vector<double>> value;  // [s][k]

  // Length of the leading run of finite entries.
  std::int64_t prefix_length(int s) const;
  // Whether every finite entry lies inside the leading run.
  bool is_prefix(int s) const;
  double at(int s, std::int64_t k) const {
    return k < static_cast<std::int64_t>(value[s].size()) ? value[s][k] : kNegInf;
  }
};

// Terminal table: value 0 at promise 0, infeasible elsewhere.
StepTable terminal_table(int num_states, const PromiseGrid& grid);

enum class LpForm {
  // Every variable family of the program over all actions and next states.
  Full,
  // Same optimum with duplicate actions merged and variables for next states
  // an action cannot reach removed (they are zero, or sit at promise 0).
  Reduced,
};

// Variable layout of one cell program.
struct CellLayout {
  int num_states = 0;
  int num_actions = 0;
  std::vector<int> nu;                    // [a] -> variable or -1
  std::vector<int> gamma;                 // [a*S+s'] -> variable or -1
  std::vector<int> xi_begin;              // [a*S+s'] -> first variable or -1
  std::vector<std::int64_t> xi_count;     // [a*S+s'] -> number of grid promises
  int honesty_ge_row = -1;
  int honesty_le_row = -1;
};

struct CellLp {
  LinearProgram lp;
  CellLayout layout;
  // Set when every action reaches some next state with no feasible promise.
  bool structurally_infeasible = false;
};

// Builds the linear program for cell (t, s, promise index k) against the
// next-step table `next`.
CellLp build_lp(const Instance& inst, int t, int s, std::int64_t k, const PromiseGrid& grid, const StepTable& next,
                LpForm form = LpForm::Full, bool with_names = true);

// Solution in the full variable space (every action and next state).
struct LpSolution {
  bool feasible = false;
  double objective = kNegInf;
  std::vector<double> nu;                                            // [a]
  std::vector<double> gamma;                                         // [a*S+s']
  std::vector<std::vector<std::pair<std::int64_t, double>>> xi;      // [a*S+s'] sparse (k, weight)
};

LpSolution solution_from_result(const CellLp& cell, const LpResult& res);
// Solves the cell program; throws NumericalError if the engine breaks down.
LpSolution solve_lp(const CellLp& cell, LpSolver& solver);
LpSolution solve_lp(const CellLp& cell);

// Mixed action, one contract per action, and promise lotteries.
struct RelaxedSolution {
  std::vector<double> alpha;                                         // [a]
  std::vector<Contract> contracts;                                   // [a]
  std::vector<std::vector<std::pair<std::int64_t, double>>> qtilde;  // [a*S+s']
  std::vector<double> q;                                             // [a*S+s'] mean promise
};

RelaxedSolution lp_to_relaxed(const LpSolution& sol, const Instance& inst, int t, const PromiseGrid& grid);
LpSolution relaxed_to_lp(const RelaxedSolution& rel);

// Grid promise with the best next-step value among feasible points strictly
// within delta of q (ties to the smaller promise); nullopt if there is none.
std::optional<std::int64_t> discretize(double q, const std::vector<double>& next_row, const PromiseGrid& grid);

struct OracleResult {
  bool feasible = false;
  double value = kNegInf;
  std::vector<double> alpha;
  std::vector<Contract> contracts;
  std::vector<std::int64_t> z;                                       // [a*S+s'] grid index
  std::vector<double> q;
  std::vector<std::vector<std::pair<std::int64_t, double>>> qtilde;
  int lp_iterations = 0;
};

OracleResult approximation_oracle(const Instance& inst, int t, int s, std::int64_t k, const PromiseGrid& grid,
                                  const StepTable& next);

// Runs the oracle on consecutive promises of one (t, s), re-solving each cell
// from the previous optimal basis.
class CellSweep {
 public:
  CellSweep(const Instance& inst, int t, int s, const PromiseGrid& grid, const StepTable& next);
  ~CellSweep();
  OracleResult solve(std::int64_t k);
  const CellLp& cell() const { return cell_; }

 private:
  const Instance& inst_;
  int t_, s_;
  PromiseGrid grid_;
  const StepTable& next_;
  CellLp cell_;
  std::unique_ptr<SimplexSession> session_;
};

// Principal objective of (alpha, p, z) against the next-step table.
double principal_objective(const Instance& inst, int t, int s, const StepTable& next, const PromiseGrid& grid,
                           const std::vector<double>& alpha, const std::vector<Contract>& contracts,
                           const std::vector<std::int64_t>& z);
// Principal objective of the promise lotteries (alpha, p, qtilde).
double relaxed_objective(const Instance& inst, int t, int s, const StepTable& next, const RelaxedSolution& rel);

// Agent's promised value sum_a alpha_a sum_s' P (p^a(s') - c(a) + w(a,s')).
double promised_agent_value(const Instance& inst, int t, int s, const std::vector<double>& alpha,
                            const std::vector<Contract>& contracts, const std::vector<double>& w);
// Largest gain of replacing a supported action by another while keeping its
// contract and continuation promises w(a, .); 0 if none.
double local_ic_violation(const Instance& inst, int t, int s, const std::vector<double>& alpha,
                          const std::vector<Contract>& contracts, const std::vector<double>& w);

}  // namespace cmdp
