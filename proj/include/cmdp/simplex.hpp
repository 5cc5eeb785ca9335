#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cmdp/common.hpp"

namespace cmdp {

enum class RowSense { LessEqual, GreaterEqual, Equal };

struct LpRow {
  std::vector<std::pair<int, double>> coefs;  // (variable, coefficient)
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
  std::string name;
};

// maximize objective^T x  subject to rows, x >= 0.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<std::string> var_names;
  std::vector<LpRow> rows;

  int add_var(double obj, std::string name = {});
  int add_row(std::vector<std::pair<int, double>> coefs, RowSense sense, double rhs, std::string name = {});
  // Plain-text rendering in an LP-format-like layout (objective, rows, bounds).
  std::string dump() const;
  // Largest violation of the rows and of x >= 0 at the given point.
  double max_violation(const std::vector<double>& x) const;
  double evaluate_objective(const std::vector<double>& x) const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = kNegInf;
  std::vector<double> x;
  std::vector<double> row_duals;  // shadow prices of the original rows
  int iterations = 0;
  bool warm_started = false;
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  // Pivot elements below this magnitude abort the solve with NumericalError.
  double abort_pivot = 1e-12;
  int max_iterations = 200000;
  int refactor_every = 64;
  // Number of consecutive degenerate pivots after which pricing switches to
  // Bland's smallest-index rule until a nondegenerate pivot occurs.
  int degenerate_streak = 20;
  // Always use Bland's rule (slow but cycling-free by construction).
  bool always_bland = false;
};

// Solver seam so that callers can substitute another LP engine.
class LpSolver {
 public:
  virtual ~LpSolver() = default;
  virtual LpResult solve(const LinearProgram& lp) = 0;
};

// Dense revised simplex (two phases, explicit basis inverse) with a
// deterministic pivot rule: largest reduced cost with smallest-index ties,
// falling back to Bland's rule on degenerate streaks.
class SimplexSolver : public LpSolver {
 public:
  explicit SimplexSolver(SimplexOptions opts = {}) : opts_(opts) {}
  LpResult solve(const LinearProgram& lp) override;

 private:
  SimplexOptions opts_;
};

// A solver session that keeps the optimal basis of the last solve so that a
// sequence of programs differing only in right-hand sides can be re-solved
// from that basis with the dual simplex method.
class SimplexSession {
 public:
  explicit SimplexSession(LinearProgram lp, SimplexOptions opts = {});
  ~SimplexSession();
  SimplexSession(SimplexSession&&) noexcept;
  SimplexSession& operator=(SimplexSession&&) noexcept;

  const LinearProgram& program() const { return lp_; }
  void set_rhs(int row, double rhs);
  // Warm-started when a previous optimal basis is available, cold otherwise.
  LpResult solve();
  LpResult solve_cold();

 private:
  struct Impl;
  LinearProgram lp_;
  SimplexOptions opts_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cmdp
