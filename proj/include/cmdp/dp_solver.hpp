#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmdp/lp_oracle.hpp"
#include "cmdp/policy.hpp"

namespace cmdp {

// Principal value tables M[t][s][k] for t = 0..H; M[H] is the terminal layer.
struct DpTable {
  PromiseGrid grid;
  std::vector<StepTable> M;
};

struct DpOptions {
  double delta_override = 0.0;  // positive: use this grid step instead of eps / (4 H^2)
  int threads = 1;
  // Stop sweeping a (step, state) at its first infeasible promise and probe
  // the last grid point to confirm the prefix property.
  bool early_exit = true;
};

struct StepReport {
  int step = 0;  // 1-based
  double seconds = 0.0;
  std::size_t cells_solved = 0;
  std::size_t feasible_cells = 0;
  long long lp_iterations = 0;
};

struct DpReport {
  double epsilon = 0.0;
  double delta = 0.0;
  bool delta_clamped = false;
  std::int64_t grid_size = 0;
  std::size_t promise_count = 0;  // |I|
  std::size_t menu_count = 0;     // |J|
  std::size_t promise_bound = 0;  // grid_size * H * |S|
  double table_value = 0.0;       // sum_s mu(s) max_k M[0][s][k]
  double seconds = 0.0;
  std::vector<StepReport> steps;
};

struct DpResult {
  PromiseFormPolicy policy;
  DpTable table;
  DpReport report;
};

DpResult solve(const Instance& inst, double epsilon, const DpOptions& options = {});

// CSV rows "h,s,k,promise,value" in (h, s, k) order; infeasible values print as -inf.
void table_dump(const DpTable& table, const std::string& path);
std::string table_csv(const DpTable& table);

nlohmann::json report_to_json(const DpReport& report);

}  // namespace cmdp
