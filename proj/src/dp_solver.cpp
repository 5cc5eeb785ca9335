#include "cmdp/dp_solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

namespace cmdp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct StateSweep {
  std::vector<double> values;
  std::vector<PromiseNode> nodes;
  std::size_t cells = 0;
  long long iterations = 0;
};

PromiseNode make_node(const Instance& inst, int t, std::int64_t k, const PromiseGrid& grid, const OracleResult& res) {
  const int S = inst.num_states, A = inst.num_actions;
  PromiseNode nd;
  nd.grid_index = k;
  nd.promise = grid.value(k);
  for (int a = 0; a < A; ++a) {
    if (res.alpha[a] <= 0.0) continue;
    MenuEntry m;
    m.action = a;
    m.contract = res.contracts[a];
    m.next.assign(S, 0);
    // Feasible promises of the next step form a prefix, so grid index and
    // node index coincide there.
    if (t + 1 < inst.horizon)
      for (int s2 = 0; s2 < S; ++s2) m.next[s2] = static_cast<int>(res.z[a * S + s2]);
    nd.choice.push_back(Choice{static_cast<int>(nd.menu.size()), res.alpha[a]});
    nd.menu.push_back(std::move(m));
  }
  return nd;
}

StateSweep sweep_state(const Instance& inst, int t, int s, const PromiseGrid& grid, const StepTable& next,
                       const DpOptions& opt) {
  StateSweep out;
  out.values.assign(grid.size, kNegInf);
  CellSweep sweep(inst, t, s, grid, next);
  auto run = [&](std::int64_t k) {
    try {
      OracleResult r = sweep.solve(k);
      ++out.cells;
      out.iterations += r.lp_iterations;
      return r;
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "cell (h=" << t + 1 << ",s=" << s << ",k=" << k << "): " << e.what();
      throw NumericalError(os.str());
    }
  };
  std::int64_t first_gap = -1;
  for (std::int64_t k = 0; k < grid.size; ++k) {
    OracleResult r = run(k);
    if (!r.feasible) {
      if (first_gap < 0) first_gap = k;
      if (opt.early_exit) break;
      continue;
    }
    if (first_gap >= 0) {
      std::ostringstream os;
      os << "feasible promises of (h=" << t + 1 << ",s=" << s << ") are not a grid prefix";
      throw NumericalError(os.str());
    }
    out.values[k] = r.value;
    out.nodes.push_back(make_node(inst, t, k, grid, r));
  }
  if (opt.early_exit && first_gap >= 0 && first_gap + 1 < grid.size) {
    if (run(grid.size - 1).feasible) {
      std::ostringstream os;
      os << "feasible promises of (h=" << t + 1 << ",s=" << s << ") are not a grid prefix";
      throw NumericalError(os.str());
    }
  }
  return out;
}

}  // namespace

DpResult solve(const Instance& inst, double epsilon, const DpOptions& opt) {
  auto check = validate_instance(inst);
  if (!check.ok()) throw ValidationError(check.summary());
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be positive");
  const auto start = Clock::now();
  const int H = inst.horizon, S = inst.num_states;
  DpResult out;
  DpReport& rep = out.report;
  rep.epsilon = epsilon;
  double delta = opt.delta_override > 0.0 ? opt.delta_override : epsilon / (4.0 * H * H);
  out.table.grid = PromiseGrid::make(inst, delta, &rep.delta_clamped);
  const PromiseGrid& grid = out.table.grid;
  rep.delta = grid.delta;
  rep.grid_size = grid.size;

  out.table.M.assign(H + 1, StepTable{});
  out.table.M[H] = terminal_table(S, grid);
  PromiseFormPolicy& sigma = out.policy;
  sigma = PromiseFormPolicy::empty(H, S);
  sigma.grid_step = grid.delta;
  sigma.direct = true;

  const int threads = std::max(1, opt.threads);
  for (int t = H - 1; t >= 0; --t) {
    const auto step_start = Clock::now();
    std::vector<StateSweep> sweeps(S);
    std::vector<std::exception_ptr> errors(S);
    auto work = [&](int worker) {
      for (int s = worker; s < S; s += threads) {
        try {
          sweeps[s] = sweep_state(inst, t, s, grid, out.table.M[t + 1], opt);
        } catch (...) {
          errors[s] = std::current_exception();
        }
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    StepReport sr;
    sr.step = t + 1;
    StepTable& table = out.table.M[t];
    table.value.resize(S);
    for (int s = 0; s < S; ++s) {
      table.value[s] = std::move(sweeps[s].values);
      sr.cells_solved += sweeps[s].cells;
      sr.lp_iterations += sweeps[s].iterations;
      sr.feasible_cells += sweeps[s].nodes.size();
      sigma.nodes[t][s] = std::move(sweeps[s].nodes);
    }
    sr.seconds = seconds_since(step_start);
    rep.steps.insert(rep.steps.begin(), sr);
  }

  // Keep only the best initial promise of every state.
  rep.table_value = 0.0;
  for (int s = 0; s < S; ++s) {
    auto& st = sigma.nodes[0][s];
    if (st.empty()) {
      if (inst.initial[s] > 0.0) throw NumericalError("every initial promise of state " + std::to_string(s) + " is infeasible");
      continue;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < st.size(); ++i)
      if (out.table.M[0].value[s][st[i].grid_index] > out.table.M[0].value[s][st[best].grid_index]) best = i;
    PromiseNode keep = std::move(st[best]);
    st.clear();
    st.push_back(std::move(keep));
    rep.table_value += inst.initial[s] * out.table.M[0].value[s][st[0].grid_index];
  }
  rep.promise_count = sigma.promise_count();
  rep.menu_count = sigma.menu_count();
  rep.promise_bound = static_cast<std::size_t>(grid.size) * H * S;
  rep.seconds = seconds_since(start);
  return out;
}

std::string table_csv(const DpTable& table) {
  std::string out = "h,s,k,promise,value\n";
  char buf[160];
  for (std::size_t t = 0; t < table.M.size(); ++t)
    for (std::size_t s = 0; s < table.M[t].value.size(); ++s) {
      const auto& row = table.M[t].value[s];
      for (std::size_t k = 0; k < row.size(); ++k) {
        double v = row[k];
        if (v > kNegInf)
          std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%.17g\n", t + 1, s, k, table.grid.value(k), v);
        else
          std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,-inf\n", t + 1, s, k, table.grid.value(k));
        out += buf;
      }
    }
  return out;
}

void table_dump(const DpTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write table file " + path);
  out << table_csv(table);
  if (!out) throw ValidationError("failed writing table file " + path);
}

nlohmann::json report_to_json(const DpReport& r) {
  nlohmann::json j;
  j["epsilon"] = r.epsilon;
  j["delta"] = r.delta;
  j["delta_clamped"] = r.delta_clamped;
  j["grid_size"] = r.grid_size;
  j["promise_count"] = r.promise_count;
  j["menu_count"] = r.menu_count;
  j["promise_bound"] = r.promise_bound;
  j["table_value"] = r.table_value;
  j["seconds"] = r.seconds;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"h", s.step},
                     {"seconds", s.seconds},
                     {"cells_solved", s.cells_solved},
                     {"feasible_cells", s.feasible_cells},
                     {"lp_iterations", s.lp_iterations}});
  j["steps"] = steps;
  return j;
}

}  // namespace cmdp
