#include "cmdp/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cmdp {

int LinearProgram::add_var(double obj, std::string name) {
  objective.push_back(obj);
  var_names.push_back(std::move(name));
  return num_vars++;
}

int LinearProgram::add_row(std::vector<std::pair<int, double>> coefs, RowSense sense, double rhs, std::string name) {
  rows.push_back(LpRow{std::move(coefs), sense, rhs, std::move(name)});
  return static_cast<int>(rows.size()) - 1;
}

std::string LinearProgram::dump() const {
  std::ostringstream os;
  os.precision(17);
  auto var = [&](int j) {
    return (j < static_cast<int>(var_names.size()) && !var_names[j].empty()) ? var_names[j] : "x" + std::to_string(j);
  };
  os << "maximize\n obj:";
  for (int j = 0; j < num_vars; ++j)
    if (objective[j] != 0.0) os << " " << (objective[j] < 0 ? "- " : "+ ") << std::abs(objective[j]) << " " << var(j);
  os << "\nsubject to\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    os << " " << (row.name.empty() ? "r" + std::to_string(i) : row.name) << ":";
    for (auto [j, v] : row.coefs) os << " " << (v < 0 ? "- " : "+ ") << std::abs(v) << " " << var(j);
    os << (row.sense == RowSense::LessEqual ? " <= " : row.sense == RowSense::GreaterEqual ? " >= " : " = ")
       << row.rhs << "\n";
  }
  os << "bounds\n";
  for (int j = 0; j < num_vars; ++j) os << " " << var(j) << " >= 0\n";
  os << "end\n";
  return os.str();
}

double LinearProgram::max_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (int j = 0; j < num_vars; ++j) worst = std::max(worst, -x[j]);
  for (const auto& row : rows) {
    double lhs = 0.0;
    for (auto [j, v] : row.coefs) lhs += v * x[j];
    double viol = 0.0;
    switch (row.sense) {
      case RowSense::LessEqual: viol = lhs - row.rhs; break;
      case RowSense::GreaterEqual: viol = row.rhs - lhs; break;
      case RowSense::Equal: viol = std::abs(lhs - row.rhs); break;
    }
    worst = std::max(worst, viol);
  }
  return worst;
}

double LinearProgram::evaluate_objective(const std::vector<double>& x) const {
  double v = 0.0;
  for (int j = 0; j < num_vars; ++j) v += objective[j] * x[j];
  return v;
}

// Standard form: rows scaled by sign so that the cold-start right-hand side is
// nonnegative; every inequality gets a slack column, every >= or = row gets
// an artificial column. Columns are [structural | slack | artificial].
struct SimplexSession::Impl {
  const LinearProgram* lp = nullptr;
  SimplexOptions opts;
  int m = 0, n = 0, n_slack = 0, n_art = 0, n_cols = 0;
  std::vector<double> sign;
  std::vector<int> col_start, col_row;
  std::vector<double> col_val;
  std::vector<double> b;
  std::vector<int> basis;
  std::vector<int> pos_in_basis;  // -1 if nonbasic
  std::vector<double> binv;       // m x m row major
  std::vector<double> xb;
  std::vector<char> redundant_row;
  bool have_basis = false;
  int iterations = 0;

  bool is_art(int j) const { return j >= n + n_slack; }

  void build() {
    m = static_cast<int>(lp->rows.size());
    n = lp->num_vars;
    sign.assign(m, 1.0);
    std::vector<RowSense> sense(m);
    for (int i = 0; i < m; ++i) {
      const auto& row = lp->rows[i];
      sense[i] = row.sense;
      if (row.rhs < 0.0) {
        sign[i] = -1.0;
        if (row.sense == RowSense::LessEqual) sense[i] = RowSense::GreaterEqual;
        else if (row.sense == RowSense::GreaterEqual) sense[i] = RowSense::LessEqual;
      }
    }
    // Structural columns via transpose of the row lists.
    std::vector<int> count(n, 0);
    for (const auto& row : lp->rows)
      for (auto [j, v] : row.coefs) {
        if (j < 0 || j >= n) throw NumericalError("LP row references an unknown variable");
        if (v != 0.0) ++count[j];
      }
    n_slack = 0;
    n_art = 0;
    for (int i = 0; i < m; ++i) {
      if (sense[i] != RowSense::Equal) ++n_slack;
      if (sense[i] != RowSense::LessEqual) ++n_art;
    }
    n_cols = n + n_slack + n_art;
    col_start.assign(n_cols + 1, 0);
    for (int j = 0; j < n; ++j) col_start[j + 1] = col_start[j] + count[j];
    for (int k = n; k < n_cols; ++k) col_start[k + 1] = col_start[k] + 1;
    col_row.assign(col_start[n_cols], 0);
    col_val.assign(col_start[n_cols], 0.0);
    std::vector<int> fill(col_start.begin(), col_start.begin() + n);
    for (int i = 0; i < m; ++i)
      for (auto [j, v] : lp->rows[i].coefs) {
        if (v == 0.0) continue;
        col_row[fill[j]] = i;
        col_val[fill[j]] = sign[i] * v;
        ++fill[j];
      }
    basis.assign(m, -1);
    int slack = n, art = n + n_slack;
    for (int i = 0; i < m; ++i) {
      if (sense[i] != RowSense::Equal) {
        int k = slack++;
        col_row[col_start[k]] = i;
        col_val[col_start[k]] = (sense[i] == RowSense::LessEqual) ? 1.0 : -1.0;
        if (sense[i] == RowSense::LessEqual) basis[i] = k;
      }
      if (sense[i] != RowSense::LessEqual) {
        int k = art++;
        col_row[col_start[k]] = i;
        col_val[col_start[k]] = 1.0;
        basis[i] = k;
      }
    }
    load_rhs();
    pos_in_basis.assign(n_cols, -1);
    for (int i = 0; i < m; ++i) pos_in_basis[basis[i]] = i;
    redundant_row.assign(m, 0);
    binv.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) binv[static_cast<std::size_t>(i) * m + i] = 1.0;
    xb = b;
  }

  void load_rhs() {
    b.assign(m, 0.0);
    for (int i = 0; i < m; ++i) b[i] = sign[i] * lp->rows[i].rhs;
  }

  double* brow(int i) { return &binv[static_cast<std::size_t>(i) * m]; }

  // u = Binv * A_j
  void ftran(int j, std::vector<double>& u) {
    u.assign(m, 0.0);
    for (int k = col_start[j]; k < col_start[j + 1]; ++k) {
      int r = col_row[k];
      double v = col_val[k];
      for (int i = 0; i < m; ++i) u[i] += binv[static_cast<std::size_t>(i) * m + r] * v;
    }
  }

  double dot_col(const std::vector<double>& y, int j) const {
    double s = 0.0;
    for (int k = col_start[j]; k < col_start[j + 1]; ++k) s += y[col_row[k]] * col_val[k];
    return s;
  }

  void refactor() {
    // Gauss-Jordan inversion of the basis matrix with partial pivoting.
    std::vector<double> B(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
      int j = basis[i];
      for (int k = col_start[j]; k < col_start[j + 1]; ++k) B[static_cast<std::size_t>(col_row[k]) * m + i] = col_val[k];
    }
    std::vector<double> inv(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) inv[static_cast<std::size_t>(i) * m + i] = 1.0;
    for (int c = 0; c < m; ++c) {
      int piv = c;
      double best = std::abs(B[static_cast<std::size_t>(c) * m + c]);
      for (int r = c + 1; r < m; ++r) {
        double v = std::abs(B[static_cast<std::size_t>(r) * m + c]);
        if (v > best) {
          best = v;
          piv = r;
        }
      }
      if (best < opts.abort_pivot) throw NumericalError("simplex basis became singular during refactorization");
      if (piv != c) {
        for (int k = 0; k < m; ++k) {
          std::swap(B[static_cast<std::size_t>(c) * m + k], B[static_cast<std::size_t>(piv) * m + k]);
          std::swap(inv[static_cast<std::size_t>(c) * m + k], inv[static_cast<std::size_t>(piv) * m + k]);
        }
      }
      double d = B[static_cast<std::size_t>(c) * m + c];
      for (int k = 0; k < m; ++k) {
        B[static_cast<std::size_t>(c) * m + k] /= d;
        inv[static_cast<std::size_t>(c) * m + k] /= d;
      }
      for (int r = 0; r < m; ++r) {
        if (r == c) continue;
        double f = B[static_cast<std::size_t>(r) * m + c];
        if (f == 0.0) continue;
        for (int k = 0; k < m; ++k) {
          B[static_cast<std::size_t>(r) * m + k] -= f * B[static_cast<std::size_t>(c) * m + k];
          inv[static_cast<std::size_t>(r) * m + k] -= f * inv[static_cast<std::size_t>(c) * m + k];
        }
      }
    }
    // inv = B^{-1} where B's column i is basis[i]; rows of inv index basis positions.
    binv = std::move(inv);
    xb.assign(m, 0.0);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      const double* r = brow(i);
      for (int k = 0; k < m; ++k) s += r[k] * b[k];
      xb[i] = s;
    }
  }

  void pivot(int r, int q, const std::vector<double>& u) {
    double ur = u[r];
    if (std::abs(ur) < opts.abort_pivot) throw NumericalError("simplex pivot magnitude below abort threshold");
    double theta = xb[r] / ur;
    for (int i = 0; i < m; ++i)
      if (i != r) xb[i] -= theta * u[i];
    xb[r] = theta;
    double* rr = brow(r);
    for (int k = 0; k < m; ++k) rr[k] /= ur;
    for (int i = 0; i < m; ++i) {
      if (i == r || u[i] == 0.0) continue;
      double f = u[i];
      double* ri = brow(i);
      for (int k = 0; k < m; ++k) ri[k] -= f * rr[k];
    }
    pos_in_basis[basis[r]] = -1;
    basis[r] = q;
    pos_in_basis[q] = r;
    ++iterations;
  }

  void duals(const std::vector<double>& cost, std::vector<double>& y) {
    y.assign(m, 0.0);
    for (int i = 0; i < m; ++i) {
      double cb = cost[basis[i]];
      if (cb == 0.0) continue;
      const double* r = brow(i);
      for (int k = 0; k < m; ++k) y[k] += cb * r[k];
    }
  }

  enum class Outcome { Optimal, Unbounded };

  // Primal simplex maximizing cost over columns allowed to enter.
  Outcome primal(const std::vector<double>& cost, bool allow_art) {
    std::vector<double> y, u;
    int streak = 0;
    int since_refactor = 0;
    for (;;) {
      if (iterations > opts.max_iterations) throw NumericalError("simplex iteration limit exceeded");
      if (since_refactor >= opts.refactor_every) {
        refactor();
        since_refactor = 0;
      }
      duals(cost, y);
      bool bland = opts.always_bland || streak >= opts.degenerate_streak;
      int q = -1;
      double best = opts.optimality_tol;
      for (int j = 0; j < n_cols; ++j) {
        if (pos_in_basis[j] >= 0 || (!allow_art && is_art(j))) continue;
        double d = cost[j] - dot_col(y, j);
        if (d > best) {
          q = j;
          best = d;
          if (bland) break;
        }
      }
      if (q < 0) return Outcome::Optimal;
      ftran(q, u);
      int r = -1;
      double theta = 0.0, ubest = 0.0;
      for (int i = 0; i < m; ++i) {
        if (u[i] <= opts.pivot_tol || redundant_row[i]) continue;
        double ratio = std::max(xb[i], 0.0) / u[i];
        bool take = false;
        if (r < 0 || ratio < theta - 1e-12) {
          take = true;
        } else if (ratio <= theta + 1e-12) {
          if (bland) take = basis[i] < basis[r];
          else take = u[i] > ubest || (u[i] == ubest && basis[i] < basis[r]);
        }
        if (take) {
          r = i;
          theta = ratio;
          ubest = u[i];
        }
      }
      if (r < 0) return Outcome::Unbounded;
      streak = (theta <= 1e-12) ? streak + 1 : 0;
      pivot(r, q, u);
      ++since_refactor;
    }
  }

  // Dual simplex from a dual-feasible basis; returns false when the primal is
  // infeasible, true at optimality.
  bool dual(const std::vector<double>& cost) {
    std::vector<double> y, u, rho(m);
    int since_refactor = 0;
    int local = 0;
    const int limit = 50 * (m + n_cols) + 1000;
    for (;;) {
      if (++local > limit) throw NumericalError("dual simplex iteration limit exceeded");
      if (since_refactor >= opts.refactor_every) {
        refactor();
        since_refactor = 0;
      }
      int r = -1;
      double worst = -opts.feasibility_tol;
      for (int i = 0; i < m; ++i)
        if (xb[i] < worst) {
          worst = xb[i];
          r = i;
        }
      if (r < 0) return true;
      const double* br = brow(r);
      for (int k = 0; k < m; ++k) rho[k] = br[k];
      duals(cost, y);
      int q = -1;
      double best_ratio = 0.0, best_alpha = 0.0;
      for (int j = 0; j < n_cols; ++j) {
        if (pos_in_basis[j] >= 0 || is_art(j)) continue;
        double alpha = dot_col(rho, j);
        if (alpha >= -opts.pivot_tol) continue;
        double d = std::min(0.0, cost[j] - dot_col(y, j));
        double ratio = -d / -alpha;
        bool take = false;
        if (q < 0 || ratio < best_ratio - 1e-12) take = true;
        else if (ratio <= best_ratio + 1e-12) take = -alpha > -best_alpha;
        if (take) {
          q = j;
          best_ratio = ratio;
          best_alpha = alpha;
        }
      }
      if (q < 0) return false;
      ftran(q, u);
      pivot(r, q, u);
      ++since_refactor;
    }
  }

  std::vector<double> phase2_cost() const {
    std::vector<double> cost(n_cols, 0.0);
    for (int j = 0; j < n; ++j) cost[j] = lp->objective[j];
    return cost;
  }

  LpResult extract(const std::vector<double>& cost) {
    LpResult res;
    res.status = LpStatus::Optimal;
    res.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
      if (basis[i] < n) res.x[basis[i]] = std::max(0.0, xb[i]);
    res.objective = lp->evaluate_objective(res.x);
    std::vector<double> y;
    duals(cost, y);
    res.row_duals.assign(m, 0.0);
    for (int i = 0; i < m; ++i) res.row_duals[i] = sign[i] * y[i];
    res.iterations = iterations;
    return res;
  }

  // Confirms primal and dual feasibility of the current basis from scratch.
  bool certified(const std::vector<double>& cost, const LpResult& res) {
    double scale = 1.0;
    for (const auto& row : lp->rows) scale = std::max(scale, std::abs(row.rhs));
    if (lp->max_violation(res.x) > opts.feasibility_tol * scale) return false;
    std::vector<double> y;
    duals(cost, y);
    for (int j = 0; j < n_cols; ++j) {
      if (pos_in_basis[j] >= 0 || is_art(j)) continue;
      if (cost[j] - dot_col(y, j) > opts.optimality_tol * 10) return false;
    }
    return true;
  }

  LpResult cold() {
    build();
    iterations = 0;
    have_basis = false;
    LpResult res;
    if (n_art > 0) {
      std::vector<double> c1(n_cols, 0.0);
      for (int j = n + n_slack; j < n_cols; ++j) c1[j] = -1.0;
      primal(c1, true);
      refactor();
      double infeas = 0.0, scale = 1.0;
      for (int i = 0; i < m; ++i) {
        if (is_art(basis[i])) infeas += std::max(0.0, xb[i]);
        scale = std::max(scale, std::abs(b[i]));
      }
      if (infeas > opts.feasibility_tol * scale) {
        res.status = LpStatus::Infeasible;
        res.iterations = iterations;
        return res;
      }
      // Drive remaining artificials out of the basis with degenerate pivots.
      std::vector<double> u;
      for (int i = 0; i < m; ++i) {
        if (!is_art(basis[i])) continue;
        const double* br = brow(i);
        std::vector<double> rho(br, br + m);
        int q = -1;
        double best = 1e-9;
        for (int j = 0; j < n + n_slack; ++j) {
          if (pos_in_basis[j] >= 0) continue;
          double a = std::abs(dot_col(rho, j));
          if (a > best) {
            best = a;
            q = j;
          }
        }
        if (q < 0) {
          redundant_row[i] = 1;
          continue;
        }
        ftran(q, u);
        pivot(i, q, u);
      }
      refactor();
    }
    std::vector<double> c2 = phase2_cost();
    if (primal(c2, false) == Outcome::Unbounded) {
      res.status = LpStatus::Unbounded;
      res.iterations = iterations;
      return res;
    }
    refactor();
    res = extract(c2);
    if (!certified(c2, res)) {
      // One more pass from the refactored basis before giving up.
      primal(c2, false);
      refactor();
      res = extract(c2);
      if (!certified(c2, res)) throw NumericalError("simplex could not certify the optimal basis");
    }
    bool any_redundant = std::any_of(redundant_row.begin(), redundant_row.end(), [](char c) { return c != 0; });
    have_basis = !any_redundant;
    return res;
  }

  LpResult warm() {
    load_rhs();
    refactor();
    std::vector<double> c2 = phase2_cost();
    LpResult res;
    iterations = 0;
    try {
      if (!dual(c2)) {
        res.status = LpStatus::Infeasible;
        res.iterations = iterations;
        res.warm_started = true;
        // The basis stays dual feasible, so later warm starts remain valid.
        return res;
      }
      refactor();
      res = extract(c2);
      if (certified(c2, res)) {
        res.warm_started = true;
        return res;
      }
    } catch (const NumericalError&) {
    }
    return cold();
  }
};

LpResult SimplexSolver::solve(const LinearProgram& lp) {
  SimplexSession session(lp, opts_);
  return session.solve_cold();
}

SimplexSession::SimplexSession(LinearProgram lp, SimplexOptions opts)
    : lp_(std::move(lp)), opts_(opts), impl_(std::make_unique<Impl>()) {
  impl_->lp = &lp_;
  impl_->opts = opts_;
}

SimplexSession::~SimplexSession() = default;

SimplexSession::SimplexSession(SimplexSession&& other) noexcept
    : lp_(std::move(other.lp_)), opts_(other.opts_), impl_(std::move(other.impl_)) {
  if (impl_) impl_->lp = &lp_;
}

SimplexSession& SimplexSession::operator=(SimplexSession&& other) noexcept {
  lp_ = std::move(other.lp_);
  opts_ = other.opts_;
  impl_ = std::move(other.impl_);
  if (impl_) impl_->lp = &lp_;
  return *this;
}

void SimplexSession::set_rhs(int row, double rhs) { lp_.rows.at(row).rhs = rhs; }

LpResult SimplexSession::solve() {
  if (impl_->have_basis) return impl_->warm();
  return impl_->cold();
}

LpResult SimplexSession::solve_cold() { return impl_->cold(); }

}  // namespace cmdp
