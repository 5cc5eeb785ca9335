#include "cmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cmdp {

namespace {

std::string loc(int t, int s) {
  std::ostringstream os;
  os << "(h=" << t + 1 << ",s=" << s << ")";
  return os.str();
}

std::string loc(int t, int s, int a) {
  std::ostringstream os;
  os << "(h=" << t + 1 << ",s=" << s << ",a=" << a << ")";
  return os.str();
}

const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + name + "'");
  return *it;
}

int int_field(const nlohmann::json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) throw ValidationError(std::string("field '") + name + "' must be an integer");
  return v.get<int>();
}

double number_at(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw ValidationError("field '" + path + "' must be a number");
  return v.get<double>();
}

const nlohmann::json& array_of(const nlohmann::json& v, std::size_t n, const std::string& path) {
  if (!v.is_array() || v.size() != n) {
    std::ostringstream os;
    os << "field '" << path << "' must be an array of length " << n;
    throw ValidationError(os.str());
  }
  return v;
}

std::string idx(const std::string& base, std::initializer_list<int> ids) {
  std::string out = base;
  for (int i : ids) out += "[" + std::to_string(i) + "]";
  return out;
}

}  // namespace

Instance Instance::zeros(int horizon, int num_states, int num_actions, double payment_bound) {
  Instance inst;
  inst.horizon = horizon;
  inst.num_states = num_states;
  inst.num_actions = num_actions;
  inst.payment_bound = payment_bound;
  inst.initial.assign(num_states, 0.0);
  inst.transition.assign(static_cast<std::size_t>(horizon) * num_states * num_actions * num_states, 0.0);
  inst.reward.assign(static_cast<std::size_t>(horizon) * num_states * num_states, 0.0);
  inst.cost.assign(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0);
  return inst;
}

double Instance::max_reward() const {
  double m = 0.0;
  for (double v : reward) m = std::max(m, v);
  return m;
}

bool Contract::within_bound(double bound, double tol) const {
  for (double v : pay)
    if (!(v >= -tol && v <= bound + tol)) return false;
  return true;
}

bool same_contract(const Contract& a, const Contract& b, double tol) {
  if (a.pay.size() != b.pay.size()) return false;
  for (std::size_t i = 0; i < a.pay.size(); ++i)
    if (std::abs(a.pay[i] - b.pay[i]) > tol) return false;
  return true;
}

History History::extended(const Contract& p, int contract_id, int action, int next_state) const {
  History out = *this;
  out.contracts.push_back(p);
  out.contract_ids.push_back(contract_id);
  out.actions.push_back(action);
  out.states.push_back(next_state);
  return out;
}

History History::prefix(int h) const {
  if (h < 1 || h > length()) throw ValidationError("history prefix index out of range");
  History out;
  out.states.assign(states.begin(), states.begin() + h);
  out.contracts.assign(contracts.begin(), contracts.begin() + (h - 1));
  out.contract_ids.assign(contract_ids.begin(), contract_ids.begin() + (h - 1));
  out.actions.assign(actions.begin(), actions.begin() + (h - 1));
  return out;
}

History History::suffix(int h) const {
  if (h < 1 || h > length()) throw ValidationError("history suffix index out of range");
  History out;
  out.states.assign(states.begin() + (h - 1), states.end());
  out.contracts.assign(contracts.begin() + (h - 1), contracts.end());
  out.contract_ids.assign(contract_ids.begin() + (h - 1), contract_ids.end());
  out.actions.assign(actions.begin() + (h - 1), actions.end());
  return out;
}

History concat(const History& head, const History& tail) {
  if (head.states.empty() || tail.states.empty() || head.last_state() != tail.states.front())
    throw ValidationError("history concatenation requires the tail to start at the head's last state");
  History out = head;
  out.states.insert(out.states.end(), tail.states.begin() + 1, tail.states.end());
  out.contracts.insert(out.contracts.end(), tail.contracts.begin(), tail.contracts.end());
  out.contract_ids.insert(out.contract_ids.end(), tail.contract_ids.begin(), tail.contract_ids.end());
  out.actions.insert(out.actions.end(), tail.actions.begin(), tail.actions.end());
  return out;
}

bool history_well_formed(const History& tau, const Instance& inst, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const int h = tau.length();
  if (h < 1) return fail("history has no states");
  if (h > inst.horizon + 1) return fail("history longer than the horizon");
  if (static_cast<int>(tau.contracts.size()) != h - 1 || static_cast<int>(tau.actions.size()) != h - 1 ||
      static_cast<int>(tau.contract_ids.size()) != h - 1)
    return fail("history alternation broken");
  for (int s : tau.states)
    if (s < 0 || s >= inst.num_states) return fail("state index out of range");
  for (int a : tau.actions)
    if (a < 0 || a >= inst.num_actions) return fail("action index out of range");
  for (const auto& p : tau.contracts)
    if (static_cast<int>(p.pay.size()) != inst.num_states) return fail("contract dimension mismatch");
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& v : violations) os << "violation [" << v.rule << "] " << v.location << ": " << v.message << "\n";
  for (const auto& w : warnings) os << "warning [" << w.rule << "] " << w.location << ": " << w.message << "\n";
  return os.str();
}

ValidationReport validate_instance(const Instance& inst) {
  ValidationReport rep;
  auto violate = [&](std::string rule, std::string where, std::string msg) {
    rep.violations.push_back({std::move(rule), std::move(where), std::move(msg)});
  };
  if (inst.horizon < 1) violate("dimensions", "horizon", "horizon must be a positive integer");
  if (inst.num_states < 1) violate("dimensions", "num_states", "num_states must be positive");
  if (inst.num_actions < 1) violate("dimensions", "num_actions", "num_actions must be positive");
  if (!rep.ok()) return rep;
  const std::size_t H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  if (inst.initial.size() != S) violate("dimensions", "initial", "length must equal num_states");
  if (inst.transition.size() != H * S * A * S) violate("dimensions", "transition", "shape must be [H][S][A][S]");
  if (inst.reward.size() != H * S * S) violate("dimensions", "principal_reward", "shape must be [H][S][S]");
  if (inst.cost.size() != H * S * A) violate("dimensions", "agent_cost", "shape must be [H][S][A]");
  if (!rep.ok()) return rep;

  if (!(inst.payment_bound >= 1.0) || !std::isfinite(inst.payment_bound))
    violate("payment_bound", "payment_bound", "payment bound B must be finite and at least 1");

  double mu_sum = 0.0;
  bool mu_neg = false;
  for (double v : inst.initial) {
    mu_sum += v;
    if (!(v >= 0.0)) mu_neg = true;
  }
  if (mu_neg) violate("distribution", "initial", "initial distribution has a negative entry");
  if (std::abs(mu_sum - 1.0) > 1e-12) violate("distribution", "initial", "initial distribution must sum to 1");

  for (int t = 0; t < inst.horizon; ++t) {
    for (int s = 0; s < inst.num_states; ++s) {
      bool has_free_action = false;
      for (int a = 0; a < inst.num_actions; ++a) {
        double sum = 0.0;
        bool neg = false;
        for (int s2 = 0; s2 < inst.num_states; ++s2) {
          double v = inst.P(t, s, a, s2);
          sum += v;
          if (!(v >= 0.0)) neg = true;
        }
        if (neg) violate("distribution", loc(t, s, a), "transition row has a negative entry");
        if (std::abs(sum - 1.0) > 1e-12) {
          std::ostringstream os;
          os << "transition row sums to " << sum;
          violate("distribution", loc(t, s, a), os.str());
        }
        double c = inst.c(t, s, a);
        if (!(c >= 0.0 && c <= 1.0)) violate("cost_range", loc(t, s, a), "agent cost must lie in [0,1]");
        if (c == 0.0) has_free_action = true;
      }
      if (!has_free_action) violate("zero_cost_action", loc(t, s), "no action with zero cost");
      for (int s2 = 0; s2 < inst.num_states; ++s2) {
        double r = inst.r(t, s, s2);
        std::ostringstream where;
        where << "(h=" << t + 1 << ",s=" << s << ",s'=" << s2 << ")";
        if (!(r >= 0.0) || !std::isfinite(r)) {
          violate("reward_range", where.str(), "principal reward must be finite and nonnegative");
        } else if (r > 1.0) {
          std::ostringstream os;
          os << "reward " << r << " exceeds 1";
          rep.warnings.push_back({"reward_scale", where.str(), os.str()});
        }
      }
    }
  }
  return rep;
}

nlohmann::json instance_to_json(const Instance& inst) {
  using nlohmann::json;
  json j;
  j["schema_version"] = kInstanceSchemaVersion;
  j["horizon"] = inst.horizon;
  j["num_states"] = inst.num_states;
  j["num_actions"] = inst.num_actions;
  j["initial"] = inst.initial;
  json P = json::array(), R = json::array(), C = json::array();
  for (int t = 0; t < inst.horizon; ++t) {
    json Pt = json::array(), Rt = json::array(), Ct = json::array();
    for (int s = 0; s < inst.num_states; ++s) {
      json Ps = json::array(), Rs = json::array(), Cs = json::array();
      for (int a = 0; a < inst.num_actions; ++a) {
        json row = json::array();
        for (int s2 = 0; s2 < inst.num_states; ++s2) row.push_back(inst.P(t, s, a, s2));
        Ps.push_back(std::move(row));
        Cs.push_back(inst.c(t, s, a));
      }
      for (int s2 = 0; s2 < inst.num_states; ++s2) Rs.push_back(inst.r(t, s, s2));
      Pt.push_back(std::move(Ps));
      Rt.push_back(std::move(Rs));
      Ct.push_back(std::move(Cs));
    }
    P.push_back(std::move(Pt));
    R.push_back(std::move(Rt));
    C.push_back(std::move(Ct));
  }
  j["transition"] = std::move(P);
  j["principal_reward"] = std::move(R);
  j["agent_cost"] = std::move(C);
  j["payment_bound"] = inst.payment_bound;
  if (!inst.state_names.empty()) j["state_names"] = inst.state_names;
  if (!inst.action_names.empty()) j["action_names"] = inst.action_names;
  return j;
}

Instance instance_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("instance file must contain a JSON object");
  int version = int_field(j, "schema_version");
  if (version != kInstanceSchemaVersion)
    throw ValidationError("unsupported instance schema_version " + std::to_string(version));
  int H = int_field(j, "horizon");
  int S = int_field(j, "num_states");
  int A = int_field(j, "num_actions");
  if (H < 1) throw ValidationError("field 'horizon' must be a positive integer");
  if (S < 1) throw ValidationError("field 'num_states' must be a positive integer");
  if (A < 1) throw ValidationError("field 'num_actions' must be a positive integer");
  Instance inst = Instance::zeros(H, S, A, number_at(field(j, "payment_bound"), "payment_bound"));

  const auto& mu = array_of(field(j, "initial"), S, "initial");
  for (int s = 0; s < S; ++s) inst.initial[s] = number_at(mu[s], idx("initial", {s}));

  const auto& P = array_of(field(j, "transition"), H, "transition");
  const auto& R = array_of(field(j, "principal_reward"), H, "principal_reward");
  const auto& C = array_of(field(j, "agent_cost"), H, "agent_cost");
  for (int t = 0; t < H; ++t) {
    const auto& Pt = array_of(P[t], S, idx("transition", {t}));
    const auto& Rt = array_of(R[t], S, idx("principal_reward", {t}));
    const auto& Ct = array_of(C[t], S, idx("agent_cost", {t}));
    for (int s = 0; s < S; ++s) {
      const auto& Ps = array_of(Pt[s], A, idx("transition", {t, s}));
      const auto& Rs = array_of(Rt[s], S, idx("principal_reward", {t, s}));
      const auto& Cs = array_of(Ct[s], A, idx("agent_cost", {t, s}));
      for (int a = 0; a < A; ++a) {
        const auto& row = array_of(Ps[a], S, idx("transition", {t, s, a}));
        for (int s2 = 0; s2 < S; ++s2) inst.P(t, s, a, s2) = number_at(row[s2], idx("transition", {t, s, a, s2}));
        inst.c(t, s, a) = number_at(Cs[a], idx("agent_cost", {t, s, a}));
      }
      for (int s2 = 0; s2 < S; ++s2) inst.r(t, s, s2) = number_at(Rs[s2], idx("principal_reward", {t, s, s2}));
    }
  }
  if (j.contains("state_names")) inst.state_names = j["state_names"].get<std::vector<std::string>>();
  if (j.contains("action_names")) inst.action_names = j["action_names"].get<std::vector<std::string>>();

  ValidationReport rep = validate_instance(inst);
  if (!rep.ok()) throw ValidationError("instance violates invariants:\n" + rep.summary());
  return inst;
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open instance file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("instance parse error in " + path + ": " + e.what());
  }
  return instance_from_json(j);
}

void save_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write instance file " + path);
  out << instance_to_json(inst).dump(1) << "\n";
}

std::vector<std::vector<char>> reachable_states(const Instance& inst) {
  std::vector<std::vector<char>> reach(inst.horizon + 1, std::vector<char>(inst.num_states, 0));
  for (int s = 0; s < inst.num_states; ++s) reach[0][s] = inst.initial[s] > 0.0;
  for (int t = 0; t < inst.horizon; ++t)
    for (int s = 0; s < inst.num_states; ++s) {
      if (!reach[t][s]) continue;
      for (int a = 0; a < inst.num_actions; ++a)
        for (int s2 = 0; s2 < inst.num_states; ++s2)
          if (inst.P(t, s, a, s2) > 0.0) reach[t + 1][s2] = 1;
    }
  return reach;
}

std::vector<int> action_representatives(const Instance& inst, int t, int s) {
  std::vector<int> rep(inst.num_actions);
  for (int a = 0; a < inst.num_actions; ++a) {
    rep[a] = a;
    for (int b = 0; b < a; ++b) {
      if (rep[b] != b || inst.c(t, s, a) != inst.c(t, s, b)) continue;
      if (std::equal(inst.row(t, s, a), inst.row(t, s, a) + inst.num_states, inst.row(t, s, b))) {
        rep[a] = b;
        break;
      }
    }
  }
  return rep;
}

}  // namespace cmdp
