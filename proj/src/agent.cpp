#include "cmdp/agent.hpp"

#include <algorithm>
#include <cmath>

#include "cmdp/generators.hpp"

namespace cmdp {

namespace {

AgentPolicy build_agent(const PromiseFormPolicy& sigma, const Instance& inst, bool recommended, AgentTie tie) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  AgentPolicy ag;
  ag.follows_recommendation = recommended;
  ag.tie = tie;
  ag.at.resize(H);
  for (int t = H - 1; t >= 0; --t) {
    ag.at[t].resize(S);
    for (int s = 0; s < S; ++s) {
      const auto& st = sigma.nodes[t][s];
      ag.at[t][s].resize(st.size());
      for (std::size_t i = 0; i < st.size(); ++i) {
        const PromiseNode& nd = st[i];
        NodeAgent& na = ag.at[t][s][i];
        const std::size_t E = nd.menu.size();
        na.played.assign(E, 0);
        na.agent_q.assign(E, 0.0);
        na.principal_q.assign(E, 0.0);
        for (std::size_t e = 0; e < E; ++e) {
          const MenuEntry& m = nd.menu[e];
          std::vector<double> au(A, 0.0), pu(A, 0.0);
          for (int b = 0; b < A; ++b)
            for (int s2 = 0; s2 < S; ++s2) {
              double p = inst.P(t, s, b, s2);
              if (p == 0.0) continue;
              double wa = 0.0, wp = 0.0;
              if (t + 1 < H && m.next[s2] >= 0) {
                const NodeAgent& nx = ag.at[t + 1][s2][m.next[s2]];
                wa = nx.agent_value;
                wp = nx.principal_value;
              }
              au[b] += p * (m.contract.pay[s2] - inst.c(t, s, b) + wa);
              pu[b] += p * (inst.r(t, s, s2) - m.contract.pay[s2] + wp);
            }
          int pick = m.action;
          if (!recommended) {
            double best = *std::max_element(au.begin(), au.end());
            auto tied = [&](int b) { return au[b] >= best - kTieTol; };
            auto extreme = [&](bool maximize) {
              int q = -1;
              for (int b = 0; b < A; ++b)
                if (tied(b) && (q < 0 || (maximize ? pu[b] > pu[q] : pu[b] < pu[q]))) q = b;
              return q;
            };
            switch (tie) {
              case AgentTie::Recommendation:
                pick = tied(m.action) ? m.action : extreme(true);
                break;
              case AgentTie::Principal: {
                int q = extreme(true);
                pick = (tied(m.action) && pu[m.action] >= pu[q] - kTieTol) ? m.action : q;
                break;
              }
              case AgentTie::Adversarial:
                pick = extreme(false);
                break;
              case AgentTie::Lexicographic:
                pick = 0;
                while (!tied(pick)) ++pick;
                break;
            }
          }
          na.played[e] = pick;
          na.agent_q[e] = au[pick];
          na.principal_q[e] = pu[pick];
        }
        for (const Choice& c : nd.choice) {
          na.agent_value += c.prob * na.agent_q[c.entry];
          na.principal_value += c.prob * na.principal_q[c.entry];
        }
      }
    }
  }
  return ag;
}

// Index drawn from weights summing to (about) 1 by inverse transform.
template <class Weight>
int draw_index(double u, int n, Weight w) {
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < n; ++i) {
    double wi = w(i);
    if (wi <= 0.0) continue;
    last = i;
    acc += wi;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace

AgentPolicy best_response(const PromiseFormPolicy& sigma, const Instance& inst, AgentTie tie) {
  return build_agent(sigma, inst, false, tie);
}

AgentPolicy recommended_agent(const PromiseFormPolicy& sigma, const Instance& inst) {
  return build_agent(sigma, inst, true, AgentTie::Recommendation);
}

nlohmann::json trajectory_to_json(const Trajectory& tr) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& st : tr.steps)
    steps.push_back({{"state", st.state},
                     {"contract", st.contract.pay},
                     {"contract_id", st.contract_id},
                     {"recommended", st.recommended},
                     {"played", st.played},
                     {"next_state", st.next_state},
                     {"principal_utility", st.principal_utility},
                     {"agent_utility", st.agent_utility}});
  return {{"steps", steps},
          {"final_state", tr.final_state},
          {"principal_total", tr.principal_total},
          {"agent_total", tr.agent_total}};
}

SimulationResult simulate(const PromiseFormPolicy& sigma, const AgentPolicy& agent, const Instance& inst,
                          std::uint64_t seed, long long episodes, bool keep) {
  if (episodes < 1) throw ValidationError("simulate needs at least one episode");
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states;
  SimulationResult out;
  out.episodes = episodes;
  std::vector<double> tot_p, tot_a;
  tot_p.reserve(episodes);
  tot_a.reserve(episodes);
  for (long long ep = 0; ep < episodes; ++ep) {
    const auto e = static_cast<std::uint64_t>(ep);
    Trajectory tr;
    int s = draw_index(counter_uniform(seed, e, 0, 0), S, [&](int x) { return inst.initial[x]; });
    int node = 0;
    for (int t = 0; t < H; ++t) {
      const PromiseNode& nd = sigma.nodes[t][s][node];
      int ci = draw_index(counter_uniform(seed, e, t, 1), static_cast<int>(nd.choice.size()),
                          [&](int x) { return nd.choice[x].prob; });
      int entry = nd.choice[ci].entry;
      const MenuEntry& m = nd.menu[entry];
      int played = agent.play(t, s, node, entry);
      int s2 = draw_index(counter_uniform(seed, e, t, 2), S, [&](int x) { return inst.P(t, s, played, x); });
      TrajectoryStep step;
      step.state = s;
      step.node = node;
      step.contract = m.contract;
      step.contract_id = sigma.contract_id(t, s, node, entry);
      step.recommended = m.action;
      step.played = played;
      step.next_state = s2;
      step.principal_utility = inst.r(t, s, s2) - m.contract.pay[s2];
      step.agent_utility = m.contract.pay[s2] - inst.c(t, s, played);
      tr.principal_total += step.principal_utility;
      tr.agent_total += step.agent_utility;
      if (keep) tr.steps.push_back(std::move(step));
      node = t + 1 < H ? m.next[s2] : 0;
      s = s2;
      if (node < 0) throw ValidationError("simulation reached a next state without a promise");
    }
    tr.final_state = s;
    tot_p.push_back(tr.principal_total);
    tot_a.push_back(tr.agent_total);
    if (keep) out.trajectories.push_back(std::move(tr));
  }
  const double n = static_cast<double>(episodes);
  auto stats = [&](const std::vector<double>& x, double& mean, double& se) {
    double sum = 0.0;
    for (double v : x) sum += v;
    mean = sum / n;
    double sq = 0.0;
    for (double v : x) sq += (v - mean) * (v - mean);
    se = episodes < 2 ? 0.0 : std::sqrt(sq / (n - 1.0) / n);
  };
  stats(tot_p, out.mean_principal, out.se_principal);
  stats(tot_a, out.mean_agent, out.se_agent);
  return out;
}

ExactValue exact_value(const PromiseFormPolicy& sigma, const AgentPolicy& agent, const Instance& inst,
                       std::size_t cap) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states;
  ExactValue out;
  auto dfs = [&](auto&& self, int t, int s, int node, double prob, double up, double ua) -> void {
    if (t == H) {
      if (++out.histories > cap) throw CapExceeded("exact evaluation exceeds the history cap");
      out.principal += prob * up;
      out.agent += prob * ua;
      return;
    }
    const PromiseNode& nd = sigma.nodes[t][s][node];
    for (const Choice& c : nd.choice) {
      const MenuEntry& m = nd.menu[c.entry];
      int played = agent.play(t, s, node, c.entry);
      for (int s2 = 0; s2 < S; ++s2) {
        double p = inst.P(t, s, played, s2);
        if (p == 0.0) continue;
        int next = t + 1 < H ? m.next[s2] : 0;
        if (next < 0) throw ValidationError("exact evaluation reached a next state without a promise");
        self(self, t + 1, s2, next, prob * c.prob * p, up + inst.r(t, s, s2) - m.contract.pay[s2],
             ua + m.contract.pay[s2] - inst.c(t, s, played));
      }
    }
  };
  for (int s = 0; s < S; ++s)
    if (inst.initial[s] > 0.0) dfs(dfs, 0, s, 0, inst.initial[s], 0.0, 0.0);
  return out;
}

ExactValue recursive_value(const PromiseFormPolicy&, const AgentPolicy& agent, const Instance& inst) {
  ExactValue out;
  for (int s = 0; s < inst.num_states; ++s)
    if (inst.initial[s] > 0.0) {
      out.principal += inst.initial[s] * agent.at[0][s][0].principal_value;
      out.agent += inst.initial[s] * agent.at[0][s][0].agent_value;
    }
  return out;
}

}  // namespace cmdp
