#include "cmdp/generators.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace cmdp {

namespace {

// Gives every action at (t, s) the same zero-cost self-loop.
void pad_self_loop(Instance& inst, int t, int s) {
  for (int a = 0; a < inst.num_actions; ++a) {
    for (int s2 = 0; s2 < inst.num_states; ++s2) inst.P(t, s, a, s2) = (s2 == s) ? 1.0 : 0.0;
    inst.c(t, s, a) = 0.0;
  }
}

// Copies action `from` into every action index >= first_free at (t, s).
void pad_duplicates(Instance& inst, int t, int s, int first_free, int from) {
  for (int a = first_free; a < inst.num_actions; ++a) {
    for (int s2 = 0; s2 < inst.num_states; ++s2) inst.P(t, s, a, s2) = inst.P(t, s, from, s2);
    inst.c(t, s, a) = inst.c(t, s, from);
  }
}

void set_action(Instance& inst, int t, int s, int a, double cost, std::vector<std::pair<int, double>> next) {
  for (int s2 = 0; s2 < inst.num_states; ++s2) inst.P(t, s, a, s2) = 0.0;
  for (auto [s2, p] : next) inst.P(t, s, a, s2) = p;
  inst.c(t, s, a) = cost;
}

}  // namespace

void GraphSpec::check() const {
  if (num_vertices < 0) throw ValidationError("graph has a negative vertex count");
  std::vector<int> degree(num_vertices, 0);
  std::set<std::pair<int, int>> seen;
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_vertices || v >= num_vertices)
      throw ValidationError("graph edge references an unknown vertex");
    if (u == v) throw ValidationError("graph has a self loop");
    auto key = std::minmax(u, v);
    if (!seen.insert(key).second) throw ValidationError("graph has a duplicate edge");
    ++degree[u];
    ++degree[v];
  }
  for (int v = 0; v < num_vertices; ++v)
    if (degree[v] > 3) throw ValidationError("graph vertex " + std::to_string(v) + " has degree above 3");
}

GraphSpec GraphSpec::path(int num_vertices) {
  GraphSpec g;
  g.num_vertices = num_vertices;
  for (int v = 0; v + 1 < num_vertices; ++v) g.edges.push_back({v, v + 1});
  g.cover_size = num_vertices / 2;
  return g;
}

GraphSpec GraphSpec::from_json(const nlohmann::json& j) {
  GraphSpec g;
  try {
    g.num_vertices = j.at("vertices").get<int>();
    for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    if (j.contains("cover_size")) g.cover_size = j["cover_size"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("graph file malformed: ") + e.what());
  }
  g.check();
  return g;
}

GraphSpec GraphSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open graph file " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("graph parse error in " + path + ": " + e.what());
  }
}

Instance gen_gap() {
  enum { s0, s1, s2, s3, s4, s5 };
  Instance inst = Instance::zeros(3, 6, 3, 2.0);
  inst.initial[s0] = 1.0;
  for (int t = 0; t < 3; ++t)
    for (int s = 0; s < 6; ++s) pad_self_loop(inst, t, s);
  // Step 1.
  set_action(inst, 0, s0, 0, 0.25, {{s1, 1.0}});
  set_action(inst, 0, s0, 1, 0.0, {{s2, 1.0}});
  pad_duplicates(inst, 0, s0, 2, 1);
  inst.r(0, s0, s1) = 1.0;
  // Step 2.
  for (int s : {s1, s2}) {
    set_action(inst, 1, s, 0, 0.0, {{s3, 1.0}});
    pad_duplicates(inst, 1, s, 1, 0);
  }
  // Step 3.
  set_action(inst, 2, s3, 0, 0.5, {{s4, 1.0}});
  set_action(inst, 2, s3, 1, 0.125, {{s4, 0.5}, {s5, 0.5}});
  set_action(inst, 2, s3, 2, 0.0, {{s5, 1.0}});
  inst.r(2, s3, s4) = 2.0;
  inst.state_names = {"s0", "s1", "s2", "s3", "s4", "s5"};
  inst.action_names = {"a1", "a2", "a3"};
  return inst;
}

VertexCoverLayout vertex_cover_layout(const GraphSpec& g) {
  VertexCoverLayout L;
  const int E = static_cast<int>(g.edges.size());
  L.skip_state = E;
  L.skip_tail_state = E + 1;
  L.hub_state = E + 2;
  L.vertex_base = E + 3;
  L.success_state = E + 3 + g.num_vertices;
  L.failure_state = L.success_state + 1;
  return L;
}

Instance gen_vertex_cover(const GraphSpec& g) {
  g.check();
  if (g.num_vertices < 1) throw ValidationError("vertex-cover instance needs at least one vertex");
  const VertexCoverLayout L = vertex_cover_layout(g);
  const int E = static_cast<int>(g.edges.size());
  const int S = L.failure_state + 1;
  Instance inst = Instance::zeros(3, S, 3, 1.0);
  for (int t = 0; t < 3; ++t)
    for (int s = 0; s < S; ++s) pad_self_loop(inst, t, s);

  if (E == 0) {
    inst.initial[L.hub_state] = 1.0;
  } else {
    inst.initial[L.hub_state] = 0.1;
    for (int e = 0; e < E; ++e) inst.initial[L.edge_state(e)] = 0.9 / E;
  }
  // Step 1: edge states choose an endpoint (or nothing); the hub spreads out.
  for (int e = 0; e < E; ++e) {
    auto [u, v] = g.edges[e];
    int se = L.edge_state(e);
    set_action(inst, 0, se, 0, 0.0, {{L.skip_state, 1.0}});
    set_action(inst, 0, se, 1, 0.25, {{L.vertex_state(u), 1.0}});
    set_action(inst, 0, se, 2, 0.25, {{L.vertex_state(v), 1.0}});
    inst.r(0, se, L.vertex_state(u)) = 0.25;
    inst.r(0, se, L.vertex_state(v)) = 0.25;
  }
  {
    std::vector<std::pair<int, double>> spread;
    for (int v = 0; v < g.num_vertices; ++v) spread.push_back({L.vertex_state(v), 1.0 / g.num_vertices});
    set_action(inst, 0, L.hub_state, 0, 0.0, spread);
    pad_duplicates(inst, 0, L.hub_state, 1, 0);
  }
  // Step 2: the skip chain moves on; vertex states carry the effort gadget.
  set_action(inst, 1, L.skip_state, 0, 0.0, {{L.skip_tail_state, 1.0}});
  pad_duplicates(inst, 1, L.skip_state, 1, 0);
  for (int v = 0; v < g.num_vertices; ++v) {
    int sv = L.vertex_state(v);
    set_action(inst, 1, sv, 0, 0.5, {{L.success_state, 1.0}});
    set_action(inst, 1, sv, 1, 0.125, {{L.success_state, 0.5}, {L.failure_state, 0.5}});
    set_action(inst, 1, sv, 2, 0.0, {{L.failure_state, 1.0}});
    inst.r(1, sv, L.success_state) = 1.0;
  }
  for (int e = 0; e < E; ++e) inst.state_names.push_back("edge" + std::to_string(e));
  inst.state_names.push_back("skip");
  inst.state_names.push_back("skip_tail");
  inst.state_names.push_back("hub");
  for (int v = 0; v < g.num_vertices; ++v) inst.state_names.push_back("vertex" + std::to_string(v));
  inst.state_names.push_back("success");
  inst.state_names.push_back("failure");
  return inst;
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

int SplitMix64::below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  SplitMix64 g(seed);
  std::uint64_t k = g.next() ^ (a * 0xd1342543de82ef95ULL);
  SplitMix64 g2(k);
  k = g2.next() ^ (b * 0x9e3779b97f4a7c15ULL);
  SplitMix64 g3(k);
  k = g3.next() ^ (c * 0xbf58476d1ce4e5b9ULL);
  SplitMix64 g4(k);
  return g4.uniform();
}

Instance gen_random(std::uint64_t seed, int num_states, int num_actions, int horizon, double sparsity) {
  if (num_states < 1 || num_actions < 1 || horizon < 1) throw ValidationError("random instance sizes must be >= 1");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw ValidationError("sparsity must lie in [0,1]");
  SplitMix64 rng(seed);
  Instance inst = Instance::zeros(horizon, num_states, num_actions, 1.0);
  auto normalized_row = [&](double* out) {
    int keep = rng.below(num_states);
    double sum = 0.0;
    for (int s2 = 0; s2 < num_states; ++s2) {
      double w = -std::log(1.0 - rng.uniform());
      bool drop = s2 != keep && rng.uniform() < sparsity;
      if (s2 == keep && w <= 0.0) w = 1.0;
      out[s2] = drop ? 0.0 : w;
      sum += out[s2];
    }
    for (int s2 = 0; s2 < num_states; ++s2) out[s2] /= sum;
  };
  normalized_row(inst.initial.data());
  for (int t = 0; t < horizon; ++t)
    for (int s = 0; s < num_states; ++s) {
      int free_action = rng.below(num_actions);
      for (int a = 0; a < num_actions; ++a) {
        normalized_row(&inst.transition[inst.p_index(t, s, a, 0)]);
        double c = rng.uniform();
        inst.c(t, s, a) = (a == free_action) ? 0.0 : c;
      }
      for (int s2 = 0; s2 < num_states; ++s2) inst.r(t, s, s2) = rng.uniform();
    }
  return inst;
}

Instance gen_toy2() { return gen_random(kToy2Seed, 2, 2, 2, 0.0); }

}  // namespace cmdp
