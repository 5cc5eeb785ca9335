#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmdp/model.hpp"

namespace cmdp {

// Simple undirected graph with maximum degree 3.
struct GraphSpec {
  int num_vertices = 0;
  std::vector<std::pair<int, int>> edges;
  int cover_size = -1;  // optional annotation: known minimum vertex cover size

  // Throws ValidationError on loops, duplicate edges, bad indices or degree > 3.
  void check() const;
  static GraphSpec path(int num_vertices);
  static GraphSpec from_json(const nlohmann::json& j);
  static GraphSpec load(const std::string& path);
};

// Three-step instance on which every Markovian policy is strictly worse than
// the best history-dependent one (best Markovian value 2, history-dependent 9/4).
Instance gen_gap();

// Three-step instance encoding a vertex-cover question on a degree-3 graph.
// State layout: per-edge states, the chain for the "no vertex" choice, the
// shared start state, one state per vertex, then the two terminal outcomes.
Instance gen_vertex_cover(const GraphSpec& g);

// Indices of the named states of gen_vertex_cover, for tests and reports.
struct VertexCoverLayout {
  int edge_state(int e) const { return e; }
  int skip_state = 0;       // reached by the "no vertex" action
  int skip_tail_state = 0;  // successor of skip_state
  int hub_state = 0;        // start state that leads uniformly to vertex states
  int vertex_base = 0;
  int success_state = 0;    // carries the final reward 1
  int failure_state = 0;
  int vertex_state(int v) const { return vertex_base + v; }
};
VertexCoverLayout vertex_cover_layout(const GraphSpec& g);

// Seeded random instance: normalized exponential-weight transition rows where
// each entry other than one kept entry is zeroed with probability `sparsity`,
// costs uniform in [0,1] with one zero-cost action per (step, state), rewards
// uniform in [0,1], B = 1.
Instance gen_random(std::uint64_t seed, int num_states, int num_actions, int horizon, double sparsity = 0.0);

// The canonical two-state, two-action, two-step property-test fixture.
Instance gen_toy2();
inline constexpr std::uint64_t kToy2Seed = 7;

// Deterministic 64-bit generator (splitmix64) used by every seeded component.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n).
  int below(int n);

 private:
  std::uint64_t state_;
};

// Stateless hash of a key tuple into a uniform double, used for counter-based
// random streams keyed by (seed, episode, step, draw).
double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace cmdp
