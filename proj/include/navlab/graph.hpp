#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/rng.hpp"

namespace navlab {

// Landmark-tag -> feature-embedding table. Drawn once per generation run and
// shared by every graph in it, so the same landmark word grounds to the same
// feature pattern on held-out graphs.
struct LandmarkCodebook {
  int dim = 0;
  std::vector<std::vector<double>> vectors;  // per tag, entries in [-1,1]

  static LandmarkCodebook make(int n_tags, int dim, Rng& rng);
};

struct GraphNode {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  int landmark = 0;  // tag index into the landmark word pool
};

// One navigable direction at a node. Index 0 at every node is the reserved
// STOP direction: no neighbor, all-zero feature.
struct Direction {
  int neighbor = -1;
  std::vector<double> feature;
};

// Immutable, connected 2-D navigation graph with per-direction panoramic
// features. Coordinates are meters; edge weights are Euclidean distances.
class NavGraph {
 public:
  // Random geometric construction: scattered nodes joined by a
  // nearest-neighbor insertion tree (connectivity fallback), then augmented
  // with close-by edges while degree caps allow. Direction k>=1 at a node is
  // its k-th neighbor in ascending heading-angle order. Features per
  // direction: codebook vector of the neighbor's landmark tag followed by
  // (cos theta, sin theta, distance, 1).
  // `spacing` scales the scatter area (square side = spacing * sqrt(n)); it
  // sets typical edge lengths in meters against the fixed 3 m success radius.
  static NavGraph generate(int n_nodes, int k_max, int feature_dim, Rng& rng,
                           const LandmarkCodebook* codebook = nullptr, double spacing = 3.0);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const GraphNode& node(int id) const;
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  int k_max() const { return k_max_; }
  int feature_dim() const { return feature_dim_; }
  uint64_t seed() const { return seed_; }
  int landmark_tags() const { return landmark_tags_; }

  int direction_count(int node) const;
  const Direction& direction(int node, int k) const;
  // Direction index whose neighbor is `neighbor`; throws if absent.
  int direction_to(int node, int neighbor) const;

  double edge_weight(int a, int b) const;

  // Dijkstra distance along edges, in meters. Memoized per source under a
  // mutex so const queries stay shareable across threads.
  double shortest_distance(int a, int b) const;
  // First move of a minimal-weight path: 0 (STOP) iff current == goal, else
  // the direction minimizing edge weight + remaining distance, ties to the
  // lowest direction index.
  int oracle_action(int current, int goal) const;
  // Node sequence obtained by iterating oracle_action from start to goal.
  std::vector<int> oracle_path(int start, int goal) const;
  double path_weight(const std::vector<int>& nodes) const;
  // Hop count of the oracle path, used by the episode sampler.
  int hop_count(int start, int goal) const;

  // Throws ValidationError with a precise message on any broken invariant.
  void validate() const;

  nlohmann::json to_json() const;
  static NavGraph from_json(const nlohmann::json& j);  // validates

 private:
  std::vector<GraphNode> nodes_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<Direction>> directions_;  // per node, [0] = STOP
  int k_max_ = 0;
  int feature_dim_ = 0;
  int landmark_tags_ = 0;
  uint64_t seed_ = 0;

  struct DistCache {
    std::mutex mutex;
    std::unordered_map<int, std::shared_ptr<const std::vector<double>>> by_source;
  };
  std::shared_ptr<DistCache> dist_cache_ = std::make_shared<DistCache>();

  std::shared_ptr<const std::vector<double>> distances_from(int source) const;
  void build_directions();
  void check_node(int id, const char* who) const;

  NavGraph() = default;
};

// Live episode progress against an immutable graph.
struct EpisodeState {
  const NavGraph* graph = nullptr;
  int node = 0;
  int steps_taken = 0;
  int t_max = 0;
  bool done = false;

  EpisodeState(const NavGraph& g, int start, int t_max_steps);
  // Applies a direction index: 0 stops, k>=1 moves. Throws on a finished
  // episode or an out-of-range direction.
  void step(int action);
};

// Default heading-encoding width appended after the landmark embedding.
inline constexpr int kHeadingFeatureDim = 4;

}  // namespace navlab
