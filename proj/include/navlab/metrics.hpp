#pragma once

#include <functional>
#include <string>
#include <vector>

#include "navlab/episode.hpp"
#include "navlab/navigator.hpp"

namespace navlab {

inline constexpr double kSuccessRadiusMeters = 3.0;

// Shortest-path distance from the stopping node to the goal, meters.
double navigation_error(const NavGraph& g, int final_node, int goal);
// Inclusive threshold: stopping exactly at the radius counts.
bool is_success(const NavGraph& g, int final_node, int goal,
                double d_th = kSuccessRadiusMeters);
// Per-episode success-weighted path-length term. l is the shortest start-goal
// distance, a the length actually walked. l == 0 (externally supplied
// degenerate rows) falls back to the bare success indicator.
double spl_term(bool success, double l, double a);

struct EpisodeEval {
  std::string episode_key;
  int final_node = 0;
  double ne = 0.0;
  bool success = false;
  double l = 0.0;  // shortest start-goal distance
  double a = 0.0;  // path length actually taken
};

struct EvalResult {
  std::vector<EpisodeEval> rows;
  double ne = 0.0;
  double sr = 0.0;
  double spl = 0.0;
  double tl = 0.0;

  std::string to_csv() const;           // per-episode table
  nlohmann::json aggregates_json() const;
};

// Result of executing one episode: visited nodes (start first) and the total
// edge weight walked.
struct PathResult {
  std::vector<int> nodes;
  double length = 0.0;
};

using EpisodeRunner = std::function<PathResult(const NavGraph&, const Episode&)>;

EvalResult evaluate(const std::vector<const Episode*>& episodes, const GraphStore& graphs,
                    const EpisodeRunner& runner, double d_th = kSuccessRadiusMeters);

// Like evaluate(), but over externally recorded node sequences (trajectory
// dump consumption); keys must match episode keys.
EvalResult evaluate_paths(const std::vector<const Episode*>& episodes,
                          const GraphStore& graphs,
                          const std::vector<std::vector<int>>& paths,
                          double d_th = kSuccessRadiusMeters);

std::string episode_key(const Episode& ep);

// Canned runners.
EpisodeRunner greedy_runner(const NavigatorParams& params);
EpisodeRunner oracle_runner();
EpisodeRunner stop_runner();
// Uniform over all directions including STOP; one derived stream per episode.
EpisodeRunner random_runner(uint64_t seed);

}  // namespace navlab
