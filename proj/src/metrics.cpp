#include "navlab/metrics.hpp"

#include <sstream>

#include "navlab/util.hpp"

namespace navlab {

double navigation_error(const NavGraph& g, int final_node, int goal) {
  return g.shortest_distance(final_node, goal);
}

bool is_success(const NavGraph& g, int final_node, int goal, double d_th) {
  if (!(d_th > 0.0)) throw ValidationError("success: threshold must be positive");
  return navigation_error(g, final_node, goal) <= d_th;
}

double spl_term(bool success, double l, double a) {
  if (!success) return 0.0;
  if (l <= 0.0) return 1.0;
  return l / std::max(a, l);
}

std::string episode_key(const Episode& ep) {
  return ep.graph_id + ":" + std::to_string(ep.start) + ">" + std::to_string(ep.goal);
}

namespace {

EvalResult aggregate(std::vector<EpisodeEval> rows) {
  EvalResult r;
  r.rows = std::move(rows);
  if (r.rows.empty()) throw ValidationError("evaluate: empty episode set");
  const double n = static_cast<double>(r.rows.size());
  for (const EpisodeEval& e : r.rows) {
    r.ne += e.ne;
    r.sr += e.success ? 1.0 : 0.0;
    r.spl += spl_term(e.success, e.l, e.a);
    r.tl += e.a;
  }
  // single division keeps the saturated cases exact (all-success SR is 1.0)
  r.ne /= n;
  r.sr /= n;
  r.spl /= n;
  r.tl /= n;
  return r;
}

EpisodeEval eval_one(const Episode& ep, const NavGraph& g, const std::vector<int>& nodes,
                     double length, double d_th) {
  if (nodes.empty() || nodes.front() != ep.start) {
    throw ValidationError("evaluate: path must begin at the episode start");
  }
  EpisodeEval row;
  row.episode_key = episode_key(ep);
  row.final_node = nodes.back();
  row.ne = navigation_error(g, row.final_node, ep.goal);
  row.success = row.ne <= d_th;
  row.l = g.shortest_distance(ep.start, ep.goal);
  row.a = length;
  return row;
}

}  // namespace

EvalResult evaluate(const std::vector<const Episode*>& episodes, const GraphStore& graphs,
                    const EpisodeRunner& runner, double d_th) {
  std::vector<EpisodeEval> rows;
  rows.reserve(episodes.size());
  for (const Episode* ep : episodes) {
    const NavGraph& g = graphs.at(ep->graph_id);
    const PathResult path = runner(g, *ep);
    rows.push_back(eval_one(*ep, g, path.nodes, path.length, d_th));
  }
  return aggregate(std::move(rows));
}

EvalResult evaluate_paths(const std::vector<const Episode*>& episodes,
                          const GraphStore& graphs,
                          const std::vector<std::vector<int>>& paths, double d_th) {
  if (episodes.size() != paths.size()) {
    throw ValidationError("evaluate_paths: episode/path count mismatch");
  }
  std::vector<EpisodeEval> rows;
  rows.reserve(episodes.size());
  for (size_t i = 0; i < episodes.size(); ++i) {
    const NavGraph& g = graphs.at(episodes[i]->graph_id);
    rows.push_back(eval_one(*episodes[i], g, paths[i], g.path_weight(paths[i]), d_th));
  }
  return aggregate(std::move(rows));
}

std::string EvalResult::to_csv() const {
  std::ostringstream out;
  out << "episode,final_node,ne,success,l,a,spl_term\n";
  for (const EpisodeEval& e : rows) {
    out << e.episode_key << "," << e.final_node << "," << format_double(e.ne) << ","
        << (e.success ? 1 : 0) << "," << format_double(e.l) << "," << format_double(e.a) << ","
        << format_double(spl_term(e.success, e.l, e.a)) << "\n";
  }
  return out.str();
}

nlohmann::json EvalResult::aggregates_json() const {
  return nlohmann::json{{"n", rows.size()}, {"ne", ne}, {"sr", sr}, {"spl", spl}, {"tl", tl}};
}

EpisodeRunner greedy_runner(const NavigatorParams& params) {
  return [&params](const NavGraph& g, const Episode& ep) {
    RolloutOptions opts;
    opts.mode = RolloutMode::kGreedy;
    TrajectoryRecord rec = rollout(ep, g, params, opts);
    return PathResult{rec.nodes, rec.path_length};
  };
}

EpisodeRunner oracle_runner() {
  return [](const NavGraph& g, const Episode& ep) {
    PathResult r;
    r.nodes = g.oracle_path(ep.start, ep.goal);
    r.length = g.path_weight(r.nodes);
    return r;
  };
}

EpisodeRunner stop_runner() {
  return [](const NavGraph&, const Episode& ep) {
    return PathResult{{ep.start}, 0.0};
  };
}

EpisodeRunner random_runner(uint64_t seed) {
  return [seed](const NavGraph& g, const Episode& ep) {
    Rng rng = substream(seed, "random_policy", fnv1a64(episode_key(ep)));
    EpisodeState state(g, ep.start, default_t_max(ep));
    PathResult r;
    r.nodes.push_back(state.node);
    while (!state.done) {
      const int prev = state.node;
      const int action = rng.uniform_int(g.direction_count(state.node));
      state.step(action);
      if (action != 0) {
        r.length += g.edge_weight(prev, state.node);
        r.nodes.push_back(state.node);
      }
    }
    return r;
  };
}

}  // namespace navlab
