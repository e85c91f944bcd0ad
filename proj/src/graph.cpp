#include "navlab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "navlab/util.hpp"

namespace navlab {

namespace {

double euclid(const GraphNode& a, const GraphNode& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

LandmarkCodebook LandmarkCodebook::make(int n_tags, int dim, Rng& rng) {
  if (n_tags <= 0 || dim <= 0) throw ValidationError("codebook: sizes must be positive");
  LandmarkCodebook cb;
  cb.dim = dim;
  cb.vectors.resize(static_cast<size_t>(n_tags));
  for (auto& v : cb.vectors) {
    v.resize(static_cast<size_t>(dim));
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
  }
  return cb;
}

NavGraph NavGraph::generate(int n_nodes, int k_max, int feature_dim, Rng& rng,
                            const LandmarkCodebook* codebook, double spacing) {
  if (n_nodes < 2) throw ValidationError("generate_graph: need at least 2 nodes");
  // k_max is a degree cap; values above n-1 are simply never reached
  if (k_max < 2) throw ValidationError("generate_graph: k_max must be >= 2");
  if (feature_dim <= kHeadingFeatureDim) {
    throw ValidationError("generate_graph: feature_dim must exceed the heading width");
  }

  NavGraph g;
  g.seed_ = rng.state();
  g.k_max_ = k_max;
  g.feature_dim_ = feature_dim;

  LandmarkCodebook local;
  const int embed_dim = feature_dim - kHeadingFeatureDim;
  if (codebook == nullptr) {
    local = LandmarkCodebook::make(16, embed_dim, rng);
    codebook = &local;
  }
  if (codebook->dim != embed_dim) {
    throw ValidationError("generate_graph: codebook width does not match feature_dim");
  }
  g.landmark_tags_ = static_cast<int>(codebook->vectors.size());

  // Scatter density sets typical edge lengths against the 3 m success radius.
  if (!(spacing > 0.0)) throw ValidationError("generate_graph: spacing must be positive");
  const double side = spacing * std::sqrt(static_cast<double>(n_nodes));
  // Tags are unique within a graph when the pool allows; duplicate landmark
  // names make "stop at the <landmark>" ambiguous.
  std::vector<int> tags(static_cast<size_t>(std::max(g.landmark_tags_, n_nodes)));
  for (size_t i = 0; i < tags.size(); ++i) tags[i] = static_cast<int>(i) % g.landmark_tags_;
  for (size_t i = tags.size(); i > 1; --i) {
    std::swap(tags[i - 1], tags[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
  }
  g.nodes_.resize(static_cast<size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    g.nodes_[static_cast<size_t>(i)] = {i, rng.uniform(0.0, side), rng.uniform(0.0, side),
                                        tags[static_cast<size_t>(i)]};
  }

  std::vector<int> degree(static_cast<size_t>(n_nodes), 0);
  std::set<std::pair<int, int>> present;
  auto add_edge = [&](int a, int b) {
    g.edges_.emplace_back(a, b);
    present.insert({std::min(a, b), std::max(a, b)});
    ++degree[static_cast<size_t>(a)];
    ++degree[static_cast<size_t>(b)];
  };

  // Nearest-neighbor insertion tree: node i joins the closest earlier node
  // with spare degree. With k_max >= 2 such a node always exists, so the
  // result is connected within the caps.
  for (int i = 1; i < n_nodes; ++i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < i; ++j) {
      if (degree[static_cast<size_t>(j)] >= k_max) continue;
      const double d = euclid(g.nodes_[static_cast<size_t>(i)], g.nodes_[static_cast<size_t>(j)]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best < 0) throw std::runtime_error("generate_graph: insertion tree ran out of capacity");
    add_edge(i, best);
  }

  // Augment with short edges while both endpoints have capacity, aiming for
  // branching beyond the tree. Candidates sorted by length.
  std::vector<std::pair<double, std::pair<int, int>>> candidates;
  for (int a = 0; a < n_nodes; ++a) {
    for (int b = a + 1; b < n_nodes; ++b) {
      candidates.push_back({euclid(g.nodes_[static_cast<size_t>(a)],
                                   g.nodes_[static_cast<size_t>(b)]),
                            {a, b}});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& l, const auto& r) {
              if (l.first != r.first) return l.first < r.first;
              return l.second < r.second;
            });
  const size_t target_edges =
      std::min(static_cast<size_t>(n_nodes) * static_cast<size_t>(k_max) / 2,
               static_cast<size_t>(std::llround(n_nodes * 1.8)));
  for (const auto& [d, e] : candidates) {
    if (g.edges_.size() >= target_edges) break;
    const auto [a, b] = e;
    if (present.count({a, b})) continue;
    if (degree[static_cast<size_t>(a)] >= k_max || degree[static_cast<size_t>(b)] >= k_max)
      continue;
    add_edge(a, b);
  }

  // Per-direction features.
  g.build_directions();
  for (int id = 0; id < n_nodes; ++id) {
    auto& dirs = g.directions_[static_cast<size_t>(id)];
    for (size_t k = 1; k < dirs.size(); ++k) {
      const GraphNode& from = g.nodes_[static_cast<size_t>(id)];
      const GraphNode& to = g.nodes_[static_cast<size_t>(dirs[k].neighbor)];
      const double dist = euclid(from, to);
      const double theta = std::atan2(to.y - from.y, to.x - from.x);
      std::vector<double> f = codebook->vectors[static_cast<size_t>(to.landmark)];
      f.push_back(std::cos(theta));
      f.push_back(std::sin(theta));
      f.push_back(dist / 10.0);  // meters scaled to O(1), comparable to the embedding channels
      f.push_back(1.0);
      dirs[k].feature = std::move(f);
    }
  }

  g.validate();
  return g;
}

void NavGraph::build_directions() {
  const int n = node_count();
  directions_.assign(static_cast<size_t>(n), {});
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const auto& [a, b] : edges_) {
    adj[static_cast<size_t>(a)].push_back(b);
    adj[static_cast<size_t>(b)].push_back(a);
  }
  for (int id = 0; id < n; ++id) {
    auto& nbrs = adj[static_cast<size_t>(id)];
    const GraphNode& from = nodes_[static_cast<size_t>(id)];
    // ascending heading angle; ties (collinear) by id
    std::sort(nbrs.begin(), nbrs.end(), [&](int l, int r) {
      const double tl = std::atan2(nodes_[static_cast<size_t>(l)].y - from.y,
                                   nodes_[static_cast<size_t>(l)].x - from.x);
      const double tr = std::atan2(nodes_[static_cast<size_t>(r)].y - from.y,
                                   nodes_[static_cast<size_t>(r)].x - from.x);
      if (tl != tr) return tl < tr;
      return l < r;
    });
    auto& dirs = directions_[static_cast<size_t>(id)];
    dirs.push_back(Direction{-1, std::vector<double>(static_cast<size_t>(feature_dim_), 0.0)});
    for (int nb : nbrs) dirs.push_back(Direction{nb, {}});
  }
}

const GraphNode& NavGraph::node(int id) const {
  check_node(id, "node");
  return nodes_[static_cast<size_t>(id)];
}

void NavGraph::check_node(int id, const char* who) const {
  if (id < 0 || id >= node_count()) {
    throw ValidationError(std::string(who) + ": unknown node id " + std::to_string(id));
  }
}

int NavGraph::direction_count(int node) const {
  check_node(node, "direction_count");
  return static_cast<int>(directions_[static_cast<size_t>(node)].size());
}

const Direction& NavGraph::direction(int node, int k) const {
  check_node(node, "direction");
  const auto& dirs = directions_[static_cast<size_t>(node)];
  if (k < 0 || k >= static_cast<int>(dirs.size())) {
    throw ValidationError("direction: index " + std::to_string(k) + " out of range at node " +
                          std::to_string(node));
  }
  return dirs[static_cast<size_t>(k)];
}

int NavGraph::direction_to(int node, int neighbor) const {
  const auto& dirs = directions_[static_cast<size_t>(node)];
  for (size_t k = 1; k < dirs.size(); ++k) {
    if (dirs[k].neighbor == neighbor) return static_cast<int>(k);
  }
  throw ValidationError("direction_to: no direction from " + std::to_string(node) + " to " +
                        std::to_string(neighbor));
}

double NavGraph::edge_weight(int a, int b) const {
  check_node(a, "edge_weight");
  check_node(b, "edge_weight");
  return euclid(nodes_[static_cast<size_t>(a)], nodes_[static_cast<size_t>(b)]);
}

std::shared_ptr<const std::vector<double>> NavGraph::distances_from(int source) const {
  {
    std::lock_guard<std::mutex> lock(dist_cache_->mutex);
    auto it = dist_cache_->by_source.find(source);
    if (it != dist_cache_->by_source.end()) return it->second;
  }
  const int n = node_count();
  auto dist = std::make_shared<std::vector<double>>(
      static_cast<size_t>(n), std::numeric_limits<double>::infinity());
  (*dist)[static_cast<size_t>(source)] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > (*dist)[static_cast<size_t>(u)]) continue;
    const auto& dirs = directions_[static_cast<size_t>(u)];
    for (size_t k = 1; k < dirs.size(); ++k) {
      const int v = dirs[k].neighbor;
      const double nd = d + edge_weight(u, v);
      if (nd < (*dist)[static_cast<size_t>(v)]) {
        (*dist)[static_cast<size_t>(v)] = nd;
        heap.push({nd, v});
      }
    }
  }
  std::lock_guard<std::mutex> lock(dist_cache_->mutex);
  auto [it, _] = dist_cache_->by_source.emplace(source, std::move(dist));
  return it->second;
}

double NavGraph::shortest_distance(int a, int b) const {
  check_node(a, "shortest_distance");
  check_node(b, "shortest_distance");
  // keyed on b: oracle queries fix the goal and vary the start
  return (*distances_from(b))[static_cast<size_t>(a)];
}

int NavGraph::oracle_action(int current, int goal) const {
  check_node(current, "oracle_action");
  check_node(goal, "oracle_action");
  if (current == goal) return 0;
  const auto dist = distances_from(goal);
  const auto& dirs = directions_[static_cast<size_t>(current)];
  int best = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (size_t k = 1; k < dirs.size(); ++k) {
    const int v = dirs[k].neighbor;
    const double cost = edge_weight(current, v) + (*dist)[static_cast<size_t>(v)];
    if (cost < best_cost) {
      best_cost = cost;
      best = static_cast<int>(k);
    }
  }
  if (best < 0) throw std::runtime_error("oracle_action: node has no outgoing direction");
  return best;
}

std::vector<int> NavGraph::oracle_path(int start, int goal) const {
  std::vector<int> path{start};
  int cur = start;
  // The oracle strictly decreases distance-to-goal each move, so node_count
  // bounds the walk on a connected graph.
  for (int guard = 0; cur != goal && guard <= node_count(); ++guard) {
    const int a = oracle_action(cur, goal);
    cur = directions_[static_cast<size_t>(cur)][static_cast<size_t>(a)].neighbor;
    path.push_back(cur);
  }
  if (cur != goal) throw std::runtime_error("oracle_path: failed to reach goal");
  return path;
}

double NavGraph::path_weight(const std::vector<int>& nodes) const {
  double w = 0.0;
  for (size_t i = 1; i < nodes.size(); ++i) w += edge_weight(nodes[i - 1], nodes[i]);
  return w;
}

int NavGraph::hop_count(int start, int goal) const {
  return static_cast<int>(oracle_path(start, goal).size()) - 1;
}

void NavGraph::validate() const {
  const int n = node_count();
  if (n < 2) throw ValidationError("graph: fewer than 2 nodes");
  for (int id = 0; id < n; ++id) {
    if (nodes_[static_cast<size_t>(id)].id != id) {
      throw ValidationError("graph: node ids must be 0..n-1 in order");
    }
  }
  for (const auto& [a, b] : edges_) {
    if (a < 0 || a >= n || b < 0 || b >= n || a == b) {
      throw ValidationError("graph: edge endpoints invalid");
    }
  }
  for (int id = 0; id < n; ++id) {
    const auto& dirs = directions_[static_cast<size_t>(id)];
    if (dirs.empty() || dirs[0].neighbor != -1) {
      throw ValidationError("graph: direction 0 must be STOP at node " + std::to_string(id));
    }
    for (double v : dirs[0].feature) {
      if (v != 0.0) {
        throw ValidationError("graph: STOP feature must be all-zero at node " +
                              std::to_string(id));
      }
    }
    if (static_cast<int>(dirs.size()) - 1 > k_max_) {
      throw ValidationError("graph: node " + std::to_string(id) + " exceeds k_max directions");
    }
    std::set<int> seen;
    for (size_t k = 1; k < dirs.size(); ++k) {
      if (!seen.insert(dirs[k].neighbor).second) {
        throw ValidationError("graph: duplicate neighbor in directions of node " +
                              std::to_string(id));
      }
      if (static_cast<int>(dirs[k].feature.size()) != feature_dim_) {
        throw ValidationError("graph: feature width mismatch at node " + std::to_string(id));
      }
    }
  }
  // connectivity (BFS over directions)
  std::vector<bool> reached(static_cast<size_t>(n), false);
  std::vector<int> frontier{0};
  reached[0] = true;
  while (!frontier.empty()) {
    const int u = frontier.back();
    frontier.pop_back();
    const auto& dirs = directions_[static_cast<size_t>(u)];
    for (size_t k = 1; k < dirs.size(); ++k) {
      if (!reached[static_cast<size_t>(dirs[k].neighbor)]) {
        reached[static_cast<size_t>(dirs[k].neighbor)] = true;
        frontier.push_back(dirs[k].neighbor);
      }
    }
  }
  for (int id = 0; id < n; ++id) {
    if (!reached[static_cast<size_t>(id)]) {
      throw ValidationError("graph: not connected (node " + std::to_string(id) +
                            " unreachable)");
    }
  }
}

nlohmann::json NavGraph::to_json() const {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& nd : nodes_) {
    j["nodes"].push_back({{"id", nd.id}, {"x", nd.x}, {"y", nd.y}, {"landmark", nd.landmark}});
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : edges_) j["edges"].push_back({a, b});
  j["feature_dim"] = feature_dim_;
  j["k_max"] = k_max_;
  j["landmark_tags"] = landmark_tags_;
  j["seed"] = seed_;
  nlohmann::json feats = nlohmann::json::object();
  for (int id = 0; id < node_count(); ++id) {
    nlohmann::json per_node = nlohmann::json::object();
    const auto& dirs = directions_[static_cast<size_t>(id)];
    for (size_t k = 0; k < dirs.size(); ++k) {
      per_node[std::to_string(k)] = dirs[k].feature;
    }
    feats[std::to_string(id)] = std::move(per_node);
  }
  j["features"] = std::move(feats);
  return j;
}

NavGraph NavGraph::from_json(const nlohmann::json& j) {
  NavGraph g;
  try {
    g.feature_dim_ = j.at("feature_dim").get<int>();
    g.k_max_ = j.at("k_max").get<int>();
    g.landmark_tags_ = j.value("landmark_tags", 0);
    g.seed_ = j.value("seed", uint64_t{0});
    for (const auto& nd : j.at("nodes")) {
      g.nodes_.push_back({nd.at("id").get<int>(), nd.at("x").get<double>(),
                          nd.at("y").get<double>(), nd.at("landmark").get<int>()});
    }
    for (const auto& e : j.at("edges")) {
      g.edges_.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("environment file: malformed JSON: ") + e.what());
  }
  g.build_directions();
  // attach stored features to the angle-ordered direction slots
  const auto& feats = j.at("features");
  for (int id = 0; id < g.node_count(); ++id) {
    auto& dirs = g.directions_[static_cast<size_t>(id)];
    const auto it = feats.find(std::to_string(id));
    if (it == feats.end()) {
      throw ValidationError("environment file: missing features for node " + std::to_string(id));
    }
    if (it->size() != dirs.size()) {
      throw ValidationError("environment file: direction count mismatch at node " +
                            std::to_string(id));
    }
    for (size_t k = 0; k < dirs.size(); ++k) {
      const auto fk = it->find(std::to_string(k));
      if (fk == it->end()) {
        throw ValidationError("environment file: missing direction " + std::to_string(k) +
                              " at node " + std::to_string(id));
      }
      dirs[k].feature = fk->get<std::vector<double>>();
    }
  }
  g.validate();
  return g;
}

EpisodeState::EpisodeState(const NavGraph& g, int start, int t_max_steps)
    : graph(&g), node(start), t_max(t_max_steps) {
  g.node(start);  // existence check
  if (t_max_steps < 1) throw ValidationError("episode: t_max must be >= 1");
}

void EpisodeState::step(int action) {
  if (done) throw ValidationError("episode: step on finished episode");
  const int count = graph->direction_count(node);
  if (action < 0 || action >= count) {
    throw ValidationError("episode: direction " + std::to_string(action) +
                          " out of range at node " + std::to_string(node));
  }
  if (action == 0) {
    done = true;
  } else {
    node = graph->direction(node, action).neighbor;
  }
  ++steps_taken;
  if (steps_taken >= t_max) done = true;
}

}  // namespace navlab
