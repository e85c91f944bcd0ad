#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "navlab/episode.hpp"
#include "navlab/util.hpp"

using namespace navlab;

namespace {

// Chain/elbow graphs for hand-checked headings, via the JSON loader.
nlohmann::json graph_json(const std::vector<std::pair<double, double>>& coords,
                          const std::vector<std::pair<int, int>>& edges, int tags = 8) {
  const int feature_dim = 6;
  nlohmann::json j;
  j["feature_dim"] = feature_dim;
  j["k_max"] = 4;
  j["landmark_tags"] = tags;
  j["seed"] = 0;
  j["nodes"] = nlohmann::json::array();
  for (size_t i = 0; i < coords.size(); ++i) {
    j["nodes"].push_back({{"id", static_cast<int>(i)},
                          {"x", coords[i].first},
                          {"y", coords[i].second},
                          {"landmark", static_cast<int>(i % tags)}});
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : edges) j["edges"].push_back({a, b});
  nlohmann::json feats = nlohmann::json::object();
  for (size_t i = 0; i < coords.size(); ++i) {
    std::vector<std::pair<double, int>> nbrs;
    for (const auto& [a, b] : edges) {
      const int other = a == static_cast<int>(i) ? b : (b == static_cast<int>(i) ? a : -1);
      if (other >= 0) {
        nbrs.push_back({std::atan2(coords[static_cast<size_t>(other)].second - coords[i].second,
                                   coords[static_cast<size_t>(other)].first - coords[i].first),
                        other});
      }
    }
    std::sort(nbrs.begin(), nbrs.end());
    nlohmann::json per_node = nlohmann::json::object();
    per_node["0"] = std::vector<double>(feature_dim, 0.0);
    for (size_t k = 0; k < nbrs.size(); ++k) {
      per_node[std::to_string(k + 1)] = std::vector<double>(feature_dim, 0.5);
    }
    feats[std::to_string(i)] = per_node;
  }
  j["features"] = feats;
  return j;
}

void check_episode_invariants(const Episode& ep, const NavGraph& g) {
  REQUIRE(!ep.reference_path.empty());
  CHECK(ep.reference_path.front() == ep.start);
  CHECK(ep.reference_path.back() == ep.goal);
  for (size_t i = 1; i < ep.reference_path.size(); ++i) {
    CHECK_NOTHROW(g.direction_to(ep.reference_path[i - 1], ep.reference_path[i]));
  }
  CHECK(g.path_weight(ep.reference_path) ==
        doctest::Approx(g.shortest_distance(ep.start, ep.goal)).epsilon(1e-12));
  CHECK(ep.instruction.front() == Vocabulary::kBos);
  CHECK(ep.instruction.back() == Vocabulary::kEos);
  CHECK(ep.content_length() >= 1);
  CHECK(ep.content_length() <= kDefaultLMax);
}

}  // namespace

TEST_SUITE_BEGIN("episode");

TEST_CASE("vocabulary reserved ids and round-trip") {
  Vocabulary v = Vocabulary::build(16);
  CHECK(v.word(Vocabulary::kPad) == "<pad>");
  CHECK(v.word(Vocabulary::kUnk) == "<unk>");
  CHECK(v.word(Vocabulary::kBos) == "<bos>");
  CHECK(v.word(Vocabulary::kEos) == "<eos>");
  CHECK(v.size() >= 12);
  CHECK(v.id("left") >= 4);
  CHECK(v.id("nonexistent-word") == Vocabulary::kUnk);
  for (int t = 0; t < 16; ++t) {
    CHECK(v.id(v.word(v.landmark_token(t))) == v.landmark_token(t));
  }
  Vocabulary w = Vocabulary::from_json(v.to_json());
  CHECK(w.words == v.words);
}

TEST_CASE("turn word thresholds") {
  const double deg = std::acos(-1.0) / 180.0;
  CHECK(turn_word(0.0) == "forward");
  CHECK(turn_word(30 * deg) == "forward");
  CHECK(turn_word(-44 * deg) == "forward");
  CHECK(turn_word(90 * deg) == "left");
  CHECK(turn_word(-90 * deg) == "right");
  CHECK(turn_word(60 * deg) == "left");
  CHECK(turn_word(-120 * deg) == "right");
  CHECK(turn_word(170 * deg) == "around");
  CHECK(turn_word(-170 * deg) == "around");
  CHECK(turn_word(350 * deg) == "forward");  // wraps to -10
}

TEST_CASE("single-hop instruction mentions exactly the goal landmark") {
  NavGraph g = NavGraph::from_json(graph_json({{0, 0}, {2, 0}, {4, 0}}, {{0, 1}, {1, 2}}));
  Vocabulary v = Vocabulary::build(8);
  Rng rng(5);
  Episode ep = generate_episode(g, "g", rng, 1, 1, v);
  check_episode_invariants(ep, g);
  CHECK(ep.hops() == 1);
  int landmark_mentions = 0;
  for (int tok : ep.instruction) {
    if (tok >= v.landmark_token(0)) ++landmark_mentions;
  }
  CHECK(landmark_mentions == 1);
  const int goal_tok = v.landmark_token(g.node(ep.goal).landmark);
  CHECK(std::count(ep.instruction.begin(), ep.instruction.end(), goal_tok) == 1);
}

TEST_CASE("left turn appears in the instruction of an elbow path") {
  // 0 -> 1 -> 2 heads east then north: +90 degrees at the middle hop
  NavGraph g = NavGraph::from_json(
      graph_json({{0, 0}, {3, 0}, {3, 3}, {3, 6}}, {{0, 1}, {1, 2}, {2, 3}}));
  Vocabulary v = Vocabulary::build(8);
  Episode ep = make_episode(g, "g", 0, 3, v);
  CHECK(ep.reference_path == std::vector<int>{0, 1, 2, 3});
  std::vector<std::string> words;
  for (int tok : ep.instruction) words.push_back(v.word(tok));
  CHECK(std::count(words.begin(), words.end(), "left") >= 1);
  CHECK(std::count(words.begin(), words.end(), "right") == 0);
}

TEST_CASE("instruction determinism") {
  Rng grng(42);
  NavGraph g = NavGraph::generate(20, 4, 12, grng);
  Vocabulary v = Vocabulary::build(16);
  Rng r1(7), r2(7);
  Episode a = generate_episode(g, "g", r1, 2, 5, v);
  Episode b = generate_episode(g, "g", r2, 2, 5, v);
  CHECK(a.start == b.start);
  CHECK(a.goal == b.goal);
  CHECK(a.instruction == b.instruction);
}

TEST_CASE("parse-back recovers the landmark sequence of the path") {
  Rng grng(43);
  NavGraph g = NavGraph::generate(25, 4, 12, grng);
  Vocabulary v = Vocabulary::build(16);
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Episode ep = generate_episode(g, "g", rng, 2, 6, v);
    check_episode_invariants(ep, g);
    std::vector<int> expected;
    for (size_t i = 1; i < ep.reference_path.size(); ++i) {
      expected.push_back(v.landmark_token(g.node(ep.reference_path[i]).landmark));
    }
    CHECK(parse_landmark_tokens(ep.instruction, v) == expected);
  }
}

TEST_CASE("generate_episode errors when no pair is admissible") {
  NavGraph g = NavGraph::from_json(graph_json({{0, 0}, {2, 0}}, {{0, 1}}));
  Vocabulary v = Vocabulary::build(8);
  Rng rng(1);
  CHECK_THROWS_AS(generate_episode(g, "g", rng, 5, 9, v), ValidationError);
}

TEST_CASE("build_dataset split contracts") {
  Rng grng(50);
  std::vector<NavGraph> graphs;
  std::vector<std::string> ids;
  Rng cb_rng(51);
  LandmarkCodebook cb = LandmarkCodebook::make(12, 8, cb_rng);
  for (int i = 0; i < 3; ++i) {
    graphs.push_back(NavGraph::generate(18, 4, 12, grng, &cb));
    ids.push_back("env_" + std::to_string(i));
  }
  Rng rng(52);
  Dataset d = build_dataset(graphs, ids, 1, {30, 10, 10}, 2, 5, rng);
  CHECK(d.episodes.size() == 50);

  std::set<std::tuple<std::string, int, int>> triples;
  for (const Episode& ep : d.episodes) {
    CHECK(triples.insert({ep.graph_id, ep.start, ep.goal}).second);  // no repeats
    if (ep.split == "val_unseen") {
      CHECK(ep.graph_id == "env_2");  // held-out graph only
    } else {
      CHECK(ep.graph_id != "env_2");
    }
  }

  // every landmark present in train graphs shows up in some train instruction
  std::set<int> train_tags;
  for (int gi = 0; gi < 2; ++gi) {
    for (int n = 0; n < graphs[gi].node_count(); ++n) {
      train_tags.insert(graphs[gi].node(n).landmark);
    }
  }
  std::set<int> mentioned;
  for (const Episode& ep : d.episodes) {
    if (ep.split != "train") continue;
    for (int tok : ep.instruction) {
      if (tok >= d.vocab.landmark_token(0)) mentioned.insert(tok - d.vocab.landmark_token(0));
    }
  }
  // goal/by-way mentions cover the tag set on graphs this size
  for (int tag : train_tags) CHECK(mentioned.count(tag) == 1);

  CHECK_THROWS_AS(build_dataset({graphs[0]}, {ids[0]}, 1, {5, 2, 2}, 2, 5, rng),
                  ValidationError);
}

TEST_CASE("episode jsonl round-trip") {
  Rng grng(60);
  NavGraph g = NavGraph::generate(15, 4, 12, grng);
  Vocabulary v = Vocabulary::build(16);
  Rng rng(61);
  Dataset d;
  d.vocab = v;
  for (int i = 0; i < 5; ++i) {
    Episode ep = generate_episode(g, "env_0", rng, 2, 5, v);
    ep.split = i < 3 ? "train" : "val_seen";
    d.episodes.push_back(ep);
  }
  const std::string text = dataset_to_jsonl(d);
  const auto parsed = episodes_from_jsonl(text);
  REQUIRE(parsed.size() == d.episodes.size());
  for (size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].graph_id == d.episodes[i].graph_id);
    CHECK(parsed[i].start == d.episodes[i].start);
    CHECK(parsed[i].goal == d.episodes[i].goal);
    CHECK(parsed[i].reference_path == d.episodes[i].reference_path);
    CHECK(parsed[i].instruction == d.episodes[i].instruction);
    CHECK(parsed[i].split == d.episodes[i].split);
  }
}

TEST_SUITE_END();
