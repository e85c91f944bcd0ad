#include "navlab/episode.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "navlab/util.hpp"

namespace navlab {

namespace {

const std::vector<std::string>& direction_words() {
  static const std::vector<std::string> kWords = {"left", "right", "forward", "around"};
  return kWords;
}

const std::vector<std::string>& connective_words() {
  static const std::vector<std::string> kWords = {"go", "to", "the", "then",
                                                  "stop", "at", "past", "and"};
  return kWords;
}

const std::vector<std::string>& landmark_name_pool() {
  static const std::vector<std::string> kNames = {
      "arch",  "bench", "clock", "door",  "fern",   "gate",  "harp",   "kiosk",
      "lamp",  "mural", "oven",  "piano", "rack",   "sofa",  "tub",    "vase",
      "well",  "crate", "shelf", "stool", "booth",  "easel", "statue", "fountain"};
  return kNames;
}

}  // namespace

std::vector<std::string> Vocabulary::landmark_words(int landmark_tags) {
  std::vector<std::string> out;
  const auto& pool = landmark_name_pool();
  for (int i = 0; i < landmark_tags; ++i) {
    if (i < static_cast<int>(pool.size())) {
      out.push_back(pool[static_cast<size_t>(i)]);
    } else {
      out.push_back("landmark" + std::to_string(i));
    }
  }
  return out;
}

Vocabulary Vocabulary::build(int landmark_tags) {
  if (landmark_tags < 1) throw ValidationError("vocabulary: need at least one landmark tag");
  Vocabulary v;
  v.words = {"<pad>", "<unk>", "<bos>", "<eos>"};
  for (const auto& w : direction_words()) v.words.push_back(w);
  for (const auto& w : connective_words()) v.words.push_back(w);
  for (const auto& w : landmark_words(landmark_tags)) v.words.push_back(w);
  for (size_t i = 0; i < v.words.size(); ++i) {
    if (!v.ids.emplace(v.words[i], static_cast<int>(i)).second) {
      throw ValidationError("vocabulary: duplicate word " + v.words[i]);
    }
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = ids.find(word);
  return it == ids.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw ValidationError("vocabulary: id out of range");
  return words[static_cast<size_t>(id)];
}

int Vocabulary::landmark_token(int tag) const {
  const int base = 4 + static_cast<int>(direction_words().size() + connective_words().size());
  const int id = base + tag;
  if (tag < 0 || id >= size()) throw ValidationError("vocabulary: landmark tag out of range");
  return id;
}

nlohmann::json Vocabulary::to_json() const {
  return nlohmann::json{{"words", words}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  v.words = j.at("words").get<std::vector<std::string>>();
  if (v.words.size() < 12) throw ValidationError("vocabulary: fewer than 12 words");
  const std::vector<std::string> reserved = {"<pad>", "<unk>", "<bos>", "<eos>"};
  for (size_t i = 0; i < reserved.size(); ++i) {
    if (v.words[i] != reserved[i]) {
      throw ValidationError("vocabulary: reserved token " + reserved[i] + " not at id " +
                            std::to_string(i));
    }
  }
  for (size_t i = 0; i < v.words.size(); ++i) v.ids.emplace(v.words[i], static_cast<int>(i));
  if (v.ids.size() != v.words.size()) throw ValidationError("vocabulary: duplicate words");
  return v;
}

std::string turn_word(double delta_theta) {
  const double pi = std::acos(-1.0);
  double d = std::fmod(delta_theta, 2.0 * pi);
  if (d > pi) d -= 2.0 * pi;
  if (d <= -pi) d += 2.0 * pi;
  const double a = std::abs(d);
  if (a < pi / 4.0) return "forward";
  if (a > 3.0 * pi / 4.0) return "around";
  return d > 0.0 ? "left" : "right";
}

namespace {

std::vector<std::string> instruction_words(const NavGraph& g, const std::vector<int>& path,
                                           const Vocabulary& vocab) {
  const int m = static_cast<int>(path.size()) - 1;
  std::vector<std::string> out;
  double prev_theta = 0.0;
  for (int j = 1; j <= m; ++j) {
    const GraphNode& a = g.node(path[static_cast<size_t>(j - 1)]);
    const GraphNode& b = g.node(path[static_cast<size_t>(j)]);
    const double theta = std::atan2(b.y - a.y, b.x - a.x);
    if (j < m) {
      if (j > 1) out.push_back("then");
      out.push_back("go");
      out.push_back(j == 1 ? "forward" : turn_word(theta - prev_theta));
      out.push_back("to");
      out.push_back("the");
      out.push_back(vocab.word(vocab.landmark_token(b.landmark)));
    } else {
      if (j > 1) out.push_back("then");
      out.push_back("stop");
      out.push_back("at");
      out.push_back("the");
      out.push_back(vocab.word(vocab.landmark_token(b.landmark)));
    }
    prev_theta = theta;
  }
  return out;
}

}  // namespace

Episode make_episode(const NavGraph& g, const std::string& graph_id, int start, int goal,
                     const Vocabulary& vocab, int l_max) {
  if (start == goal) throw ValidationError("episode: start equals goal");
  Episode ep;
  ep.graph_id = graph_id;
  ep.start = start;
  ep.goal = goal;
  ep.reference_path = g.oracle_path(start, goal);
  const auto words = instruction_words(g, ep.reference_path, vocab);
  if (static_cast<int>(words.size()) > l_max) {
    throw ValidationError("episode: instruction exceeds L_max");
  }
  ep.instruction.push_back(Vocabulary::kBos);
  for (const auto& w : words) ep.instruction.push_back(vocab.id(w));
  ep.instruction.push_back(Vocabulary::kEos);
  return ep;
}

Episode generate_episode(const NavGraph& g, const std::string& graph_id, Rng& rng,
                         int min_hops, int max_hops, const Vocabulary& vocab, int l_max) {
  if (min_hops < 1 || max_hops < min_hops) {
    throw ValidationError("generate_episode: bad hop bounds");
  }
  const int n = g.node_count();
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int start = rng.uniform_int(n);
    std::vector<int> goals;
    for (int goal = 0; goal < n; ++goal) {
      if (goal == start) continue;
      const int hops = g.hop_count(start, goal);
      if (hops >= min_hops && hops <= max_hops) goals.push_back(goal);
    }
    if (goals.empty()) continue;
    const int goal = goals[static_cast<size_t>(rng.uniform_int(static_cast<int>(goals.size())))];
    return make_episode(g, graph_id, start, goal, vocab, l_max);
  }
  throw ValidationError("generate_episode: no admissible (start, goal) pair after retries");
}

std::vector<int> parse_landmark_tokens(const std::vector<int>& instruction,
                                       const Vocabulary& vocab) {
  // Landmarks appear exactly after each "the".
  std::vector<int> out;
  const int the_id = vocab.id("the");
  for (size_t i = 0; i + 1 < instruction.size(); ++i) {
    if (instruction[i] == the_id) out.push_back(instruction[i + 1]);
  }
  return out;
}

nlohmann::json Episode::to_json() const {
  return nlohmann::json{{"graph", graph_id},           {"start", start},
                        {"goal", goal},                {"path", reference_path},
                        {"instruction", instruction},  {"split", split}};
}

Episode Episode::from_json(const nlohmann::json& j) {
  Episode ep;
  try {
    ep.graph_id = j.at("graph").get<std::string>();
    ep.start = j.at("start").get<int>();
    ep.goal = j.at("goal").get<int>();
    ep.reference_path = j.at("path").get<std::vector<int>>();
    ep.instruction = j.at("instruction").get<std::vector<int>>();
    ep.split = j.at("split").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("episode: malformed JSON: ") + e.what());
  }
  if (ep.reference_path.empty() || ep.instruction.size() < 3) {
    throw ValidationError("episode: empty path or instruction");
  }
  return ep;
}

std::vector<const Episode*> Dataset::split(const std::string& tag) const {
  std::vector<const Episode*> out;
  for (const auto& ep : episodes) {
    if (ep.split == tag) out.push_back(&ep);
  }
  return out;
}

Dataset build_dataset(const std::vector<NavGraph>& graphs,
                      const std::vector<std::string>& graph_ids, int n_heldout,
                      const DatasetCounts& counts, int min_hops, int max_hops, Rng& rng) {
  if (graphs.size() < 2) throw ValidationError("build_dataset: need at least 2 graphs");
  if (graphs.size() != graph_ids.size()) {
    throw ValidationError("build_dataset: graph/id count mismatch");
  }
  if (n_heldout < 1 || n_heldout >= static_cast<int>(graphs.size())) {
    throw ValidationError("build_dataset: heldout graph count must leave both splits nonempty");
  }
  int tags = graphs[0].landmark_tags();
  for (const auto& g : graphs) {
    if (g.landmark_tags() != tags) {
      throw ValidationError("build_dataset: graphs disagree on landmark tag count");
    }
  }

  Dataset d;
  d.vocab = Vocabulary::build(tags);

  const int n_train_graphs = static_cast<int>(graphs.size()) - n_heldout;
  std::set<std::tuple<std::string, int, int>> used;

  auto sample_into = [&](const std::string& split, int count, int graph_lo, int graph_hi) {
    for (int i = 0; i < count; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const int gi = graph_lo + rng.uniform_int(graph_hi - graph_lo);
        Episode ep = generate_episode(graphs[static_cast<size_t>(gi)],
                                      graph_ids[static_cast<size_t>(gi)], rng, min_hops,
                                      max_hops, d.vocab);
        if (!used.insert({ep.graph_id, ep.start, ep.goal}).second) continue;
        ep.split = split;
        d.episodes.push_back(std::move(ep));
        placed = true;
      }
      if (!placed) {
        throw ValidationError("build_dataset: could not sample enough distinct episodes for " +
                              split);
      }
    }
  };

  sample_into("train", counts.train, 0, n_train_graphs);
  sample_into("val_seen", counts.val_seen, 0, n_train_graphs);
  sample_into("val_unseen", counts.val_unseen, n_train_graphs,
              static_cast<int>(graphs.size()));
  return d;
}

std::string dataset_to_jsonl(const Dataset& d) {
  std::ostringstream out;
  for (const auto& ep : d.episodes) out << ep.to_json().dump() << "\n";
  return out.str();
}

std::vector<Episode> episodes_from_jsonl(const std::string& text) {
  std::vector<Episode> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(Episode::from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace navlab
