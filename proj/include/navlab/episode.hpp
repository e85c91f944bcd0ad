#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/graph.hpp"
#include "navlab/rng.hpp"

namespace navlab {

// Token inventory. Reserved ids are fixed; landmark words follow the
// direction and connective words in tag order.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  std::vector<std::string> words;
  std::unordered_map<std::string, int> ids;

  static Vocabulary build(int landmark_tags);
  static std::vector<std::string> landmark_words(int landmark_tags);

  int id(const std::string& word) const;  // kUnk if absent
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words.size()); }
  int landmark_token(int tag) const;  // token id of landmark word `tag`

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
};

struct Episode {
  std::string graph_id;
  int start = 0;
  int goal = 0;
  std::vector<int> reference_path;  // oracle shortest path, start..goal
  std::vector<int> instruction;     // BOS <content> EOS
  std::string split;                // train | val_seen | val_unseen

  int hops() const { return static_cast<int>(reference_path.size()) - 1; }
  // Content length between BOS and EOS; the L that the L_max cap constrains.
  int content_length() const { return static_cast<int>(instruction.size()) - 2; }

  nlohmann::json to_json() const;
  static Episode from_json(const nlohmann::json& j);
};

inline constexpr int kDefaultLMax = 40;
inline constexpr int kDefaultMinHops = 3;
inline constexpr int kDefaultMaxHops = 7;

// Samples a (start, goal) pair whose oracle path has hop count in
// [min_hops, max_hops] and renders the template instruction:
//   go <turn> to the <landmark> then ... then stop at the <landmark(goal)>
// Turn words come from heading changes along the path (first hop is
// "forward", there being no previous heading). Throws after bounded retries
// when no admissible pair exists.
Episode generate_episode(const NavGraph& g, const std::string& graph_id, Rng& rng,
                         int min_hops, int max_hops, const Vocabulary& vocab,
                         int l_max = kDefaultLMax);

// Deterministic variant for a fixed (start, goal) pair.
Episode make_episode(const NavGraph& g, const std::string& graph_id, int start, int goal,
                     const Vocabulary& vocab, int l_max = kDefaultLMax);

// Turn word for a heading change in radians, normalized to (-pi, pi]:
// |d|<45deg forward, |d|>135deg around, else left (positive, CCW) or right.
std::string turn_word(double delta_theta);

// Recovers the landmark token sequence (visited nodes after the start) from a
// template instruction; the grammar is unambiguous.
std::vector<int> parse_landmark_tokens(const std::vector<int>& instruction,
                                       const Vocabulary& vocab);

struct DatasetCounts {
  int train = 0;
  int val_seen = 0;
  int val_unseen = 0;
};

struct Dataset {
  Vocabulary vocab;
  std::vector<Episode> episodes;

  std::vector<const Episode*> split(const std::string& tag) const;
};

// The last `n_heldout` graphs are reserved for val_unseen; val_seen draws
// fresh (start, goal) pairs from the training graphs. No
// (graph, start, goal) triple repeats across splits.
Dataset build_dataset(const std::vector<NavGraph>& graphs,
                      const std::vector<std::string>& graph_ids, int n_heldout,
                      const DatasetCounts& counts, int min_hops, int max_hops, Rng& rng);

// JSONL (one episode per line) and vocabulary JSON round-trips.
std::string dataset_to_jsonl(const Dataset& d);
std::vector<Episode> episodes_from_jsonl(const std::string& text);

}  // namespace navlab
