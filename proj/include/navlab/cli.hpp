#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/trainer.hpp"

namespace navlab::cli {

// Flat key-value configuration with dotted keys. Precedence:
// defaults < config file < command-line flags/--set overrides.
// Unknown keys are rejected.
class FlatConfig {
 public:
  static FlatConfig defaults();

  void apply_file(const std::string& path);
  void apply_json(const nlohmann::json& j);
  void apply_override(const std::string& key, const std::string& value);
  void set(const std::string& key, const nlohmann::json& value);

  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;

  nlohmann::json to_json() const;

 private:
  std::map<std::string, nlohmann::json> values_;
  const nlohmann::json& at(const std::string& key) const;
};

// Writes env_*.json files; returns (filename, content-hash) pairs.
std::vector<std::pair<std::string, std::string>> cmd_gen_env(const FlatConfig& cfg);

// Writes dataset.jsonl + vocab.json from the env files; returns hashes.
std::vector<std::pair<std::string, std::string>> cmd_gen_data(const FlatConfig& cfg);

// Runs one training; writes manifest.json, metrics.csv, checkpoints, and
// updates index.json. Returns the manifest.
RunManifest cmd_train(const FlatConfig& cfg);

struct EvalOutputs {
  std::string csv_path;
  std::string json_path;
};
EvalOutputs cmd_eval(const FlatConfig& cfg);

struct PlotInputs {
  std::vector<std::string> manifests;
  std::string traj_dump;
  std::string env_file;
  std::string out_dir;
  int limit = 8;  // max trajectory overlays
};
std::vector<std::string> cmd_plot(const PlotInputs& in);

// Full argv entry point; maps errors to the exit-code contract
// (0 ok, 1 usage, 2 validation, 3 runtime).
int run(int argc, const char* const* argv);

// Loads every env_*.json in a directory into a store keyed by file stem.
GraphStore load_graph_store(const std::string& dir);

}  // namespace navlab::cli
