#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/nn.hpp"

namespace navlab {

// Versioned binary container: a JSON meta block plus named double arrays with
// shapes. Raw IEEE-754 storage, so value round-trips are bit-exact. Layout is
// documented in the README ("Checkpoint format").
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, std::pair<std::vector<int>, std::vector<double>>>> arrays;

  void put(const std::string& name, const std::vector<int>& shape,
           const std::vector<double>& data);
  const std::pair<std::vector<int>, std::vector<double>>& get(const std::string& name) const;
  bool has(const std::string& name) const;

  // Parameter and optimizer helpers. `prefix` namespaces the arrays
  // (e.g. "gen", "opt_gen").
  void put_params(const std::string& prefix, const ParamSet& params);
  void load_params(const std::string& prefix, ParamSet& params) const;
  void put_adam(const std::string& prefix, const Adam& opt);
  void load_adam(const std::string& prefix, Adam& opt) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace navlab
