#include "navlab/cli.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "navlab/checkpoint.hpp"
#include "navlab/plotting.hpp"
#include "navlab/util.hpp"

namespace navlab::cli {

namespace fs = std::filesystem;

FlatConfig FlatConfig::defaults() {
  FlatConfig c;
  auto& v = c.values_;
  v["seed"] = 1;
  v["out"] = "out";
  v["env.graphs"] = 4;
  v["env.nodes"] = 40;
  v["env.kmax"] = 5;
  v["env.feature_dim"] = 32;
  v["env.landmarks"] = 16;
  v["env.spacing"] = 3.0;
  v["data.env_dir"] = "";
  v["data.train"] = 200;
  v["data.val_seen"] = 50;
  v["data.val_unseen"] = 50;
  v["data.heldout"] = 1;
  v["data.min_hops"] = 3;
  v["data.max_hops"] = 7;
  v["model.word_dim"] = 32;
  v["model.enc_hidden"] = 32;
  v["model.dec_hidden"] = 64;
  v["model.proj_dim"] = 64;
  v["model.action_dim"] = 16;
  v["model.grounding"] = "cmg";
  v["dis.summary_hidden"] = 32;
  v["dis.mlp_hidden"] = 64;
  v["dis.leaky_slope"] = 0.2;
  v["dis.dropout"] = 0.3;
  v["train.env_dir"] = "";
  v["train.data_dir"] = "";
  v["train.regime"] = "aal";
  v["train.interval"] = 1;
  v["train.iters"] = 3000;
  v["train.batch"] = 16;
  v["train.lr_gen"] = 1e-3;
  v["train.lr_dis"] = 1e-3;
  v["train.dropout"] = 0.4;
  v["train.eval_every"] = 500;
  v["train.checkpoint_every"] = 0;
  v["train.behavior"] = "hidden";
  v["train.clip_norm"] = 0.0;
  v["train.workers"] = 0;
  v["train.sweep_interval"] = "";
  v["eval.env_dir"] = "";
  v["eval.data_dir"] = "";
  v["eval.ckpt"] = "";
  v["eval.split"] = "val_unseen";
  v["eval.policy"] = "model";
  v["eval.traj_dump"] = "";
  v["eval.d_th"] = 3.0;
  return c;
}

const nlohmann::json& FlatConfig::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("config: unknown key '" + key + "'");
  return it->second;
}

void FlatConfig::set(const std::string& key, const nlohmann::json& value) {
  at(key);  // rejects unknown keys
  values_[key] = value;
}

void FlatConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a flat JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_primitive()) {
      throw ValidationError("config: key '" + key + "' must be a scalar (dotted keys, flat file)");
    }
    set(key, value);
  }
}

void FlatConfig::apply_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config: cannot parse " + path + ": " + e.what());
  }
  apply_json(j);
}

void FlatConfig::apply_override(const std::string& key, const std::string& value) {
  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded() || (!parsed.is_primitive())) parsed = value;
  set(key, parsed);
}

int FlatConfig::get_int(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_number()) throw ValidationError("config: key '" + key + "' must be a number");
  return v.get<int>();
}

double FlatConfig::get_double(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_number()) throw ValidationError("config: key '" + key + "' must be a number");
  return v.get<double>();
}

std::string FlatConfig::get_string(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_string()) throw ValidationError("config: key '" + key + "' must be a string");
  return v.get<std::string>();
}

uint64_t FlatConfig::get_u64(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_number()) throw ValidationError("config: key '" + key + "' must be a number");
  return v.get<uint64_t>();
}

nlohmann::json FlatConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

std::string env_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "env_%03d.json", index);
  return buf;
}

Dataset load_dataset(const std::string& dir) {
  Dataset d;
  d.vocab = Vocabulary::from_json(nlohmann::json::parse(read_file(dir + "/vocab.json")));
  d.episodes = episodes_from_jsonl(read_file(dir + "/dataset.jsonl"));
  if (d.episodes.empty()) throw ValidationError("dataset: no episodes in " + dir);
  return d;
}

NavigatorConfig navigator_config(const FlatConfig& cfg, const Vocabulary& vocab,
                                 const GraphStore& graphs) {
  if (graphs.empty()) throw ValidationError("no environment graphs loaded");
  const NavGraph& first = graphs.begin()->second;
  NavigatorConfig ncfg;
  ncfg.vocab_size = vocab.size();
  ncfg.feature_dim = first.feature_dim();
  ncfg.word_dim = cfg.get_int("model.word_dim");
  ncfg.enc_hidden = cfg.get_int("model.enc_hidden");
  ncfg.dec_hidden = cfg.get_int("model.dec_hidden");
  ncfg.proj_dim = cfg.get_int("model.proj_dim");
  ncfg.action_dim = cfg.get_int("model.action_dim");
  ncfg.grounding = grounding_from_string(cfg.get_string("model.grounding"));
  int kmax = 0;
  for (const auto& [id, g] : graphs) {
    kmax = std::max(kmax, g.k_max());
    if (g.feature_dim() != ncfg.feature_dim) {
      throw ValidationError("environments disagree on feature_dim");
    }
  }
  ncfg.max_directions = kmax + 1;  // including STOP
  return ncfg;
}

void update_index(const std::string& out_dir, const std::string& manifest_name) {
  const std::string index_path = out_dir + "/index.json";
  nlohmann::json index;
  if (fs::exists(index_path)) {
    index = nlohmann::json::parse(read_file(index_path));
  } else {
    index = nlohmann::json{{"runs", nlohmann::json::object()}};
  }
  const std::string hash = to_hex(file_hash(out_dir + "/" + manifest_name));
  index["runs"][hash] = manifest_name;
  write_file(index_path, index.dump(2) + "\n");
}

}  // namespace

GraphStore load_graph_store(const std::string& dir) {
  if (dir.empty()) throw ValidationError("environment directory not set");
  if (!fs::is_directory(dir)) {
    throw ValidationError("environment directory does not exist: " + dir);
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("env_", 0) == 0 && entry.path().extension() == ".json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no env_*.json files in " + dir);
  GraphStore store;
  for (const auto& f : files) {
    store.emplace(fs::path(f).stem().string(),
                  NavGraph::from_json(nlohmann::json::parse(read_file(f))));
  }
  return store;
}

std::vector<std::pair<std::string, std::string>> cmd_gen_env(const FlatConfig& cfg) {
  const uint64_t seed = cfg.get_u64("seed");
  const std::string out = cfg.get_string("out");
  const int n_graphs = cfg.get_int("env.graphs");
  const int nodes = cfg.get_int("env.nodes");
  const int kmax = cfg.get_int("env.kmax");
  const int feature_dim = cfg.get_int("env.feature_dim");
  const int landmarks = cfg.get_int("env.landmarks");
  const double spacing = cfg.get_double("env.spacing");
  if (n_graphs < 1) throw ValidationError("gen-env: need at least one graph");
  ensure_dir(out);

  // One codebook per generation run: landmark words ground identically on
  // every graph, held-out ones included.
  Rng cb_rng = substream(seed, "env");
  const LandmarkCodebook codebook =
      LandmarkCodebook::make(landmarks, feature_dim - kHeadingFeatureDim, cb_rng);

  std::vector<std::pair<std::string, std::string>> outputs;
  for (int i = 0; i < n_graphs; ++i) {
    Rng rng = substream(seed, "env", static_cast<uint64_t>(i) + 1);
    const NavGraph g = NavGraph::generate(nodes, kmax, feature_dim, rng, &codebook, spacing);
    const std::string name = env_file_name(i);
    const std::string path = out + "/" + name;
    write_file(path, g.to_json().dump() + "\n");
    outputs.emplace_back(name, to_hex(file_hash(path)));
  }
  return outputs;
}

std::vector<std::pair<std::string, std::string>> cmd_gen_data(const FlatConfig& cfg) {
  const uint64_t seed = cfg.get_u64("seed");
  const std::string out = cfg.get_string("out");
  const std::string env_dir = cfg.get_string("data.env_dir");
  const GraphStore store = load_graph_store(env_dir);
  ensure_dir(out);

  std::vector<NavGraph> graphs;
  std::vector<std::string> ids;
  for (const auto& [id, g] : store) {
    ids.push_back(id);
    graphs.push_back(g);
  }

  DatasetCounts counts{cfg.get_int("data.train"), cfg.get_int("data.val_seen"),
                       cfg.get_int("data.val_unseen")};
  Rng rng = substream(seed, "data");
  const Dataset d = build_dataset(graphs, ids, cfg.get_int("data.heldout"), counts,
                                  cfg.get_int("data.min_hops"), cfg.get_int("data.max_hops"),
                                  rng);

  write_file(out + "/dataset.jsonl", dataset_to_jsonl(d));
  write_file(out + "/vocab.json", d.vocab.to_json().dump(2) + "\n");
  return {{"dataset.jsonl", to_hex(file_hash(out + "/dataset.jsonl"))},
          {"vocab.json", to_hex(file_hash(out + "/vocab.json"))}};
}

namespace {

RunManifest train_once(const FlatConfig& cfg, const Dataset& dataset, const GraphStore& graphs,
                       const std::string& out_dir) {
  ensure_dir(out_dir);
  const uint64_t seed = cfg.get_u64("seed");

  NavigatorConfig ncfg = navigator_config(cfg, dataset.vocab, graphs);
  Rng init_rng = substream(seed, "init");
  NavigatorParams gen = NavigatorParams::init(ncfg, init_rng);

  const BehaviorKind behavior = behavior_kind_from_string(cfg.get_string("train.behavior"));
  DiscriminatorConfig dcfg;
  dcfg.input_dim = behavior_dim(behavior, ncfg.dec_hidden, ncfg.max_directions);
  dcfg.summary_hidden = cfg.get_int("dis.summary_hidden");
  dcfg.mlp_hidden = cfg.get_int("dis.mlp_hidden");
  dcfg.leaky_slope = cfg.get_double("dis.leaky_slope");
  dcfg.dropout = cfg.get_double("dis.dropout");
  DiscriminatorParams dis = DiscriminatorParams::init(dcfg, init_rng);

  TrainConfig tc;
  tc.regime = regime_from_string(cfg.get_string("train.regime"));
  tc.interval = cfg.get_int("train.interval");
  tc.batch = cfg.get_int("train.batch");
  tc.lr_gen = cfg.get_double("train.lr_gen");
  tc.lr_dis = cfg.get_double("train.lr_dis");
  tc.iters = cfg.get_int("train.iters");
  tc.dropout = cfg.get_double("train.dropout");
  tc.seed = seed;
  tc.eval_every = cfg.get_int("train.eval_every");
  tc.checkpoint_every = cfg.get_int("train.checkpoint_every");
  tc.behavior = behavior;
  tc.clip_norm = cfg.get_double("train.clip_norm");
  tc.workers = cfg.get_int("train.workers");
  tc.out_dir = out_dir;
  tc.validate();
  for (const std::string& w : config_warnings(tc)) {
    std::cerr << "warning: " << w << "\n";
  }

  Trainer trainer(tc, std::move(gen), std::move(dis));
  RunManifest manifest = trainer.run(dataset, graphs);

  manifest.config = cfg.to_json();
  manifest.config["train.interval"] = tc.interval;  // reflects sweep overrides
  nlohmann::json inputs = nlohmann::json::object();
  const std::string data_dir = cfg.get_string("train.data_dir");
  inputs["dataset.jsonl"] = to_hex(file_hash(data_dir + "/dataset.jsonl"));
  inputs["vocab.json"] = to_hex(file_hash(data_dir + "/vocab.json"));
  nlohmann::json envs = nlohmann::json::object();
  const std::string env_dir = cfg.get_string("train.env_dir");
  for (const auto& [id, g] : graphs) {
    envs[id] = to_hex(file_hash(env_dir + "/" + id + ".json"));
  }
  inputs["env"] = envs;
  manifest.inputs = inputs;

  write_file(out_dir + "/metrics.csv", metrics_csv(manifest.rows));
  write_file(out_dir + "/manifest.json", manifest.to_json().dump(2) + "\n");
  update_index(out_dir, "manifest.json");
  return manifest;
}

}  // namespace

RunManifest cmd_train(const FlatConfig& cfg) {
  const GraphStore graphs = load_graph_store(cfg.get_string("train.env_dir"));
  const Dataset dataset = load_dataset(cfg.get_string("train.data_dir"));
  const std::string out = cfg.get_string("out");

  const std::string sweep = cfg.get_string("train.sweep_interval");
  if (sweep.empty()) {
    return train_once(cfg, dataset, graphs, out);
  }
  // interval sweep: one run (and one manifest) per value, shared seed
  std::vector<int> intervals;
  std::istringstream ss(sweep);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) intervals.push_back(std::stoi(tok));
  }
  if (intervals.empty()) throw ValidationError("train: empty interval sweep list");
  RunManifest last;
  for (int k : intervals) {
    FlatConfig sub = cfg;
    sub.set("train.interval", k);
    sub.set("train.sweep_interval", "");
    last = train_once(sub, dataset, graphs, out + "/interval_" + std::to_string(k));
    std::cout << "interval " << k << ": manifest " << out << "/interval_" << std::to_string(k)
              << "/manifest.json\n";
  }
  return last;
}

EvalOutputs cmd_eval(const FlatConfig& cfg) {
  const GraphStore graphs = load_graph_store(cfg.get_string("eval.env_dir"));
  const Dataset dataset = load_dataset(cfg.get_string("eval.data_dir"));
  const std::string out = cfg.get_string("out");
  const std::string split = cfg.get_string("eval.split");
  const std::string policy = cfg.get_string("eval.policy");
  const double d_th = cfg.get_double("eval.d_th");
  ensure_dir(out);

  const auto episodes = dataset.split(split);
  if (episodes.empty()) throw ValidationError("eval: split '" + split + "' is empty");

  std::optional<NavigatorParams> params;
  if (policy == "model") {
    const std::string ckpt_path = cfg.get_string("eval.ckpt");
    if (ckpt_path.empty()) throw UsageError("eval: --ckpt required for the model policy");
    const Checkpoint ck = Checkpoint::load(ckpt_path);
    const auto& m = ck.meta.at("model");
    NavigatorConfig ncfg;
    ncfg.vocab_size = m.at("vocab_size").get<int>();
    ncfg.feature_dim = m.at("feature_dim").get<int>();
    ncfg.word_dim = m.at("word_dim").get<int>();
    ncfg.enc_hidden = m.at("enc_hidden").get<int>();
    ncfg.dec_hidden = m.at("dec_hidden").get<int>();
    ncfg.proj_dim = m.at("proj_dim").get<int>();
    ncfg.action_dim = m.at("action_dim").get<int>();
    ncfg.max_directions = m.at("max_directions").get<int>();
    ncfg.grounding = grounding_from_string(m.at("grounding").get<std::string>());
    if (ncfg.vocab_size != dataset.vocab.size()) {
      throw ValidationError("eval: checkpoint vocabulary size does not match the dataset");
    }
    if (ncfg.feature_dim != graphs.begin()->second.feature_dim()) {
      throw ValidationError("eval: checkpoint feature width does not match the environments");
    }
    Rng tmp(0);
    params = NavigatorParams::init(ncfg, tmp);
    ParamSet set = params->params();
    ck.load_params("gen", set);
  }

  EpisodeRunner runner;
  if (policy == "model") {
    runner = greedy_runner(*params);
  } else if (policy == "oracle") {
    runner = oracle_runner();
  } else if (policy == "stop") {
    runner = stop_runner();
  } else if (policy == "random") {
    runner = random_runner(cfg.get_u64("seed"));
  } else {
    throw UsageError("eval: unknown policy '" + policy + "'");
  }

  const EvalResult res = evaluate(episodes, graphs, runner, d_th);
  EvalOutputs outputs;
  outputs.csv_path = out + "/eval_" + split + ".csv";
  outputs.json_path = out + "/eval_" + split + ".json";
  write_file(outputs.csv_path, res.to_csv());
  write_file(outputs.json_path, res.aggregates_json().dump(2) + "\n");

  const std::string dump_path = cfg.get_string("eval.traj_dump");
  if (!dump_path.empty()) {
    if (policy != "model") throw UsageError("eval: --traj-dump needs the model policy");
    std::ostringstream dump;
    for (const Episode* ep : episodes) {
      RolloutOptions opts;  // greedy
      const TrajectoryRecord rec = rollout(*ep, graphs.at(ep->graph_id), *params, opts);
      for (const std::string& line : trajectory_dump_lines(rec, episode_key(*ep))) {
        dump << line << "\n";
      }
    }
    write_file(dump_path, dump.str());
  }
  return outputs;
}

std::vector<std::string> cmd_plot(const PlotInputs& in) {
  if (in.manifests.empty() && in.traj_dump.empty()) {
    throw UsageError("plot: nothing to plot (need --manifest or --traj)");
  }
  ensure_dir(in.out_dir);
  std::vector<std::string> written;

  std::vector<Series> interval_series{{"val_unseen", {}}};
  for (size_t i = 0; i < in.manifests.size(); ++i) {
    const nlohmann::json m = nlohmann::json::parse(read_file(in.manifests[i]));
    Series curve{"val_unseen", {}};
    double final_spl = 0.0;
    bool has_unseen = false;
    for (const auto& row : m.at("rows")) {
      if (row.at("split") == "val_unseen") {
        curve.points.emplace_back(row.at("iteration").get<double>(), row.at("spl").get<double>());
        final_spl = row.at("spl").get<double>();
        has_unseen = true;
      }
    }
    if (!has_unseen) continue;
    const std::string base = in.out_dir + "/spl_curve_" + std::to_string(i);
    write_file(base + ".svg",
               line_chart_svg("SPL vs iteration", "iteration", "SPL", {curve}));
    write_file(base + ".csv", series_csv("iteration", "spl", {curve}));
    written.push_back(base + ".svg");
    written.push_back(base + ".csv");
    if (m.at("config").contains("train.interval")) {
      interval_series[0].points.emplace_back(
          m.at("config").at("train.interval").get<double>(), final_spl);
    }
  }
  if (interval_series[0].points.size() >= 2) {
    std::sort(interval_series[0].points.begin(), interval_series[0].points.end());
    const std::string base = in.out_dir + "/spl_vs_interval";
    write_file(base + ".svg", line_chart_svg("SPL vs alternation interval", "interval",
                                             "SPL (val_unseen)", interval_series));
    write_file(base + ".csv", series_csv("interval", "spl", interval_series));
    written.push_back(base + ".svg");
    written.push_back(base + ".csv");
  }

  if (!in.traj_dump.empty()) {
    if (in.env_file.empty()) throw UsageError("plot: --traj requires --env");
    const NavGraph g = NavGraph::from_json(nlohmann::json::parse(read_file(in.env_file)));
    // group dump rows by episode, preserving first-seen order
    std::vector<std::pair<std::string, std::vector<int>>> paths;
    std::istringstream lines(read_file(in.traj_dump));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      validate_dump_line(line);
      const nlohmann::json row = nlohmann::json::parse(line);
      const std::string key = row.at("episode").get<std::string>();
      auto it = std::find_if(paths.begin(), paths.end(),
                             [&](const auto& p) { return p.first == key; });
      if (it == paths.end()) {
        if (static_cast<int>(paths.size()) >= in.limit) continue;
        paths.push_back({key, {row.at("node").get<int>()}});
        it = paths.end() - 1;
      }
      const int action = row.at("action").get<int>();
      if (action > 0) {
        it->second.push_back(g.direction(row.at("node").get<int>(), action).neighbor);
      }
    }
    for (size_t p = 0; p < paths.size(); ++p) {
      const std::string file = in.out_dir + "/traj_" + std::to_string(p) + ".svg";
      write_file(file, graph_overlay_svg("trajectory " + paths[p].first, g, {paths[p]}));
      written.push_back(file);
    }
  }
  if (written.empty()) throw ValidationError("plot: inputs produced no charts");
  return written;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"navlab: language-guided navigation on synthetic graphs"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--config", config_file, "flat JSON config file");
  app.add_option("--set", overrides, "override as dotted key=value (repeatable)");
  app.add_option("--seed", seed, "root seed for all substreams");
  app.add_option("--out", out, "output directory");

  // per-subcommand flag -> config key captures (deque: growth must not move
  // the elements CLI11 holds pointers to)
  std::deque<std::pair<std::string, std::optional<std::string>>> svals;
  std::deque<std::pair<std::string, std::optional<double>>> dvals;
  std::deque<std::pair<std::string, std::optional<int>>> ivals;
  auto iflag = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                   const std::string& help) {
    ivals.push_back({key, std::nullopt});
    sub->add_option(flag, ivals.back().second, help);
  };
  auto dflag = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                   const std::string& help) {
    dvals.push_back({key, std::nullopt});
    sub->add_option(flag, dvals.back().second, help);
  };
  auto sflag = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                   const std::string& help) {
    svals.push_back({key, std::nullopt});
    sub->add_option(flag, svals.back().second, help);
  };

  CLI::App* gen_env = app.add_subcommand("gen-env", "generate environment graphs");
  iflag(gen_env, "--graphs", "env.graphs", "number of graphs");
  iflag(gen_env, "--nodes", "env.nodes", "nodes per graph");
  iflag(gen_env, "--kmax", "env.kmax", "max non-STOP directions per node");
  iflag(gen_env, "--feature-dim", "env.feature_dim", "per-direction feature width");
  iflag(gen_env, "--landmarks", "env.landmarks", "landmark tag count");

  CLI::App* gen_data = app.add_subcommand("gen-data", "generate episodes + vocabulary");
  sflag(gen_data, "--env", "data.env_dir", "environment directory");
  iflag(gen_data, "--train", "data.train", "train episode count");
  iflag(gen_data, "--val-seen", "data.val_seen", "val_seen episode count");
  iflag(gen_data, "--val-unseen", "data.val_unseen", "val_unseen episode count");
  iflag(gen_data, "--heldout", "data.heldout", "graphs reserved for val_unseen");
  iflag(gen_data, "--min-hops", "data.min_hops", "minimum reference hops");
  iflag(gen_data, "--max-hops", "data.max_hops", "maximum reference hops");

  CLI::App* train = app.add_subcommand("train", "train a navigator");
  std::string preset;
  train->add_option("--preset", preset, "desk (default) or paper hyperparameters")
      ->check(CLI::IsMember({"desk", "paper"}));
  sflag(train, "--env", "train.env_dir", "environment directory");
  sflag(train, "--data", "train.data_dir", "dataset directory");
  sflag(train, "--regime", "train.regime", "aal|teacher|student|professor|alternate");
  iflag(train, "--interval", "train.interval", "iterations per mode before alternating");
  iflag(train, "--iters", "train.iters", "training iterations");
  iflag(train, "--batch", "train.batch", "episodes per iteration");
  dflag(train, "--lr-gen", "train.lr_gen", "generator learning rate");
  dflag(train, "--lr-dis", "train.lr_dis", "discriminator learning rate");
  dflag(train, "--dropout", "train.dropout", "feature/views dropout ratio");
  iflag(train, "--eval-every", "train.eval_every", "evaluation cadence (0 = end only)");
  iflag(train, "--checkpoint-every", "train.checkpoint_every", "checkpoint cadence");
  sflag(train, "--behavior", "train.behavior", "hidden|hidden+logits");
  sflag(train, "--grounding", "model.grounding", "cmg|historical|mutual");
  dflag(train, "--clip-norm", "train.clip_norm", "max gradient norm (0 = off)");
  iflag(train, "--workers", "train.workers", "parallel rollout workers");
  sflag(train, "--sweep-interval", "train.sweep_interval",
        "comma list: one run per interval value");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or baseline policy");
  sflag(eval_cmd, "--env", "eval.env_dir", "environment directory");
  sflag(eval_cmd, "--data", "eval.data_dir", "dataset directory");
  sflag(eval_cmd, "--ckpt", "eval.ckpt", "checkpoint file");
  sflag(eval_cmd, "--split", "eval.split", "train|val_seen|val_unseen");
  sflag(eval_cmd, "--policy", "eval.policy", "model|oracle|stop|random");
  sflag(eval_cmd, "--traj-dump", "eval.traj_dump", "write attention/trajectory JSONL here");
  dflag(eval_cmd, "--d-th", "eval.d_th", "success radius in meters");

  CLI::App* plot = app.add_subcommand("plot", "render charts from manifests and dumps");
  PlotInputs plot_in;
  plot->add_option("--manifest", plot_in.manifests, "run manifest(s)");
  plot->add_option("--traj", plot_in.traj_dump, "trajectory dump JSONL");
  plot->add_option("--env", plot_in.env_file, "environment file for overlays");
  plot->add_option("--limit", plot_in.limit, "max trajectory overlays");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    FlatConfig cfg = FlatConfig::defaults();
    if (train->parsed() && preset == "paper") {
      // V-B hyperparameters, documented preset
      cfg.set("model.word_dim", 256);
      cfg.set("model.enc_hidden", 256);
      cfg.set("model.dec_hidden", 512);
      cfg.set("model.proj_dim", 512);
      cfg.set("train.lr_gen", 1e-4);
      cfg.set("train.lr_dis", 1e-4);
      cfg.set("train.batch", 64);
    }
    if (!config_file.empty()) cfg.apply_file(config_file);
    if (seed) cfg.set("seed", *seed);
    if (out) cfg.set("out", *out);
    for (const auto& [key, v] : ivals) {
      if (v) cfg.set(key, *v);
    }
    for (const auto& [key, v] : dvals) {
      if (v) cfg.set(key, *v);
    }
    for (const auto& [key, v] : svals) {
      if (v) cfg.set(key, *v);
    }
    for (const std::string& ov : overrides) {
      const auto eq = ov.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + ov + "'");
      cfg.apply_override(ov.substr(0, eq), ov.substr(eq + 1));
    }

    if (gen_env->parsed()) {
      for (const auto& [name, hash] : cmd_gen_env(cfg)) {
        std::cout << name << " " << hash << "\n";
      }
    } else if (gen_data->parsed()) {
      for (const auto& [name, hash] : cmd_gen_data(cfg)) {
        std::cout << name << " " << hash << "\n";
      }
    } else if (train->parsed()) {
      const RunManifest manifest = cmd_train(cfg);
      std::cout << "manifest " << cfg.get_string("out") << "/manifest.json rows="
                << manifest.rows.size() << "\n";
    } else if (eval_cmd->parsed()) {
      const EvalOutputs outs = cmd_eval(cfg);
      std::cout << outs.csv_path << "\n" << outs.json_path << "\n";
    } else if (plot->parsed()) {
      plot_in.out_dir = cfg.get_string("out");
      for (const std::string& f : cmd_plot(plot_in)) std::cout << f << "\n";
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace navlab::cli
