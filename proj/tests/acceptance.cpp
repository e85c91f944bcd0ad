// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy benchmark criteria share training runs; everything is
// seeded and runs single-threaded.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "navlab/checkpoint.hpp"
#include "navlab/cli.hpp"
#include "navlab/discriminator.hpp"
#include "navlab/metrics.hpp"
#include "navlab/trainer.hpp"
#include "navlab/util.hpp"
#include "oracle_equations.hpp"

using namespace navlab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::vector<std::string> g_lines;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::ostringstream line;
  line << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << what;
  if (!detail.empty()) line << " (" << detail << ")";
  g_lines.push_back(line.str());
  std::cout << line.str() << std::endl;
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool rg = true) {
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Values in [-1,1] but bounded away from 0 and +-0.5, so central differences
// never straddle the relu/leaky/clamp kinks they are asked to probe.
Tensor kink_free_tensor(std::vector<int> shape, Rng& rng, bool rg = true) {
  static const double lo[4] = {-0.92, -0.42, 0.08, 0.58};
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (double& v : t.values()) {
    v = lo[rng.uniform_int(4)] + 0.34 * rng.uniform();
  }
  return t;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient suite
// ---------------------------------------------------------------------------

double op_suite_max_err() {
  double worst = 0.0;
  Rng rng(271828);
  auto check = [&](const std::function<Tensor()>& f, const std::vector<Tensor>& params) {
    worst = std::max(worst, finite_difference_check(f, params, 1e-3));
  };
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.uniform_int(4);
    const int m = 2 + rng.uniform_int(4);
    Tensor a = random_tensor({n}, rng);
    Tensor b = random_tensor({n}, rng);
    Tensor w = random_tensor({m, n}, rng);
    Tensor w2 = random_tensor({n, m}, rng);
    Tensor y = random_tensor({m}, rng);
    std::vector<bool> mask(static_cast<size_t>(n), true);
    if (n > 1) mask[0] = (trial % 3) != 0;

    check([&] { return sum(mul(add(a, b), sub(a, b))); }, {a, b});
    check([&] { return sum(tanh(a) * sigmoid(b)) + sum(neg(scale(a, 0.7))); }, {a, b});
    check([&] { return sum(log(add(sigmoid(a), Tensor::full({n}, 0.5)))); }, {a});
    Tensor ak = kink_free_tensor({n}, rng);
    Tensor bk = kink_free_tensor({n}, rng);
    check([&] { return sum(relu(ak) + leaky_relu(bk, 0.2)) + sum(clamp(ak, -0.5, 0.5)); },
          {ak, bk});
    check([&] { return sum(matvec(w, a) * y); }, {w, a, y});
    check([&] { return sum(matvec_transposed(w, y) * a); }, {w, y, a});
    check([&] { return element(matvec(matmul(w, w2), y), 0); }, {w, w2, y});
    check([&] { return sum(masked_softmax(a, mask) * b); }, {a, b});
    check([&] { return sum(slice(concat({a, b}), 1, n)) + element(row(w, 0), 0); }, {a, b, w});
    check([&] { return sum(stack_rows({a, b}) * stack_rows({b, a})); }, {a, b});

    LstmParams cell = LstmParams::init(n, m, rng);
    Tensor h0 = random_tensor({m}, rng);
    Tensor c0 = random_tensor({m}, rng);
    check(
        [&] {
          auto [h, c] = lstm_step(a, h0, c0, cell);
          auto [h2, c2] = lstm_step(a, h, c, cell);
          return sum(h2 * h2) + sum(c2);
        },
        {cell.w_input, cell.w_hidden, cell.bias, a, h0, c0});
  }
  return worst;
}

struct TinyWorld {
  GraphStore graphs;
  Dataset dataset;
  NavigatorParams params;
  DiscriminatorParams dis;
  NavigatorConfig ncfg;
};

TinyWorld tiny_world(uint64_t seed, int n_nodes = 12, int episodes = 6,
                     Grounding grounding = Grounding::kCmg,
                     BehaviorKind behavior = BehaviorKind::kHidden) {
  TinyWorld w;
  Rng cb_rng(substream_seed(seed, "env"));
  LandmarkCodebook cb = LandmarkCodebook::make(n_nodes, 8 - kHeadingFeatureDim, cb_rng);
  std::vector<NavGraph> graphs;
  std::vector<std::string> ids;
  for (int i = 0; i < 2; ++i) {
    Rng grng = substream(seed, "env", static_cast<uint64_t>(i) + 1);
    graphs.push_back(NavGraph::generate(n_nodes, 4, 8, grng, &cb));
    ids.push_back("g" + std::to_string(i));
  }
  Rng drng = substream(seed, "data");
  w.dataset = build_dataset(graphs, ids, 1, {episodes, 3, 3}, 2, 4, drng);
  for (size_t i = 0; i < graphs.size(); ++i) w.graphs.emplace(ids[i], graphs[i]);

  w.ncfg.vocab_size = w.dataset.vocab.size();
  w.ncfg.feature_dim = 8;
  w.ncfg.word_dim = 5;
  w.ncfg.enc_hidden = 4;
  w.ncfg.dec_hidden = 6;
  w.ncfg.proj_dim = 8;
  w.ncfg.action_dim = 3;
  w.ncfg.max_directions = 5;
  w.ncfg.grounding = grounding;
  Rng init = substream(seed, "init");
  w.params = NavigatorParams::init(w.ncfg, init);
  DiscriminatorConfig dcfg;
  dcfg.input_dim = behavior_dim(behavior, w.ncfg.dec_hidden, w.ncfg.max_directions);
  dcfg.summary_hidden = 4;
  dcfg.mlp_hidden = 6;
  w.dis = DiscriminatorParams::init(dcfg, init);
  return w;
}

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const double op_err = op_suite_max_err();

  // full navigator loss on a short episode, every parameter element
  TinyWorld w = tiny_world(31415);
  const Episode* ep = w.dataset.split("train")[0];
  auto f = [&]() {
    RolloutOptions opts;
    opts.mode = RolloutMode::kTeacher;
    return rollout(*ep, w.graphs.at(ep->graph_id), w.params, opts).total_nll;
  };
  const double nav_err = finite_difference_check(f, w.params.params().tensors(), 1e-3);

  const double secs = seconds_since(t0);
  const double worst = std::max(op_err, nav_err);
  report(1, worst < 1e-4 && secs < 60.0, "gradient suite vs central differences",
         "ops " + fmt(op_err) + ", navigator loss " + fmt(nav_err) + ", " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// criterion 2: equation oracles
// ---------------------------------------------------------------------------

oracle::Mat to_rows(const Tensor& m) {
  oracle::Mat rows(static_cast<size_t>(m.dim(0)), oracle::Vec(static_cast<size_t>(m.dim(1))));
  for (int i = 0; i < m.dim(0); ++i) {
    for (int j = 0; j < m.dim(1); ++j) {
      rows[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          m.values()[static_cast<size_t>(i * m.dim(1) + j)];
    }
  }
  return rows;
}

double max_abs_diff(const std::vector<double>& a, const oracle::Vec& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

void criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  Rng rng(161803);
  for (int trial = 0; trial < 100; ++trial) {
    NavigatorConfig cfg;
    cfg.vocab_size = 20;
    cfg.feature_dim = 8;
    cfg.word_dim = 5;
    cfg.enc_hidden = 4;
    cfg.dec_hidden = 7;
    cfg.proj_dim = 8;
    cfg.action_dim = 3;
    cfg.max_directions = 6;
    Rng prng(9000 + static_cast<uint64_t>(trial));
    NavigatorParams p = NavigatorParams::init(cfg, prng);
    const int E = cfg.encoder_out();
    const int K = 1 + rng.uniform_int(5);
    const int L = 1 + rng.uniform_int(6);
    Tensor X = random_tensor({L, E}, rng, false);
    Tensor V = random_tensor({K, cfg.proj_dim}, rng, false);
    Tensor h = random_tensor({cfg.dec_hidden}, rng, false);
    std::vector<bool> mask(static_cast<size_t>(L), true);
    if (L > 2) mask[static_cast<size_t>(L - 1)] = false;

    auto hist = historical_ground(X, mask, V, h, p);
    auto ohist = oracle::historical(to_rows(X), mask, to_rows(V), h.values(),
                                    to_rows(p.w_att_visual), to_rows(p.w_att_text));
    worst = std::max(worst, max_abs_diff(hist.visual_weights.values(), ohist.alpha));
    worst = std::max(worst, max_abs_diff(hist.text_weights.values(), ohist.beta));
    worst = std::max(worst, max_abs_diff(hist.visual.values(), ohist.visual));
    worst = std::max(worst, max_abs_diff(hist.text.values(), ohist.text));

    auto mut = mutual_ground(X, mask, V, p);
    auto omut = oracle::mutual(to_rows(X), mask, to_rows(V), to_rows(p.w_mut_text),
                               to_rows(p.w_mut_visual), to_rows(p.w_base),
                               to_rows(p.w_query_text), to_rows(p.w_query_visual));
    worst = std::max(worst, max_abs_diff(mut.visual_weights.values(), omut.alpha));
    worst = std::max(worst, max_abs_diff(mut.text_weights.values(), omut.beta));
    worst = std::max(worst, max_abs_diff(mut.visual.values(), omut.visual));
    worst = std::max(worst, max_abs_diff(mut.text.values(), omut.text));

    auto [probs, logits] = action_distribution(h, hist.text, V, p);
    auto [oprobs, ologits] =
        oracle::action(h.values(), ohist.text, to_rows(V), to_rows(p.w_action));
    worst = std::max(worst, max_abs_diff(probs.values(), oprobs));
    worst = std::max(worst, max_abs_diff(logits.values(), ologits));
  }
  const double secs = seconds_since(t0);
  report(2, worst < 1e-10 && secs < 60.0,
         "grounding and action equations vs straight-line reimplementation",
         "100 instances, max abs diff " + fmt(worst) + ", " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// criterion 3: metric oracles
// ---------------------------------------------------------------------------

double brute_force_distance(const NavGraph& g, int a, int b) {
  if (a == b) return 0.0;
  std::vector<bool> visited(static_cast<size_t>(g.node_count()), false);
  double best = std::numeric_limits<double>::infinity();
  auto dfs = [&](auto&& self, int node, double acc) -> void {
    if (acc >= best) return;
    if (node == b) {
      best = acc;
      return;
    }
    visited[static_cast<size_t>(node)] = true;
    for (int k = 1; k < g.direction_count(node); ++k) {
      const int next = g.direction(node, k).neighbor;
      if (!visited[static_cast<size_t>(next)]) self(self, next, acc + g.edge_weight(node, next));
    }
    visited[static_cast<size_t>(node)] = false;
  };
  dfs(dfs, a, 0.0);
  return best;
}

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string why;

  Rng rng(577215);
  for (int gi = 0; gi < 50 && ok; ++gi) {
    const int n = 3 + rng.uniform_int(6);  // 3..8 nodes
    NavGraph g = NavGraph::generate(n, std::min(4, n - 1), 8, rng);
    for (int a = 0; a < n && ok; ++a) {
      for (int b = 0; b < n && ok; ++b) {
        const double fast = g.shortest_distance(a, b);
        const double brute = brute_force_distance(g, a, b);
        if (std::abs(fast - brute) > 1e-9) {
          ok = false;
          why = "distance mismatch " + fmt(fast) + " vs brute " + fmt(brute);
        }
      }
    }
    // SR/SPL/NE against the brute-force reference for the oracle policy
    Vocabulary vocab = Vocabulary::build(g.landmark_tags());
    std::vector<Episode> eps;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a != b && g.hop_count(a, b) >= 1) eps.push_back(make_episode(g, "g", a, b, vocab));
      }
    }
    GraphStore store;
    store.emplace("g", g);
    std::vector<const Episode*> refs;
    for (const auto& e : eps) refs.push_back(&e);
    EvalResult res = evaluate(refs, store, oracle_runner());
    if (!(res.sr == 1.0 && res.spl == 1.0 && res.ne == 0.0)) {
      ok = false;
      why = "oracle agent not saturated";
    }
    for (const auto& row : res.rows) {
      const Episode& e = eps[static_cast<size_t>(&row - res.rows.data())];
      if (std::abs(row.l - brute_force_distance(g, e.start, e.goal)) > 1e-9) {
        ok = false;
        why = "l_i differs from brute force";
      }
    }
  }

  // boundary: stopping exactly at 3.0 m counts, 3.0 + eps does not
  {
    nlohmann::json j;
    j["feature_dim"] = 6;
    j["k_max"] = 2;
    j["landmark_tags"] = 2;
    j["seed"] = 0;
    j["nodes"] = {{{"id", 0}, {"x", 0.0}, {"y", 0.0}, {"landmark", 0}},
                  {{"id", 1}, {"x", 3.0}, {"y", 0.0}, {"landmark", 1}}};
    j["edges"] = {{0, 1}};
    nlohmann::json feats;
    for (int i = 0; i < 2; ++i) {
      feats[std::to_string(i)] = {{"0", std::vector<double>(6, 0.0)},
                                  {"1", std::vector<double>(6, 0.5)}};
    }
    j["features"] = feats;
    NavGraph g3 = NavGraph::from_json(j);
    if (!is_success(g3, 0, 1)) {
      ok = false;
      why = "d == 3.0 m must count as success";
    }
    j["nodes"][1]["x"] = 3.0 + 1e-9;
    NavGraph g3e = NavGraph::from_json(j);
    if (is_success(g3e, 0, 1)) {
      ok = false;
      why = "d just over 3.0 m must fail";
    }
  }

  const double secs = seconds_since(t0);
  report(3, ok && secs < 60.0, "metric oracles vs brute-force enumeration",
         ok ? "50 graphs, boundary inclusive, " + fmt(secs) + " s" : why);
}

// ---------------------------------------------------------------------------
// criterion 4: Algorithm fidelity over 100 instrumented iterations
// ---------------------------------------------------------------------------

void criterion_4() {
  TinyWorld w = tiny_world(2718);
  TrainConfig tc;
  tc.regime = Regime::kAal;
  tc.interval = 1;
  tc.batch = 2;
  tc.iters = 100;
  tc.eval_every = 0;
  tc.dropout = 0.2;
  tc.seed = 7;
  Trainer trainer(tc, w.params, w.dis);
  trainer.run(w.dataset, w.graphs);

  bool ok = trainer.audit().size() == 100;
  std::string why = ok ? "" : "audit incomplete";
  for (size_t i = 0; ok && i < trainer.audit().size(); ++i) {
    const IterationAudit& a = trainer.audit()[i];
    const bool teacher = is_teacher_iteration(static_cast<long>(i) + 1, 1);
    if (a.mode != (teacher ? "tf" : "sf")) {
      ok = false;
      why = "mode sequence broken at iteration " + std::to_string(i + 1);
      break;
    }
    if (a.updates.size() != 3) {
      ok = false;
      why = "expected exactly three updates per iteration";
      break;
    }
    const char* nll = teacher ? "nll_tf" : "nll_sf";
    const char* dis = teacher ? "dis_stage1" : "dis_stage2";
    const char* gen = teacher ? "gen_stage1" : "gen_stage2";
    const char* gen_src = teacher ? "sf" : "tf";
    if (!(a.updates[0].target == "generator" && a.updates[0].loss == nll &&
          a.updates[1].target == "discriminator" && a.updates[1].loss == dis &&
          a.updates[2].target == "generator" && a.updates[2].loss == gen &&
          a.updates[2].source == gen_src)) {
      ok = false;
      why = "update order/labels broken at iteration " + std::to_string(i + 1);
      break;
    }
  }

  // discriminator frozen while the fooling loss updates the generator
  if (ok) {
    TinyWorld w2 = tiny_world(2719);
    Adam opt_gen(w2.params.params(), {1e-3, 0.9, 0.999, 1e-8});
    Rng rng(3);
    RolloutOptions opts;
    opts.mode = RolloutMode::kStudent;
    opts.rng = &rng;
    const Episode* ep = w2.dataset.split("train")[0];
    TrajectoryRecord rec = rollout(*ep, w2.graphs.at(ep->graph_id), w2.params, opts);
    const auto dis_snapshot = w2.dis.params().snapshot_values();
    Tensor loss = generator_fooling_loss({rec.hidden_states}, w2.dis, 1, true, &rng);
    opt_gen.zero_grad();
    w2.dis.params().zero_grad();
    backward(loss);
    opt_gen.step();
    if (!w2.dis.params().values_equal(dis_snapshot)) {
      ok = false;
      why = "discriminator values changed under the fooling update";
    }
  }
  report(4, ok, "alternation and gradient-source trace over 100 iterations",
         ok ? "m1 = teacher-forcing; stage order and freeze hold exactly" : why);
}

// ---------------------------------------------------------------------------
// shared benchmark harness for criteria 5-9
// ---------------------------------------------------------------------------

struct BenchPaths {
  std::string root;
  std::string env_dir;
  std::string data_dir;
};

BenchPaths bench_paths(uint64_t seed) {
  BenchPaths p;
  p.root = "acceptance_work/seed_" + std::to_string(seed);
  p.env_dir = p.root + "/env";
  p.data_dir = p.root + "/data";
  return p;
}

cli::FlatConfig bench_config(uint64_t seed) {
  cli::FlatConfig cfg = cli::FlatConfig::defaults();
  cfg.set("seed", seed);
  cfg.set("env.graphs", 12);  // 10 train + 2 held out
  cfg.set("env.nodes", 40);
  cfg.set("data.heldout", 2);
  cfg.set("data.train", 500);
  cfg.set("data.val_seen", 100);
  cfg.set("data.val_unseen", 100);
  cfg.set("train.iters", 3000);
  cfg.set("train.eval_every", 0);
  return cfg;
}

void bench_generate(uint64_t seed) {
  const BenchPaths p = bench_paths(seed);
  if (fs::exists(p.data_dir + "/dataset.jsonl")) return;
  cli::FlatConfig cfg = bench_config(seed);
  cfg.set("out", p.env_dir);
  cli::cmd_gen_env(cfg);
  cfg.set("data.env_dir", p.env_dir);
  cfg.set("out", p.data_dir);
  cli::cmd_gen_data(cfg);
}

struct RunKey {
  uint64_t seed;
  std::string regime;
  int interval = 1;
  std::string grounding = "cmg";

  std::string dir() const {
    return bench_paths(seed).root + "/" + regime +
           (interval != 1 ? "_i" + std::to_string(interval) : "") +
           (grounding != "cmg" ? "_" + grounding : "");
  }
};

// final val_unseen row of a (cached) benchmark run
MetricRow bench_run(const RunKey& key) {
  bench_generate(key.seed);
  const BenchPaths p = bench_paths(key.seed);
  const std::string manifest_path = key.dir() + "/manifest.json";
  if (!fs::exists(manifest_path)) {
    cli::FlatConfig cfg = bench_config(key.seed);
    cfg.set("train.env_dir", p.env_dir);
    cfg.set("train.data_dir", p.data_dir);
    cfg.set("train.regime", key.regime);
    cfg.set("train.interval", key.interval);
    cfg.set("model.grounding", key.grounding);
    cfg.set("out", key.dir());
    cli::cmd_train(cfg);
  }
  const auto j = nlohmann::json::parse(read_file(manifest_path));
  MetricRow row;
  for (const auto& r : j.at("rows")) {
    if (r.at("split") == "val_unseen") {
      row.iter = r.at("iteration").get<long>();
      row.ne = r.at("ne").get<double>();
      row.sr = r.at("sr").get<double>();
      row.spl = r.at("spl").get<double>();
      row.tl = r.at("tl").get<double>();
    }
  }
  return row;
}

double mean_reference_length(uint64_t seed) {
  const BenchPaths p = bench_paths(seed);
  const auto episodes = episodes_from_jsonl(read_file(p.data_dir + "/dataset.jsonl"));
  const GraphStore graphs = cli::load_graph_store(p.env_dir);
  double total = 0.0;
  int n = 0;
  for (const Episode& ep : episodes) {
    if (ep.split != "val_unseen") continue;
    total += graphs.at(ep.graph_id).path_weight(ep.reference_path);
    ++n;
  }
  return total / n;
}

const std::vector<uint64_t> kBenchSeeds = {101, 102, 103, 104, 105};

void criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  // dedicated 32-episode training set
  const std::string root = "acceptance_work/overfit";
  cli::FlatConfig cfg = cli::FlatConfig::defaults();
  cfg.set("seed", 42);
  cfg.set("env.graphs", 2);
  cfg.set("env.nodes", 20);
  cfg.set("data.heldout", 1);
  cfg.set("data.train", 32);
  cfg.set("data.val_seen", 8);
  cfg.set("data.val_unseen", 8);
  cfg.set("out", root + "/env");
  cli::cmd_gen_env(cfg);
  cfg.set("data.env_dir", root + "/env");
  cfg.set("out", root + "/data");
  cli::cmd_gen_data(cfg);

  const GraphStore graphs = cli::load_graph_store(root + "/env");
  Dataset dataset;
  dataset.vocab =
      Vocabulary::from_json(nlohmann::json::parse(read_file(root + "/data/vocab.json")));
  dataset.episodes = episodes_from_jsonl(read_file(root + "/data/dataset.jsonl"));

  NavigatorConfig ncfg;
  ncfg.vocab_size = dataset.vocab.size();
  ncfg.feature_dim = graphs.begin()->second.feature_dim();
  ncfg.max_directions = graphs.begin()->second.k_max() + 1;
  Rng init = substream(42, "init");
  NavigatorParams gen = NavigatorParams::init(ncfg, init);
  DiscriminatorConfig dcfg;
  dcfg.input_dim = behavior_dim(BehaviorKind::kHidden, ncfg.dec_hidden, ncfg.max_directions);
  DiscriminatorParams dis = DiscriminatorParams::init(dcfg, init);

  TrainConfig tc;
  tc.regime = Regime::kTeacher;
  tc.iters = 2000;
  tc.eval_every = 0;
  tc.seed = 42;
  Trainer trainer(tc, std::move(gen), std::move(dis));
  trainer.run(dataset, graphs);

  const double acc =
      next_action_accuracy(dataset.split("train"), graphs, trainer.generator());
  const double secs = seconds_since(t0);
  report(5, acc >= 0.95 && secs < 300.0, "teacher-forcing overfits 32 episodes",
         "greedy next-action accuracy " + fmt(acc) + " after 2000 iterations, " + fmt(secs) +
             " s");
}

void criterion_6_and_7() {
  const auto t0 = std::chrono::steady_clock::now();
  int tl_trend = 0, sr_trend = 0, spl_trend = 0, len_match = 0;
  std::ostringstream detail;
  for (uint64_t seed : kBenchSeeds) {
    const MetricRow teacher = bench_run({seed, "teacher"});
    const MetricRow student = bench_run({seed, "student"});
    const MetricRow aal = bench_run({seed, "aal"});
    if (student.tl > teacher.tl) ++tl_trend;
    if (student.sr >= teacher.sr) ++sr_trend;
    if (aal.spl >= teacher.spl && aal.spl >= student.spl) ++spl_trend;
    const double ref = mean_reference_length(seed);
    if (std::abs(teacher.tl - ref) / ref <= 0.15) ++len_match;
    detail << " s" << seed << "[TL " << fmt(student.tl) << ">" << fmt(teacher.tl) << " SR "
           << fmt(student.sr) << ">=" << fmt(teacher.sr) << " SPL(aal) " << fmt(aal.spl)
           << " vs " << fmt(teacher.spl) << "/" << fmt(student.spl) << " ref " << fmt(ref)
           << "]";
  }
  const double secs = seconds_since(t0);
  report(6, tl_trend >= 4 && sr_trend >= 4 && spl_trend >= 4 && secs < 3600.0,
         "ablation trends on val_unseen",
         "TL " + std::to_string(tl_trend) + "/5, SR " + std::to_string(sr_trend) + "/5, SPL " +
             std::to_string(spl_trend) + "/5," + detail.str() + ", " + fmt(secs) + " s");
  report(7, len_match >= 4, "teacher-forcing trajectory length matches reference lengths",
         std::to_string(len_match) + "/5 seeds within 15%");
}

void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  int trend = 0;
  std::ostringstream detail;
  for (uint64_t seed : kBenchSeeds) {
    const MetricRow i1 = bench_run({seed, "aal", 1});
    const MetricRow i32 = bench_run({seed, "aal", 32});
    if (i1.spl >= i32.spl) ++trend;
    detail << " s" << seed << "[" << fmt(i1.spl) << " vs " << fmt(i32.spl) << "]";
  }
  const double secs = seconds_since(t0);
  report(8, trend >= 4 && secs < 5400.0, "alternation interval 1 vs 32 on val_unseen SPL",
         std::to_string(trend) + "/5 seeds," + detail.str() + ", " + fmt(secs) + " s");
}

void criterion_9() {
  int trend = 0;
  std::ostringstream detail;
  for (uint64_t seed : kBenchSeeds) {
    const MetricRow hist_student = bench_run({seed, "student", 1, "historical"});
    const MetricRow hist_aal = bench_run({seed, "aal", 1, "historical"});
    if (hist_aal.spl >= hist_student.spl) ++trend;
    detail << " s" << seed << "[" << fmt(hist_aal.spl) << " vs " << fmt(hist_student.spl)
           << "]";
  }
  report(9, trend >= 3, "AAL improves the historical-grounding-only navigator",
         std::to_string(trend) + "/5 seeds," + detail.str());
}

// ---------------------------------------------------------------------------
// criterion 10: discriminator signal against a frozen random generator
// ---------------------------------------------------------------------------

void criterion_10() {
  const auto t0 = std::chrono::steady_clock::now();
  TinyWorld w = tiny_world(555, 20, 40);
  Adam opt(w.dis.params(), {1e-3, 0.9, 0.999, 1e-8});
  const auto train_eps = w.dataset.split("train");

  auto behaviors = [&](const Episode& ep, bool teacher, Rng& rng) {
    RolloutOptions opts;
    opts.mode = teacher ? RolloutMode::kTeacher : RolloutMode::kStudent;
    opts.rng = &rng;
    TrajectoryRecord rec = rollout(ep, w.graphs.at(ep.graph_id), w.params, opts);
    std::vector<Tensor> out;
    for (const Tensor& h : rec.hidden_states) out.push_back(h.detached());
    return out;
  };

  for (int step = 1; step <= 200; ++step) {
    Rng rng = substream(555, "dis_train", static_cast<uint64_t>(step));
    std::vector<std::vector<Tensor>> tf_batch, sf_batch;
    for (int i = 0; i < 4; ++i) {
      const Episode& ep =
          *train_eps[static_cast<size_t>(rng.uniform_int(static_cast<int>(train_eps.size())))];
      tf_batch.push_back(behaviors(ep, true, rng));
      sf_batch.push_back(behaviors(ep, false, rng));
    }
    Tensor loss = discriminator_loss(tf_batch, sf_batch, w.dis, 1, true, &rng);
    opt.zero_grad();
    backward(loss);
    opt.step();
  }

  // held-out accuracy on the validation episodes
  int correct = 0, total = 0;
  Rng eval_rng = substream(555, "dis_eval");
  for (const char* split : {"val_seen", "val_unseen"}) {
    for (const Episode* ep : w.dataset.split(split)) {
      for (int rep = 0; rep < 9; ++rep) {
        if (discriminate(behaviors(*ep, true, eval_rng), w.dis, false, nullptr).item() > 0.5) {
          ++correct;
        }
        if (discriminate(behaviors(*ep, false, eval_rng), w.dis, false, nullptr).item() <= 0.5) {
          ++correct;
        }
        total += 2;
      }
    }
  }
  const double acc = static_cast<double>(correct) / total;
  const double secs = seconds_since(t0);
  report(10, acc >= 0.70, "discriminator separates tf/sf behaviors of a frozen generator",
         "held-out accuracy " + fmt(acc) + " after 200 steps, " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// criterion 11: bit-for-bit reproducibility of CLI commands
// ---------------------------------------------------------------------------

int cli_run(std::vector<std::string> args) {
  std::vector<const char*> argv{"navlab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

void criterion_11() {
  const std::string root = "acceptance_work/determinism";
  fs::remove_all(root);
  bool ok = true;
  std::string why;

  auto check_equal = [&](const std::string& a, const std::string& b, const std::string& what) {
    if (!ok) return;
    std::string ca = read_file(a);
    std::string cb = read_file(b);
    // manifests echo their own output directory; normalize it away
    size_t pos;
    while ((pos = ca.find(root + "/one")) != std::string::npos) ca.replace(pos, root.size() + 4, "D");
    while ((pos = cb.find(root + "/two")) != std::string::npos) cb.replace(pos, root.size() + 4, "D");
    if (ca != cb) {
      ok = false;
      why = what + " differs between identical runs";
    }
  };

  for (const std::string side : {"one", "two"}) {
    const std::string base = root + "/" + side;
    if (cli_run({"gen-env", "--out", base + "/env", "--graphs", "3", "--nodes", "16", "--kmax",
                 "4", "--landmarks", "16", "--seed", "17"}) != 0 ||
        cli_run({"gen-data", "--env", base + "/env", "--out", base + "/data", "--train", "24",
                 "--val-seen", "8", "--val-unseen", "8", "--heldout", "1", "--min-hops", "2",
                 "--max-hops", "4", "--seed", "17"}) != 0 ||
        cli_run({"train", "--env", base + "/env", "--data", base + "/data", "--out",
                 base + "/run", "--regime", "aal", "--iters", "40", "--batch", "4",
                 "--eval-every", "20", "--seed", "17"}) != 0 ||
        cli_run({"eval", "--env", base + "/env", "--data", base + "/data", "--ckpt",
                 base + "/run/ckpt_final.bin", "--split", "val_unseen", "--out", base + "/ev",
                 "--traj-dump", base + "/ev/dump.jsonl", "--seed", "17"}) != 0) {
      ok = false;
      why = "a command failed";
      break;
    }
  }
  if (ok) {
    for (int i = 0; i < 3; ++i) {
      check_equal(root + "/one/env/env_00" + std::to_string(i) + ".json",
                  root + "/two/env/env_00" + std::to_string(i) + ".json", "environment file");
    }
    check_equal(root + "/one/data/dataset.jsonl", root + "/two/data/dataset.jsonl", "dataset");
    check_equal(root + "/one/data/vocab.json", root + "/two/data/vocab.json", "vocabulary");
    check_equal(root + "/one/run/metrics.csv", root + "/two/run/metrics.csv", "metrics table");
    check_equal(root + "/one/run/manifest.json", root + "/two/run/manifest.json", "manifest");
    check_equal(root + "/one/run/ckpt_final.bin", root + "/two/run/ckpt_final.bin",
                "checkpoint");
    check_equal(root + "/one/ev/eval_val_unseen.csv", root + "/two/ev/eval_val_unseen.csv",
                "evaluation table");
    check_equal(root + "/one/ev/dump.jsonl", root + "/two/ev/dump.jsonl", "trajectory dump");
  }
  report(11, ok, "same seed reproduces all artifacts bit-for-bit",
         ok ? "env, data, train, eval outputs identical" : why);
}

}  // namespace

int main(int argc, char** argv) {
  // optional subset: acceptance [criterion numbers...]
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  auto want = [&](int c) {
    return which.empty() || std::find(which.begin(), which.end(), c) != which.end();
  };

  fs::create_directories("acceptance_work");
  const auto t0 = std::chrono::steady_clock::now();
  if (want(1)) criterion_1();
  if (want(2)) criterion_2();
  if (want(3)) criterion_3();
  if (want(4)) criterion_4();
  if (want(5)) criterion_5();
  if (want(6) || want(7)) criterion_6_and_7();
  if (want(8)) criterion_8();
  if (want(9)) criterion_9();
  if (want(10)) criterion_10();
  if (want(11)) criterion_11();

  std::cout << "----" << std::endl;
  for (const std::string& line : g_lines) std::cout << line << std::endl;
  std::printf("acceptance: %d failure(s), %.1f s total\n", g_failures,
              seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
