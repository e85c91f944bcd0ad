#include <doctest.h>

#include <cmath>

#include "navlab/navigator.hpp"
#include "navlab/trainer.hpp"
#include "navlab/util.hpp"
#include "oracle_equations.hpp"

using namespace navlab;

namespace {

NavigatorConfig tiny_config(int vocab_size = 24, Grounding g = Grounding::kCmg) {
  NavigatorConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.feature_dim = 6;
  cfg.word_dim = 5;
  cfg.enc_hidden = 4;  // encoder out 8
  cfg.dec_hidden = 7;
  cfg.proj_dim = 8;
  cfg.action_dim = 3;
  cfg.max_directions = 5;
  cfg.grounding = g;
  return cfg;
}

Tensor random_matrix(int r, int c, Rng& rng) {
  Tensor t = Tensor::zeros({r, c});
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

oracle::Mat to_rows(const Tensor& m) {
  oracle::Mat rows(static_cast<size_t>(m.dim(0)),
                   oracle::Vec(static_cast<size_t>(m.dim(1))));
  for (int i = 0; i < m.dim(0); ++i) {
    for (int j = 0; j < m.dim(1); ++j) {
      rows[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          m.values()[static_cast<size_t>(i * m.dim(1) + j)];
    }
  }
  return rows;
}

void check_close(const std::vector<double>& a, const oracle::Vec& b, double tol = 1e-10) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

struct SmallWorld {
  GraphStore graphs;
  Vocabulary vocab;
  Episode episode;
  NavigatorParams params;
};

SmallWorld make_world(uint64_t seed, Grounding g = Grounding::kCmg) {
  SmallWorld w;
  Rng grng(seed);
  Rng cb_rng(seed + 1);
  LandmarkCodebook cb = LandmarkCodebook::make(6, 6 - kHeadingFeatureDim, cb_rng);
  NavGraph graph = NavGraph::generate(12, 4, 6, grng, &cb);
  w.vocab = Vocabulary::build(6);
  Rng erng(seed + 2);
  w.episode = generate_episode(graph, "g0", erng, 2, 4, w.vocab);
  w.graphs.emplace("g0", std::move(graph));
  NavigatorConfig cfg = tiny_config(w.vocab.size(), g);
  Rng prng(seed + 3);
  w.params = NavigatorParams::init(cfg, prng);
  return w;
}

}  // namespace

TEST_SUITE_BEGIN("navigator");

TEST_CASE("encode_instruction shapes and masking") {
  NavigatorConfig cfg = tiny_config();
  Rng rng(1);
  NavigatorParams p = NavigatorParams::init(cfg, rng);

  auto one = encode_instruction({7}, p);
  CHECK(one.matrix.dim(0) == 1);
  CHECK(one.mask == std::vector<bool>{true});

  auto four = encode_instruction({2, 7, 9, 3}, p);
  CHECK(four.matrix.dim(0) == 4);
  CHECK(four.matrix.dim(1) == cfg.encoder_out());

  CHECK_THROWS_AS(encode_instruction({2, 99, 3}, p), ValidationError);
  CHECK_THROWS_AS(encode_instruction({2, 0, 3}, p), ValidationError);  // interior PAD
  CHECK_THROWS_AS(encode_instruction({}, p), ValidationError);

  // trailing PADs change nothing about the unmasked encodings
  auto padded = encode_instruction({2, 7, 9, 3, 0, 0}, p);
  CHECK(padded.mask == std::vector<bool>{true, true, true, true, false, false});
  for (int l = 0; l < 4; ++l) {
    for (int j = 0; j < cfg.encoder_out(); ++j) {
      CHECK(padded.matrix.values()[static_cast<size_t>(l * cfg.encoder_out() + j)] ==
            four.matrix.values()[static_cast<size_t>(l * cfg.encoder_out() + j)]);
    }
  }
  // PAD rows are exactly zero
  for (int l = 4; l < 6; ++l) {
    for (int j = 0; j < cfg.encoder_out(); ++j) {
      CHECK(padded.matrix.values()[static_cast<size_t>(l * cfg.encoder_out() + j)] == 0.0);
    }
  }
}

TEST_CASE("historical grounding: degenerate cases") {
  NavigatorConfig cfg = tiny_config();
  Rng rng(2);
  NavigatorParams p = NavigatorParams::init(cfg, rng);
  const int E = cfg.encoder_out();

  // identical direction rows: the convex combination returns the row itself
  Tensor V = Tensor::zeros({3, cfg.proj_dim});
  Rng vr(3);
  for (int j = 0; j < cfg.proj_dim; ++j) {
    const double v = vr.uniform(-1, 1);
    for (int k = 0; k < 3; ++k) V.values()[static_cast<size_t>(k * cfg.proj_dim + j)] = v;
  }
  Tensor X = random_matrix(4, E, vr);
  Tensor h = Tensor::zeros({cfg.dec_hidden});
  for (double& v : h.values()) v = vr.uniform(-1, 1);
  auto g = historical_ground(X, {true, true, true, true}, V, h, p);
  for (int j = 0; j < cfg.proj_dim; ++j) {
    CHECK(g.visual.values()[static_cast<size_t>(j)] ==
          doctest::Approx(V.values()[static_cast<size_t>(j)]).epsilon(1e-12));
  }

  // single direction: attention collapses to [1]
  Tensor V1 = random_matrix(1, cfg.proj_dim, vr);
  auto g1 = historical_ground(X, {true, true, true, true}, V1, h, p);
  CHECK(g1.visual_weights.values() == std::vector<double>{1.0});
}

TEST_CASE("mutual grounding: zero-text degeneracy and single-word case") {
  NavigatorConfig cfg = tiny_config();
  Rng rng(4);
  NavigatorParams p = NavigatorParams::init(cfg, rng);
  const int E = cfg.encoder_out();

  Tensor X0 = Tensor::zeros({3, E});
  Tensor V = random_matrix(4, cfg.proj_dim, rng);
  auto g = mutual_ground(X0, {true, true, true}, V, p);
  for (double a : g.visual_weights.values()) CHECK(a == doctest::Approx(0.25).epsilon(1e-12));

  Tensor X1 = random_matrix(1, E, rng);
  auto g1 = mutual_ground(X1, {true}, V, p);
  CHECK(g1.text_weights.values() == std::vector<double>{1.0});
}

TEST_CASE("equation oracles: random instances match to 1e-10") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    NavigatorConfig cfg = tiny_config();
    Rng prng(100 + static_cast<uint64_t>(trial));
    NavigatorParams p = NavigatorParams::init(cfg, prng);
    const int E = cfg.encoder_out();
    const int K = 1 + rng.uniform_int(4);
    const int L = 1 + rng.uniform_int(5);
    Tensor X = random_matrix(L, E, rng);
    Tensor V = random_matrix(K, cfg.proj_dim, rng);
    Tensor h = random_matrix(1, cfg.dec_hidden, rng);
    Tensor hv = Tensor::from({cfg.dec_hidden}, h.values());
    std::vector<bool> mask(static_cast<size_t>(L), true);
    if (L > 1) mask[static_cast<size_t>(L - 1)] = rng.uniform() < 0.5;

    auto hist = historical_ground(X, mask, V, hv, p);
    auto ohist = oracle::historical(to_rows(X), mask, to_rows(V), h.values(),
                                    to_rows(p.w_att_visual), to_rows(p.w_att_text));
    check_close(hist.visual_weights.values(), ohist.alpha);
    check_close(hist.text_weights.values(), ohist.beta);
    check_close(hist.visual.values(), ohist.visual);
    check_close(hist.text.values(), ohist.text);

    auto mut = mutual_ground(X, mask, V, p);
    auto omut = oracle::mutual(to_rows(X), mask, to_rows(V), to_rows(p.w_mut_text),
                               to_rows(p.w_mut_visual), to_rows(p.w_base),
                               to_rows(p.w_query_text), to_rows(p.w_query_visual));
    check_close(mut.visual_weights.values(), omut.alpha);
    check_close(mut.text_weights.values(), omut.beta);
    check_close(mut.visual.values(), omut.visual);
    check_close(mut.text.values(), omut.text);

    auto [probs, logits] = action_distribution(hv, hist.text, V, p);
    auto [oprobs, ologits] = oracle::action(h.values(), ohist.text, to_rows(V),
                                            to_rows(p.w_action));
    check_close(probs.values(), oprobs);
    check_close(logits.values(), ologits);
  }
}

TEST_CASE("decode_step: zeros, order sensitivity, gradients") {
  NavigatorConfig cfg = tiny_config();
  Rng rng(6);
  NavigatorParams p = NavigatorParams::init(cfg, rng);
  const int E = cfg.encoder_out();

  // zero inputs and zero parameters give the zero state
  for (double& v : p.decoder.w_input.values()) v = 0.0;
  for (double& v : p.decoder.w_hidden.values()) v = 0.0;
  auto [h0, c0] = decode_step(Tensor::zeros({E}), Tensor::zeros({cfg.proj_dim}),
                              Tensor::zeros({E}), Tensor::zeros({cfg.proj_dim}),
                              Tensor::zeros({cfg.proj_dim + cfg.action_dim}),
                              Tensor::zeros({cfg.dec_hidden}),
                              Tensor::zeros({cfg.dec_hidden}), p);
  for (double v : h0.values()) CHECK(v == 0.0);

  Rng rng2(7);
  NavigatorParams q = NavigatorParams::init(cfg, rng2);
  Tensor th = random_matrix(1, E, rng2);
  Tensor vh = random_matrix(1, cfg.proj_dim, rng2);
  Tensor tm = random_matrix(1, E, rng2);
  Tensor vm = random_matrix(1, cfg.proj_dim, rng2);
  Tensor a = random_matrix(1, cfg.proj_dim + cfg.action_dim, rng2);
  auto as_vec = [](const Tensor& t) { return Tensor::from({t.dim(1)}, t.values()); };
  Tensor text_h = as_vec(th), vis_h = as_vec(vh), text_m = as_vec(tm), vis_m = as_vec(vm),
         act = as_vec(a);
  Tensor zero_h = Tensor::zeros({cfg.dec_hidden});

  auto [h1, c1] = decode_step(text_h, vis_h, text_m, vis_m, act, zero_h, zero_h, q);
  // permuted concatenation produces a different state for generic parameters
  auto [h2, c2] = lstm_step(concat({vis_h, text_h, text_m, vis_m, act}), zero_h, zero_h,
                            q.decoder);
  double diff = 0.0;
  for (size_t i = 0; i < h1.values().size(); ++i) {
    diff += std::abs(h1.values()[i] - h2.values()[i]);
  }
  CHECK(diff > 1e-6);

  // gradient of |h|^2 w.r.t. all four grounded features
  Tensor gt = text_h, gv = vis_h, gm = text_m, gvm = vis_m;
  gt.set_requires_grad(true);
  gv.set_requires_grad(true);
  gm.set_requires_grad(true);
  gvm.set_requires_grad(true);
  auto f = [&]() {
    auto [hh, cc] = decode_step(gt, gv, gm, gvm, act, zero_h, zero_h, q);
    return sum(hh * hh);
  };
  CHECK(finite_difference_check(f, {gt, gv, gm, gvm}, 1e-3) < 1e-4);
}

TEST_CASE("action distribution: uniform on equal features, STOP logit zero") {
  NavigatorConfig cfg = tiny_config();
  Rng rng(8);
  NavigatorParams p = NavigatorParams::init(cfg, rng);
  const int E = cfg.encoder_out();
  Tensor h = Tensor::from({cfg.dec_hidden},
                          std::vector<double>(static_cast<size_t>(cfg.dec_hidden), 0.3));
  Tensor text = Tensor::from({E}, std::vector<double>(static_cast<size_t>(E), -0.2));

  Tensor Veq = Tensor::zeros({4, cfg.proj_dim});
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < cfg.proj_dim; ++j) {
      Veq.values()[static_cast<size_t>(k * cfg.proj_dim + j)] = 0.1 * (j + 1);
    }
  }
  auto [p_eq, o_eq] = action_distribution(h, text, Veq, p);
  for (double v : p_eq.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  // STOP row zero => logit exactly zero; scaling features scales logits
  Rng vr(9);
  Tensor V = random_matrix(4, cfg.proj_dim, vr);
  for (int j = 0; j < cfg.proj_dim; ++j) V.values()[static_cast<size_t>(j)] = 0.0;
  auto [p1, o1] = action_distribution(h, text, V, p);
  CHECK(o1.values()[0] == 0.0);

  Tensor V3 = Tensor::from({4, cfg.proj_dim}, V.values());
  for (double& v : V3.values()) v *= 3.0;
  auto [p3, o3] = action_distribution(h, text, V3, p);
  int argmax1 = 0, argmax3 = 0;
  for (int k = 1; k < 4; ++k) {
    if (o1.values()[static_cast<size_t>(k)] > o1.values()[static_cast<size_t>(argmax1)])
      argmax1 = k;
    if (o3.values()[static_cast<size_t>(k)] > o3.values()[static_cast<size_t>(argmax3)])
      argmax3 = k;
    CHECK(o3.values()[static_cast<size_t>(k)] ==
          doctest::Approx(3.0 * o1.values()[static_cast<size_t>(k)]).epsilon(1e-12));
  }
  CHECK(argmax1 == argmax3);
}

TEST_CASE("teacher rollout follows the reference path and stops") {
  SmallWorld w = make_world(30);
  RolloutOptions opts;
  opts.mode = RolloutMode::kTeacher;
  TrajectoryRecord rec = rollout(w.episode, w.graphs.at("g0"), w.params, opts);
  CHECK(rec.nodes == w.episode.reference_path);
  CHECK(rec.steps.back().action == 0);  // explicit STOP, not a cap timeout
  CHECK(rec.steps.size() == w.episode.reference_path.size());
  CHECK(rec.path_length ==
        doctest::Approx(w.graphs.at("g0").path_weight(w.episode.reference_path)));
  // supervision runs the oracle at every step
  for (const StepTrace& s : rec.steps) CHECK(s.supervision >= 0);
}

TEST_CASE("attention weights in every trace sum to one") {
  SmallWorld w = make_world(31);
  Rng rng(32);
  RolloutOptions opts;
  opts.mode = RolloutMode::kStudent;
  opts.rng = &rng;
  opts.dropout = 0.3;
  TrajectoryRecord rec = rollout(w.episode, w.graphs.at("g0"), w.params, opts);
  for (const StepTrace& s : rec.steps) {
    for (const auto* weights : {&s.alpha, &s.beta, &s.alpha_m, &s.beta_m}) {
      double total = 0.0;
      for (double v : *weights) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
    double ptotal = 0.0;
    for (double v : s.probs.values()) ptotal += v;
    CHECK(ptotal == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("greedy rollout is deterministic; zero-temperature sampling matches it") {
  SmallWorld w = make_world(33);
  RolloutOptions greedy;
  greedy.mode = RolloutMode::kGreedy;
  TrajectoryRecord a = rollout(w.episode, w.graphs.at("g0"), w.params, greedy);
  TrajectoryRecord b = rollout(w.episode, w.graphs.at("g0"), w.params, greedy);
  CHECK(a.nodes == b.nodes);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].probs.values() == b.steps[i].probs.values());  // bitwise
  }

  Rng rng(34);
  RolloutOptions student;
  student.mode = RolloutMode::kStudent;
  student.rng = &rng;
  student.temperature = 0.0;
  student.dropout = 0.0;
  TrajectoryRecord s = rollout(w.episode, w.graphs.at("g0"), w.params, student);
  CHECK(s.nodes == a.nodes);
  for (size_t i = 0; i < s.steps.size(); ++i) CHECK(s.steps[i].action == a.steps[i].action);
}

TEST_CASE("student without rng is rejected") {
  SmallWorld w = make_world(35);
  RolloutOptions opts;
  opts.mode = RolloutMode::kStudent;
  CHECK_THROWS_AS(rollout(w.episode, w.graphs.at("g0"), w.params, opts), ValidationError);
}

TEST_CASE("end-to-end differentiability of the teacher NLL") {
  SmallWorld w = make_world(36);
  auto f = [&]() {
    RolloutOptions opts;
    opts.mode = RolloutMode::kTeacher;
    TrajectoryRecord rec = rollout(w.episode, w.graphs.at("g0"), w.params, opts);
    return rec.total_nll;
  };
  std::vector<Tensor> some_params = {
      w.params.word_embedding, w.params.w_project,      w.params.w_att_visual,
      w.params.w_base,         w.params.w_query_visual, w.params.decoder.w_input,
      w.params.w_action,       w.params.action_embedding};
  CHECK(finite_difference_check(f, some_params, 1e-3) < 1e-4);
}

TEST_CASE("teacher NLL decreases under optimization") {
  SmallWorld w = make_world(37);
  Adam opt(w.params.params(), {1e-2, 0.9, 0.999, 1e-8});
  std::vector<double> nll;
  for (int step = 0; step < 51; ++step) {
    RolloutOptions opts;
    opts.mode = RolloutMode::kTeacher;
    TrajectoryRecord rec = rollout(w.episode, w.graphs.at("g0"), w.params, opts);
    Tensor loss = nll_loss(rec);
    nll.push_back(loss.item());
    opt.zero_grad();
    backward(loss);
    opt.step();
  }
  for (size_t i = 0; i + 10 < nll.size(); ++i) {
    CHECK(nll[i + 10] < nll[i]);  // decrease over every 10-step window
  }
}

TEST_CASE("grounding ablations run and differ") {
  for (Grounding g : {Grounding::kHistorical, Grounding::kMutual}) {
    SmallWorld w = make_world(38, g);
    RolloutOptions opts;
    opts.mode = RolloutMode::kTeacher;
    TrajectoryRecord rec = rollout(w.episode, w.graphs.at("g0"), w.params, opts);
    CHECK(rec.nodes == w.episode.reference_path);
    if (g == Grounding::kHistorical) {
      CHECK(rec.steps[0].alpha_m.empty());
      CHECK(!rec.steps[0].alpha.empty());
    } else {
      CHECK(rec.steps[0].alpha.empty());
      CHECK(!rec.steps[0].alpha_m.empty());
    }
  }
}

TEST_CASE("trajectory dump lines validate against the schema") {
  SmallWorld w = make_world(39);
  RolloutOptions opts;
  TrajectoryRecord rec = rollout(w.episode, w.graphs.at("g0"), w.params, opts);
  const auto lines = trajectory_dump_lines(rec, "g0:ep");
  CHECK(lines.size() == rec.steps.size());
  for (const std::string& line : lines) CHECK_NOTHROW(validate_dump_line(line));
  CHECK_THROWS_AS(validate_dump_line("{\"t\": 0}"), ValidationError);
  CHECK_THROWS_AS(validate_dump_line("not json"), ValidationError);
}

TEST_CASE("next-action accuracy is perfect for an oracle-matching toy") {
  // sanity: accuracy is in [0,1] and deterministic
  SmallWorld w = make_world(40);
  std::vector<const Episode*> eps{&w.episode};
  const double acc1 = next_action_accuracy(eps, w.graphs, w.params);
  const double acc2 = next_action_accuracy(eps, w.graphs, w.params);
  CHECK(acc1 == acc2);
  CHECK(acc1 >= 0.0);
  CHECK(acc1 <= 1.0);
}

TEST_SUITE_END();
