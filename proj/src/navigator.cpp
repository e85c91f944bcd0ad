#include "navlab/navigator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "navlab/util.hpp"

namespace navlab {

Grounding grounding_from_string(const std::string& s) {
  if (s == "cmg") return Grounding::kCmg;
  if (s == "historical") return Grounding::kHistorical;
  if (s == "mutual") return Grounding::kMutual;
  throw ValidationError("unknown grounding: " + s);
}

std::string to_string(Grounding g) {
  switch (g) {
    case Grounding::kCmg: return "cmg";
    case Grounding::kHistorical: return "historical";
    case Grounding::kMutual: return "mutual";
  }
  return "?";
}

RolloutMode rollout_mode_from_string(const std::string& s) {
  if (s == "teacher") return RolloutMode::kTeacher;
  if (s == "student") return RolloutMode::kStudent;
  if (s == "greedy") return RolloutMode::kGreedy;
  throw ValidationError("unknown rollout mode: " + s);
}

std::string to_string(RolloutMode m) {
  switch (m) {
    case RolloutMode::kTeacher: return "teacher";
    case RolloutMode::kStudent: return "student";
    case RolloutMode::kGreedy: return "greedy";
  }
  return "?";
}

int NavigatorConfig::decoder_input() const {
  // previous-action input = projected feature of the taken direction
  // followed by the slot embedding
  const int action_input = proj_dim + action_dim;
  switch (grounding) {
    case Grounding::kCmg: return 2 * encoder_out() + 2 * proj_dim + action_input;
    case Grounding::kHistorical:
    case Grounding::kMutual: return encoder_out() + proj_dim + action_input;
  }
  return 0;
}

void NavigatorConfig::validate() const {
  if (vocab_size < 5) throw ValidationError("navigator: vocab_size too small");
  if (proj_dim != encoder_out()) {
    throw ValidationError(
        "navigator: proj_dim must equal the encoder output width (the mutual-grounding "
        "base vector is an elementwise product of the two modality means)");
  }
  if (max_directions < 2) throw ValidationError("navigator: max_directions must be >= 2");
  if (feature_dim < 1 || word_dim < 1 || enc_hidden < 1 || dec_hidden < 1 || action_dim < 1) {
    throw ValidationError("navigator: widths must be positive");
  }
}

NavigatorParams NavigatorParams::init(const NavigatorConfig& cfg, Rng& rng) {
  cfg.validate();
  NavigatorParams p;
  p.config = cfg;
  const int E = cfg.encoder_out();
  p.word_embedding = init_uniform({cfg.vocab_size, cfg.word_dim}, cfg.word_dim, rng);
  for (int j = 0; j < cfg.word_dim; ++j) {
    p.word_embedding.values()[static_cast<size_t>(Vocabulary::kPad * cfg.word_dim + j)] = 0.0;
  }
  p.encoder = BiLstmParams::init(cfg.word_dim, cfg.enc_hidden, rng);
  p.w_project = init_uniform({cfg.proj_dim, cfg.feature_dim}, cfg.feature_dim, rng);
  p.w_att_visual = init_uniform({cfg.proj_dim, cfg.dec_hidden}, cfg.dec_hidden, rng);
  p.w_att_text = init_uniform({E, cfg.dec_hidden}, cfg.dec_hidden, rng);
  p.w_mut_text = init_uniform({E, E}, E, rng);
  p.w_mut_visual = init_uniform({E, E}, E, rng);
  p.w_base = init_uniform({E, E}, E, rng);
  p.w_query_text = init_uniform({E, E}, E, rng);
  p.w_query_visual = init_uniform({cfg.proj_dim, E}, E, rng);
  p.decoder = LstmParams::init(cfg.decoder_input(), cfg.dec_hidden, rng);
  p.w_action = init_uniform({cfg.proj_dim, cfg.dec_hidden + E}, cfg.dec_hidden + E, rng);
  p.action_embedding =
      init_uniform({cfg.max_directions + 1, cfg.action_dim}, cfg.action_dim, rng);
  return p;
}

ParamSet NavigatorParams::params() const {
  ParamSet set;
  set.add("word_embedding", word_embedding);
  const_cast<BiLstmParams&>(encoder).register_into(set, "encoder");
  set.add("w_project", w_project);
  set.add("w_att_visual", w_att_visual);
  set.add("w_att_text", w_att_text);
  set.add("w_mut_text", w_mut_text);
  set.add("w_mut_visual", w_mut_visual);
  set.add("w_base", w_base);
  set.add("w_query_text", w_query_text);
  set.add("w_query_visual", w_query_visual);
  const_cast<LstmParams&>(decoder).register_into(set, "decoder");
  set.add("w_action", w_action);
  set.add("action_embedding", action_embedding);
  return set;
}

EncodedInstruction encode_instruction(const std::vector<int>& tokens,
                                      const NavigatorParams& params) {
  if (tokens.empty()) throw ValidationError("encode_instruction: empty token sequence");
  const NavigatorConfig& cfg = params.config;
  size_t true_len = tokens.size();
  for (size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= cfg.vocab_size) {
      throw ValidationError("encode_instruction: token id out of vocabulary range");
    }
    if (t == Vocabulary::kPad) {
      true_len = i;
      for (size_t j = i; j < tokens.size(); ++j) {
        if (tokens[j] != Vocabulary::kPad) {
          throw ValidationError("encode_instruction: interior PAD token");
        }
      }
      break;
    }
  }
  if (true_len == 0) throw ValidationError("encode_instruction: all-PAD sequence");

  std::vector<Tensor> embeds;
  embeds.reserve(true_len);
  for (size_t i = 0; i < true_len; ++i) embeds.push_back(row(params.word_embedding, tokens[i]));
  std::vector<Tensor> encoded = bidirectional_encode(embeds, params.encoder);

  EncodedInstruction out;
  out.mask.assign(tokens.size(), false);
  for (size_t i = 0; i < true_len; ++i) out.mask[i] = true;
  for (size_t i = true_len; i < tokens.size(); ++i) {
    encoded.push_back(Tensor::zeros({cfg.encoder_out()}));
  }
  out.matrix = stack_rows(encoded);
  return out;
}

namespace {

std::vector<bool> all_true(int n) { return std::vector<bool>(static_cast<size_t>(n), true); }

// Constant row-averaging weights: 1/count at selected rows.
Tensor mean_weights(int n, const std::vector<bool>* mask) {
  std::vector<double> w(static_cast<size_t>(n), 0.0);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (!mask || (*mask)[static_cast<size_t>(i)]) ++count;
  }
  if (count == 0) throw ValidationError("grounding: empty support for mean");
  for (int i = 0; i < n; ++i) {
    if (!mask || (*mask)[static_cast<size_t>(i)]) {
      w[static_cast<size_t>(i)] = 1.0 / static_cast<double>(count);
    }
  }
  return Tensor::from({n}, std::move(w));
}

}  // namespace

GroundedFeatures historical_ground(const Tensor& instruction, const std::vector<bool>& mask,
                                   const Tensor& directions, const Tensor& h_prev,
                                   const NavigatorParams& params) {
  if (directions.rank() != 2 || directions.dim(0) < 1) {
    throw ValidationError("historical_ground: empty navigable set");
  }
  const Tensor query_v = matvec(params.w_att_visual, h_prev);
  const Tensor alpha = masked_softmax(matvec(directions, query_v), all_true(directions.dim(0)));
  const Tensor query_x = matvec(params.w_att_text, h_prev);
  const Tensor beta = masked_softmax(matvec(instruction, query_x), mask);
  GroundedFeatures out;
  out.visual = matvec_transposed(directions, alpha);
  out.text = matvec_transposed(instruction, beta);
  out.visual_weights = alpha;
  out.text_weights = beta;
  return out;
}

GroundedFeatures mutual_ground(const Tensor& instruction, const std::vector<bool>& mask,
                               const Tensor& directions, const NavigatorParams& params) {
  if (directions.rank() != 2 || directions.dim(0) < 1) {
    throw ValidationError("mutual_ground: empty navigable set");
  }
  const Tensor v_hat = tanh(matvec_transposed(directions, mean_weights(directions.dim(0), nullptr)));
  const Tensor x_hat = tanh(matvec_transposed(instruction, mean_weights(instruction.dim(0), &mask)));
  const Tensor base = v_hat * x_hat;
  const Tensor base_proj = tanh(matvec(params.w_base, base));
  const Tensor query_x = tanh(matvec(params.w_mut_text, x_hat)) * base_proj;
  const Tensor query_v = tanh(matvec(params.w_mut_visual, v_hat)) * base_proj;
  const Tensor alpha =
      masked_softmax(matvec(directions, matvec(params.w_query_visual, query_v)),
                     all_true(directions.dim(0)));
  const Tensor beta = masked_softmax(matvec(instruction, matvec(params.w_query_text, query_x)), mask);
  GroundedFeatures out;
  out.visual = matvec_transposed(directions, alpha);
  out.text = matvec_transposed(instruction, beta);
  out.visual_weights = alpha;
  out.text_weights = beta;
  return out;
}

std::pair<Tensor, Tensor> decode_step(const Tensor& text_hist, const Tensor& vis_hist,
                                      const Tensor& text_mut, const Tensor& vis_mut,
                                      const Tensor& action_prev, const Tensor& h_prev,
                                      const Tensor& c_prev, const NavigatorParams& params) {
  std::vector<Tensor> parts;
  switch (params.config.grounding) {
    case Grounding::kCmg:
      parts = {text_hist, vis_hist, text_mut, vis_mut, action_prev};
      break;
    case Grounding::kHistorical:
      parts = {text_hist, vis_hist, action_prev};
      break;
    case Grounding::kMutual:
      parts = {text_mut, vis_mut, action_prev};
      break;
  }
  return lstm_step(concat(parts), h_prev, c_prev, params.decoder);
}

std::pair<Tensor, Tensor> action_distribution(const Tensor& h, const Tensor& grounded_text,
                                              const Tensor& directions,
                                              const NavigatorParams& params) {
  if (directions.dim(0) < 1) throw ValidationError("action_distribution: no directions");
  const Tensor context = matvec(params.w_action, concat({h, grounded_text}));
  const Tensor logits = matvec(directions, context);
  const Tensor probs = masked_softmax(logits, all_true(directions.dim(0)));
  return {probs, logits};
}

int default_t_max(const Episode& ep) { return std::max(10, 2 * ep.hops()); }

namespace {

int sample_index(const std::vector<double>& probs, double temperature, Rng& rng) {
  if (temperature <= 1e-12) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
  std::vector<double> w(probs.size(), 0.0);
  if (temperature == 1.0) {
    w = probs;
  } else {
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) mx = std::max(mx, std::log(probs[i]) / temperature);
    }
    for (size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) w[i] = std::exp(std::log(probs[i]) / temperature - mx);
    }
  }
  double z = 0.0;
  for (double v : w) z += v;
  double u = rng.uniform() * z;
  for (size_t i = 0; i < w.size(); ++i) {
    u -= w[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

TrajectoryRecord rollout(const Episode& ep, const NavGraph& g, const NavigatorParams& params,
                         const RolloutOptions& opts) {
  const NavigatorConfig& cfg = params.config;
  const bool train_dropout = opts.mode != RolloutMode::kGreedy && opts.dropout > 0.0;
  if ((opts.mode == RolloutMode::kStudent || train_dropout) && opts.rng == nullptr) {
    throw ValidationError("rollout: rng required for student sampling and dropout");
  }

  EncodedInstruction local_encoding;
  const EncodedInstruction* enc = opts.encoded;
  if (enc == nullptr) {
    local_encoding = encode_instruction(ep.instruction, params);
    enc = &local_encoding;
  }

  // Environmental dropout: one feature-level mask and one views-level mask per
  // rollout. The views mask keys on the direction slot; STOP is never dropped
  // (its feature is zero anyway).
  Tensor feature_mask;
  std::vector<double> views_mask(static_cast<size_t>(cfg.max_directions), 1.0);
  if (train_dropout) {
    feature_mask = dropout_mask({cfg.proj_dim}, opts.dropout, *opts.rng, true);
    const double keep = 1.0 / (1.0 - opts.dropout);
    for (size_t k = 1; k < views_mask.size(); ++k) {
      views_mask[k] = opts.rng->uniform() < opts.dropout ? 0.0 : keep;
    }
  }

  // Projected direction features per node, built once per rollout.
  std::unordered_map<int, Tensor> projected;
  auto project_node = [&](int node) -> const Tensor& {
    auto it = projected.find(node);
    if (it != projected.end()) return it->second;
    const int count = g.direction_count(node);
    std::vector<Tensor> rows;
    rows.reserve(static_cast<size_t>(count));
    rows.push_back(Tensor::zeros({cfg.proj_dim}));  // STOP
    for (int k = 1; k < count; ++k) {
      const Direction& dir = g.direction(node, k);
      Tensor f = Tensor::from({cfg.feature_dim}, dir.feature);
      Tensor proj = relu(matvec(params.w_project, f));
      if (train_dropout) {
        proj = proj * feature_mask;
        const double vk = views_mask[static_cast<size_t>(k)];
        if (vk != 1.0) proj = scale(proj, vk);
      }
      rows.push_back(proj);
    }
    return projected.emplace(node, stack_rows(rows)).first->second;
  };

  TrajectoryRecord rec;
  rec.episode = &ep;
  rec.mode = opts.mode;

  EpisodeState state(g, ep.start, default_t_max(ep));
  rec.nodes.push_back(state.node);

  Tensor h = Tensor::zeros({cfg.dec_hidden});
  Tensor c = Tensor::zeros({cfg.dec_hidden});
  Tensor action_embed = concat({Tensor::zeros({cfg.proj_dim}),
                                row(params.action_embedding, params.start_action_row())});
  Tensor total;

  int t = 0;
  while (!state.done) {
    const int node = state.node;
    const Tensor& directions = project_node(node);

    const bool use_hist = cfg.grounding != Grounding::kMutual;
    const bool use_mut = cfg.grounding != Grounding::kHistorical;
    GroundedFeatures hist, mut;
    if (use_hist) hist = historical_ground(enc->matrix, enc->mask, directions, h, params);
    if (use_mut) mut = mutual_ground(enc->matrix, enc->mask, directions, params);

    auto [nh, nc] = decode_step(hist.text, hist.visual, mut.text, mut.visual, action_embed, h,
                                c, params);
    h = nh;
    c = nc;

    const Tensor& text_for_action = use_hist ? hist.text : mut.text;
    auto [probs, logits] = action_distribution(h, text_for_action, directions, params);

    const int supervision = g.oracle_action(node, ep.goal);
    int action = supervision;
    if (opts.mode == RolloutMode::kGreedy) {
      action = argmax_lowest(probs.values());
    } else if (opts.mode == RolloutMode::kStudent) {
      action = sample_index(probs.values(), opts.temperature, *opts.rng);
    }

    Tensor step_nll = neg(log(element(probs, supervision)));
    total = total.defined() ? total + step_nll : step_nll;

    StepTrace trace;
    trace.t = t;
    trace.node = node;
    if (use_hist) {
      trace.alpha = hist.visual_weights.values();
      trace.beta = hist.text_weights.values();
    }
    if (use_mut) {
      trace.alpha_m = mut.visual_weights.values();
      trace.beta_m = mut.text_weights.values();
    }
    trace.hidden = h;
    trace.probs = probs;
    trace.step_nll = step_nll;
    trace.action = action;
    trace.supervision = supervision;
    rec.steps.push_back(std::move(trace));
    rec.hidden_states.push_back(h);

    const int prev = state.node;
    state.step(action);
    if (action != 0) {
      rec.path_length += g.edge_weight(prev, state.node);
      rec.nodes.push_back(state.node);
    }
    ++t;

    action_embed = concat({row(directions, action), row(params.action_embedding, action)});
  }
  rec.total_nll = total;
  return rec;
}

double next_action_accuracy(const std::vector<const Episode*>& episodes,
                            const GraphStore& graphs, const NavigatorParams& params) {
  long correct = 0;
  long total = 0;
  for (const Episode* ep : episodes) {
    const NavGraph& g = graphs.at(ep->graph_id);
    EncodedInstruction enc = encode_instruction(ep->instruction, params);
    Tensor h = Tensor::zeros({params.config.dec_hidden});
    Tensor c = Tensor::zeros({params.config.dec_hidden});
    Tensor action_embed = concat({Tensor::zeros({params.config.proj_dim}),
                                  row(params.action_embedding, params.start_action_row())});
    // Walk the reference path (teacher positioning), including the STOP step.
    for (size_t i = 0; i < ep->reference_path.size(); ++i) {
      const int node = ep->reference_path[i];
      std::vector<Tensor> rows{Tensor::zeros({params.config.proj_dim})};
      for (int k = 1; k < g.direction_count(node); ++k) {
        rows.push_back(relu(matvec(params.w_project,
                                   Tensor::from({params.config.feature_dim},
                                                g.direction(node, k).feature))));
      }
      const Tensor directions = stack_rows(rows);
      const bool use_hist = params.config.grounding != Grounding::kMutual;
      const bool use_mut = params.config.grounding != Grounding::kHistorical;
      GroundedFeatures hist, mut;
      if (use_hist) hist = historical_ground(enc.matrix, enc.mask, directions, h, params);
      if (use_mut) mut = mutual_ground(enc.matrix, enc.mask, directions, params);
      auto [nh, nc] = decode_step(hist.text, hist.visual, mut.text, mut.visual, action_embed,
                                  h, c, params);
      h = nh;
      c = nc;
      auto [probs, logits] =
          action_distribution(h, use_hist ? hist.text : mut.text, directions, params);
      const int oracle = g.oracle_action(node, ep->goal);
      if (argmax_lowest(probs.values()) == oracle) ++correct;
      ++total;
      action_embed = concat({row(directions, oracle), row(params.action_embedding, oracle)});
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<std::string> trajectory_dump_lines(const TrajectoryRecord& rec,
                                               const std::string& episode_key) {
  std::vector<std::string> lines;
  lines.reserve(rec.steps.size());
  for (const StepTrace& s : rec.steps) {
    nlohmann::json j{{"episode", episode_key},
                     {"t", s.t},
                     {"node", s.node},
                     {"action", s.action},
                     {"supervision", s.supervision},
                     {"alpha", s.alpha},
                     {"beta", s.beta},
                     {"alpha_m", s.alpha_m},
                     {"beta_m", s.beta_m},
                     {"p", s.probs.values()}};
    lines.push_back(j.dump());
  }
  return lines;
}

void validate_dump_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("trajectory dump: invalid JSON: ") + e.what());
  }
  const char* int_keys[] = {"t", "node", "action", "supervision"};
  for (const char* k : int_keys) {
    if (!j.contains(k) || !j[k].is_number_integer()) {
      throw ValidationError(std::string("trajectory dump: missing integer field ") + k);
    }
  }
  if (!j.contains("episode") || !j["episode"].is_string()) {
    throw ValidationError("trajectory dump: missing episode key");
  }
  const char* array_keys[] = {"alpha", "beta", "alpha_m", "beta_m", "p"};
  for (const char* k : array_keys) {
    if (!j.contains(k) || !j[k].is_array()) {
      throw ValidationError(std::string("trajectory dump: missing array field ") + k);
    }
  }
  if (j["p"].empty()) throw ValidationError("trajectory dump: empty action distribution");
}

}  // namespace navlab
