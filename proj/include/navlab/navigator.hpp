#pragma once

#include <map>
#include <string>
#include <vector>

#include "navlab/episode.hpp"
#include "navlab/graph.hpp"
#include "navlab/nn.hpp"

namespace navlab {

using GraphStore = std::map<std::string, NavGraph>;

// Which grounding branches feed the decoder. The full agent runs both; the
// single-branch variants exist for ablations.
enum class Grounding { kCmg, kHistorical, kMutual };

Grounding grounding_from_string(const std::string& s);
std::string to_string(Grounding g);

struct NavigatorConfig {
  int vocab_size = 0;
  int feature_dim = 32;  // raw per-direction feature width from the environment
  int word_dim = 32;
  int enc_hidden = 32;  // per direction; encoder output width is twice this
  int dec_hidden = 64;
  // Projected feature width. Must equal the encoder output width: the mutual
  // grounding base vector is an elementwise product of the two modality
  // means.
  int proj_dim = 64;
  int action_dim = 16;
  int max_directions = 0;  // k_max + 1 including STOP
  Grounding grounding = Grounding::kCmg;

  int encoder_out() const { return 2 * enc_hidden; }
  int decoder_input() const;
  void validate() const;
};

struct NavigatorParams {
  NavigatorConfig config;

  Tensor word_embedding;  // {V, word_dim}; PAD row fixed at zero
  BiLstmParams encoder;
  Tensor w_project;      // {proj_dim, feature_dim}; no bias so STOP stays zero
  Tensor w_att_visual;   // {proj_dim, dec_hidden}
  Tensor w_att_text;     // {enc_out, dec_hidden}
  Tensor w_mut_text;     // {enc_out, enc_out}
  Tensor w_mut_visual;   // {enc_out, enc_out}
  Tensor w_base;         // {enc_out, enc_out}; shared by both query projections
  Tensor w_query_text;   // {enc_out, enc_out}
  Tensor w_query_visual; // {proj_dim, enc_out}
  LstmParams decoder;
  Tensor w_action;       // {proj_dim, dec_hidden + enc_out}
  // {max_directions + 1, action_dim}; the extra last row is the
  // start-of-episode embedding. The decoder's previous-action input is this
  // slot embedding with the projected feature of the taken direction in
  // front (follower-style), so arrival at a named landmark is visible.
  Tensor action_embedding;

  static NavigatorParams init(const NavigatorConfig& cfg, Rng& rng);
  ParamSet params() const;
  int start_action_row() const { return config.max_directions; }
};

struct EncodedInstruction {
  Tensor matrix;           // {L, enc_out}; zero rows at PAD positions
  std::vector<bool> mask;  // true at non-PAD positions
};

// Bidirectional encoding over the non-PAD prefix. Trailing PADs produce zero
// rows with a false mask; interior PADs and out-of-range ids throw.
EncodedInstruction encode_instruction(const std::vector<int>& tokens,
                                      const NavigatorParams& params);

struct GroundedFeatures {
  Tensor text;    // weighted sum over instruction encodings
  Tensor visual;  // weighted sum over direction features
  Tensor text_weights;
  Tensor visual_weights;
};

// Historical co-grounding: soft attention over both modalities queried by the
// previous decoder state.
GroundedFeatures historical_ground(const Tensor& instruction, const std::vector<bool>& mask,
                                   const Tensor& directions, const Tensor& h_prev,
                                   const NavigatorParams& params);

// Mutual co-grounding: each modality queried by a base vector built from both
// modality means (Hadamard product), no decoder state involved.
GroundedFeatures mutual_ground(const Tensor& instruction, const std::vector<bool>& mask,
                               const Tensor& directions, const NavigatorParams& params);

// One decoder step; input is the concatenation
// text_hist (+) vis_hist (+) text_mut (+) vis_mut (+) prev-action embedding,
// trimmed to the configured grounding branches.
std::pair<Tensor, Tensor> decode_step(const Tensor& text_hist, const Tensor& vis_hist,
                                      const Tensor& text_mut, const Tensor& vis_mut,
                                      const Tensor& action_prev, const Tensor& h_prev,
                                      const Tensor& c_prev, const NavigatorParams& params);

// Logits are inner products of each direction feature with a projection of
// (h (+) grounded text); the STOP row has a zero feature, so its logit is
// exactly zero. Returns (probabilities, logits).
std::pair<Tensor, Tensor> action_distribution(const Tensor& h, const Tensor& grounded_text,
                                              const Tensor& directions,
                                              const NavigatorParams& params);

enum class RolloutMode { kTeacher, kStudent, kGreedy };

RolloutMode rollout_mode_from_string(const std::string& s);
std::string to_string(RolloutMode m);

struct StepTrace {
  int t = 0;
  int node = 0;
  std::vector<double> alpha, beta;      // historical attention (visual, textual)
  std::vector<double> alpha_m, beta_m;  // mutual attention
  Tensor hidden;
  Tensor probs;
  Tensor step_nll;
  int action = 0;
  int supervision = -1;  // -1 means absent
};

struct TrajectoryRecord {
  const Episode* episode = nullptr;
  RolloutMode mode = RolloutMode::kGreedy;
  std::vector<int> nodes;
  std::vector<StepTrace> steps;
  std::vector<Tensor> hidden_states;  // the behavioral sequence
  Tensor total_nll;                   // sum over steps of -log p[y]
  double path_length = 0.0;           // meters traversed; STOP adds nothing
};

struct RolloutOptions {
  RolloutMode mode = RolloutMode::kGreedy;
  // Feature/views dropout ratio; ignored in greedy mode. Masks are drawn once
  // per rollout (environmental variant).
  double dropout = 0.0;
  Rng* rng = nullptr;        // required for student sampling and for dropout
  double temperature = 1.0;  // student sampling; 0 selects the argmax
  // Optional shared encoding (teacher and student rollouts of one episode may
  // reuse it; the instruction path carries no dropout).
  const EncodedInstruction* encoded = nullptr;
};

int default_t_max(const Episode& ep);

TrajectoryRecord rollout(const Episode& ep, const NavGraph& g, const NavigatorParams& params,
                         const RolloutOptions& opts);

// Fraction of reference-path states where the greedy action matches the
// oracle action (dropout off).
double next_action_accuracy(const std::vector<const Episode*>& episodes,
                            const GraphStore& graphs, const NavigatorParams& params);

// Attention/trajectory dump rows (JSONL), one line per step.
std::vector<std::string> trajectory_dump_lines(const TrajectoryRecord& rec,
                                               const std::string& episode_key);
// Throws ValidationError if a dump line does not match the schema.
void validate_dump_line(const std::string& line);

}  // namespace navlab
