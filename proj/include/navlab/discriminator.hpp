#pragma once

#include <string>
#include <vector>

#include "navlab/navigator.hpp"
#include "navlab/nn.hpp"

namespace navlab {

// What the discriminator reads per step: decoder hidden states alone, or
// hidden states with the action distribution appended (zero-padded to the
// direction cap).
enum class BehaviorKind { kHidden, kHiddenLogits };

BehaviorKind behavior_kind_from_string(const std::string& s);
std::string to_string(BehaviorKind k);

struct DiscriminatorConfig {
  int input_dim = 0;        // behavior vector width
  int summary_hidden = 32;  // recurrent summarizer width per direction
  int mlp_hidden = 64;
  double leaky_slope = 0.2;
  double dropout = 0.3;
};

struct DiscriminatorParams {
  DiscriminatorConfig config;
  BiLstmParams summarizer;
  Tensor w1, b1, w2, b2, w3, b3;

  static DiscriminatorParams init(const DiscriminatorConfig& cfg, Rng& rng);
  ParamSet params() const;
};

int behavior_dim(BehaviorKind kind, int dec_hidden, int max_directions);

// Step vectors the discriminator classifies, taken from a finished rollout.
std::vector<Tensor> behavior_sequence(const TrajectoryRecord& rec, BehaviorKind kind,
                                      int max_directions);
// Tape-free copy for losses that must not reach generator parameters.
std::vector<Tensor> detach_sequence(const std::vector<Tensor>& seq);

// Probability that the sequence is a positive sample, strictly inside
// (0, 1): the sigmoid output is clamped to [1e-7, 1 - 1e-7] so the log losses
// stay finite. Dropout applies only with train_mode.
Tensor discriminate(const std::vector<Tensor>& behavior, const DiscriminatorParams& params,
                    bool train_mode, Rng* rng);

// BCE combination over already-computed classifier outputs: mean over all
// positive terms -log p and negative terms -log(1-p).
Tensor binary_cross_entropy(const std::vector<Tensor>& positive_probs,
                            const std::vector<Tensor>& negative_probs);
// Mean fooling term: stage 1 is -log p, stage 2 is -log(1-p).
Tensor fooling_term_mean(const std::vector<Tensor>& probs, int stage);

// Binary cross entropy over both batches, mean over all 2N classified
// sequences. Stage 1 labels teacher-forced sequences positive; stage 2
// exchanges the roles.
Tensor discriminator_loss(const std::vector<std::vector<Tensor>>& tf_batch,
                          const std::vector<std::vector<Tensor>>& sf_batch,
                          const DiscriminatorParams& params, int stage, bool train_mode,
                          Rng* rng);

// Generator-side loss (mean over the batch): stage 1 is -log D over
// student-forced behaviors; stage 2 is -log(1 - D) over teacher-forced
// behaviors. Callers apply the resulting gradients to generator parameters
// only; discriminator values are never touched by it.
Tensor generator_fooling_loss(const std::vector<std::vector<Tensor>>& batch,
                              const DiscriminatorParams& params, int stage, bool train_mode,
                              Rng* rng);

}  // namespace navlab
