#include "navlab/discriminator.hpp"

#include "navlab/util.hpp"

namespace navlab {

namespace {
constexpr double kProbFloor = 1e-7;
}

BehaviorKind behavior_kind_from_string(const std::string& s) {
  if (s == "hidden") return BehaviorKind::kHidden;
  if (s == "hidden+logits") return BehaviorKind::kHiddenLogits;
  throw ValidationError("unknown behavior kind: " + s);
}

std::string to_string(BehaviorKind k) {
  return k == BehaviorKind::kHidden ? "hidden" : "hidden+logits";
}

int behavior_dim(BehaviorKind kind, int dec_hidden, int max_directions) {
  return kind == BehaviorKind::kHidden ? dec_hidden : dec_hidden + max_directions;
}

std::vector<Tensor> behavior_sequence(const TrajectoryRecord& rec, BehaviorKind kind,
                                      int max_directions) {
  if (kind == BehaviorKind::kHidden) return rec.hidden_states;
  std::vector<Tensor> out;
  out.reserve(rec.steps.size());
  for (const StepTrace& s : rec.steps) {
    Tensor p = s.probs;
    const int pad = max_directions - p.dim(0);
    if (pad < 0) throw ValidationError("behavior_sequence: distribution wider than cap");
    if (pad > 0) p = concat({p, Tensor::zeros({pad})});
    out.push_back(concat({s.hidden, p}));
  }
  return out;
}

std::vector<Tensor> detach_sequence(const std::vector<Tensor>& seq) {
  std::vector<Tensor> out;
  out.reserve(seq.size());
  for (const Tensor& t : seq) out.push_back(t.detached());
  return out;
}

DiscriminatorParams DiscriminatorParams::init(const DiscriminatorConfig& cfg, Rng& rng) {
  if (cfg.input_dim < 1) throw ValidationError("discriminator: input_dim must be positive");
  DiscriminatorParams p;
  p.config = cfg;
  p.summarizer = BiLstmParams::init(cfg.input_dim, cfg.summary_hidden, rng);
  const int summary = 2 * cfg.summary_hidden;
  p.w1 = init_uniform({cfg.mlp_hidden, summary}, summary, rng);
  p.b1 = Tensor::zeros({cfg.mlp_hidden}, true);
  p.w2 = init_uniform({cfg.mlp_hidden, cfg.mlp_hidden}, cfg.mlp_hidden, rng);
  p.b2 = Tensor::zeros({cfg.mlp_hidden}, true);
  p.w3 = init_uniform({1, cfg.mlp_hidden}, cfg.mlp_hidden, rng);
  p.b3 = Tensor::zeros({1}, true);
  return p;
}

ParamSet DiscriminatorParams::params() const {
  ParamSet set;
  const_cast<BiLstmParams&>(summarizer).register_into(set, "summarizer");
  set.add("w1", w1);
  set.add("b1", b1);
  set.add("w2", w2);
  set.add("b2", b2);
  set.add("w3", w3);
  set.add("b3", b3);
  return set;
}

Tensor discriminate(const std::vector<Tensor>& behavior, const DiscriminatorParams& params,
                    bool train_mode, Rng* rng) {
  if (behavior.empty()) throw ValidationError("discriminate: empty behavioral sequence");
  for (const Tensor& t : behavior) {
    if (t.rank() != 1 || t.dim(0) != params.config.input_dim) {
      throw ValidationError("discriminate: behavior width mismatch");
    }
  }
  if (train_mode && params.config.dropout > 0.0 && rng == nullptr) {
    throw ValidationError("discriminate: rng required in train mode");
  }
  const Tensor summary = bidirectional_summary(behavior, params.summarizer);
  Tensor z = leaky_relu(matvec(params.w1, summary) + params.b1, params.config.leaky_slope);
  if (train_mode && params.config.dropout > 0.0) {
    z = z * dropout_mask(z.shape(), params.config.dropout, *rng, true);
  }
  z = leaky_relu(matvec(params.w2, z) + params.b2, params.config.leaky_slope);
  if (train_mode && params.config.dropout > 0.0) {
    z = z * dropout_mask(z.shape(), params.config.dropout, *rng, true);
  }
  const Tensor out = sigmoid(matvec(params.w3, z) + params.b3);
  return clamp(out, kProbFloor, 1.0 - kProbFloor);
}

namespace {

void check_stage(int stage) {
  if (stage != 1 && stage != 2) throw ValidationError("adversarial stage must be 1 or 2");
}

}  // namespace

Tensor binary_cross_entropy(const std::vector<Tensor>& positive_probs,
                            const std::vector<Tensor>& negative_probs) {
  if (positive_probs.empty() || negative_probs.empty()) {
    throw ValidationError("binary_cross_entropy: both batches must be nonempty");
  }
  const Tensor one = Tensor::scalar(1.0);
  Tensor total;
  auto accumulate = [&](const Tensor& term) {
    total = total.defined() ? total + term : term;
  };
  for (const Tensor& p : positive_probs) accumulate(neg(log(p)));
  for (const Tensor& p : negative_probs) accumulate(neg(log(one - p)));
  return scale(total, 1.0 / static_cast<double>(positive_probs.size() + negative_probs.size()));
}

Tensor fooling_term_mean(const std::vector<Tensor>& probs, int stage) {
  check_stage(stage);
  if (probs.empty()) throw ValidationError("fooling_term_mean: empty batch");
  const Tensor one = Tensor::scalar(1.0);
  Tensor total;
  for (const Tensor& p : probs) {
    const Tensor term = stage == 1 ? neg(log(p)) : neg(log(one - p));
    total = total.defined() ? total + term : term;
  }
  return scale(total, 1.0 / static_cast<double>(probs.size()));
}

Tensor discriminator_loss(const std::vector<std::vector<Tensor>>& tf_batch,
                          const std::vector<std::vector<Tensor>>& sf_batch,
                          const DiscriminatorParams& params, int stage, bool train_mode,
                          Rng* rng) {
  check_stage(stage);
  if (tf_batch.empty() || sf_batch.empty()) {
    throw ValidationError("discriminator_loss: both batches must be nonempty");
  }
  const auto& positives = stage == 1 ? tf_batch : sf_batch;
  const auto& negatives = stage == 1 ? sf_batch : tf_batch;
  std::vector<Tensor> pos_probs, neg_probs;
  for (const auto& seq : positives) pos_probs.push_back(discriminate(seq, params, train_mode, rng));
  for (const auto& seq : negatives) neg_probs.push_back(discriminate(seq, params, train_mode, rng));
  return binary_cross_entropy(pos_probs, neg_probs);
}

Tensor generator_fooling_loss(const std::vector<std::vector<Tensor>>& batch,
                              const DiscriminatorParams& params, int stage, bool train_mode,
                              Rng* rng) {
  check_stage(stage);
  if (batch.empty()) throw ValidationError("generator_fooling_loss: empty batch");
  std::vector<Tensor> probs;
  for (const auto& seq : batch) probs.push_back(discriminate(seq, params, train_mode, rng));
  return fooling_term_mean(probs, stage);
}

}  // namespace navlab
