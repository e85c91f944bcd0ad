#pragma once

#include <string>
#include <utility>
#include <vector>

#include "navlab/rng.hpp"
#include "navlab/tensor.hpp"

namespace navlab {

// Ordered, named collection of learnable tensors. Names are the checkpoint
// keys; order fixes gradient-accumulation and update order for determinism.
class ParamSet {
 public:
  Tensor add(const std::string& name, Tensor t);
  const Tensor& find(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<Tensor> tensors() const;
  size_t total_size() const;
  void zero_grad();

  // Value-level helpers for freeze checks and tests.
  std::vector<double> snapshot_values() const;
  bool values_equal(const std::vector<double>& snapshot) const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng);

struct LstmParams {
  Tensor w_input;   // {4H, Din}
  Tensor w_hidden;  // {4H, H}
  Tensor bias;      // {4H}, zero-initialized
  int input_dim = 0;
  int hidden_dim = 0;

  static LstmParams init(int input_dim, int hidden_dim, Rng& rng);
  void register_into(ParamSet& set, const std::string& prefix);
};

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmParams& p);

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  static BiLstmParams init(int input_dim, int hidden_dim, Rng& rng);
  void register_into(ParamSet& set, const std::string& prefix);
  int output_dim() const { return 2 * forward.hidden_dim; }
};

// Per-position outputs: element l is forward state at l concatenated with
// backward state at l. Throws on an empty sequence.
std::vector<Tensor> bidirectional_encode(const std::vector<Tensor>& xs, const BiLstmParams& p);

// Final forward state concatenated with final backward state (the summary
// vector used by the sequence classifier).
Tensor bidirectional_summary(const std::vector<Tensor>& xs, const BiLstmParams& p);

// Inverted-scaling dropout mask: entries are 0 with probability `ratio`, else
// 1/(1-ratio). With train=false the mask is all ones. Plain data tensor (no
// gradient participation).
Tensor dropout_mask(const std::vector<int>& shape, double ratio, Rng& rng, bool train = true);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Moments live here, keyed
// by position, and serialize into checkpoints by parameter name.
class Adam {
 public:
  Adam(ParamSet params, AdamConfig cfg);

  // Applies one update from the currently accumulated gradients. Parameters
  // without a populated gradient buffer are treated as zero-gradient.
  // Throws on non-finite gradients. max_norm > 0 rescales the global
  // gradient norm to at most max_norm first.
  void step(double max_norm = 0.0);

  void zero_grad();
  long step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }
  const ParamSet& params() const { return params_; }

  const std::vector<double>& first_moment(size_t idx) const { return m_[idx]; }
  const std::vector<double>& second_moment(size_t idx) const { return v_[idx]; }
  std::vector<double>& first_moment(size_t idx) { return m_[idx]; }
  std::vector<double>& second_moment(size_t idx) { return v_[idx]; }
  void set_step_count(long n) { step_count_ = n; }

 private:
  ParamSet params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long step_count_ = 0;
};

}  // namespace navlab
