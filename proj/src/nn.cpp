#include "navlab/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace navlab {

Tensor ParamSet::add(const std::string& name, Tensor t) {
  for (const auto& [n, _] : items_) {
    if (n == name) throw std::invalid_argument("ParamSet: duplicate name " + name);
  }
  items_.emplace_back(name, t);
  return t;
}

const Tensor& ParamSet::find(const std::string& name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return t;
  }
  throw std::invalid_argument("ParamSet: unknown name " + name);
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& [n, _] : items_) {
    if (n == name) return true;
  }
  return false;
}

std::vector<Tensor> ParamSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(items_.size());
  for (const auto& [_, t] : items_) out.push_back(t);
  return out;
}

size_t ParamSet::total_size() const {
  size_t n = 0;
  for (const auto& [_, t] : items_) n += static_cast<size_t>(t.size());
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : items_) t.zero_grad();
}

std::vector<double> ParamSet::snapshot_values() const {
  std::vector<double> out;
  out.reserve(total_size());
  for (const auto& [_, t] : items_) {
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return out;
}

bool ParamSet::values_equal(const std::vector<double>& snapshot) const {
  size_t i = 0;
  for (const auto& [_, t] : items_) {
    for (double v : t.values()) {
      if (i >= snapshot.size() || snapshot[i] != v) return false;
      ++i;
    }
  }
  return i == snapshot.size();
}

Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw std::invalid_argument("init_uniform: fan_in must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

LstmParams LstmParams::init(int input_dim, int hidden_dim, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w_input = init_uniform({4 * hidden_dim, input_dim}, input_dim, rng);
  p.w_hidden = init_uniform({4 * hidden_dim, hidden_dim}, hidden_dim, rng);
  p.bias = Tensor::zeros({4 * hidden_dim}, /*requires_grad=*/true);
  return p;
}

void LstmParams::register_into(ParamSet& set, const std::string& prefix) {
  set.add(prefix + ".w_input", w_input);
  set.add(prefix + ".w_hidden", w_hidden);
  set.add(prefix + ".bias", bias);
}

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmParams& p) {
  return lstm_cell(x, h_prev, c_prev, p.w_input, p.w_hidden, p.bias);
}

BiLstmParams BiLstmParams::init(int input_dim, int hidden_dim, Rng& rng) {
  BiLstmParams p;
  p.forward = LstmParams::init(input_dim, hidden_dim, rng);
  p.backward = LstmParams::init(input_dim, hidden_dim, rng);
  return p;
}

void BiLstmParams::register_into(ParamSet& set, const std::string& prefix) {
  forward.register_into(set, prefix + ".fwd");
  backward.register_into(set, prefix + ".bwd");
}

namespace {

// Runs one direction over the sequence, returning per-position hidden states.
std::vector<Tensor> run_direction(const std::vector<Tensor>& xs, const LstmParams& p,
                                  bool reversed) {
  const int n = static_cast<int>(xs.size());
  Tensor h = Tensor::zeros({p.hidden_dim});
  Tensor c = Tensor::zeros({p.hidden_dim});
  std::vector<Tensor> states(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int pos = reversed ? n - 1 - i : i;
    auto [nh, nc] = lstm_step(xs[static_cast<size_t>(pos)], h, c, p);
    h = nh;
    c = nc;
    states[static_cast<size_t>(pos)] = h;
  }
  return states;
}

}  // namespace

std::vector<Tensor> bidirectional_encode(const std::vector<Tensor>& xs, const BiLstmParams& p) {
  if (xs.empty()) throw std::invalid_argument("bidirectional_encode: empty sequence");
  std::vector<Tensor> fwd = run_direction(xs, p.forward, false);
  std::vector<Tensor> bwd = run_direction(xs, p.backward, true);
  std::vector<Tensor> out;
  out.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) out.push_back(concat({fwd[i], bwd[i]}));
  return out;
}

Tensor bidirectional_summary(const std::vector<Tensor>& xs, const BiLstmParams& p) {
  if (xs.empty()) throw std::invalid_argument("bidirectional_summary: empty sequence");
  std::vector<Tensor> fwd = run_direction(xs, p.forward, false);
  std::vector<Tensor> bwd = run_direction(xs, p.backward, true);
  // forward's last step is position n-1, backward's last step is position 0
  return concat({fwd.back(), bwd.front()});
}

Tensor dropout_mask(const std::vector<int>& shape, double ratio, Rng& rng, bool train) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("dropout_mask: ratio out of [0,1)");
  Tensor mask = Tensor::full(shape, 1.0);
  if (!train || ratio == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - ratio);
  for (double& v : mask.values()) v = rng.uniform() < ratio ? 0.0 : keep_scale;
  return mask;
}

Adam::Adam(ParamSet params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.items().size());
  v_.reserve(params_.items().size());
  for (const auto& [_, t] : params_.items()) {
    m_.emplace_back(static_cast<size_t>(t.size()), 0.0);
    v_.emplace_back(static_cast<size_t>(t.size()), 0.0);
  }
}

void Adam::zero_grad() { params_.zero_grad(); }

void Adam::step(double max_norm) {
  double scale = 1.0;
  if (max_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [_, t] : params_.items()) {
      if (!t.has_grad()) continue;
      for (double g : t.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) scale = max_norm / norm;
  }

  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t p = 0; p < params_.items().size(); ++p) {
    Tensor t = params_.items()[p].second;
    std::vector<double>& val = t.values();
    std::vector<double>& m = m_[p];
    std::vector<double>& v = v_[p];
    const bool has_grad = t.has_grad();
    for (size_t i = 0; i < val.size(); ++i) {
      double g = has_grad ? t.impl_->grad[i] : 0.0;
      if (!std::isfinite(g)) {
        throw std::runtime_error("adam: non-finite gradient for " + params_.items()[p].first);
      }
      g *= scale;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace navlab
