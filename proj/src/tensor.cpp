#include "navlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace navlab {

using detail::OpNode;
using detail::TensorImpl;

namespace {

int numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
    n *= d;
  }
  return n;
}

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(op) + ": non-finite value in forward result");
    }
  }
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "{";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}

std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape, std::vector<double> value,
                                      bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(value);
  impl->requires_grad = requires_grad;
  return impl;
}

std::vector<double>& ensure_grad(TensorImpl& t) {
  if (t.grad.size() != t.value.size()) t.grad.assign(t.value.size(), 0.0);
  return t.grad;
}

// Gradient of an op output, or null if nothing downstream contributed one.
const double* output_grad(OpNode& node, size_t idx) {
  auto sp = node.outputs[idx].lock();
  if (!sp) return nullptr;
  if (sp->grad.size() != sp->value.size()) return nullptr;
  return sp->grad.data();
}

// Finalize a single-output op.
Tensor make_op(const char* name, std::vector<Tensor> inputs, std::vector<int> out_shape,
               std::vector<double> out_value, std::function<void(OpNode&)> bw) {
  check_finite(name, out_value);
  bool rg = false;
  for (const Tensor& t : inputs) rg = rg || t.requires_grad();
  auto out = make_impl(std::move(out_shape), std::move(out_value), rg);
  if (rg) {
    auto node = std::make_shared<OpNode>();
    node->name = name;
    node->inputs.reserve(inputs.size());
    for (Tensor& t : inputs) node->inputs.push_back(t.impl_);
    node->outputs.push_back(out);
    node->backward = std::move(bw);
    out->producer = node;
  }
  return Tensor(out);
}

}  // namespace

// ---- Tensor basics ----

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  int n = numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double fill, bool requires_grad) {
  if (!std::isfinite(fill)) throw std::runtime_error("tensor: non-finite fill");
  int n = numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, fill), requires_grad));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != static_cast<int>(data.size())) {
    throw std::invalid_argument("tensor: data length does not match shape");
  }
  check_finite("tensor", data);
  return Tensor(make_impl(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::dim(int i) const { return impl_->shape.at(static_cast<size_t>(i)); }
int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }
int Tensor::size() const { return static_cast<int>(impl_->value.size()); }

const std::vector<double>& Tensor::values() const { return impl_->value; }
std::vector<double>& Tensor::values() { return impl_->value; }

bool Tensor::has_grad() const { return impl_->grad.size() == impl_->value.size(); }
const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::runtime_error("tensor: gradient not populated");
  return impl_->grad;
}
std::vector<double>& Tensor::grad() {
  if (!has_grad()) throw std::runtime_error("tensor: gradient not populated");
  return impl_->grad;
}
void Tensor::zero_grad() { impl_->grad.assign(impl_->value.size(), 0.0); }

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool rg) { impl_->requires_grad = rg; }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
  return impl_->value[0];
}

Tensor Tensor::detached() const {
  return Tensor(make_impl(impl_->shape, impl_->value, false));
}

// ---- elementwise ----

namespace {

Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double),
                          void (*bwd)(double av, double bv, double g, double& da, double& db)) {
  if (a.shape() != b.shape()) shape_error(name, a, b);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
  return make_op(name, {a, b}, a.shape(), std::move(out), [bwd](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& ia = *n.inputs[0];
    TensorImpl& ib = *n.inputs[1];
    const size_t m = ia.value.size();
    double* da = ia.requires_grad ? ensure_grad(ia).data() : nullptr;
    double* db = ib.requires_grad ? ensure_grad(ib).data() : nullptr;
    for (size_t i = 0; i < m; ++i) {
      double xa = 0, xb = 0;
      bwd(ia.value[i], ib.value[i], g[i], xa, xb);
      if (da) da[i] += xa;
      if (db) db[i] += xb;
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

namespace {

Tensor unary_elementwise(const char* name, const Tensor& a, double (*fwd)(double),
                         double (*dfd)(double v, double y)) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return make_op(name, {a}, a.shape(), std::move(out), [dfd](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& ia = *n.inputs[0];
    if (!ia.requires_grad) return;
    auto out_sp = n.outputs[0].lock();
    double* da = ensure_grad(ia).data();
    for (size_t i = 0; i < ia.value.size(); ++i) {
      da[i] += g[i] * dfd(ia.value[i], out_sp->value[i]);
    }
  });
}

}  // namespace

Tensor neg(const Tensor& a) {
  return unary_elementwise(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double s) {
  if (!std::isfinite(s)) throw std::runtime_error("scale: non-finite factor");
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = s * av[i];
  return make_op("scale", {a}, a.shape(), std::move(out), [s](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& ia = *n.inputs[0];
    if (!ia.requires_grad) return;
    double* da = ensure_grad(ia).data();
    for (size_t i = 0; i < ia.value.size(); ++i) da[i] += s * g[i];
  });
}

Tensor tanh(const Tensor& a) {
  return unary_elementwise(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
  }
  return unary_elementwise(
      "log", a, [](double x) { return std::log(x); },
      [](double v, double) { return 1.0 / v; });
}

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : slope * av[i];
  return make_op("leaky_relu", {a}, a.shape(), std::move(out), [slope](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& ia = *n.inputs[0];
    if (!ia.requires_grad) return;
    double* da = ensure_grad(ia).data();
    for (size_t i = 0; i < ia.value.size(); ++i) {
      da[i] += g[i] * (ia.value[i] > 0.0 ? 1.0 : slope);
    }
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = std::min(hi, std::max(lo, av[i]));
  return make_op("clamp", {a}, a.shape(), std::move(out), [lo, hi](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& ia = *n.inputs[0];
    if (!ia.requires_grad) return;
    double* da = ensure_grad(ia).data();
    for (size_t i = 0; i < ia.value.size(); ++i) {
      if (ia.value[i] >= lo && ia.value[i] <= hi) da[i] += g[i];
    }
  });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_error("matmul", a, b);
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv + p * n;
      double* orow = out.data() + i * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_op("matmul", {a, b}, {m, n}, std::move(out), [m, k, n](OpNode& nn) {
    const double* g = output_grad(nn, 0);
    if (!g) return;
    TensorImpl& ia = *nn.inputs[0];
    TensorImpl& ib = *nn.inputs[1];
    if (ia.requires_grad) {  // dA = g . B^T
      double* da = ensure_grad(ia).data();
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g + i * n;
          const double* brow = ib.value.data() + p * n;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          da[i * k + p] += acc;
        }
      }
    }
    if (ib.requires_grad) {  // dB = A^T . g
      double* db = ensure_grad(ib).data();
      for (int i = 0; i < m; ++i) {
        const double* arow = ia.value.data() + i * k;
        const double* grow = g + i * n;
        for (int p = 0; p < k; ++p) {
          const double aip = arow[p];
          double* drow = db + p * n;
          for (int j = 0; j < n; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.dim(1) != x.dim(0)) shape_error("matvec", a, x);
  const int m = a.dim(0), n = a.dim(1);
  const double* av = a.values().data();
  const double* xv = x.values().data();
  std::vector<double> out(static_cast<size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = av + i * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += arow[j] * xv[j];
    out[i] = acc;
  }
  return make_op("matvec", {a, x}, {m}, std::move(out), [m, n](OpNode& nn) {
    const double* g = output_grad(nn, 0);
    if (!g) return;
    TensorImpl& ia = *nn.inputs[0];
    TensorImpl& ix = *nn.inputs[1];
    if (ia.requires_grad) {  // dA = g (x)^T (outer product)
      double* da = ensure_grad(ia).data();
      for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        double* drow = da + i * n;
        const double* xv = ix.value.data();
        for (int j = 0; j < n; ++j) drow[j] += gi * xv[j];
      }
    }
    if (ix.requires_grad) {  // dx = A^T g
      double* dx = ensure_grad(ix).data();
      for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const double* arow = ia.value.data() + i * n;
        for (int j = 0; j < n; ++j) dx[j] += gi * arow[j];
      }
    }
  });
}

Tensor matvec_transposed(const Tensor& a, const Tensor& y) {
  if (a.rank() != 2 || y.rank() != 1 || a.dim(0) != y.dim(0)) {
    shape_error("matvec_transposed", a, y);
  }
  const int m = a.dim(0), n = a.dim(1);
  const double* av = a.values().data();
  const double* yv = y.values().data();
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < m; ++i) {
    const double wi = yv[i];
    if (wi == 0.0) continue;
    const double* arow = av + i * n;
    for (int j = 0; j < n; ++j) out[j] += wi * arow[j];
  }
  return make_op("matvec_transposed", {a, y}, {n}, std::move(out), [m, n](OpNode& nn) {
    const double* g = output_grad(nn, 0);
    if (!g) return;
    TensorImpl& ia = *nn.inputs[0];
    TensorImpl& iy = *nn.inputs[1];
    if (ia.requires_grad) {  // dA[i,j] = y[i] * g[j]
      double* da = ensure_grad(ia).data();
      for (int i = 0; i < m; ++i) {
        const double wi = iy.value[i];
        if (wi == 0.0) continue;
        double* drow = da + i * n;
        for (int j = 0; j < n; ++j) drow[j] += wi * g[j];
      }
    }
    if (iy.requires_grad) {  // dy = A g
      double* dy = ensure_grad(iy).data();
      for (int i = 0; i < m; ++i) {
        const double* arow = ia.value.data() + i * n;
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += arow[j] * g[j];
        dy[i] += acc;
      }
    }
  });
}

// ---- structure ----

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: empty input");
  std::vector<double> out;
  std::vector<int> offsets;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) throw std::invalid_argument("concat: vector inputs only");
    offsets.push_back(static_cast<int>(out.size()));
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  const int total = static_cast<int>(out.size());
  return make_op("concat", parts, {total}, std::move(out),
                 [offsets](OpNode& n) {
                   const double* g = output_grad(n, 0);
                   if (!g) return;
                   for (size_t p = 0; p < n.inputs.size(); ++p) {
                     TensorImpl& ip = *n.inputs[p];
                     if (!ip.requires_grad) continue;
                     double* dp = ensure_grad(ip).data();
                     const double* gp = g + offsets[p];
                     for (size_t i = 0; i < ip.value.size(); ++i) dp[i] += gp[i];
                   }
                 });
}

Tensor slice(const Tensor& x, int start, int len) {
  if (x.rank() != 1) throw std::invalid_argument("slice: vector input only");
  if (start < 0 || len <= 0 || start + len > x.dim(0)) {
    throw std::invalid_argument("slice: range out of bounds");
  }
  std::vector<double> out(x.values().begin() + start, x.values().begin() + start + len);
  return make_op("slice", {x}, {len}, std::move(out), [start, len](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& ix = *n.inputs[0];
    if (!ix.requires_grad) return;
    double* dx = ensure_grad(ix).data();
    for (int i = 0; i < len; ++i) dx[start + i] += g[i];
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
  const int w = rows[0].dim(0);
  std::vector<double> out;
  out.reserve(rows.size() * static_cast<size_t>(w));
  for (const Tensor& r : rows) {
    if (r.rank() != 1 || r.dim(0) != w) throw std::invalid_argument("stack_rows: ragged rows");
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  const int L = static_cast<int>(rows.size());
  return make_op("stack_rows", rows, {L, w}, std::move(out), [w](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    for (size_t r = 0; r < n.inputs.size(); ++r) {
      TensorImpl& ir = *n.inputs[r];
      if (!ir.requires_grad) continue;
      double* dr = ensure_grad(ir).data();
      const double* gr = g + r * static_cast<size_t>(w);
      for (int i = 0; i < w; ++i) dr[i] += gr[i];
    }
  });
}

Tensor row(const Tensor& m, int i) {
  if (m.rank() != 2) throw std::invalid_argument("row: matrix input only");
  if (i < 0 || i >= m.dim(0)) throw std::invalid_argument("row: index out of range");
  const int w = m.dim(1);
  std::vector<double> out(m.values().begin() + static_cast<size_t>(i) * w,
                          m.values().begin() + static_cast<size_t>(i + 1) * w);
  return make_op("row", {m}, {w}, std::move(out), [i, w](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& im = *n.inputs[0];
    if (!im.requires_grad) return;
    double* dm = ensure_grad(im).data() + static_cast<size_t>(i) * w;
    for (int j = 0; j < w; ++j) dm[j] += g[j];
  });
}

Tensor element(const Tensor& x, int i) {
  if (x.rank() != 1) throw std::invalid_argument("element: vector input only");
  if (i < 0 || i >= x.dim(0)) throw std::invalid_argument("element: index out of range");
  return make_op("element", {x}, {1}, {x.values()[static_cast<size_t>(i)]}, [i](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& ix = *n.inputs[0];
    if (!ix.requires_grad) return;
    ensure_grad(ix)[static_cast<size_t>(i)] += g[0];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_op("sum", {x}, {1}, {acc}, [](OpNode& n) {
    const double* g = output_grad(n, 0);
    if (!g) return;
    TensorImpl& ix = *n.inputs[0];
    if (!ix.requires_grad) return;
    double* dx = ensure_grad(ix).data();
    for (size_t i = 0; i < ix.value.size(); ++i) dx[i] += g[0];
  });
}

Tensor masked_softmax(const Tensor& scores, const std::vector<bool>& mask) {
  if (scores.rank() != 1) throw std::invalid_argument("masked_softmax: vector input only");
  const size_t n = scores.values().size();
  if (mask.size() != n) throw std::invalid_argument("masked_softmax: mask length mismatch");
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) {
    if (mask[i]) mx = std::max(mx, scores.values()[i]);
  }
  if (!std::isfinite(mx)) throw std::invalid_argument("masked_softmax: all positions masked");
  std::vector<double> out(n, 0.0);
  double z = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (mask[i]) {
      out[i] = std::exp(scores.values()[i] - mx);
      z += out[i];
    }
  }
  for (size_t i = 0; i < n; ++i) out[i] /= z;
  return make_op("masked_softmax", {scores}, scores.shape(), std::move(out), [](OpNode& nn) {
    const double* g = output_grad(nn, 0);
    if (!g) return;
    TensorImpl& is = *nn.inputs[0];
    if (!is.requires_grad) return;
    auto out_sp = nn.outputs[0].lock();
    const std::vector<double>& y = out_sp->value;
    double dot = 0.0;
    for (size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    double* ds = ensure_grad(is).data();
    for (size_t i = 0; i < y.size(); ++i) ds[i] += y[i] * (g[i] - dot);
  });
}

// ---- recurrent cell ----

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const Tensor& w_input,
                                    const Tensor& w_hidden, const Tensor& bias) {
  const int H = h_prev.dim(0);
  const int Din = x.dim(0);
  if (w_input.rank() != 2 || w_input.dim(0) != 4 * H || w_input.dim(1) != Din ||
      w_hidden.rank() != 2 || w_hidden.dim(0) != 4 * H || w_hidden.dim(1) != H ||
      bias.dim(0) != 4 * H || c_prev.dim(0) != H) {
    throw std::invalid_argument("lstm_cell: inconsistent parameter shapes");
  }
  const double* xv = x.values().data();
  const double* hv = h_prev.values().data();
  const double* cv = c_prev.values().data();
  const double* wi = w_input.values().data();
  const double* wh = w_hidden.values().data();
  const double* bv = bias.values().data();

  std::vector<double> z(static_cast<size_t>(4) * H);
  for (int r = 0; r < 4 * H; ++r) {
    double acc = bv[r];
    const double* wir = wi + static_cast<size_t>(r) * Din;
    for (int j = 0; j < Din; ++j) acc += wir[j] * xv[j];
    const double* whr = wh + static_cast<size_t>(r) * H;
    for (int j = 0; j < H; ++j) acc += whr[j] * hv[j];
    z[static_cast<size_t>(r)] = acc;
  }
  // gate order: input, forget, cell, output
  std::vector<double> gi(H), gf(H), gg(H), go(H), c(H), h(H), tc(H);
  for (int j = 0; j < H; ++j) {
    gi[j] = 1.0 / (1.0 + std::exp(-z[j]));
    gf[j] = 1.0 / (1.0 + std::exp(-z[H + j]));
    gg[j] = std::tanh(z[2 * H + j]);
    go[j] = 1.0 / (1.0 + std::exp(-z[3 * H + j]));
    c[j] = gf[j] * cv[j] + gi[j] * gg[j];
    tc[j] = std::tanh(c[j]);
    h[j] = go[j] * tc[j];
  }
  check_finite("lstm_cell", c);

  bool rg = x.requires_grad() || h_prev.requires_grad() || c_prev.requires_grad() ||
            w_input.requires_grad() || w_hidden.requires_grad() || bias.requires_grad();
  auto h_impl = make_impl({H}, std::move(h), rg);
  auto c_impl = make_impl({H}, std::move(c), rg);
  if (rg) {
    auto node = std::make_shared<OpNode>();
    node->name = "lstm_cell";
    node->inputs = {x.impl_, h_prev.impl_, c_prev.impl_, w_input.impl_, w_hidden.impl_,
                    bias.impl_};
    node->outputs = {h_impl, c_impl};
    node->backward = [H, Din, gi = std::move(gi), gf = std::move(gf), gg = std::move(gg),
                      go = std::move(go), tc = std::move(tc)](OpNode& n) {
      const double* dh = output_grad(n, 0);
      const double* dc_out = output_grad(n, 1);
      if (!dh && !dc_out) return;
      TensorImpl& ix = *n.inputs[0];
      TensorImpl& ih = *n.inputs[1];
      TensorImpl& ic = *n.inputs[2];
      TensorImpl& iwi = *n.inputs[3];
      TensorImpl& iwh = *n.inputs[4];
      TensorImpl& ibias = *n.inputs[5];

      std::vector<double> dz(static_cast<size_t>(4) * H);
      double* dcp = ic.requires_grad ? ensure_grad(ic).data() : nullptr;
      for (int j = 0; j < H; ++j) {
        const double dhj = dh ? dh[j] : 0.0;
        double dcj = dc_out ? dc_out[j] : 0.0;
        const double doj = dhj * tc[j];
        dcj += dhj * go[j] * (1.0 - tc[j] * tc[j]);
        const double dij = dcj * gg[j];
        const double dfj = dcj * ic.value[j];
        const double dgj = dcj * gi[j];
        if (dcp) dcp[j] += dcj * gf[j];
        dz[j] = dij * gi[j] * (1.0 - gi[j]);
        dz[H + j] = dfj * gf[j] * (1.0 - gf[j]);
        dz[2 * H + j] = dgj * (1.0 - gg[j] * gg[j]);
        dz[3 * H + j] = doj * go[j] * (1.0 - go[j]);
      }

      if (ibias.requires_grad) {
        double* db = ensure_grad(ibias).data();
        for (int r = 0; r < 4 * H; ++r) db[r] += dz[static_cast<size_t>(r)];
      }
      if (iwi.requires_grad) {
        double* dwi = ensure_grad(iwi).data();
        for (int r = 0; r < 4 * H; ++r) {
          const double dzr = dz[static_cast<size_t>(r)];
          if (dzr == 0.0) continue;
          double* drow = dwi + static_cast<size_t>(r) * Din;
          for (int j = 0; j < Din; ++j) drow[j] += dzr * ix.value[j];
        }
      }
      if (iwh.requires_grad) {
        double* dwh = ensure_grad(iwh).data();
        for (int r = 0; r < 4 * H; ++r) {
          const double dzr = dz[static_cast<size_t>(r)];
          if (dzr == 0.0) continue;
          double* drow = dwh + static_cast<size_t>(r) * H;
          for (int j = 0; j < H; ++j) drow[j] += dzr * ih.value[j];
        }
      }
      if (ix.requires_grad) {
        double* dx = ensure_grad(ix).data();
        for (int r = 0; r < 4 * H; ++r) {
          const double dzr = dz[static_cast<size_t>(r)];
          if (dzr == 0.0) continue;
          const double* wir = iwi.value.data() + static_cast<size_t>(r) * Din;
          for (int j = 0; j < Din; ++j) dx[j] += dzr * wir[j];
        }
      }
      if (ih.requires_grad) {
        double* dhp = ensure_grad(ih).data();
        for (int r = 0; r < 4 * H; ++r) {
          const double dzr = dz[static_cast<size_t>(r)];
          if (dzr == 0.0) continue;
          const double* whr = iwh.value.data() + static_cast<size_t>(r) * H;
          for (int j = 0; j < H; ++j) dhp[j] += dzr * whr[j];
        }
      }
    };
    h_impl->producer = node;
    c_impl->producer = node;
  }
  return {Tensor(h_impl), Tensor(c_impl)};
}

// ---- backward ----

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a defined scalar");
  }
  ensure_grad(*loss.impl_)[0] += 1.0;
  if (!loss.impl_->producer) return;

  // Postorder DFS over op nodes: producers come before consumers, so the
  // reversed list runs each consumer before the nodes feeding it.
  std::vector<OpNode*> order;
  std::unordered_set<OpNode*> seen;
  struct Frame {
    OpNode* node;
    size_t next_input;
  };
  std::vector<Frame> stack;
  OpNode* root = loss.impl_->producer.get();
  seen.insert(root);
  stack.push_back({root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      TensorImpl& in = *f.node->inputs[f.next_input++];
      if (in.requires_grad && in.producer) {
        OpNode* child = in.producer.get();
        if (seen.insert(child).second) stack.push_back({child, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    (*it)->backward(**it);
  }
}

double finite_difference_check(const std::function<Tensor()>& f,
                               const std::vector<Tensor>& params, double step) {
  Tensor loss = f();
  if (loss.size() != 1) throw std::invalid_argument("finite_difference_check: non-scalar loss");
  for (const Tensor& p : params) p.impl_->grad.assign(p.impl_->value.size(), 0.0);
  backward(loss);

  double max_rel = 0.0;
  for (const Tensor& p : params) {
    std::vector<double>& v = p.impl_->value;
    const std::vector<double>& g = p.impl_->grad;
    for (size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + step;
      const double up = f().item();
      v[i] = keep - step;
      const double down = f().item();
      v[i] = keep;
      const double fd = (up - down) / (2.0 * step);
      const double ad = g[i];
      const double denom = std::max({1.0, std::abs(ad), std::abs(fd)});
      max_rel = std::max(max_rel, std::abs(ad - fd) / denom);
    }
  }
  return max_rel;
}

}  // namespace navlab
