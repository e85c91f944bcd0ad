#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace navlab {

class Tensor;

namespace detail {

struct TensorImpl;

// One forward operation. Multi-output ops (the recurrent cell) share a single
// node so backward runs once with all output gradients visible.
struct OpNode {
  const char* name = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::vector<std::weak_ptr<TensorImpl>> outputs;
  std::function<void(OpNode&)> backward;
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily; same length as value once present
  bool requires_grad = false;
  std::shared_ptr<OpNode> producer;  // null for leaves
};

}  // namespace detail

// Dense double-precision tensor participating in a define-by-run reverse-mode
// tape. Value-semantic handle: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double fill, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int dim(int i) const;
  int rank() const;
  int size() const;

  const std::vector<double>& values() const;
  std::vector<double>& values();  // in-place edits are for optimizers/tests only
  bool has_grad() const;
  const std::vector<double>& grad() const;
  std::vector<double>& grad();
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool rg);

  double item() const;  // scalar tensors only
  // Tape-free copy of the current values (no producer, no grad flow).
  Tensor detached() const;

  std::shared_ptr<detail::TensorImpl> impl_;

  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);  // throws on non-positive entries
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor clamp(const Tensor& a, double lo, double hi);  // zero gradient outside [lo, hi]

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);           // {m,k}x{k,n} -> {m,n}
Tensor matvec(const Tensor& a, const Tensor& x);           // {m,n}x{n}   -> {m}
Tensor matvec_transposed(const Tensor& a, const Tensor& y);  // A^T y: {m,n},{m} -> {n}

// ---- structure ----
Tensor concat(const std::vector<Tensor>& parts);            // vectors -> vector
Tensor slice(const Tensor& x, int start, int len);          // vector range
Tensor stack_rows(const std::vector<Tensor>& rows);         // L vectors {n} -> {L,n}
Tensor row(const Tensor& m, int i);                         // matrix row / embedding lookup
Tensor element(const Tensor& x, int i);                     // {n} -> {1}
Tensor sum(const Tensor& x);                                // -> {1}

// Softmax over the positions where mask is true; masked positions are exactly
// zero. Throws if the mask has no true entry.
Tensor masked_softmax(const Tensor& scores, const std::vector<bool>& mask);

// Gated recurrent cell (input/forget/cell/output gates, in that order inside
// the stacked weight matrices). Returns (h, c).
//   w_input {4H, Din}, w_hidden {4H, H}, bias {4H}
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const Tensor& w_input,
                                    const Tensor& w_hidden, const Tensor& bias);

// Reverse-mode sweep from a scalar loss. Gradients accumulate into the .grad
// of every requires_grad tensor reachable from the loss; callers zero
// parameter grads between steps.
void backward(const Tensor& loss);

// Central-difference gradient oracle: evaluates f twice per parameter element
// (forward only, so it is independent of the backward implementation) and
// returns the max relative error against backward() gradients. Relative error
// uses a unit floor: |ad - fd| / max(1, |ad|, |fd|).
double finite_difference_check(const std::function<Tensor()>& f,
                               const std::vector<Tensor>& params, double step);

}  // namespace navlab
