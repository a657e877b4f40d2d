#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace toma::nn {

// Reverse-mode autodiff over small dense tensors (rank 1 or 2, row-major,
// 64-bit). Graphs are built dynamically; dropping the last Tensor handle of a
// subgraph frees it. Any non-finite value produced by an op is a hard error.

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> val;
  std::vector<double> grad;  // sized lazily during backward
  bool needs_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;  // adds into parents' grads

  std::size_t size() const { return val.size(); }
  bool is_leaf() const { return parents.empty(); }
  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}

  static Tensor values(std::vector<int> shape, std::vector<double> data);
  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor scalar(double v) { return values({1}, {v}); }
  // Leaf that participates in autodiff (parameters, probed inputs).
  static Tensor leaf(std::vector<int> shape, std::vector<double> data);

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  int rows() const { return n_->shape.at(0); }
  int cols() const { return n_->shape.size() == 2 ? n_->shape[1] : 1; }
  std::size_t size() const { return n_->size(); }
  const std::vector<double>& data() const { return n_->val; }
  std::vector<double>& mutable_data() { return n_->val; }
  double item() const;  // value of a single-element tensor
  double at(std::size_t i) const { return n_->val.at(i); }
  const std::vector<double>& grad() const { return n_->grad; }
  bool needs_grad() const { return n_->needs_grad; }

  // Constant copy severed from the graph.
  Tensor detach() const;

  std::shared_ptr<TensorNode> node() const { return n_; }

 private:
  std::shared_ptr<TensorNode> n_;
};

// Thread-local autodiff switch; disabled sections build no graph.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Accumulates d(loss)/d(leaf) into every reachable leaf's grad buffer.
// Intermediate node grads are transient per call, so repeated calls sum into
// the leaves. Loss must be a single-element tensor.
void backward(const Tensor& loss);

// --- ops ----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor row(const Tensor& a, int r);                       // -> vector [c]
Tensor gather_rows(const Tensor& a, std::vector<int> idx);
Tensor stack_rows(const std::vector<Tensor>& rows);       // vectors -> matrix

Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor softplus(const Tensor& a);  // log(1 + e^x), overflow-safe

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_axis0(const Tensor& a);  // [r,c] -> [c]
Tensor max_axis0(const Tensor& a);  // [r,c] -> [c], grad routed to argmax
Tensor mean_axis0(const Tensor& a);

// out[i] = mask[i] != 0 ? fill : a[i]; grad flows only through kept entries.
Tensor masked_fill(const Tensor& a, const std::vector<double>& mask, double fill);
// Row-wise broadcasts over a [r,c] matrix.
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // v: [c]
Tensor mul_colvec(const Tensor& a, const Tensor& v);  // v: [r], scales row i by v[i]

Tensor reshape(const Tensor& a, std::vector<int> shape);  // same element count
Tensor element(const Tensor& a, std::size_t i);           // -> [1]
Tensor mul_vecscalar(const Tensor& v, const Tensor& s);   // s: [1]

// Forward takes `hard` as the value; gradient passes to `relaxed` unchanged
// (straight-through estimator for discrete samples).
Tensor straight_through(const Tensor& relaxed, std::vector<double> hard);

}  // namespace toma::nn
