#include "toma/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace toma::nn {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
    }
  }
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape, std::vector<double> val) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->val = std::move(val);
  return n;
}

// Wires a derived node into the graph when autodiff is on and any parent
// participates; otherwise returns a detached constant.
Tensor make_op(const char* name, std::vector<int> shape, std::vector<double> val,
               std::vector<Tensor> parents, std::function<void(TensorNode&)> backprop) {
  check_finite(val, name);
  auto n = make_node(std::move(shape), std::move(val));
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) track = track || p.needs_grad();
  }
  if (track) {
    n->needs_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backprop = std::move(backprop);
  }
  return Tensor(std::move(n));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.shape().size() != 2) throw std::invalid_argument(std::string(op) + ": expected matrix");
}

// Shapes a tensor as (rows, cols), treating vectors as a single row.
std::pair<int, int> as_2d(const Tensor& a) {
  if (a.shape().size() == 2) return {a.shape()[0], a.shape()[1]};
  if (a.shape().size() == 1) return {1, a.shape()[0]};
  throw std::invalid_argument("tensor: rank must be 1 or 2");
}

Tensor unary_ew(const char* name, const Tensor& a, double (*f)(double),
                double (*df)(double /*x*/, double /*y*/)) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.at(i));
  auto an = a.node();
  return make_op(name, a.shape(), std::move(out), {a}, [an, df](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      an->grad[i] += self.grad[i] * df(an->val[i], self.val[i]);
    }
  });
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::values(std::vector<int> shape, std::vector<double> data) {
  if (shape_size(shape) != data.size()) throw std::invalid_argument("tensor: shape/data mismatch");
  check_finite(data, "values");
  return Tensor(make_node(std::move(shape), std::move(data)));
}

Tensor Tensor::zeros(std::vector<int> shape) {
  const std::size_t n = shape_size(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  const std::size_t n = shape_size(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::leaf(std::vector<int> shape, std::vector<double> data) {
  Tensor t = values(std::move(shape), std::move(data));
  t.node()->needs_grad = true;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor is not a scalar");
  return n_->val[0];
}

Tensor Tensor::detach() const {
  return Tensor(make_node(n_->shape, n_->val));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  TensorNode* root = loss.node().get();
  if (!root->needs_grad) return;

  // Iterative post-order DFS; graphs can be deep for long episodes.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->needs_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  // Fresh working grads for interior nodes; leaves accumulate across calls.
  for (TensorNode* n : topo) {
    if (!n->is_leaf()) n->grad.assign(n->size(), 0.0);
    else n->ensure_grad();
  }
  root->grad[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  auto an = a.node(), bn = b.node();
  return make_op("add", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode& self) {
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) bn->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  auto an = a.node(), bn = b.node();
  return make_op("sub", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode& self) {
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  auto an = a.node(), bn = b.node();
  return make_op("mul", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode& self) {
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i] * bn->val[i];
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) bn->grad[i] += self.grad[i] * an->val[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * s;
  auto an = a.node();
  return make_op("scale", a.shape(), std::move(out), {a}, [an, s](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i] * s;
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + s;
  auto an = a.node();
  return make_op("add_scalar", a.shape(), std::move(out), {a}, [an](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const int m = a.shape()[0], k = a.shape()[1];
  const int k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) throw std::invalid_argument("matmul: inner dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a.at(static_cast<std::size_t>(i) * k + p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        out[static_cast<std::size_t>(i) * n + j] += av * b.at(static_cast<std::size_t>(p) * n + j);
      }
    }
  }
  auto an = a.node(), bn = b.node();
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](TensorNode& self) {
    if (an->needs_grad) {
      an->ensure_grad();
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) {
            acc += self.grad[static_cast<std::size_t>(i) * n + j] *
                   bn->val[static_cast<std::size_t>(p) * n + j];
          }
          an->grad[static_cast<std::size_t>(i) * k + p] += acc;
        }
      }
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      for (int p = 0; p < k; ++p) {
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) {
            acc += an->val[static_cast<std::size_t>(i) * k + p] *
                   self.grad[static_cast<std::size_t>(i) * n + j];
          }
          bn->grad[static_cast<std::size_t>(p) * n + j] += acc;
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const int r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(a.size());
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      out[static_cast<std::size_t>(j) * r + i] = a.at(static_cast<std::size_t>(i) * c + j);
    }
  }
  auto an = a.node();
  return make_op("transpose", {c, r}, std::move(out), {a}, [an, r, c](TensorNode& self) {
    an->ensure_grad();
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        an->grad[static_cast<std::size_t>(i) * c + j] +=
            self.grad[static_cast<std::size_t>(j) * r + i];
      }
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const auto [ra, ca] = as_2d(a);
  const auto [rb, cb] = as_2d(b);
  if (ra != rb) throw std::invalid_argument("concat_cols: row mismatch");
  const int r = ra, c = ca + cb;
  std::vector<double> out(static_cast<std::size_t>(r) * c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < ca; ++j) out[static_cast<std::size_t>(i) * c + j] = a.at(static_cast<std::size_t>(i) * ca + j);
    for (int j = 0; j < cb; ++j) out[static_cast<std::size_t>(i) * c + ca + j] = b.at(static_cast<std::size_t>(i) * cb + j);
  }
  std::vector<int> shape = (a.shape().size() == 1 && b.shape().size() == 1)
                               ? std::vector<int>{c}
                               : std::vector<int>{r, c};
  auto an = a.node(), bn = b.node();
  return make_op("concat_cols", std::move(shape), std::move(out), {a, b},
                 [an, bn, r, ca, cb, c](TensorNode& self) {
                   if (an->needs_grad) {
                     an->ensure_grad();
                     for (int i = 0; i < r; ++i)
                       for (int j = 0; j < ca; ++j)
                         an->grad[static_cast<std::size_t>(i) * ca + j] +=
                             self.grad[static_cast<std::size_t>(i) * c + j];
                   }
                   if (bn->needs_grad) {
                     bn->ensure_grad();
                     for (int i = 0; i < r; ++i)
                       for (int j = 0; j < cb; ++j)
                         bn->grad[static_cast<std::size_t>(i) * cb + j] +=
                             self.grad[static_cast<std::size_t>(i) * c + ca + j];
                   }
                 });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_matrix(a, "concat_rows");
  require_matrix(b, "concat_rows");
  if (a.shape()[1] != b.shape()[1]) throw std::invalid_argument("concat_rows: column mismatch");
  const int ra = a.shape()[0], rb = b.shape()[0], c = a.shape()[1];
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  auto an = a.node(), bn = b.node();
  return make_op("concat_rows", {ra + rb, c}, std::move(out), {a, b},
                 [an, bn, ra, rb, c](TensorNode& self) {
                   if (an->needs_grad) {
                     an->ensure_grad();
                     for (std::size_t i = 0; i < static_cast<std::size_t>(ra) * c; ++i)
                       an->grad[i] += self.grad[i];
                   }
                   if (bn->needs_grad) {
                     bn->ensure_grad();
                     const std::size_t off = static_cast<std::size_t>(ra) * c;
                     for (std::size_t i = 0; i < static_cast<std::size_t>(rb) * c; ++i)
                       bn->grad[i] += self.grad[off + i];
                   }
                 });
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  require_matrix(a, "slice_rows");
  const int r = a.shape()[0], c = a.shape()[1];
  if (r0 < 0 || r1 > r || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
  std::vector<double> out(a.data().begin() + static_cast<std::size_t>(r0) * c,
                          a.data().begin() + static_cast<std::size_t>(r1) * c);
  auto an = a.node();
  return make_op("slice_rows", {r1 - r0, c}, std::move(out), {a}, [an, r0, c](TensorNode& self) {
    an->ensure_grad();
    const std::size_t off = static_cast<std::size_t>(r0) * c;
    for (std::size_t i = 0; i < self.size(); ++i) an->grad[off + i] += self.grad[i];
  });
}

Tensor row(const Tensor& a, int r) {
  require_matrix(a, "row");
  const int rows_n = a.shape()[0], c = a.shape()[1];
  if (r < 0 || r >= rows_n) throw std::invalid_argument("row: index out of range");
  std::vector<double> out(a.data().begin() + static_cast<std::size_t>(r) * c,
                          a.data().begin() + static_cast<std::size_t>(r + 1) * c);
  auto an = a.node();
  return make_op("row", {c}, std::move(out), {a}, [an, r, c](TensorNode& self) {
    an->ensure_grad();
    const std::size_t off = static_cast<std::size_t>(r) * c;
    for (int j = 0; j < c; ++j) an->grad[off + j] += self.grad[j];
  });
}

Tensor gather_rows(const Tensor& a, std::vector<int> idx) {
  require_matrix(a, "gather_rows");
  const int r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out;
  out.reserve(idx.size() * c);
  for (int i : idx) {
    if (i < 0 || i >= r) throw std::invalid_argument("gather_rows: index out of range");
    out.insert(out.end(), a.data().begin() + static_cast<std::size_t>(i) * c,
               a.data().begin() + static_cast<std::size_t>(i + 1) * c);
  }
  auto an = a.node();
  const int k = static_cast<int>(idx.size());
  return make_op("gather_rows", {k, c}, std::move(out), {a},
                 [an, idx = std::move(idx), c](TensorNode& self) {
                   an->ensure_grad();
                   for (std::size_t i = 0; i < idx.size(); ++i) {
                     const std::size_t src = i * c;
                     const std::size_t dst = static_cast<std::size_t>(idx[i]) * c;
                     for (int j = 0; j < c; ++j) an->grad[dst + j] += self.grad[src + j];
                   }
                 });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
  const int c = static_cast<int>(rows[0].size());
  std::vector<double> out;
  out.reserve(rows.size() * c);
  for (const auto& rv : rows) {
    if (static_cast<int>(rv.size()) != c) throw std::invalid_argument("stack_rows: width mismatch");
    out.insert(out.end(), rv.data().begin(), rv.data().end());
  }
  std::vector<std::shared_ptr<TensorNode>> pnodes;
  for (const auto& rv : rows) pnodes.push_back(rv.node());
  Tensor t = make_op("stack_rows", {static_cast<int>(rows.size()), c}, std::move(out), rows,
                     [pnodes, c](TensorNode& self) {
                       for (std::size_t i = 0; i < pnodes.size(); ++i) {
                         auto& p = pnodes[i];
                         if (!p->needs_grad) continue;
                         p->ensure_grad();
                         for (int j = 0; j < c; ++j)
                           p->grad[j] += self.grad[i * static_cast<std::size_t>(c) + j];
                       }
                     });
  return t;
}

Tensor sigmoid(const Tensor& a) {
  return unary_ew(
      "sigmoid", a, +[](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                                    : std::exp(x) / (1.0 + std::exp(x)); },
      +[](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& a) {
  return unary_ew(
      "tanh", a, +[](double x) { return std::tanh(x); },
      +[](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary_ew(
      "relu", a, +[](double x) { return x > 0.0 ? x : 0.0; },
      +[](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp_op(const Tensor& a) {
  return unary_ew(
      "exp", a, +[](double x) { return std::exp(x); }, +[](double, double y) { return y; });
}

Tensor log_op(const Tensor& a) {
  return unary_ew(
      "log", a, +[](double x) { return std::log(x); }, +[](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return unary_ew(
      "softplus", a,
      +[](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      +[](double x, double) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      });
}

Tensor softmax_rows(const Tensor& a) {
  const auto [r, c] = as_2d(a);
  if (c == 0) throw std::invalid_argument("softmax_rows: empty rows");
  std::vector<double> out(a.size());
  for (int i = 0; i < r; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * c;
    double mx = a.at(off);
    for (int j = 1; j < c; ++j) mx = std::max(mx, a.at(off + j));
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      out[off + j] = std::exp(a.at(off + j) - mx);
      denom += out[off + j];
    }
    for (int j = 0; j < c; ++j) out[off + j] /= denom;
  }
  auto an = a.node();
  return make_op("softmax_rows", a.shape(), std::move(out), {a}, [an, r, c](TensorNode& self) {
    an->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * c;
      double dotv = 0.0;
      for (int j = 0; j < c; ++j) dotv += self.grad[off + j] * self.val[off + j];
      for (int j = 0; j < c; ++j) {
        an->grad[off + j] += self.val[off + j] * (self.grad[off + j] - dotv);
      }
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const auto [r, c] = as_2d(a);
  if (c == 0) throw std::invalid_argument("log_softmax_rows: empty rows");
  std::vector<double> out(a.size());
  for (int i = 0; i < r; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * c;
    double mx = a.at(off);
    for (int j = 1; j < c; ++j) mx = std::max(mx, a.at(off + j));
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(a.at(off + j) - mx);
    lse = mx + std::log(lse);
    for (int j = 0; j < c; ++j) out[off + j] = a.at(off + j) - lse;
  }
  auto an = a.node();
  return make_op("log_softmax_rows", a.shape(), std::move(out), {a}, [an, r, c](TensorNode& self) {
    an->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * c;
      double gsum = 0.0;
      for (int j = 0; j < c; ++j) gsum += self.grad[off + j];
      for (int j = 0; j < c; ++j) {
        an->grad[off + j] += self.grad[off + j] - std::exp(self.val[off + j]) * gsum;
      }
    }
  });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  auto an = a.node();
  return make_op("sum_all", {1}, {s}, {a}, [an](TensorNode& self) {
    an->ensure_grad();
    for (double& g : an->grad) g += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_axis0(const Tensor& a) {
  require_matrix(a, "sum_axis0");
  const int r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(c, 0.0);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[j] += a.at(static_cast<std::size_t>(i) * c + j);
  auto an = a.node();
  return make_op("sum_axis0", {c}, std::move(out), {a}, [an, r, c](TensorNode& self) {
    an->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) an->grad[static_cast<std::size_t>(i) * c + j] += self.grad[j];
  });
}

Tensor mean_axis0(const Tensor& a) {
  require_matrix(a, "mean_axis0");
  return scale(sum_axis0(a), 1.0 / static_cast<double>(a.shape()[0]));
}

Tensor max_axis0(const Tensor& a) {
  require_matrix(a, "max_axis0");
  const int r = a.shape()[0], c = a.shape()[1];
  if (r == 0) throw std::invalid_argument("max_axis0: no rows");
  std::vector<double> out(c);
  std::vector<int> arg(c, 0);
  for (int j = 0; j < c; ++j) {
    double best = a.at(j);
    int bi = 0;
    for (int i = 1; i < r; ++i) {
      const double v = a.at(static_cast<std::size_t>(i) * c + j);
      if (v > best) {
        best = v;
        bi = i;
      }
    }
    out[j] = best;
    arg[j] = bi;
  }
  auto an = a.node();
  return make_op("max_axis0", {c}, std::move(out), {a},
                 [an, arg = std::move(arg), c](TensorNode& self) {
                   an->ensure_grad();
                   for (int j = 0; j < c; ++j) {
                     an->grad[static_cast<std::size_t>(arg[j]) * c + j] += self.grad[j];
                   }
                 });
}

Tensor masked_fill(const Tensor& a, const std::vector<double>& mask, double fill) {
  if (mask.size() != a.size()) throw std::invalid_argument("masked_fill: mask size mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] != 0.0 ? fill : a.at(i);
  auto an = a.node();
  return make_op("masked_fill", a.shape(), std::move(out), {a}, [an, mask](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (mask[i] == 0.0) an->grad[i] += self.grad[i];
    }
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  require_matrix(a, "add_rowvec");
  const int r = a.shape()[0], c = a.shape()[1];
  if (static_cast<int>(v.size()) != c) throw std::invalid_argument("add_rowvec: width mismatch");
  std::vector<double> out(a.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i) * c + j] = a.at(static_cast<std::size_t>(i) * c + j) + v.at(j);
  auto an = a.node(), vn = v.node();
  return make_op("add_rowvec", a.shape(), std::move(out), {a, v}, [an, vn, r, c](TensorNode& self) {
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (vn->needs_grad) {
      vn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) vn->grad[j] += self.grad[static_cast<std::size_t>(i) * c + j];
    }
  });
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_size(shape) != a.size()) throw std::invalid_argument("reshape: element count mismatch");
  auto an = a.node();
  return make_op("reshape", std::move(shape), a.data(), {a}, [an](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
  });
}

Tensor element(const Tensor& a, std::size_t i) {
  if (i >= a.size()) throw std::invalid_argument("element: index out of range");
  auto an = a.node();
  return make_op("element", {1}, {a.at(i)}, {a}, [an, i](TensorNode& self) {
    an->ensure_grad();
    an->grad[i] += self.grad[0];
  });
}

Tensor mul_vecscalar(const Tensor& v, const Tensor& s) {
  if (s.size() != 1) throw std::invalid_argument("mul_vecscalar: scalar expected");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.at(i) * s.at(0);
  auto vn = v.node(), sn = s.node();
  return make_op("mul_vecscalar", v.shape(), std::move(out), {v, s}, [vn, sn](TensorNode& self) {
    if (vn->needs_grad) {
      vn->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) vn->grad[i] += self.grad[i] * sn->val[0];
    }
    if (sn->needs_grad) {
      sn->ensure_grad();
      double acc = 0.0;
      for (std::size_t i = 0; i < self.size(); ++i) acc += self.grad[i] * vn->val[i];
      sn->grad[0] += acc;
    }
  });
}

Tensor straight_through(const Tensor& relaxed, std::vector<double> hard) {
  if (hard.size() != relaxed.size()) {
    throw std::invalid_argument("straight_through: size mismatch");
  }
  auto rn = relaxed.node();
  return make_op("straight_through", relaxed.shape(), std::move(hard), {relaxed},
                 [rn](TensorNode& self) {
                   rn->ensure_grad();
                   for (std::size_t i = 0; i < self.size(); ++i) rn->grad[i] += self.grad[i];
                 });
}

Tensor mul_colvec(const Tensor& a, const Tensor& v) {
  require_matrix(a, "mul_colvec");
  const int r = a.shape()[0], c = a.shape()[1];
  if (static_cast<int>(v.size()) != r) throw std::invalid_argument("mul_colvec: height mismatch");
  std::vector<double> out(a.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i) * c + j] = a.at(static_cast<std::size_t>(i) * c + j) * v.at(i);
  auto an = a.node(), vn = v.node();
  return make_op("mul_colvec", a.shape(), std::move(out), {a, v}, [an, vn, r, c](TensorNode& self) {
    if (an->needs_grad) {
      an->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          an->grad[static_cast<std::size_t>(i) * c + j] +=
              self.grad[static_cast<std::size_t>(i) * c + j] * vn->val[i];
    }
    if (vn->needs_grad) {
      vn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j)
          acc += self.grad[static_cast<std::size_t>(i) * c + j] *
                 an->val[static_cast<std::size_t>(i) * c + j];
        vn->grad[i] += acc;
      }
    }
  });
}

}  // namespace toma::nn
