#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "toma/rng.hpp"
#include "toma/tensor.hpp"

namespace toma::nn {

// Named parameter tensors plus per-parameter Adam state. Parameter tensors
// are persistent autodiff leaves; graphs built from them accumulate gradients
// into the store until an optimizer step or zero_grad consumes them.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    std::vector<double> m1, m2;  // Adam first/second moments
    long long step = 0;
  };

  // Weight matrices use uniform +-sqrt(6/(fan_in+fan_out)); vectors are zero.
  Tensor create(const std::string& name, std::vector<int> shape, Rng& rng);
  Tensor create_zeros(const std::string& name, std::vector<int> shape);

  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  Entry& entry(const std::string& name);
  std::vector<std::string> names(const std::string& prefix = "") const;

  void zero_grad(const std::string& prefix = "");
  // Max |grad| over a partition; empty buffers count as zero.
  double grad_max_abs(const std::string& prefix = "") const;
  void copy_values_from(const ParamStore& other);
  std::size_t total_size() const;

  void save(const std::string& path, const std::map<std::string, double>& meta = {}) const;
  static ParamStore load(const std::string& path, std::map<std::string, double>* meta = nullptr);

 private:
  std::map<std::string, Entry> entries_;
};

struct AdamOptimizer {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Updates every parameter whose name starts with `prefix` and zeroes its
  // gradient. A parameter with no gradient buffer is an error: the caller has
  // not run backward over this partition.
  void step(ParamStore& store, const std::string& prefix, double lr) const;
};

struct Dense {
  Tensor W;  // [in, out]
  Tensor b;  // [out]

  static Dense create(ParamStore& store, const std::string& name, int in, int out, Rng& rng);
  static Dense bind(const ParamStore& store, const std::string& name);
  // x: [r, in] -> [r, out]; vectors are treated as a single row.
  Tensor forward(const Tensor& x) const;
};

// z = sig(Wz [x,h] + bz), r = sig(Wr [x,h] + br),
// n = tanh(Wn [x, r*h] + bn), h' = (1-z)*n + z*h.
struct GRUCell {
  Dense wz, wr, wn;
  int input_dim = 0;
  int hidden_dim = 0;

  static GRUCell create(ParamStore& store, const std::string& name, int input, int hidden,
                        Rng& rng);
  static GRUCell bind(const ParamStore& store, const std::string& name, int input, int hidden);
  Tensor forward(const Tensor& x, const Tensor& h) const;
};

// Scaled dot-product self-attention over row sets. Rows flagged 0 in the
// mask are excluded as keys and produce zero output rows. Rows are processed
// in a canonical content order so the result is bit-identical under row
// permutation.
struct Attention {
  Dense q, k, v;
  int d_in = 0;
  int d_out = 0;

  static Attention create(ParamStore& store, const std::string& name, int d_in, int d_out,
                          Rng& rng);
  static Attention bind(const ParamStore& store, const std::string& name, int d_in, int d_out);
  Tensor encode(const Tensor& x, const std::vector<std::uint8_t>* mask = nullptr) const;
};

// One-hot draw over `logits` using the provided Gumbel noise (one value per
// class); the gradient follows the relaxed softmax at `temperature`.
struct GumbelSample {
  Tensor onehot;   // hard one-hot with straight-through gradient
  Tensor relaxed;  // softmax((logits + noise) / temperature)
  int index = 0;
};
GumbelSample gumbel_softmax_sample(const Tensor& logits, double temperature,
                                   const std::vector<double>& noise);

}  // namespace toma::nn
