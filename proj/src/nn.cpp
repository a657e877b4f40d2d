#include "toma/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace toma::nn {

Tensor ParamStore::create(const std::string& name, std::vector<int> shape, Rng& rng) {
  if (entries_.count(name)) throw std::invalid_argument("param already exists: " + name);
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  std::vector<double> data(count);
  if (shape.size() == 2) {
    const double bound = std::sqrt(6.0 / (shape[0] + shape[1]));
    for (auto& x : data) x = rng.uniform(-bound, bound);
  }
  Entry e;
  e.value = Tensor::leaf(std::move(shape), std::move(data));
  e.m1.assign(count, 0.0);
  e.m2.assign(count, 0.0);
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

Tensor ParamStore::create_zeros(const std::string& name, std::vector<int> shape) {
  if (entries_.count(name)) throw std::invalid_argument("param already exists: " + name);
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  Entry e;
  e.value = Tensor::leaf(std::move(shape), std::vector<double>(count, 0.0));
  e.m1.assign(count, 0.0);
  e.m2.assign(count, 0.0);
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

Tensor ParamStore::get(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown param: " + name);
  return it->second.value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown param: " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

void ParamStore::zero_grad(const std::string& prefix) {
  for (auto& [k, e] : entries_) {
    if (k.rfind(prefix, 0) != 0) continue;
    auto node = e.value.node();
    node->grad.assign(node->val.size(), 0.0);
  }
}

double ParamStore::grad_max_abs(const std::string& prefix) const {
  double mx = 0.0;
  for (const auto& [k, e] : entries_) {
    if (k.rfind(prefix, 0) != 0) continue;
    for (double g : e.value.node()->grad) mx = std::max(mx, std::abs(g));
  }
  return mx;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& [k, e] : entries_) {
    const auto it = other.entries_.find(k);
    if (it == other.entries_.end()) throw std::invalid_argument("copy_values_from: missing " + k);
    e.value.node()->val = it->second.value.data();
  }
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [k, e] : entries_) n += e.value.size();
  return n;
}

namespace {

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", v[i]);
    out << (i ? " " : "") << buf;
  }
  out << "\n";
}

std::vector<double> read_doubles(std::istream& in, std::size_t count) {
  std::vector<double> v(count);
  std::string tok;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated value block");
    char* end = nullptr;
    v[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) throw std::runtime_error("checkpoint: bad value token '" + tok + "'");
  }
  return v;
}

}  // namespace

void ParamStore::save(const std::string& path, const std::map<std::string, double>& meta) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << "toma-ckpt 1\n";
    out << "meta " << meta.size() << "\n";
    char buf[40];
    for (const auto& [k, v] : meta) {
      std::snprintf(buf, sizeof(buf), "%a", v);
      out << k << " " << buf << "\n";
    }
    out << "params " << entries_.size() << "\n";
    for (const auto& [name, e] : entries_) {
      out << name << " " << e.value.shape().size();
      for (int d : e.value.shape()) out << " " << d;
      out << " adam_step " << e.step << "\n";
      write_doubles(out, e.value.data());
      write_doubles(out, e.m1);
      write_doubles(out, e.m2);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot finalize checkpoint: " + path);
  }
}

ParamStore ParamStore::load(const std::string& path, std::map<std::string, double>* meta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "toma-ckpt" || version != 1) {
    throw std::runtime_error("not a toma checkpoint (bad header): " + path);
  }
  std::string tag;
  std::size_t n_meta = 0;
  in >> tag >> n_meta;
  if (tag != "meta") throw std::runtime_error("checkpoint: expected meta section");
  for (std::size_t i = 0; i < n_meta; ++i) {
    std::string key, val;
    in >> key >> val;
    if (meta) (*meta)[key] = std::strtod(val.c_str(), nullptr);
  }
  std::size_t n_params = 0;
  in >> tag >> n_params;
  if (tag != "params") throw std::runtime_error("checkpoint: expected params section");
  ParamStore store;
  for (std::size_t i = 0; i < n_params; ++i) {
    std::string name;
    std::size_t rank = 0;
    in >> name >> rank;
    if (!in) throw std::runtime_error("checkpoint: truncated param header");
    std::vector<int> shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      in >> d;
      count *= static_cast<std::size_t>(d);
    }
    long long adam_step = 0;
    in >> tag >> adam_step;
    if (tag != "adam_step") throw std::runtime_error("checkpoint: expected adam_step");
    Entry e;
    e.value = Tensor::leaf(shape, read_doubles(in, count));
    e.m1 = read_doubles(in, count);
    e.m2 = read_doubles(in, count);
    e.step = adam_step;
    store.entries_.emplace(name, std::move(e));
  }
  return store;
}

void AdamOptimizer::step(ParamStore& store, const std::string& prefix, double lr) const {
  const auto names = store.names(prefix);
  if (names.empty()) throw std::invalid_argument("optimizer step: empty partition '" + prefix + "'");
  for (const auto& name : names) {
    auto& e = store.entry(name);
    auto node = e.value.node();
    if (node->grad.size() != node->val.size()) {
      throw std::runtime_error("optimizer step: missing gradients for '" + name + "'");
    }
    e.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(e.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(e.step));
    for (std::size_t i = 0; i < node->val.size(); ++i) {
      const double g = node->grad[i];
      e.m1[i] = beta1 * e.m1[i] + (1.0 - beta1) * g;
      e.m2[i] = beta2 * e.m2[i] + (1.0 - beta2) * g * g;
      const double mhat = e.m1[i] / bc1;
      const double vhat = e.m2[i] / bc2;
      node->val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    node->grad.assign(node->val.size(), 0.0);
  }
}

Dense Dense::create(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  Dense d;
  d.W = store.create(name + ".W", {in, out}, rng);
  d.b = store.create_zeros(name + ".b", {out});
  return d;
}

Dense Dense::bind(const ParamStore& store, const std::string& name) {
  Dense d;
  d.W = store.get(name + ".W");
  d.b = store.get(name + ".b");
  return d;
}

Tensor Dense::forward(const Tensor& x) const {
  const bool vec = x.shape().size() == 1;
  Tensor x2 = vec ? reshape(x, {1, static_cast<int>(x.size())}) : x;
  Tensor y = add_rowvec(matmul(x2, W), b);
  return vec ? reshape(y, {W.shape()[1]}) : y;
}

GRUCell GRUCell::create(ParamStore& store, const std::string& name, int input, int hidden,
                        Rng& rng) {
  GRUCell g;
  g.wz = Dense::create(store, name + ".z", input + hidden, hidden, rng);
  g.wr = Dense::create(store, name + ".r", input + hidden, hidden, rng);
  g.wn = Dense::create(store, name + ".n", input + hidden, hidden, rng);
  g.input_dim = input;
  g.hidden_dim = hidden;
  return g;
}

GRUCell GRUCell::bind(const ParamStore& store, const std::string& name, int input, int hidden) {
  GRUCell g;
  g.wz = Dense::bind(store, name + ".z");
  g.wr = Dense::bind(store, name + ".r");
  g.wn = Dense::bind(store, name + ".n");
  g.input_dim = input;
  g.hidden_dim = hidden;
  return g;
}

Tensor GRUCell::forward(const Tensor& x, const Tensor& h) const {
  if (static_cast<int>(x.size()) != input_dim || static_cast<int>(h.size()) != hidden_dim) {
    throw std::invalid_argument("gru: dimension mismatch");
  }
  const Tensor xh = concat_cols(x, h);
  const Tensor z = sigmoid(wz.forward(xh));
  const Tensor r = sigmoid(wr.forward(xh));
  const Tensor n = tanh_op(wn.forward(concat_cols(x, mul(r, h))));
  const Tensor one_minus_z = add_scalar(neg(z), 1.0);
  return add(mul(one_minus_z, n), mul(z, h));
}

Attention Attention::create(ParamStore& store, const std::string& name, int d_in, int d_out,
                            Rng& rng) {
  Attention a;
  a.q = Dense::create(store, name + ".q", d_in, d_out, rng);
  a.k = Dense::create(store, name + ".k", d_in, d_out, rng);
  a.v = Dense::create(store, name + ".v", d_in, d_out, rng);
  a.d_in = d_in;
  a.d_out = d_out;
  return a;
}

Attention Attention::bind(const ParamStore& store, const std::string& name, int d_in, int d_out) {
  Attention a;
  a.q = Dense::bind(store, name + ".q");
  a.k = Dense::bind(store, name + ".k");
  a.v = Dense::bind(store, name + ".v");
  a.d_in = d_in;
  a.d_out = d_out;
  return a;
}

Tensor Attention::encode(const Tensor& x, const std::vector<std::uint8_t>* mask) const {
  if (x.shape().size() != 2 || x.shape()[1] != d_in) {
    throw std::invalid_argument("attention: expected [m, d_in] input");
  }
  const int m = x.shape()[0];
  if (m == 0) throw std::invalid_argument("attention: empty row set");
  if (mask && static_cast<int>(mask->size()) != m) {
    throw std::invalid_argument("attention: mask size mismatch");
  }

  // Canonical content order: visible rows first, then lexicographic by value.
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  const auto& vals = x.data();
  auto row_less = [&](int a, int b) {
    const std::uint8_t ma = mask ? (*mask)[a] : 1;
    const std::uint8_t mb = mask ? (*mask)[b] : 1;
    if (ma != mb) return ma > mb;
    for (int j = 0; j < d_in; ++j) {
      const double va = vals[static_cast<std::size_t>(a) * d_in + j];
      const double vb = vals[static_cast<std::size_t>(b) * d_in + j];
      if (va != vb) return va < vb;
    }
    return false;
  };
  std::stable_sort(perm.begin(), perm.end(), row_less);
  std::vector<int> inv(m);
  for (int i = 0; i < m; ++i) inv[perm[i]] = i;

  const Tensor xc = gather_rows(x, perm);
  const Tensor Q = q.forward(xc);
  const Tensor K = k.forward(xc);
  const Tensor V = v.forward(xc);
  Tensor scores = scale(matmul(Q, transpose(K)), 1.0 / std::sqrt(static_cast<double>(d_out)));

  std::vector<double> rowmask(m, 1.0);
  if (mask) {
    for (int i = 0; i < m; ++i) rowmask[i] = (*mask)[perm[i]] ? 1.0 : 0.0;
    std::vector<double> block(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        if (rowmask[j] == 0.0) block[static_cast<std::size_t>(i) * m + j] = 1.0;
      }
    }
    scores = masked_fill(scores, block, -1e30);
  }

  Tensor enc = matmul(softmax_rows(scores), V);
  if (mask) enc = mul_colvec(enc, Tensor::values({m}, rowmask));
  return gather_rows(enc, inv);
}

GumbelSample gumbel_softmax_sample(const Tensor& logits, double temperature,
                                   const std::vector<double>& noise) {
  if (!(temperature > 0.0)) throw std::invalid_argument("gumbel: temperature must be positive");
  if (noise.size() != logits.size()) throw std::invalid_argument("gumbel: noise size mismatch");
  GumbelSample s;
  const Tensor shifted = add(logits, Tensor::values(logits.shape(), noise));
  s.relaxed = softmax_rows(scale(shifted, 1.0 / temperature));
  int best = 0;
  for (std::size_t i = 1; i < s.relaxed.size(); ++i) {
    if (s.relaxed.at(i) > s.relaxed.at(best)) best = static_cast<int>(i);
  }
  std::vector<double> hard(s.relaxed.size(), 0.0);
  hard[static_cast<std::size_t>(best)] = 1.0;
  s.onehot = straight_through(s.relaxed, std::move(hard));
  s.index = best;
  return s;
}

}  // namespace toma::nn
