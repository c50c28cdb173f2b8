#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "shiftgauge/errors.hpp"
#include "shiftgauge/rng.hpp"

// Dense row-major float64 tensors with a reverse-mode tape, sized for
// multilayer perceptrons: matmul, bias rows, relu, softmax, cross-entropy,
// gradient reversal, dropout, an RBF-MMD node, and Adam. No broadcasting
// beyond bias addition.

namespace shiftgauge {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += " ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError(str_cat("negative dimension in ", shape_str(s)));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized during backward
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad, accumulates into inputs' grads.
  std::function<void(Node&)> backward_fn;

  std::size_t size() const { return data.size(); }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::Node>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->data.assign(shape_numel(t.node_->shape), 0.0);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false) {
    if (shape_numel(shape) != data.size())
      throw ShapeError(str_cat("data length ", data.size(),
                               " does not match shape ", shape_str(shape)));
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double v) { return from_data({1}, {v}); }

  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  int rows() const { return dim2().first; }
  int cols() const { return dim2().second; }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  double value() const {
    if (size() != 1)
      throw ShapeError(str_cat("value() on non-scalar ", shape_str(shape())));
    return node_->data[0];
  }

  double at(int r, int c) const {
    auto [m, n] = dim2();
    return node_->data[static_cast<std::size_t>(r) * n + c];
  }

  // Runs reverse-mode accumulation from this scalar. Grads of every node
  // reachable from the root are overwritten, then accumulated; each node's
  // backward rule fires exactly once, in reverse topological order.
  void backward() const {
    if (size() != 1)
      throw ShapeError(
          str_cat("backward() requires a scalar, got ", shape_str(shape())));
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    topo(node_.get(), seen, order);
    for (detail::Node* n : order) n->grad.assign(n->size(), 0.0);
    node_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
  }

  std::shared_ptr<detail::Node> node() const { return node_; }

  // Value copy detached from any graph.
  Tensor detached_copy() const {
    return from_data(shape(), data(), node_->requires_grad);
  }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  static void topo(detail::Node* n, std::unordered_set<detail::Node*>& seen,
                   std::vector<detail::Node*>& order) {
    if (seen.count(n)) return;
    seen.insert(n);
    // Iterative DFS; graphs from long loss expressions can be deep.
    struct Frame {
      detail::Node* node;
      std::size_t next_input;
    };
    std::vector<Frame> stack{{n, 0}};
    seen.insert(n);
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_input < f.node->inputs.size()) {
        detail::Node* in = f.node->inputs[f.next_input++].get();
        if (!seen.count(in)) {
          seen.insert(in);
          stack.push_back({in, 0});
        }
      } else {
        order.push_back(f.node);
        stack.pop_back();
      }
    }
  }

  std::pair<int, int> dim2() const {
    const Shape& s = node_->shape;
    if (s.size() == 1) return {1, s[0]};
    if (s.size() == 2) return {s[0], s[1]};
    throw ShapeError(str_cat("expected 1-D or 2-D tensor, got ", shape_str(s)));
  }

  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op(Shape shape, const char* op,
                        std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward_fn);
};

inline Tensor make_op(Shape shape, const char* op, std::vector<Tensor> inputs,
                      std::function<void(detail::Node&)> backward_fn) {
  Tensor t;
  t.node_->shape = std::move(shape);
  t.node_->data.assign(shape_numel(t.node_->shape), 0.0);
  t.node_->op = op;
  bool needs = false;
  for (const Tensor& in : inputs) {
    t.node_->inputs.push_back(in.node());
    needs = needs || in.node()->requires_grad || in.node()->backward_fn;
  }
  t.node_->requires_grad = needs;
  if (needs) t.node_->backward_fn = std::move(backward_fn);
  return t;
}

// ---------------------------------------------------------------------------
// Ops

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ShapeError(str_cat("matmul shape mismatch: ", shape_str(sa), " x ",
                             shape_str(sb)));
  int m = sa[0], k = sa[1], n = sb[1];
  Tensor out = make_op({m, n}, "matmul", {a, b}, [m, k, n](detail::Node& nd) {
    const auto& g = nd.grad;
    auto& na = *nd.inputs[0];
    auto& nb = *nd.inputs[1];
    if (na.grad.empty()) na.grad.assign(na.size(), 0.0);
    if (nb.grad.empty()) nb.grad.assign(nb.size(), 0.0);
    // a.grad += g . b^T
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double gij = g[static_cast<std::size_t>(i) * n + j];
        if (gij == 0.0) continue;
        for (int p = 0; p < k; ++p)
          na.grad[static_cast<std::size_t>(i) * k + p] +=
              gij * nb.data[static_cast<std::size_t>(p) * n + j];
      }
    // b.grad += a^T . g
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        double aip = na.data[static_cast<std::size_t>(i) * k + p];
        if (aip == 0.0) continue;
        for (int j = 0; j < n; ++j)
          nb.grad[static_cast<std::size_t>(p) * n + j] +=
              aip * g[static_cast<std::size_t>(i) * n + j];
      }
  });
  auto& od = out.data();
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double aip = ad[static_cast<std::size_t>(i) * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bd[static_cast<std::size_t>(p) * n];
      double* orow = &od[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  return out;
}

// x: m x n, bias: length n, added to every row.
inline Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  const Shape& sx = x.shape();
  const Shape& sb = bias.shape();
  if (sx.size() != 2 || sb.size() != 1 || sb[0] != sx[1])
    throw ShapeError(str_cat("bias shape mismatch: ", shape_str(sx), " + ",
                             shape_str(sb)));
  int m = sx[0], n = sx[1];
  Tensor out = make_op({m, n}, "add_row_bias", {x, bias},
                       [m, n](detail::Node& nd) {
                         auto& nx = *nd.inputs[0];
                         auto& nb = *nd.inputs[1];
                         if (nx.grad.empty()) nx.grad.assign(nx.size(), 0.0);
                         if (nb.grad.empty()) nb.grad.assign(nb.size(), 0.0);
                         for (int i = 0; i < m; ++i)
                           for (int j = 0; j < n; ++j) {
                             double g = nd.grad[static_cast<std::size_t>(i) * n + j];
                             nx.grad[static_cast<std::size_t>(i) * n + j] += g;
                             nb.grad[static_cast<std::size_t>(j)] += g;
                           }
                       });
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.data()[static_cast<std::size_t>(i) * n + j] =
          x.data()[static_cast<std::size_t>(i) * n + j] + bias.data()[static_cast<std::size_t>(j)];
  return out;
}

inline Tensor relu(const Tensor& x) {
  Tensor out = make_op(x.shape(), "relu", {x}, [](detail::Node& nd) {
    auto& nx = *nd.inputs[0];
    if (nx.grad.empty()) nx.grad.assign(nx.size(), 0.0);
    for (std::size_t i = 0; i < nd.size(); ++i)
      if (nx.data[i] > 0.0) nx.grad[i] += nd.grad[i];
  });
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(str_cat("add shape mismatch: ", shape_str(a.shape()),
                             " + ", shape_str(b.shape())));
  Tensor out = make_op(a.shape(), "add", {a, b}, [](detail::Node& nd) {
    for (int which = 0; which < 2; ++which) {
      auto& ni = *nd.inputs[static_cast<std::size_t>(which)];
      if (ni.grad.empty()) ni.grad.assign(ni.size(), 0.0);
      for (std::size_t i = 0; i < nd.size(); ++i) ni.grad[i] += nd.grad[i];
    }
  });
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

inline Tensor scale(const Tensor& x, double c) {
  Tensor out = make_op(x.shape(), "scale", {x}, [c](detail::Node& nd) {
    auto& nx = *nd.inputs[0];
    if (nx.grad.empty()) nx.grad.assign(nx.size(), 0.0);
    for (std::size_t i = 0; i < nd.size(); ++i) nx.grad[i] += c * nd.grad[i];
  });
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = c * x.data()[i];
  return out;
}

inline Tensor sum(const Tensor& x) {
  Tensor out = make_op({1}, "sum", {x}, [](detail::Node& nd) {
    auto& nx = *nd.inputs[0];
    if (nx.grad.empty()) nx.grad.assign(nx.size(), 0.0);
    for (std::size_t i = 0; i < nx.size(); ++i) nx.grad[i] += nd.grad[0];
  });
  double s = 0.0;
  for (double v : x.data()) s += v;
  out.data()[0] = s;
  return out;
}

// Forward identity; backward multiplies the upstream gradient by -lambda.
inline Tensor gradient_reversal(const Tensor& x, double lambda_grl) {
  if (lambda_grl < 0.0)
    throw InputError(str_cat("gradient_reversal lambda must be >= 0, got ",
                             lambda_grl));
  Tensor out =
      make_op(x.shape(), "gradient_reversal", {x}, [lambda_grl](detail::Node& nd) {
        auto& nx = *nd.inputs[0];
        if (nx.grad.empty()) nx.grad.assign(nx.size(), 0.0);
        for (std::size_t i = 0; i < nd.size(); ++i)
          nx.grad[i] += -lambda_grl * nd.grad[i];
      });
  out.data() = x.data();
  return out;
}

// Inverted dropout over all entries; mask drawn once at graph build.
inline Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw InputError(str_cat("dropout rate must be in [0,1), got ", rate));
  if (rate == 0.0) return x;
  auto mask = std::make_shared<std::vector<double>>(x.size());
  double keep = 1.0 - rate;
  for (std::size_t i = 0; i < x.size(); ++i)
    (*mask)[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor out = make_op(x.shape(), "dropout", {x}, [mask](detail::Node& nd) {
    auto& nx = *nd.inputs[0];
    if (nx.grad.empty()) nx.grad.assign(nx.size(), 0.0);
    for (std::size_t i = 0; i < nd.size(); ++i)
      nx.grad[i] += (*mask)[i] * nd.grad[i];
  });
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data()[i] = (*mask)[i] * x.data()[i];
  return out;
}

namespace detail {

// Max-subtracted row softmax into out (no graph).
inline void softmax_rows(const std::vector<double>& in, int m, int n,
                         std::vector<double>& out) {
  out.resize(in.size());
  for (int i = 0; i < m; ++i) {
    const double* row = &in[static_cast<std::size_t>(i) * n];
    double* orow = &out[static_cast<std::size_t>(i) * n];
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= denom;
  }
}

}  // namespace detail

inline Tensor softmax(const Tensor& logits) {
  const Shape& s = logits.shape();
  if (s.size() != 2)
    throw ShapeError(str_cat("softmax expects 2-D logits, got ", shape_str(s)));
  int m = s[0], n = s[1];
  Tensor out = make_op(s, "softmax", {logits}, [m, n](detail::Node& nd) {
    auto& nx = *nd.inputs[0];
    if (nx.grad.empty()) nx.grad.assign(nx.size(), 0.0);
    for (int i = 0; i < m; ++i) {
      const double* sm = &nd.data[static_cast<std::size_t>(i) * n];
      const double* g = &nd.grad[static_cast<std::size_t>(i) * n];
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += g[j] * sm[j];
      for (int j = 0; j < n; ++j)
        nx.grad[static_cast<std::size_t>(i) * n + j] += sm[j] * (g[j] - dot);
    }
  });
  detail::softmax_rows(logits.data(), m, n, out.data());
  return out;
}

// Mean negative log-likelihood of integer class labels under row softmax.
// Fused with softmax for numerical stability.
inline Tensor cross_entropy(const Tensor& logits,
                            const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2)
    throw ShapeError(
        str_cat("cross_entropy expects 2-D logits, got ", shape_str(s)));
  int m = s[0], k = s[1];
  if (static_cast<int>(labels.size()) != m)
    throw InputError(str_cat("cross_entropy: ", labels.size(), " labels for ",
                             m, " rows"));
  for (int i = 0; i < m; ++i)
    if (labels[static_cast<std::size_t>(i)] < 0 ||
        labels[static_cast<std::size_t>(i)] >= k)
      throw InputError(str_cat("label ", labels[static_cast<std::size_t>(i)],
                               " out of range [0,", k, ") at row ", i));
  auto probs = std::make_shared<std::vector<double>>();
  detail::softmax_rows(logits.data(), m, k, *probs);
  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  Tensor out = make_op({1}, "cross_entropy", {logits},
                       [probs, labels_copy, m, k](detail::Node& nd) {
                         auto& nx = *nd.inputs[0];
                         if (nx.grad.empty()) nx.grad.assign(nx.size(), 0.0);
                         double g = nd.grad[0] / m;
                         for (int i = 0; i < m; ++i)
                           for (int j = 0; j < k; ++j) {
                             double p = (*probs)[static_cast<std::size_t>(i) * k + j];
                             double onehot =
                                 j == (*labels_copy)[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                             nx.grad[static_cast<std::size_t>(i) * k + j] +=
                                 g * (p - onehot);
                           }
                       });
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    double p = (*probs)[static_cast<std::size_t>(i) * k +
                        labels[static_cast<std::size_t>(i)]];
    loss += -std::log(std::max(p, 1e-300));
  }
  out.data()[0] = loss / m;
  return out;
}

// Stacks rows of a on top of rows of b (same column count).
inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1])
    throw ShapeError(str_cat("concat_rows mismatch: ", shape_str(sa), " / ",
                             shape_str(sb)));
  int ma = sa[0], mb = sb[0], n = sa[1];
  Tensor out = make_op({ma + mb, n}, "concat_rows", {a, b},
                       [ma, mb, n](detail::Node& nd) {
                         auto& na = *nd.inputs[0];
                         auto& nb = *nd.inputs[1];
                         if (na.grad.empty()) na.grad.assign(na.size(), 0.0);
                         if (nb.grad.empty()) nb.grad.assign(nb.size(), 0.0);
                         std::size_t asz = static_cast<std::size_t>(ma) * n;
                         for (std::size_t i = 0; i < asz; ++i)
                           na.grad[i] += nd.grad[i];
                         std::size_t bsz = static_cast<std::size_t>(mb) * n;
                         for (std::size_t i = 0; i < bsz; ++i)
                           nb.grad[i] += nd.grad[asz + i];
                       });
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

// Biased V-statistic MMD^2 with RBF kernel exp(-||x-y||^2 / (2 sigma^2)),
// differentiable in both sample matrices.
inline Tensor mmd_rbf(const Tensor& a, const Tensor& b, double sigma) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1])
    throw ShapeError(str_cat("mmd_rbf mismatch: ", shape_str(sa), " / ",
                             shape_str(sb)));
  if (sigma <= 0.0) throw InputError(str_cat("mmd bandwidth must be > 0, got ", sigma));
  int n = sa[0], m = sb[0], d = sa[1];
  if (n == 0 || m == 0) throw InputError("mmd_rbf: empty sample");
  double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  auto kernel = [inv2s2, d](const double* x, const double* y) {
    double sq = 0.0;
    for (int j = 0; j < d; ++j) {
      double diff = x[j] - y[j];
      sq += diff * diff;
    }
    return std::exp(-sq * inv2s2);
  };

  Tensor out = make_op({1}, "mmd_rbf", {a, b},
                       [n, m, d, inv2s2, kernel](detail::Node& nd) {
    auto& na = *nd.inputs[0];
    auto& nb = *nd.inputs[1];
    if (na.grad.empty()) na.grad.assign(na.size(), 0.0);
    if (nb.grad.empty()) nb.grad.assign(nb.size(), 0.0);
    double g = nd.grad[0];
    double waa = 2.0 * g / (static_cast<double>(n) * n);
    double wbb = 2.0 * g / (static_cast<double>(m) * m);
    double wab = -2.0 * g / (static_cast<double>(n) * m);
    // d k(x,y)/dx = -k * (x-y) / sigma^2 = -2 * inv2s2 * k * (x-y)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double* xi = &na.data[static_cast<std::size_t>(i) * d];
        const double* xj = &na.data[static_cast<std::size_t>(j) * d];
        double kv = kernel(xi, xj);
        double c = -2.0 * inv2s2 * kv * waa;
        for (int t = 0; t < d; ++t) {
          double diff = xi[t] - xj[t];
          na.grad[static_cast<std::size_t>(i) * d + t] += c * diff;
          na.grad[static_cast<std::size_t>(j) * d + t] -= c * diff;
        }
      }
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const double* xi = &nb.data[static_cast<std::size_t>(i) * d];
        const double* xj = &nb.data[static_cast<std::size_t>(j) * d];
        double kv = kernel(xi, xj);
        double c = -2.0 * inv2s2 * kv * wbb;
        for (int t = 0; t < d; ++t) {
          double diff = xi[t] - xj[t];
          nb.grad[static_cast<std::size_t>(i) * d + t] += c * diff;
          nb.grad[static_cast<std::size_t>(j) * d + t] -= c * diff;
        }
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        const double* xi = &na.data[static_cast<std::size_t>(i) * d];
        const double* yj = &nb.data[static_cast<std::size_t>(j) * d];
        double kv = kernel(xi, yj);
        double c = -2.0 * inv2s2 * kv * wab;
        for (int t = 0; t < d; ++t) {
          double diff = xi[t] - yj[t];
          na.grad[static_cast<std::size_t>(i) * d + t] += c * diff;
          nb.grad[static_cast<std::size_t>(j) * d + t] -= c * diff;
        }
      }
  });

  const auto& ad = a.data();
  const auto& bd = b.data();
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      kaa += kernel(&ad[static_cast<std::size_t>(i) * d],
                    &ad[static_cast<std::size_t>(j) * d]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      kbb += kernel(&bd[static_cast<std::size_t>(i) * d],
                    &bd[static_cast<std::size_t>(j) * d]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      kab += kernel(&ad[static_cast<std::size_t>(i) * d],
                    &bd[static_cast<std::size_t>(j) * d]);
  out.data()[0] = kaa / (static_cast<double>(n) * n) +
                  kbb / (static_cast<double>(m) * m) -
                  2.0 * kab / (static_cast<double>(n) * m);
  return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void adam_init(AdamState& state, const std::vector<Tensor>& params) {
  state.m.clear();
  state.v.clear();
  state.step = 0;
  for (const Tensor& p : params) {
    state.m.emplace_back(p.size(), 0.0);
    state.v.emplace_back(p.size(), 0.0);
  }
}

// Standard bias-corrected update. Parameters with no populated grad (not
// reachable from the last loss) are left untouched.
inline void adam_step(std::vector<Tensor>& params, AdamState& state,
                      double lr) {
  if (state.m.size() != params.size())
    throw InputError(str_cat("adam state holds ", state.m.size(),
                             " slots for ", params.size(), " params"));
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    if (!p.has_grad()) continue;
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    auto& g = p.grad();
    auto& w = p.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw TrainingError("non-finite gradient in adam_step", state.step);
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

inline void zero_grads(std::vector<Tensor>& params) {
  for (Tensor& p : params) p.grad().clear();
}

}  // namespace shiftgauge
