#include "lsm/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace lsm::ag {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStrided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

std::shared_ptr<Node> make_node(Shape shape, std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->value.assign(shape_size(shape), 0.0);
  n->shape = std::move(shape);
  if (g_grad_enabled) {
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  }
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw InvalidArgument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                        shape_str(b));
}

// True if b equals a or a's trailing dimensions.
bool broadcastable(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size()));
}

enum class Binary { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, Binary op, const char* name) {
  if (!broadcastable(a.shape(), b.shape()) || (op == Binary::Sub && a.shape() != b.shape())) {
    shape_error(name, a.shape(), b.shape());
  }
  auto n = make_node(a.shape(), {a.node(), b.node()});
  const std::size_t na = a.size(), nb = b.size();
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  double* out = n->value.data();
  for (std::size_t base = 0; base < na; base += nb) {
    const double* x = av.data() + base;
    double* o = out + base;
    switch (op) {
      case Binary::Add: for (std::size_t j = 0; j < nb; ++j) o[j] = x[j] + bv[j]; break;
      case Binary::Sub: for (std::size_t j = 0; j < nb; ++j) o[j] = x[j] - bv[j]; break;
      case Binary::Mul: for (std::size_t j = 0; j < nb; ++j) o[j] = x[j] * bv[j]; break;
    }
  }
  if (n->requires_grad) {
    n->backward_fn = [op, na, nb](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      const auto& g = self.grad;
      if (pa.requires_grad) {
        auto& ga = pa.ensure_grad();
        for (std::size_t base = 0; base < na; base += nb) {
          const double* gi = g.data() + base;
          double* o = ga.data() + base;
          if (op == Binary::Mul) {
            for (std::size_t j = 0; j < nb; ++j) o[j] += gi[j] * pb.value[j];
          } else {
            for (std::size_t j = 0; j < nb; ++j) o[j] += gi[j];
          }
        }
      }
      if (pb.requires_grad) {
        auto& gb = pb.ensure_grad();
        for (std::size_t base = 0; base < na; base += nb) {
          const double* gi = g.data() + base;
          switch (op) {
            case Binary::Add: for (std::size_t j = 0; j < nb; ++j) gb[j] += gi[j]; break;
            case Binary::Sub: for (std::size_t j = 0; j < nb; ++j) gb[j] -= gi[j]; break;
            case Binary::Mul:
              for (std::size_t j = 0; j < nb; ++j) gb[j] += gi[j] * pa.value[base + j];
              break;
          }
        }
      }
    };
  }
  return Tensor(n);
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape_size(shape) != values.size()) {
    throw InvalidArgument("tensor data size " + std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(n);
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  Tensor t = constant(std::move(shape), std::vector<double>(n, 0.0));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

double Tensor::item() const {
  if (size() != 1) throw InvalidArgument("item() on a tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

void Tensor::backward() {
  if (size() != 1) throw InvalidArgument("backward() needs a scalar, got " + shape_str(shape()));
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
  }
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Mul, "mul"); }

Tensor scale(const Tensor& a, double s) {
  auto n = make_node(a.shape(), {a.node()});
  for (std::size_t i = 0; i < a.size(); ++i) n->value[i] = s * a.node()->value[i];
  if (n->requires_grad) {
    n->backward_fn = [s](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    };
  }
  return Tensor(n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t k = b.dim(0), ncol = b.dim(1), m = a.size() / k;
  Shape out_shape = a.shape();
  out_shape.back() = ncol;
  auto n = make_node(out_shape, {a.node(), b.node()});
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(ncol);
  MapMat(n->value.data(), M, N).noalias() =
      CMapMat(a.node()->value.data(), M, K) * CMapMat(b.node()->value.data(), K, N);
  if (n->requires_grad) {
    n->backward_fn = [M, K, N](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      CMapMat g(self.grad.data(), M, N);
      if (pa.requires_grad) {
        MapMat(pa.ensure_grad().data(), M, K).noalias() += g * CMapMat(pb.value.data(), K, N).transpose();
      }
      if (pb.requires_grad) {
        MapMat(pb.ensure_grad().data(), K, N).noalias() += CMapMat(pa.value.data(), M, K).transpose() * g;
      }
    };
  }
  return Tensor(n);
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    shape_error("bmm", a.shape(), b.shape());
  }
  const std::size_t bs = a.dim(0);
  const auto M = static_cast<Eigen::Index>(a.dim(1)), K = static_cast<Eigen::Index>(a.dim(2)),
             N = static_cast<Eigen::Index>(b.dim(2));
  auto n = make_node({bs, a.dim(1), b.dim(2)}, {a.node(), b.node()});
  for (std::size_t i = 0; i < bs; ++i) {
    MapMat(n->value.data() + i * M * N, M, N).noalias() =
        CMapMat(a.node()->value.data() + i * M * K, M, K) *
        CMapMat(b.node()->value.data() + i * K * N, K, N);
  }
  if (n->requires_grad) {
    n->backward_fn = [bs, M, K, N](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      for (std::size_t i = 0; i < bs; ++i) {
        CMapMat g(self.grad.data() + i * M * N, M, N);
        if (pa.requires_grad) {
          MapMat(pa.ensure_grad().data() + i * M * K, M, K).noalias() +=
              g * CMapMat(pb.value.data() + i * K * N, K, N).transpose();
        }
        if (pb.requires_grad) {
          MapMat(pb.ensure_grad().data() + i * K * N, K, N).noalias() +=
              CMapMat(pa.value.data() + i * M * K, M, K).transpose() * g;
        }
      }
    };
  }
  return Tensor(n);
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2 && a.rank() != 3) throw InvalidArgument("transpose: rank must be 2 or 3, got " + shape_str(a.shape()));
  const std::size_t bs = a.rank() == 3 ? a.dim(0) : 1;
  const std::size_t r = a.dim(a.rank() - 2), c = a.dim(a.rank() - 1);
  Shape s = a.shape();
  std::swap(s[s.size() - 1], s[s.size() - 2]);
  auto n = make_node(s, {a.node()});
  const auto R = static_cast<Eigen::Index>(r), C = static_cast<Eigen::Index>(c);
  for (std::size_t i = 0; i < bs; ++i) {
    MapMat(n->value.data() + i * r * c, C, R) = CMapMat(a.node()->value.data() + i * r * c, R, C).transpose();
  }
  if (n->requires_grad) {
    n->backward_fn = [bs, R, C](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < bs; ++i) {
        MapMat(g.data() + i * R * C, R, C) += CMapMat(self.grad.data() + i * R * C, C, R).transpose();
      }
    };
  }
  return Tensor(n);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_error("reshape", a.shape(), shape);
  auto n = make_node(std::move(shape), {a.node()});
  n->value = a.node()->value;
  if (n->requires_grad) {
    n->backward_fn = [](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    };
  }
  return Tensor(n);
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() < 1 || begin > end || end > a.dim(0)) {
    throw InvalidArgument("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") out of range for " + shape_str(a.shape()));
  }
  const std::size_t row = a.size() / a.dim(0);
  Shape s = a.shape();
  s[0] = end - begin;
  auto n = make_node(s, {a.node()});
  std::copy_n(a.node()->value.begin() + static_cast<std::ptrdiff_t>(begin * row), (end - begin) * row,
              n->value.begin());
  if (n->requires_grad) {
    n->backward_fn = [begin, row](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * row + i] += self.grad[i];
    };
  }
  return Tensor(n);
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidArgument("concat of nothing");
  Shape s = parts[0].shape();
  std::size_t rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.rank() != s.size() || !std::equal(s.begin() + 1, s.end(), p.shape().begin() + 1)) {
      shape_error("concat", s, p.shape());
    }
    rows += p.dim(0);
    parents.push_back(p.node());
  }
  s[0] = rows;
  auto n = make_node(s, parents);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.node()->value.begin(), p.node()->value.end(), n->value.begin() + static_cast<std::ptrdiff_t>(off));
    off += p.size();
  }
  if (n->requires_grad) {
    n->backward_fn = [](Node& self) {
      std::size_t off = 0;
      for (auto& p : self.parents) {
        if (p->requires_grad) {
          auto& g = p->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
        }
        off += p->value.size();
      }
    };
  }
  return Tensor(n);
}

Tensor gather(const Tensor& a, const std::vector<std::size_t>& rows) {
  if (a.rank() < 1) throw InvalidArgument("gather on a scalar");
  const std::size_t row = a.size() / a.dim(0);
  for (auto r : rows) {
    if (r >= a.dim(0)) {
      throw InvalidArgument("gather index " + std::to_string(r) + " out of range for " + shape_str(a.shape()));
    }
  }
  Shape s = a.shape();
  s[0] = rows.size();
  auto n = make_node(s, {a.node()});
  const auto& av = a.node()->value;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(rows[i] * row), row,
                n->value.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  if (n->requires_grad) {
    n->backward_fn = [rows, row](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < row; ++k) g[rows[i] * row + k] += self.grad[i * row + k];
      }
    };
  }
  return Tensor(n);
}

Tensor sum(const Tensor& a) {
  auto n = make_node({1}, {a.node()});
  double s = 0.0;
  for (double v : a.node()->value) s += v;
  n->value[0] = s;
  if (n->requires_grad) {
    n->backward_fn = [](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (auto& v : g) v += self.grad[0];
    };
  }
  return Tensor(n);
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw InvalidArgument("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_tokens(const Tensor& a) {
  if (a.rank() != 3) throw InvalidArgument("mean_tokens expects [B, T, D], got " + shape_str(a.shape()));
  const std::size_t bs = a.dim(0), t = a.dim(1), d = a.dim(2);
  auto n = make_node({bs, d}, {a.node()});
  const auto& av = a.node()->value;
  const double inv = 1.0 / static_cast<double>(t);
  for (std::size_t b = 0; b < bs; ++b) {
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t k = 0; k < d; ++k) n->value[b * d + k] += av[(b * t + i) * d + k] * inv;
    }
  }
  if (n->requires_grad) {
    n->backward_fn = [bs, t, d, inv](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t b = 0; b < bs; ++b) {
        for (std::size_t i = 0; i < t; ++i) {
          for (std::size_t k = 0; k < d; ++k) g[(b * t + i) * d + k] += self.grad[b * d + k] * inv;
        }
      }
    };
  }
  return Tensor(n);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d) shape_error("layer_norm", x.shape(), gamma.shape());
  const std::size_t rows = x.size() / d;
  auto n = make_node(x.shape(), {x.node(), gamma.node(), beta.node()});
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& xv = x.node()->value;
  const auto& gv = gamma.node()->value;
  const auto& bv = beta.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t k = 0; k < d; ++k) mu += p[k];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t k = 0; k < d; ++k) var += (p[k] - mu) * (p[k] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t k = 0; k < d; ++k) {
      const double h = (p[k] - mu) * is;
      (*xhat)[r * d + k] = h;
      n->value[r * d + k] = gv[k] * h + bv[k];
    }
  }
  if (n->requires_grad) {
    n->backward_fn = [d, rows, xhat, inv_std](Node& self) {
      auto& px = *self.parents[0];
      auto& pg = *self.parents[1];
      auto& pb = *self.parents[2];
      const auto& g = self.grad;
      if (pg.requires_grad || pb.requires_grad) {
        auto& gg = pg.ensure_grad();
        auto& gb = pb.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t k = 0; k < d; ++k) {
            gg[k] += g[r * d + k] * (*xhat)[r * d + k];
            gb[k] += g[r * d + k];
          }
        }
      }
      if (px.requires_grad) {
        auto& gx = px.ensure_grad();
        const auto& gam = pg.value;
        const double dn = static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            const double gh = g[r * d + k] * gam[k];
            s1 += gh;
            s2 += gh * (*xhat)[r * d + k];
          }
          const double is = (*inv_std)[r];
          for (std::size_t k = 0; k < d; ++k) {
            const double gh = g[r * d + k] * gam[k];
            gx[r * d + k] += is * (gh - s1 / dn - (*xhat)[r * d + k] * s2 / dn);
          }
        }
      }
    };
  }
  return Tensor(n);
}

Tensor softmax(const Tensor& x) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.size() / d;
  auto n = make_node(x.shape(), {x.node()});
  const auto& xv = x.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = xv.data() + r * d;
    double* o = n->value.data() + r * d;
    const double mx = *std::max_element(p, p + d);
    double z = 0.0;
    for (std::size_t k = 0; k < d; ++k) z += (o[k] = std::exp(p[k] - mx));
    for (std::size_t k = 0; k < d; ++k) o[k] /= z;
  }
  if (n->requires_grad) {
    n->backward_fn = [d, rows](Node& self) {
      auto& gx = self.parents[0]->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = self.value.data() + r * d;
        const double* g = self.grad.data() + r * d;
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += g[k] * y[k];
        for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += y[k] * (g[k] - dot);
      }
    };
  }
  return Tensor(n);
}

Tensor gelu(const Tensor& x) {
  auto n = make_node(x.shape(), {x.node()});
  const auto& xv = x.node()->value;
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  auto cdf = std::make_shared<std::vector<double>>(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*cdf)[i] = 0.5 * (1.0 + std::erf(xv[i] * kInvSqrt2));
    n->value[i] = xv[i] * (*cdf)[i];
  }
  if (n->requires_grad) {
    n->backward_fn = [cdf](Node& self) {
      auto& px = *self.parents[0];
      auto& gx = px.ensure_grad();
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const double v = px.value[i];
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        gx[i] += self.grad[i] * ((*cdf)[i] + v * pdf);
      }
    };
  }
  return Tensor(n);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, std::span<const double> weights) {
  if (pred.shape() != target.shape()) shape_error("mse_loss", pred.shape(), target.shape());
  if (weights.size() != pred.size()) {
    throw InvalidArgument("mse_loss: weight count " + std::to_string(weights.size()) +
                          " does not match " + shape_str(pred.shape()));
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (wsum <= 0.0) throw InvalidArgument("mse_loss: no cell carries weight");
  auto n = make_node({1}, {pred.node(), target.node()});
  const auto& pv = pred.node()->value;
  const auto& tv = target.node()->value;
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double d = pv[i] - tv[i];
    acc += weights[i] * d * d;
  }
  n->value[0] = acc / wsum;
  if (n->requires_grad) {
    std::vector<double> w(weights.begin(), weights.end());
    n->backward_fn = [w = std::move(w), wsum](Node& self) {
      auto& pp = *self.parents[0];
      auto& pt = *self.parents[1];
      const double g = self.grad[0];
      for (int side = 0; side < 2; ++side) {
        auto& p = side == 0 ? pp : pt;
        if (!p.requires_grad) continue;
        auto& gp = p.ensure_grad();
        const double sign = side == 0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (w[i] == 0.0) continue;
          gp[i] += sign * g * 2.0 * w[i] * (pp.value[i] - pt.value[i]) / wsum;
        }
      }
    };
  }
  return Tensor(n);
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     std::span<const double> log_prior) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw InvalidArgument("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                          std::to_string(labels.size()) + " labels");
  }
  const std::size_t nrows = logits.dim(0), c = logits.dim(1);
  if (!log_prior.empty() && log_prior.size() != c) throw InvalidArgument("cross_entropy: prior size mismatch");
  if (nrows == 0) throw InvalidArgument("cross_entropy: empty batch");
  auto probs = std::make_shared<std::vector<double>>(nrows * c);
  auto n = make_node({1}, {logits.node()});
  const auto& lv = logits.node()->value;
  double loss = 0.0;
  for (std::size_t r = 0; r < nrows; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c) {
      throw InvalidArgument("cross_entropy: label out of range");
    }
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> z(c);
    for (std::size_t k = 0; k < c; ++k) {
      z[k] = lv[r * c + k] + (log_prior.empty() ? 0.0 : log_prior[k]);
      mx = std::max(mx, z[k]);
    }
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += std::exp(z[k] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t k = 0; k < c; ++k) (*probs)[r * c + k] = std::exp(z[k] - lse);
    loss += lse - z[static_cast<std::size_t>(labels[r])];
  }
  n->value[0] = loss / static_cast<double>(nrows);
  if (n->requires_grad) {
    n->backward_fn = [probs, labels, nrows, c](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      const double s = self.grad[0] / static_cast<double>(nrows);
      for (std::size_t r = 0; r < nrows; ++r) {
        for (std::size_t k = 0; k < c; ++k) {
          const double onehot = static_cast<int>(k) == labels[r] ? 1.0 : 0.0;
          g[r * c + k] += s * ((*probs)[r * c + k] - onehot);
        }
      }
    };
  }
  return Tensor(n);
}

Tensor attention(const Tensor& qkv, std::size_t batch, std::size_t tokens, std::size_t heads) {
  if (qkv.rank() != 2 || qkv.dim(0) != batch * tokens || qkv.dim(1) % (3 * heads) != 0) {
    throw InvalidArgument("attention: qkv " + shape_str(qkv.shape()) + " does not match batch " +
                          std::to_string(batch) + " x tokens " + std::to_string(tokens) +
                          " with " + std::to_string(heads) + " heads");
  }
  const std::size_t d = qkv.dim(1) / 3, dh = d / heads;
  const auto T = static_cast<Eigen::Index>(tokens), Dh = static_cast<Eigen::Index>(dh);
  const Eigen::OuterStride<> stride3(static_cast<Eigen::Index>(3 * d));
  const Eigen::OuterStride<> stride1(static_cast<Eigen::Index>(d));
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  auto n = make_node({batch * tokens, d}, {qkv.node()});
  auto probs = std::make_shared<std::vector<double>>(batch * heads * tokens * tokens);
  const double* in = qkv.node()->value.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const double* base = in + b * tokens * 3 * d + h * dh;
      CStrided q(base, T, Dh, stride3), k(base + d, T, Dh, stride3), v(base + 2 * d, T, Dh, stride3);
      MapMat p(probs->data() + (b * heads + h) * tokens * tokens, T, T);
      p.noalias() = (q * k.transpose()) * sc;
      // Plain loops: Eigen reductions peel to the buffer's alignment, which
      // would make the sum order depend on heap addresses.
      for (Eigen::Index r = 0; r < T; ++r) {
        double* row = p.data() + r * T;
        double mx = row[0];
        for (Eigen::Index c = 1; c < T; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (Eigen::Index c = 0; c < T; ++c) {
          row[c] = std::exp(row[c] - mx);
          z += row[c];
        }
        for (Eigen::Index c = 0; c < T; ++c) row[c] /= z;
      }
      Strided o(n->value.data() + b * tokens * d + h * dh, T, Dh, stride1);
      o.noalias() = p * v;
    }
  }
  if (n->requires_grad) {
    n->backward_fn = [=](Node& self) {
      auto& px = *self.parents[0];
      auto& gx = px.ensure_grad();
      RowMat dp(T, T);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
          const double* base = px.value.data() + b * tokens * 3 * d + h * dh;
          double* gbase = gx.data() + b * tokens * 3 * d + h * dh;
          CStrided q(base, T, Dh, stride3), k(base + d, T, Dh, stride3), v(base + 2 * d, T, Dh, stride3);
          Strided gq(gbase, T, Dh, stride3), gk(gbase + d, T, Dh, stride3), gv(gbase + 2 * d, T, Dh, stride3);
          CMapMat p(probs->data() + (b * heads + h) * tokens * tokens, T, T);
          CStrided go(self.grad.data() + b * tokens * d + h * dh, T, Dh, stride1);
          gv.noalias() += p.transpose() * go;
          dp.noalias() = go * v.transpose();
          for (Eigen::Index r = 0; r < T; ++r) {
            const double* pr = p.data() + r * T;
            double* dr = dp.data() + r * T;
            double dot = 0.0;
            for (Eigen::Index c = 0; c < T; ++c) dot += dr[c] * pr[c];
            for (Eigen::Index c = 0; c < T; ++c) dr[c] = pr[c] * (dr[c] - dot) * sc;
          }
          gq.noalias() += dp * k;
          gk.noalias() += dp.transpose() * q;
        }
      }
    };
  }
  return Tensor(n);
}

}  // namespace lsm::ag
