#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lsm/common.hpp"

// Reverse-mode autodiff over dense row-major double tensors. Each op builds a
// node holding its parents and a backward closure; Tensor::backward walks the
// graph in reverse topological order.
namespace lsm::ag {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);

/// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();
std::string shape_str(const Shape& s);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::size_t size() const { return value.size(); }
  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> value() const { return node_->value; }
  std::span<double> mutable_value() { return node_->value; }
  /// Gradient, or an empty span if none has been accumulated.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  double item() const;

  void zero_grad();
  /// Seeds d(self)/d(self) = 1 on a scalar and propagates to every ancestor.
  void backward();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Elementwise. `b` either matches `a` or matches a's trailing dimensions and
// is broadcast over the leading ones.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

/// a [..., K] x b [K, N] -> [..., N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched: a [B, M, K] x b [B, K, N] -> [B, M, N].
Tensor bmm(const Tensor& a, const Tensor& b);
/// Swaps the last two dimensions (rank 2 or 3).
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
/// Rows [begin, end) along dimension 0.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);
/// Concatenation along dimension 0.
Tensor concat(const std::vector<Tensor>& parts);
/// Rows of `a` (along dimension 0) picked by index; repeats allowed.
Tensor gather(const Tensor& a, const std::vector<std::size_t>& rows);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// [B, T, D] -> [B, D], mean over T.
Tensor mean_tokens(const Tensor& a);

/// Normalizes over the last dimension, then gamma * x + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);
/// Softmax over the last dimension.
Tensor softmax(const Tensor& x);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);

/// sum(w * (pred - target)^2) / sum(w). Throws if sum(w) == 0.
Tensor mse_loss(const Tensor& pred, const Tensor& target, std::span<const double> weights);
/// Mean cross-entropy of logits [N, C]; `log_prior` (length C, optional) is
/// added to every row of logits first, which gives the balanced softmax loss.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     std::span<const double> log_prior = {});

/// Multi-head self-attention on a packed projection qkv [B*T, 3*D]
/// (q | k | v, heads contiguous inside each) -> [B*T, D].
Tensor attention(const Tensor& qkv, std::size_t batch, std::size_t tokens, std::size_t heads);

}  // namespace lsm::ag
