#pragma once

// Reverse-mode automatic differentiation over dense 2-D float64 tensors.
// Backward rules are written with the same primitives as the forward pass, so
// gradients taken with create_graph can be differentiated again.

#include "srvfgan/geometry.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace srvfgan::diff {

namespace detail {
struct Node;
}

/// Handle to a value in the computation graph. Copies share the node.
/// Scalars are 1x1, row vectors 1xn; a batch stacks samples as rows.
class Tensor {
 public:
  Tensor() = default;
  /// A leaf. With requires_grad it can be passed to grad() as a variable.
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor scalar(double v);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols);

  bool defined() const noexcept { return node_ != nullptr; }
  const Matrix& value() const;
  /// Only leaves may be written; parameters are updated this way.
  Matrix& mutable_value();
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::array<Eigen::Index, 2> shape() const { return {rows(), cols()}; }
  /// Value of a 1x1 tensor.
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  /// Name of the producing operation ("leaf" for leaves).
  const char* op() const;
  /// Creation sequence number; a node's parents always have smaller ids.
  std::uint64_t id() const;
  std::vector<Tensor> parents() const;
  /// Same value, cut from the graph.
  Tensor detach() const;

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// While alive, new operations on this thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

// Linear algebra and shape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, Eigen::Index begin, Eigen::Index count);
Tensor slice_rows(const Tensor& x, Eigen::Index begin, Eigen::Index count);
/// Places x at (row, col) inside a zero matrix of the given shape.
Tensor pad(const Tensor& x, Eigen::Index rows, Eigen::Index cols, Eigen::Index row, Eigen::Index col);
/// Reshapes in row-major order.
Tensor reshape(const Tensor& x, Eigen::Index rows, Eigen::Index cols);

// Broadcasting arithmetic. Shapes must match, or a side of extent 1 repeats.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// DomainError on a zero divisor.
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor broadcast_to(const Tensor& x, Eigen::Index rows, Eigen::Index cols);
/// Sums the repeated extents back down to (rows, cols).
Tensor sum_to(const Tensor& x, Eigen::Index rows, Eigen::Index cols);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Per-row sums, rows x 1.
Tensor sum_rows(const Tensor& x);
/// Per-column sums, 1 x cols.
Tensor sum_cols(const Tensor& x);
/// Euclidean norm of each row, rows x 1. The gradient at a zero row is zero.
Tensor l2_norm(const Tensor& x);

// Elementwise. Derivatives of relu, leaky_relu and abs at 0 use the right
// derivative; clamp passes gradient on the closed interval.
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor tanh(const Tensor& x);
Tensor abs(const Tensor& x);
/// DomainError below 0. The gradient at 0 is taken as 0.
Tensor sqrt(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor sin(const Tensor& x);
/// DomainError outside [-1, 1].
Tensor acos(const Tensor& x);
/// DomainError outside [-1, 1].
Tensor asin(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
/// 1/x, and 0 where x == 0.
Tensor reciprocal_or_zero(const Tensor& x);

// Entire functions of s = |v|^2 used by the sphere maps; smooth at s = 0.
/// cos(sqrt(s)).
Tensor cos_sqrt(const Tensor& s);
/// k-th derivative of sin(sqrt(s)) / sqrt(s).
Tensor sinc_sqrt(const Tensor& s, int k = 0);
/// k-th derivative of acos(c) / sqrt(1 - c^2), i.e. theta / sin(theta) for
/// c = cos(theta); smooth at c = 1. DomainError for c <= -1 or c > 1 + 1e-12.
Tensor acos_ratio(const Tensor& c, int k = 0);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& x);
Tensor operator*(double a, const Tensor& x);
Tensor operator*(const Tensor& x, double a);

struct GradOptions {
  /// Record the backward pass so the gradients can be differentiated again.
  bool create_graph = false;
  /// Return zeros for variables the output does not depend on instead of
  /// throwing NotInGraph.
  bool allow_unused = false;
};

/// d output / d wrt for a 1x1 output. ShapeMismatch for a non-scalar output;
/// NotInGraph when a variable does not reach the output.
std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& wrt, const GradOptions& options = {});

/// Nodes reachable from `output`, parents before children.
std::vector<Tensor> topological_order(const Tensor& output);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// ConfigError unless lr > 0, 0 <= beta < 1, eps > 0.
  void validate() const;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(const AdamConfig& config, const std::vector<Tensor>& params);
};

/// One bias-corrected Adam update of the leaf parameters, in place.
/// ShapeMismatch when params, grads and the state disagree.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);
void adam_step(std::vector<Tensor>& params, const std::vector<Matrix>& grads, AdamState& state);

struct GradcheckReport {
  struct Entry {
    std::string name;
    double max_rel_error = 0.0;
    bool passed = false;
  };
  std::vector<Entry> entries;
  bool passed() const;
};

/// Largest relative error between grad() and central differences of a scalar
/// function, over every element of every input, each divided by
/// max(1, |analytic|, |numeric|).
double gradient_error(const std::function<Tensor(const std::vector<Tensor>&)>& f, const std::vector<Matrix>& inputs,
                      double h = 1e-5);

/// Same comparison for the gradient itself: the Jacobian of
/// sum(w * grad(f)) computed by double backprop against differences of grad().
double second_order_error(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                          const std::vector<Matrix>& inputs, double h = 1e-5);

/// Finite-difference checks of every primitive and of a small MLP with its
/// gradient-penalty term, over `trials` random draws each.
GradcheckReport gradcheck_suite(std::size_t trials, double tol, std::uint64_t seed);

}  // namespace srvfgan::diff
