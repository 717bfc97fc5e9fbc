#include "srvfgan/diffcore.hpp"

#include "srvfgan/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace srvfgan::diff {

namespace detail {

using BackwardFn = std::function<std::vector<Tensor>(const std::vector<Tensor>& parents, const Tensor& self,
                                                     const Tensor& upstream)>;

struct Node {
  Matrix value;
  std::vector<Tensor> parents;
  BackwardFn backward;
  bool requires_grad = false;
  const char* op = "leaf";
  std::uint64_t id = 0;
};

}  // namespace detail

namespace {

using detail::BackwardFn;
using detail::Node;

std::atomic<std::uint64_t> next_id{1};
thread_local bool recording = true;

std::shared_ptr<Node> new_node(Matrix value, const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->id = next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

/// Result of an operation; records the graph when any parent needs gradients.
Tensor make(const char* op, Matrix value, std::vector<Tensor> parents, BackwardFn backward) {
  auto n = new_node(std::move(value), op);
  if (recording && std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); })) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

std::string shape_str(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(Errc::ShapeMismatch, std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw Error(Errc::ShapeMismatch, std::string(op) + ": undefined tensor");
}

Eigen::Index broadcast_extent(Eigen::Index a, Eigen::Index b, bool& ok) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  ok = false;
  return 0;
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1) return m.replicate(rows, 1);
  return m.replicate(1, cols);
}

Matrix reduce_to(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  Matrix out = m;
  if (rows == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

/// Elementwise op whose derivative is a constant mask or another tensor.
template <class F>
Matrix map(const Matrix& x, F f) {
  return x.unaryExpr(f);
}

Tensor constant(Matrix m) { return Tensor(std::move(m)); }

Tensor reduce_grad(const Tensor& g, const Tensor& like) {
  if (g.rows() == like.rows() && g.cols() == like.cols()) return g;
  return sum_to(g, like.rows(), like.cols());
}

// Series and recurrences for the special functions.

constexpr int kMaxSeriesTerms = 400;

double sinc_sqrt_value(double s, int k) {
  if (std::abs(s) <= 50.0) {
    // sum_{n>=k} (-1)^n n!/(n-k)! s^(n-k) / (2n+1)!
    double coef = (k % 2 == 0) ? 1.0 : -1.0;
    for (int j = 1; j <= k; ++j) coef *= static_cast<double>(j);
    for (int j = 2; j <= 2 * k + 1; ++j) coef /= static_cast<double>(j);
    double term = coef;
    double total = term;
    for (int n = k; n < k + kMaxSeriesTerms; ++n) {
      term *= -static_cast<double>(n + 1) / static_cast<double>(n + 1 - k) * s /
              (static_cast<double>(2 * n + 2) * static_cast<double>(2 * n + 3));
      total += term;
      if (std::abs(term) <= 1e-17 * std::abs(total) && n > k + 2) break;
    }
    return total;
  }
  // 4s S'' + 6 S' + S = 0, differentiated k times.
  const double r = std::sqrt(std::abs(s));
  const double s0 = s > 0 ? std::sin(r) / r : std::sinh(r) / r;
  const double c0 = s > 0 ? std::cos(r) : std::cosh(r);
  double prev = s0;
  if (k == 0) return prev;
  double cur = (c0 - s0) / (2.0 * s);
  for (int j = 0; j + 1 < k; ++j) {
    const double next = -((4.0 * j + 6.0) * cur + prev) / (4.0 * s);
    prev = cur;
    cur = next;
  }
  return cur;
}

double acos_ratio_value(double c, int k) {
  if (!(c > -1.0) || c > 1.0 + 1e-12) {
    throw Error(Errc::DomainError, "acos_ratio: argument " + std::to_string(c) + " outside (-1, 1]");
  }
  if (c >= 0.5) {
    // A = sum a_n x^n with x = 1 - c, a_0 = 1, a_n = a_{n-1} n / (2n + 1).
    const double x = 1.0 - c;
    double a = 1.0;
    for (int n = 1; n <= k; ++n) a *= static_cast<double>(n) / static_cast<double>(2 * n + 1);
    double falling = 1.0;
    for (int j = 1; j <= k; ++j) falling *= static_cast<double>(j);
    double term = falling * a;
    double total = term;
    for (int n = k; n < k + kMaxSeriesTerms; ++n) {
      term *= static_cast<double>(n + 1) / static_cast<double>(n + 1 - k) * static_cast<double>(n + 1) /
              static_cast<double>(2 * n + 3) * x;
      total += term;
      if (std::abs(term) <= 1e-17 * std::abs(total) && n > k + 2) break;
    }
    return (k % 2 == 0) ? total : -total;
  }
  // (1 - c^2) A^(k+1) = (2k + 1) c A^(k) + k^2 A^(k-1), with (1 - c^2) A' = c A - 1.
  const double w = 1.0 - c * c;
  double prev = std::acos(c) / std::sqrt(w);
  if (k == 0) return prev;
  double cur = (c * prev - 1.0) / w;
  for (int j = 1; j < k; ++j) {
    const double next = ((2.0 * j + 1.0) * c * cur + static_cast<double>(j) * j * prev) / w;
    prev = cur;
    cur = next;
  }
  return cur;
}

Tensor block(const Tensor& x, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols);

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Matrix value, bool requires_grad) : node_(new_node(std::move(value), "leaf")) {
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v) { return Tensor(Matrix::Constant(1, 1, v)); }

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols) { return Tensor(Matrix::Zero(rows, cols)); }

const Matrix& Tensor::value() const {
  if (!node_) throw Error(Errc::ShapeMismatch, "undefined tensor");
  return node_->value;
}

Matrix& Tensor::mutable_value() {
  if (!node_) throw Error(Errc::ShapeMismatch, "undefined tensor");
  if (!node_->parents.empty()) throw Error(Errc::ConfigError, "only leaf tensors can be written");
  return node_->value;
}

double Tensor::item() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw Error(Errc::ShapeMismatch, "item() of a " + shape_str(*this) + " tensor");
  return v(0, 0);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::is_leaf() const { return !node_ || node_->parents.empty(); }

const char* Tensor::op() const { return node_ ? node_->op : "undefined"; }

std::uint64_t Tensor::id() const { return node_ ? node_->id : 0; }

std::vector<Tensor> Tensor::parents() const { return node_ ? node_->parents : std::vector<Tensor>{}; }

Tensor Tensor::detach() const { return Tensor(value()); }

NoGradGuard::NoGradGuard() : previous_(recording) { recording = false; }

NoGradGuard::~NoGradGuard() { recording = previous_; }

bool grad_enabled() noexcept { return recording; }

// ---------------------------------------------------------------------------
// Linear algebra and shape

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  return make("matmul", a.value() * b.value(), {a, b}, [](const auto& p, const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{
        p[0].requires_grad() ? matmul(g, transpose(p[1])) : Tensor(),
        p[1].requires_grad() ? matmul(transpose(p[0]), g) : Tensor(),
    };
  });
}

Tensor transpose(const Tensor& x) {
  require_defined(x, "transpose");
  return make("transpose", x.value().transpose(), {x},
              [](const auto&, const Tensor&, const Tensor& g) { return std::vector<Tensor>{transpose(g)}; });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_cols: no inputs");
  Eigen::Index cols = 0;
  for (const auto& t : parts) {
    require_defined(t, "concat_cols");
    if (t.rows() != parts.front().rows()) shape_error("concat_cols", parts.front(), t);
    cols += t.cols();
  }
  Matrix out(parts.front().rows(), cols);
  Eigen::Index at = 0;
  for (const auto& t : parts) {
    out.middleCols(at, t.cols()) = t.value();
    at += t.cols();
  }
  return make("concat_cols", std::move(out), parts, [](const auto& p, const Tensor&, const Tensor& g) {
    std::vector<Tensor> grads;
    Eigen::Index offset = 0;
    for (const auto& t : p) {
      grads.push_back(t.requires_grad() ? slice_cols(g, offset, t.cols()) : Tensor());
      offset += t.cols();
    }
    return grads;
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_rows: no inputs");
  Eigen::Index rows = 0;
  for (const auto& t : parts) {
    require_defined(t, "concat_rows");
    if (t.cols() != parts.front().cols()) shape_error("concat_rows", parts.front(), t);
    rows += t.rows();
  }
  Matrix out(rows, parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& t : parts) {
    out.middleRows(at, t.rows()) = t.value();
    at += t.rows();
  }
  return make("concat_rows", std::move(out), parts, [](const auto& p, const Tensor&, const Tensor& g) {
    std::vector<Tensor> grads;
    Eigen::Index offset = 0;
    for (const auto& t : p) {
      grads.push_back(t.requires_grad() ? slice_rows(g, offset, t.rows()) : Tensor());
      offset += t.rows();
    }
    return grads;
  });
}

namespace {

Tensor block(const Tensor& x, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols) {
  require_defined(x, "slice");
  if (row < 0 || col < 0 || rows < 0 || cols < 0 || row + rows > x.rows() || col + cols > x.cols()) {
    throw Error(Errc::ShapeMismatch, "slice out of range of a " + shape_str(x) + " tensor");
  }
  const Eigen::Index xr = x.rows();
  const Eigen::Index xc = x.cols();
  return make("slice", x.value().block(row, col, rows, cols), {x},
              [=](const auto&, const Tensor&, const Tensor& g) { return std::vector<Tensor>{pad(g, xr, xc, row, col)}; });
}

}  // namespace

Tensor slice_cols(const Tensor& x, Eigen::Index begin, Eigen::Index count) {
  require_defined(x, "slice_cols");
  return block(x, 0, begin, x.rows(), count);
}

Tensor slice_rows(const Tensor& x, Eigen::Index begin, Eigen::Index count) {
  require_defined(x, "slice_rows");
  return block(x, begin, 0, count, x.cols());
}

Tensor pad(const Tensor& x, Eigen::Index rows, Eigen::Index cols, Eigen::Index row, Eigen::Index col) {
  require_defined(x, "pad");
  if (row < 0 || col < 0 || row + x.rows() > rows || col + x.cols() > cols) {
    throw Error(Errc::ShapeMismatch, "pad: " + shape_str(x) + " does not fit");
  }
  Matrix out = Matrix::Zero(rows, cols);
  out.block(row, col, x.rows(), x.cols()) = x.value();
  const Eigen::Index xr = x.rows();
  const Eigen::Index xc = x.cols();
  return make("pad", std::move(out), {x}, [=](const auto&, const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{block(g, row, col, xr, xc)};
  });
}

Tensor reshape(const Tensor& x, Eigen::Index rows, Eigen::Index cols) {
  require_defined(x, "reshape");
  if (rows * cols != x.rows() * x.cols()) throw Error(Errc::ShapeMismatch, "reshape: element counts differ");
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  const Eigen::Index xr = x.rows();
  const Eigen::Index xc = x.cols();
  return make("reshape", std::move(out), {x},
              [=](const auto&, const Tensor&, const Tensor& g) { return std::vector<Tensor>{reshape(g, xr, xc)}; });
}

// ---------------------------------------------------------------------------
// Broadcasting arithmetic

namespace {

std::pair<Eigen::Index, Eigen::Index> broadcast_shape(const char* op, const Tensor& a, const Tensor& b) {
  require_defined(a, op);
  require_defined(b, op);
  bool ok = true;
  const auto r = broadcast_extent(a.rows(), b.rows(), ok);
  const auto c = broadcast_extent(a.cols(), b.cols(), ok);
  if (!ok) shape_error(op, a, b);
  return {r, c};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const auto [r, c] = broadcast_shape("add", a, b);
  return make("add", expand(a.value(), r, c) + expand(b.value(), r, c), {a, b},
              [](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{p[0].requires_grad() ? reduce_grad(g, p[0]) : Tensor(),
                                           p[1].requires_grad() ? reduce_grad(g, p[1]) : Tensor()};
              });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto [r, c] = broadcast_shape("sub", a, b);
  return make("sub", expand(a.value(), r, c) - expand(b.value(), r, c), {a, b},
              [](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{p[0].requires_grad() ? reduce_grad(g, p[0]) : Tensor(),
                                           p[1].requires_grad() ? reduce_grad(scale(g, -1.0), p[1]) : Tensor()};
              });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto [r, c] = broadcast_shape("mul", a, b);
  return make("mul", expand(a.value(), r, c).cwiseProduct(expand(b.value(), r, c)), {a, b},
              [](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{p[0].requires_grad() ? reduce_grad(mul(g, p[1]), p[0]) : Tensor(),
                                           p[1].requires_grad() ? reduce_grad(mul(g, p[0]), p[1]) : Tensor()};
              });
}

Tensor div(const Tensor& a, const Tensor& b) {
  const auto [r, c] = broadcast_shape("div", a, b);
  if ((b.value().array() == 0.0).any()) throw Error(Errc::DomainError, "div: division by zero");
  return make("div", expand(a.value(), r, c).cwiseQuotient(expand(b.value(), r, c)), {a, b},
              [](const auto& p, const Tensor& self, const Tensor& g) {
                return std::vector<Tensor>{
                    p[0].requires_grad() ? reduce_grad(div(g, p[1]), p[0]) : Tensor(),
                    p[1].requires_grad() ? reduce_grad(scale(div(mul(g, self), p[1]), -1.0), p[1]) : Tensor()};
              });
}

Tensor scale(const Tensor& x, double factor) {
  require_defined(x, "scale");
  return make("scale", x.value() * factor, {x}, [factor](const auto&, const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{scale(g, factor)};
  });
}

Tensor add_scalar(const Tensor& x, double offset) {
  require_defined(x, "add_scalar");
  return make("add_scalar", (x.value().array() + offset).matrix(), {x},
              [](const auto&, const Tensor&, const Tensor& g) { return std::vector<Tensor>{g}; });
}

Tensor broadcast_to(const Tensor& x, Eigen::Index rows, Eigen::Index cols) {
  require_defined(x, "broadcast_to");
  bool ok = true;
  if (broadcast_extent(x.rows(), rows, ok) != rows || broadcast_extent(x.cols(), cols, ok) != cols || !ok) {
    throw Error(Errc::ShapeMismatch, "broadcast_to: cannot expand " + shape_str(x));
  }
  if (x.rows() == rows && x.cols() == cols) return x;
  const Eigen::Index xr = x.rows();
  const Eigen::Index xc = x.cols();
  return make("broadcast_to", expand(x.value(), rows, cols), {x},
              [=](const auto&, const Tensor&, const Tensor& g) { return std::vector<Tensor>{sum_to(g, xr, xc)}; });
}

Tensor sum_to(const Tensor& x, Eigen::Index rows, Eigen::Index cols) {
  require_defined(x, "sum_to");
  if ((rows != 1 && rows != x.rows()) || (cols != 1 && cols != x.cols())) {
    throw Error(Errc::ShapeMismatch, "sum_to: cannot reduce " + shape_str(x));
  }
  if (x.rows() == rows && x.cols() == cols) return x;
  const Eigen::Index xr = x.rows();
  const Eigen::Index xc = x.cols();
  return make("sum_to", reduce_to(x.value(), rows, cols), {x},
              [=](const auto&, const Tensor&, const Tensor& g) { return std::vector<Tensor>{broadcast_to(g, xr, xc)}; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  const Eigen::Index xr = x.rows();
  const Eigen::Index xc = x.cols();
  return make("sum", Matrix::Constant(1, 1, x.value().sum()), {x},
              [=](const auto&, const Tensor&, const Tensor& g) { return std::vector<Tensor>{broadcast_to(g, xr, xc)}; });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  const auto n = static_cast<double>(x.value().size());
  if (n == 0) throw Error(Errc::ShapeMismatch, "mean of an empty tensor");
  return scale(sum(x), 1.0 / n);
}

Tensor sum_rows(const Tensor& x) {
  require_defined(x, "sum_rows");
  return sum_to(x, x.rows(), 1);
}

Tensor sum_cols(const Tensor& x) {
  require_defined(x, "sum_cols");
  return sum_to(x, 1, x.cols());
}

Tensor l2_norm(const Tensor& x) {
  require_defined(x, "l2_norm");
  return make("l2_norm", x.value().rowwise().norm(), {x}, [](const auto& p, const Tensor& self, const Tensor& g) {
    return std::vector<Tensor>{mul(mul(g, reciprocal_or_zero(self)), p[0])};
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor relu(const Tensor& x) {
  require_defined(x, "relu");
  return make("relu", map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {x},
              [](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{
                    mul(g, constant(map(p[0].value(), [](double v) { return v >= 0.0 ? 1.0 : 0.0; })))};
              });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  require_defined(x, "leaky_relu");
  return make("leaky_relu", map(x.value(), [slope](double v) { return v >= 0.0 ? v : slope * v; }), {x},
              [slope](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{
                    mul(g, constant(map(p[0].value(), [slope](double v) { return v >= 0.0 ? 1.0 : slope; })))};
              });
}

Tensor tanh(const Tensor& x) {
  require_defined(x, "tanh");
  return make("tanh", map(x.value(), [](double v) { return std::tanh(v); }), {x},
              [](const auto&, const Tensor& self, const Tensor& g) {
                return std::vector<Tensor>{sub(g, mul(g, mul(self, self)))};
              });
}

Tensor abs(const Tensor& x) {
  require_defined(x, "abs");
  return make("abs", x.value().cwiseAbs(), {x}, [](const auto& p, const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{mul(g, constant(map(p[0].value(), [](double v) { return v >= 0.0 ? 1.0 : -1.0; })))};
  });
}

Tensor sqrt(const Tensor& x) {
  require_defined(x, "sqrt");
  if ((x.value().array() < 0.0).any()) throw Error(Errc::DomainError, "sqrt of a negative value");
  return make("sqrt", x.value().cwiseSqrt(), {x}, [](const auto&, const Tensor& self, const Tensor& g) {
    return std::vector<Tensor>{scale(mul(g, reciprocal_or_zero(self)), 0.5)};
  });
}

Tensor cos(const Tensor& x) {
  require_defined(x, "cos");
  return make("cos", map(x.value(), [](double v) { return std::cos(v); }), {x},
              [](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{scale(mul(g, sin(p[0])), -1.0)};
              });
}

Tensor sin(const Tensor& x) {
  require_defined(x, "sin");
  return make("sin", map(x.value(), [](double v) { return std::sin(v); }), {x},
              [](const auto& p, const Tensor&, const Tensor& g) { return std::vector<Tensor>{mul(g, cos(p[0]))}; });
}

namespace {

void require_unit_interval(const Tensor& x, const char* op) {
  if ((x.value().array() < -1.0).any() || (x.value().array() > 1.0).any() || x.value().hasNaN()) {
    throw Error(Errc::DomainError, std::string(op) + ": argument outside [-1, 1]");
  }
}

/// sqrt(1 - x^2) as a graph expression.
Tensor cosine_complement(const Tensor& x) { return sqrt(add_scalar(scale(mul(x, x), -1.0), 1.0)); }

}  // namespace

Tensor acos(const Tensor& x) {
  require_defined(x, "acos");
  require_unit_interval(x, "acos");
  return make("acos", map(x.value(), [](double v) { return std::acos(v); }), {x},
              [](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{scale(div(g, cosine_complement(p[0])), -1.0)};
              });
}

Tensor asin(const Tensor& x) {
  require_defined(x, "asin");
  require_unit_interval(x, "asin");
  return make("asin", map(x.value(), [](double v) { return std::asin(v); }), {x},
              [](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{div(g, cosine_complement(p[0]))};
              });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  require_defined(x, "clamp");
  if (!(lo <= hi)) throw Error(Errc::DomainError, "clamp: lo > hi");
  return make("clamp", map(x.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); }), {x},
              [lo, hi](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{mul(
                    g, constant(map(p[0].value(), [lo, hi](double v) { return v >= lo && v <= hi ? 1.0 : 0.0; })))};
              });
}

Tensor reciprocal_or_zero(const Tensor& x) {
  require_defined(x, "reciprocal_or_zero");
  return make("reciprocal_or_zero", map(x.value(), [](double v) { return v == 0.0 ? 0.0 : 1.0 / v; }), {x},
              [](const auto&, const Tensor& self, const Tensor& g) {
                return std::vector<Tensor>{scale(mul(g, mul(self, self)), -1.0)};
              });
}

Tensor cos_sqrt(const Tensor& s) {
  require_defined(s, "cos_sqrt");
  return make("cos_sqrt",
              map(s.value(), [](double v) { return v >= 0.0 ? std::cos(std::sqrt(v)) : std::cosh(std::sqrt(-v)); }),
              {s}, [](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{scale(mul(g, sinc_sqrt(p[0], 0)), -0.5)};
              });
}

Tensor sinc_sqrt(const Tensor& s, int k) {
  require_defined(s, "sinc_sqrt");
  if (k < 0) throw Error(Errc::DomainError, "sinc_sqrt: negative derivative order");
  return make("sinc_sqrt", map(s.value(), [k](double v) { return sinc_sqrt_value(v, k); }), {s},
              [k](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{mul(g, sinc_sqrt(p[0], k + 1))};
              });
}

Tensor acos_ratio(const Tensor& c, int k) {
  require_defined(c, "acos_ratio");
  if (k < 0) throw Error(Errc::DomainError, "acos_ratio: negative derivative order");
  return make("acos_ratio", map(c.value(), [k](double v) { return acos_ratio_value(v, k); }), {c},
              [k](const auto& p, const Tensor&, const Tensor& g) {
                return std::vector<Tensor>{mul(g, acos_ratio(p[0], k + 1))};
              });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& x) { return scale(x, -1.0); }
Tensor operator*(double a, const Tensor& x) { return scale(x, a); }
Tensor operator*(const Tensor& x, double a) { return scale(x, a); }

// ---------------------------------------------------------------------------
// Reverse pass

std::vector<Tensor> topological_order(const Tensor& output) {
  require_defined(output, "topological_order");
  std::vector<Tensor> nodes;
  std::unordered_set<const Node*> seen;
  std::vector<Tensor> stack{output};
  while (!stack.empty()) {
    Tensor t = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(t.node().get()).second) continue;
    nodes.push_back(t);
    for (const auto& p : t.node()->parents) stack.push_back(p);
  }
  std::sort(nodes.begin(), nodes.end(), [](const Tensor& a, const Tensor& b) { return a.id() < b.id(); });
  return nodes;
}

std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& wrt, const GradOptions& options) {
  require_defined(output, "grad");
  if (output.rows() != 1 || output.cols() != 1) {
    throw Error(Errc::ShapeMismatch, "grad: output must be 1x1, got " + shape_str(output));
  }
  std::optional<NoGradGuard> guard;
  if (!options.create_graph) guard.emplace();

  std::unordered_map<const Node*, Tensor> adjoint;
  if (output.requires_grad()) {
    const auto order = topological_order(output);
    adjoint.emplace(output.node().get(), Tensor(Matrix::Ones(1, 1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Node* n = it->node().get();
      if (n->parents.empty()) continue;
      const auto found = adjoint.find(n);
      if (found == adjoint.end()) continue;
      const auto grads = n->backward(n->parents, *it, found->second);
      for (std::size_t i = 0; i < n->parents.size(); ++i) {
        const auto& parent = n->parents[i];
        if (!parent.requires_grad() || !grads[i].defined()) continue;
        const Node* key = parent.node().get();
        auto slot = adjoint.find(key);
        if (slot == adjoint.end()) {
          adjoint.emplace(key, grads[i]);
        } else {
          slot->second = add(slot->second, grads[i]);
        }
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    require_defined(wrt[i], "grad");
    const auto found = adjoint.find(wrt[i].node().get());
    if (found != adjoint.end()) {
      out.push_back(options.create_graph ? found->second : found->second.detach());
    } else if (options.allow_unused) {
      out.push_back(Tensor::zeros(wrt[i].rows(), wrt[i].cols()));
    } else {
      throw Error(Errc::NotInGraph, "grad: variable " + std::to_string(i) + " does not reach the output");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam

void AdamConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(Errc::ConfigError, "Adam learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(Errc::ConfigError, "Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw Error(Errc::ConfigError, "Adam epsilon must be positive");
}

AdamState::AdamState(const AdamConfig& cfg, const std::vector<Tensor>& params) : config(cfg) {
  config.validate();
  for (const auto& p : params) {
    m.push_back(Matrix::Zero(p.rows(), p.cols()));
    v.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void adam_step(std::vector<Tensor>& params, const std::vector<Matrix>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
    throw Error(Errc::ShapeMismatch, "adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols() ||
        state.m[i].rows() != grads[i].rows() || state.m[i].cols() != grads[i].cols()) {
      throw Error(Errc::ShapeMismatch, "adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  const auto& c = state.config;
  ++state.t;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i].cwiseProduct(grads[i]);
    Matrix& p = params[i].mutable_value();
    p.array() -= c.lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + c.eps);
  }
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
  std::vector<Matrix> values;
  values.reserve(grads.size());
  for (const auto& g : grads) values.push_back(g.value());
  adam_step(params, values, state);
}

}  // namespace srvfgan::diff
