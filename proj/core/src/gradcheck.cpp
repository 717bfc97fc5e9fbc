#include "srvfgan/diffcore.hpp"

#include "srvfgan/error.hpp"

#include <algorithm>
#include <cmath>

namespace srvfgan::diff {

namespace {

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

std::vector<Tensor> as_constants(const std::vector<Matrix>& inputs) {
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (const auto& m : inputs) out.emplace_back(m);
  return out;
}

double evaluate(const Fn& f, const std::vector<Matrix>& inputs) { return f(as_constants(inputs)).item(); }

double relative(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Central differences of a scalar function of the inputs, compared against
/// the supplied analytic gradient.
double compare(const std::function<double(const std::vector<Matrix>&)>& value, const std::vector<Matrix>& inputs,
               const std::vector<Matrix>& analytic, double h) {
  double worst = 0.0;
  std::vector<Matrix> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index k = 0; k < inputs[i].size(); ++k) {
      const double x = inputs[i].data()[k];
      probe[i].data()[k] = x + h;
      const double up = value(probe);
      probe[i].data()[k] = x - h;
      const double down = value(probe);
      probe[i].data()[k] = x;
      worst = std::max(worst, relative(analytic[i].data()[k], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

std::vector<Tensor> variables(const std::vector<Matrix>& inputs) {
  std::vector<Tensor> vars;
  vars.reserve(inputs.size());
  for (const auto& m : inputs) vars.emplace_back(m, true);
  return vars;
}

/// Fixed projection weights for second-order checks.
std::vector<Matrix> probe_weights(const std::vector<Matrix>& inputs) {
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Matrix> w;
  for (const auto& m : inputs) w.push_back(Matrix::NullaryExpr(m.rows(), m.cols(), [&] { return uni(rng); }));
  return w;
}

}  // namespace

double gradient_error(const Fn& f, const std::vector<Matrix>& inputs, double h) {
  const auto vars = variables(inputs);
  const auto grads = grad(f(vars), vars, {false, true});
  std::vector<Matrix> analytic;
  for (const auto& g : grads) analytic.push_back(g.value());
  return compare([&](const std::vector<Matrix>& x) { return evaluate(f, x); }, inputs, analytic, h);
}

double second_order_error(const Fn& f, const std::vector<Matrix>& inputs, double h) {
  const auto w = probe_weights(inputs);
  auto projected = [&](const std::vector<Tensor>& vars, bool create) {
    const auto g = grad(f(vars), vars, {create, true});
    Tensor total = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < g.size(); ++i) total = add(total, sum(mul(g[i], Tensor(w[i]))));
    return total;
  };
  const auto vars = variables(inputs);
  const auto second = grad(projected(vars, true), vars, {false, true});
  std::vector<Matrix> analytic;
  for (const auto& g : second) analytic.push_back(g.value());
  return compare([&](const std::vector<Matrix>& x) { return projected(variables(x), false).item(); }, inputs,
                 analytic, h);
}

bool GradcheckReport::passed() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const Entry& e) { return e.passed; });
}

GradcheckReport gradcheck_suite(std::size_t trials, double tol, std::uint64_t seed) {
  if (trials == 0) throw Error(Errc::ConfigError, "gradcheck needs at least one trial");
  if (!(tol > 0.0)) throw Error(Errc::ConfigError, "gradcheck tolerance must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  auto random = [&](Eigen::Index r, Eigen::Index c, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return Matrix(Matrix::NullaryExpr(r, c, [&] { return d(rng); }));
  };
  // Magnitudes in [lo, hi] with random signs, away from kinks at 0.
  auto away = [&](Eigen::Index r, Eigen::Index c, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return Matrix(Matrix::NullaryExpr(r, c, [&] { return (uni(rng) < 0 ? -1.0 : 1.0) * d(rng); }));
  };

  struct Case {
    std::string name;
    std::function<std::vector<Matrix>()> inputs;
    Fn f;
    bool second_order = false;
  };

  // Every case projects onto fixed weights so the output is a scalar.
  auto weighted = [](const Tensor& t) {
    const Matrix w = Matrix::NullaryExpr(t.rows(), t.cols(), [&t](Eigen::Index i, Eigen::Index j) {
      return std::sin(1.0 + 0.7 * static_cast<double>(i * t.cols() + j));
    });
    return sum(mul(t, Tensor(w)));
  };

  Matrix penalty_x;
  auto mlp_inputs = [&] {
    return std::vector<Matrix>{random(4, 5, -1, 1), random(5, 6, -1, 1), random(1, 6, -0.5, 0.5),
                               random(6, 3, -1, 1),  random(1, 3, -0.5, 0.5), random(3, 1, -1, 1)};
  };
  auto mlp = [](const std::vector<Tensor>& p, bool smooth) {
    Tensor h = add(matmul(p[0], p[1]), p[2]);
    h = smooth ? tanh(h) : leaky_relu(h);
    h = add(matmul(h, p[3]), p[4]);
    h = smooth ? tanh(h) : leaky_relu(h);
    return matmul(h, p[5]);
  };

  std::vector<Case> cases = {
      {"matmul", [&] { return std::vector<Matrix>{random(3, 4, -1, 1), random(4, 2, -1, 1)}; },
       [&](const auto& x) { return weighted(matmul(x[0], x[1])); }, true},
      {"transpose", [&] { return std::vector<Matrix>{random(3, 4, -1, 1)}; },
       [&](const auto& x) { return weighted(mul(transpose(x[0]), transpose(x[0]))); }, true},
      {"concat", [&] { return std::vector<Matrix>{random(3, 2, -1, 1), random(3, 4, -1, 1), random(2, 6, -1, 1)}; },
       [&](const auto& x) {
         const Tensor c = concat_cols({x[0], x[1]});
         return weighted(mul(concat_rows({c, x[2]}), concat_rows({c, x[2]})));
       },
       true},
      {"slice_pad_reshape", [&] { return std::vector<Matrix>{random(4, 6, -1, 1)}; },
       [&](const auto& x) {
         const Tensor s = slice_rows(slice_cols(x[0], 1, 4), 1, 2);
         return weighted(mul(reshape(pad(s, 3, 5, 1, 0), 5, 3), reshape(pad(s, 3, 5, 0, 1), 5, 3)));
       },
       true},
      {"broadcast_arith", [&] {
         return std::vector<Matrix>{random(3, 4, -1, 1), random(1, 4, -1, 1), random(3, 1, -1, 1)};
       },
       [&](const auto& x) {
         return weighted(sub(mul(add(x[0], x[1]), x[2]), scale(add_scalar(mul(x[1], x[2]), 0.3), 1.7)));
       },
       true},
      {"div", [&] { return std::vector<Matrix>{random(3, 4, -1, 1), away(1, 4, 0.5, 2.0)}; },
       [&](const auto& x) { return weighted(div(x[0], x[1])); }, true},
      {"reductions", [&] { return std::vector<Matrix>{random(3, 4, -1, 1)}; },
       [&](const auto& x) {
         const Tensor sq = mul(x[0], x[0]);
         return add(add(mul(sum(sq), mean(x[0])), weighted(mul(sum_rows(sq), sum_rows(x[0])))),
                    weighted(mul(sum_cols(sq), sum_cols(x[0]))));
       },
       true},
      {"l2_norm", [&] { return std::vector<Matrix>{random(3, 4, -1, 1)}; },
       [&](const auto& x) { return weighted(l2_norm(x[0])); }, true},
      {"relu", [&] { return std::vector<Matrix>{away(3, 4, 0.1, 1.0)}; },
       [&](const auto& x) { return weighted(relu(x[0])); }},
      {"leaky_relu", [&] { return std::vector<Matrix>{away(3, 4, 0.1, 1.0)}; },
       [&](const auto& x) { return weighted(leaky_relu(x[0])); }},
      {"abs", [&] { return std::vector<Matrix>{away(3, 4, 0.1, 1.0)}; },
       [&](const auto& x) { return weighted(abs(x[0])); }},
      {"tanh", [&] { return std::vector<Matrix>{random(3, 4, -2, 2)}; },
       [&](const auto& x) { return weighted(tanh(x[0])); }, true},
      {"sqrt", [&] { return std::vector<Matrix>{random(3, 4, 0.2, 2.0)}; },
       [&](const auto& x) { return weighted(sqrt(x[0])); }, true},
      {"cos_sin", [&] { return std::vector<Matrix>{random(3, 4, -3, 3)}; },
       [&](const auto& x) { return weighted(mul(cos(x[0]), sin(x[0]))); }, true},
      {"acos_asin", [&] { return std::vector<Matrix>{random(3, 4, -0.9, 0.9)}; },
       [&](const auto& x) { return weighted(add(acos(x[0]), mul(asin(x[0]), x[0]))); }, true},
      {"clamp", [&] { return std::vector<Matrix>{away(3, 4, 0.1, 1.0)}; },
       [&](const auto& x) { return weighted(mul(clamp(x[0], -0.5, 0.5), x[0])); }},
      {"reciprocal_or_zero", [&] { return std::vector<Matrix>{away(3, 4, 0.3, 2.0)}; },
       [&](const auto& x) { return weighted(reciprocal_or_zero(x[0])); }, true},
      {"cos_sqrt", [&] { return std::vector<Matrix>{random(3, 4, 0.0, 9.5)}; },
       [&](const auto& x) { return weighted(cos_sqrt(x[0])); }, true},
      {"sinc_sqrt", [&] { return std::vector<Matrix>{random(3, 4, 0.0, 9.5)}; },
       [&](const auto& x) { return weighted(add(sinc_sqrt(x[0], 0), sinc_sqrt(x[0], 1))); }, true},
      {"acos_ratio", [&] { return std::vector<Matrix>{random(3, 4, -0.9, 1.0 - 1e-4)}; },
       [&](const auto& x) { return weighted(add(acos_ratio(x[0], 0), scale(acos_ratio(x[0], 1), 0.1))); }, true},
      {"mlp", mlp_inputs, [&](const auto& p) { return sum(mlp(p, false)); }},
      {"mlp_tanh", mlp_inputs, [&](const auto& p) { return sum(mlp(p, true)); }, true},
      {"gradient_penalty",
       [&] {
         penalty_x = random(4, 5, -1, 1);
         auto p = mlp_inputs();
         p.erase(p.begin());
         return p;
       },
       [&](const auto& p) {
         // mean (|dD/dx| - 1)^2 over the samples, as a function of the weights.
         const Tensor x(penalty_x, true);
         std::vector<Tensor> all{x};
         all.insert(all.end(), p.begin(), p.end());
         const Tensor gx = grad(sum(mlp(all, false)), {x}, {true, false})[0];
         const Tensor gap = add_scalar(l2_norm(gx), -1.0);
         return mean(mul(gap, gap));
       }},
  };

  GradcheckReport report;
  for (const auto& c : cases) {
    GradcheckReport::Entry entry{c.name, 0.0, true};
    GradcheckReport::Entry second{c.name + " (second order)", 0.0, true};
    for (std::size_t t = 0; t < trials; ++t) {
      const auto inputs = c.inputs();
      entry.max_rel_error = std::max(entry.max_rel_error, gradient_error(c.f, inputs));
      if (c.second_order) second.max_rel_error = std::max(second.max_rel_error, second_order_error(c.f, inputs));
    }
    entry.passed = entry.max_rel_error <= tol;
    report.entries.push_back(entry);
    if (c.second_order) {
      second.passed = second.max_rel_error <= tol;
      report.entries.push_back(second);
    }
  }
  return report;
}

}  // namespace srvfgan::diff
