#include "srvfgan/alignment.hpp"

#include "srvfgan/error.hpp"
#include "srvfgan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace srvfgan {

namespace {

double identity_knot(std::size_t k, std::size_t cells) {
  return static_cast<double>(k) / static_cast<double>(cells);
}

// q sampled at cell-center coordinate x (cell s has center x = s). Inside the
// outer half cells the end segments are extended linearly.
void interpolate_row(const Matrix& q, double x, double scale, double* out) {
  const Eigen::Index n = q.rows();
  const Eigen::Index cols = q.cols();
  if (n == 1) {
    for (Eigen::Index c = 0; c < cols; ++c) out[c] = scale * q(0, c);
    return;
  }
  const double clamped = std::clamp(x, -0.5, static_cast<double>(n) - 0.5);
  const auto i0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(clamped)), 0, n - 2);
  const double f = clamped - static_cast<double>(i0);
  for (Eigen::Index c = 0; c < cols; ++c) out[c] = scale * ((1.0 - f) * q(i0, c) + f * q(i0 + 1, c));
}

}  // namespace

Warping Warping::identity(std::size_t cells) {
  if (cells == 0) throw Error(Errc::ShapeMismatch, "a warping needs at least one cell");
  std::vector<double> knots(cells + 1);
  for (std::size_t k = 0; k <= cells; ++k) knots[k] = identity_knot(k, cells);
  return Warping(std::move(knots));
}

Warping Warping::from_knots(std::vector<double> knots) {
  if (knots.size() < 2) throw Error(Errc::ShapeMismatch, "a warping needs at least two knots");
  if (knots.front() != 0.0 || knots.back() != 1.0) {
    throw Error(Errc::DomainError, "a warping must map 0 to 0 and 1 to 1");
  }
  for (std::size_t k = 1; k < knots.size(); ++k) {
    if (!std::isfinite(knots[k]) || knots[k] < knots[k - 1]) {
      throw Error(Errc::DomainError, "warping knots must be non-decreasing");
    }
  }
  return Warping(std::move(knots));
}

Warping Warping::from_lattice_path(std::span<const std::pair<std::size_t, std::size_t>> vertices,
                                   std::size_t cells) {
  if (vertices.empty() || vertices.front() != std::pair<std::size_t, std::size_t>{0, 0} ||
      vertices.back() != std::pair<std::size_t, std::size_t>{cells, cells}) {
    throw Error(Errc::DomainError, "lattice path must run from (0,0) to (N,N)");
  }
  bool diagonal = true;
  for (const auto& [i, j] : vertices) diagonal = diagonal && i == j;
  if (diagonal) return identity(cells);

  std::vector<double> knots(cells + 1);
  const double n = static_cast<double>(cells);
  for (std::size_t v = 0; v + 1 < vertices.size(); ++v) {
    const auto [k, l] = vertices[v];
    const auto [i, j] = vertices[v + 1];
    if (i <= k || j < l) throw Error(Errc::DomainError, "lattice path must be monotone");
    const double slope = static_cast<double>(j - l) / static_cast<double>(i - k);
    for (std::size_t s = k; s < i; ++s) knots[s] = (static_cast<double>(l) + static_cast<double>(s - k) * slope) / n;
  }
  knots[cells] = 1.0;
  return from_knots(std::move(knots));
}

bool Warping::is_identity() const {
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    if (knots_[k] != identity_knot(k, cells())) return false;
  }
  return true;
}

double Warping::operator()(double t) const {
  const double n = static_cast<double>(cells());
  const double x = std::clamp(t, 0.0, 1.0) * n;
  const auto k = std::min(static_cast<std::size_t>(std::floor(x)), cells() - 1);
  const double f = x - static_cast<double>(k);
  return (1.0 - f) * knots_[k] + f * knots_[k + 1];
}

Warping Warping::inverse() const {
  const std::size_t n = cells();
  // Points (gamma_k, k/N) of the inverse graph; flat runs of gamma collapse to
  // their first point.
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t k = 0; k <= n; ++k) {
    if (!xs.empty() && knots_[k] <= xs.back()) continue;
    xs.push_back(knots_[k]);
    ys.push_back(identity_knot(k, n));
  }
  if (xs.back() < 1.0) {
    xs.push_back(1.0);
    ys.push_back(1.0);
  }
  ys.back() = 1.0;

  // Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson). A
  // piecewise-linear inverse resampled on the grid has first-order slope
  // error, which the sqrt(slope) factor of the group action would inherit.
  const std::size_t m = xs.size();
  std::vector<double> h(m - 1), delta(m - 1), slope(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    h[i] = xs[i + 1] - xs[i];
    delta[i] = (ys[i + 1] - ys[i]) / h[i];
  }
  if (m == 2) {
    slope[0] = slope[1] = delta[0];
  } else {
    for (std::size_t i = 1; i + 1 < m; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) continue;
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      slope[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (s * d0 <= 0.0) return 0.0;
      if (d0 * d1 <= 0.0 && std::abs(s) > std::abs(3.0 * d0)) return 3.0 * d0;
      return s;
    };
    slope[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    slope[m - 1] = end_slope(h[m - 2], h[m - 3], delta[m - 2], delta[m - 3]);
  }

  std::vector<double> inv(n + 1);
  inv[0] = 0.0;
  inv[n] = 1.0;
  std::size_t seg = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const double x = identity_knot(k, n);
    while (seg + 2 < m && xs[seg + 1] < x) ++seg;
    const double t = std::clamp((x - xs[seg]) / h[seg], 0.0, 1.0);
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double value = (2 * t3 - 3 * t2 + 1) * ys[seg] + (t3 - 2 * t2 + t) * h[seg] * slope[seg] +
                         (-2 * t3 + 3 * t2) * ys[seg + 1] + (t3 - t2) * h[seg] * slope[seg + 1];
    inv[k] = std::clamp(value, inv[k - 1], 1.0);
  }
  return from_knots(std::move(inv));
}

Warping compose(const Warping& outer, const Warping& inner) {
  if (outer.cells() != inner.cells()) throw Error(Errc::ShapeMismatch, "compose: warpings differ in cell count");
  if (outer.is_identity()) return inner;
  if (inner.is_identity()) return outer;
  std::vector<double> knots(inner.cells() + 1);
  for (std::size_t k = 0; k < knots.size(); ++k) knots[k] = outer(inner.knots()[k]);
  knots.front() = 0.0;
  knots.back() = 1.0;
  for (std::size_t k = 1; k < knots.size(); ++k) knots[k] = std::max(knots[k], knots[k - 1]);
  return Warping::from_knots(std::move(knots));
}

void KarcherConfig::validate() const {
  if (!(step > 0.0 && step <= 1.0)) throw Error(Errc::ConfigError, "Karcher step must lie in (0, 1]");
  if (!(tol > 0.0)) throw Error(Errc::ConfigError, "Karcher tolerance must be positive");
  if (max_iters < 1) throw Error(Errc::ConfigError, "Karcher max_iters must be at least 1");
}

Srvf group_action(const Srvf& q, const Warping& gamma) {
  const Matrix& s = q.samples();
  const auto cells = static_cast<std::size_t>(s.rows());
  if (gamma.cells() != cells) {
    throw Error(Errc::ShapeMismatch, "warping has " + std::to_string(gamma.cells()) + " cells, SRVF has " +
                                         std::to_string(cells));
  }
  if (gamma.is_identity()) return q;
  const auto& g = gamma.knots();
  const double n = static_cast<double>(cells);
  Matrix out(s.rows(), s.cols());
  for (std::size_t c = 0; c < cells; ++c) {
    const double slope = (g[c + 1] - g[c]) * n;
    const double center = 0.5 * (g[c] + g[c + 1]) * n - 0.5;
    interpolate_row(s, center, std::sqrt(std::max(slope, 0.0)), out.row(static_cast<Eigen::Index>(c)).data());
  }
  return Srvf::normalized(std::move(out));
}

namespace detail {

std::span<const LatticeMove> lattice_moves() {
  static const std::vector<LatticeMove> moves = [] {
    std::vector<LatticeMove> m;
    for (std::size_t a = 1; a <= kMaxLatticeStep; ++a)
      for (std::size_t b = 1; b <= kMaxLatticeStep; ++b)
        if (std::gcd(a, b) == 1) m.push_back({a, b});
    std::stable_sort(m.begin(), m.end(), [](const LatticeMove& x, const LatticeMove& y) {
      const auto dx = x.a > x.b ? x.a - x.b : x.b - x.a;
      const auto dy = y.a > y.b ? y.a - y.b : y.b - y.a;
      if (dx != dy) return dx < dy;
      return x.a + x.b < y.a + y.b;
    });
    return m;
  }();
  return moves;
}

namespace {

double segment_energy_into(const Matrix& q1, const Matrix& q2, std::size_t k, std::size_t l, std::size_t i,
                           std::size_t j, double* warped) {
  const double slope = static_cast<double>(j - l) / static_cast<double>(i - k);
  const double root = std::sqrt(slope);
  const Eigen::Index rows = q2.rows();
  const Eigen::Index cols = q1.cols();
  if (rows == 1) {
    double energy = 0.0;
    for (std::size_t s = k; s < i; ++s) {
      interpolate_row(q2, 0.0, root, warped);
      for (Eigen::Index c = 0; c < cols; ++c) {
        const double diff = q1(static_cast<Eigen::Index>(s), c) - warped[c];
        energy += diff * diff;
      }
    }
    return energy / static_cast<double>(q1.rows());
  }
  const double* a = q1.data();
  const double* b = q2.data();
  const double hi = static_cast<double>(rows) - 0.5;
  double energy = 0.0;
  for (std::size_t s = k; s < i; ++s) {
    const double center = static_cast<double>(l) + (static_cast<double>(s - k) + 0.5) * slope - 0.5;
    const double x = std::clamp(center, -0.5, hi);
    const auto i0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(x)), 0, rows - 2);
    const double f = x - static_cast<double>(i0);
    const double* lo_row = b + i0 * cols;
    const double* hi_row = lo_row + cols;
    const double* target = a + static_cast<Eigen::Index>(s) * cols;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double diff = target[c] - root * ((1.0 - f) * lo_row[c] + f * hi_row[c]);
      energy += diff * diff;
    }
  }
  return energy / static_cast<double>(q1.rows());
}

}  // namespace

double segment_energy(const Matrix& q1, const Matrix& q2, std::size_t k, std::size_t l, std::size_t i,
                      std::size_t j) {
  std::vector<double> warped(static_cast<std::size_t>(q1.cols()));
  return segment_energy_into(q1, q2, k, l, i, j, warped.data());
}

LatticeSolution solve_lattice(const Matrix& q1, const Matrix& q2) {
  const auto n = static_cast<std::size_t>(q1.rows());
  const std::size_t side = n + 1;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> energy(side * side, inf);
  std::vector<std::size_t> from(side * side, 0);
  auto at = [side](std::size_t i, std::size_t j) { return i * side + j; };
  energy[at(0, 0)] = 0.0;
  const auto moves = lattice_moves();
  std::vector<double> warped(static_cast<std::size_t>(q1.cols()));
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      double best = inf;
      std::size_t best_from = 0;
      for (const auto& mv : moves) {
        if (mv.a > i || mv.b > j) continue;
        const std::size_t k = i - mv.a;
        const std::size_t l = j - mv.b;
        const double prev = energy[at(k, l)];
        if (prev == inf) continue;
        const double candidate = prev + segment_energy_into(q1, q2, k, l, i, j, warped.data());
        if (candidate < best) {
          best = candidate;
          best_from = at(k, l);
        }
      }
      energy[at(i, j)] = best;
      from[at(i, j)] = best_from;
    }
  }
  LatticeSolution sol;
  sol.energy = energy[at(n, n)];
  std::size_t cur = at(n, n);
  sol.path.emplace_back(n, n);
  while (cur != at(0, 0)) {
    cur = from[cur];
    sol.path.emplace_back(cur / side, cur % side);
  }
  std::reverse(sol.path.begin(), sol.path.end());
  return sol;
}

}  // namespace detail

namespace {

constexpr std::size_t kMaxAlignPasses = 32;

double identity_energy(const Matrix& q1, const Matrix& q2) {
  return (q1 - q2).squaredNorm() / static_cast<double>(q1.rows());
}

}  // namespace

AlignResult align(const Srvf& q1, const Srvf& q2) {
  if (q1.samples().rows() != q2.samples().rows() || q1.samples().cols() != q2.samples().cols()) {
    throw Error(Errc::ShapeMismatch, "align: SRVFs have different shapes");
  }
  const std::size_t cells = q1.num_intervals();
  const double baseline = geodesic_distance(q1, q2);
  AlignResult identity{Warping::identity(cells), q2, baseline, identity_energy(q1.samples(), q2.samples())};
  if (cells < 2) return identity;

  // Each pass registers the current warped SRVF again and applies the new warp
  // to it; a pass is kept only if it lowers the geodesic cost. The result is a
  // fixed point of this refinement, so aligning it again changes nothing.
  AlignResult best = std::move(identity);
  for (std::size_t pass = 0; pass < kMaxAlignPasses; ++pass) {
    const auto sol = detail::solve_lattice(q1.samples(), best.aligned.samples());
    const Warping step = Warping::from_lattice_path(sol.path, cells);
    if (step.is_identity()) break;
    Srvf warped = group_action(best.aligned, step);
    const double cost = geodesic_distance(q1, warped);
    if (!(cost < best.cost)) break;
    best = AlignResult{compose(best.warping, step), std::move(warped), cost, sol.energy};
  }
  return best;
}

std::vector<Srvf> align_set_to_reference(std::span<const Srvf> set, const Srvf& ref, unsigned threads) {
  std::vector<std::optional<Srvf>> slots(set.size());
  parallel_for(set.size(), threads, [&](std::size_t i) { slots[i] = align(ref, set[i]).aligned; });
  std::vector<Srvf> out;
  out.reserve(set.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

double frechet_variance(const Srvf& center, std::span<const Srvf> set) {
  double total = 0.0;
  for (const auto& q : set) {
    const double d = geodesic_distance(center, q);
    total += d * d;
  }
  return total;
}

KarcherResult karcher_mean(std::span<const Srvf> set, const KarcherConfig& config) {
  config.validate();
  if (set.empty()) throw Error(Errc::EmptySet, "Karcher mean of an empty set");
  const auto rows = set.front().samples().rows();
  const auto cols = set.front().samples().cols();
  for (const auto& q : set) {
    if (q.samples().rows() != rows || q.samples().cols() != cols) {
      throw Error(Errc::ShapeMismatch, "Karcher mean: SRVFs have different shapes");
    }
  }

  // Canonical order makes every reduction below independent of input order.
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = set[a].samples();
    const auto& y = set[b].samples();
    return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
  });
  std::vector<Srvf> members;
  members.reserve(set.size());
  for (auto idx : order) members.push_back(set[idx]);

  // A set of identical points is its own mean; normalizing the extrinsic sum
  // would move it by rounding.
  if (std::all_of(members.begin(), members.end(), [&](const Srvf& q) { return q == members.front(); })) {
    return KarcherResult{members.front(), 0, 0.0, true};
  }

  Matrix extrinsic = Matrix::Zero(rows, cols);
  for (const auto& q : members) extrinsic += q.samples();
  Srvf estimate = sphere_norm(extrinsic) > 1e-6 ? Srvf::normalized(std::move(extrinsic)) : members.front();
  if (config.align_each_iter) {
    // Start the registered iteration from the unregistered mean.
    KarcherConfig plain = config;
    plain.align_each_iter = false;
    estimate = karcher_mean(members, plain).mean;
  }

  KarcherResult best{estimate, 0, std::numeric_limits<double>::infinity(), false};
  const double inv_n = 1.0 / static_cast<double>(members.size());
  for (std::size_t iter = 1; iter <= config.max_iters; ++iter) {
    const TangentChart chart(estimate);
    std::vector<Srvf> current = config.align_each_iter
                                    ? align_set_to_reference(members, estimate, config.threads)
                                    : members;
    Matrix tangent = Matrix::Zero(rows, cols);
    for (const auto& q : current) tangent += log_map(chart, q).samples();
    tangent *= inv_n;
    const double residual = sphere_norm(tangent);
    if (residual < best.residual) best = KarcherResult{estimate, iter, residual, false};
    if (residual < config.tol) {
      best.converged = true;
      return best;
    }
    estimate = exp_map(chart, TangentVector(config.step * tangent));
  }
  return best;
}

}  // namespace srvfgan
