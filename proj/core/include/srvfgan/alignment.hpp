#pragma once

// Rate-invariant registration of SRVFs and Karcher means on the hypersphere.
//
// Discretization: SRVF sample s is the value on the cell [s/N, (s+1)/N] with
// N = T-1 cells. A warping is piecewise linear through N+1 knots at the cell
// boundaries. The group action evaluates sqrt(slope) * q(gamma(center)) per
// cell, interpolating q linearly between cell centers, which makes the dynamic
// programming energy below the exact discrete energy of the warped SRVF.

#include "srvfgan/geometry.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace srvfgan {

/// Monotone reparameterization of [0, 1], sampled at the N+1 cell boundaries.
class Warping {
 public:
  static Warping identity(std::size_t cells);
  /// Validates gamma_0 = 0, gamma_N = 1 and monotonicity.
  static Warping from_knots(std::vector<double> knots);
  /// Piecewise-linear warping through lattice vertices (i, j) -> gamma(i/N) = j/N.
  static Warping from_lattice_path(std::span<const std::pair<std::size_t, std::size_t>> vertices,
                                   std::size_t cells);

  const std::vector<double>& knots() const noexcept { return knots_; }
  std::size_t cells() const noexcept { return knots_.size() - 1; }
  bool is_identity() const;

  /// Piecewise-linear evaluation at t in [0, 1].
  double operator()(double t) const;
  /// Numerical inverse: monotone cubic interpolation of the inverse graph,
  /// resampled on the same knot grid.
  Warping inverse() const;

  friend bool operator==(const Warping&, const Warping&) = default;

 private:
  explicit Warping(std::vector<double> knots) : knots_(std::move(knots)) {}
  std::vector<double> knots_;
};

/// t -> outer(inner(t)), so group_action(group_action(q, outer), inner)
/// approximates group_action(q, compose(outer, inner)).
Warping compose(const Warping& outer, const Warping& inner);

struct AlignResult {
  /// Composition of the accepted passes.
  Warping warping;
  /// The accepted passes applied in turn to q2.
  Srvf aligned;
  /// Geodesic distance between the reference and the aligned SRVF.
  double cost = 0.0;
  /// Lattice energy sum_s |q1_s - sqrt(m) q(gamma)|^2 dt of the last accepted pass.
  double energy = 0.0;
};

struct KarcherConfig {
  double step = 0.5;
  double tol = 1e-8;
  std::size_t max_iters = 100;
  bool align_each_iter = false;
  unsigned threads = 1;

  void validate() const;
};

struct KarcherResult {
  Srvf mean;
  std::size_t iterations = 0;
  /// Norm of the mean tangent vector at the returned point.
  double residual = 0.0;
  bool converged = false;
};

/// (q o gamma) * sqrt(gamma'), renormalized to unit norm.
Srvf group_action(const Srvf& q, const Warping& gamma);

/// Registration of q2 onto q1 by dynamic programming over lattice paths whose
/// segments have slopes b/a with coprime a, b <= detail::kMaxLatticeStep.
/// Passes are repeated on the warped result while they lower the cost.
/// Never returns a cost above geodesic_distance(q1, q2).
AlignResult align(const Srvf& q1, const Srvf& q2);

/// Element-wise align(ref, q_i), returning the warped q_i.
std::vector<Srvf> align_set_to_reference(std::span<const Srvf> set, const Srvf& ref, unsigned threads = 1);

/// Riemannian center of mass by damped gradient steps. The input is put in a
/// canonical order first, so the result does not depend on the caller's order.
/// A non-converged result is still returned, with converged = false and the
/// best iterate seen. With align_each_iter the iteration starts from the
/// unregistered mean and registers the members to the estimate at each step.
KarcherResult karcher_mean(std::span<const Srvf> set, const KarcherConfig& config = {});

/// Sum of squared geodesic distances from `center` to every member.
double frechet_variance(const Srvf& center, std::span<const Srvf> set);

namespace detail {

inline constexpr std::size_t kMaxLatticeStep = 7;

struct LatticeMove {
  std::size_t a;  // cells advanced on the reference
  std::size_t b;  // cells advanced on the warped curve
};

/// Moves in tie-break order: closest to the diagonal first.
std::span<const LatticeMove> lattice_moves();

/// Energy of the straight lattice segment (k, l) -> (i, j).
double segment_energy(const Matrix& q1, const Matrix& q2, std::size_t k, std::size_t l, std::size_t i,
                      std::size_t j);

struct LatticeSolution {
  std::vector<std::pair<std::size_t, std::size_t>> path;
  double energy = 0.0;
};

LatticeSolution solve_lattice(const Matrix& q1, const Matrix& q2);

}  // namespace detail

}  // namespace srvfgan
