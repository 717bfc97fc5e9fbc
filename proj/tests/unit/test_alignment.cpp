#include "doctest.h"
#include "alignment_support.hpp"
#include "test_support.hpp"

#include "srvfgan/alignment.hpp"
#include "srvfgan/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

using namespace srvfgan;
using srvfgan::testing::max_abs_diff;

namespace {

// Discrete energy of an unnormalized warped SRVF, computed directly.
double warped_energy(const Matrix& q1, const Matrix& q2, const Warping& gamma) {
  const auto n = q1.rows();
  const auto& g = gamma.knots();
  double total = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const double slope = (g[c + 1] - g[c]) * n;
    const double x = std::clamp(0.5 * (g[c] + g[c + 1]) * n - 0.5, -0.5, n - 0.5);
    const auto i0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(x)), 0, n - 2);
    const double f = x - i0;
    const RowVector w = std::sqrt(slope) * ((1 - f) * q2.row(i0) + f * q2.row(i0 + 1));
    total += (q1.row(c) - w).squaredNorm() / n;
  }
  return total;
}

}  // namespace

TEST_CASE("warping validation and identity") {
  CHECK(Warping::identity(5).is_identity());
  CHECK_THROWS_AS(Warping::from_knots({0.0, 0.6, 0.5, 1.0}), Error);
  CHECK_THROWS_AS(Warping::from_knots({0.1, 0.6, 1.0}), Error);
  const Warping w = Warping::from_knots({0.0, 0.1, 0.5, 1.0});
  CHECK(w(0.5) == doctest::Approx(0.3));
  CHECK(Warping::identity(7).inverse().is_identity());

  // Knots of gamma(t) = expm1(a t) / expm1(a) against the closed-form inverse.
  const double a = 0.9;
  std::vector<double> knots(32);
  for (std::size_t k = 0; k < knots.size(); ++k) knots[k] = std::expm1(a * static_cast<double>(k) / 31.0) / std::expm1(a);
  knots.back() = 1.0;
  const Warping inv = Warping::from_knots(knots).inverse();
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const double t = static_cast<double>(k) / 31.0;
    CHECK(std::abs(inv.knots()[k] - std::log1p(t * std::expm1(a)) / a) <= 1e-5);
  }
}

TEST_CASE("group action: identity, unit norm, inverse round trip") {
  std::mt19937_64 rng(101);
  const Srvf q = srvfgan::testing::random_motion_srvf(rng, 32, 2);
  CHECK(max_abs_diff(group_action(q, Warping::identity(31)).samples(), q.samples()) <= 1e-9);

  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Warping gamma = srvfgan::testing::smooth_warp(rng, 31);
    const Srvf warped = group_action(q, gamma);
    CHECK(std::abs(sphere_norm(warped.samples()) - 1.0) <= 1e-9);
    const Srvf back = group_action(warped, gamma.inverse());
    worst = std::max(worst, max_abs_diff(back.samples(), q.samples()));
  }
  MESSAGE("worst inverse round-trip error: " << worst);
  CHECK(worst <= 2e-3);
}

TEST_CASE("lattice energy equals the discrete energy of the warped SRVF") {
  std::mt19937_64 rng(103);
  const Srvf q1 = srvfgan::testing::random_srvf(rng, 20, 2);
  const Srvf q2 = srvfgan::testing::random_srvf(rng, 20, 2);
  const auto sol = detail::solve_lattice(q1.samples(), q2.samples());
  const Warping gamma = Warping::from_lattice_path(sol.path, 19);
  CHECK(warped_energy(q1.samples(), q2.samples(), gamma) == doctest::Approx(sol.energy).epsilon(1e-12));
}

TEST_CASE("dynamic programming equals exhaustive lattice search for T <= 8") {
  std::mt19937_64 rng(107);
  for (std::size_t frames = 3; frames <= 8; ++frames) {
    for (int trial = 0; trial < 10; ++trial) {
      const Srvf q1 = srvfgan::testing::random_srvf(rng, frames, 2);
      const Srvf q2 = srvfgan::testing::random_srvf(rng, frames, 2);
      const auto sol = detail::solve_lattice(q1.samples(), q2.samples());
      REQUIRE(sol.energy == srvfgan::testing::exhaustive_min_energy(q1.samples(), q2.samples()));
    }
  }
}

TEST_CASE("self alignment is the identity with zero cost") {
  std::mt19937_64 rng(109);
  const Srvf q = srvfgan::testing::random_srvf(rng, 32, 3);
  const AlignResult r = align(q, q);
  CHECK(r.warping.is_identity());
  CHECK(r.cost == 0.0);
  CHECK(r.aligned == q);
}

TEST_CASE("alignment never increases distance") {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 200; ++trial) {
    const Srvf q1 = srvfgan::testing::random_srvf(rng, 16, 2);
    const Srvf q2 = srvfgan::testing::random_srvf(rng, 16, 2);
    const AlignResult r = align(q1, q2);
    REQUIRE(r.cost <= geodesic_distance(q1, q2) + 1e-9);
    REQUIRE(r.cost == doctest::Approx(geodesic_distance(q1, r.aligned)).epsilon(1e-12));
  }
}

TEST_CASE("alignment recovers a synthetic warp") {
  std::mt19937_64 rng(127);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Srvf q1 = srvfgan::testing::random_motion_srvf(rng, 32, 2);
    const Srvf q2 = group_action(q1, srvfgan::testing::smooth_warp(rng, 31));
    const AlignResult r = align(q1, q2);
    worst = std::max(worst, r.cost);
  }
  MESSAGE("worst warp-recovery residual: " << worst);
  CHECK(worst <= 0.05);
}

TEST_CASE("simultaneous warping leaves the alignment cost unchanged") {
  std::mt19937_64 rng(131);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    // Two members of one motion class: a shared base plus small distinct motions.
    const Curve base = srvfgan::testing::random_motion_curve(rng, 32, 2);
    auto member = [&] {
      Matrix extra = srvfgan::testing::random_motion_curve(rng, 32, 2).samples();
      extra.rowwise() -= RowVector(extra.row(0));
      return srvf_encode(Curve(base.samples() + 0.2 * extra));
    };
    const Srvf q1 = member();
    const Srvf q2 = member();
    const Warping gamma = srvfgan::testing::smooth_warp(rng, 31);
    const double before = align(q1, q2).cost;
    const double after = align(group_action(q1, gamma), group_action(q2, gamma)).cost;
    worst = std::max(worst, std::abs(before - after));
  }
  MESSAGE("worst simultaneous-warp difference: " << worst);
  CHECK(worst <= 2e-3);
}

TEST_CASE("align_set_to_reference") {
  std::mt19937_64 rng(137);
  const Srvf ref = srvfgan::testing::random_srvf(rng, 24, 2);
  std::vector<Srvf> set{ref};
  for (int i = 0; i < 12; ++i) set.push_back(srvfgan::testing::random_srvf(rng, 24, 2));

  const auto once = align_set_to_reference(set, ref);
  CHECK(once[0] == ref);
  double worst_change = 0.0;
  const auto twice = align_set_to_reference(once, ref);
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(geodesic_distance(ref, once[i]) <= geodesic_distance(ref, set[i]) + 1e-12);
    worst_change = std::max(worst_change, std::abs(geodesic_distance(ref, twice[i]) - geodesic_distance(ref, once[i])));
  }
  MESSAGE("worst re-alignment change: " << worst_change);
  CHECK(worst_change <= 1e-6);

  const auto threaded = align_set_to_reference(set, ref, 4);
  for (std::size_t i = 0; i < set.size(); ++i) CHECK(threaded[i] == once[i]);
}

TEST_CASE("Karcher mean: fixed point, midpoint, Frechet optimality") {
  std::mt19937_64 rng(139);
  const Srvf q = srvfgan::testing::random_srvf(rng, 12, 2);
  const std::vector<Srvf> triple{q, q, q};
  const KarcherResult fixed = karcher_mean(triple);
  CHECK(fixed.converged);
  CHECK(max_abs_diff(fixed.mean.samples(), q.samples()) <= 1e-9);

  const Srvf a = srvfgan::testing::random_srvf(rng, 12, 2);
  const Srvf b = srvfgan::testing::random_srvf(rng, 12, 2);
  const std::vector<Srvf> pair{a, b};
  const KarcherResult mid = karcher_mean(pair);
  CHECK(std::abs(geodesic_distance(mid.mean, a) - geodesic_distance(mid.mean, b)) <= 1e-6);
  CHECK(geodesic_distance(mid.mean, geodesic_interpolate(a, b, 0.5)) <= 1e-6);

  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Srvf> set;
    for (int i = 0; i < 8; ++i) set.push_back(srvfgan::testing::random_srvf(rng, 12, 2));
    const KarcherResult r = karcher_mean(set);
    REQUIRE(r.converged);
    const double at_mean = frechet_variance(r.mean, set);
    for (const auto& member : set) REQUIRE(at_mean <= frechet_variance(member, set));
  }
}

TEST_CASE("Karcher mean is permutation invariant and validates input") {
  std::mt19937_64 rng(149);
  std::vector<Srvf> set;
  for (int i = 0; i < 6; ++i) set.push_back(srvfgan::testing::random_srvf(rng, 10, 2));
  const KarcherResult r1 = karcher_mean(set);
  std::vector<Srvf> shuffled = set;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::reverse(shuffled.begin(), shuffled.end());
  const KarcherResult r2 = karcher_mean(shuffled);
  CHECK(r1.mean == r2.mean);

  KarcherConfig aligned;
  aligned.align_each_iter = true;
  const KarcherResult r3 = karcher_mean(set, aligned);
  const KarcherResult r4 = karcher_mean(shuffled, aligned);
  CHECK(r3.mean == r4.mean);

  CHECK_THROWS_AS(karcher_mean(std::vector<Srvf>{}), Error);
  KarcherConfig bad;
  bad.step = 1.5;
  CHECK_THROWS_AS(karcher_mean(set, bad), Error);
}
