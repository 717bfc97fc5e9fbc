#pragma once

#include "srvfgan/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace srvfgan::testing {

/// Smooth random landmark trajectory: a few random Fourier modes per coordinate.
inline Curve random_smooth_curve(std::mt19937_64& rng, std::size_t frames, std::size_t landmarks,
                                 std::size_t modes = 3) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Matrix m(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(2 * landmarks));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double offset = 5.0 * normal(rng);
    std::vector<double> amp(modes), ph(modes);
    for (std::size_t k = 0; k < modes; ++k) {
      amp[k] = normal(rng) / static_cast<double>(k + 1);
      ph[k] = phase(rng);
    }
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      const double s = static_cast<double>(t) / static_cast<double>(frames - 1);
      double v = offset;
      for (std::size_t k = 0; k < modes; ++k) {
        v += amp[k] * std::sin(static_cast<double>(k + 1) * std::numbers::pi * s + ph[k]);
      }
      m(t, c) = v;
    }
  }
  return Curve(std::move(m));
}

/// Expression-like landmark motion: each landmark moves from its rest position
/// along a random direction with a smooth onset profile, plus a weaker
/// orthogonal bump. Velocity never vanishes inside the sequence.
inline Curve random_motion_curve(std::mt19937_64& rng, std::size_t frames, std::size_t landmarks) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(2 * landmarks));
  for (std::size_t j = 0; j < landmarks; ++j) {
    const double x0 = 10.0 * normal(rng);
    const double y0 = 10.0 * normal(rng);
    const double phi = angle(rng);
    const double amp = 2.0 + 2.0 * unit(rng);
    const double side = 0.5 * normal(rng);
    const double skew = 0.6 * (unit(rng) - 0.5);
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      const double s = static_cast<double>(t) / static_cast<double>(frames - 1);
      const double onset = s + skew * s * (1.0 - s);
      const double along = amp * onset;
      const double across = side * std::sin(std::numbers::pi * s);
      m(t, static_cast<Eigen::Index>(2 * j)) = x0 + along * std::cos(phi) - across * std::sin(phi);
      m(t, static_cast<Eigen::Index>(2 * j + 1)) = y0 + along * std::sin(phi) + across * std::cos(phi);
    }
  }
  return Curve(std::move(m));
}

inline Srvf random_motion_srvf(std::mt19937_64& rng, std::size_t frames = 16, std::size_t landmarks = 2) {
  return srvf_encode(random_motion_curve(rng, frames, landmarks));
}

inline Srvf random_srvf(std::mt19937_64& rng, std::size_t frames = 16, std::size_t landmarks = 2) {
  return srvf_encode(random_smooth_curve(rng, frames, landmarks));
}

/// Unit-norm SRVF-shaped array with i.i.d. Gaussian entries (not smooth).
inline Srvf random_sphere_point(std::mt19937_64& rng, std::size_t intervals, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(intervals), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return Srvf::normalized(std::move(m));
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace srvfgan::testing
