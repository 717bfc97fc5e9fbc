#pragma once

// Discrete square-root velocity functions (SRVFs) and the Riemannian toolbox
// of the unit Hilbert hypersphere they live on.
//
// A landmark sequence of T frames with d points is flattened into a curve of
// T samples in R^(2d). Its SRVF has one sample per inter-frame interval
// (T-1 samples) and unit norm under the dt-weighted inner product
// <a, b> = sum_k <a_k, b_k> * dt with dt = 1 / (T-1).

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace srvfgan {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

namespace tolerances {
/// Inter-frame displacements below this norm are treated as zero velocity.
inline constexpr double kVelocity = 1e-12;
/// Below this angle or tangent norm the first-order branch of log/exp is used.
inline constexpr double kSmallAngle = 1e-7;
/// The log map is undefined within this distance of the antipode.
inline constexpr double kAntipodal = 1e-6;
/// Allowed deviation of an SRVF's discrete L2 norm from 1.
inline constexpr double kUnitNorm = 1e-9;
}  // namespace tolerances

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

using Frame = std::vector<Point2>;

/// T frames of d 2-D landmarks.
struct LandmarkSequence {
  std::string id;
  std::optional<std::string> label;
  std::optional<double> fps;
  std::vector<Frame> frames;

  std::size_t num_frames() const noexcept { return frames.size(); }
  std::size_t num_landmarks() const noexcept { return frames.empty() ? 0 : frames.front().size(); }

  /// Throws ShapeMismatch / DomainError / TooShort when the invariants are violated.
  void validate() const;

  friend bool operator==(const LandmarkSequence&, const LandmarkSequence&) = default;
};

RowVector flatten_frame(const Frame& frame);
Frame unflatten_frame(const RowVector& row);

/// T samples in R^(2d), uniformly spaced on [0, 1].
class Curve {
 public:
  explicit Curve(Matrix samples);

  static Curve from_sequence(const LandmarkSequence& seq);
  LandmarkSequence to_sequence(std::string id = {}, std::optional<std::string> label = {}) const;

  const Matrix& samples() const noexcept { return samples_; }
  std::size_t num_frames() const noexcept { return static_cast<std::size_t>(samples_.rows()); }
  std::size_t num_landmarks() const noexcept { return static_cast<std::size_t>(samples_.cols()) / 2; }
  RowVector frame(std::size_t k) const { return samples_.row(static_cast<Eigen::Index>(k)); }

  /// Sum of inter-frame displacement norms.
  double path_length() const;

 private:
  Matrix samples_;
};

/// Unit-norm discretized SRVF: (T-1) x 2d samples.
class Srvf {
 public:
  /// Wraps samples that already have unit norm (within tolerances::kUnitNorm).
  static Srvf from_samples(Matrix samples);
  /// Rescales arbitrary samples to unit norm. Throws DegenerateCurve on a zero input.
  static Srvf normalized(Matrix samples);

  const Matrix& samples() const noexcept { return samples_; }
  std::size_t num_intervals() const noexcept { return static_cast<std::size_t>(samples_.rows()); }
  std::size_t num_frames() const noexcept { return num_intervals() + 1; }
  std::size_t num_landmarks() const noexcept { return static_cast<std::size_t>(samples_.cols()) / 2; }
  double dt() const noexcept { return 1.0 / static_cast<double>(samples_.rows()); }

  friend bool operator==(const Srvf& a, const Srvf& b) { return a.samples_ == b.samples_; }

 private:
  explicit Srvf(Matrix samples) : samples_(std::move(samples)) {}
  Matrix samples_;
};

/// The point y at which tangent vectors are taken.
class TangentChart {
 public:
  explicit TangentChart(Srvf reference) : reference_(std::move(reference)) {}
  const Srvf& reference() const noexcept { return reference_; }

 private:
  Srvf reference_;
};

/// Element of the tangent space at a chart's reference point.
class TangentVector {
 public:
  TangentVector() = default;
  explicit TangentVector(Matrix samples) : samples_(std::move(samples)) {}

  /// Removes the component along the chart reference.
  static TangentVector project(const TangentChart& chart, Matrix raw);

  const Matrix& samples() const noexcept { return samples_; }
  double norm() const;

 private:
  Matrix samples_;
};

/// Forward-difference SRVF of a curve, rescaled to unit discrete norm.
Srvf srvf_encode(const Curve& curve);

/// Cumulative sum of intensity * |q_k| q_k dt starting from `initial`.
Curve srvf_decode(const Srvf& q, const RowVector& initial, double intensity = 1.0);

/// Decodes and rescales displacements so the decoded path has the given length.
/// A unit-norm SRVF decodes to a path of length exactly 1, so this is
/// srvf_decode with intensity = path_length.
Curve srvf_decode_to_length(const Srvf& q, const RowVector& initial, double path_length);

/// dt-weighted inner product of two SRVF-shaped arrays (dt = 1 / rows).
double sphere_inner(const Matrix& a, const Matrix& b);
double sphere_norm(const Matrix& a);

/// Arc length between two points of the hypersphere, in [0, pi].
double geodesic_distance(const Srvf& q1, const Srvf& q2);

TangentVector log_map(const TangentChart& chart, const Srvf& q);
Srvf exp_map(const TangentChart& chart, const TangentVector& v);

/// Point at fraction s along the minimal geodesic from q1 to q2.
Srvf geodesic_interpolate(const Srvf& q1, const Srvf& q2, double s);

}  // namespace srvfgan
