#include "srvfgan/geometry.hpp"

#include "srvfgan/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace srvfgan {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                         "x" + std::to_string(b.cols()));
  }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

void LandmarkSequence::validate() const {
  if (frames.size() < 2) {
    throw Error(Errc::TooShort, "sequence '" + id + "' has " + std::to_string(frames.size()) + " frames");
  }
  const std::size_t d = frames.front().size();
  if (d == 0) throw Error(Errc::ShapeMismatch, "sequence '" + id + "' has no landmarks");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != d) {
      throw Error(Errc::ShapeMismatch, "sequence '" + id + "' frame " + std::to_string(t) + " has " +
                                           std::to_string(frames[t].size()) + " landmarks, expected " +
                                           std::to_string(d));
    }
    for (const auto& p : frames[t]) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw Error(Errc::DomainError, "sequence '" + id + "' frame " + std::to_string(t) + " has a non-finite coordinate");
      }
    }
  }
}

RowVector flatten_frame(const Frame& frame) {
  RowVector row(static_cast<Eigen::Index>(2 * frame.size()));
  for (std::size_t j = 0; j < frame.size(); ++j) {
    row(static_cast<Eigen::Index>(2 * j)) = frame[j].x;
    row(static_cast<Eigen::Index>(2 * j + 1)) = frame[j].y;
  }
  return row;
}

Frame unflatten_frame(const RowVector& row) {
  Frame frame(static_cast<std::size_t>(row.size() / 2));
  for (std::size_t j = 0; j < frame.size(); ++j) {
    frame[j] = {row(static_cast<Eigen::Index>(2 * j)), row(static_cast<Eigen::Index>(2 * j + 1))};
  }
  return frame;
}

Curve::Curve(Matrix samples) : samples_(std::move(samples)) {
  if (samples_.rows() < 2) throw Error(Errc::TooShort, "a curve needs at least 2 samples");
  if (samples_.cols() < 2 || samples_.cols() % 2 != 0) {
    throw Error(Errc::ShapeMismatch, "curve samples must have 2d columns, got " + std::to_string(samples_.cols()));
  }
  if (!all_finite(samples_)) throw Error(Errc::DomainError, "curve has non-finite samples");
}

Curve Curve::from_sequence(const LandmarkSequence& seq) {
  seq.validate();
  const auto T = static_cast<Eigen::Index>(seq.num_frames());
  const auto d = static_cast<Eigen::Index>(seq.num_landmarks());
  Matrix m(T, 2 * d);
  for (Eigen::Index t = 0; t < T; ++t) m.row(t) = flatten_frame(seq.frames[static_cast<std::size_t>(t)]);
  return Curve(std::move(m));
}

LandmarkSequence Curve::to_sequence(std::string id, std::optional<std::string> label) const {
  LandmarkSequence seq;
  seq.id = std::move(id);
  seq.label = std::move(label);
  seq.frames.reserve(num_frames());
  for (Eigen::Index t = 0; t < samples_.rows(); ++t) seq.frames.push_back(unflatten_frame(samples_.row(t)));
  return seq;
}

double Curve::path_length() const {
  double total = 0.0;
  for (Eigen::Index k = 0; k + 1 < samples_.rows(); ++k) total += (samples_.row(k + 1) - samples_.row(k)).norm();
  return total;
}

Srvf Srvf::from_samples(Matrix samples) {
  if (samples.rows() < 1 || samples.cols() < 2 || samples.cols() % 2 != 0) {
    throw Error(Errc::ShapeMismatch, "SRVF samples must be (T-1) x 2d");
  }
  if (!all_finite(samples)) throw Error(Errc::DomainError, "SRVF has non-finite samples");
  const double n = sphere_norm(samples);
  if (std::abs(n - 1.0) > tolerances::kUnitNorm) {
    throw Error(Errc::DomainError, "SRVF norm " + std::to_string(n) + " is not 1");
  }
  return Srvf(std::move(samples));
}

Srvf Srvf::normalized(Matrix samples) {
  if (samples.rows() < 1 || samples.cols() < 2 || samples.cols() % 2 != 0) {
    throw Error(Errc::ShapeMismatch, "SRVF samples must be (T-1) x 2d");
  }
  if (!all_finite(samples)) throw Error(Errc::DomainError, "SRVF has non-finite samples");
  const double n = sphere_norm(samples);
  if (!(n > 0.0)) throw Error(Errc::DegenerateCurve, "cannot normalize a zero SRVF");
  samples /= n;
  return Srvf(std::move(samples));
}

TangentVector TangentVector::project(const TangentChart& chart, Matrix raw) {
  const Matrix& y = chart.reference().samples();
  require_same_shape(raw, y, "tangent projection");
  const double c = sphere_inner(raw, y);
  raw -= c * y;
  return TangentVector(std::move(raw));
}

double TangentVector::norm() const { return samples_.size() == 0 ? 0.0 : sphere_norm(samples_); }

Srvf srvf_encode(const Curve& curve) {
  const Matrix& beta = curve.samples();
  const Eigen::Index intervals = beta.rows() - 1;
  const double dt = 1.0 / static_cast<double>(intervals);
  Matrix q(intervals, beta.cols());
  bool moving = false;
  for (Eigen::Index k = 0; k < intervals; ++k) {
    const RowVector delta = beta.row(k + 1) - beta.row(k);
    const double speed = delta.norm();
    if (speed < tolerances::kVelocity) {
      q.row(k).setZero();
    } else {
      q.row(k) = delta / std::sqrt(speed * dt);
      moving = true;
    }
  }
  if (!moving) throw Error(Errc::DegenerateCurve, "curve has no inter-frame motion");
  return Srvf::normalized(std::move(q));
}

Curve srvf_decode(const Srvf& q, const RowVector& initial, double intensity) {
  const Matrix& s = q.samples();
  if (initial.size() != s.cols()) {
    throw Error(Errc::DimensionMismatch, "initial frame has " + std::to_string(initial.size()) +
                                             " coordinates, SRVF expects " + std::to_string(s.cols()));
  }
  if (!initial.allFinite()) throw Error(Errc::DomainError, "initial frame is not finite");
  if (!std::isfinite(intensity)) throw Error(Errc::DomainError, "intensity is not finite");
  const double dt = q.dt();
  Matrix beta(s.rows() + 1, s.cols());
  beta.row(0) = initial;
  // The cumulative displacement is accumulated independently of the intensity
  // so that displacements scale exactly with it.
  RowVector cumulative = RowVector::Zero(s.cols());
  for (Eigen::Index k = 0; k < s.rows(); ++k) {
    cumulative += (s.row(k).norm() * dt) * s.row(k);
    beta.row(k + 1) = initial + intensity * cumulative;
  }
  return Curve(std::move(beta));
}

Curve srvf_decode_to_length(const Srvf& q, const RowVector& initial, double path_length) {
  return srvf_decode(q, initial, path_length);
}

double sphere_inner(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sphere_inner");
  if (a.rows() == 0) throw Error(Errc::ShapeMismatch, "sphere_inner on empty arrays");
  return a.cwiseProduct(b).sum() / static_cast<double>(a.rows());
}

double sphere_norm(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  return std::sqrt(a.squaredNorm() / static_cast<double>(a.rows()));
}

double geodesic_distance(const Srvf& q1, const Srvf& q2) {
  const double c = sphere_inner(q1.samples(), q2.samples());
  // arccos loses half the digits near +-1; the chord form is exact there.
  if (c > 0.9) {
    const double chord = sphere_norm(q1.samples() - q2.samples());
    return 2.0 * std::asin(std::min(1.0, 0.5 * chord));
  }
  if (c < -0.9) {
    const double chord = sphere_norm(q1.samples() + q2.samples());
    return std::numbers::pi - 2.0 * std::asin(std::min(1.0, 0.5 * chord));
  }
  return std::acos(std::clamp(c, -1.0, 1.0));
}

TangentVector log_map(const TangentChart& chart, const Srvf& q) {
  const Srvf& y = chart.reference();
  require_same_shape(q.samples(), y.samples(), "log_map");
  const double theta = geodesic_distance(q, y);
  if (theta >= std::numbers::pi - tolerances::kAntipodal) {
    throw Error(Errc::AntipodalPoint, "log map undefined: point is antipodal to the chart reference");
  }
  if (theta == 0.0) return TangentVector(Matrix::Zero(q.samples().rows(), q.samples().cols()));
  const double c = std::clamp(sphere_inner(q.samples(), y.samples()), -1.0, 1.0);
  Matrix v = q.samples() - c * y.samples();
  if (theta >= tolerances::kSmallAngle) v *= theta / std::sin(theta);
  return TangentVector(std::move(v));
}

Srvf exp_map(const TangentChart& chart, const TangentVector& v) {
  const Srvf& y = chart.reference();
  require_same_shape(v.samples(), y.samples(), "exp_map");
  const double n = v.norm();
  if (n == 0.0) return y;
  // Below the small-angle threshold cos and sin/n are 1 to within n^2; the
  // first-order step y + v keeps tiny updates from being dropped.
  if (n < tolerances::kSmallAngle) return Srvf::normalized(y.samples() + v.samples());
  Matrix out = std::cos(n) * y.samples() + (std::sin(n) / n) * v.samples();
  return Srvf::normalized(std::move(out));
}

Srvf geodesic_interpolate(const Srvf& q1, const Srvf& q2, double s) {
  require_same_shape(q1.samples(), q2.samples(), "geodesic_interpolate");
  if (!(s >= 0.0 && s <= 1.0)) throw Error(Errc::DomainError, "interpolation parameter must lie in [0, 1]");
  const double theta = geodesic_distance(q1, q2);
  if (theta >= std::numbers::pi - tolerances::kAntipodal) {
    throw Error(Errc::AntipodalPoint, "minimal geodesic between antipodal points is not unique");
  }
  if (s == 0.0) return q1;
  if (s == 1.0) return q2;
  if (theta < tolerances::kSmallAngle) {
    return Srvf::normalized((1.0 - s) * q1.samples() + s * q2.samples());
  }
  const double st = std::sin(theta);
  Matrix out = (std::sin((1.0 - s) * theta) / st) * q1.samples() + (std::sin(s * theta) / st) * q2.samples();
  return Srvf::normalized(std::move(out));
}

}  // namespace srvfgan
