#pragma once

// Geodesic evaluation of motion sets: pairwise distances, classical MDS,
// class-separation statistics, SVG plots and CSV reports.

#include "srvfgan/alignment.hpp"
#include "srvfgan/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace srvfgan {

struct DistanceMatrix {
  /// N x N, zero diagonal, exactly symmetric, entries in [0, pi].
  Matrix values;
  /// Class index of each element.
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

/// Pairwise geodesic distances, each pair computed once. With `align` the
/// distance is the registered cost of align(q_i, q_j). ShapeMismatch on mixed
/// shapes or a label count that differs from the set; EmptySet for no input.
DistanceMatrix distance_matrix(const std::vector<Srvf>& set, const std::vector<std::size_t>& labels, bool align,
                               unsigned threads = 1);

/// Euclidean distances between the rows of `points`.
Matrix euclidean_distances(const Matrix& points);

struct SymmetricEigen {
  /// Descending.
  std::vector<double> values;
  /// Columns are unit eigenvectors in the order of `values`.
  Matrix vectors;
  std::size_t sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is at most
/// `tol` times the matrix norm, or `max_sweeps`. ShapeMismatch if not square.
SymmetricEigen jacobi_eigen(const Matrix& a, double tol = 1e-12, std::size_t max_sweeps = 100);

struct MdsResult {
  /// N x k. Each column's largest-magnitude entry is positive.
  Matrix coords;
  /// Top-k eigenvalues of -1/2 J D^2 J, descending.
  std::vector<double> eigenvalues;
  /// Kruskal stress-1 of the embedded distances against D.
  double stress = 0.0;
  /// All top-k eigenvalues <= 0; coords are then zero.
  bool degenerate = false;
  std::string warning;
};

/// Torgerson MDS. ShapeMismatch unless N >= k + 1.
MdsResult classical_mds(const Matrix& distances, std::size_t k = 2);

/// Mean silhouette over all points. A point alone in its class has
/// a = 0 and scores 1 when other classes exist. SingleClass for < 2 classes.
double silhouette(const Matrix& distances, const std::vector<std::size_t>& labels);

struct SeparationReport {
  double intra_mean = 0.0;
  double inter_mean = 0.0;
  double silhouette = 0.0;
  double accuracy = 0.0;
  /// Nearest-class-mean prediction of each point.
  std::vector<std::size_t> predicted;
  std::size_t classes = 0;
};

struct SeparationOptions {
  /// Class representatives. When absent each class's Karcher mean is used.
  std::optional<std::vector<Srvf>> class_means;
  KarcherConfig karcher{};
  /// Register each point to a class mean before measuring the distance.
  bool align = false;
  unsigned threads = 1;
};

/// Statistics of geodesic distances (not embedded ones). SingleClass when
/// fewer than two classes are present; ShapeMismatch on inconsistent sizes.
SeparationReport class_separation(const DistanceMatrix& d, const std::vector<Srvf>& points,
                                  const SeparationOptions& options = {});

/// One circle per point, one colour per class, with a legend. IoError on
/// write failure.
void export_scatter_svg(const Matrix& coords, const std::vector<std::size_t>& labels,
                        const std::vector<std::string>& class_names, const std::filesystem::path& path);
void write_scatter_svg(std::ostream& out, const Matrix& coords, const std::vector<std::size_t>& labels,
                       const std::vector<std::string>& class_names);

/// Frames side by side as point sets, each with its index as a caption.
void export_landmark_frames_svg(const LandmarkSequence& seq, const std::filesystem::path& path);
void write_landmark_frames_svg(std::ostream& out, const LandmarkSequence& seq);

/// Header "", name_0, ...; one row per element. Values at round-trip precision.
void write_distance_csv(std::ostream& out, const DistanceMatrix& d, const std::vector<std::string>& names);
/// Header index,label,x,y,...
void write_coords_csv(std::ostream& out, const Matrix& coords, const std::vector<std::size_t>& labels,
                      const std::vector<std::string>& class_names);
/// Two columns: metric,value.
void write_report_csv(std::ostream& out, const SeparationReport& report);

}  // namespace srvfgan
