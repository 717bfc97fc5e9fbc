#include "srvfgan/evaluation.hpp"

#include "srvfgan/csv.hpp"
#include "srvfgan/error.hpp"
#include "srvfgan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace srvfgan {

namespace {

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* class_colour(std::size_t c) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return kPalette[c % std::size(kPalette)];
}

std::set<std::size_t> distinct(const std::vector<std::size_t>& labels) { return {labels.begin(), labels.end()}; }

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
  writer(out);
  out.flush();
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Distances

DistanceMatrix distance_matrix(const std::vector<Srvf>& set, const std::vector<std::size_t>& labels, bool align_pairs,
                               unsigned threads) {
  if (set.empty()) throw Error(Errc::EmptySet, "distance matrix of an empty set");
  if (labels.size() != set.size()) {
    throw Error(Errc::ShapeMismatch, std::to_string(set.size()) + " elements but " + std::to_string(labels.size()) +
                                         " labels");
  }
  for (const auto& q : set) {
    if (q.samples().rows() != set.front().samples().rows() || q.samples().cols() != set.front().samples().cols()) {
      throw Error(Errc::ShapeMismatch, "distance matrix over SRVFs of different shapes");
    }
  }
  const std::size_t n = set.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    values[k] = align_pairs ? align(set[i], set[j]).cost : geodesic_distance(set[i], set[j]);
  });
  DistanceMatrix d;
  d.values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(pairs[k].first);
    const auto j = static_cast<Eigen::Index>(pairs[k].second);
    const double v = std::clamp(values[k], 0.0, std::numbers::pi);
    d.values(i, j) = v;
    d.values(j, i) = v;
  }
  d.labels = labels;
  return d;
}

Matrix euclidean_distances(const Matrix& points) {
  const auto n = points.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// MDS

SymmetricEigen jacobi_eigen(const Matrix& input, double tol, std::size_t max_sweeps) {
  if (input.rows() != input.cols()) throw Error(Errc::ShapeMismatch, "jacobi_eigen needs a square matrix");
  const Eigen::Index n = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());

  const auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    }
    return std::sqrt(s);
  };

  SymmetricEigen out;
  while (out.sweeps < max_sweeps && off_norm() > tol * scale) {
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  out.vectors.resize(n, n);
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.values.push_back(a(order[k], order[k]));
    out.vectors.col(static_cast<Eigen::Index>(k)) = v.col(order[k]);
  }
  return out;
}

MdsResult classical_mds(const Matrix& distances, std::size_t k) {
  const auto n = distances.rows();
  if (distances.cols() != n) throw Error(Errc::ShapeMismatch, "MDS needs a square distance matrix");
  if (k == 0 || static_cast<std::size_t>(n) < k + 1) {
    throw Error(Errc::ShapeMismatch, "MDS into " + std::to_string(k) + " dimensions needs at least " +
                                         std::to_string(k + 1) + " points, got " + std::to_string(n));
  }
  const Matrix sq = distances.cwiseProduct(distances);
  const RowVector col_mean = sq.colwise().mean();
  const Eigen::VectorXd row_mean = sq.rowwise().mean();
  const double total = sq.mean();
  Matrix b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = -0.5 * (sq(i, j) - row_mean(i) - col_mean(j) + total);
  }
  const SymmetricEigen eig = jacobi_eigen(b);

  MdsResult out;
  out.coords = Matrix::Zero(n, static_cast<Eigen::Index>(k));
  out.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(k));
  out.degenerate = std::all_of(out.eigenvalues.begin(), out.eigenvalues.end(), [](double l) { return l <= 0.0; });
  if (out.degenerate) {
    out.warning = "degenerate spectrum: no positive eigenvalue among the top " + std::to_string(k);
  } else {
    for (std::size_t c = 0; c < k; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      // Eigenvalues at rounding level of the largest one are numerically zero.
      const double lambda = out.eigenvalues[c] > 1e-12 * std::abs(out.eigenvalues[0]) ? out.eigenvalues[c] : 0.0;
      Eigen::VectorXd x = eig.vectors.col(col) * std::sqrt(lambda);
      Eigen::Index arg = 0;
      for (Eigen::Index i = 1; i < n; ++i) {
        if (std::abs(x(i)) > std::abs(x(arg))) arg = i;
      }
      if (x(arg) < 0.0) x = -x;
      out.coords.col(col) = x;
    }
  }
  const Matrix e = euclidean_distances(out.coords);
  double num_sq = 0.0, den_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      num_sq += std::pow(distances(i, j) - e(i, j), 2);
      den_sq += distances(i, j) * distances(i, j);
    }
  }
  out.stress = den_sq > 0.0 ? std::sqrt(num_sq / den_sq) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Separation

double silhouette(const Matrix& d, const std::vector<std::size_t>& labels) {
  const auto n = static_cast<std::size_t>(d.rows());
  if (d.cols() != d.rows() || labels.size() != n) {
    throw Error(Errc::ShapeMismatch, "silhouette needs a square matrix with one label per row");
  }
  const auto classes = distinct(labels);
  if (classes.size() < 2) throw Error(Errc::SingleClass, "silhouette needs at least two classes");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::size_t, std::pair<double, std::size_t>> per_class;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto& acc = per_class[labels[j]];
      acc.first += d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      ++acc.second;
    }
    double a = 0.0;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [c, acc] : per_class) {
      const double m = acc.first / static_cast<double>(acc.second);
      if (c == labels[i]) {
        a = m;
      } else {
        b = std::min(b, m);
      }
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

SeparationReport class_separation(const DistanceMatrix& d, const std::vector<Srvf>& points,
                                  const SeparationOptions& options) {
  const std::size_t n = d.size();
  if (points.size() != n || d.labels.size() != n) {
    throw Error(Errc::ShapeMismatch, "distance matrix, points and labels differ in size");
  }
  const auto present = distinct(d.labels);
  if (present.size() < 2) throw Error(Errc::SingleClass, "class separation needs at least two classes");

  SeparationReport r;
  r.classes = present.size();
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (d.labels[i] == d.labels[j]) {
        intra += v;
        ++n_intra;
      } else {
        inter += v;
        ++n_inter;
      }
    }
  }
  r.intra_mean = n_intra > 0 ? intra / static_cast<double>(n_intra) : 0.0;
  r.inter_mean = n_inter > 0 ? inter / static_cast<double>(n_inter) : 0.0;
  r.silhouette = silhouette(d.values, d.labels);

  const std::size_t max_label = *present.rbegin();
  std::vector<std::optional<Srvf>> means(max_label + 1);
  if (options.class_means) {
    if (options.class_means->size() <= max_label) {
      throw Error(Errc::ShapeMismatch, "no class mean for label " + std::to_string(max_label));
    }
    for (std::size_t c = 0; c < options.class_means->size() && c <= max_label; ++c) {
      means[c] = (*options.class_means)[c];
    }
  } else {
    for (const auto c : present) {
      std::vector<Srvf> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (d.labels[i] == c) members.push_back(points[i]);
      }
      KarcherConfig kc = options.karcher;
      kc.threads = options.threads;
      means[c] = karcher_mean(members, kc).mean;
    }
  }

  r.predicted.resize(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < means.size(); ++c) {
      if (!means[c]) continue;
      const double dist = options.align ? align(*means[c], points[i]).cost : geodesic_distance(*means[c], points[i]);
      if (dist < best) {
        best = dist;
        r.predicted[i] = c;
      }
    }
  });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += r.predicted[i] == d.labels[i] ? 1 : 0;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return r;
}

// ---------------------------------------------------------------------------
// SVG

void write_scatter_svg(std::ostream& out, const Matrix& coords, const std::vector<std::size_t>& labels,
                       const std::vector<std::string>& class_names) {
  if (static_cast<std::size_t>(coords.rows()) != labels.size()) {
    throw Error(Errc::ShapeMismatch, "scatter plot needs one label per point");
  }
  constexpr double kWidth = 640, kHeight = 480, kMargin = 40, kLegend = 150;
  const double plot_w = kWidth - 2 * kMargin - kLegend;
  const double plot_h = kHeight - 2 * kMargin;
  const auto coord = [&](Eigen::Index i, Eigen::Index c) { return c < coords.cols() ? coords(i, c) : 0.0; };

  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    if (i == 0) {
      min_x = max_x = coord(0, 0);
      min_y = max_y = coord(0, 1);
    }
    min_x = std::min(min_x, coord(i, 0));
    max_x = std::max(max_x, coord(i, 0));
    min_y = std::min(min_y, coord(i, 1));
    max_y = std::max(max_y, coord(i, 1));
  }
  // One scale for both axes keeps embedded distances faithful.
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-12});
  const double s = std::min(plot_w, plot_h) / span;
  const double cx = 0.5 * (min_x + max_x), cy = 0.5 * (min_y + max_y);

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
      << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#cccccc\"/>\n"
      << "  <g id=\"points\">\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const double px = kMargin + 0.5 * plot_w + s * (coord(i, 0) - cx);
    const double py = kMargin + 0.5 * plot_h - s * (coord(i, 1) - cy);
    const std::size_t c = labels[static_cast<std::size_t>(i)];
    const std::string name = c < class_names.size() ? class_names[c] : "class " + std::to_string(c);
    out << "    <circle cx=\"" << fixed(px) << "\" cy=\"" << fixed(py) << "\" r=\"4\" fill=\"" << class_colour(c)
        << "\" fill-opacity=\"0.8\"><title>" << i << ": " << xml_escape(name) << "</title></circle>\n";
  }
  out << "  </g>\n  <g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  const double lx = kWidth - kLegend - kMargin / 2;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const double ly = kMargin + 20.0 * static_cast<double>(c);
    out << "    <rect x=\"" << fixed(lx) << "\" y=\"" << fixed(ly) << "\" width=\"12\" height=\"12\" fill=\""
        << class_colour(c) << "\"/>\n"
        << "    <text x=\"" << fixed(lx + 18) << "\" y=\"" << fixed(ly + 10) << "\">" << xml_escape(class_names[c])
        << "</text>\n";
  }
  out << "  </g>\n</svg>\n";
}

void export_scatter_svg(const Matrix& coords, const std::vector<std::size_t>& labels,
                        const std::vector<std::string>& class_names, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& out) { write_scatter_svg(out, coords, labels, class_names); });
}

void write_landmark_frames_svg(std::ostream& out, const LandmarkSequence& seq) {
  seq.validate();
  constexpr double kCell = 160, kPad = 12, kCaption = 18;
  constexpr std::size_t kPerRow = 8;
  const std::size_t frames = seq.num_frames();
  const std::size_t cols = std::min(frames, kPerRow);
  const std::size_t rows = (frames + kPerRow - 1) / kPerRow;

  double min_x = seq.frames[0][0].x, max_x = min_x, min_y = seq.frames[0][0].y, max_y = min_y;
  for (const auto& f : seq.frames) {
    for (const auto& p : f) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-12});
  const double s = (kCell - 2 * kPad - kCaption) / span;
  const double width = kCell * static_cast<double>(cols);
  const double height = kCell * static_cast<double>(rows);

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  if (!seq.id.empty()) out << "  <title>" << xml_escape(seq.id) << "</title>\n";
  for (std::size_t t = 0; t < frames; ++t) {
    const double ox = kCell * static_cast<double>(t % kPerRow);
    const double oy = kCell * static_cast<double>(t / kPerRow);
    out << "  <g id=\"frame-" << t << "\">\n"
        << "    <rect x=\"" << fixed(ox + 2) << "\" y=\"" << fixed(oy + 2) << "\" width=\"" << kCell - 4
        << "\" height=\"" << kCell - 4 << "\" fill=\"none\" stroke=\"#dddddd\"/>\n";
    for (const auto& p : seq.frames[t]) {
      // Image convention: y grows downwards, as in landmark pixel coordinates.
      const double px = ox + kPad + s * (p.x - min_x);
      const double py = oy + kPad + s * (p.y - min_y);
      out << "    <circle cx=\"" << fixed(px) << "\" cy=\"" << fixed(py) << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
    }
    out << "    <text x=\"" << fixed(ox + kCell / 2) << "\" y=\"" << fixed(oy + kCell - 8)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">frame " << t << "</text>\n"
        << "  </g>\n";
  }
  out << "</svg>\n";
}

void export_landmark_frames_svg(const LandmarkSequence& seq, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& out) { write_landmark_frames_svg(out, seq); });
}

// ---------------------------------------------------------------------------
// CSV

void write_distance_csv(std::ostream& out, const DistanceMatrix& d, const std::vector<std::string>& names) {
  if (names.size() != d.size()) throw Error(Errc::ShapeMismatch, "one name per distance-matrix row required");
  csv::Record header{""};
  header.insert(header.end(), names.begin(), names.end());
  csv::write_record(out, header);
  for (std::size_t i = 0; i < d.size(); ++i) {
    csv::Record row{names[i]};
    for (std::size_t j = 0; j < d.size(); ++j) {
      row.push_back(num(d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
    csv::write_record(out, row);
  }
}

void write_coords_csv(std::ostream& out, const Matrix& coords, const std::vector<std::size_t>& labels,
                      const std::vector<std::string>& class_names) {
  if (static_cast<std::size_t>(coords.rows()) != labels.size()) {
    throw Error(Errc::ShapeMismatch, "one label per embedded point required");
  }
  csv::Record header{"index", "label"};
  static constexpr const char* kAxes[] = {"x", "y", "z"};
  for (Eigen::Index c = 0; c < coords.cols(); ++c) {
    header.push_back(c < 3 ? kAxes[c] : "c" + std::to_string(c));
  }
  csv::write_record(out, header);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const std::size_t c = labels[static_cast<std::size_t>(i)];
    csv::Record row{std::to_string(i), c < class_names.size() ? class_names[c] : std::to_string(c)};
    for (Eigen::Index k = 0; k < coords.cols(); ++k) row.push_back(num(coords(i, k)));
    csv::write_record(out, row);
  }
}

void write_report_csv(std::ostream& out, const SeparationReport& r) {
  csv::write_record(out, {"metric", "value"});
  csv::write_record(out, {"classes", std::to_string(r.classes)});
  csv::write_record(out, {"intra_mean", num(r.intra_mean)});
  csv::write_record(out, {"inter_mean", num(r.inter_mean)});
  csv::write_record(out, {"silhouette", num(r.silhouette)});
  csv::write_record(out, {"accuracy", num(r.accuracy)});
}

}  // namespace srvfgan
