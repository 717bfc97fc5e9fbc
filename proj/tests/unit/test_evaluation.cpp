#include "srvfgan/csv.hpp"
#include "srvfgan/dataset.hpp"
#include "srvfgan/error.hpp"
#include "srvfgan/evaluation.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace srvfgan;
using srvfgan::testing::max_abs_diff;

namespace {

const PreparedDataset& small_data() {
  static const PreparedDataset data = [] {
    SynthSpec spec;
    spec.per_class = 10;
    spec.frames = 12;
    PrepareConfig pc;
    pc.frames = 12;
    return prepare(synth_corpus(spec, 21), pc);
  }();
  return data;
}

std::vector<std::size_t> label_indices(const PreparedDataset& data) {
  std::vector<std::size_t> out;
  for (const auto& l : data.labels) out.push_back(l.index);
  return out;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<csv::Record> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::vector<csv::Record> out;
  for (auto& r : csv::parse(in)) out.push_back(std::move(r.fields));
  return out;
}

Matrix line_distances(const std::vector<double>& xs) {
  Matrix p(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) p(static_cast<Eigen::Index>(i), 0) = xs[i];
  return euclidean_distances(p);
}

}  // namespace

TEST_CASE("distance matrix structure") {
  std::mt19937_64 rng(4);
  std::vector<Srvf> set;
  for (int i = 0; i < 5; ++i) set.push_back(testing::random_motion_srvf(rng, 12, 2));
  set.push_back(set[1]);
  const std::vector<std::size_t> labels{0, 0, 1, 1, 2, 0};

  const auto d = distance_matrix(set, labels, false);
  REQUIRE(d.size() == 6);
  CHECK(d.labels == labels);
  CHECK(d.values == d.values.transpose());
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) == 0.0);
    for (std::size_t j = 0; j < 6; ++j) {
      const double v = d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      CHECK(v >= 0.0);
      CHECK(v <= std::numbers::pi);
      if (i != j) CHECK(v == geodesic_distance(set[i], set[j]));
    }
  }
  CHECK(d.values(1, 5) == 0.0);

  const auto aligned = distance_matrix(set, labels, true);
  CHECK((aligned.values.array() <= d.values.array() + 1e-12).all());
  CHECK(aligned.values == aligned.values.transpose());

  SUBCASE("threads do not change the result") {
    CHECK(distance_matrix(set, labels, true, 3).values == aligned.values);
  }
  SUBCASE("one element") {
    const auto one = distance_matrix({set[0]}, {0}, true);
    CHECK(one.size() == 1);
    CHECK(one.values(0, 0) == 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(distance_matrix({}, {}, false), Error);
    try {
      distance_matrix(set, {0, 1}, false);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ShapeMismatch);
    }
    try {
      distance_matrix({set[0], testing::random_motion_srvf(rng, 10, 2)}, {0, 1}, false);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ShapeMismatch);
    }
  }
}

TEST_CASE("jacobi eigen agrees with a library solver") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const int n : {1, 2, 5, 17}) {
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    a = (a + a.transpose()).eval();
    const auto eig = jacobi_eigen(a);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(a);
    REQUIRE(eig.values.size() == static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      CHECK(eig.values[static_cast<std::size_t>(k)] == doctest::Approx(ref.eigenvalues()(n - 1 - k)).epsilon(1e-10));
      const Eigen::VectorXd v = eig.vectors.col(k);
      CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK((a * v - eig.values[static_cast<std::size_t>(k)] * v).norm() < 1e-9);
    }
    CHECK(std::is_sorted(eig.values.rbegin(), eig.values.rend()));
    CHECK(max_abs_diff(eig.vectors.transpose() * eig.vectors, Matrix::Identity(n, n)) < 1e-10);
  }
  CHECK_THROWS_AS(jacobi_eigen(Matrix::Zero(2, 3)), Error);
}

TEST_CASE("classical MDS") {
  SUBCASE("planted planar configuration is reproduced") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix p(20, 2);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = normal(rng);
    const auto mds = classical_mds(euclidean_distances(p));
    CHECK_FALSE(mds.degenerate);
    CHECK(mds.stress < 1e-8);
    CHECK(max_abs_diff(euclidean_distances(mds.coords), euclidean_distances(p)) < 1e-8);
    // Eigenvalues equal the squared singular values of the centred points.
    const Matrix centred = p.rowwise() - p.colwise().mean();
    Eigen::JacobiSVD<Matrix> svd(centred);
    CHECK(mds.eigenvalues[0] == doctest::Approx(std::pow(svd.singularValues()(0), 2)).epsilon(1e-9));
    CHECK(mds.eigenvalues[1] == doctest::Approx(std::pow(svd.singularValues()(1), 2)).epsilon(1e-9));
    for (Eigen::Index c = 0; c < 2; ++c) {
      Eigen::Index arg = 0;
      mds.coords.col(c).cwiseAbs().maxCoeff(&arg);
      CHECK(mds.coords(arg, c) > 0.0);
      CHECK(std::abs(mds.coords.col(c).sum()) < 1e-9);
    }
  }
  SUBCASE("equilateral triangle") {
    Matrix d = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
    const auto mds = classical_mds(d);
    CHECK(mds.eigenvalues[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mds.eigenvalues[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(max_abs_diff(euclidean_distances(mds.coords), d) < 1e-10);
    CHECK(mds.stress < 1e-10);
  }
  SUBCASE("duplicate points land together") {
    const Matrix d = line_distances({0.0, 1.0, 1.0, 3.0});
    const auto mds = classical_mds(d);
    CHECK((mds.coords.row(1) - mds.coords.row(2)).norm() < 1e-10);
    CHECK(mds.stress < 1e-10);
  }
  SUBCASE("non-Euclidean input has positive stress") {
    Matrix d(4, 4);
    d << 0, 1, 1, 1,  //
        1, 0, 1, 1,   //
        1, 1, 0, 1,   //
        1, 1, 1, 0;
    const auto mds = classical_mds(d);
    CHECK(mds.stress > 0.05);
    CHECK(mds.stress < 1.0);
  }
  SUBCASE("degenerate spectrum") {
    const auto mds = classical_mds(Matrix::Zero(4, 4));
    CHECK(mds.degenerate);
    CHECK_FALSE(mds.warning.empty());
    CHECK(mds.coords.isZero());
  }
  SUBCASE("too few points") {
    try {
      classical_mds(Matrix::Zero(2, 2), 2);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ShapeMismatch);
    }
    CHECK_THROWS_AS(classical_mds(Matrix::Zero(3, 4)), Error);
  }
}

TEST_CASE("silhouette") {
  const Matrix d = line_distances({0.0, 1.0, 10.0, 11.0});
  const double expected = 0.5 * (9.5 / 10.5 + 8.5 / 9.5);
  CHECK(silhouette(d, {0, 0, 1, 1}) == doctest::Approx(expected).epsilon(1e-14));
  // Only the partition matters.
  CHECK(silhouette(d, {7, 7, 2, 2}) == doctest::Approx(expected).epsilon(1e-14));
  // Swapped assignment scores negative.
  CHECK(silhouette(d, {0, 1, 0, 1}) < 0.0);

  SUBCASE("singleton scores one") {
    const Matrix s = line_distances({0.0, 10.0, 11.0});
    const double point1 = (10.0 - 1.0) / 10.0;
    const double point2 = (11.0 - 1.0) / 11.0;
    CHECK(silhouette(s, {0, 1, 1}) == doctest::Approx((1.0 + point1 + point2) / 3.0).epsilon(1e-14));
  }
  SUBCASE("errors") {
    try {
      silhouette(d, {0, 0, 0, 0});
      FAIL("expected SingleClass");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::SingleClass);
    }
    CHECK_THROWS_AS(silhouette(d, {0, 1}), Error);
  }
}

TEST_CASE("class separation") {
  const auto& data = small_data();
  const auto labels = label_indices(data);
  const auto d = distance_matrix(data.srvfs, labels, false);

  SUBCASE("separated synthetic classes") {
    SeparationOptions opts;
    opts.class_means = data.class_means;
    const auto r = class_separation(d, data.srvfs, opts);
    CHECK(r.classes == 2);
    CHECK(r.intra_mean < r.inter_mean);
    CHECK(r.silhouette > 0.0);
    CHECK(r.accuracy == 1.0);
    CHECK(r.predicted == labels);
    CHECK(r.silhouette == silhouette(d.values, labels));

    // Karcher means computed on the fly give the same verdict.
    const auto own = class_separation(d, data.srvfs);
    CHECK(own.accuracy == 1.0);
  }
  SUBCASE("singleton classes are predicted correctly") {
    std::vector<Srvf> pts{data.srvfs[0], data.srvfs[data.size() - 1]};
    const auto pd = distance_matrix(pts, {labels[0], labels.back()}, false);
    const auto r = class_separation(pd, pts);
    CHECK(r.accuracy == 1.0);
    CHECK(r.silhouette == 1.0);
    CHECK(r.intra_mean == 0.0);
  }
  SUBCASE("labels independent of the points score near chance") {
    SynthSpec spec;
    spec.per_class = 64;
    spec.frames = 12;
    PrepareConfig pc;
    pc.frames = 12;
    pc.class_karcher.max_iters = 20;
    const auto fresh = prepare(synth_corpus(spec, 22), pc);
    auto shuffled = label_indices(fresh);
    std::mt19937_64 rng(5);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto sd = distance_matrix(fresh.srvfs, shuffled, false);
    SeparationOptions opts;
    opts.class_means = data.class_means;
    const auto r = class_separation(sd, fresh.srvfs, opts);
    const double n = static_cast<double>(fresh.size());
    const double half_width = 1.96 * std::sqrt(0.5 * 0.5 / n);
    CHECK(std::abs(r.accuracy - 0.5) <= half_width);
    CHECK(std::abs(r.silhouette) < 0.1);
  }
  SUBCASE("relabeling invariance") {
    std::vector<std::size_t> swapped = labels;
    for (auto& l : swapped) l = 1 - l;
    const auto sd = distance_matrix(data.srvfs, swapped, false);
    SeparationOptions opts;
    opts.class_means = std::vector<Srvf>{data.class_means[1], data.class_means[0]};
    const auto a = class_separation(d, data.srvfs, {.class_means = data.class_means});
    const auto b = class_separation(sd, data.srvfs, opts);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.silhouette == doctest::Approx(b.silhouette).epsilon(1e-14));
    CHECK(a.intra_mean == b.intra_mean);
    CHECK(a.inter_mean == b.inter_mean);
  }
  SUBCASE("errors") {
    const auto one = distance_matrix({data.srvfs[0], data.srvfs[1]}, {0, 0}, false);
    try {
      class_separation(one, {data.srvfs[0], data.srvfs[1]});
      FAIL("expected SingleClass");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::SingleClass);
    }
    CHECK_THROWS_AS(class_separation(d, {data.srvfs[0]}), Error);
    SeparationOptions opts;
    opts.class_means = std::vector<Srvf>{data.class_means[0]};
    CHECK_THROWS_AS(class_separation(d, data.srvfs, opts), Error);
  }
}

TEST_CASE("scatter and frame SVG") {
  Matrix coords(5, 2);
  coords << 0, 0, 1, 0, 0, 1, -1, 0.5, 2, 2;
  const std::vector<std::size_t> labels{0, 0, 1, 1, 1};
  std::ostringstream out;
  write_scatter_svg(out, coords, labels, {"smile", "<surprise & co>"});
  const std::string svg = out.str();
  CHECK(svg.starts_with("<?xml"));
  CHECK(count(svg, "<circle") == 5);
  CHECK(count(svg, "<svg") == 1);
  CHECK(count(svg, "</svg>") == 1);
  CHECK(count(svg, "<g") == count(svg, "</g>"));
  CHECK(count(svg, "<title>") == count(svg, "</title>"));
  CHECK(svg.find("&lt;surprise &amp; co&gt;") != std::string::npos);
  CHECK(svg.find("<surprise") == std::string::npos);

  std::ostringstream empty;
  write_scatter_svg(empty, Matrix(0, 2), {}, {"a"});
  CHECK(count(empty.str(), "<circle") == 0);
  CHECK(empty.str().ends_with("</svg>\n"));
  CHECK_THROWS_AS(write_scatter_svg(empty, coords, {0}, {"a"}), Error);

  const auto seq = small_data().decode(0);
  std::ostringstream frames;
  write_landmark_frames_svg(frames, seq);
  const std::string fs = frames.str();
  CHECK(count(fs, "<circle") == seq.num_frames() * seq.num_landmarks());
  CHECK(count(fs, "<g id=\"frame-") == seq.num_frames());
  CHECK(count(fs, "<g") == count(fs, "</g>"));

  const auto dir = std::filesystem::temp_directory_path() / "srvfgan_eval_svg";
  std::filesystem::create_directories(dir);
  export_scatter_svg(coords, labels, {"a", "b"}, dir / "s.svg");
  CHECK(std::filesystem::file_size(dir / "s.svg") > 0);
  try {
    export_scatter_svg(coords, labels, {"a", "b"}, dir / "missing" / "s.svg");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IoError);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("CSV reports") {
  DistanceMatrix d;
  d.values = line_distances({0.0, 0.1, 1.0 / 3.0});
  d.labels = {0, 1, 1};
  std::ostringstream out;
  write_distance_csv(out, d, {"a", "b,c", "d"});
  const auto rows = parse_csv(out.str());
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == csv::Record{"", "a", "b,c", "d"});
  CHECK(rows[2][0] == "b,c");
  CHECK(std::stod(rows[1][3]) == 1.0 / 3.0);
  CHECK(std::stod(rows[2][1]) == 0.1);
  CHECK_THROWS_AS(write_distance_csv(out, d, {"a"}), Error);

  std::ostringstream coords;
  Matrix c(2, 2);
  c << 1.0 / 7.0, 2, 3, 4;
  write_coords_csv(coords, c, {0, 1}, {"x", "y"});
  const auto crow = parse_csv(coords.str());
  REQUIRE(crow.size() == 3);
  CHECK(crow[0] == csv::Record{"index", "label", "x", "y"});
  CHECK(crow[1][1] == "x");
  CHECK(std::stod(crow[1][2]) == 1.0 / 7.0);

  std::ostringstream report;
  SeparationReport r;
  r.classes = 2;
  r.accuracy = 0.75;
  write_report_csv(report, r);
  const auto rr = parse_csv(report.str());
  CHECK(rr.size() == 6);
  CHECK(rr[5] == csv::Record{"accuracy", "0.75"});
}
