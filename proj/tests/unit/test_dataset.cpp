#include "doctest.h"
#include "test_support.hpp"

#include "srvfgan/csv.hpp"
#include "srvfgan/dataset.hpp"
#include "srvfgan/error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

using namespace srvfgan;
using srvfgan::testing::max_abs_diff;

namespace {

namespace fs = std::filesystem;

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an srvfgan::Error");
  return Errc::IoError;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("srvfgan_dataset_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

LandmarkSequence make_sequence(std::string id, std::string label, std::size_t frames, std::size_t landmarks,
                               const std::function<Point2(double, std::size_t)>& f) {
  LandmarkSequence s;
  s.id = std::move(id);
  s.label = std::move(label);
  for (std::size_t t = 0; t < frames; ++t) {
    Frame fr(landmarks);
    const double u = static_cast<double>(t) / static_cast<double>(frames - 1);
    for (std::size_t j = 0; j < landmarks; ++j) fr[j] = f(u, j);
    s.frames.push_back(std::move(fr));
  }
  return s;
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SynthSpec small_spec() {
  SynthSpec spec;
  spec.per_class = 5;
  spec.frames = 10;
  return spec;
}

PrepareConfig small_config() {
  PrepareConfig cfg;
  cfg.frames = 10;
  cfg.class_karcher.max_iters = 30;
  return cfg;
}

}  // namespace

TEST_CASE("label sets") {
  const auto expr = LabelSet::expressions();
  CHECK(expr.names() == std::vector<std::string>{"anger", "disgust", "fear", "happy", "sad", "surprise"});
  CHECK(expr.index_of("happy") == 3);
  CHECK_FALSE(expr.find("neutral").has_value());
  CHECK(code_of([&] { (void)expr.index_of("neutral"); }) == Errc::MissingClass);

  const auto found = LabelSet::from_labels({"zeta", "surprise", "anger", "alpha", "surprise"});
  CHECK(found.names() == std::vector<std::string>{"anger", "surprise", "alpha", "zeta"});

  CHECK(code_of([] { LabelSet({"a", "a"}); }) == Errc::SchemaError);
  CHECK(code_of([] { LabelSet({""}); }) == Errc::SchemaError);
}

TEST_CASE("one-hot labels") {
  const ExpressionLabel label(2, 6);
  const RowVector v = label.one_hot();
  REQUIRE(v.size() == 6);
  for (Eigen::Index k = 0; k < 6; ++k) CHECK(v[k] == (k == 2 ? 1.0 : 0.0));
  CHECK(code_of([] { ExpressionLabel(6, 6); }) == Errc::DomainError);
}

TEST_CASE("csv records") {
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("say \"hi\"") == "\"say \"\"hi\"\"\"");

  std::ostringstream out;
  csv::write_record(out, {"x", "a,b", "line\nbreak", ""});
  CHECK(out.str() == "x,\"a,b\",\"line\nbreak\",\r\n");

  std::istringstream in(out.str() + "\n" + "1,2\n");
  const auto records = csv::parse(in);
  REQUIRE(records.size() == 2);
  CHECK(records[0].fields == csv::Record{"x", "a,b", "line\nbreak", ""});
  CHECK(records[0].line == 1);
  CHECK(records[1].fields == csv::Record{"1", "2"});
  CHECK(records[1].line == 4);

  for (const char* bad : {"\"open", "ab\"c", "\"q\"x"}) {
    std::istringstream b(bad);
    CHECK(code_of([&] { (void)csv::parse(b); }) == Errc::ParseError);
  }
}

TEST_CASE("json lines round trip and errors") {
  std::mt19937_64 rng(3);
  std::vector<LandmarkSequence> seqs;
  for (int i = 0; i < 3; ++i) {
    auto s = srvfgan::testing::random_motion_curve(rng, 7, 3).to_sequence("s" + std::to_string(i), "happy");
    if (i == 1) s.fps = 30.0;
    if (i == 2) s.label.reset();
    seqs.push_back(std::move(s));
  }
  std::stringstream buf;
  write_landmark_jsonl(buf, seqs);
  const auto back = parse_landmark_jsonl(buf);
  CHECK(back == seqs);

  std::istringstream empty("");
  CHECK(parse_landmark_jsonl(empty).empty());

  std::istringstream nan_value(R"({"id":"a","frames":[[[1,2]],[[NaN,2]]]})");
  CHECK(code_of([&] { (void)parse_landmark_jsonl(nan_value); }) == Errc::ParseError);

  std::istringstream broken("{\"id\":\"a\",\"frames\":[[[1,2]],[[3,4]]]}\n{oops\n");
  try {
    (void)parse_landmark_jsonl(broken);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  std::istringstream ragged(R"({"id":"a","frames":[[[1,2],[3,4]],[[1,2]]]})");
  CHECK(code_of([&] { (void)parse_landmark_jsonl(ragged); }) == Errc::SchemaError);

  std::istringstream mixed("{\"id\":\"a\",\"frames\":[[[1,2]],[[3,4]]]}\n"
                           "{\"id\":\"b\",\"frames\":[[[1,2],[5,6]],[[3,4],[7,8]]]}\n");
  CHECK(code_of([&] { (void)parse_landmark_jsonl(mixed); }) == Errc::SchemaError);

  std::istringstream fixed("{\"id\":\"a\",\"frames\":[[[1,2]],[[3,4]]]}\n");
  LoadOptions opts;
  opts.landmarks = 68;
  CHECK(code_of([&] { (void)parse_landmark_jsonl(fixed, opts); }) == Errc::SchemaError);
}

TEST_CASE("csv landmark files") {
  std::istringstream in("id,label,frame,landmark,x,y\n"
                        "a,sad,1,0,3,4\n"
                        "a,sad,0,0,1,2\n"
                        "b,fear,0,0,5,6\n"
                        "b,fear,1,0,7,8\n");
  const auto seqs = parse_landmark_csv(in);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].id == "a");
  CHECK(seqs[0].label == "sad");
  CHECK(seqs[0].frames[0][0] == Point2{1, 2});
  CHECK(seqs[0].frames[1][0] == Point2{3, 4});
  CHECK(seqs[1].frames[1][0] == Point2{7, 8});

  std::istringstream header("id,label,x,y\n");
  CHECK(code_of([&] { (void)parse_landmark_csv(header); }) == Errc::ParseError);
  std::istringstream nan_value("id,label,frame,landmark,x,y\na,sad,0,0,nan,1\n");
  CHECK(code_of([&] { (void)parse_landmark_csv(nan_value); }) == Errc::ParseError);
  std::istringstream hole("id,label,frame,landmark,x,y\na,sad,0,0,1,1\na,sad,1,1,1,1\n");
  CHECK(code_of([&] { (void)parse_landmark_csv(hole); }) == Errc::SchemaError);

  TempDir dir;
  const auto p = dir.path / "marks.csv";
  {
    std::ofstream f(p);
    f << "id,label,frame,landmark,x,y\r\nz,happy,0,0,0.5,1.5\r\nz,happy,1,0,2.5,3.5\r\n";
  }
  const auto loaded = load_landmark_sequences(p);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].frames[1][0] == Point2{2.5, 3.5});
  CHECK(code_of([&] { (void)load_landmark_sequences(dir.path / "missing.jsonl"); }) == Errc::IoError);
}

TEST_CASE("resampling") {
  std::mt19937_64 rng(11);
  const auto seq = srvfgan::testing::random_motion_curve(rng, 9, 2).to_sequence("m");
  CHECK(resample_sequence(seq, 9) == seq);

  SUBCASE("linear motion stays linear") {
    const auto line = make_sequence("l", "x", 7, 2, [](double u, std::size_t j) {
      return Point2{1.0 + 4.0 * u + static_cast<double>(j), -2.0 + 3.0 * u};
    });
    for (std::size_t target : {2u, 5u, 13u, 32u}) {
      const auto r = resample_sequence(line, target);
      REQUIRE(r.frames.size() == target);
      CHECK(r.frames.front() == line.frames.front());
      CHECK(r.frames.back() == line.frames.back());
      for (std::size_t k = 0; k < target; ++k) {
        const double u = static_cast<double>(k) / static_cast<double>(target - 1);
        for (std::size_t j = 0; j < 2; ++j) {
          CHECK(r.frames[k][j].x == doctest::Approx(1.0 + 4.0 * u + static_cast<double>(j)).epsilon(1e-14));
          CHECK(r.frames[k][j].y == doctest::Approx(-2.0 + 3.0 * u).epsilon(1e-14));
        }
      }
    }
  }

  SUBCASE("sinusoid within the interpolation bound") {
    const double w = 2.0 * std::numbers::pi;
    const auto wave = make_sequence("w", "x", 50, 1, [&](double u, std::size_t) {
      return Point2{std::sin(w * u), std::cos(w * u)};
    });
    const auto r = resample_sequence(wave, 32);
    const double h = 1.0 / 49.0;
    const double bound = h * h * w * w / 8.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < 32; ++k) {
      const double u = static_cast<double>(k) / 31.0;
      worst = std::max({worst, std::abs(r.frames[k][0].x - std::sin(w * u)), std::abs(r.frames[k][0].y - std::cos(w * u))});
    }
    CHECK(worst <= bound);
    CHECK(worst > 0.0);
  }

  LandmarkSequence one;
  one.id = "one";
  one.frames.push_back(Frame{{1, 1}});
  CHECK(code_of([&] { (void)resample_sequence(one, 8); }) == Errc::TooShort);
  CHECK(code_of([&] { (void)resample_sequence(seq, 1); }) == Errc::TooShort);
}

TEST_CASE("synthetic corpus") {
  const SynthSpec spec;
  const auto a = synth_corpus(spec, 7);
  const auto b = synth_corpus(spec, 7);
  CHECK(a == b);
  CHECK(a != synth_corpus(spec, 8));
  REQUIRE(a.size() == 128);
  CHECK(a.front().id == "anger_000");
  CHECK(a[64].label == "disgust");
  for (const auto& s : a) {
    CHECK(s.frames.size() == 16);
    CHECK(s.num_landmarks() == 2);
  }

  SUBCASE("intra-class distances below inter-class distances") {
    std::vector<Srvf> q;
    for (const auto& s : a) q.push_back(srvf_encode(Curve::from_sequence(s)));
    double intra = 0.0;
    double inter = 0.0;
    std::size_t ni = 0;
    std::size_t ne = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        const double d = geodesic_distance(q[i], q[j]);
        if (a[i].label == a[j].label) {
          intra += d;
          ++ni;
        } else {
          inter += d;
          ++ne;
        }
      }
    }
    intra /= static_cast<double>(ni);
    inter /= static_cast<double>(ne);
    CHECK(intra < inter);
    // Regression values for seed 7.
    CHECK(intra == doctest::Approx(0.3372112252).epsilon(1e-8));
    CHECK(inter == doctest::Approx(1.551414034).epsilon(1e-8));
  }

  SUBCASE("without noise every sample is a warped, scaled, shifted prototype") {
    SynthSpec clean;
    clean.noise = 0.0;
    clean.per_class = 8;
    clean.landmarks = 3;
    const auto corpus = synth_corpus(clean, 5);
    for (std::size_t c = 0; c < 2; ++c) {
      // Unit direction and relative gain of each landmark, from the first sample.
      const auto& ref = corpus[c * clean.per_class];
      std::vector<Point2> dir(clean.landmarks);
      std::vector<double> gain(clean.landmarks);
      const std::size_t probe = clean.frames / 2;
      for (std::size_t j = 0; j < clean.landmarks; ++j) {
        const double dx = ref.frames[probe][j].x - ref.frames[0][j].x;
        const double dy = ref.frames[probe][j].y - ref.frames[0][j].y;
        gain[j] = std::hypot(dx, dy);
        dir[j] = {dx / gain[j], dy / gain[j]};
      }
      for (std::size_t k = 0; k < clean.per_class; ++k) {
        const auto& s = corpus[c * clean.per_class + k];
        std::vector<double> warp_exponents;
        for (std::size_t t = 1; t < clean.frames; ++t) {
          const double along0 = (s.frames[t][0].x - s.frames[0][0].x) * dir[0].x +
                                (s.frames[t][0].y - s.frames[0][0].y) * dir[0].y;
          for (std::size_t j = 0; j < clean.landmarks; ++j) {
            const double ex = s.frames[t][j].x - s.frames[0][j].x;
            const double ey = s.frames[t][j].y - s.frames[0][j].y;
            const double along = ex * dir[j].x + ey * dir[j].y;
            const double across = -ex * dir[j].y + ey * dir[j].x;
            CHECK(std::abs(across) < 1e-9);
            CHECK(along * gain[0] == doctest::Approx(along0 * gain[j]).epsilon(1e-9));
          }
          if (c == 1 && t + 1 < clean.frames) {
            // Odd classes follow smoothstep(u^a); the end point gives the scale.
            const auto& last = s.frames.back()[0];
            const double end = (last.x - s.frames[0][0].x) * dir[0].x + (last.y - s.frames[0][0].y) * dir[0].y;
            const double p = along0 / end;
            // Invert 3v^2 - 2v^3 = p on [0, 1].
            const double v = 0.5 - std::sin(std::asin(1.0 - 2.0 * p) / 3.0);
            const double u = static_cast<double>(t) / static_cast<double>(clean.frames - 1);
            warp_exponents.push_back(std::log(v) / std::log(u));
          }
        }
        for (double e : warp_exponents) CHECK(e == doctest::Approx(warp_exponents.front()).epsilon(1e-9));
      }
    }
  }

  SynthSpec bad;
  bad.frames = 2;
  CHECK(code_of([&] { (void)synth_corpus(bad, 1); }) == Errc::InvalidSpec);
  bad = SynthSpec{};
  bad.noise = -1.0;
  CHECK(code_of([&] { (void)synth_corpus(bad, 1); }) == Errc::InvalidSpec);
  bad = SynthSpec{};
  bad.classes = 0;
  CHECK(code_of([&] { (void)synth_corpus(bad, 1); }) == Errc::InvalidSpec);
}

TEST_CASE("prepare") {
  const auto corpus = synth_corpus(small_spec(), 21);
  const auto data = prepare(corpus, small_config());
  data.validate();
  REQUIRE(data.size() == corpus.size());
  CHECK(data.classes.names() == std::vector<std::string>{"anger", "disgust"});
  CHECK(data.frames == 10);
  CHECK(data.landmarks == 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(std::abs(sphere_norm(data.srvfs[i].samples()) - 1.0) <= 1e-9);
    CHECK(data.ids[i] == corpus[i].id);
    CHECK(data.classes.name(data.labels[i].index) == *corpus[i].label);
  }

  SUBCASE("members are registered to their class mean") {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& mean = data.class_means[data.labels[i].index];
      const auto again = align(mean, data.srvfs[i]);
      CHECK(again.cost == doctest::Approx(geodesic_distance(mean, data.srvfs[i])).epsilon(1e-12));
    }
  }

  SUBCASE("chart beats every class mean as a centre") {
    const double chart_var = frechet_variance(data.chart.reference(), data.srvfs);
    for (const auto& m : data.class_means) CHECK(chart_var <= frechet_variance(m, data.srvfs));
  }

  SUBCASE("decode reproduces the resampled inputs") {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto decoded = srvf_encode(Curve::from_sequence(data.decode(i)));
      CHECK(geodesic_distance(decoded, data.srvfs[i]) <= 1e-9);
      CHECK(data.decode(i).frames.front() == resample_sequence(corpus[i], 10).frames.front());
    }
  }

  SUBCASE("deterministic across thread counts") {
    auto cfg = small_config();
    cfg.threads = 3;
    const auto other = prepare(corpus, cfg);
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(other.srvfs[i].samples() == data.srvfs[i].samples());
    CHECK(other.chart.reference().samples() == data.chart.reference().samples());
  }
}

TEST_CASE("prepare with one sequence per class") {
  std::mt19937_64 rng(4);
  std::vector<LandmarkSequence> seqs;
  for (const char* label : {"fear", "happy", "sad"}) {
    seqs.push_back(srvfgan::testing::random_motion_curve(rng, 12, 2).to_sequence(label, label));
  }
  PrepareConfig cfg;
  cfg.frames = 12;
  const auto data = prepare(seqs, cfg);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto q = srvf_encode(Curve::from_sequence(seqs[c]));
    CHECK(max_abs_diff(data.class_means[c].samples(), q.samples()) <= 1e-12);
    CHECK(max_abs_diff(data.srvfs[c].samples(), q.samples()) <= 1e-12);
  }

  std::vector<LandmarkSequence> decoded;
  for (std::size_t i = 0; i < data.size(); ++i) decoded.push_back(data.decode(i));
  const auto again = prepare(decoded, cfg);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(geodesic_distance(again.srvfs[i], data.srvfs[i]) <= 1e-6);
}

TEST_CASE("prepare errors") {
  auto corpus = synth_corpus(small_spec(), 2);
  PrepareConfig cfg = small_config();
  cfg.labels = LabelSet({"anger", "disgust", "fear"});
  try {
    (void)prepare(corpus, cfg);
    FAIL("expected MissingClass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingClass);
    CHECK(std::string(e.what()).find("fear") != std::string::npos);
  }

  cfg = small_config();
  corpus[3].frames.assign(corpus[3].frames.size(), corpus[3].frames.front());
  try {
    (void)prepare(corpus, cfg);
    FAIL("expected DegenerateCurve");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateCurve);
    CHECK(std::string(e.what()).find(corpus[3].id) != std::string::npos);
  }

  corpus = synth_corpus(small_spec(), 2);
  corpus[0].label.reset();
  CHECK(code_of([&] { (void)prepare(corpus, small_config()); }) == Errc::SchemaError);
  CHECK(code_of([] { (void)prepare({}, small_config()); }) == Errc::EmptySet);
}

TEST_CASE("dataset files") {
  const auto data = prepare(synth_corpus(small_spec(), 9), small_config());
  TempDir dir;
  const auto p = dir.path / "set.srvfds";
  save_dataset(data, p);
  const auto back = load_dataset(p);

  CHECK(back.classes == data.classes);
  CHECK(back.frames == data.frames);
  CHECK(back.landmarks == data.landmarks);
  CHECK(back.provenance == data.provenance);
  CHECK(back.ids == data.ids);
  CHECK(back.labels == data.labels);
  CHECK(back.path_lengths == data.path_lengths);
  CHECK(back.chart.reference().samples() == data.chart.reference().samples());
  for (std::size_t c = 0; c < data.class_means.size(); ++c) {
    CHECK(back.class_means[c].samples() == data.class_means[c].samples());
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back.srvfs[i].samples() == data.srvfs[i].samples());
    CHECK(back.initial_frames[i] == data.initial_frames[i]);
  }

  const auto bytes = read_bytes(p);
  REQUIRE(bytes.size() > 64);
  CHECK(std::string(bytes.data(), 7) == "SRVFDS1");

  SUBCASE("saving again gives the same bytes") {
    const auto q = dir.path / "again.srvfds";
    save_dataset(back, q);
    CHECK(read_bytes(q) == bytes);
  }
  SUBCASE("truncated") {
    write_bytes(p, std::vector<char>(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2)));
    CHECK(code_of([&] { (void)load_dataset(p); }) == Errc::CorruptFile);
  }
  SUBCASE("flipped byte") {
    auto broken = bytes;
    broken[bytes.size() / 2] = static_cast<char>(broken[bytes.size() / 2] ^ 0x40);
    write_bytes(p, broken);
    CHECK(code_of([&] { (void)load_dataset(p); }) == Errc::CorruptFile);
  }
  SUBCASE("other version") {
    auto other = bytes;
    other[6] = '2';
    write_bytes(p, other);
    CHECK(code_of([&] { (void)load_dataset(p); }) == Errc::VersionMismatch);
  }
  SUBCASE("not a dataset") {
    write_bytes(p, std::vector<char>{'h', 'e', 'l', 'l', 'o'});
    CHECK(code_of([&] { (void)load_dataset(p); }) == Errc::CorruptFile);
  }
  CHECK(code_of([&] { (void)load_dataset(dir.path / "absent"); }) == Errc::IoError);
}
