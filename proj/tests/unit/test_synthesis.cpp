#include "srvfgan/error.hpp"
#include "srvfgan/synthesis.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace srvfgan;

namespace {

const MotionGanModel& tiny_model() {
  static const MotionGanModel model = [] {
    SynthSpec spec;
    spec.per_class = 6;
    spec.frames = 8;
    PrepareConfig pc;
    pc.frames = 8;
    pc.class_karcher.max_iters = 20;
    const auto data = prepare(synth_corpus(spec, 5), pc);
    TrainConfig cfg;
    cfg.z_dim = 4;
    cfg.batch = 8;
    cfg.generator_widths = {8, 8};
    cfg.critic_widths = {8, 8};
    cfg.n_iteration = 2;
    cfg.seed = 3;
    return train(data, cfg).first;
  }();
  return model;
}

Frame shifted(const Frame& f, double dx, double dy) {
  Frame out = f;
  for (auto& p : out) {
    p.x += dx;
    p.y += dy;
  }
  return out;
}

LandmarkSequence from_curve(const Curve& c) { return c.to_sequence("src", std::string("happy")); }

double max_frame_diff(const LandmarkSequence& a, const LandmarkSequence& b) {
  double m = 0.0;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    m = std::max(m, (flatten_frame(a.frames[t]) - flatten_frame(b.frames[t])).cwiseAbs().maxCoeff());
  }
  return m;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::IoError;
}

}  // namespace

TEST_CASE("intensity bounds") {
  CHECK_NOTHROW(IntensityOptions{0.0}.validate());
  CHECK_NOTHROW(IntensityOptions{30.0}.validate());
  CHECK(code_of([] { IntensityOptions{30.5}.validate(); }) == Errc::DomainError);
  CHECK(code_of([] { IntensityOptions{-0.1}.validate(); }) == Errc::DomainError);
  CHECK(code_of([] { IntensityOptions{std::nan("")}.validate(); }) == Errc::DomainError);
  IntensityOptions wide{50.0};
  wide.max_intensity = 60.0;
  CHECK_NOTHROW(wide.validate());
}

TEST_CASE("generate_landmark_sequence") {
  const auto& model = tiny_model();
  const Frame neutral = synth_neutral_frame(model.landmarks);

  const auto seq = generate_landmark_sequence(model, 1, neutral, {1.0}, 42);
  REQUIRE(seq.num_frames() == model.frames);
  CHECK(seq.frames.front() == neutral);
  CHECK(seq.label == model.class_names[1]);
  CHECK(generate_landmark_sequence(model, 1, neutral, {1.0}, 42) == seq);

  // The decoded path has unit length and re-encodes to the generated SRVF.
  const Curve c = Curve::from_sequence(seq);
  CHECK(std::abs(c.path_length() - 1.0) <= 1e-12);
  const Srvf q = generate_motion(model, 1, 42);
  CHECK(testing::max_abs_diff(srvf_encode(c).samples(), q.samples()) <= 1e-9);

  SUBCASE("zero intensity is a constant sequence") {
    const auto still = generate_landmark_sequence(model, 0, neutral, {0.0}, 42);
    for (const auto& f : still.frames) CHECK(f == neutral);
  }

  SUBCASE("relative intensity scales to the class mean path length") {
    IntensityOptions rel{2.0, IntensityMode::Relative};
    const auto s = generate_landmark_sequence(model, 1, neutral, rel, 42);
    CHECK(Curve::from_sequence(s).path_length() ==
          doctest::Approx(2.0 * model.class_path_lengths[1]).epsilon(1e-12));
  }

  SUBCASE("linearity in the intensity is exact from a zero neutral") {
    const Frame zero(model.landmarks, Point2{0.0, 0.0});
    const auto one = generate_landmark_sequence(model, 0, zero, {1.0}, 9);
    const auto more = generate_landmark_sequence(model, 0, zero, {2.75}, 9);
    for (std::size_t t = 0; t < one.frames.size(); ++t) {
      CHECK(flatten_frame(more.frames[t]) == RowVector(2.75 * flatten_frame(one.frames[t])));
    }
  }

  SUBCASE("errors") {
    CHECK(code_of([&] { (void)generate_landmark_sequence(model, 0, synth_neutral_frame(3), {1.0}, 1); }) ==
          Errc::DimensionMismatch);
    CHECK(code_of([&] { (void)generate_landmark_sequence(model, 0, neutral, {31.0}, 1); }) == Errc::DomainError);
    CHECK(code_of([&] { (void)generate_landmark_sequence(model, 5, neutral, {1.0}, 1); }) == Errc::MissingClass);
  }
}

TEST_CASE("transfer_motion") {
  std::mt19937_64 rng(17);
  const Curve curve = testing::random_motion_curve(rng, 12, 3);
  const LandmarkSequence source = from_curve(curve);
  const double length = curve.path_length();

  SUBCASE("self-transfer with the path length reproduces the source") {
    const auto out = transfer_motion(source, source.frames.front(), {length});
    CHECK(max_frame_diff(out, source) <= 1e-6);
    CHECK(out.frames.front() == source.frames.front());
    const auto rel = transfer_motion(source, source.frames.front(), {1.0, IntensityMode::Relative});
    CHECK(max_frame_diff(rel, source) <= 1e-6);
  }

  SUBCASE("displacements come from the source, scaled, whatever the target") {
    const Frame a = shifted(source.frames.front(), 40.0, -7.0);
    const Frame b = synth_neutral_frame(3);
    const double factor = 1.7;
    const auto out_a = transfer_motion(source, a, {factor});
    const auto out_b = transfer_motion(source, b, {factor});
    CHECK(out_a.frames.front() == a);
    CHECK(out_b.frames.front() == b);
    for (std::size_t t = 0; t < source.frames.size(); ++t) {
      const RowVector da = flatten_frame(out_a.frames[t]) - flatten_frame(a);
      const RowVector db = flatten_frame(out_b.frames[t]) - flatten_frame(b);
      // Closed form: (factor / path length) * (source_t - source_0).
      const RowVector expected =
          (factor / length) * (flatten_frame(source.frames[t]) - flatten_frame(source.frames.front()));
      CHECK((da - expected).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((db - expected).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }

  SUBCASE("composition with generation") {
    const auto& model = tiny_model();
    const Frame na = synth_neutral_frame(model.landmarks);
    const Frame nb = shifted(na, 5.0, 3.0);
    const IntensityOptions rel{1.0, IntensityMode::Relative};
    const auto gen_a = generate_landmark_sequence(model, 1, na, rel, 77);
    const auto gen_b = generate_landmark_sequence(model, 1, nb, rel, 77);
    const auto moved = transfer_motion(gen_a, nb, rel);
    CHECK(max_frame_diff(moved, gen_b) <= 1e-6);
  }

  SUBCASE("errors") {
    LandmarkSequence still = source;
    for (auto& f : still.frames) f = source.frames.front();
    CHECK(code_of([&] { (void)transfer_motion(still, source.frames.front(), {1.0}); }) == Errc::DegenerateCurve);
    CHECK(code_of([&] { (void)transfer_motion(source, synth_neutral_frame(2), {1.0}); }) == Errc::DimensionMismatch);
    CHECK(code_of([&] { (void)transfer_motion(source, source.frames.front(), {-1.0}); }) == Errc::DomainError);
  }
}

TEST_CASE("render_heatmaps") {
  LandmarkSequence seq;
  seq.frames = {{{10.0, 20.0}, {3.0, 4.0}}, {{11.0, 20.0}, {3.0, 5.0}}};
  HeatmapOptions opt;
  opt.height = 32;
  opt.width = 24;
  opt.sigma = 2.0;
  const auto h = render_heatmaps(seq, opt);
  REQUIRE(h.values.size() == 2 * 2 * 32 * 24);
  CHECK(h.frames == 2);
  CHECK(h.channels == 2);

  // Landmark at a pixel center: value 1 at (row = y, column = x).
  CHECK(h.at(0, 0, 20, 10) == 1.0f);
  CHECK(h.at(1, 1, 5, 3) == 1.0f);
  // One sigma away, horizontally and vertically.
  CHECK(std::abs(h.at(0, 0, 20, 12) - std::exp(-0.5f)) <= 1e-6f);
  CHECK(std::abs(h.at(0, 0, 22, 10) - std::exp(-0.5f)) <= 1e-6f);
  CHECK(std::abs(h.at(0, 1, 6, 5) - std::exp(-1.0f)) <= 1e-6f);
  const auto [lo, hi] = std::minmax_element(h.values.begin(), h.values.end());
  CHECK(*lo >= 0.0f);
  CHECK(*hi <= 1.0f);

  SUBCASE("argmax recovers landmark positions") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ux(0.0, 48.0), uy(0.0, 40.0);
    for (const double sigma : {1.0, 1.5, 3.0}) {
      LandmarkSequence r;
      r.frames.assign(3, Frame(5));
      for (auto& f : r.frames) {
        for (auto& p : f) p = {ux(rng), uy(rng)};
      }
      const auto hm = render_heatmaps(r, {40, 48, sigma, OutOfBoundsPolicy::Error});
      for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t c = 0; c < 5; ++c) {
          std::size_t bi = 0, bj = 0;
          for (std::size_t i = 0; i < 40; ++i) {
            for (std::size_t j = 0; j < 48; ++j) {
              if (hm.at(t, c, i, j) > hm.at(t, c, bi, bj)) {
                bi = i;
                bj = j;
              }
            }
          }
          CHECK(std::abs(static_cast<double>(bj) - r.frames[t][c].x) <= 1.0);
          CHECK(std::abs(static_cast<double>(bi) - r.frames[t][c].y) <= 1.0);
        }
      }
    }
  }

  SUBCASE("out of bounds") {
    LandmarkSequence out = seq;
    out.frames[1][0].x = 24.0;
    CHECK(code_of([&] { (void)render_heatmaps(out, opt); }) == Errc::OutOfBounds);
    out.frames[1][0].x = -0.5;
    CHECK(code_of([&] { (void)render_heatmaps(out, opt); }) == Errc::OutOfBounds);
    HeatmapOptions clamp = opt;
    clamp.out_of_bounds = OutOfBoundsPolicy::Clamp;
    out.frames[1][0] = {100.0, -3.0};
    const auto hc = render_heatmaps(out, clamp);
    CHECK(hc.at(1, 0, 0, 23) == 1.0f);
  }

  SUBCASE("bad options") {
    HeatmapOptions bad = opt;
    bad.sigma = 0.0;
    CHECK(code_of([&] { (void)render_heatmaps(seq, bad); }) == Errc::DomainError);
    bad = opt;
    bad.width = 0;
    CHECK(code_of([&] { (void)render_heatmaps(seq, bad); }) == Errc::DomainError);
  }

  SUBCASE("npy round trip") {
    const auto path = std::filesystem::temp_directory_path() / "srvfgan_test_heatmaps.npy";
    save_heatmaps_npy(h, path);
    std::ifstream in(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    REQUIRE(bytes.size() > 10);
    CHECK(bytes.compare(0, 6, "\x93NUMPY") == 0);
    const std::size_t header = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
    CHECK((10 + header) % 64 == 0);
    CHECK(bytes[10 + header - 1] == '\n');
    CHECK(bytes.find("'shape': (2, 2, 32, 24)") != std::string::npos);
    CHECK(bytes.size() == 10 + header + 4 * h.values.size());
    const auto back = load_heatmaps_npy(path);
    CHECK(back.frames == 2);
    CHECK(back.width == 24);
    CHECK(back.values == h.values);
    std::filesystem::remove(path);
    CHECK(code_of([&] { (void)load_heatmaps_npy(path); }) == Errc::IoError);
  }

  SUBCASE("pgm frames") {
    const auto prefix = std::filesystem::temp_directory_path() / "srvfgan_test_hm";
    const auto paths = save_heatmap_pgms(h, prefix);
    REQUIRE(paths.size() == 2);
    CHECK(paths[1].filename() == "srvfgan_test_hm_0001.pgm");
    std::ifstream in(paths[0], std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    const std::string head = "P5\n24 32\n255\n";
    CHECK(bytes.compare(0, head.size(), head) == 0);
    CHECK(bytes.size() == head.size() + 24 * 32);
    CHECK(static_cast<unsigned char>(bytes[head.size() + 20 * 24 + 10]) == 255);
    for (const auto& p : paths) std::filesystem::remove(p);
  }
}
