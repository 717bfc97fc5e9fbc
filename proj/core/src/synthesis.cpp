#include "srvfgan/synthesis.hpp"

#include "srvfgan/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

namespace srvfgan {

void IntensityOptions::validate() const {
  if (!(max_intensity > 0.0)) throw Error(Errc::DomainError, "max_intensity must be positive");
  if (!(intensity >= 0.0 && intensity <= max_intensity)) {
    std::ostringstream msg;
    msg << "intensity " << intensity << " outside [0, " << max_intensity << "]";
    throw Error(Errc::DomainError, msg.str());
  }
}

namespace {

RowVector neutral_row(const Frame& neutral, std::size_t landmarks) {
  if (neutral.size() != landmarks) {
    throw Error(Errc::DimensionMismatch, "neutral frame has " + std::to_string(neutral.size()) +
                                             " landmarks, expected " + std::to_string(landmarks));
  }
  return flatten_frame(neutral);
}

}  // namespace

LandmarkSequence generate_landmark_sequence(const MotionGanModel& model, std::size_t class_index,
                                            const Frame& neutral, const IntensityOptions& intensity,
                                            std::uint64_t seed) {
  intensity.validate();
  const RowVector start = neutral_row(neutral, model.landmarks);
  const Srvf q = generate_motion(model, class_index, seed);
  double factor = intensity.intensity;
  if (intensity.mode == IntensityMode::Relative) factor *= model.class_path_lengths.at(class_index);
  LandmarkSequence seq = srvf_decode(q, start, factor).to_sequence(
      "generated-" + model.class_names[class_index] + "-" + std::to_string(seed), model.class_names[class_index]);
  seq.frames.front() = neutral;
  return seq;
}

LandmarkSequence transfer_motion(const LandmarkSequence& source, const Frame& target_neutral,
                                 const IntensityOptions& intensity) {
  intensity.validate();
  source.validate();
  const RowVector start = neutral_row(target_neutral, source.num_landmarks());
  const Curve curve = Curve::from_sequence(source);
  const Srvf q = srvf_encode(curve);
  double factor = intensity.intensity;
  if (intensity.mode == IntensityMode::Relative) factor *= curve.path_length();
  LandmarkSequence seq = srvf_decode(q, start, factor).to_sequence(source.id + "-transfer", source.label);
  seq.fps = source.fps;
  seq.frames.front() = target_neutral;
  return seq;
}

// ---------------------------------------------------------------------------
// Heatmaps

HeatmapStack render_heatmaps(const LandmarkSequence& seq, const HeatmapOptions& options) {
  if (options.height == 0 || options.width == 0) throw Error(Errc::DomainError, "heatmap size must be positive");
  if (!(options.sigma > 0.0) || !std::isfinite(options.sigma)) {
    throw Error(Errc::DomainError, "heatmap sigma must be positive");
  }
  seq.validate();
  HeatmapStack out;
  out.frames = seq.num_frames();
  out.channels = seq.num_landmarks();
  out.height = options.height;
  out.width = options.width;
  out.values.assign(out.frames * out.channels * out.height * out.width, 0.0f);

  const double w = static_cast<double>(options.width);
  const double h = static_cast<double>(options.height);
  const double inv_two_var = 1.0 / (2.0 * options.sigma * options.sigma);
  std::vector<double> gx(options.width), gy(options.height);
  for (std::size_t t = 0; t < out.frames; ++t) {
    for (std::size_t c = 0; c < out.channels; ++c) {
      Point2 p = seq.frames[t][c];
      if (!(p.x >= 0.0 && p.x < w && p.y >= 0.0 && p.y < h)) {
        if (options.out_of_bounds == OutOfBoundsPolicy::Error) {
          std::ostringstream msg;
          msg << "landmark " << c << " of frame " << t << " at (" << p.x << ", " << p.y << ") lies outside the "
              << options.width << "x" << options.height << " image";
          throw Error(Errc::OutOfBounds, msg.str());
        }
        p.x = std::clamp(p.x, 0.0, w - 1.0);
        p.y = std::clamp(p.y, 0.0, h - 1.0);
      }
      // The Gaussian is separable: exp(-(dx^2 + dy^2) k) = exp(-dx^2 k) exp(-dy^2 k).
      for (std::size_t j = 0; j < options.width; ++j) {
        const double dx = static_cast<double>(j) - p.x;
        gx[j] = std::exp(-dx * dx * inv_two_var);
      }
      for (std::size_t i = 0; i < options.height; ++i) {
        const double dy = static_cast<double>(i) - p.y;
        gy[i] = std::exp(-dy * dy * inv_two_var);
      }
      float* plane = out.values.data() + (t * out.channels + c) * out.height * out.width;
      for (std::size_t i = 0; i < options.height; ++i) {
        for (std::size_t j = 0; j < options.width; ++j) {
          plane[i * options.width + j] = static_cast<float>(gy[i] * gx[j]);
        }
      }
    }
  }
  return out;
}

void save_heatmaps_npy(const HeatmapStack& stack, const std::filesystem::path& path) {
  std::ostringstream dict;
  dict << "{'descr': '<f4', 'fortran_order': False, 'shape': (" << stack.frames << ", " << stack.channels << ", "
       << stack.height << ", " << stack.width << "), }";
  std::string header = dict.str();
  // Magic (6) + version (2) + length (2) + header, padded to a multiple of 64
  // and terminated by a newline.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<unsigned char> buf(stack.values.size() * 4);
  for (std::size_t k = 0; k < stack.values.size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(stack.values[k]);
    for (int b = 0; b < 4; ++b) buf[4 * k + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

HeatmapStack load_heatmaps_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0) {
    throw Error(Errc::CorruptFile, "'" + path.string() + "' is not an .npy file");
  }
  if (bytes[6] != 1) throw Error(Errc::VersionMismatch, "'" + path.string() + "' is not .npy version 1");
  const std::size_t len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + len) throw Error(Errc::CorruptFile, "'" + path.string() + "' header is truncated");
  const std::string header = bytes.substr(10, len);
  static const std::regex pattern(
      R"(\{'descr': '<f4', 'fortran_order': False, 'shape': \((\d+), (\d+), (\d+), (\d+)\), \}\s*)");
  std::smatch m;
  if (!std::regex_match(header, m, pattern)) {
    throw Error(Errc::CorruptFile, "'" + path.string() + "' is not a float32 4-D C-order array");
  }
  HeatmapStack s;
  s.frames = std::stoul(m[1]);
  s.channels = std::stoul(m[2]);
  s.height = std::stoul(m[3]);
  s.width = std::stoul(m[4]);
  const std::size_t n = s.frames * s.channels * s.height * s.width;
  if (bytes.size() - 10 - len != 4 * n) throw Error(Errc::CorruptFile, "'" + path.string() + "' data size is wrong");
  s.values.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + 10 + len);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * k + static_cast<std::size_t>(b)]) << (8 * b);
    s.values[k] = std::bit_cast<float>(bits);
  }
  return s;
}

std::vector<std::filesystem::path> save_heatmap_pgms(const HeatmapStack& stack, const std::filesystem::path& prefix) {
  std::vector<std::filesystem::path> paths;
  for (std::size_t t = 0; t < stack.frames; ++t) {
    std::ostringstream name;
    name << prefix.filename().string() << "_" << std::setw(4) << std::setfill('0') << t << ".pgm";
    const auto path = prefix.parent_path() / name.str();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
    out << "P5\n" << stack.width << " " << stack.height << "\n255\n";
    std::vector<unsigned char> pixels(stack.height * stack.width, 0);
    for (std::size_t c = 0; c < stack.channels; ++c) {
      for (std::size_t i = 0; i < stack.height; ++i) {
        for (std::size_t j = 0; j < stack.width; ++j) {
          const auto v = static_cast<unsigned char>(std::lround(std::clamp(stack.at(t, c, i, j), 0.0f, 1.0f) * 255.0f));
          auto& px = pixels[i * stack.width + j];
          px = std::max(px, v);
        }
      }
    }
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
    paths.push_back(path);
  }
  return paths;
}

}  // namespace srvfgan
