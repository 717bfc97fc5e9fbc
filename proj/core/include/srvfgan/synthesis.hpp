#pragma once

// Landmark sequences from motions: decoding generated SRVFs from a neutral
// frame, cross-identity transfer, intensity control and heatmap export.

#include "srvfgan/geometry.hpp"
#include "srvfgan/motiongan.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace srvfgan {

/// Absolute: the intensity multiplies the unit-length decoded path.
/// Relative: the path is first rescaled to a reference length (the class mean
/// for generation, the source path length for transfer), so I = 1 keeps the
/// natural magnitude.
enum class IntensityMode { Absolute, Relative };

struct IntensityOptions {
  double intensity = 1.0;
  IntensityMode mode = IntensityMode::Absolute;
  /// Upper bound on the intensity factor; larger values give implausible motions.
  double max_intensity = 30.0;

  /// DomainError unless 0 <= intensity <= max_intensity.
  void validate() const;
};

/// generate_motion then decode from `neutral`. Frame 0 equals `neutral`
/// exactly. DimensionMismatch when neutral has the wrong number of points.
LandmarkSequence generate_landmark_sequence(const MotionGanModel& model, std::size_t class_index,
                                            const Frame& neutral, const IntensityOptions& intensity,
                                            std::uint64_t seed);

/// Decodes the source's SRVF from target_neutral: displacements come from the
/// source, identity geometry from the target. DegenerateCurve for a static
/// source, DimensionMismatch for differing d.
LandmarkSequence transfer_motion(const LandmarkSequence& source, const Frame& target_neutral,
                                 const IntensityOptions& intensity);

enum class OutOfBoundsPolicy { Error, Clamp };

struct HeatmapOptions {
  std::size_t height = 64;
  std::size_t width = 64;
  double sigma = 1.5;
  OutOfBoundsPolicy out_of_bounds = OutOfBoundsPolicy::Error;
};

/// T x d x H x W float32 stack. Pixel (row i, column j) has its center at
/// (x = j, y = i).
struct HeatmapStack {
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  float at(std::size_t t, std::size_t c, std::size_t i, std::size_t j) const {
    return values[((t * channels + c) * height + i) * width + j];
  }
};

/// Channel j of frame t is exp(-r^2 / (2 sigma^2)) around landmark j, peak 1.
/// Landmarks must lie in [0, W) x [0, H); OutOfBounds otherwise, unless the
/// policy clamps them onto the nearest pixel center.
HeatmapStack render_heatmaps(const LandmarkSequence& seq, const HeatmapOptions& options = {});

/// NumPy .npy v1.0, dtype '<f4', shape (T, d, H, W).
void save_heatmaps_npy(const HeatmapStack& stack, const std::filesystem::path& path);
HeatmapStack load_heatmaps_npy(const std::filesystem::path& path);

/// One binary PGM per frame (channels combined by maximum), named
/// <prefix>_<frame:04>.pgm. Returns the written paths.
std::vector<std::filesystem::path> save_heatmap_pgms(const HeatmapStack& stack, const std::filesystem::path& prefix);

}  // namespace srvfgan
