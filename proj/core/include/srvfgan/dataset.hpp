#pragma once

// Landmark-sequence ingestion, resampling, SRVF training-set preparation and
// synthetic motion corpora.

#include "srvfgan/alignment.hpp"
#include "srvfgan/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace srvfgan {

/// Ordered class names; a label's index is its position here.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  /// anger, disgust, fear, happy, sad, surprise.
  static LabelSet expressions();
  /// The distinct labels of `labels`: known expression names first in their
  /// canonical order, then any other names sorted.
  static LabelSet from_labels(const std::vector<std::string>& labels);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::optional<std::size_t> find(const std::string& name) const;
  /// Throws MissingClass for an unknown name.
  std::size_t index_of(const std::string& name) const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::string> names_;
};

struct ExpressionLabel {
  std::size_t index = 0;
  std::size_t num_classes = 0;

  /// Throws DomainError unless index < num_classes.
  ExpressionLabel(std::size_t index, std::size_t num_classes);

  RowVector one_hot() const;

  friend bool operator==(const ExpressionLabel&, const ExpressionLabel&) = default;
};

enum class LandmarkFormat { Auto, JsonLines, Csv };

struct LoadOptions {
  LandmarkFormat format = LandmarkFormat::Auto;
  /// When set, every sequence must have exactly this many landmarks.
  std::optional<std::size_t> landmarks;
};

/// JSON Lines: {"id": s, "label": s, "fps": x, "frames": [[[x, y], ...], ...]}.
/// CSV: header id,label,frame,landmark,x,y. Auto picks by extension (.csv).
/// ParseError names the offending line or record; SchemaError flags
/// inconsistent landmark counts.
std::vector<LandmarkSequence> load_landmark_sequences(const std::filesystem::path& path,
                                                      const LoadOptions& options = {});
std::vector<LandmarkSequence> parse_landmark_jsonl(std::istream& in, const LoadOptions& options = {});
std::vector<LandmarkSequence> parse_landmark_csv(std::istream& in, const LoadOptions& options = {});

/// One JSON object per line, coordinates at round-trip precision.
void write_landmark_jsonl(std::ostream& out, const std::vector<LandmarkSequence>& sequences);
void save_landmark_jsonl(const std::filesystem::path& path, const std::vector<LandmarkSequence>& sequences);

/// Per-landmark linear interpolation at `frames` uniform times; the first and
/// last frames are copied exactly.
LandmarkSequence resample_sequence(const LandmarkSequence& seq, std::size_t frames);

struct PrepareConfig {
  std::size_t frames = 32;
  /// Class representatives register the members at every iteration.
  KarcherConfig class_karcher{0.5, 1e-8, 100, true, 1};
  /// The chart is the Karcher mean of the already aligned SRVFs.
  KarcherConfig chart_karcher{0.5, 1e-8, 100, false, 1};
  /// Fixed class list; when empty the classes present in the data are used.
  std::optional<LabelSet> labels;
  unsigned threads = 1;
};

struct PreparedDataset {
  LabelSet classes;
  std::size_t frames = 0;     // T
  std::size_t landmarks = 0;  // d
  std::string provenance;
  TangentChart chart;
  std::vector<Srvf> class_means;
  std::vector<std::string> ids;
  std::vector<ExpressionLabel> labels;
  /// Each aligned to its class mean.
  std::vector<Srvf> srvfs;
  /// First frame of each resampled sequence, flattened (2d values).
  std::vector<RowVector> initial_frames;
  /// Path length of each resampled sequence.
  std::vector<double> path_lengths;

  std::size_t size() const noexcept { return srvfs.size(); }
  /// Indices of the samples of one class, in dataset order.
  std::vector<std::size_t> members_of(std::size_t class_index) const;
  /// Decodes sample i from its own initial frame and path length.
  LandmarkSequence decode(std::size_t i) const;
  /// Throws ShapeMismatch / SchemaError when the parts disagree.
  void validate() const;
};

/// resample -> encode -> per-class Karcher means -> align each SRVF to its
/// class mean -> Karcher mean of all aligned SRVFs as the chart.
/// MissingClass lists classes without sequences; DegenerateCurve names the
/// sequence.
PreparedDataset prepare(const std::vector<LandmarkSequence>& sequences, const PrepareConfig& config = {});

/// "SRVFDS1" container, little-endian 64-bit fields, CRC-32 trailer.
void save_dataset(const PreparedDataset& data, const std::filesystem::path& path);
PreparedDataset load_dataset(const std::filesystem::path& path);

struct SynthSpec {
  std::size_t classes = 2;
  std::size_t per_class = 64;
  std::size_t frames = 16;
  std::size_t landmarks = 2;
  /// Standard deviation of per-coordinate Gaussian jitter, in pixels.
  double noise = 0.02;
  /// Peak displacement of a class prototype, in pixels.
  double amplitude = 3.0;

  /// Throws InvalidSpec.
  void validate() const;
};

/// Class c moves every landmark along a class-specific direction; even classes
/// follow an out-and-back bump, odd classes a smooth one-way ramp. Each sample
/// applies a random time warp t^a, an amplitude scale and a small rigid offset,
/// then Gaussian jitter. Same spec and seed give a bit-identical corpus.
std::vector<LandmarkSequence> synth_corpus(const SynthSpec& spec, std::uint64_t seed);

/// Rest positions of the synthetic faces: d points on a circle of radius 12
/// around (32, 32).
Frame synth_neutral_frame(std::size_t landmarks);

}  // namespace srvfgan
