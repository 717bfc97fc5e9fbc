#include "srvfgan/dataset.hpp"

#include "binary_io.hpp"
#include "srvfgan/csv.hpp"
#include "srvfgan/error.hpp"
#include "srvfgan/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace srvfgan {

namespace {

using json = nlohmann::json;

const std::vector<std::string>& expression_names() {
  static const std::vector<std::string> names{"anger", "disgust", "fear", "happy", "sad", "surprise"};
  return names;
}

void check_landmarks(const LandmarkSequence& seq, const LoadOptions& options, std::optional<std::size_t>& file_d,
                     const std::string& where) {
  if (seq.frames.empty()) throw Error(Errc::SchemaError, where + ": sequence '" + seq.id + "' has no frames");
  const std::size_t d = seq.frames.front().size();
  if (d == 0) throw Error(Errc::SchemaError, where + ": sequence '" + seq.id + "' has no landmarks");
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    if (seq.frames[t].size() != d) {
      throw Error(Errc::SchemaError, where + ": sequence '" + seq.id + "' frame " + std::to_string(t) + " has " +
                                         std::to_string(seq.frames[t].size()) + " landmarks, frame 0 has " +
                                         std::to_string(d));
    }
  }
  if (options.landmarks && d != *options.landmarks) {
    throw Error(Errc::SchemaError, where + ": sequence '" + seq.id + "' has " + std::to_string(d) +
                                       " landmarks, expected " + std::to_string(*options.landmarks));
  }
  if (file_d && d != *file_d) {
    throw Error(Errc::SchemaError, where + ": sequence '" + seq.id + "' has " + std::to_string(d) +
                                       " landmarks, earlier sequences have " + std::to_string(*file_d));
  }
  file_d = d;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw Error(Errc::ParseError, where + ": '" + text + "' is not a number");
  if (!std::isfinite(v)) throw Error(Errc::ParseError, where + ": non-finite coordinate '" + text + "'");
  return v;
}

std::size_t parse_index(const std::string& text, const std::string& where) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(Errc::ParseError, where + ": '" + text + "' is not a non-negative integer");
  }
  return v;
}

}  // namespace

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw Error(Errc::SchemaError, "class names must be non-empty");
    if (!seen.insert(n).second) throw Error(Errc::SchemaError, "duplicate class name '" + n + "'");
  }
}

LabelSet LabelSet::expressions() { return LabelSet(expression_names()); }

LabelSet LabelSet::from_labels(const std::vector<std::string>& labels) {
  std::set<std::string> present(labels.begin(), labels.end());
  std::vector<std::string> names;
  for (const auto& n : expression_names()) {
    if (present.erase(n) > 0) names.push_back(n);
  }
  names.insert(names.end(), present.begin(), present.end());
  return LabelSet(std::move(names));
}

std::optional<std::size_t> LabelSet::find(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t LabelSet::index_of(const std::string& name) const {
  if (auto idx = find(name)) return *idx;
  throw Error(Errc::MissingClass, "unknown class '" + name + "'");
}

ExpressionLabel::ExpressionLabel(std::size_t index_, std::size_t num_classes_)
    : index(index_), num_classes(num_classes_) {
  if (index >= num_classes) {
    throw Error(Errc::DomainError, "label index " + std::to_string(index) + " out of range for " +
                                       std::to_string(num_classes) + " classes");
  }
}

RowVector ExpressionLabel::one_hot() const {
  RowVector v = RowVector::Zero(static_cast<Eigen::Index>(num_classes));
  v(static_cast<Eigen::Index>(index)) = 1.0;
  return v;
}

std::vector<LandmarkSequence> parse_landmark_jsonl(std::istream& in, const LoadOptions& options) {
  std::vector<LandmarkSequence> out;
  std::optional<std::size_t> file_d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(Errc::ParseError, where + ": " + e.what());
    }
    if (!obj.is_object()) throw Error(Errc::ParseError, where + ": expected a JSON object");
    LandmarkSequence seq;
    if (!obj.contains("id") || !obj["id"].is_string()) throw Error(Errc::ParseError, where + ": missing string 'id'");
    seq.id = obj["id"].get<std::string>();
    const std::string rec = where + " (sequence '" + seq.id + "')";
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_string()) throw Error(Errc::ParseError, rec + ": 'label' must be a string");
      seq.label = obj["label"].get<std::string>();
    }
    if (obj.contains("fps") && !obj["fps"].is_null()) {
      if (!obj["fps"].is_number()) throw Error(Errc::ParseError, rec + ": 'fps' must be a number");
      seq.fps = obj["fps"].get<double>();
    }
    if (!obj.contains("frames") || !obj["frames"].is_array()) {
      throw Error(Errc::ParseError, rec + ": missing array 'frames'");
    }
    for (const auto& fr : obj["frames"]) {
      if (!fr.is_array()) throw Error(Errc::ParseError, rec + ": each frame must be an array of [x, y] points");
      Frame frame;
      frame.reserve(fr.size());
      for (const auto& pt : fr) {
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
          throw Error(Errc::ParseError, rec + ": frame " + std::to_string(seq.frames.size()) +
                                            " has a point that is not [x, y]");
        }
        const Point2 p{pt[0].get<double>(), pt[1].get<double>()};
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
          throw Error(Errc::ParseError, rec + ": frame " + std::to_string(seq.frames.size()) +
                                            " has a non-finite coordinate");
        }
        frame.push_back(p);
      }
      seq.frames.push_back(std::move(frame));
    }
    check_landmarks(seq, options, file_d, where);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<LandmarkSequence> parse_landmark_csv(std::istream& in, const LoadOptions& options) {
  const auto records = csv::parse(in);
  if (records.empty()) return {};
  const csv::Record header{"id", "label", "frame", "landmark", "x", "y"};
  if (records.front().fields != header) {
    throw Error(Errc::ParseError, "line 1: expected header id,label,frame,landmark,x,y");
  }

  struct Partial {
    std::optional<std::string> label;
    std::map<std::pair<std::size_t, std::size_t>, Point2> points;
    std::size_t max_frame = 0;
    std::size_t max_landmark = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Partial> partial;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "line " + std::to_string(rec.line);
    if (rec.fields.size() != header.size()) {
      throw Error(Errc::ParseError, where + ": expected 6 fields, got " + std::to_string(rec.fields.size()));
    }
    const std::string& id = rec.fields[0];
    auto [it, inserted] = partial.try_emplace(id);
    if (inserted) {
      order.push_back(id);
      if (!rec.fields[1].empty()) it->second.label = rec.fields[1];
    } else if (it->second.label.value_or("") != rec.fields[1]) {
      throw Error(Errc::SchemaError, where + ": sequence '" + id + "' changes label");
    }
    const std::size_t frame = parse_index(rec.fields[2], where);
    const std::size_t landmark = parse_index(rec.fields[3], where);
    const Point2 p{parse_double(rec.fields[4], where), parse_double(rec.fields[5], where)};
    if (!it->second.points.emplace(std::pair{frame, landmark}, p).second) {
      throw Error(Errc::SchemaError, where + ": duplicate frame " + std::to_string(frame) + " landmark " +
                                         std::to_string(landmark) + " in sequence '" + id + "'");
    }
    it->second.max_frame = std::max(it->second.max_frame, frame);
    it->second.max_landmark = std::max(it->second.max_landmark, landmark);
  }

  std::vector<LandmarkSequence> out;
  std::optional<std::size_t> file_d;
  for (const auto& id : order) {
    const Partial& p = partial.at(id);
    const std::size_t frames = p.max_frame + 1;
    const std::size_t d = p.max_landmark + 1;
    if (p.points.size() != frames * d) {
      throw Error(Errc::SchemaError, "sequence '" + id + "' is missing points: has " + std::to_string(p.points.size()) +
                                         " of " + std::to_string(frames) + " frames x " + std::to_string(d) +
                                         " landmarks");
    }
    LandmarkSequence seq;
    seq.id = id;
    seq.label = p.label;
    seq.frames.assign(frames, Frame(d));
    for (const auto& [key, pt] : p.points) seq.frames[key.first][key.second] = pt;
    check_landmarks(seq, options, file_d, "csv");
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<LandmarkSequence> load_landmark_sequences(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "'");
  LandmarkFormat format = options.format;
  if (format == LandmarkFormat::Auto) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    format = ext == ".csv" ? LandmarkFormat::Csv : LandmarkFormat::JsonLines;
  }
  try {
    return format == LandmarkFormat::Csv ? parse_landmark_csv(in, options) : parse_landmark_jsonl(in, options);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

void write_landmark_jsonl(std::ostream& out, const std::vector<LandmarkSequence>& sequences) {
  for (const auto& seq : sequences) {
    json obj = json::object();
    obj["id"] = seq.id;
    if (seq.label) obj["label"] = *seq.label;
    if (seq.fps) obj["fps"] = *seq.fps;
    json frames = json::array();
    for (const auto& fr : seq.frames) {
      json pts = json::array();
      for (const auto& p : fr) pts.push_back(json::array({p.x, p.y}));
      frames.push_back(std::move(pts));
    }
    obj["frames"] = std::move(frames);
    out << obj.dump() << '\n';
  }
}

void save_landmark_jsonl(const std::filesystem::path& path, const std::vector<LandmarkSequence>& sequences) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  write_landmark_jsonl(out, sequences);
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

LandmarkSequence resample_sequence(const LandmarkSequence& seq, std::size_t frames) {
  if (seq.frames.size() < 2) {
    throw Error(Errc::TooShort, "sequence '" + seq.id + "' has " + std::to_string(seq.frames.size()) + " frames");
  }
  if (frames < 2) throw Error(Errc::TooShort, "cannot resample to fewer than 2 frames");
  seq.validate();
  if (frames == seq.frames.size()) return seq;
  LandmarkSequence out = seq;
  out.frames.assign(frames, Frame(seq.num_landmarks()));
  const double span = static_cast<double>(seq.frames.size() - 1);
  for (std::size_t k = 0; k < frames; ++k) {
    if (k == 0 || k + 1 == frames) {
      out.frames[k] = k == 0 ? seq.frames.front() : seq.frames.back();
      continue;
    }
    const double x = static_cast<double>(k) * span / static_cast<double>(frames - 1);
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(x)), seq.frames.size() - 2);
    const double f = x - static_cast<double>(i0);
    for (std::size_t j = 0; j < seq.num_landmarks(); ++j) {
      const Point2& a = seq.frames[i0][j];
      const Point2& b = seq.frames[i0 + 1][j];
      out.frames[k][j] = {(1.0 - f) * a.x + f * b.x, (1.0 - f) * a.y + f * b.y};
    }
  }
  return out;
}

std::vector<std::size_t> PreparedDataset::members_of(std::size_t class_index) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].index == class_index) idx.push_back(i);
  }
  return idx;
}

LandmarkSequence PreparedDataset::decode(std::size_t i) const {
  return srvf_decode_to_length(srvfs.at(i), initial_frames.at(i), path_lengths.at(i))
      .to_sequence(ids.at(i), classes.name(labels.at(i).index));
}

void PreparedDataset::validate() const {
  const std::size_t n = srvfs.size();
  if (ids.size() != n || labels.size() != n || initial_frames.size() != n || path_lengths.size() != n) {
    throw Error(Errc::SchemaError, "prepared dataset has inconsistent per-sample arrays");
  }
  if (class_means.size() != classes.size()) throw Error(Errc::SchemaError, "one class mean per class required");
  const auto rows = static_cast<Eigen::Index>(frames - 1);
  const auto cols = static_cast<Eigen::Index>(2 * landmarks);
  auto check = [&](const Srvf& q, const char* what) {
    if (q.samples().rows() != rows || q.samples().cols() != cols) {
      throw Error(Errc::ShapeMismatch, std::string(what) + " does not have shape (T-1) x 2d");
    }
  };
  check(chart.reference(), "chart");
  for (const auto& m : class_means) check(m, "class mean");
  for (std::size_t i = 0; i < n; ++i) {
    check(srvfs[i], "sample");
    if (labels[i].num_classes != classes.size()) throw Error(Errc::SchemaError, "label class count mismatch");
    if (initial_frames[i].size() != cols) throw Error(Errc::ShapeMismatch, "initial frame has the wrong size");
  }
}

PreparedDataset prepare(const std::vector<LandmarkSequence>& sequences, const PrepareConfig& config) {
  if (config.frames < 2) throw Error(Errc::ConfigError, "prepare needs at least 2 frames");
  if (sequences.empty()) throw Error(Errc::EmptySet, "no sequences to prepare");
  const std::size_t d = sequences.front().num_landmarks();
  std::vector<std::string> names;
  for (const auto& s : sequences) {
    if (!s.label) throw Error(Errc::SchemaError, "sequence '" + s.id + "' has no label");
    if (s.num_landmarks() != d) {
      throw Error(Errc::SchemaError, "sequence '" + s.id + "' has " + std::to_string(s.num_landmarks()) +
                                         " landmarks, expected " + std::to_string(d));
    }
    names.push_back(*s.label);
  }
  const LabelSet classes = config.labels ? *config.labels : LabelSet::from_labels(names);
  std::vector<std::size_t> counts(classes.size(), 0);
  std::vector<ExpressionLabel> labels;
  for (const auto& s : sequences) {
    const auto idx = classes.find(*s.label);
    if (!idx) throw Error(Errc::SchemaError, "sequence '" + s.id + "' has unknown label '" + *s.label + "'");
    ++counts[*idx];
    labels.emplace_back(*idx, classes.size());
  }
  std::string missing;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (counts[c] == 0) missing += (missing.empty() ? "" : ", ") + classes.name(c);
  }
  if (!missing.empty()) throw Error(Errc::MissingClass, "no sequences for class(es): " + missing);

  const std::size_t n = sequences.size();
  std::vector<std::optional<Srvf>> encoded(n);
  std::vector<RowVector> initial(n);
  std::vector<double> lengths(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    const Curve curve = Curve::from_sequence(resample_sequence(sequences[i], config.frames));
    try {
      encoded[i] = srvf_encode(curve);
    } catch (const Error& e) {
      throw Error(e.code(), "sequence '" + sequences[i].id + "': " + e.message());
    }
    initial[i] = curve.frame(0);
    lengths[i] = curve.path_length();
  });

  KarcherConfig class_cfg = config.class_karcher;
  class_cfg.threads = config.threads;
  std::vector<Srvf> means;
  std::vector<Srvf> aligned(n, *encoded.front());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<std::size_t> idx;
    std::vector<Srvf> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i].index == c) {
        idx.push_back(i);
        members.push_back(*encoded[i]);
      }
    }
    means.push_back(karcher_mean(members, class_cfg).mean);
    const auto registered = align_set_to_reference(members, means.back(), config.threads);
    for (std::size_t k = 0; k < idx.size(); ++k) aligned[idx[k]] = registered[k];
  }

  KarcherConfig chart_cfg = config.chart_karcher;
  chart_cfg.threads = config.threads;
  TangentChart chart(karcher_mean(aligned, chart_cfg).mean);

  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& s : sequences) ids.push_back(s.id);
  PreparedDataset out{classes,
                      config.frames,
                      d,
                      "prepared from " + std::to_string(n) + " sequences",
                      std::move(chart),
                      std::move(means),
                      std::move(ids),
                      std::move(labels),
                      std::move(aligned),
                      std::move(initial),
                      std::move(lengths)};
  return out;
}

void save_dataset(const PreparedDataset& data, const std::filesystem::path& path) {
  data.validate();
  detail::BinaryWriter w("SRVFDS1");
  w.u64(data.classes.size());
  w.u64(data.size());
  w.u64(data.frames);
  w.u64(data.landmarks);
  for (const auto& name : data.classes.names()) w.str(name);
  w.str(data.provenance);
  w.matrix(data.chart.reference().samples());
  for (const auto& m : data.class_means) w.matrix(m.samples());
  for (std::size_t i = 0; i < data.size(); ++i) {
    w.str(data.ids[i]);
    w.u64(data.labels[i].index);
    w.matrix(data.srvfs[i].samples());
    w.f64s(data.initial_frames[i].data(), static_cast<std::size_t>(data.initial_frames[i].size()));
    w.f64(data.path_lengths[i]);
  }
  w.save(path);
}

PreparedDataset load_dataset(const std::filesystem::path& path) {
  detail::BinaryReader r(path, "SRVFDS1", "SRVFDS");
  const auto C = r.u64();
  const auto N = r.u64();
  const auto T = r.u64();
  const auto d = r.u64();
  if (C == 0 || T < 2 || d == 0 || C > (1u << 20) || T > (1u << 24) || d > (1u << 20)) {
    throw Error(Errc::CorruptFile, "'" + path.string() + "' has an implausible header");
  }
  std::vector<std::string> names;
  for (std::uint64_t c = 0; c < C; ++c) names.push_back(r.str());
  std::string provenance = r.str();
  const std::size_t rows = T - 1;
  const std::size_t cols = 2 * d;
  auto srvf = [&](Matrix m) {
    try {
      return Srvf::from_samples(std::move(m));
    } catch (const Error&) {
      throw Error(Errc::CorruptFile, "'" + path.string() + "' holds an SRVF that is not unit norm");
    }
  };
  TangentChart chart(srvf(r.matrix(rows, cols)));
  std::vector<Srvf> means;
  for (std::uint64_t c = 0; c < C; ++c) means.push_back(srvf(r.matrix(rows, cols)));
  std::vector<std::string> ids;
  std::vector<ExpressionLabel> labels;
  std::vector<Srvf> srvfs;
  std::vector<RowVector> initial;
  std::vector<double> lengths;
  for (std::uint64_t i = 0; i < N; ++i) {
    ids.push_back(r.str());
    const auto label = r.u64();
    if (label >= C) throw Error(Errc::CorruptFile, "'" + path.string() + "' has a label out of range");
    labels.emplace_back(label, C);
    srvfs.push_back(srvf(r.matrix(rows, cols)));
    RowVector init(static_cast<Eigen::Index>(cols));
    r.f64s(init.data(), cols);
    initial.push_back(std::move(init));
    lengths.push_back(r.f64());
  }
  if (!r.at_end()) throw Error(Errc::CorruptFile, "'" + path.string() + "' has trailing bytes");
  PreparedDataset out{LabelSet(std::move(names)), T, d, std::move(provenance), std::move(chart),
                      std::move(means), std::move(ids), std::move(labels), std::move(srvfs),
                      std::move(initial), std::move(lengths)};
  out.validate();
  return out;
}

void SynthSpec::validate() const {
  if (classes < 1) throw Error(Errc::InvalidSpec, "need at least one class");
  if (per_class < 1) throw Error(Errc::InvalidSpec, "need at least one sequence per class");
  if (frames < 3) throw Error(Errc::InvalidSpec, "need at least 3 frames");
  if (landmarks < 1) throw Error(Errc::InvalidSpec, "need at least one landmark");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error(Errc::InvalidSpec, "noise must be finite and >= 0");
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw Error(Errc::InvalidSpec, "amplitude must be positive");
}

Frame synth_neutral_frame(std::size_t landmarks) {
  Frame f(landmarks);
  for (std::size_t j = 0; j < landmarks; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(landmarks);
    f[j] = {32.0 + 12.0 * std::cos(a), 32.0 + 12.0 * std::sin(a)};
  }
  return f;
}

std::vector<LandmarkSequence> synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pi = std::numbers::pi;

  struct Prototype {
    std::vector<double> angle;
    std::vector<double> gain;
  };
  std::vector<Prototype> protos(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t j = 0; j < spec.landmarks; ++j) {
      const double base = 2.0 * pi * static_cast<double>(c) / static_cast<double>(spec.classes) +
                          pi * static_cast<double>(j) / static_cast<double>(spec.landmarks);
      protos[c].angle.push_back(base + 0.3 * (2.0 * unit(rng) - 1.0));
      protos[c].gain.push_back(0.6 + 0.4 * unit(rng));
    }
  }

  auto profile = [pi](std::size_t c, double t) {
    if (c % 2 == 0) return std::sin(pi * t);
    return t * t * (3.0 - 2.0 * t);
  };
  const LabelSet expr = LabelSet::expressions();
  auto class_name = [&](std::size_t c) {
    return spec.classes <= expr.size() ? expr.name(c) : "class" + std::to_string(c);
  };

  const Frame neutral = synth_neutral_frame(spec.landmarks);
  std::vector<LandmarkSequence> out;
  out.reserve(spec.classes * spec.per_class);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t k = 0; k < spec.per_class; ++k) {
      const double warp = std::exp(0.25 * (2.0 * unit(rng) - 1.0));
      const double scale = 0.8 + 0.4 * unit(rng);
      const double dx = 2.0 * (2.0 * unit(rng) - 1.0);
      const double dy = 2.0 * (2.0 * unit(rng) - 1.0);
      LandmarkSequence seq;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03zu", class_name(c).c_str(), k);
      seq.id = id;
      seq.label = class_name(c);
      seq.frames.assign(spec.frames, Frame(spec.landmarks));
      for (std::size_t t = 0; t < spec.frames; ++t) {
        const double s = std::pow(static_cast<double>(t) / static_cast<double>(spec.frames - 1), warp);
        const double p = spec.amplitude * scale * profile(c, s);
        for (std::size_t j = 0; j < spec.landmarks; ++j) {
          const double g = protos[c].gain[j] * p;
          Point2& pt = seq.frames[t][j];
          pt.x = neutral[j].x + dx + g * std::cos(protos[c].angle[j]);
          pt.y = neutral[j].y + dy + g * std::sin(protos[c].angle[j]);
          if (spec.noise > 0.0) {
            pt.x += spec.noise * normal(rng);
            pt.y += spec.noise * normal(rng);
          }
        }
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace srvfgan
