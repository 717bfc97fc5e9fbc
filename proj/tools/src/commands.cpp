#include "command.hpp"

#include "srvfgan/alignment.hpp"
#include "srvfgan/csv.hpp"
#include "srvfgan/dataset.hpp"
#include "srvfgan/diffcore.hpp"
#include "srvfgan/error.hpp"
#include "srvfgan/evaluation.hpp"
#include "srvfgan/motiongan.hpp"
#include "srvfgan/synthesis.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

namespace srvfgan::cli {

using nlohmann::json;

namespace {

std::vector<LandmarkSequence> load_nonempty(const std::string& path) {
  auto seqs = load_landmark_sequences(path);
  if (seqs.empty()) throw Error(Errc::EmptySet, "'" + path + "' holds no sequences");
  return seqs;
}

/// Resamples to `frames` when non-zero; otherwise all lengths must agree.
std::vector<Srvf> encode_all(const std::vector<LandmarkSequence>& seqs, std::size_t frames) {
  std::vector<Srvf> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    const LandmarkSequence r = frames > 0 && s.num_frames() != frames ? resample_sequence(s, frames) : s;
    if (!out.empty() && r.num_frames() != out.front().num_frames()) {
      throw Error(Errc::ShapeMismatch, "sequences have different lengths (" + std::to_string(r.num_frames()) +
                                           " and " + std::to_string(out.front().num_frames()) +
                                           " frames); pass --frames to resample");
    }
    out.push_back(srvf_encode(Curve::from_sequence(r)));
  }
  return out;
}

std::vector<std::string> label_names(const std::vector<LandmarkSequence>& seqs) {
  std::vector<std::string> out;
  for (const auto& s : seqs) out.push_back(s.label.value_or("unlabeled"));
  return out;
}

Frame first_frame(const std::string& path) {
  const auto seqs = load_nonempty(path);
  seqs.front().validate();
  return seqs.front().frames.front();
}

json samples_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_json(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
  out << value.dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

template <typename Writer>
void write_text(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
  writer(out);
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

IntensityOptions intensity_options(double intensity, const std::string& mode, double max_intensity) {
  IntensityOptions o;
  o.intensity = intensity;
  o.mode = mode == "absolute" ? IntensityMode::Absolute : IntensityMode::Relative;
  o.max_intensity = max_intensity;
  return o;
}

template <typename State>
std::pair<Command&, State&> make(CLI::App& app, CommandList& list, const std::string& name,
                                 const std::string& description) {
  auto cmd = std::make_unique<Command>(app, name, description);
  auto state = std::make_shared<State>();
  cmd->state = state;
  list.push_back(std::move(cmd));
  return {*list.back(), *state};
}

// ---------------------------------------------------------------------------

void add_synth(CLI::App& app, CommandList& list) {
  struct S {
    SynthSpec spec;
    std::uint64_t seed = 0;
    std::string out;
  };
  auto [cmd, s] = make<S>(app, list, "synth", "Write a synthetic labelled landmark-motion corpus (JSON Lines)");
  cmd.param("--classes", s.spec.classes, "Number of classes")->capture_default_str();
  cmd.param("--per-class", s.spec.per_class, "Sequences per class")->capture_default_str();
  cmd.param("--frames", s.spec.frames, "Frames per sequence")->capture_default_str();
  cmd.param("--landmarks", s.spec.landmarks, "Landmarks per frame")->capture_default_str();
  cmd.param("--noise", s.spec.noise, "Per-coordinate jitter (pixels)")->capture_default_str();
  cmd.param("--amplitude", s.spec.amplitude, "Peak class displacement (pixels)")->capture_default_str();
  cmd.param("--seed", s.seed, "Random seed")->capture_default_str();
  cmd.output("--out", s.out, "Output .jsonl")->required();
  cmd.run = [&s = s](const Context& ctx) {
    const auto corpus = synth_corpus(s.spec, s.seed);
    save_landmark_jsonl(s.out, corpus);
    ctx.log << "wrote " << corpus.size() << " sequences to " << s.out << "\n";
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    o.summary["sequences"] = corpus.size();
    return o;
  };
}

void add_prepare(CLI::App& app, CommandList& list) {
  struct S {
    std::string in, out;
    std::size_t frames = 32;
    std::size_t karcher_iters = 100;
  };
  auto [cmd, s] = make<S>(app, list, "prepare",
                          "Resample, encode and register a labelled corpus into a prepared dataset");
  cmd.input("--in", s.in, "Landmark sequences (.jsonl or .csv)")->required();
  cmd.param("--frames", s.frames, "Frames after resampling")->capture_default_str();
  cmd.param("--karcher-iters", s.karcher_iters, "Iteration cap of the class means")->capture_default_str();
  cmd.output("--out", s.out, "Output dataset")->required();
  cmd.run = [&s = s](const Context& ctx) {
    PrepareConfig pc;
    pc.frames = s.frames;
    pc.class_karcher.max_iters = s.karcher_iters;
    pc.threads = ctx.threads;
    const auto data = prepare(load_nonempty(s.in), pc);
    save_dataset(data, s.out);
    ctx.log << "prepared " << data.size() << " sequences in " << data.classes.size() << " classes (T = " << data.frames
            << ", d = " << data.landmarks << ")\n";
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    o.summary["sequences"] = data.size();
    o.summary["classes"] = data.classes.names();
    return o;
  };
}

void add_mean(CLI::App& app, CommandList& list) {
  struct S {
    std::string in, out, cls;
    std::size_t frames = 32;
    std::size_t max_iters = 100;
    bool align_each_iter = false;
  };
  auto [cmd, s] = make<S>(app, list, "mean", "Karcher mean of the SRVFs of a selection of sequences");
  cmd.input("--in", s.in, "Landmark sequences")->required();
  cmd.param("--class", s.cls, "Only sequences with this label (default: all)");
  cmd.param("--frames", s.frames, "Frames after resampling")->capture_default_str();
  cmd.param("--max-iters", s.max_iters, "Iteration cap")->capture_default_str();
  cmd.flag("--align-each-iter", s.align_each_iter, "Register members to the estimate at every step");
  cmd.output("--out", s.out, "Output .json")->required();
  cmd.run = [&s = s](const Context& ctx) {
    std::vector<LandmarkSequence> selected;
    for (auto& seq : load_nonempty(s.in)) {
      if (s.cls.empty() || seq.label == s.cls) selected.push_back(std::move(seq));
    }
    if (selected.empty()) throw Error(Errc::MissingClass, "no sequence has label '" + s.cls + "'");
    KarcherConfig kc;
    kc.max_iters = s.max_iters;
    kc.align_each_iter = s.align_each_iter;
    kc.threads = ctx.threads;
    const auto r = karcher_mean(encode_all(selected, s.frames), kc);
    if (!r.converged) ctx.log << "warning: Karcher mean did not converge (residual " << r.residual << ")\n";
    json j;
    j["class"] = s.cls;
    j["members"] = selected.size();
    j["iterations"] = r.iterations;
    j["residual"] = r.residual;
    j["converged"] = r.converged;
    j["frames"] = r.mean.num_frames();
    j["landmarks"] = r.mean.num_landmarks();
    j["samples"] = samples_json(r.mean.samples());
    write_json(s.out, j);
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    o.summary["members"] = selected.size();
    o.summary["converged"] = r.converged;
    return o;
  };
}

void add_align(CLI::App& app, CommandList& list) {
  struct S {
    std::string a, b, out;
    std::size_t index_a = 0, index_b = 0, frames = 32;
  };
  auto [cmd, s] = make<S>(app, list, "align", "Register the SRVF of sequence b onto sequence a");
  cmd.input("--a", s.a, "Reference sequences file")->required();
  cmd.input("--b", s.b, "Sequences file to register")->required();
  cmd.param("--index-a", s.index_a, "Sequence index within --a")->capture_default_str();
  cmd.param("--index-b", s.index_b, "Sequence index within --b")->capture_default_str();
  cmd.param("--frames", s.frames, "Frames after resampling")->capture_default_str();
  cmd.output("--out", s.out, "Output .json")->required();
  cmd.run = [&s = s](const Context& ctx) {
    const auto pick = [&](const std::string& path, std::size_t index) {
      auto seqs = load_nonempty(path);
      if (index >= seqs.size()) {
        throw Error(Errc::DomainError, "'" + path + "' has " + std::to_string(seqs.size()) + " sequences, index " +
                                           std::to_string(index) + " requested");
      }
      return encode_all({seqs[index]}, s.frames).front();
    };
    const Srvf q1 = pick(s.a, s.index_a);
    const Srvf q2 = pick(s.b, s.index_b);
    const double before = geodesic_distance(q1, q2);
    const auto r = align(q1, q2);
    ctx.log << "distance " << before << " -> " << r.cost << "\n";
    json j;
    j["distance_before"] = before;
    j["distance_after"] = r.cost;
    j["energy"] = r.energy;
    j["warping"] = r.warping.knots();
    j["aligned"] = samples_json(r.aligned.samples());
    write_json(s.out, j);
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    o.summary["distance_before"] = before;
    o.summary["distance_after"] = r.cost;
    return o;
  };
}

void add_train(CLI::App& app, CommandList& list) {
  struct S {
    TrainConfig config;
    std::string data, out, log;
    std::uint64_t iters = 0;
    double epochs = 200;
    std::uint64_t log_every = 100;
    bool strict = false, batchnorm = false;
    CLI::Option* iters_opt = nullptr;
  };
  auto [cmd, s] = make<S>(app, list, "train", "Train a conditional MotionGAN on a prepared dataset");
  TrainConfig& c = s.config;
  cmd.input("--data", s.data, "Prepared dataset")->required();
  s.iters_opt = cmd.param("--iters", s.iters, "Generator iterations (default: from --epochs)");
  cmd.param("--epochs", s.epochs, "Passes over the data when --iters is absent")->capture_default_str();
  cmd.param("--n-disc", c.n_disc, "Critic steps per generator step")->capture_default_str();
  cmd.param("--lambda", c.lambda, "Gradient-penalty weight")->capture_default_str();
  cmd.param("--lr", c.lr, "Adam learning rate")->capture_default_str();
  cmd.param("--beta1", c.beta1, "Adam beta1")->capture_default_str();
  cmd.param("--beta2", c.beta2, "Adam beta2")->capture_default_str();
  cmd.param("--batch", c.batch, "Minibatch size")->capture_default_str();
  cmd.param("--alpha1", c.alpha1, "Adversarial weight")->capture_default_str();
  cmd.param("--alpha2", c.alpha2, "Sphere-distance weight")->capture_default_str();
  cmd.param("--alpha3", c.alpha3, "Tangent L1 weight")->capture_default_str();
  cmd.param("--z-dim", c.z_dim, "Noise dimension")->capture_default_str();
  cmd.param("--gen-widths", c.generator_widths, "Generator hidden widths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  cmd.param("--critic-widths", c.critic_widths, "Critic hidden widths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  cmd.param("--seed", c.seed, "Random seed")->capture_default_str();
  cmd.flag("--algorithm1-strict", s.strict, "Adversarial generator loss only");
  cmd.flag("--critic-batchnorm", s.batchnorm, "Batch normalization in the critic");
  cmd.param("--log-every", s.log_every, "Progress line interval (0: none)")->capture_default_str();
  cmd.output("--out", s.out, "Output checkpoint")->required();
  cmd.output("--log", s.log, "Per-iteration training log (.csv)");
  cmd.run = [&s = s](const Context& ctx) {
    const auto data = load_dataset(s.data);
    TrainConfig cfg = s.config;
    if (s.iters_opt->count() == 0) {
      s.iters = static_cast<std::uint64_t>(
          std::ceil(s.epochs * static_cast<double>(data.size()) / static_cast<double>(std::max<std::size_t>(cfg.batch, 1))));
    }
    cfg.n_iteration = s.iters;
    cfg.algorithm1_strict = s.strict;
    cfg.critic_batchnorm = s.batchnorm;
    ctx.log << "training " << cfg.n_iteration << " iterations on " << data.size() << " sequences\n";

    std::ofstream log_file;
    if (!s.log.empty()) {
      log_file.open(s.log, std::ios::binary | std::ios::trunc);
      if (!log_file) throw Error(Errc::IoError, "cannot write '" + s.log + "'");
      csv::write_record(log_file, {"iteration", "critic_loss", "wasserstein", "penalty", "generator_loss",
                                   "adversarial", "sphere", "tangent"});
    }
    const auto num = [](double v) {
      std::ostringstream o;
      o << std::setprecision(17) << v;
      return o.str();
    };
    auto [model, log] = train(data, cfg, ctx.threads, [&](const TrainRecord& r) {
      if (log_file.is_open()) {
        csv::write_record(log_file, {std::to_string(r.iteration), num(r.critic_loss), num(r.wasserstein),
                                     num(r.penalty), num(r.generator_loss), num(r.adversarial), num(r.sphere),
                                     num(r.tangent)});
      }
      if (s.log_every > 0 && (r.iteration % s.log_every == 0 || r.iteration == s.iters)) {
        ctx.log << "iter " << r.iteration << "  W " << r.wasserstein << "  critic " << r.critic_loss << "  gen "
                << r.generator_loss << "\n";
      }
    });
    if (log_file.is_open()) {
      log_file.close();
      if (!log_file) throw Error(Errc::IoError, "failed writing '" + s.log + "'");
    }
    save_checkpoint(model, s.out);
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    if (!s.log.empty()) o.outputs.push_back({"--log", s.log});
    o.summary["iterations"] = model.iterations;
    if (!log.records.empty()) o.summary["final_wasserstein"] = log.records.back().wasserstein;
    return o;
  };
}

void add_generate(CLI::App& app, CommandList& list) {
  struct S {
    std::string model, cls, neutral, out, mode = "relative";
    double intensity = 1.0, max_intensity = 30.0;
    std::size_t count = 1;
    std::uint64_t seed = 0;
  };
  auto [cmd, s] = make<S>(app, list, "generate", "Sample class-conditional landmark sequences from a checkpoint");
  cmd.input("--model", s.model, "MotionGAN checkpoint")->required();
  cmd.param("--class", s.cls, "Class name (default: every class)");
  cmd.input("--neutral", s.neutral, "Sequences file whose first frame is the neutral face (default: synthetic rest)");
  cmd.param("--intensity", s.intensity, "Intensity factor")->capture_default_str();
  cmd.param("--mode", s.mode, "Intensity mode")->check(CLI::IsMember({"relative", "absolute"}))->capture_default_str();
  cmd.param("--max-intensity", s.max_intensity, "Upper bound on --intensity")->capture_default_str();
  cmd.param("--count", s.count, "Samples per class")->capture_default_str();
  cmd.param("--seed", s.seed, "Base seed; sample k of class c uses seed + c * count + k")->capture_default_str();
  cmd.output("--out", s.out, "Output .jsonl")->required();
  cmd.run = [&s = s](const Context& ctx) {
    const MotionGanModel model = load_checkpoint(s.model);
    const Frame neutral = s.neutral.empty() ? synth_neutral_frame(model.landmarks) : first_frame(s.neutral);
    const auto opts = intensity_options(s.intensity, s.mode, s.max_intensity);
    std::vector<std::size_t> classes;
    if (s.cls.empty()) {
      for (std::size_t c = 0; c < model.classes(); ++c) classes.push_back(c);
    } else {
      classes.push_back(LabelSet(model.class_names).index_of(s.cls));
    }
    std::vector<LandmarkSequence> out;
    for (const std::size_t c : classes) {
      for (std::size_t k = 0; k < s.count; ++k) {
        out.push_back(generate_landmark_sequence(model, c, neutral, opts, s.seed + c * s.count + k));
      }
    }
    save_landmark_jsonl(s.out, out);
    ctx.log << "wrote " << out.size() << " sequences to " << s.out << "\n";
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    o.summary["sequences"] = out.size();
    return o;
  };
}

void add_transfer(CLI::App& app, CommandList& list) {
  struct S {
    std::string source, neutral, out, mode = "relative";
    double intensity = 1.0, max_intensity = 30.0;
  };
  auto [cmd, s] = make<S>(app, list, "transfer", "Replay the motion of source sequences on another neutral face");
  cmd.input("--source", s.source, "Source sequences")->required();
  cmd.input("--neutral", s.neutral, "Sequences file whose first frame is the target neutral face")->required();
  cmd.param("--intensity", s.intensity, "Intensity factor")->capture_default_str();
  cmd.param("--mode", s.mode, "Intensity mode")->check(CLI::IsMember({"relative", "absolute"}))->capture_default_str();
  cmd.param("--max-intensity", s.max_intensity, "Upper bound on --intensity")->capture_default_str();
  cmd.output("--out", s.out, "Output .jsonl")->required();
  cmd.run = [&s = s](const Context& ctx) {
    const Frame neutral = first_frame(s.neutral);
    const auto opts = intensity_options(s.intensity, s.mode, s.max_intensity);
    std::vector<LandmarkSequence> out;
    for (const auto& src : load_nonempty(s.source)) out.push_back(transfer_motion(src, neutral, opts));
    save_landmark_jsonl(s.out, out);
    ctx.log << "transferred " << out.size() << " sequences\n";
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    o.summary["sequences"] = out.size();
    return o;
  };
}

void add_heatmaps(CLI::App& app, CommandList& list) {
  struct S {
    std::string in, out, pgm, size = "64x64";
    std::size_t index = 0;
    double sigma = 1.5;
    bool clamp = false;
  };
  auto [cmd, s] = make<S>(app, list, "heatmaps", "Render per-landmark Gaussian heatmaps of one sequence");
  cmd.input("--in", s.in, "Landmark sequences")->required();
  cmd.param("--index", s.index, "Sequence index within --in")->capture_default_str();
  cmd.param("--size", s.size, "Image size WIDTHxHEIGHT")->capture_default_str();
  cmd.param("--sigma", s.sigma, "Gaussian standard deviation (pixels)")->capture_default_str();
  cmd.flag("--clamp", s.clamp, "Clamp out-of-image landmarks instead of failing");
  cmd.output("--out", s.out, "Output .npy (T x d x H x W float32)")->required();
  cmd.output("--pgm", s.pgm, "Also write one PGM preview per frame with this path prefix");
  cmd.run = [&s = s](const Context& ctx) {
    static const std::regex size_pattern(R"((\d+)x(\d+))");
    std::smatch m;
    if (!std::regex_match(s.size, m, size_pattern)) {
      throw Error(Errc::DomainError, "--size must look like 64x64, got '" + s.size + "'");
    }
    HeatmapOptions ho;
    ho.width = std::stoul(m[1]);
    ho.height = std::stoul(m[2]);
    ho.sigma = s.sigma;
    ho.out_of_bounds = s.clamp ? OutOfBoundsPolicy::Clamp : OutOfBoundsPolicy::Error;
    const auto seqs = load_nonempty(s.in);
    if (s.index >= seqs.size()) throw Error(Errc::DomainError, "sequence index out of range");
    const auto stack = render_heatmaps(seqs[s.index], ho);
    save_heatmaps_npy(stack, s.out);
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    if (!s.pgm.empty()) {
      for (const auto& p : save_heatmap_pgms(stack, s.pgm)) o.outputs.push_back({"--pgm", p});
    }
    ctx.log << "rendered " << stack.frames << " x " << stack.channels << " heatmaps\n";
    o.summary["frames"] = stack.frames;
    o.summary["channels"] = stack.channels;
    return o;
  };
}

void add_embed(CLI::App& app, CommandList& list) {
  struct S {
    std::string in, out, coords, distances;
    std::size_t frames = 0;
    bool align = false;
  };
  auto [cmd, s] = make<S>(app, list, "embed", "Geodesic distance matrix, classical MDS and a scatter plot");
  cmd.input("--in", s.in, "Labelled landmark sequences")->required();
  cmd.param("--frames", s.frames, "Resample to this many frames (0: keep)")->capture_default_str();
  cmd.flag("--align", s.align, "Register every pair before measuring");
  cmd.output("--out", s.out, "Output scatter .svg")->required();
  cmd.output("--coords", s.coords, "Embedded coordinates (.csv)");
  cmd.output("--distances", s.distances, "Distance matrix (.csv)");
  cmd.run = [&s = s](const Context& ctx) {
    const auto seqs = load_nonempty(s.in);
    const auto names = label_names(seqs);
    const LabelSet classes = LabelSet::from_labels(names);
    std::vector<std::size_t> labels;
    for (const auto& n : names) labels.push_back(classes.index_of(n));
    const auto d = distance_matrix(encode_all(seqs, s.frames), labels, s.align, ctx.threads);
    const auto mds = classical_mds(d.values, 2);
    if (mds.degenerate) ctx.log << "warning: " << mds.warning << "\n";
    export_scatter_svg(mds.coords, labels, classes.names(), s.out);
    Outcome o;
    o.outputs.push_back({"--out", s.out});
    if (!s.coords.empty()) {
      write_text(s.coords, [&](std::ostream& out) { write_coords_csv(out, mds.coords, labels, classes.names()); });
      o.outputs.push_back({"--coords", s.coords});
    }
    if (!s.distances.empty()) {
      std::vector<std::string> ids;
      for (const auto& q : seqs) ids.push_back(q.id);
      write_text(s.distances, [&](std::ostream& out) { write_distance_csv(out, d, ids); });
      o.outputs.push_back({"--distances", s.distances});
    }
    ctx.log << "MDS stress " << mds.stress << "\n";
    o.summary["stress"] = mds.stress;
    o.summary["eigenvalues"] = mds.eigenvalues;
    if (classes.size() >= 2 && d.size() > 1) o.summary["embedded_silhouette"] = silhouette(euclidean_distances(mds.coords), labels);
    return o;
  };
}

void add_eval(CLI::App& app, CommandList& list) {
  struct S {
    std::string in, data, report;
    std::size_t frames = 0;
    bool align = false;
  };
  auto [cmd, s] = make<S>(app, list, "eval", "Class separation of labelled sequences on the sphere");
  cmd.input("--in", s.in, "Labelled landmark sequences")->required();
  cmd.input("--data", s.data, "Prepared dataset whose class means and frame count are used");
  cmd.param("--frames", s.frames, "Resample to this many frames (0: keep, or the dataset's)")->capture_default_str();
  cmd.flag("--align", s.align, "Register to each class mean and every pair before measuring");
  cmd.output("--report", s.report, "Output report (.csv)")->required();
  cmd.run = [&s = s](const Context& ctx) {
    const auto seqs = load_nonempty(s.in);
    const auto names = label_names(seqs);
    std::optional<PreparedDataset> data;
    if (!s.data.empty()) data = load_dataset(s.data);
    const LabelSet classes = data ? data->classes : LabelSet::from_labels(names);
    std::vector<std::size_t> labels;
    for (const auto& n : names) labels.push_back(classes.index_of(n));
    const std::size_t frames = s.frames > 0 ? s.frames : (data ? data->frames : 0);
    const auto points = encode_all(seqs, frames);
    const auto d = distance_matrix(points, labels, s.align, ctx.threads);
    SeparationOptions so;
    so.align = s.align;
    so.threads = ctx.threads;
    if (data) so.class_means = data->class_means;
    const auto r = class_separation(d, points, so);
    write_text(s.report, [&](std::ostream& out) { write_report_csv(out, r); });
    ctx.log << "accuracy " << r.accuracy << "  silhouette " << r.silhouette << "  intra " << r.intra_mean
            << "  inter " << r.inter_mean << "\n";
    Outcome o;
    o.outputs.push_back({"--report", s.report});
    o.summary = {{"accuracy", r.accuracy},
                 {"silhouette", r.silhouette},
                 {"intra_mean", r.intra_mean},
                 {"inter_mean", r.inter_mean}};
    return o;
  };
}

void add_gradcheck(CLI::App& app, CommandList& list) {
  struct S {
    std::size_t trials = 3;
    double tol = 1e-3;
    std::uint64_t seed = 0;
  };
  auto [cmd, s] = make<S>(app, list, "gradcheck", "Finite-difference check of the autodiff primitives and losses");
  cmd.writes_manifest = false;
  cmd.param("--trials", s.trials, "Random draws per check")->capture_default_str();
  cmd.param("--tol", s.tol, "Relative error tolerance")->capture_default_str();
  cmd.param("--seed", s.seed, "Random seed")->capture_default_str();
  cmd.run = [&s = s](const Context& ctx) {
    auto report = diff::gradcheck_suite(s.trials, s.tol, s.seed);
    const auto losses = loss_gradcheck(s.trials, s.tol, s.seed + 1);
    report.entries.insert(report.entries.end(), losses.entries.begin(), losses.entries.end());
    for (const auto& e : report.entries) {
      ctx.log << (e.passed ? "ok    " : "FAIL  ") << std::left << std::setw(32) << e.name << " max rel error "
              << std::scientific << std::setprecision(3) << e.max_rel_error << std::defaultfloat << "\n";
    }
    Outcome o;
    o.exit_code = report.passed() ? 0 : 3;
    o.summary["passed"] = report.passed();
    return o;
  };
}

}  // namespace

void add_pipeline_commands(CLI::App& app, CommandList& commands) {
  add_synth(app, commands);
  add_prepare(app, commands);
  add_mean(app, commands);
  add_align(app, commands);
  add_train(app, commands);
  add_generate(app, commands);
  add_transfer(app, commands);
  add_heatmaps(app, commands);
  add_embed(app, commands);
  add_eval(app, commands);
  add_gradcheck(app, commands);
}

}  // namespace srvfgan::cli
