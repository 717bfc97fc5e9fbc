#include "srvfgan/motiongan.hpp"

#include "binary_io.hpp"
#include "srvfgan/error.hpp"
#include "srvfgan/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace srvfgan {

using diff::Tensor;

RowVector flatten_samples(const Matrix& samples) {
  return Eigen::Map<const RowVector>(samples.data(), samples.size());
}

Matrix unflatten_samples(const RowVector& row, std::size_t intervals) {
  const auto rows = static_cast<Eigen::Index>(intervals);
  if (rows == 0 || row.size() % rows != 0) {
    throw Error(Errc::ShapeMismatch, "cannot split " + std::to_string(row.size()) + " values into " +
                                         std::to_string(intervals) + " intervals");
  }
  return Eigen::Map<const Matrix>(row.data(), rows, row.size() / rows);
}

// ---------------------------------------------------------------------------
// Sphere maps

SphereChart::SphereChart(const TangentChart& chart)
    : chart_(chart),
      intervals_(chart.reference().num_intervals()),
      dt_(chart.reference().dt()),
      y_row_(flatten_samples(chart.reference().samples())),
      y_(Matrix(y_row_)),
      y_col_dt_(Matrix(y_row_.transpose() * dt_)) {}

Tensor SphereChart::inner_y(const Tensor& x) const { return diff::matmul(x, y_col_dt_); }

Tensor SphereChart::sq_norm(const Tensor& x) const { return diff::scale(diff::sum_rows(x * x), dt_); }

Tensor SphereChart::project(const Tensor& v) const { return v - inner_y(v) * y_; }

Tensor SphereChart::clamp_norm(const Tensor& v, double max_norm) const {
  const Tensor s = diff::clamp(sq_norm(v), max_norm * max_norm, std::numeric_limits<double>::max());
  return v * (Tensor::scalar(max_norm) / diff::sqrt(s));
}

Tensor SphereChart::exp(const Tensor& v) const {
  const Tensor s = sq_norm(v);
  return diff::cos_sqrt(s) * y_ + diff::sinc_sqrt(s) * v;
}

Tensor SphereChart::log(const Tensor& q) const {
  Tensor c = inner_y(q);
  const double lowest = c.value().minCoeff();
  if (!(std::acos(std::clamp(lowest, -1.0, 1.0)) < std::numbers::pi - tolerances::kAntipodal)) {
    throw Error(Errc::AntipodalPoint, "log map: point is antipodal to the chart reference");
  }
  c = diff::clamp(c, -1.0, 1.0);
  return diff::acos_ratio(c) * (q - c * y_);
}

Tensor SphereChart::distance(const Tensor& a, const Tensor& b) const {
  const Tensor chord = diff::sqrt(diff::clamp(sq_norm(a - b), 0.0, 4.0));
  return diff::scale(diff::asin(diff::scale(chord, 0.5)), 2.0);
}

Tensor SphereChart::l1_norm(const Tensor& x) const { return diff::scale(diff::sum_rows(diff::abs(x)), dt_); }

// ---------------------------------------------------------------------------
// Networks

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  Matrix b(1, static_cast<Eigen::Index>(out));
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
  return {Tensor(std::move(w), true), Tensor(std::move(b), true)};
}

Tensor DenseLayer::operator()(const Tensor& x) const { return diff::matmul(x, weight) + bias; }

namespace {

void check_batch(const char* what, const Tensor& x, std::size_t cols) {
  if (static_cast<std::size_t>(x.cols()) != cols) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": expected " + std::to_string(cols) + " columns, got " +
                                         std::to_string(x.cols()));
  }
}

void check_labels(const Tensor& x, const Tensor& labels, std::size_t classes) {
  check_batch("labels", labels, classes);
  if (labels.rows() != x.rows()) {
    throw Error(Errc::ShapeMismatch, "batch of " + std::to_string(x.rows()) + " rows has " +
                                         std::to_string(labels.rows()) + " label rows");
  }
}

void check_count(const std::vector<Tensor>& params, std::size_t expected) {
  if (params.size() != expected) {
    throw Error(Errc::ShapeMismatch, "expected " + std::to_string(expected) + " parameter tensors, got " +
                                         std::to_string(params.size()));
  }
}

}  // namespace

GeneratorNet GeneratorNet::init(std::size_t z_dim, std::size_t classes, const std::vector<std::size_t>& widths,
                                std::size_t out_dim, double output_scale, std::mt19937_64& rng) {
  GeneratorNet g;
  g.z_dim = z_dim;
  g.classes = classes;
  g.out_dim = out_dim;
  g.output_scale = output_scale;
  std::size_t in = z_dim + classes;
  for (const auto w : widths) {
    g.layers.push_back(DenseLayer::init(in, w, rng));
    in = w + classes;
  }
  g.layers.push_back(DenseLayer::init(in, out_dim, rng));
  return g;
}

std::vector<Tensor> GeneratorNet::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

GeneratorNet GeneratorNet::with_parameters(const std::vector<Tensor>& params) const {
  check_count(params, 2 * layers.size());
  GeneratorNet g = *this;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (params[2 * i].shape() != layers[i].weight.shape() || params[2 * i + 1].shape() != layers[i].bias.shape()) {
      throw Error(Errc::ShapeMismatch, "generator layer " + std::to_string(i) + " parameter shape differs");
    }
    g.layers[i] = {params[2 * i], params[2 * i + 1]};
  }
  return g;
}

std::vector<std::size_t> GeneratorNet::widths() const {
  std::vector<std::size_t> w;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) w.push_back(static_cast<std::size_t>(layers[i].bias.cols()));
  return w;
}

Tensor GeneratorNet::raw(const Tensor& z, const Tensor& labels) const {
  check_batch("generator noise", z, z_dim);
  check_labels(z, labels, classes);
  Tensor h = diff::concat_cols({z, labels});
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = diff::concat_cols({diff::relu(layers[i](h)), labels});
  }
  return diff::scale(diff::tanh(layers.back()(h)), output_scale);
}

CriticNet CriticNet::init(std::size_t in_dim, std::size_t classes, const std::vector<std::size_t>& widths,
                          bool batchnorm, std::mt19937_64& rng) {
  CriticNet c;
  c.in_dim = in_dim;
  c.classes = classes;
  c.batchnorm = batchnorm;
  std::size_t in = in_dim + classes;
  for (const auto w : widths) {
    c.layers.push_back(DenseLayer::init(in, w, rng));
    if (batchnorm) {
      c.bn_gamma.emplace_back(Matrix::Ones(1, static_cast<Eigen::Index>(w)), true);
      c.bn_beta.emplace_back(Matrix::Zero(1, static_cast<Eigen::Index>(w)), true);
    }
    in = w + classes;
  }
  c.layers.push_back(DenseLayer::init(in, 1, rng));
  return c;
}

std::vector<Tensor> CriticNet::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  for (std::size_t i = 0; i < bn_gamma.size(); ++i) {
    out.push_back(bn_gamma[i]);
    out.push_back(bn_beta[i]);
  }
  return out;
}

CriticNet CriticNet::with_parameters(const std::vector<Tensor>& params) const {
  check_count(params, 2 * layers.size() + 2 * bn_gamma.size());
  CriticNet c = *this;
  const auto current = parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != current[i].shape()) {
      throw Error(Errc::ShapeMismatch, "critic parameter " + std::to_string(i) + " shape differs");
    }
  }
  for (std::size_t i = 0; i < layers.size(); ++i) c.layers[i] = {params[2 * i], params[2 * i + 1]};
  const std::size_t base = 2 * layers.size();
  for (std::size_t i = 0; i < bn_gamma.size(); ++i) {
    c.bn_gamma[i] = params[base + 2 * i];
    c.bn_beta[i] = params[base + 2 * i + 1];
  }
  return c;
}

std::vector<std::size_t> CriticNet::widths() const {
  std::vector<std::size_t> w;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) w.push_back(static_cast<std::size_t>(layers[i].bias.cols()));
  return w;
}

Tensor CriticNet::operator()(const Tensor& x, const Tensor& labels) const {
  check_batch("critic input", x, in_dim);
  check_labels(x, labels, classes);
  Tensor h = diff::concat_cols({x, labels});
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    Tensor a = layers[i](h);
    if (batchnorm) {
      const double inv_b = 1.0 / static_cast<double>(a.rows());
      const Tensor centered = a - diff::scale(diff::sum_cols(a), inv_b);
      const Tensor var = diff::scale(diff::sum_cols(centered * centered), inv_b);
      a = centered / diff::sqrt(diff::add_scalar(var, 1e-5)) * bn_gamma[i] + bn_beta[i];
    }
    h = diff::concat_cols({diff::leaky_relu(a, 0.2), labels});
  }
  return layers.back()(h);
}

// ---------------------------------------------------------------------------
// Configuration and model

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::ConfigError, what); };
  adam().validate();
  if (batch == 0) fail("batch must be positive");
  if (n_disc == 0) fail("n_disc must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be non-negative");
  for (const double a : {alpha1, alpha2, alpha3}) {
    if (!(a >= 0.0) || !std::isfinite(a)) fail("loss weights must be non-negative");
  }
  if (z_dim == 0) fail("z_dim must be positive");
  if (!(output_scale > 0.0) || !std::isfinite(output_scale)) fail("output_scale must be positive");
  if (!(max_tangent_norm > 0.0 && max_tangent_norm < std::numbers::pi)) {
    fail("max_tangent_norm must lie in (0, pi)");
  }
  for (const auto w : generator_widths) {
    if (w == 0) fail("generator widths must be positive");
  }
  for (const auto w : critic_widths) {
    if (w == 0) fail("critic widths must be positive");
  }
}

diff::AdamConfig TrainConfig::adam() const {
  diff::AdamConfig a;
  a.lr = lr;
  a.beta1 = beta1;
  a.beta2 = beta2;
  return a;
}

MotionGanModel MotionGanModel::init(const TrainConfig& config, const std::vector<std::string>& class_names,
                                    const TangentChart& chart) {
  config.validate();
  if (class_names.empty()) throw Error(Errc::ConfigError, "model needs at least one class");
  MotionGanModel m;
  m.config = config;
  m.class_names = class_names;
  m.chart = chart;
  m.frames = chart.reference().num_frames();
  m.landmarks = chart.reference().num_landmarks();
  std::mt19937_64 rng(config.seed);
  m.generator = GeneratorNet::init(config.z_dim, m.classes(), config.generator_widths, m.tangent_dim(),
                                   config.output_scale, rng);
  m.critic = CriticNet::init(m.tangent_dim(), m.classes(), config.critic_widths, config.critic_batchnorm, rng);
  m.generator_opt = diff::AdamState(config.adam(), m.generator.parameters());
  m.critic_opt = diff::AdamState(config.adam(), m.critic.parameters());
  m.class_path_lengths.assign(m.classes(), 1.0);
  return m;
}

Matrix one_hot_batch(const std::vector<std::size_t>& labels, std::size_t classes) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw Error(Errc::DomainError,
                  "label " + std::to_string(labels[i]) + " out of range for " + std::to_string(classes) + " classes");
    }
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Losses

Tensor generator_forward(const GeneratorNet& gen, const SphereChart& chart, const Tensor& z, const Tensor& labels,
                         double max_norm) {
  if (gen.out_dim != chart.dim()) {
    throw Error(Errc::ShapeMismatch, "generator emits " + std::to_string(gen.out_dim) + " values, chart needs " +
                                         std::to_string(chart.dim()));
  }
  return chart.clamp_norm(chart.project(gen.raw(z, labels)), max_norm);
}

Tensor fake_tangent(const GeneratorNet& gen, const SphereChart& chart, const Tensor& z, const Tensor& labels,
                    double max_norm) {
  return chart.log(chart.exp(generator_forward(gen, chart, z, labels, max_norm)));
}

Tensor interpolate_hat(const Tensor& real, const Tensor& fake, const Tensor& tau) {
  if (real.shape() != fake.shape()) {
    throw Error(Errc::ShapeMismatch, "interpolate_hat: real and fake batches differ in shape");
  }
  if (tau.rows() != real.rows() || tau.cols() != 1) {
    throw Error(Errc::ShapeMismatch, "interpolate_hat: tau must be one value per row");
  }
  return diff::add_scalar(-tau, 1.0) * real + tau * fake;
}

CriticLoss critic_loss(const CriticFn& critic, const Tensor& real, const Tensor& fake, const Tensor& labels,
                       const Tensor& tau, double lambda) {
  if (real.shape() != fake.shape() || labels.rows() != real.rows()) {
    throw Error(Errc::ShapeMismatch, "critic_loss: real, fake and label batches must have equal sizes");
  }
  const Tensor d_real = diff::mean(critic(real, labels));
  const Tensor d_fake = diff::mean(critic(fake, labels));

  const Tensor hat(interpolate_hat(real, fake, tau).value(), true);
  const Tensor d_hat = diff::sum(critic(hat, labels));
  const Tensor g = diff::grad(d_hat, {hat}, {true, true})[0];
  const Tensor gap = diff::add_scalar(diff::l2_norm(g), -1.0);
  const Tensor penalty = diff::mean(gap * gap);

  CriticLoss out;
  out.total = d_fake - d_real + diff::scale(penalty, lambda);
  out.wasserstein = d_real.item() - d_fake.item();
  out.penalty = penalty.item();
  return out;
}

GeneratorLoss generator_loss(const GeneratorNet& gen, const CriticFn& critic, const SphereChart& chart,
                             const Tensor& z, const Tensor& labels, const Matrix& q_gt, const Matrix& log_gt,
                             const TrainConfig& config) {
  if (q_gt.rows() != z.rows() || log_gt.rows() != z.rows() || static_cast<std::size_t>(q_gt.cols()) != chart.dim() ||
      static_cast<std::size_t>(log_gt.cols()) != chart.dim()) {
    throw Error(Errc::ShapeMismatch, "generator_loss: ground truth must have one row of " +
                                         std::to_string(chart.dim()) + " values per sample");
  }
  const Tensor v = generator_forward(gen, chart, z, labels, config.max_tangent_norm);
  const Tensor q = chart.exp(v);
  const Tensor fake = chart.log(q);
  const Tensor adversarial = -diff::mean(critic(fake, labels));
  const Tensor sphere = diff::mean(chart.distance(q, Tensor(q_gt)));
  const Tensor tangent = diff::mean(chart.l1_norm(fake - Tensor(log_gt)));

  GeneratorLoss out;
  out.adversarial = adversarial.item();
  out.sphere = sphere.item();
  out.tangent = tangent.item();
  if (config.algorithm1_strict) {
    out.total = adversarial;
  } else {
    out.total = diff::scale(adversarial, config.alpha1) + diff::scale(sphere, config.alpha2) +
                diff::scale(tangent, config.alpha3);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct RealSet {
  Matrix tangents;  // N x D, log_y(q)
  Matrix points;    // N x D, q
  std::vector<std::size_t> labels;
  std::vector<std::vector<std::size_t>> members;
};

RealSet real_set(const MotionGanModel& model, const PreparedDataset& data, unsigned threads) {
  if (data.frames != model.frames || data.landmarks != model.landmarks) {
    throw Error(Errc::DimensionMismatch, "dataset has T=" + std::to_string(data.frames) +
                                             ", d=" + std::to_string(data.landmarks) + " but the model expects T=" +
                                             std::to_string(model.frames) + ", d=" + std::to_string(model.landmarks));
  }
  if (data.classes.names() != model.class_names) {
    throw Error(Errc::SchemaError, "dataset classes differ from the model's");
  }
  if (data.size() == 0) throw Error(Errc::EmptySet, "training set is empty");
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto dim = static_cast<Eigen::Index>(model.tangent_dim());
  RealSet r;
  r.tangents.resize(n, dim);
  r.points.resize(n, dim);
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    r.points.row(row) = flatten_samples(data.srvfs[i].samples());
    r.tangents.row(row) = flatten_samples(log_map(model.chart, data.srvfs[i]).samples());
  });
  r.members.resize(model.classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    r.labels.push_back(data.labels[i].index);
    r.members[data.labels[i].index].push_back(i);
  }
  for (std::size_t c = 0; c < r.members.size(); ++c) {
    if (r.members[c].empty()) throw Error(Errc::MissingClass, "class '" + model.class_names[c] + "' has no samples");
  }
  return r;
}

Matrix gather(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Matrix normal_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

void require_finite(double v, const char* what, std::uint64_t iteration) {
  if (!std::isfinite(v)) {
    throw Error(Errc::NonFiniteLoss, std::string(what) + " is not finite at iteration " + std::to_string(iteration));
  }
}

}  // namespace

TrainLog train_more(MotionGanModel& model, const PreparedDataset& data, unsigned threads,
                    const TrainCallback& callback) {
  const TrainConfig& cfg = model.config;
  cfg.validate();
  const RealSet real = real_set(model, data, threads);
  const SphereChart chart(model.chart);
  const std::size_t batch = cfg.batch;
  const std::size_t classes = model.classes();

  std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(model.iterations), std::uint64_t{0x6d67616e}};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_class(0, classes - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TrainLog log;
  log.records.reserve(cfg.n_iteration);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t step = 0; step < cfg.n_iteration; ++step) {
    const std::uint64_t iteration = model.iterations;
    TrainRecord rec;
    rec.iteration = iteration;

    std::vector<Tensor> critic_params = model.critic.parameters();
    const CriticFn critic = [&](const Tensor& x, const Tensor& c) { return model.critic(x, c); };
    for (std::size_t k = 0; k < cfg.n_disc; ++k) {
      std::vector<std::size_t> idx(batch);
      for (auto& i : idx) i = pick(rng);
      std::vector<std::size_t> lab(batch);
      for (std::size_t b = 0; b < batch; ++b) lab[b] = real.labels[idx[b]];
      const Tensor labels(one_hot_batch(lab, classes));
      const Tensor z(normal_matrix(batch, cfg.z_dim, rng));
      Matrix tau(static_cast<Eigen::Index>(batch), 1);
      for (Eigen::Index b = 0; b < tau.rows(); ++b) tau(b, 0) = unit(rng);

      Matrix fake;
      {
        diff::NoGradGuard no_grad;
        fake = fake_tangent(model.generator, chart, z, labels, cfg.max_tangent_norm).value();
      }
      const CriticLoss loss =
          critic_loss(critic, Tensor(gather(real.tangents, idx)), Tensor(std::move(fake)), labels, Tensor(tau), cfg.lambda);
      require_finite(loss.total.item(), "critic loss", iteration);
      const auto grads = diff::grad(loss.total, critic_params, {false, true});
      diff::adam_step(critic_params, grads, model.critic_opt);
      rec.critic_loss = loss.total.item();
      rec.wasserstein = loss.wasserstein;
      rec.penalty = loss.penalty;
    }

    std::vector<std::size_t> lab(batch);
    rec.pairs.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      lab[b] = pick_class(rng);
      const auto& members = real.members[lab[b]];
      rec.pairs[b] = members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng)];
    }
    const Tensor labels(one_hot_batch(lab, classes));
    const Tensor z(normal_matrix(batch, cfg.z_dim, rng));
    // The generator step must not spend time on critic parameter gradients.
    std::vector<Tensor> frozen_params;
    for (const auto& p : critic_params) frozen_params.push_back(p.detach());
    const CriticNet fixed = model.critic.with_parameters(frozen_params);
    const CriticFn fixed_fn = [&](const Tensor& x, const Tensor& c) { return fixed(x, c); };

    std::vector<Tensor> gen_params = model.generator.parameters();
    const GeneratorLoss gl = generator_loss(model.generator, fixed_fn, chart, z, labels, gather(real.points, rec.pairs),
                                            gather(real.tangents, rec.pairs), cfg);
    require_finite(gl.total.item(), "generator loss", iteration);
    const auto grads = diff::grad(gl.total, gen_params, {false, true});
    diff::adam_step(gen_params, grads, model.generator_opt);
    rec.generator_loss = gl.total.item();
    rec.adversarial = gl.adversarial;
    rec.sphere = gl.sphere;
    rec.tangent = gl.tangent;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    ++model.iterations;
    if (callback) callback(rec);
    log.records.push_back(std::move(rec));
  }
  return log;
}

std::pair<MotionGanModel, TrainLog> train(const PreparedDataset& data, const TrainConfig& config, unsigned threads,
                                          const TrainCallback& callback) {
  MotionGanModel model = MotionGanModel::init(config, data.classes.names(), data.chart);
  std::vector<std::size_t> counts(model.classes(), 0);
  std::fill(model.class_path_lengths.begin(), model.class_path_lengths.end(), 0.0);
  for (std::size_t i = 0; i < data.size() && i < data.path_lengths.size(); ++i) {
    model.class_path_lengths[data.labels[i].index] += data.path_lengths[i];
    ++counts[data.labels[i].index];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    model.class_path_lengths[c] = counts[c] > 0 ? model.class_path_lengths[c] / static_cast<double>(counts[c]) : 1.0;
  }
  TrainLog log = train_more(model, data, threads, callback);
  return {std::move(model), std::move(log)};
}

TangentVector generate_tangent(const MotionGanModel& model, std::size_t class_index, std::uint64_t seed) {
  if (class_index >= model.classes()) {
    throw Error(Errc::MissingClass, "class index " + std::to_string(class_index) + " not in model");
  }
  std::mt19937_64 rng(seed);
  const SphereChart chart(model.chart);
  diff::NoGradGuard no_grad;
  const Tensor z(normal_matrix(1, model.generator.z_dim, rng));
  const Tensor labels(one_hot_batch({class_index}, model.classes()));
  const Tensor v = generator_forward(model.generator, chart, z, labels, model.config.max_tangent_norm);
  return TangentVector(unflatten_samples(v.value(), chart.intervals()));
}

Srvf generate_motion(const MotionGanModel& model, std::size_t class_index, std::uint64_t seed) {
  return exp_map(model.chart, generate_tangent(model, class_index, seed));
}

// ---------------------------------------------------------------------------
// Gradient checks

diff::GradcheckReport loss_gradcheck(std::size_t trials, double tol, std::uint64_t seed) {
  constexpr std::size_t kFrames = 6, kLandmarks = 2, kClasses = 2, kBatch = 4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto random_srvf = [&] {
    return Srvf::normalized(normal_matrix(kFrames - 1, 2 * kLandmarks, rng));
  };

  double critic_err = 0.0, bn_err = 0.0, gen_err = 0.0, strict_err = 0.0, tangent_err = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    TrainConfig cfg;
    cfg.z_dim = 4;
    cfg.generator_widths = {8, 8};
    cfg.critic_widths = {8, 8};
    cfg.seed = rng();
    const TangentChart chart(random_srvf());
    const SphereChart sc(chart);
    const auto model = MotionGanModel::init(cfg, {"a", "b"}, chart);
    cfg.critic_batchnorm = true;
    const auto bn_model = MotionGanModel::init(cfg, {"a", "b"}, chart);
    const auto dim = static_cast<Eigen::Index>(model.tangent_dim());

    std::vector<std::size_t> lab(kBatch);
    for (auto& l : lab) l = static_cast<std::size_t>(rng() % kClasses);
    const Tensor labels(one_hot_batch(lab, kClasses));
    Matrix real(kBatch, dim), fake(kBatch, dim), q_gt(kBatch, dim), log_gt(kBatch, dim);
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(kBatch); ++b) {
      const Srvf q = random_srvf();
      const Srvf p = random_srvf();
      real.row(b) = flatten_samples(log_map(chart, q).samples());
      fake.row(b) = flatten_samples(log_map(chart, p).samples()) * 0.5;
      const Srvf g = geodesic_interpolate(chart.reference(), random_srvf(), 0.5);
      q_gt.row(b) = flatten_samples(g.samples());
      log_gt.row(b) = flatten_samples(log_map(chart, g).samples());
    }
    Matrix tau(kBatch, 1);
    for (Eigen::Index b = 0; b < tau.rows(); ++b) tau(b, 0) = unit(rng);
    const Tensor z(normal_matrix(kBatch, cfg.z_dim, rng));

    const auto values = [](const std::vector<Tensor>& ps) {
      std::vector<Matrix> out;
      for (const auto& p : ps) out.push_back(p.value());
      return out;
    };
    const auto critic_case = [&](const CriticNet& net) {
      return diff::gradient_error(
          [&](const std::vector<Tensor>& ps) {
            const CriticNet c = net.with_parameters(ps);
            const CriticFn fn = [&](const Tensor& x, const Tensor& l) { return c(x, l); };
            return critic_loss(fn, Tensor(real), Tensor(fake), labels, Tensor(tau), cfg.lambda).total;
          },
          values(net.parameters()));
    };
    critic_err = std::max(critic_err, critic_case(model.critic));
    bn_err = std::max(bn_err, critic_case(bn_model.critic));

    const auto gen_case = [&](bool strict) {
      TrainConfig gc = model.config;
      gc.algorithm1_strict = strict;
      return diff::gradient_error(
          [&](const std::vector<Tensor>& ps) {
            const GeneratorNet g = model.generator.with_parameters(ps);
            const CriticFn fn = [&](const Tensor& x, const Tensor& l) { return model.critic(x, l); };
            return generator_loss(g, fn, sc, z, labels, q_gt, log_gt, gc).total;
          },
          values(model.generator.parameters()));
    };
    gen_err = std::max(gen_err, gen_case(false));
    strict_err = std::max(strict_err, gen_case(true));
    tangent_err = std::max(tangent_err, diff::gradient_error(
                                            [&](const std::vector<Tensor>& ps) {
                                              const GeneratorNet g = model.generator.with_parameters(ps);
                                              const Tensor f = fake_tangent(g, sc, z, labels, cfg.max_tangent_norm);
                                              return diff::sum(sc.sq_norm(f));
                                            },
                                            values(model.generator.parameters())));
  }

  diff::GradcheckReport report;
  const auto add = [&](const char* name, double err) { report.entries.push_back({name, err, err <= tol}); };
  add("critic_loss", critic_err);
  add("critic_loss_batchnorm", bn_err);
  add("generator_loss", gen_err);
  add("generator_loss_strict", strict_err);
  add("fake_tangent_sq_norm", tangent_err);
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "MGAN1";
constexpr const char* kFamily = "MGAN";

void write_widths(detail::BinaryWriter& w, const std::vector<std::size_t>& widths) {
  w.u64(widths.size());
  for (const auto x : widths) w.u64(x);
}

std::vector<std::size_t> read_widths(detail::BinaryReader& r) {
  std::vector<std::size_t> out(r.count(8));
  for (auto& x : out) {
    x = r.u64();
    if (x == 0 || x > (1u << 24)) throw Error(Errc::CorruptFile, "checkpoint has an invalid layer width");
  }
  return out;
}

void write_params(detail::BinaryWriter& w, const std::vector<Tensor>& params, const diff::AdamState& opt) {
  for (const auto& p : params) w.matrix(p.value());
  w.u64(opt.t);
  for (const auto& m : opt.m) w.matrix(m);
  for (const auto& v : opt.v) w.matrix(v);
}

void read_params(detail::BinaryReader& r, std::vector<Tensor>& params, diff::AdamState& opt) {
  for (auto& p : params) {
    p.mutable_value() = r.matrix(static_cast<std::size_t>(p.rows()), static_cast<std::size_t>(p.cols()));
  }
  opt.t = r.u64();
  for (auto& m : opt.m) m = r.matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (auto& v : opt.v) v = r.matrix(static_cast<std::size_t>(v.rows()), static_cast<std::size_t>(v.cols()));
}

}  // namespace

void save_checkpoint(const MotionGanModel& model, const std::filesystem::path& path) {
  const TrainConfig& c = model.config;
  detail::BinaryWriter w(kMagic);
  w.u64(c.z_dim);
  w.u64(model.classes());
  w.u64(model.frames);
  w.u64(model.landmarks);
  write_widths(w, c.generator_widths);
  write_widths(w, c.critic_widths);
  w.f64(c.lr);
  w.f64(c.beta1);
  w.f64(c.beta2);
  w.u64(c.batch);
  w.u64(c.n_disc);
  w.f64(c.lambda);
  w.f64(c.alpha1);
  w.f64(c.alpha2);
  w.f64(c.alpha3);
  w.u64(c.n_iteration);
  w.u64(c.seed);
  w.f64(c.output_scale);
  w.f64(c.max_tangent_norm);
  w.u64(c.algorithm1_strict ? 1 : 0);
  w.u64(c.critic_batchnorm ? 1 : 0);
  for (const auto& name : model.class_names) w.str(name);
  w.matrix(model.chart.reference().samples());
  w.u64(model.iterations);
  for (const double l : model.class_path_lengths) w.f64(l);
  write_params(w, model.generator.parameters(), model.generator_opt);
  write_params(w, model.critic.parameters(), model.critic_opt);
  w.save(path);
}

MotionGanModel load_checkpoint(const std::filesystem::path& path) {
  detail::BinaryReader r(path, kMagic, kFamily);
  TrainConfig c;
  c.z_dim = r.u64();
  const auto classes = r.u64();
  const auto frames = r.u64();
  const auto landmarks = r.u64();
  if (c.z_dim == 0 || c.z_dim > (1u << 20) || classes == 0 || classes > (1u << 16) || frames < 2 ||
      frames > (1u << 20) || landmarks == 0 || landmarks > (1u << 20)) {
    throw Error(Errc::CorruptFile, "checkpoint header is out of range");
  }
  c.generator_widths = read_widths(r);
  c.critic_widths = read_widths(r);
  c.lr = r.f64();
  c.beta1 = r.f64();
  c.beta2 = r.f64();
  c.batch = r.u64();
  c.n_disc = r.u64();
  c.lambda = r.f64();
  c.alpha1 = r.f64();
  c.alpha2 = r.f64();
  c.alpha3 = r.f64();
  c.n_iteration = r.u64();
  c.seed = r.u64();
  c.output_scale = r.f64();
  c.max_tangent_norm = r.f64();
  c.algorithm1_strict = r.u64() != 0;
  c.critic_batchnorm = r.u64() != 0;
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(Errc::CorruptFile, "checkpoint config is invalid: " + e.message());
  }
  std::vector<std::string> names(classes);
  for (auto& n : names) n = r.str();
  Matrix y = r.matrix(frames - 1, 2 * landmarks);
  TangentChart chart = [&] {
    try {
      return TangentChart(Srvf::from_samples(std::move(y)));
    } catch (const Error& e) {
      throw Error(Errc::CorruptFile, "checkpoint chart is not a unit SRVF: " + e.message());
    }
  }();

  MotionGanModel m = MotionGanModel::init(c, names, chart);
  m.iterations = r.u64();
  for (auto& l : m.class_path_lengths) {
    l = r.f64();
    if (!(l > 0.0) || !std::isfinite(l)) throw Error(Errc::CorruptFile, "checkpoint has an invalid path length");
  }
  auto gp = m.generator.parameters();
  read_params(r, gp, m.generator_opt);
  auto cp = m.critic.parameters();
  read_params(r, cp, m.critic_opt);
  if (!r.at_end()) throw Error(Errc::CorruptFile, "checkpoint has trailing bytes");
  return m;
}

MotionGanModel load_checkpoint(const std::filesystem::path& path, const TangentChart& expected_chart) {
  MotionGanModel m = load_checkpoint(path);
  const auto& ref = expected_chart.reference();
  if (ref.num_frames() != m.frames || ref.num_landmarks() != m.landmarks) {
    throw Error(Errc::DimensionMismatch, "checkpoint has T=" + std::to_string(m.frames) + ", d=" +
                                             std::to_string(m.landmarks) + " but the chart has T=" +
                                             std::to_string(ref.num_frames()) + ", d=" +
                                             std::to_string(ref.num_landmarks()));
  }
  return m;
}

}  // namespace srvfgan
