#pragma once

// Conditional Wasserstein GAN with gradient penalty on the tangent space of
// the SRVF hypersphere at a fixed chart point y.
//
// Tangent vectors and SRVFs enter the networks flattened row-major into rows
// of D = (T-1) * 2d values; a batch stacks samples as rows.

#include "srvfgan/dataset.hpp"
#include "srvfgan/diffcore.hpp"
#include "srvfgan/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace srvfgan {

/// Row-major flattening of an SRVF-shaped array into a 1 x D row and back.
RowVector flatten_samples(const Matrix& samples);
Matrix unflatten_samples(const RowVector& row, std::size_t intervals);

/// Differentiable sphere maps at a fixed chart, applied row-wise to batches.
class SphereChart {
 public:
  explicit SphereChart(const TangentChart& chart);

  const TangentChart& chart() const noexcept { return chart_; }
  std::size_t intervals() const noexcept { return intervals_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(y_row_.size()); }
  double dt() const noexcept { return dt_; }
  const RowVector& y() const noexcept { return y_row_; }

  /// dt-weighted inner product of each row with y, B x 1.
  diff::Tensor inner_y(const diff::Tensor& x) const;
  /// dt-weighted squared norm of each row, B x 1.
  diff::Tensor sq_norm(const diff::Tensor& x) const;
  /// v - <v, y> y.
  diff::Tensor project(const diff::Tensor& v) const;
  /// Rescales rows whose norm exceeds max_norm down to max_norm.
  diff::Tensor clamp_norm(const diff::Tensor& v, double max_norm) const;
  /// cos|v| y + sin|v| / |v| v.
  diff::Tensor exp(const diff::Tensor& v) const;
  /// theta / sin(theta) (q - cos(theta) y). AntipodalPoint when a row is
  /// within tolerances::kAntipodal of -y.
  diff::Tensor log(const diff::Tensor& q) const;
  /// Arc length between matching rows of two unit-norm batches, B x 1.
  diff::Tensor distance(const diff::Tensor& a, const diff::Tensor& b) const;
  /// dt-weighted sum of absolute values of each row, B x 1.
  diff::Tensor l1_norm(const diff::Tensor& x) const;

 private:
  TangentChart chart_;
  std::size_t intervals_;
  double dt_;
  RowVector y_row_;
  diff::Tensor y_;
  diff::Tensor y_col_dt_;
};

/// x W + b for a batch x of rows.
struct DenseLayer {
  diff::Tensor weight;  // in x out
  diff::Tensor bias;    // 1 x out

  /// Uniform in +-1/sqrt(in) for weights and biases.
  static DenseLayer init(std::size_t in, std::size_t out, std::mt19937_64& rng);
  diff::Tensor operator()(const diff::Tensor& x) const;
};

/// Dense stack: [z, c] -> relu hidden layers, each followed by re-concatenation
/// of the one-hot label -> tanh output scaled by output_scale, then projected
/// onto the tangent space and norm-clamped.
struct GeneratorNet {
  std::size_t z_dim = 0;
  std::size_t classes = 0;
  std::size_t out_dim = 0;
  double output_scale = 0.0;
  std::vector<DenseLayer> layers;

  static GeneratorNet init(std::size_t z_dim, std::size_t classes, const std::vector<std::size_t>& widths,
                           std::size_t out_dim, double output_scale, std::mt19937_64& rng);
  std::vector<diff::Tensor> parameters() const;
  /// Copy with the given parameter tensors in parameters() order.
  GeneratorNet with_parameters(const std::vector<diff::Tensor>& params) const;
  std::vector<std::size_t> widths() const;

  /// tanh output before projection, B x out_dim.
  diff::Tensor raw(const diff::Tensor& z, const diff::Tensor& labels) const;
};

/// Dense stack: [x, c] -> leaky_relu hidden layers, each followed by
/// re-concatenation of the label -> linear scalar per row.
struct CriticNet {
  std::size_t in_dim = 0;
  std::size_t classes = 0;
  /// Batch normalization (batch statistics) before each hidden activation.
  bool batchnorm = false;
  std::vector<DenseLayer> layers;
  /// Per hidden layer scale and shift, only with batchnorm.
  std::vector<diff::Tensor> bn_gamma;
  std::vector<diff::Tensor> bn_beta;

  static CriticNet init(std::size_t in_dim, std::size_t classes, const std::vector<std::size_t>& widths,
                        bool batchnorm, std::mt19937_64& rng);
  std::vector<diff::Tensor> parameters() const;
  CriticNet with_parameters(const std::vector<diff::Tensor>& params) const;
  std::vector<std::size_t> widths() const;

  /// B x 1.
  diff::Tensor operator()(const diff::Tensor& x, const diff::Tensor& labels) const;
};

/// Any conditional critic: (B x D inputs, B x C one-hot labels) -> B x 1.
using CriticFn = std::function<diff::Tensor(const diff::Tensor&, const diff::Tensor&)>;

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::size_t batch = 128;
  std::size_t n_disc = 5;
  double lambda = 10.0;
  double alpha1 = 0.8;
  double alpha2 = 1.0;
  double alpha3 = 1.0;
  std::size_t n_iteration = 0;
  std::size_t z_dim = 128;
  std::uint64_t seed = 0;
  double output_scale = 0.95 * 3.14159265358979323846;
  /// Tangent norms are clamped to this before the exponential map.
  double max_tangent_norm = 3.14159265358979323846 - 1e-3;
  std::vector<std::size_t> generator_widths{256, 512, 512};
  std::vector<std::size_t> critic_widths{512, 256, 128};
  /// Generator step uses the adversarial term alone.
  bool algorithm1_strict = false;
  bool critic_batchnorm = false;

  /// ConfigError naming the first invalid field.
  void validate() const;
  diff::AdamConfig adam() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct MotionGanModel {
  TrainConfig config;
  std::vector<std::string> class_names;
  std::size_t frames = 0;     // T
  std::size_t landmarks = 0;  // d
  TangentChart chart{Srvf::normalized(Matrix::Ones(1, 2))};
  GeneratorNet generator;
  CriticNet critic;
  diff::AdamState generator_opt;
  diff::AdamState critic_opt;
  /// Generator iterations performed.
  std::uint64_t iterations = 0;
  /// Mean path length of each class's training sequences (1 before training);
  /// the reference length for relative intensity.
  std::vector<double> class_path_lengths;

  std::size_t classes() const noexcept { return class_names.size(); }
  std::size_t tangent_dim() const noexcept { return (frames - 1) * 2 * landmarks; }

  /// Fresh networks and optimizer state seeded from config.seed.
  static MotionGanModel init(const TrainConfig& config, const std::vector<std::string>& class_names,
                             const TangentChart& chart);
};

/// B x C one-hot rows.
Matrix one_hot_batch(const std::vector<std::size_t>& labels, std::size_t classes);

/// Generator output projected onto the tangent space at y and norm-clamped.
diff::Tensor generator_forward(const GeneratorNet& gen, const SphereChart& chart, const diff::Tensor& z,
                               const diff::Tensor& labels, double max_norm);
/// log_y(exp_y(G(z, c))).
diff::Tensor fake_tangent(const GeneratorNet& gen, const SphereChart& chart, const diff::Tensor& z,
                          const diff::Tensor& labels, double max_norm);
/// (1 - tau) real + tau fake, tau B x 1.
diff::Tensor interpolate_hat(const diff::Tensor& real, const diff::Tensor& fake, const diff::Tensor& tau);

struct CriticLoss {
  diff::Tensor total;
  /// mean D(real) - mean D(fake).
  double wasserstein = 0.0;
  /// mean (|grad D(q_hat)| - 1)^2 before the lambda weight.
  double penalty = 0.0;
};

/// -mean D(real, c) + mean D(fake, c) + lambda mean (|grad_q_hat D(q_hat, c)|_2 - 1)^2,
/// the quantity the critic minimizes. The gradient norm is the Euclidean norm
/// of the flattened input gradient. ShapeMismatch on unequal batches.
CriticLoss critic_loss(const CriticFn& critic, const diff::Tensor& real, const diff::Tensor& fake,
                       const diff::Tensor& labels, const diff::Tensor& tau, double lambda);

struct GeneratorLoss {
  diff::Tensor total;
  double adversarial = 0.0;  // -mean D(fake, c)
  double sphere = 0.0;       // mean d_S(exp_y(G), q_gt)
  double tangent = 0.0;      // mean |fake - log_y(q_gt)|_1
};

/// alpha1 adversarial + alpha2 sphere + alpha3 tangent; with strict the total
/// is the adversarial term alone. q_gt and log_gt are B x D constants.
GeneratorLoss generator_loss(const GeneratorNet& gen, const CriticFn& critic, const SphereChart& chart,
                             const diff::Tensor& z, const diff::Tensor& labels, const Matrix& q_gt,
                             const Matrix& log_gt, const TrainConfig& config);

struct TrainRecord {
  std::uint64_t iteration = 0;
  double critic_loss = 0.0;
  double wasserstein = 0.0;
  double penalty = 0.0;
  double generator_loss = 0.0;
  double adversarial = 0.0;
  double sphere = 0.0;
  double tangent = 0.0;
  double seconds = 0.0;
  /// Dataset index of the q_gt paired with each generated sample.
  std::vector<std::size_t> pairs;
};

struct TrainLog {
  std::vector<TrainRecord> records;
};

/// Called after each generator iteration; lets callers stream the log.
using TrainCallback = std::function<void(const TrainRecord&)>;

/// Algorithm: per generator iteration, n_disc critic Adam steps on
/// critic_loss with real log_y(q) minibatches, then one generator Adam step on
/// generator_loss. Same data and config give bit-identical parameters.
/// NonFiniteLoss names the iteration. `threads` only parallelizes the
/// precomputation of real tangents.
std::pair<MotionGanModel, TrainLog> train(const PreparedDataset& data, const TrainConfig& config,
                                          unsigned threads = 1, const TrainCallback& callback = {});

/// Continues training an existing model for config.n_iteration more steps.
TrainLog train_more(MotionGanModel& model, const PreparedDataset& data, unsigned threads = 1,
                    const TrainCallback& callback = {});

/// Tangent vector p = G(z, c) for z drawn from `seed`.
TangentVector generate_tangent(const MotionGanModel& model, std::size_t class_index, std::uint64_t seed);
/// exp_y(G(z, c)).
Srvf generate_motion(const MotionGanModel& model, std::size_t class_index, std::uint64_t seed);

/// Central finite-difference checks of the full critic loss (with its
/// double-backprop penalty, plain and batch-normalized critic), the generator
/// loss through the sphere maps, and |fake_tangent|^2, on tiny random nets
/// (widths [8, 8], T = 6, d = 2), over `trials` draws each.
diff::GradcheckReport loss_gradcheck(std::size_t trials, double tol, std::uint64_t seed);

/// "MGAN1": header (z_dim, C, T, d, widths), config, class names, chart,
/// float64 parameter blobs and optimizer state, CRC-32 trailer.
void save_checkpoint(const MotionGanModel& model, const std::filesystem::path& path);
/// VersionMismatch, CorruptFile, IoError.
MotionGanModel load_checkpoint(const std::filesystem::path& path);
/// Also DimensionMismatch when the checkpoint's (T, d) differ from the chart's.
MotionGanModel load_checkpoint(const std::filesystem::path& path, const TangentChart& expected_chart);

}  // namespace srvfgan
