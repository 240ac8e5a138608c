#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tsregen/adam.hpp"
#include "tsregen/cube.hpp"
#include "tsregen/ops.hpp"
#include "tsregen/rng.hpp"

namespace tsregen::gan {

using ad::Tensor;

enum class LossVariant { saturating, non_saturating };

LossVariant loss_variant_from_name(const std::string& name);
std::string loss_variant_name(LossVariant v);

// Gaussian prior feeding the generator: d_z channels over the window length.
struct NoiseSpec {
  std::size_t channels = 8;  // d_z
  std::size_t window = 0;    // L
  std::size_t batch = 64;    // m
};

struct GanConfig {
  std::size_t noise_channels = 8;
  std::size_t batch = 64;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  std::size_t d_steps = 3;
  std::size_t iterations = 2000;  // outer-iteration budget
  double dropout = 0.2;
  LossVariant loss = LossVariant::non_saturating;
  // Early stop: moving average of |V_D - 2 ln 0.5| over `converge_window`
  // outer iterations below `converge_tol`.
  double converge_tol = 0.05;
  std::size_t converge_window = 50;
  std::size_t conv_filters = 18;
  std::size_t kernel_width = 2;
  std::size_t dense_units = 100;
  std::size_t lstm_cells = 100;
  std::uint64_t seed = 1;
};

// Conv/pool feature extractor over the noise+condition sequence, dense lift,
// LSTM over the lifted sequence, shared per-timestep sigmoid head.
struct GeneratorParams {
  Tensor conv1, conv2, conv3;  // [F x C x W]
  Tensor dense_w, dense_b;     // dense lift of flattened conv features
  ad::LstmParams lstm;
  Tensor head_w, head_b;  // per-timestep head -> J channels
  std::size_t noise_channels = 0, window = 0, variables = 0, feat_len = 0;

  std::vector<Tensor> parameters() const;
};

// LSTM over the series+condition channels, final state through a sigmoid unit.
struct DiscriminatorParams {
  ad::LstmParams lstm;
  Tensor head_w, head_b;
  std::size_t window = 0, variables = 0;

  std::vector<Tensor> parameters() const;
};

struct CrGanModel {
  GeneratorParams g;
  DiscriminatorParams d;
  GanConfig cfg;
  data::ScalingInfo scaling;  // scaling reference of the training data
  double cond_lo = 0.0, cond_hi = 1.0;

  std::size_t variables() const { return g.variables; }
  std::size_t window() const { return g.window; }
};

struct TrainLog {
  std::vector<double> v_d;  // per outer iteration
  std::vector<double> v_g;
  bool converged = false;
};

// Synthetic series with their condition values and provenance seed.
struct GeneratedBatch {
  std::size_t variables = 0;
  std::size_t window = 0;
  std::vector<double> values;  // count x J x L
  std::vector<double> conditions;
  std::uint64_t seed = 0;

  std::size_t count() const { return conditions.size(); }
  const double* series(std::size_t i) const { return values.data() + i * variables * window; }
};

CrGanModel make_model(std::size_t variables, std::size_t window, const GanConfig& cfg,
                      RngStream& rng);

// i.i.d. standard normal noise [channels x window].
Tensor sample_noise(const NoiseSpec& spec, RngStream& rng);

// Forward passes shared by training and sampling. `condition` must be in [0,1].
Tensor generator_forward(ad::Tape& tape, const GeneratorParams& p, const Tensor& noise,
                         double condition, double dropout_rate, ad::Mode mode, RngStream& rng);
Tensor discriminator_forward(ad::Tape& tape, const DiscriminatorParams& p, const Tensor& series,
                             double condition, double dropout_rate, ad::Mode mode, RngStream& rng);

// Eval-mode sampling/scoring (no dropout, no gradients).
Tensor generate(const CrGanModel& model, double condition, RngStream& rng);
double discriminate(const CrGanModel& model, const Tensor& series, double condition);

// V_D = mean log D(x|Y) + mean log(1 - D(x_fake|Y)), the quantity the
// discriminator ascends. Batches must be nonempty and equally sized.
Tensor discriminator_loss(ad::Tape& tape, const CrGanModel& model,
                          const std::vector<Tensor>& real, const std::vector<Tensor>& fake,
                          const std::vector<double>& conditions, ad::Mode mode, RngStream& rng);

// Quantity the generator descends. The saturating variant is
// mean log(1 - D(G(z|Y))); the non-saturating default is -mean log D(G(z|Y)).
// Discriminator weights are frozen for the duration of the call.
Tensor generator_loss(ad::Tape& tape, const CrGanModel& model, const std::vector<Tensor>& noise,
                      const std::vector<double>& conditions, LossVariant variant, ad::Mode mode,
                      RngStream& rng);

// Alternating minimax training per the configured schedule. The window set
// must be normalized into [0, 1].
TrainLog train(CrGanModel& model, const data::SegmentedWindows& real, RngStream& rng);

// Conditions are drawn uniformly from the training-condition range recorded
// on the model; `seed` is kept on the batch for provenance.
GeneratedBatch sample_batch(const CrGanModel& model, std::size_t count, std::uint64_t seed);

void save_model(const CrGanModel& model, const std::filesystem::path& dir, const TrainLog* log);
CrGanModel load_model(const std::filesystem::path& dir);

void save_batch(const GeneratedBatch& batch, const std::filesystem::path& dir);
GeneratedBatch load_batch(const std::filesystem::path& dir);

}  // namespace tsregen::gan
