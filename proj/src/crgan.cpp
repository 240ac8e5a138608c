#include "tsregen/crgan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "tsregen/io.hpp"

namespace tsregen::gan {

using ad::Activation;
using ad::Mode;
using ad::Tape;

namespace {

constexpr std::size_t kPoolSize = 2;
constexpr std::size_t kPoolStride = 2;
const double kEquilibrium = 2.0 * std::log(0.5);

Tensor xavier(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
              RngStream& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.value()) v = rng.uniform(-limit, limit);
  return t;
}

std::size_t conv_out_len(std::size_t len, std::size_t kernel, const char* stage) {
  if (len < kernel)
    throw std::invalid_argument(std::string("crgan: window too short for ") + stage +
                                " (length " + std::to_string(len) + " < kernel " +
                                std::to_string(kernel) + ")");
  return len - kernel + 1;
}

std::size_t pool_out_len(std::size_t len, const char* stage) {
  if (len < kPoolSize)
    throw std::invalid_argument(std::string("crgan: window too short for ") + stage +
                                " (length " + std::to_string(len) + " < pool " +
                                std::to_string(kPoolSize) + ")");
  return (len - kPoolSize) / kPoolStride + 1;
}

// Temporarily drops requires_grad on a parameter set ("keeping weights of the
// discriminator constant" during the generator phase).
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<Tensor> params) : params_(std::move(params)) {
    flags_.reserve(params_.size());
    for (const Tensor& p : params_) {
      flags_.push_back(p.requires_grad());
      p.set_requires_grad(false);
    }
  }
  ~FreezeGuard() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(flags_[i]);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<Tensor> params_;
  std::vector<bool> flags_;
};

void check_condition(double condition) {
  if (!(condition >= 0.0 && condition <= 1.0))
    throw std::invalid_argument("crgan: condition " + std::to_string(condition) +
                                " outside [0, 1]");
}

}  // namespace

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "saturating") return LossVariant::saturating;
  if (name == "non_saturating") return LossVariant::non_saturating;
  throw std::invalid_argument("unknown loss variant '" + name + "'");
}

std::string loss_variant_name(LossVariant v) {
  return v == LossVariant::saturating ? "saturating" : "non_saturating";
}

std::vector<Tensor> GeneratorParams::parameters() const {
  return {conv1, conv2, conv3, dense_w, dense_b, lstm.wx, lstm.wh, lstm.b, head_w, head_b};
}

std::vector<Tensor> DiscriminatorParams::parameters() const {
  return {lstm.wx, lstm.wh, lstm.b, head_w, head_b};
}

CrGanModel make_model(std::size_t variables, std::size_t window, const GanConfig& cfg,
                      RngStream& rng) {
  if (variables == 0) throw std::invalid_argument("crgan: variable count must be positive");
  if (cfg.noise_channels == 0) throw std::invalid_argument("crgan: noise channels must be positive");

  std::size_t kw = cfg.kernel_width;
  std::size_t len1 = pool_out_len(conv_out_len(window, kw, "conv stage 1"), "pool stage 1");
  std::size_t len2 = pool_out_len(conv_out_len(len1, kw, "conv stage 2"), "pool stage 2");
  std::size_t len3 = pool_out_len(conv_out_len(len2, kw, "conv stage 3"), "pool stage 3");

  CrGanModel m;
  m.cfg = cfg;

  GeneratorParams& g = m.g;
  g.noise_channels = cfg.noise_channels;
  g.window = window;
  g.variables = variables;
  g.feat_len = len3;
  std::size_t in_ch = cfg.noise_channels + 1;  // noise + condition channel
  std::size_t f = cfg.conv_filters;
  g.conv1 = xavier({f, in_ch, kw}, in_ch * kw, f * kw, rng);
  g.conv2 = xavier({f, f, kw}, f * kw, f * kw, rng);
  g.conv3 = xavier({f, f, kw}, f * kw, f * kw, rng);
  std::size_t flat = f * len3;
  g.dense_w = xavier({cfg.dense_units, flat}, flat, cfg.dense_units, rng);
  g.dense_b = Tensor::zeros({cfg.dense_units}, true);
  // LSTM consumes the lifted features plus a time-ramp and condition row.
  g.lstm = ad::LstmParams::init(cfg.dense_units + 2, cfg.lstm_cells, rng);
  g.head_w = xavier({variables, cfg.lstm_cells}, cfg.lstm_cells, variables, rng);
  g.head_b = Tensor::zeros({variables}, true);

  DiscriminatorParams& d = m.d;
  d.window = window;
  d.variables = variables;
  d.lstm = ad::LstmParams::init(variables + 1, cfg.lstm_cells, rng);
  d.head_w = xavier({1, cfg.lstm_cells}, cfg.lstm_cells, 1, rng);
  d.head_b = Tensor::zeros({1}, true);
  return m;
}

Tensor sample_noise(const NoiseSpec& spec, RngStream& rng) {
  if (spec.channels == 0 || spec.window == 0)
    throw std::invalid_argument("sample_noise: channels and window must be positive");
  Tensor z = Tensor::zeros({spec.channels, spec.window});
  for (double& v : z.value()) v = rng.normal();
  return z;
}

Tensor generator_forward(Tape& tape, const GeneratorParams& p, const Tensor& noise,
                         double condition, double dropout_rate, Mode mode, RngStream& rng) {
  check_condition(condition);
  if (noise.rank() != 2 || noise.dim(0) != p.noise_channels || noise.dim(1) != p.window)
    throw std::invalid_argument("generator: noise shape " + ad::shape_to_string(noise.shape()) +
                                " does not match [" + std::to_string(p.noise_channels) + " x " +
                                std::to_string(p.window) + "]");

  Tensor cond_row = Tensor::full({1, p.window}, condition);
  Tensor x = ad::concat_rows(tape, noise, cond_row);

  Tensor c1 = ad::conv1d(tape, x, p.conv1, 1, Activation::relu);
  Tensor p1 = ad::maxpool1d(tape, c1, kPoolSize, kPoolStride);
  Tensor c2 = ad::conv1d(tape, p1, p.conv2, 1, Activation::relu);
  Tensor p2 = ad::maxpool1d(tape, c2, kPoolSize, kPoolStride);
  Tensor c3 = ad::conv1d(tape, p2, p.conv3, 1, Activation::relu);
  Tensor p3 = ad::maxpool1d(tape, c3, kPoolSize, kPoolStride);

  Tensor flat = ad::reshape(tape, p3, {p3.size()});
  Tensor feat = ad::dense(tape, flat, p.dense_w, p.dense_b, Activation::relu);
  feat = ad::dropout(tape, feat, dropout_rate, mode, rng);

  // Lift back to an L-length sequence: pooled features broadcast across time,
  // fused with a position ramp and the condition row.
  Tensor seq = ad::broadcast_col(tape, feat, p.window);
  std::vector<double> ramp(p.window);
  for (std::size_t t = 0; t < p.window; ++t)
    ramp[t] = p.window > 1 ? static_cast<double>(t) / static_cast<double>(p.window - 1) : 0.0;
  Tensor ramp_row = Tensor::of({1, p.window}, std::move(ramp));
  seq = ad::concat_rows(tape, seq, ramp_row);
  seq = ad::concat_rows(tape, seq, cond_row);

  seq = ad::dropout(tape, seq, dropout_rate, mode, rng);
  Tensor h0 = Tensor::zeros({p.lstm.hidden_size()});
  Tensor c0 = Tensor::zeros({p.lstm.hidden_size()});
  Tensor hidden = ad::lstm(tape, seq, p.lstm, h0, c0);

  return ad::dense_seq(tape, hidden, p.head_w, p.head_b, Activation::sigmoid);
}

Tensor discriminator_forward(Tape& tape, const DiscriminatorParams& p, const Tensor& series,
                             double condition, double dropout_rate, Mode mode, RngStream& rng) {
  check_condition(condition);
  if (series.rank() != 2 || series.dim(0) != p.variables || series.dim(1) != p.window)
    throw std::invalid_argument("discriminator: series shape " +
                                ad::shape_to_string(series.shape()) + " does not match [" +
                                std::to_string(p.variables) + " x " + std::to_string(p.window) +
                                "]");
  Tensor cond_row = Tensor::full({1, p.window}, condition);
  Tensor x = ad::concat_rows(tape, series, cond_row);
  x = ad::dropout(tape, x, dropout_rate, mode, rng);
  Tensor h0 = Tensor::zeros({p.lstm.hidden_size()});
  Tensor c0 = Tensor::zeros({p.lstm.hidden_size()});
  Tensor hidden = ad::lstm(tape, x, p.lstm, h0, c0);
  Tensor last = ad::column(tape, hidden, p.window - 1);
  return ad::dense(tape, last, p.head_w, p.head_b, Activation::sigmoid);
}

Tensor generate(const CrGanModel& model, double condition, RngStream& rng) {
  Tape tape(ad::GradMode::disabled);
  Tensor noise = sample_noise({model.cfg.noise_channels, model.window(), 1}, rng);
  return generator_forward(tape, model.g, noise, condition, model.cfg.dropout, Mode::eval, rng);
}

double discriminate(const CrGanModel& model, const Tensor& series, double condition) {
  Tape tape(ad::GradMode::disabled);
  RngStream rng(0);  // eval mode draws nothing
  return discriminator_forward(tape, model.d, series, condition, model.cfg.dropout, Mode::eval, rng)
      .item();
}

Tensor discriminator_loss(Tape& tape, const CrGanModel& model, const std::vector<Tensor>& real,
                          const std::vector<Tensor>& fake, const std::vector<double>& conditions,
                          Mode mode, RngStream& rng) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("discriminator_loss: empty batch");
  if (real.size() != fake.size() || real.size() != conditions.size())
    throw std::invalid_argument("discriminator_loss: real, fake, and condition counts must match");

  std::vector<Tensor> p_real, p_fake;
  p_real.reserve(real.size());
  p_fake.reserve(fake.size());
  for (std::size_t i = 0; i < real.size(); ++i) {
    p_real.push_back(discriminator_forward(tape, model.d, real[i], conditions[i],
                                           model.cfg.dropout, mode, rng));
    p_fake.push_back(discriminator_forward(tape, model.d, fake[i], conditions[i],
                                           model.cfg.dropout, mode, rng));
  }
  Tensor pr = ad::stack_scalars(tape, p_real);
  Tensor pf = ad::stack_scalars(tape, p_fake);
  Tensor ones = Tensor::full({real.size()}, 1.0);
  Tensor zeros = Tensor::zeros({fake.size()});
  return ad::add(tape, ad::bce_terms(tape, pr, ones), ad::bce_terms(tape, pf, zeros));
}

Tensor generator_loss(Tape& tape, const CrGanModel& model, const std::vector<Tensor>& noise,
                      const std::vector<double>& conditions, LossVariant variant, Mode mode,
                      RngStream& rng) {
  if (noise.empty()) throw std::invalid_argument("generator_loss: empty batch");
  if (noise.size() != conditions.size())
    throw std::invalid_argument("generator_loss: noise and condition counts must match");

  FreezeGuard freeze(model.d.parameters());
  std::vector<Tensor> probs;
  probs.reserve(noise.size());
  for (std::size_t i = 0; i < noise.size(); ++i) {
    Tensor fake = generator_forward(tape, model.g, noise[i], conditions[i], model.cfg.dropout,
                                    mode, rng);
    probs.push_back(discriminator_forward(tape, model.d, fake, conditions[i], model.cfg.dropout,
                                          mode, rng));
  }
  Tensor p = ad::stack_scalars(tape, probs);
  if (variant == LossVariant::saturating) {
    Tensor zeros = Tensor::zeros({noise.size()});
    return ad::bce_terms(tape, p, zeros);  // mean log(1 - D(G(z)))
  }
  Tensor ones = Tensor::full({noise.size()}, 1.0);
  return ad::scale(tape, ad::bce_terms(tape, p, ones), -1.0);  // -mean log D(G(z))
}

TrainLog train(CrGanModel& model, const data::SegmentedWindows& real, RngStream& rng) {
  if (real.count() == 0) throw std::invalid_argument("crgan train: empty training set");
  if (real.variable_count() != model.variables() || real.window != model.window())
    throw std::invalid_argument("crgan train: window set shape does not match the model");
  constexpr double kTol = 1e-9;
  for (double v : real.values) {
    if (!(v >= -kTol && v <= 1.0 + kTol))
      throw std::invalid_argument("crgan train: input not normalized to [0, 1] (found " +
                                  std::to_string(v) + ")");
  }

  const GanConfig& cfg = model.cfg;
  auto [lo_it, hi_it] = std::minmax_element(real.conditions.begin(), real.conditions.end());
  model.cond_lo = *lo_it;
  model.cond_hi = *hi_it;

  std::size_t j = real.variable_count();
  std::size_t window = real.window;
  auto real_window = [&](std::size_t idx) {
    const double* src = real.series(idx);
    return Tensor::of({j, window}, std::vector<double>(src, src + j * window));
  };

  ad::Adam opt_d(model.d.parameters(), {cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2, 1e-8});
  ad::Adam opt_g(model.g.parameters(), {cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2, 1e-8});

  NoiseSpec noise_spec{cfg.noise_channels, window, cfg.batch};
  TrainLog log;
  std::deque<double> window_gap;

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    double v_d_value = 0.0;
    for (std::size_t ds = 0; ds < cfg.d_steps; ++ds) {
      std::vector<Tensor> reals, fakes;
      std::vector<double> conds;
      reals.reserve(cfg.batch);
      fakes.reserve(cfg.batch);
      conds.reserve(cfg.batch);
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        std::size_t idx = rng.index(real.count());
        reals.push_back(real_window(idx));
        conds.push_back(real.conditions[idx]);
      }
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        Tape no_grad(ad::GradMode::disabled);
        Tensor z = sample_noise(noise_spec, rng);
        fakes.push_back(generator_forward(no_grad, model.g, z, conds[b], cfg.dropout, Mode::train,
                                          rng));
      }
      Tape tape;
      Tensor v_d = discriminator_loss(tape, model, reals, fakes, conds, Mode::train, rng);
      v_d_value = v_d.item();
      Tensor loss = ad::scale(tape, v_d, -1.0);  // ascend V_D
      tape.backward(loss);
      opt_d.step();
      opt_d.zero_grad();
      opt_g.zero_grad();
    }

    std::vector<Tensor> noise;
    std::vector<double> conds;
    noise.reserve(cfg.batch);
    conds.reserve(cfg.batch);
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      conds.push_back(real.conditions[rng.index(real.count())]);
      noise.push_back(sample_noise(noise_spec, rng));
    }
    Tape tape;
    Tensor v_g = generator_loss(tape, model, noise, conds, cfg.loss, Mode::train, rng);
    double v_g_value = v_g.item();
    tape.backward(v_g);
    opt_g.step();
    opt_g.zero_grad();
    opt_d.zero_grad();

    log.v_d.push_back(v_d_value);
    log.v_g.push_back(v_g_value);

    window_gap.push_back(std::abs(v_d_value - kEquilibrium));
    if (window_gap.size() > cfg.converge_window) window_gap.pop_front();
    if (window_gap.size() == cfg.converge_window) {
      double ma = 0.0;
      for (double gap : window_gap) ma += gap;
      ma /= static_cast<double>(window_gap.size());
      if (ma < cfg.converge_tol) {
        log.converged = true;
        break;
      }
    }
  }
  return log;
}

GeneratedBatch sample_batch(const CrGanModel& model, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("sample_batch: count must be positive");
  RngStream rng(seed);
  GeneratedBatch batch;
  batch.variables = model.variables();
  batch.window = model.window();
  batch.seed = seed;
  batch.values.reserve(count * batch.variables * batch.window);
  for (std::size_t i = 0; i < count; ++i) {
    double cond = rng.uniform(model.cond_lo, model.cond_hi);
    Tensor series = generate(model, cond, rng);
    batch.values.insert(batch.values.end(), series.value().begin(), series.value().end());
    batch.conditions.push_back(cond);
  }
  return batch;
}

namespace {

nlohmann::json config_to_json(const GanConfig& cfg) {
  return {{"noise_channels", cfg.noise_channels},
          {"batch", cfg.batch},
          {"lr_g", cfg.lr_g},
          {"lr_d", cfg.lr_d},
          {"adam_beta1", cfg.adam_beta1},
          {"adam_beta2", cfg.adam_beta2},
          {"d_steps", cfg.d_steps},
          {"iterations", cfg.iterations},
          {"dropout", cfg.dropout},
          {"loss", loss_variant_name(cfg.loss)},
          {"converge_tol", cfg.converge_tol},
          {"converge_window", cfg.converge_window},
          {"conv_filters", cfg.conv_filters},
          {"kernel_width", cfg.kernel_width},
          {"dense_units", cfg.dense_units},
          {"lstm_cells", cfg.lstm_cells},
          {"seed", cfg.seed}};
}

GanConfig config_from_json(const nlohmann::json& j) {
  GanConfig cfg;
  cfg.noise_channels = j.at("noise_channels").get<std::size_t>();
  cfg.batch = j.at("batch").get<std::size_t>();
  cfg.lr_g = j.at("lr_g").get<double>();
  cfg.lr_d = j.at("lr_d").get<double>();
  cfg.adam_beta1 = j.at("adam_beta1").get<double>();
  cfg.adam_beta2 = j.at("adam_beta2").get<double>();
  cfg.d_steps = j.at("d_steps").get<std::size_t>();
  cfg.iterations = j.at("iterations").get<std::size_t>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.loss = loss_variant_from_name(j.at("loss").get<std::string>());
  cfg.converge_tol = j.at("converge_tol").get<double>();
  cfg.converge_window = j.at("converge_window").get<std::size_t>();
  cfg.conv_filters = j.at("conv_filters").get<std::size_t>();
  cfg.kernel_width = j.at("kernel_width").get<std::size_t>();
  cfg.dense_units = j.at("dense_units").get<std::size_t>();
  cfg.lstm_cells = j.at("lstm_cells").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

std::vector<Tensor> model_parameters(const CrGanModel& m) {
  auto params = m.g.parameters();
  auto dps = m.d.parameters();
  params.insert(params.end(), dps.begin(), dps.end());
  return params;
}

}  // namespace

void save_model(const CrGanModel& model, const std::filesystem::path& dir, const TrainLog* log) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["kind"] = "crgan";
  m["variables"] = model.variables();
  m["window"] = model.window();
  m["config"] = config_to_json(model.cfg);
  m["cond_lo"] = model.cond_lo;
  m["cond_hi"] = model.cond_hi;
  m["scaling"] = io::scaling_to_json(model.scaling);
  nlohmann::json shapes = nlohmann::json::array();
  std::vector<double> flat;
  for (const Tensor& p : model_parameters(model)) {
    shapes.push_back(p.shape());
    flat.insert(flat.end(), p.value().begin(), p.value().end());
  }
  m["param_shapes"] = shapes;
  io::write_manifest(dir / "manifest.json", m);
  io::write_doubles(dir / "params.bin", flat);
  if (log) {
    std::ostringstream csv;
    csv << "iteration,v_d,v_g\n";
    for (std::size_t i = 0; i < log->v_d.size(); ++i)
      csv << i << ',' << io::format_double(log->v_d[i]) << ',' << io::format_double(log->v_g[i])
          << '\n';
    io::write_text(dir / "loss_history.csv", csv.str());
  }
}

CrGanModel load_model(const std::filesystem::path& dir) {
  auto m = io::read_manifest(dir / "manifest.json");
  if (m.value("kind", "") != "crgan")
    throw std::runtime_error(dir.string() + " does not hold a CR-GAN checkpoint");
  GanConfig cfg = config_from_json(m.at("config"));
  auto variables = m.at("variables").get<std::size_t>();
  auto window = m.at("window").get<std::size_t>();
  RngStream scratch(0);
  CrGanModel model = make_model(variables, window, cfg, scratch);
  model.cond_lo = m.at("cond_lo").get<double>();
  model.cond_hi = m.at("cond_hi").get<double>();
  model.scaling = io::scaling_from_json(m.at("scaling"));

  auto flat = io::read_doubles(dir / "params.bin");
  auto params = model_parameters(model);
  std::size_t offset = 0;
  for (Tensor& p : params) {
    if (offset + p.size() > flat.size())
      throw std::runtime_error(dir.string() + ": params.bin shorter than the declared shapes");
    std::copy(flat.begin() + offset, flat.begin() + offset + p.size(), p.value().begin());
    offset += p.size();
  }
  if (offset != flat.size())
    throw std::runtime_error(dir.string() + ": params.bin longer than the declared shapes");
  return model;
}

void save_batch(const GeneratedBatch& batch, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["kind"] = "generated_batch";
  m["variables"] = batch.variables;
  m["window"] = batch.window;
  m["count"] = batch.count();
  m["seed"] = batch.seed;
  io::write_manifest(dir / "manifest.json", m);
  io::write_doubles(dir / "values.bin", batch.values);
  io::write_doubles(dir / "conditions.bin", batch.conditions);
}

GeneratedBatch load_batch(const std::filesystem::path& dir) {
  auto m = io::read_manifest(dir / "manifest.json");
  if (m.value("kind", "") != "generated_batch")
    throw std::runtime_error(dir.string() + " does not hold a generated batch");
  GeneratedBatch batch;
  batch.variables = m.at("variables").get<std::size_t>();
  batch.window = m.at("window").get<std::size_t>();
  batch.seed = m.at("seed").get<std::uint64_t>();
  batch.values = io::read_doubles(dir / "values.bin");
  batch.conditions = io::read_doubles(dir / "conditions.bin");
  if (batch.values.size() != batch.count() * batch.variables * batch.window)
    throw std::runtime_error(dir.string() + ": values.bin size disagrees with manifest");
  return batch;
}

}  // namespace tsregen::gan
