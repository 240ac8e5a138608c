#include "tsregen/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tsregen::ad {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                                " vs " + shape_to_string(b.shape()));
  }
}

double stable_sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    double e = std::exp(x);
    s = e / (1.0 + e);
  }
  // Keep strictly inside (0,1) so downstream logs stay finite.
  return std::clamp(s, 1e-15, 1.0 - 1e-15);
}

double act_forward(Activation act, double x) {
  switch (act) {
    case Activation::none: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::sigmoid: return stable_sigmoid(x);
  }
  return x;
}

// Derivative of the activation expressed through pre-activation x and output y.
double act_backward(Activation act, double x, double y) {
  switch (act) {
    case Activation::none: return 1.0;
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (tape.wants({a, b})) {
    tape.record(out, [a, b, out] {
      const auto& go = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (tape.wants({a, b})) {
    tape.record(out, [a, b, out] {
      const auto& go = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (tape.wants({a, b})) {
    // Copies keep the pull-back correct even if a or b aliases out later.
    std::vector<double> asnap = av, bsnap = bv;
    tape.record(out, [a, b, out, asnap = std::move(asnap), bsnap = std::move(bsnap)] {
      const auto& go = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bsnap[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * asnap[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * s;
  if (tape.wants({a})) {
    tape.record(out, [a, out, s] {
      const auto& go = out.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s;
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (tape.wants({x})) {
    std::vector<double> xsnap = xv;
    tape.record(out, [x, out, xsnap = std::move(xsnap)] {
      const auto& go = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i)
        if (xsnap[i] > 0.0) gx[i] += go[i];
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = stable_sigmoid(xv[i]);
  if (tape.wants({x})) {
    std::vector<double> ysnap = ov;
    tape.record(out, [x, out, ysnap = std::move(ysnap)] {
      const auto& go = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * ysnap[i] * (1.0 - ysnap[i]);
    });
  }
  return out;
}

Tensor tanh_op(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(xv[i]);
  if (tape.wants({x})) {
    std::vector<double> ysnap = ov;
    tape.record(out, [x, out, ysnap = std::move(ysnap)] {
      const auto& go = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (1.0 - ysnap[i] * ysnap[i]);
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, std::vector<std::size_t> shape) {
  Tensor out = Tensor::of(std::move(shape), x.value());
  if (out.size() != x.size())
    throw std::invalid_argument("reshape: element count mismatch " + shape_to_string(x.shape()) +
                                " -> " + shape_to_string(out.shape()));
  if (tape.wants({x})) {
    tape.record(out, [x, out] {
      const auto& go = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
  }
  return out;
}

Tensor concat_rows(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw std::invalid_argument("concat_rows: need 2-D tensors with equal columns, got " +
                                shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  std::size_t r1 = a.dim(0), r2 = b.dim(0), c = a.dim(1);
  Tensor out = Tensor::zeros({r1 + r2, c});
  auto& ov = out.value();
  std::copy(a.value().begin(), a.value().end(), ov.begin());
  std::copy(b.value().begin(), b.value().end(), ov.begin() + static_cast<std::ptrdiff_t>(r1 * c));
  if (tape.wants({a, b})) {
    tape.record(out, [a, b, out, r1, c] {
      const auto& go = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[r1 * c + i];
      }
    });
  }
  return out;
}

Tensor broadcast_col(Tape& tape, const Tensor& v, std::size_t cols) {
  if (v.rank() != 1)
    throw std::invalid_argument("broadcast_col: need a vector, got " + shape_to_string(v.shape()));
  if (cols == 0) throw std::invalid_argument("broadcast_col: cols must be positive");
  std::size_t n = v.size();
  Tensor out = Tensor::zeros({n, cols});
  const auto& vv = v.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < cols; ++t) ov[i * cols + t] = vv[i];
  if (tape.wants({v})) {
    tape.record(out, [v, out, n, cols] {
      const auto& go = out.grad();
      auto& gv = v.grad();
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t t = 0; t < cols; ++t) acc += go[i * cols + t];
        gv[i] += acc;
      }
    });
  }
  return out;
}

Tensor column(Tape& tape, const Tensor& x, std::size_t idx) {
  if (x.rank() != 2)
    throw std::invalid_argument("column: need a 2-D tensor, got " + shape_to_string(x.shape()));
  std::size_t rows = x.dim(0), cols = x.dim(1);
  if (idx >= cols) throw std::invalid_argument("column: index " + std::to_string(idx) +
                                               " out of range for " + shape_to_string(x.shape()));
  Tensor out = Tensor::zeros({rows});
  const auto& xv = x.value();
  auto& ov = out.value();
  for (std::size_t r = 0; r < rows; ++r) ov[r] = xv[r * cols + idx];
  if (tape.wants({x})) {
    tape.record(out, [x, out, rows, cols, idx] {
      const auto& go = out.grad();
      auto& gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) gx[r * cols + idx] += go[r];
    });
  }
  return out;
}

Tensor stack_scalars(Tape& tape, const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack_scalars: empty input");
  std::size_t n = scalars.size();
  Tensor out = Tensor::zeros({n});
  auto& ov = out.value();
  bool any_grad = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (scalars[i].size() != 1)
      throw std::invalid_argument("stack_scalars: element " + std::to_string(i) + " has shape " +
                                  shape_to_string(scalars[i].shape()));
    ov[i] = scalars[i].value()[0];
    any_grad = any_grad || scalars[i].requires_grad();
  }
  if (tape.recording() && any_grad) {
    tape.record(out, [inputs = scalars, out] {
      const auto& go = out.grad();
      for (std::size_t i = 0; i < inputs.size(); ++i)
        if (inputs[i].requires_grad()) inputs[i].grad()[0] += go[i];
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros({1});
  double acc = 0.0;
  for (double v : x.value()) acc += v;
  out.value()[0] = acc;
  if (tape.wants({x})) {
    tape.record(out, [x, out] {
      double go = out.grad()[0];
      auto& gx = x.grad();
      for (double& g : gx) g += go;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros({1});
  double acc = 0.0;
  for (double v : x.value()) acc += v;
  double inv = 1.0 / static_cast<double>(x.size());
  out.value()[0] = acc * inv;
  if (tape.wants({x})) {
    tape.record(out, [x, out, inv] {
      double go = out.grad()[0] * inv;
      auto& gx = x.grad();
      for (double& g : gx) g += go;
    });
  }
  return out;
}

Tensor dense(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b, Activation act) {
  if (x.rank() != 1 || w.rank() != 2 || b.rank() != 1 || w.dim(1) != x.size() || w.dim(0) != b.size()) {
    throw std::invalid_argument("dense: dimension mismatch, input " + shape_to_string(x.shape()) +
                                ", weights " + shape_to_string(w.shape()) + ", bias " +
                                shape_to_string(b.shape()));
  }
  std::size_t m = w.dim(0), n = w.dim(1);
  Tensor out = Tensor::zeros({m});
  const double* xv = x.value().data();
  const double* wv = w.value().data();
  const double* bv = b.value().data();
  auto& ov = out.value();
  std::vector<double> pre(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = bv[i];
    const double* row = wv + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * xv[j];
    pre[i] = acc;
    ov[i] = act_forward(act, acc);
  }
  if (tape.wants({x, w, b})) {
    std::vector<double> xsnap = x.value(), wsnap = w.value(), ysnap = ov;
    tape.record(out, [x, w, b, out, act, m, n, pre = std::move(pre), xsnap = std::move(xsnap),
                      wsnap = std::move(wsnap), ysnap = std::move(ysnap)] {
      const auto& go = out.grad();
      std::vector<double> dpre(m);
      for (std::size_t i = 0; i < m; ++i) dpre[i] = go[i] * act_backward(act, pre[i], ysnap[i]);
      if (w.requires_grad()) {
        auto& gw = w.grad();
        for (std::size_t i = 0; i < m; ++i) {
          double d = dpre[i];
          double* row = gw.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += d * xsnap[j];
        }
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < m; ++i) gb[i] += dpre[i];
      }
      if (x.requires_grad()) {
        auto& gx = x.grad();
        for (std::size_t i = 0; i < m; ++i) {
          double d = dpre[i];
          const double* row = wsnap.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) gx[j] += d * row[j];
        }
      }
    });
  }
  return out;
}

Tensor dense_seq(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b, Activation act) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || w.dim(1) != x.dim(0) || w.dim(0) != b.size()) {
    throw std::invalid_argument("dense_seq: dimension mismatch, input " + shape_to_string(x.shape()) +
                                ", weights " + shape_to_string(w.shape()) + ", bias " +
                                shape_to_string(b.shape()));
  }
  std::size_t m = w.dim(0), n = w.dim(1), steps = x.dim(1);
  Tensor out = Tensor::zeros({m, steps});
  const double* xv = x.value().data();
  const double* wv = w.value().data();
  const double* bv = b.value().data();
  auto& ov = out.value();
  std::vector<double> pre(m * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = bv[i];
      const double* row = wv + i * n;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * xv[j * steps + t];
      pre[i * steps + t] = acc;
      ov[i * steps + t] = act_forward(act, acc);
    }
  }
  if (tape.wants({x, w, b})) {
    std::vector<double> xsnap = x.value(), wsnap = w.value(), ysnap = ov;
    tape.record(out, [x, w, b, out, act, m, n, steps, pre = std::move(pre), xsnap = std::move(xsnap),
                      wsnap = std::move(wsnap), ysnap = std::move(ysnap)] {
      const auto& go = out.grad();
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < m; ++i) {
          double d = go[i * steps + t] *
                     act_backward(act, pre[i * steps + t], ysnap[i * steps + t]);
          if (d == 0.0) continue;
          if (w.requires_grad()) {
            double* row = w.grad().data() + i * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += d * xsnap[j * steps + t];
          }
          if (b.requires_grad()) b.grad()[i] += d;
          if (x.requires_grad()) {
            auto& gx = x.grad();
            const double* row = wsnap.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) gx[j * steps + t] += d * row[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernels, std::size_t stride,
              Activation act) {
  if (act == Activation::sigmoid)
    throw std::invalid_argument("conv1d: activation must be none or relu");
  if (input.rank() != 2 || kernels.rank() != 3) {
    throw std::invalid_argument("conv1d: need input [C x L] and kernels [F x C x W], got " +
                                shape_to_string(input.shape()) + " and " +
                                shape_to_string(kernels.shape()));
  }
  std::size_t channels = input.dim(0), length = input.dim(1);
  std::size_t filters = kernels.dim(0), kchannels = kernels.dim(1), width = kernels.dim(2);
  if (kchannels != channels) {
    throw std::invalid_argument("conv1d: input channels " + std::to_string(channels) +
                                " do not match kernel channels " + std::to_string(kchannels) +
                                " (input " + shape_to_string(input.shape()) + ", kernels " +
                                shape_to_string(kernels.shape()) + ")");
  }
  if (stride < 1) throw std::invalid_argument("conv1d: stride must be >= 1");
  if (width > length)
    throw std::invalid_argument("conv1d: kernel width " + std::to_string(width) +
                                " exceeds input length " + std::to_string(length));
  std::size_t out_len = (length - width) / stride + 1;
  Tensor out = Tensor::zeros({filters, out_len});
  const double* xv = input.value().data();
  const double* kv = kernels.value().data();
  auto& ov = out.value();
  std::vector<double> pre(filters * out_len);
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t o = 0; o < out_len; ++o) {
      double acc = 0.0;
      std::size_t base = o * stride;
      for (std::size_t c = 0; c < channels; ++c) {
        const double* krow = kv + (f * channels + c) * width;
        const double* xrow = xv + c * length + base;
        for (std::size_t wi = 0; wi < width; ++wi) acc += krow[wi] * xrow[wi];
      }
      pre[f * out_len + o] = acc;
      ov[f * out_len + o] = act_forward(act, acc);
    }
  }
  if (tape.wants({input, kernels})) {
    std::vector<double> xsnap = input.value(), ksnap = kernels.value();
    tape.record(out, [input, kernels, out, act, channels, length, filters, width, stride, out_len,
                      pre = std::move(pre), xsnap = std::move(xsnap), ksnap = std::move(ksnap)] {
      const auto& go = out.grad();
      for (std::size_t f = 0; f < filters; ++f) {
        for (std::size_t o = 0; o < out_len; ++o) {
          double p = pre[f * out_len + o];
          double d = go[f * out_len + o] * act_backward(act, p, act_forward(act, p));
          if (d == 0.0) continue;
          std::size_t base = o * stride;
          for (std::size_t c = 0; c < channels; ++c) {
            if (kernels.requires_grad()) {
              double* krow = kernels.grad().data() + (f * channels + c) * width;
              const double* xrow = xsnap.data() + c * length + base;
              for (std::size_t wi = 0; wi < width; ++wi) krow[wi] += d * xrow[wi];
            }
            if (input.requires_grad()) {
              double* xrow = input.grad().data() + c * length + base;
              const double* krow = ksnap.data() + (f * channels + c) * width;
              for (std::size_t wi = 0; wi < width; ++wi) xrow[wi] += d * krow[wi];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor maxpool1d(Tape& tape, const Tensor& input, std::size_t pool, std::size_t stride) {
  if (input.rank() != 2)
    throw std::invalid_argument("maxpool1d: need input [C x L], got " + shape_to_string(input.shape()));
  if (pool < 1 || stride < 1) throw std::invalid_argument("maxpool1d: pool and stride must be >= 1");
  std::size_t channels = input.dim(0), length = input.dim(1);
  if (pool > length)
    throw std::invalid_argument("maxpool1d: pool size " + std::to_string(pool) +
                                " exceeds input length " + std::to_string(length));
  std::size_t out_len = (length - pool) / stride + 1;
  Tensor out = Tensor::zeros({channels, out_len});
  const double* xv = input.value().data();
  auto& ov = out.value();
  std::vector<std::size_t> argmax(channels * out_len);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t o = 0; o < out_len; ++o) {
      std::size_t base = c * length + o * stride;
      double best = xv[base];
      std::size_t best_i = base;
      for (std::size_t k = 1; k < pool; ++k) {
        if (xv[base + k] > best) {  // strict: ties keep the first occurrence
          best = xv[base + k];
          best_i = base + k;
        }
      }
      ov[c * out_len + o] = best;
      argmax[c * out_len + o] = best_i;
    }
  }
  if (tape.wants({input})) {
    tape.record(out, [input, out, argmax = std::move(argmax)] {
      const auto& go = out.grad();
      auto& gx = input.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[argmax[i]] += go[i];
    });
  }
  return out;
}

LstmParams LstmParams::init(std::size_t input, std::size_t hidden, RngStream& rng) {
  LstmParams p;
  double lim_x = std::sqrt(6.0 / static_cast<double>(input + hidden));
  double lim_h = std::sqrt(6.0 / static_cast<double>(hidden + hidden));
  p.wx = Tensor::zeros({4 * hidden, input}, true);
  p.wh = Tensor::zeros({4 * hidden, hidden}, true);
  p.b = Tensor::zeros({4 * hidden}, true);
  for (double& v : p.wx.value()) v = rng.uniform(-lim_x, lim_x);
  for (double& v : p.wh.value()) v = rng.uniform(-lim_h, lim_h);
  for (std::size_t i = hidden; i < 2 * hidden; ++i) p.b.value()[i] = 1.0;  // forget gate
  return p;
}

Tensor lstm(Tape& tape, const Tensor& x, const LstmParams& p, const Tensor& h0, const Tensor& c0) {
  std::size_t features = p.input_size();
  std::size_t hidden = p.hidden_size();
  if (x.rank() != 2 || x.dim(0) != features) {
    throw std::invalid_argument("lstm: feature dimension mismatch, input " +
                                shape_to_string(x.shape()) + " vs weight input size " +
                                std::to_string(features));
  }
  if (h0.size() != hidden || c0.size() != hidden)
    throw std::invalid_argument("lstm: initial state size must equal cell size " +
                                std::to_string(hidden));
  std::size_t steps = x.dim(1);
  Tensor out = Tensor::zeros({hidden, steps});

  const double* xv = x.value().data();
  const double* wx = p.wx.value().data();
  const double* wh = p.wh.value().data();
  const double* bv = p.b.value().data();

  // Caches for backward: gate activations and cell states per step.
  std::vector<double> gates(4 * hidden * steps);      // sigma(i), sigma(f), tanh(g), sigma(o)
  std::vector<double> cells(hidden * (steps + 1));    // c_{-1} .. c_{T-1}
  std::vector<double> hiddens(hidden * (steps + 1));  // h_{-1} .. h_{T-1}
  std::vector<double> tanh_c(hidden * steps);

  std::copy(h0.value().begin(), h0.value().end(), hiddens.begin());
  std::copy(c0.value().begin(), c0.value().end(), cells.begin());

  auto& ov = out.value();
  std::vector<double> a(4 * hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* h_prev = hiddens.data() + t * hidden;
    const double* c_prev = cells.data() + t * hidden;
    for (std::size_t r = 0; r < 4 * hidden; ++r) {
      double acc = bv[r];
      const double* wxr = wx + r * features;
      for (std::size_t j = 0; j < features; ++j) acc += wxr[j] * xv[j * steps + t];
      const double* whr = wh + r * hidden;
      for (std::size_t j = 0; j < hidden; ++j) acc += whr[j] * h_prev[j];
      a[r] = acc;
    }
    double* g = gates.data() + t * 4 * hidden;
    double* c_now = cells.data() + (t + 1) * hidden;
    double* h_now = hiddens.data() + (t + 1) * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      double gi = stable_sigmoid(a[j]);
      double gf = stable_sigmoid(a[hidden + j]);
      double gg = std::tanh(a[2 * hidden + j]);
      double go = stable_sigmoid(a[3 * hidden + j]);
      g[j] = gi;
      g[hidden + j] = gf;
      g[2 * hidden + j] = gg;
      g[3 * hidden + j] = go;
      double c = gf * c_prev[j] + gi * gg;
      double tc = std::tanh(c);
      c_now[j] = c;
      tanh_c[t * hidden + j] = tc;
      h_now[j] = go * tc;
      ov[j * steps + t] = h_now[j];
    }
  }

  if (tape.wants({x, p.wx, p.wh, p.b, h0, c0})) {
    std::vector<double> xsnap = x.value(), wxsnap = p.wx.value(), whsnap = p.wh.value();
    tape.record(out, [x, p, h0, c0, out, features, hidden, steps, gates = std::move(gates),
                      cells = std::move(cells), hiddens = std::move(hiddens),
                      tanh_c = std::move(tanh_c), xsnap = std::move(xsnap),
                      wxsnap = std::move(wxsnap), whsnap = std::move(whsnap)] {
      const auto& go_all = out.grad();
      std::vector<double> dh(hidden, 0.0), dc(hidden, 0.0), da(4 * hidden);
      for (std::size_t tt = steps; tt-- > 0;) {
        const double* g = gates.data() + tt * 4 * hidden;
        const double* c_prev = cells.data() + tt * hidden;
        const double* h_prev = hiddens.data() + tt * hidden;
        for (std::size_t j = 0; j < hidden; ++j) {
          double dhj = dh[j] + go_all[j * steps + tt];
          double tc = tanh_c[tt * hidden + j];
          double gi = g[j], gf = g[hidden + j], gg = g[2 * hidden + j], gout = g[3 * hidden + j];
          double dcj = dc[j] + dhj * gout * (1.0 - tc * tc);
          da[j] = dcj * gg * gi * (1.0 - gi);
          da[hidden + j] = dcj * c_prev[j] * gf * (1.0 - gf);
          da[2 * hidden + j] = dcj * gi * (1.0 - gg * gg);
          da[3 * hidden + j] = dhj * tc * gout * (1.0 - gout);
          dc[j] = dcj * gf;
        }
        if (p.wx.requires_grad()) {
          auto& gwx = p.wx.grad();
          for (std::size_t r = 0; r < 4 * hidden; ++r) {
            double d = da[r];
            if (d == 0.0) continue;
            double* row = gwx.data() + r * features;
            for (std::size_t j = 0; j < features; ++j) row[j] += d * xsnap[j * steps + tt];
          }
        }
        if (p.wh.requires_grad()) {
          auto& gwh = p.wh.grad();
          for (std::size_t r = 0; r < 4 * hidden; ++r) {
            double d = da[r];
            if (d == 0.0) continue;
            double* row = gwh.data() + r * hidden;
            for (std::size_t j = 0; j < hidden; ++j) row[j] += d * h_prev[j];
          }
        }
        if (p.b.requires_grad()) {
          auto& gb = p.b.grad();
          for (std::size_t r = 0; r < 4 * hidden; ++r) gb[r] += da[r];
        }
        if (x.requires_grad()) {
          auto& gx = x.grad();
          for (std::size_t r = 0; r < 4 * hidden; ++r) {
            double d = da[r];
            if (d == 0.0) continue;
            const double* row = wxsnap.data() + r * features;
            for (std::size_t j = 0; j < features; ++j) gx[j * steps + tt] += d * row[j];
          }
        }
        // dh for the previous step through the recurrent weights.
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t r = 0; r < 4 * hidden; ++r) {
          double d = da[r];
          if (d == 0.0) continue;
          const double* row = whsnap.data() + r * hidden;
          for (std::size_t j = 0; j < hidden; ++j) dh[j] += d * row[j];
        }
      }
      if (h0.requires_grad()) {
        auto& gh = h0.grad();
        for (std::size_t j = 0; j < hidden; ++j) gh[j] += dh[j];
      }
      if (c0.requires_grad()) {
        auto& gc = c0.grad();
        for (std::size_t j = 0; j < hidden; ++j) gc[j] += dc[j];
      }
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, Mode mode, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must satisfy 0 <= rate < 1, got " + std::to_string(rate));
  if (mode == Mode::eval || rate == 0.0) {
    Tensor out = Tensor::of(x.shape(), x.value());
    if (tape.wants({x})) {
      tape.record(out, [x, out] {
        const auto& go = out.grad();
        auto& gx = x.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      });
    }
    return out;
  }
  Tensor out = Tensor::zeros(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    ov[i] = xv[i] * mask[i];
  }
  if (tape.wants({x})) {
    tape.record(out, [x, out, mask = std::move(mask)] {
      const auto& go = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * mask[i];
    });
  }
  return out;
}

Tensor bce_terms(Tape& tape, const Tensor& predictions, const Tensor& targets) {
  check_same_shape("bce_terms", predictions, targets);
  std::size_t n = predictions.size();
  Tensor out = Tensor::zeros({1});
  const auto& pv = predictions.value();
  const auto& tv = targets.value();
  double acc = 0.0;
  std::vector<double> clamped(n);
  for (std::size_t i = 0; i < n; ++i) {
    double pc = std::clamp(pv[i], kProbClamp, 1.0 - kProbClamp);
    clamped[i] = pc;
    acc += tv[i] * std::log(pc) + (1.0 - tv[i]) * std::log(1.0 - pc);
  }
  out.value()[0] = acc / static_cast<double>(n);
  if (tape.wants({predictions})) {
    std::vector<double> psnap = pv, tsnap = tv;
    tape.record(out, [predictions, out, n, clamped = std::move(clamped), psnap = std::move(psnap),
                      tsnap = std::move(tsnap)] {
      double go = out.grad()[0] / static_cast<double>(n);
      auto& gp = predictions.grad();
      for (std::size_t i = 0; i < n; ++i) {
        // Clamp is flat outside its band, so saturated predictions get no pull.
        if (psnap[i] <= kProbClamp || psnap[i] >= 1.0 - kProbClamp) continue;
        gp[i] += go * (tsnap[i] / clamped[i] - (1.0 - tsnap[i]) / (1.0 - clamped[i]));
      }
    });
  }
  return out;
}

}  // namespace tsregen::ad
