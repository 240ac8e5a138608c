#pragma once

#include <cstddef>
#include <vector>

#include "tsregen/rng.hpp"
#include "tsregen/tape.hpp"
#include "tsregen/tensor.hpp"

namespace tsregen::ad {

enum class Activation { none, relu, sigmoid };
enum class Mode { train, eval };

// Elementwise; shapes must match exactly.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double s);

Tensor relu(Tape& tape, const Tensor& x);
// Numerically stable sigmoid; outputs clamped into (0, 1) at 64-bit spacing.
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh_op(Tape& tape, const Tensor& x);

Tensor reshape(Tape& tape, const Tensor& x, std::vector<std::size_t> shape);

// Stacks two 2-D tensors along the row axis: [r1 x c] + [r2 x c] -> [(r1+r2) x c].
Tensor concat_rows(Tape& tape, const Tensor& a, const Tensor& b);

// Repeats a vector across columns: [n] -> [n x cols].
Tensor broadcast_col(Tape& tape, const Tensor& v, std::size_t cols);

// Extracts column `idx` of a 2-D tensor as a vector.
Tensor column(Tape& tape, const Tensor& x, std::size_t idx);

// Collects one-element tensors into a vector tensor [n].
Tensor stack_scalars(Tape& tape, const std::vector<Tensor>& scalars);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

// activation(W.x + b) for x [n], W [m x n], b [m].
Tensor dense(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b, Activation act);

// Shared dense applied to every column: X [n x T] -> [m x T].
Tensor dense_seq(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b, Activation act);

// Valid (no padding) 1-D convolution along time. input [C x L],
// kernels [F x C x W], output [F x floor((L-W)/stride)+1].
// Activation is restricted to none/relu.
Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernels, std::size_t stride,
              Activation act);

// Max pooling along time; gradient routes to the first maximal element of
// each window. input [C x L] -> [C x floor((L-pool)/stride)+1].
Tensor maxpool1d(Tape& tape, const Tensor& input, std::size_t pool, std::size_t stride);

// LSTM weight set; gate rows ordered (input, forget, candidate, output).
struct LstmParams {
  Tensor wx;  // [4H x F]
  Tensor wh;  // [4H x H]
  Tensor b;   // [4H]

  std::size_t input_size() const { return wx.dim(1); }
  std::size_t hidden_size() const { return wh.dim(1); }

  // Uniform +-sqrt(6/(fan_in+fan_out)) weights; forget-gate bias 1, others 0.
  static LstmParams init(std::size_t input, std::size_t hidden, RngStream& rng);
  std::vector<Tensor> parameters() const { return {wx, wh, b}; }
};

// Unrolled LSTM over x [F x T]; returns all hidden states [H x T].
// h0 and c0 are [H] initial states.
Tensor lstm(Tape& tape, const Tensor& x, const LstmParams& p, const Tensor& h0, const Tensor& c0);

// Train mode zeroes each element with probability `rate` and scales the
// survivors by 1/(1-rate); eval mode is the identity. 0 <= rate < 1.
Tensor dropout(Tape& tape, const Tensor& x, double rate, Mode mode, RngStream& rng);

// Mean of t*log(p) + (1-t)*log(1-p) with p clamped to [1e-7, 1-1e-7] before
// the logs. This is the log-likelihood (the quantity a discriminator
// maximizes), not a negated loss.
Tensor bce_terms(Tape& tape, const Tensor& predictions, const Tensor& targets);

inline constexpr double kProbClamp = 1e-7;

}  // namespace tsregen::ad
