#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rode/matrix.hpp"

namespace rode {

// Modality-specific projector: affine map (optionally through one tanh hidden
// layer) followed by L2 normalization. Parameters live in one flat vector so
// gradients and finite-difference checks share the layout:
//   no hidden layer: [W (in x out), b (out)]
//   hidden layer:    [W1 (in x hidden), b1 (hidden), W2 (hidden x out), b2 (out)]
struct Encoder {
  std::size_t in = 0;
  std::size_t hidden = 0;  // 0 = no hidden layer
  std::size_t out = 0;
  std::vector<double> params;

  std::size_t param_count() const;
  friend bool operator==(const Encoder&, const Encoder&) = default;
};

Encoder make_encoder(std::size_t in, std::size_t hidden, std::size_t out);

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
Encoder init_encoder(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed);

// Intermediate values kept for backpropagation.
struct EncoderTrace {
  std::vector<double> input;
  std::vector<double> hidden_act;  // tanh activations, empty without hidden layer
  std::vector<double> pre_norm;    // z before normalization
  double z_norm = 0.0;
  std::vector<double> output;      // z / |z|
};

std::vector<double> encoder_forward(const Encoder& enc, std::span<const double> x);
EncoderTrace encoder_trace(const Encoder& enc, std::span<const double> x);

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
void encoder_backward(const Encoder& enc, const EncoderTrace& trace,
                      std::span<const double> grad_output, std::span<double> grad);

// Forward pass for every row; rows are independent and computed in parallel.
Matrix encode_rows(const Encoder& enc, const Matrix& x);

}  // namespace rode
