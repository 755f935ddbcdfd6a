#include "rode/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "rode/error.hpp"

namespace rode {

std::size_t Encoder::param_count() const {
  if (hidden == 0) return in * out + out;
  return in * hidden + hidden + hidden * out + out;
}

Encoder make_encoder(std::size_t in, std::size_t hidden, std::size_t out) {
  if (in == 0 || out == 0) throw Error("encoder: input and output dims must be positive");
  Encoder enc{in, hidden, out, {}};
  enc.params.assign(enc.param_count(), 0.0);
  return enc;
}

Encoder init_encoder(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed) {
  Encoder enc = make_encoder(in, hidden, out);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t fan_in, std::size_t count) {
    const double a = 1.0 / std::sqrt(double(fan_in));
    std::uniform_real_distribution<double> dist(-a, a);
    for (std::size_t k = 0; k < count; ++k) enc.params[offset + k] = dist(rng);
  };
  if (hidden == 0) {
    fill(0, in, in * out);
  } else {
    fill(0, in, in * hidden);
    fill(in * hidden + hidden, hidden, hidden * out);
  }
  return enc;
}

namespace {

// y = x W + b with W stored row-major (rows = inputs).
void affine(std::span<const double> x, const double* w, const double* b, std::size_t n_in,
            std::size_t n_out, std::vector<double>& y) {
  y.assign(b, b + n_out);
  for (std::size_t i = 0; i < n_in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* wi = w + i * n_out;
    for (std::size_t j = 0; j < n_out; ++j) y[j] += xi * wi[j];
  }
}

}  // namespace

EncoderTrace encoder_trace(const Encoder& enc, std::span<const double> x) {
  if (x.size() != enc.in)
    throw Error("encoder: input has dimension " + std::to_string(x.size()) + ", expected " +
                std::to_string(enc.in));
  EncoderTrace t;
  t.input.assign(x.begin(), x.end());
  const double* p = enc.params.data();
  if (enc.hidden == 0) {
    affine(x, p, p + enc.in * enc.out, enc.in, enc.out, t.pre_norm);
  } else {
    affine(x, p, p + enc.in * enc.hidden, enc.in, enc.hidden, t.hidden_act);
    for (double& h : t.hidden_act) h = std::tanh(h);
    const double* w2 = p + enc.in * enc.hidden + enc.hidden;
    affine(t.hidden_act, w2, w2 + enc.hidden * enc.out, enc.hidden, enc.out, t.pre_norm);
  }
  t.output = t.pre_norm;
  t.z_norm = normalize_in_place(t.output);
  if (!(t.z_norm > 0.0) || !std::isfinite(t.z_norm))
    throw Error("encoder: projected feature has zero or non-finite norm");
  return t;
}

std::vector<double> encoder_forward(const Encoder& enc, std::span<const double> x) {
  return encoder_trace(enc, x).output;
}

void encoder_backward(const Encoder& enc, const EncoderTrace& trace,
                      std::span<const double> grad_output, std::span<double> grad) {
  // Through the normalization: dz = (g - v (v.g)) / |z|.
  const auto& v = trace.output;
  const double vg = dot(v, grad_output);
  std::vector<double> dz(enc.out);
  for (std::size_t j = 0; j < enc.out; ++j) dz[j] = (grad_output[j] - v[j] * vg) / trace.z_norm;

  auto accumulate_affine = [&](std::span<const double> in, std::size_t w_off, std::size_t n_in,
                               std::size_t n_out, const std::vector<double>& dy) {
    for (std::size_t i = 0; i < n_in; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      double* gw = grad.data() + w_off + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) gw[j] += xi * dy[j];
    }
    double* gb = grad.data() + w_off + n_in * n_out;
    for (std::size_t j = 0; j < n_out; ++j) gb[j] += dy[j];
  };

  if (enc.hidden == 0) {
    accumulate_affine(trace.input, 0, enc.in, enc.out, dz);
    return;
  }
  const std::size_t w2_off = enc.in * enc.hidden + enc.hidden;
  accumulate_affine(trace.hidden_act, w2_off, enc.hidden, enc.out, dz);
  const double* w2 = enc.params.data() + w2_off;
  std::vector<double> dh(enc.hidden);
  for (std::size_t i = 0; i < enc.hidden; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < enc.out; ++j) s += w2[i * enc.out + j] * dz[j];
    const double a = trace.hidden_act[i];
    dh[i] = s * (1.0 - a * a);
  }
  accumulate_affine(trace.input, 0, enc.in, enc.hidden, dh);
}

Matrix encode_rows(const Encoder& enc, const Matrix& x) {
  if (x.cols() != enc.in)
    throw Error("encoder: input has dimension " + std::to_string(x.cols()) + ", expected " +
                std::to_string(enc.in));
  Matrix out(x.rows(), enc.out);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  bool failed = false;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto v = encoder_forward(enc, x.row(static_cast<std::size_t>(i)));
      std::copy(v.begin(), v.end(), out.row(static_cast<std::size_t>(i)).begin());
    } catch (const Error&) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) throw Error("encoder: projected feature has zero or non-finite norm");
  return out;
}

}  // namespace rode
