#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace rode {

// Two-component 1-D Gaussian mixture over per-sample losses. Component 0 is
// always the lower-mean (clean) component.
struct GmmParams {
  std::array<double, 2> means{};
  std::array<double, 2> variances{};
  std::array<double, 2> weights{};
};

struct RalConfig {
  double mu = 1.0 / (std::exp(1.0) - 1.0);  // gamma spans (0, 1] over w in [0, 1)
  double sharpen = 0.25;
  double gamma_floor = 0.01;
  int max_iter = 100;
  double tol = 1e-6;  // stop when the log-likelihood gain falls below this
  double variance_floor = 1e-6;
};

void validate(const RalConfig& config);

struct GmmFit {
  GmmParams params;
  std::vector<double> log_likelihood;  // after initialization and after each EM step
  int iterations = 0;
  bool converged = false;
};

// EM from 25th/75th-percentile initial means. Throws rode::Error when the
// input has fewer than two distinct values.
GmmFit fit_gmm_2_detailed(std::span<const double> losses, const RalConfig& config);
GmmParams fit_gmm_2(std::span<const double> losses, const RalConfig& config);

double gmm_log_likelihood(const GmmParams& gmm, std::span<const double> values);

// Posterior probability of the clean component.
double clean_posterior(const GmmParams& gmm, double loss);

// gamma = log((1 - w)^sharpen / mu + 1), clamped to [gamma_floor, 1].
double gamma_from_posterior(double w, const RalConfig& config);

// Maps values to [0, 1]; a constant input maps to all zeros.
std::vector<double> minmax_normalize(std::span<const double> values);

struct AdaptiveGammas {
  std::vector<double> gammas;
  std::vector<double> posteriors;  // empty when the fit was degenerate
  GmmParams gmm;
  bool degenerate = false;
};

// Normalize, fit, and convert every loss into an exponent. A degenerate
// input falls back to gamma = gamma_floor everywhere.
AdaptiveGammas adaptive_gammas(std::span<const double> raw_losses, const RalConfig& config);

}  // namespace rode
