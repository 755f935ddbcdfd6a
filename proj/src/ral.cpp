#include "rode/ral.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

#include "rode/error.hpp"

namespace rode {

namespace {

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Linear interpolation between order statistics.
double percentile(std::vector<double> sorted, double q) {
  const double pos = q * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

void order_components(GmmParams& g) {
  if (g.means[1] < g.means[0]) {
    std::swap(g.means[0], g.means[1]);
    std::swap(g.variances[0], g.variances[1]);
    std::swap(g.weights[0], g.weights[1]);
  }
}

}  // namespace

void validate(const RalConfig& config) {
  if (!(config.mu > 0.0)) throw Error("RAL: mu must be > 0");
  if (!(config.gamma_floor > 0.0 && config.gamma_floor < 1.0))
    throw Error("RAL: gamma floor must lie in (0, 1)");
  if (config.max_iter < 1) throw Error("RAL: max EM iterations must be >= 1");
  if (!(config.tol >= 0.0)) throw Error("RAL: EM tolerance must be >= 0");
  if (!(config.variance_floor > 0.0)) throw Error("RAL: variance floor must be > 0");
}

double gmm_log_likelihood(const GmmParams& g, std::span<const double> values) {
  double ll = 0.0;
  for (double x : values)
    ll += log_sum_exp(std::log(g.weights[0]) + log_normal_pdf(x, g.means[0], g.variances[0]),
                      std::log(g.weights[1]) + log_normal_pdf(x, g.means[1], g.variances[1]));
  return ll;
}

GmmFit fit_gmm_2_detailed(std::span<const double> losses, const RalConfig& config) {
  validate(config);
  for (double x : losses)
    if (!std::isfinite(x)) throw Error("fit_gmm_2: non-finite loss");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() < 2 || sorted.front() == sorted.back())
    throw Error("fit_gmm_2: degenerate input, fewer than two distinct loss values");

  const double n = double(sorted.size());
  double mean = 0.0;
  for (double x : sorted) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : sorted) var += (x - mean) * (x - mean);
  var = std::max(var / n, config.variance_floor);

  GmmFit fit;
  GmmParams& g = fit.params;
  g.means = {percentile(sorted, 0.25), percentile(sorted, 0.75)};
  g.variances = {var, var};
  g.weights = {0.5, 0.5};
  fit.log_likelihood.push_back(gmm_log_likelihood(g, losses));

  std::vector<double> resp(losses.size());  // responsibility of component 0
  for (int it = 0; it < config.max_iter; ++it) {
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const double a = std::log(g.weights[0]) + log_normal_pdf(losses[i], g.means[0], g.variances[0]);
      const double b = std::log(g.weights[1]) + log_normal_pdf(losses[i], g.means[1], g.variances[1]);
      resp[i] = std::exp(a - log_sum_exp(a, b));
    }
    GmmParams next = g;
    for (std::size_t k = 0; k < 2; ++k) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < losses.size(); ++i) {
        const double r = k == 0 ? resp[i] : 1.0 - resp[i];
        nk += r;
        sx += r * losses[i];
      }
      if (nk <= std::numeric_limits<double>::min()) continue;  // empty component keeps its params
      const double mk = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < losses.size(); ++i) {
        const double r = k == 0 ? resp[i] : 1.0 - resp[i];
        sv += r * (losses[i] - mk) * (losses[i] - mk);
      }
      next.means[k] = mk;
      next.variances[k] = std::max(sv / nk, config.variance_floor);
      next.weights[k] = nk / n;
    }
    const double wsum = next.weights[0] + next.weights[1];
    next.weights[0] /= wsum;
    next.weights[1] /= wsum;
    g = next;
    fit.iterations = it + 1;
    const double ll = gmm_log_likelihood(g, losses);
    const double gain = ll - fit.log_likelihood.back();
    fit.log_likelihood.push_back(ll);
    if (std::abs(gain) < config.tol) {
      fit.converged = true;
      break;
    }
  }
  order_components(g);
  return fit;
}

GmmParams fit_gmm_2(std::span<const double> losses, const RalConfig& config) {
  return fit_gmm_2_detailed(losses, config).params;
}

double clean_posterior(const GmmParams& g, double loss) {
  const double a = std::log(g.weights[0]) + log_normal_pdf(loss, g.means[0], g.variances[0]);
  const double b = std::log(g.weights[1]) + log_normal_pdf(loss, g.means[1], g.variances[1]);
  return std::exp(a - log_sum_exp(a, b));
}

double gamma_from_posterior(double w, const RalConfig& config) {
  const double clean = std::clamp(w, 0.0, 1.0);
  const double raw = std::log(std::pow(1.0 - clean, config.sharpen) / config.mu + 1.0);
  return std::clamp(raw, config.gamma_floor, 1.0);
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double a = *lo, span = *hi - *lo;
  for (double& x : out) x = span > 0.0 ? (x - a) / span : 0.0;
  return out;
}

AdaptiveGammas adaptive_gammas(std::span<const double> raw_losses, const RalConfig& config) {
  validate(config);
  AdaptiveGammas out;
  const auto normalized = minmax_normalize(raw_losses);
  try {
    out.gmm = fit_gmm_2(normalized, config);
  } catch (const Error&) {
    out.degenerate = true;
    out.gammas.assign(raw_losses.size(), config.gamma_floor);
    return out;
  }
  out.posteriors.reserve(normalized.size());
  out.gammas.reserve(normalized.size());
  for (double x : normalized) {
    const double w = clean_posterior(out.gmm, x);
    out.posteriors.push_back(w);
    out.gammas.push_back(gamma_from_posterior(w, config));
  }
  return out;
}

}  // namespace rode
