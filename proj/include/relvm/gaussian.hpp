#pragma once

#include <cmath>

#include "relvm/array.hpp"

namespace relvm {

// Diagonal Gaussian, parameterised by mean and log-variance. Network variance
// heads clamp log-variance to [kLogVarMin, kLogVarMax] before building one of
// these; directly constructed values (e.g. analytic test fixtures) may lie
// outside that range.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct GaussianParams {
  Array mean;
  Array log_variance;

  GaussianParams() = default;
  GaussianParams(Array m, Array lv) : mean(std::move(m)), log_variance(std::move(lv)) {
    require_input(same_shape(mean, log_variance),
                  "GaussianParams: mean/log_variance shape mismatch");
  }

  std::size_t dim() const { return mean.size(); }

  static GaussianParams standard(std::size_t d) {
    return GaussianParams(Array({d}), Array({d}));
  }
};

// mean + exp(0.5*log_var) * noise
inline Array gaussian_reparameterize(const GaussianParams& p, const Array& noise) {
  require_input(noise.size() == p.dim(), "gaussian_reparameterize: noise length mismatch");
  Array out({p.dim()});
  for (std::size_t i = 0; i < p.dim(); ++i)
    out.v[i] = p.mean.v[i] + std::exp(0.5 * p.log_variance.v[i]) * noise.v[i];
  return out;
}

// Backward through the reparameterisation: d_sample -> (d_mean, d_log_var).
inline void gaussian_reparameterize_backward(const GaussianParams& p, const Array& noise,
                                             const Array& d_sample, Array& d_mean,
                                             Array& d_log_var) {
  for (std::size_t i = 0; i < p.dim(); ++i) {
    d_mean.v[i] += d_sample.v[i];
    d_log_var.v[i] +=
        d_sample.v[i] * 0.5 * std::exp(0.5 * p.log_variance.v[i]) * noise.v[i];
  }
}

// KL(N(mean, exp(log_var)) || N(0, I)) = 0.5 * sum(mean^2 + e^lv - 1 - lv)
inline double gaussian_kl_to_standard(const GaussianParams& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double m = p.mean.v[i], lv = p.log_variance.v[i];
    s += m * m + std::exp(lv) - 1.0 - lv;
  }
  return 0.5 * s;
}

// d(KL)/d_mean = mean, d(KL)/d_log_var = 0.5*(e^lv - 1); scaled by weight.
inline void gaussian_kl_backward(const GaussianParams& p, double weight, Array& d_mean,
                                 Array& d_log_var) {
  for (std::size_t i = 0; i < p.dim(); ++i) {
    d_mean.v[i] += weight * p.mean.v[i];
    d_log_var.v[i] += weight * 0.5 * (std::exp(p.log_variance.v[i]) - 1.0);
  }
}

}  // namespace relvm
