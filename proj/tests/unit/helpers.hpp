#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "relvm/params.hpp"

namespace relvm::testing {

// Central finite differences over every element of every named array.
inline ParamMap finite_diff_grad(const std::function<double(const ParamMap&)>& f,
                                 ParamMap params, double h = 1e-5) {
  ParamMap g = params.zeros_like();
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    Array& a = params.items[i].second;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double orig = a.v[k];
      a.v[k] = orig + h;
      const double fp = f(params);
      a.v[k] = orig - h;
      const double fm = f(params);
      a.v[k] = orig;
      g.items[i].second.v[k] = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

// Relative error with a floor so that near-zero gradients are compared
// absolutely (central differences carry ~1e-10 absolute noise).
inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;
};

inline GradCheckResult compare_grads(const ParamMap& analytic, const ParamMap& fd) {
  GradCheckResult r;
  for (std::size_t i = 0; i < analytic.items.size(); ++i) {
    const Array& a = analytic.items[i].second;
    const Array& b = fd.items[i].second;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double e = rel_err(a.v[k], b.v[k]);
      if (e > r.max_rel_err) {
        r.max_rel_err = e;
        r.worst = analytic.items[i].first + "[" + std::to_string(k) + "]";
      }
    }
  }
  return r;
}

// Numerical quadrature of KL(N(mu, e^lv) || N(0,1)) in one dimension
// (Simpson's rule; independent of the closed form under test).
inline double kl_quadrature_1d(double mu, double log_var, std::size_t n = 40001) {
  const double sigma = std::exp(0.5 * log_var);
  const double lo = std::min(mu - 14.0 * sigma, -14.0);
  const double hi = std::max(mu + 14.0 * sigma, 14.0);
  const double dx = (hi - lo) / static_cast<double>(n - 1);
  auto integrand = [&](double x) {
    const double lq = -0.5 * std::log(2.0 * M_PI) - 0.5 * log_var -
                      0.5 * (x - mu) * (x - mu) / (sigma * sigma);
    const double lp = -0.5 * std::log(2.0 * M_PI) - 0.5 * x * x;
    return std::exp(lq) * (lq - lp);
  };
  double s = integrand(lo) + integrand(hi);
  for (std::size_t i = 1; i + 1 < n; ++i)
    s += integrand(lo + dx * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * dx / 3.0;
}

}  // namespace relvm::testing
