#pragma once

#include <cmath>
#include <cstdint>

#include "relvm/errors.hpp"
#include "relvm/params.hpp"

namespace relvm {

// Adam with bias correction. Moments mirror the parameter map; `step`
// increments by exactly one per update.
struct AdamState {
  std::uint64_t step = 0;
  ParamMap first_moment;
  ParamMap second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  AdamState() = default;
  AdamState(const ParamMap& params, double lr)
      : first_moment(params.zeros_like()), second_moment(params.zeros_like()),
        learning_rate(lr) {}
};

// Descent step on `grads` (gradients of the loss being minimised).
inline void adam_update(ParamMap& params, const ParamMap& grads, AdamState& state) {
  require_input(params.items.size() == grads.items.size(),
                "adam_update: gradient map does not match parameters");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    const auto& name = params.items[i].first;
    Array& p = params.items[i].second;
    const Array& g = grads.items[i].second;
    require_input(same_shape(p, g), "adam_update: shape mismatch for " + name);
    Array& m = state.first_moment.items[i].second;
    Array& v = state.second_moment.items[i].second;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.v[k];
      if (!std::isfinite(gk))
        throw TrainingDivergence("adam_update: non-finite gradient in " + name);
      m.v[k] = state.beta1 * m.v[k] + (1.0 - state.beta1) * gk;
      v.v[k] = state.beta2 * v.v[k] + (1.0 - state.beta2) * gk * gk;
      const double mhat = m.v[k] / bc1;
      const double vhat = v.v[k] / bc2;
      p.v[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace relvm
