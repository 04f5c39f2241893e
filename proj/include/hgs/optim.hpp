#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace hgs {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.0;
  double epsilon = 1e-8;
};

template <class S>
struct AdamWState {
  std::vector<S> first_moment;
  std::vector<S> second_moment;
  int64_t step = 0;

  void reset(size_t n) {
    first_moment.assign(n, S(0));
    second_moment.assign(n, S(0));
    step = 0;
  }
};

// Decoupled-weight-decay Adam with bias correction. A non-finite gradient
// rejects the whole step (state and params untouched) and returns false.
template <class S>
bool adamw_step(std::span<S> params, std::span<const S> grads, AdamWState<S>& state,
                const AdamWConfig& cfg) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adamw_step: param/grad size mismatch");
  if (state.first_moment.size() != params.size()) state.reset(params.size());

  for (const S g : grads)
    if (!std::isfinite(g)) return false;

  ++state.step;
  const S b1 = S(cfg.beta1), b2 = S(cfg.beta2);
  const S corr1 = S(1) - std::pow(b1, S(state.step));
  const S corr2 = S(1) - std::pow(b2, S(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    S& m = state.first_moment[i];
    S& v = state.second_moment[i];
    m = b1 * m + (S(1) - b1) * grads[i];
    v = b2 * v + (S(1) - b2) * grads[i] * grads[i];
    const S m_hat = m / corr1;
    const S v_hat = v / corr2;
    params[i] -= S(cfg.learning_rate) *
                 (m_hat / (std::sqrt(v_hat) + S(cfg.epsilon)) +
                  S(cfg.weight_decay) * params[i]);
  }
  return true;
}

}  // namespace hgs
