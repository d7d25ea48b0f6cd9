#include "par/optim.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "par/errors.hpp"

namespace par {

AdamState::AdamState(AdamConfig cfg, std::span<const Tensor> params) : config(cfg) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const auto& p : params) {
    first_moment.emplace_back(p.numel(), 0.0);
    second_moment.emplace_back(p.numel(), 0.0);
  }
}

namespace {

void update(std::span<Tensor> params, AdamState& state,
            const std::function<std::span<const double>(std::size_t)>& grad_of) {
  if (params.size() != state.first_moment.size() || params.size() != state.second_moment.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) + " params but state holds " +
                        std::to_string(state.first_moment.size()));
  }
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != theta.size() || v.size() != theta.size()) {
      throw ContractError("adam_step: moment size mismatch for parameter " + std::to_string(i));
    }
    const auto g = grad_of(i);
    if (!g.empty() && g.size() != theta.size()) {
      throw ContractError("adam_step: gradient size mismatch for parameter " + std::to_string(i));
    }
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = (g.empty() ? 0.0 : g[k]) + c.l2 * theta[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      theta[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace

void adam_step(std::span<Tensor> params, AdamState& state) {
  update(params, state, [&](std::size_t i) { return params[i].grad(); });
}

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamState& state) {
  if (grads.size() != params.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) + " params but " +
                        std::to_string(grads.size()) + " gradients");
  }
  update(params, state, [&](std::size_t i) { return std::span<const double>(grads[i]); });
}

}  // namespace par
