#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "par/tensor.hpp"

namespace par {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 strength, coupled into the gradient (g <- g + l2 * theta).
  double l2 = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::span<const Tensor> params);
};

/// One bias-corrected Adam update of `params` from their grad slots. A param
/// without a grad is treated as having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Explicit-gradient form; grads[i] must match params[i] in size.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamState& state);

}  // namespace par
