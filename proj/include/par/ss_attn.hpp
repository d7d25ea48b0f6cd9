#pragma once

// Spatial-scaled multi-head attention over all n*m slots of a page.
//
// Each head damps its (softplus-guarded) attention logits by a learnable
// monotone function of the Manhattan distance between slots, so that nearby
// items influence each other more than distant ones.

#include <vector>

#include "par/layout.hpp"
#include "par/tensor.hpp"

namespace par {

struct SSAttnParams {
  Tensor query;      // [H x d_x x d_a]
  Tensor key;        // [H x d_x x d_a]
  Tensor value;      // [H x d_x x d_a]
  Tensor steepness;  // [H], one v per head
  Tensor output;     // [H*d_a x d_o]
  double sigma = 0.1;
};

enum class SSAttnMode {
  spatial,  // softplus(QK^T) * f(D | v)
  plain,    // QK^T only (ablation: ordinary self-attention)
};

struct SSAttnOutput {
  Tensor out;        // [B x nm x d_o], zero rows on padding slots
  Tensor attention;  // [H x B x nm x nm]
  Tensor factors;    // [H x nm*nm] distance factors, undefined in plain mode
};

/// `slots` is [B x nm x d_x]; `slot_mask` has B*nm entries (1 = real slot).
SSAttnOutput spatial_scaled_attention(const Tensor& slots, const DistanceMatrix& distances,
                                      const SSAttnParams& params, const std::vector<double>& slot_mask,
                                      SSAttnMode mode = SSAttnMode::spatial);

}  // namespace par
