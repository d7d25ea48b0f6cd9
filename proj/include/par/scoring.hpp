#pragma once

// Per-slot scoring: the shared dense feature network, the multi-gate
// mixture-of-experts with list-specific gates and towers, and the final
// sort-by-score reranking.

#include <span>
#include <string>
#include <vector>

#include "par/nn.hpp"
#include "par/tensor.hpp"

namespace par {

struct MlpLayer {
  Tensor weight;  // [in x out] or [G x in x out]
  Tensor bias;    // [out]      or [G x 1 x out]
};

/// Stack of affine layers with ReLU between them (and after the last one when
/// relu_last is set). Grouped layers apply G independent networks to a [G x N x in] input.
struct Mlp {
  std::vector<MlpLayer> layers;
  bool relu_last = false;

  Tensor forward(const Tensor& x) const;
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().weight.dim(-1); }
};

/// Registers an MLP `in -> sizes[0] -> ... -> sizes.back()` under `prefix`.
/// groups > 0 stacks that many independent copies on a leading axis.
Mlp make_mlp(ParameterStore& store, const std::string& prefix, std::size_t in, const std::vector<std::size_t>& sizes,
             bool relu_last, Rng& rng, std::size_t groups = 0);

/// Restricts a grouped MLP to group `g` (shapes keep a leading axis of 1).
Mlp select_group(const Mlp& mlp, std::size_t g);

/// Shared per-item MLP with ReLU activations.
Tensor dense_network(const Tensor& items, const Mlp& net);

struct MMoEParams {
  Mlp experts;       // grouped over E, last layer linear
  Tensor gate_weight;  // [n x d_z x E]
  Tensor gate_bias;    // [n x 1 x E]
  Mlp towers;        // grouped over n, ending in one logit
};

struct MMoEOutput {
  Tensor scores;  // [n x N], in (0, 1)
  Tensor gates;   // [n x N x E]
};

/// `z` is [n x N x d_z]: row k of list i is the joined feature of one slot of list i.
MMoEOutput mmoe_forward(const Tensor& z, const MMoEParams& params);

/// Single slot of list `list`: z = [page || dense || influence] (any part may be
/// undefined). Returns the scalar score.
Tensor mmoe_score(const Tensor& page, const Tensor& dense, const Tensor& influence, const MMoEParams& params,
                  std::size_t list);

/// Ablation replacement: one shared MLP ending in a sigmoid. z is [N x d_z], output [N].
Tensor single_tower_forward(const Tensor& z, const Mlp& net);

/// Per-list display order after reranking: result[i][k] is the original slot
/// shown at position k of list i. Real slots are sorted by score descending
/// (ties keep original order); padding slots stay at the tail.
std::vector<std::vector<std::size_t>> rerank(std::span<const double> scores, std::span<const double> mask,
                                             std::size_t n, std::size_t m);

}  // namespace par
