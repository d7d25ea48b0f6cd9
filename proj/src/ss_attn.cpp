#include "par/ss_attn.hpp"

#include <cmath>

#include "par/errors.hpp"
#include "par/nn.hpp"
#include "par/ops.hpp"

namespace par {

SSAttnOutput spatial_scaled_attention(const Tensor& slots, const DistanceMatrix& distances,
                                      const SSAttnParams& params, const std::vector<double>& slot_mask,
                                      SSAttnMode mode) {
  if (slots.rank() != 3) throw DimensionError("spatial_scaled_attention expects [B,nm,d_x], got " + shape_str(slots.shape()));
  const std::size_t batch = slots.dim(0), nm = slots.dim(1), d_x = slots.dim(2);
  if (distances.size() != nm) {
    throw ContractError("distance matrix is " + std::to_string(distances.size()) + "x" +
                        std::to_string(distances.size()) + " but the page has " + std::to_string(nm) + " slots");
  }
  if (slot_mask.size() != batch * nm) throw DimensionError("slot mask has wrong size");
  const std::size_t heads = params.query.dim(0), d_a = params.query.dim(2);

  Tensor x = broadcast_to(reshape(slots, {1, batch * nm, d_x}), {heads, batch * nm, d_x});
  Tensor q = reshape(matmul(x, params.query), {heads * batch, nm, d_a});
  Tensor k = reshape(matmul(x, params.key), {heads * batch, nm, d_a});
  Tensor v = reshape(matmul(x, params.value), {heads * batch, nm, d_a});

  Tensor logits = reshape(matmul(q, k, false, true), {heads, batch, nm, nm});
  SSAttnOutput result;
  if (mode == SSAttnMode::spatial) {
    result.factors = learnable_sigmoid(params.steepness, distances.as_doubles(), params.sigma);
    logits = mul(softplus(logits), reshape(result.factors, {heads, 1, nm, nm}));
  }
  logits = scale(logits, 1.0 / std::sqrt(static_cast<double>(d_a)));
  logits = add(logits, Tensor::from({batch, 1, nm}, mask_bias(slot_mask)));
  result.attention = softmax(logits);

  Tensor heads_out = matmul(reshape(result.attention, {heads * batch, nm, nm}), v);  // [H*B x nm x d_a]
  Tensor merged = reshape(permute(reshape(heads_out, {heads, batch * nm, d_a}), {1, 0, 2}), {batch * nm, heads * d_a});
  Tensor projected = matmul(merged, params.output);
  projected = mul(projected, Tensor::from({batch * nm, 1}, slot_mask));
  result.out = reshape(projected, {batch, nm, projected.dim(-1)});
  return result;
}

}  // namespace par
