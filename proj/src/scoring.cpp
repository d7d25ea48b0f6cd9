#include "par/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "par/errors.hpp"
#include "par/ops.hpp"

namespace par {

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    h = affine(h, layers[k].weight, layers[k].bias);
    if (k + 1 < layers.size() || relu_last) h = relu(h);
  }
  return h;
}

Mlp make_mlp(ParameterStore& store, const std::string& prefix, std::size_t in, const std::vector<std::size_t>& sizes,
             bool relu_last, Rng& rng, std::size_t groups) {
  Mlp mlp;
  mlp.relu_last = relu_last;
  std::size_t width = in;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const std::string base = prefix + ".l" + std::to_string(k);
    Shape ws = groups ? Shape{groups, width, sizes[k]} : Shape{width, sizes[k]};
    Shape bs = groups ? Shape{groups, 1, sizes[k]} : Shape{sizes[k]};
    MlpLayer layer;
    layer.weight = store.add(base + ".weight", ws, Init::glorot, rng);
    layer.bias = store.add(base + ".bias", bs, Init::zeros, rng);
    mlp.layers.push_back(layer);
    width = sizes[k];
  }
  return mlp;
}

Mlp select_group(const Mlp& mlp, std::size_t g) {
  Mlp out;
  out.relu_last = mlp.relu_last;
  for (const auto& l : mlp.layers) out.layers.push_back({slice(l.weight, 0, g, g + 1), slice(l.bias, 0, g, g + 1)});
  return out;
}

Tensor dense_network(const Tensor& items, const Mlp& net) { return net.forward(items); }

MMoEOutput mmoe_forward(const Tensor& z, const MMoEParams& params) {
  if (z.rank() != 3) throw DimensionError("mmoe_forward expects [n,N,d_z], got " + shape_str(z.shape()));
  const std::size_t n = z.dim(0), rows = z.dim(1), d_z = z.dim(2);
  const std::size_t experts = params.gate_weight.dim(-1);
  if (params.gate_weight.dim(0) != n) throw DimensionError("gate count differs from list count");

  Tensor flat = reshape(z, {1, n * rows, d_z});
  Tensor expert_out = params.experts.forward(broadcast_to(flat, {experts, n * rows, d_z}));  // [E x nN x h]
  const std::size_t h = expert_out.dim(-1);
  Tensor per_slot = permute(expert_out, {1, 0, 2});  // [nN x E x h]

  Tensor gates = softmax(affine(z, params.gate_weight, params.gate_bias));  // [n x N x E]
  Tensor mixed = matmul(reshape(gates, {n * rows, 1, experts}), per_slot);  // [nN x 1 x h]
  Tensor logits = params.towers.forward(reshape(mixed, {n, rows, h}));     // [n x N x 1]
  return {reshape(sigmoid(logits), {n, rows}), gates};
}

Tensor mmoe_score(const Tensor& page, const Tensor& dense, const Tensor& influence, const MMoEParams& params,
                  std::size_t list) {
  const std::size_t n = params.gate_weight.dim(0);
  if (list >= n) {
    throw ContractError("mmoe_score: list index " + std::to_string(list) + " out of range for " + std::to_string(n) +
                        " lists");
  }
  std::vector<Tensor> parts;
  for (const Tensor* p : {&page, &dense, &influence}) {
    if (p->defined()) parts.push_back(reshape(*p, {1, 1, p->numel()}));
  }
  Tensor z = concat(parts, -1);
  MMoEParams one;
  one.experts = params.experts;
  one.gate_weight = slice(params.gate_weight, 0, list, list + 1);
  one.gate_bias = slice(params.gate_bias, 0, list, list + 1);
  one.towers = select_group(params.towers, list);
  return reshape(mmoe_forward(z, one).scores, {});
}

Tensor single_tower_forward(const Tensor& z, const Mlp& net) {
  Tensor logits = net.forward(z);
  return reshape(sigmoid(logits), {z.dim(0)});
}

std::vector<std::vector<std::size_t>> rerank(std::span<const double> scores, std::span<const double> mask,
                                             std::size_t n, std::size_t m) {
  if (scores.size() != n * m || mask.size() != n * m) throw DimensionError("rerank: scores/mask are not n*m");
  std::vector<std::vector<std::size_t>> orders(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> real, pad;
    for (std::size_t j = 0; j < m; ++j) (mask[i * m + j] != 0.0 ? real : pad).push_back(j);
    std::stable_sort(real.begin(), real.end(),
                     [&](std::size_t a, std::size_t b) { return scores[i * m + a] > scores[i * m + b]; });
    real.insert(real.end(), pad.begin(), pad.end());
    orders[i] = std::move(real);
  }
  return orders;
}

}  // namespace par
