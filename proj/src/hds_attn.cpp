#include "par/hds_attn.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

#include "par/errors.hpp"
#include "par/ops.hpp"

namespace par {
namespace {

std::once_flag g_empty_history_warning;

// History key bias [G x 1 x t]. A page whose whole history is padding puts all
// of its attention on position 0 instead of spreading over masked keys.
Tensor history_key_bias(const std::vector<double>& hist_mask, std::size_t batch, std::size_t n, std::size_t t) {
  std::vector<double> page_bias(batch * t);
  for (std::size_t b = 0; b < batch; ++b) {
    bool any = false;
    for (std::size_t s = 0; s < t; ++s) any = any || hist_mask[b * t + s] != 0.0;
    for (std::size_t s = 0; s < t; ++s) {
      const bool keep = any ? hist_mask[b * t + s] != 0.0 : s == 0;
      page_bias[b * t + s] = keep ? 0.0 : kMaskedLogit;
    }
    if (!any) {
      std::call_once(g_empty_history_warning, [] {
        std::clog << "par: page with empty history; history attention pinned to position 0\n";
      });
    }
  }
  std::vector<double> bias;
  bias.reserve(n * batch * t);
  for (std::size_t i = 0; i < n; ++i) bias.insert(bias.end(), page_bias.begin(), page_bias.end());
  return Tensor::from({n * batch, 1, t}, std::move(bias));
}

}  // namespace

Tensor candidate_key_bias(const std::vector<double>& cand_mask, std::size_t batch, std::size_t n, std::size_t m) {
  if (cand_mask.size() != batch * n * m) throw DimensionError("candidate mask has wrong size");
  std::vector<double> bias(n * batch * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < m; ++j)
        bias[(i * batch + b) * m + j] = cand_mask[(b * n + i) * m + j] != 0.0 ? 0.0 : kMaskedLogit;
  return Tensor::from({n * batch, 1, m}, std::move(bias));
}

DualSideOutput dual_side_attention(const Tensor& cand, const Tensor& hist, const DualSideParams& params,
                                   const HdsMasks& masks) {
  if (cand.rank() != 4 || hist.rank() != 3) {
    throw DimensionError("dual_side_attention expects [n,B,m,d_x] and [B,t,d_h], got " + shape_str(cand.shape()) +
                         " and " + shape_str(hist.shape()));
  }
  const std::size_t n = cand.dim(0), batch = cand.dim(1), m = cand.dim(2), d_x = cand.dim(3);
  const std::size_t t = hist.dim(1), d_h = hist.dim(2);
  if (hist.dim(0) != batch) throw DimensionError("history batch differs from candidate batch");
  const std::size_t groups = n * batch;

  Tensor x_lists = reshape(cand, {n, batch * m, d_x});
  Tensor x_groups = reshape(cand, {groups, m, d_x});
  Tensor h_lists = broadcast_to(reshape(hist, {1, batch * t, d_h}), {n, batch * t, d_h});
  Tensor h_groups = reshape(h_lists, {groups, t, d_h});

  Tensor xw = reshape(matmul(x_lists, params.cand_proj), {groups, m, m});  // X W_x
  Tensor hw = reshape(matmul(h_lists, params.hist_proj), {groups, t, m});  // H W_h
  Tensor ha = reshape(matmul(h_lists, params.affinity), {groups, t, d_x});
  Tensor affinity = tanh(matmul(ha, x_groups, false, true));              // C, [G x t x m]

  Tensor cand_logits = tanh(add(xw, matmul(hw, affinity, true, false)));  // [G x m x m]
  Tensor cand_attn = softmax(add(cand_logits, candidate_key_bias(masks.cand, batch, n, m)));

  Tensor hist_pre = tanh(add(hw, matmul(affinity, xw)));                  // [G x t x m]
  Tensor hist_attn = softmax(add(transpose(hist_pre), history_key_bias(masks.hist, batch, n, t)));

  return {matmul(cand_attn, x_groups), matmul(hist_attn, h_groups), cand_attn, hist_attn};
}

DualSideOutput candidate_self_attention(const Tensor& cand, std::size_t d_h, const HdsMasks& masks) {
  const std::size_t n = cand.dim(0), batch = cand.dim(1), m = cand.dim(2), d_x = cand.dim(3);
  const std::size_t groups = n * batch;
  Tensor x_groups = reshape(cand, {groups, m, d_x});
  Tensor logits = scale(matmul(x_groups, x_groups, false, true), 1.0 / std::sqrt(static_cast<double>(d_x)));
  Tensor attn = softmax(add(logits, candidate_key_bias(masks.cand, batch, n, m)));
  return {matmul(attn, x_groups), Tensor::zeros({groups, m, d_h}), attn, Tensor{}};
}

ItemAggregation item_level_aggregation(const Tensor& cand, const Tensor& hist, const AggregationParams& params,
                                       const HdsMasks& masks, std::size_t n, std::size_t batch) {
  const std::size_t groups = cand.dim(0), m = cand.dim(1);
  if (groups != n * batch) throw DimensionError("item aggregation: group count is not n*B");
  Tensor joined = concat({cand, hist}, -1);  // [G x m x d_l]
  const std::size_t d_l = joined.dim(-1);
  Tensor u = tanh(affine(joined, params.item_weight, params.item_bias));
  Tensor scores = reshape(matmul(u, params.item_query), {groups, m});
  Tensor bias = reshape(candidate_key_bias(masks.cand, batch, n, m), {groups, m});
  Tensor alpha = softmax(add(scores, bias));
  Tensor pooled = matmul(reshape(alpha, {groups, 1, m}), joined);  // [G x 1 x d_l]
  Tensor lists = permute(reshape(pooled, {n, batch, d_l}), {1, 0, 2});
  return {lists, alpha};
}

Tensor list_level_self_attention(const Tensor& lists) {
  const double d_l = static_cast<double>(lists.dim(-1));
  Tensor logits = scale(matmul(lists, lists, false, true), 1.0 / std::sqrt(d_l));
  return matmul(softmax(logits), lists);
}

ListAggregation list_level_aggregation(const Tensor& lists, const AggregationParams& params) {
  const std::size_t batch = lists.dim(0), n = lists.dim(1), d_l = lists.dim(2);
  Tensor v = tanh(affine(lists, params.list_weight, params.list_bias));
  Tensor beta = softmax(reshape(matmul(v, params.list_query), {batch, n}));
  Tensor page = reshape(matmul(reshape(beta, {batch, 1, n}), lists), {batch, d_l});
  return {page, beta};
}

HdsOutput hds_attention(const Tensor& cand, const Tensor& hist, const DualSideParams& dual,
                        const AggregationParams& agg, const HdsMasks& masks, bool self_attention_only) {
  const std::size_t n = cand.dim(0), batch = cand.dim(1);
  HdsOutput out;
  out.dual = self_attention_only ? candidate_self_attention(cand, hist.dim(-1), masks)
                                 : dual_side_attention(cand, hist, dual, masks);
  out.items = item_level_aggregation(out.dual.cand, out.dual.hist, agg, masks, n, batch);
  out.lists_attended = list_level_self_attention(out.items.lists);
  out.pages = list_level_aggregation(out.lists_attended, agg);
  out.page = out.pages.page;
  return out;
}

}  // namespace par
