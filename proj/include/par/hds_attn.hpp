#pragma once

// Hierarchical dual-side attention.
//
// Per list: candidate <-> history co-attention, then attention pooling of the
// interacted items into a list vector. Across lists: scaled dot-product
// self-attention, then attention pooling into one page vector S shared by
// every slot on the page.
//
// Tensors are batched "list-major": G = n * B groups, group g = i * B + b holds
// list i of page b.

#include <vector>

#include "par/nn.hpp"
#include "par/tensor.hpp"

namespace par {

/// Per-list weights, stacked over lists on the leading axis.
struct DualSideParams {
  Tensor affinity;   // [n x d_h x d_x]
  Tensor cand_proj;  // [n x d_x x m]
  Tensor hist_proj;  // [n x d_h x m]
};

/// Shared pooling weights; d_l = d_x + d_h.
struct AggregationParams {
  Tensor item_weight;  // [d_l x d_l]
  Tensor item_bias;    // [d_l]
  Tensor item_query;   // [d_l x 1]
  Tensor list_weight;  // [d_l x d_l]
  Tensor list_bias;    // [d_l]
  Tensor list_query;   // [d_l x 1]
};

struct DualSideOutput {
  Tensor cand;       // [G x m x d_x]
  Tensor hist;       // [G x m x d_h]
  Tensor cand_attn;  // [G x m x m]
  Tensor hist_attn;  // [G x m x t], undefined in self-attention mode
};

/// Masks for a batch in page-major order: cand_mask [B*n*m], hist_mask [B*t].
struct HdsMasks {
  std::vector<double> cand;
  std::vector<double> hist;
};

/// `cand` is [n x B x m x d_x] (list-major), `hist` is [B x t x d_h].
DualSideOutput dual_side_attention(const Tensor& cand, const Tensor& hist, const DualSideParams& params,
                                   const HdsMasks& masks);

/// Candidate-only self-attention replacement (history ignored, hist output is
/// zeros of width d_h so downstream shapes are unchanged).
DualSideOutput candidate_self_attention(const Tensor& cand, std::size_t d_h, const HdsMasks& masks);

struct ItemAggregation {
  Tensor lists;  // [B x n x d_l]
  Tensor alpha;  // [G x m]
};

ItemAggregation item_level_aggregation(const Tensor& cand, const Tensor& hist, const AggregationParams& params,
                                       const HdsMasks& masks, std::size_t n, std::size_t batch);

/// softmax(L L^T / sqrt(d_l)) L over [B x n x d_l].
Tensor list_level_self_attention(const Tensor& lists);

struct ListAggregation {
  Tensor page;  // [B x d_l]
  Tensor beta;  // [B x n]
};

ListAggregation list_level_aggregation(const Tensor& lists, const AggregationParams& params);

struct HdsOutput {
  Tensor page;  // S, [B x d_l]
  DualSideOutput dual;
  ItemAggregation items;
  Tensor lists_attended;  // [B x n x d_l]
  ListAggregation pages;
};

/// Full module. `self_attention_only` selects the candidate-only variant.
HdsOutput hds_attention(const Tensor& cand, const Tensor& hist, const DualSideParams& dual,
                        const AggregationParams& agg, const HdsMasks& masks, bool self_attention_only);

/// Key-mask bias for candidates in list-major group order, shape [G x 1 x m].
Tensor candidate_key_bias(const std::vector<double>& cand_mask, std::size_t batch, std::size_t n, std::size_t m);

}  // namespace par
