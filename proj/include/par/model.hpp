#pragma once

#include <string>
#include <vector>

#include "par/embedding.hpp"
#include "par/hds_attn.hpp"
#include "par/layout.hpp"
#include "par/nn.hpp"
#include "par/scoring.hpp"
#include "par/ss_attn.hpp"

namespace par {

/// Component switches for the ablation variants.
struct Ablation {
  bool dsa = false;   // dual-side attention -> candidate self-attention
  bool hdsa = false;  // drop the whole hierarchical attention block (no S)
  bool scale = false; // spatial-scaled attention -> plain self-attention
  bool ssa = false;   // drop the slot attention block (no o)
  bool dn = false;    // drop the dense network (no r)
  bool mmoe = false;  // MMoE -> one shared MLP

  bool any() const { return dsa || hdsa || scale || ssa || dn || mmoe; }
  /// "PAR" or "PAR-<FLAG>[+<FLAG>...]".
  std::string tag() const;
  /// Parses a comma list of flag names ("dsa,scale"); "" / "none" give no flags.
  static Ablation parse(const std::string& text);
  /// The single-flag variant named `name` (dsa, hdsa, scale, ssa, dn, mmoe).
  static Ablation variant(const std::string& name);
  friend bool operator==(const Ablation&, const Ablation&) = default;
};

inline const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names{"dsa", "hdsa", "scale", "ssa", "dn", "mmoe"};
  return names;
}

struct ModelConfig {
  std::size_t n = 4;
  std::size_t m = 10;
  std::size_t t = 10;
  std::size_t item_vocab = 0;  // including padding id 0
  std::size_t cat_vocab = 0;   // 0 disables the category table
  std::size_t d_x = 16;
  std::size_t d_h = 16;
  std::size_t heads = 2;
  std::size_t d_a = 16;
  std::size_t d_o = 32;
  double sigma = 0.1;
  std::vector<std::size_t> dense_hidden{32};
  std::size_t d_r = 16;
  std::size_t experts = 4;
  std::vector<std::size_t> expert_hidden{200, 80};
  std::vector<std::size_t> tower_hidden{80};
  Ablation ablation;
  double embedding_init = 0.05;
};

/// Everything one forward pass produces, kept for tests and inspection.
struct ForwardResult {
  Tensor scores;       // [B x n x m]
  Tensor page;         // S, [B x d_l] (undefined without HDS-Attn)
  Tensor influence;    // o, [B x nm x d_o] (undefined without SS-Attn)
  Tensor dense;        // r, [n x B*m x d_r] (undefined without the dense net)
  Tensor slot_attention;
  Tensor gates;
};

class ParModel {
 public:
  ParModel(ModelConfig config, const PageLayout& layout, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ParameterStore& parameters() const { return params_; }
  ParameterStore& parameters() { return params_; }
  const DistanceMatrix& distances() const { return distances_; }
  std::size_t feature_dim() const { return d_z_; }

  ForwardResult forward(const PageBatch& batch) const;
  Tensor scores(const PageBatch& batch) const { return forward(batch).scores; }
  /// Masked mean BCE against batch.labels.
  Tensor loss(const PageBatch& batch) const;

 private:
  ModelConfig config_;
  DistanceMatrix distances_;
  ParameterStore params_;
  EmbeddingTable items_;
  EmbeddingTable history_items_;  // same tensor as items_ when d_x == d_h
  EmbeddingTable cats_;
  EmbeddingTable history_cats_;
  DualSideParams dual_;
  AggregationParams agg_;
  SSAttnParams ss_;
  Mlp dense_;
  MMoEParams mmoe_;
  Mlp single_tower_;
  std::size_t d_z_ = 0;
};

}  // namespace par
