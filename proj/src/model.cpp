#include "par/model.hpp"

#include <sstream>

#include "par/errors.hpp"
#include "par/ops.hpp"

namespace par {

std::string Ablation::tag() const {
  if (!any()) return "PAR";
  std::string out = "PAR";
  const bool flags[] = {dsa, hdsa, scale, ssa, dn, mmoe};
  const char* labels[] = {"DSA", "HDSA", "scale", "SSA", "DN", "MMoE"};
  bool first = true;
  for (std::size_t k = 0; k < 6; ++k) {
    if (!flags[k]) continue;
    out += first ? "-" : "+";
    out += labels[k];
    first = false;
  }
  return out;
}

Ablation Ablation::variant(const std::string& name) {
  Ablation a;
  if (name == "dsa") a.dsa = true;
  else if (name == "hdsa") a.hdsa = true;
  else if (name == "scale") a.scale = true;
  else if (name == "ssa") a.ssa = true;
  else if (name == "dn") a.dn = true;
  else if (name == "mmoe") a.mmoe = true;
  else throw ConfigError("unknown ablation variant '" + name + "'");
  return a;
}

Ablation Ablation::parse(const std::string& text) {
  Ablation out;
  if (text.empty() || text == "none") return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Ablation one = variant(item);
    out.dsa |= one.dsa;
    out.hdsa |= one.hdsa;
    out.scale |= one.scale;
    out.ssa |= one.ssa;
    out.dn |= one.dn;
    out.mmoe |= one.mmoe;
  }
  return out;
}

ParModel::ParModel(ModelConfig config, const PageLayout& layout, std::uint64_t seed)
    : config_(std::move(config)), distances_(manhattan_distance_matrix(layout)) {
  const auto& c = config_;
  const auto& ab = c.ablation;
  if (layout.num_lists() != c.n || layout.max_len() != c.m) {
    throw ConfigError("layout has " + std::to_string(layout.num_lists()) + "x" + std::to_string(layout.max_len()) +
                      " slots but the model expects " + std::to_string(c.n) + "x" + std::to_string(c.m));
  }
  if (c.item_vocab < 2) throw ConfigError("item vocabulary must hold padding plus at least one item");
  if (c.heads == 0 || c.experts == 0) throw ConfigError("heads and experts must be positive");
  if (c.sigma < 0.0) throw ConfigError("sigma must be non-negative");
  Rng rng(seed);

  items_ = EmbeddingTable(params_.add_tensor("embedding.item", make_embedding_weight(c.item_vocab, c.d_x, rng, c.embedding_init)));
  history_items_ = c.d_h == c.d_x ? items_
                                  : EmbeddingTable(params_.add_tensor(
                                        "embedding.history_item", make_embedding_weight(c.item_vocab, c.d_h, rng, c.embedding_init)));
  if (c.cat_vocab > 0) {
    cats_ = EmbeddingTable(params_.add_tensor("embedding.category", make_embedding_weight(c.cat_vocab, c.d_x, rng, c.embedding_init)));
    history_cats_ = c.d_h == c.d_x ? cats_
                                   : EmbeddingTable(params_.add_tensor("embedding.history_category",
                                                                       make_embedding_weight(c.cat_vocab, c.d_h, rng, c.embedding_init)));
  }

  const std::size_t d_l = c.d_x + c.d_h;
  if (!ab.hdsa) {
    if (!ab.dsa) {
      dual_.affinity = params_.add("hds.dual.affinity", {c.n, c.d_h, c.d_x}, Init::glorot, rng);
      dual_.cand_proj = params_.add("hds.dual.cand_proj", {c.n, c.d_x, c.m}, Init::glorot, rng);
      dual_.hist_proj = params_.add("hds.dual.hist_proj", {c.n, c.d_h, c.m}, Init::glorot, rng);
    }
    agg_.item_weight = params_.add("hds.item.weight", {d_l, d_l}, Init::glorot, rng);
    agg_.item_bias = params_.add("hds.item.bias", {d_l}, Init::zeros, rng);
    agg_.item_query = params_.add("hds.item.query", {d_l, 1}, Init::glorot, rng);
    agg_.list_weight = params_.add("hds.list.weight", {d_l, d_l}, Init::glorot, rng);
    agg_.list_bias = params_.add("hds.list.bias", {d_l}, Init::zeros, rng);
    agg_.list_query = params_.add("hds.list.query", {d_l, 1}, Init::glorot, rng);
    d_z_ += d_l;
  }
  if (!ab.dn) {
    auto sizes = c.dense_hidden;
    sizes.push_back(c.d_r);
    dense_ = make_mlp(params_, "dense", c.d_x, sizes, true, rng);
    d_z_ += c.d_r;
  }
  if (!ab.ssa) {
    ss_.query = params_.add("ss.query", {c.heads, c.d_x, c.d_a}, Init::glorot, rng);
    ss_.key = params_.add("ss.key", {c.heads, c.d_x, c.d_a}, Init::glorot, rng);
    ss_.value = params_.add("ss.value", {c.heads, c.d_x, c.d_a}, Init::glorot, rng);
    if (!ab.scale) ss_.steepness = params_.add("ss.steepness", {c.heads}, Init::zeros, rng);
    ss_.output = params_.add("ss.output", {c.heads * c.d_a, c.d_o}, Init::glorot, rng);
    ss_.sigma = c.sigma;
    d_z_ += c.d_o;
  }
  if (d_z_ == 0) throw ConfigError("ablation removed every feature block; nothing left to score");

  if (!ab.mmoe) {
    if (c.expert_hidden.empty()) throw ConfigError("expert_hidden must list at least one layer");
    mmoe_.experts = make_mlp(params_, "mmoe.expert", d_z_, c.expert_hidden, false, rng, c.experts);
    mmoe_.gate_weight = params_.add("mmoe.gate.weight", {c.n, d_z_, c.experts}, Init::glorot, rng);
    mmoe_.gate_bias = params_.add("mmoe.gate.bias", {c.n, 1, c.experts}, Init::zeros, rng);
    auto tower = c.tower_hidden;
    tower.push_back(1);
    mmoe_.towers = make_mlp(params_, "mmoe.tower", c.expert_hidden.back(), tower, false, rng, c.n);
  } else {
    auto sizes = c.expert_hidden;
    sizes.push_back(1);
    single_tower_ = make_mlp(params_, "tower", d_z_, sizes, false, rng);
  }
}

ForwardResult ParModel::forward(const PageBatch& batch) const {
  const auto& c = config_;
  const auto& ab = c.ablation;
  if (batch.n != c.n || batch.m != c.m || batch.t != c.t) {
    throw ConfigError("batch shape n=" + std::to_string(batch.n) + " m=" + std::to_string(batch.m) +
                      " t=" + std::to_string(batch.t) + " does not match the model");
  }
  const std::size_t B = batch.batch, n = c.n, m = c.m;
  const EmbeddingTable* cat_table = c.cat_vocab > 0 ? &cats_ : nullptr;
  const EmbeddingTable* hist_cat_table = c.cat_vocab > 0 ? &history_cats_ : nullptr;

  Tensor cand = embed_page(batch, items_, cat_table);           // [B x n x m x d_x]
  Tensor lists = permute(cand, {1, 0, 2, 3});                    // [n x B x m x d_x]
  ForwardResult out;
  std::vector<Tensor> parts;

  if (!ab.hdsa) {
    Tensor hist = embed_history(batch, history_items_, hist_cat_table);
    HdsMasks masks{batch.mask, batch.history_mask};
    HdsOutput hds = hds_attention(lists, hist, dual_, agg_, masks, ab.dsa);
    out.page = hds.page;
    const std::size_t d_l = hds.page.dim(-1);
    Tensor shared = broadcast_to(reshape(hds.page, {1, B, 1, d_l}), {n, B, m, d_l});
    parts.push_back(reshape(shared, {n, B * m, d_l}));
  }
  if (!ab.dn) {
    Tensor r = dense_network(reshape(lists, {n * B * m, c.d_x}), dense_);
    out.dense = reshape(r, {n, B * m, r.dim(-1)});
    parts.push_back(out.dense);
  }
  if (!ab.ssa) {
    auto mode = ab.scale ? SSAttnMode::plain : SSAttnMode::spatial;
    SSAttnOutput ss = spatial_scaled_attention(reshape(cand, {B, n * m, c.d_x}), distances_, ss_, batch.mask, mode);
    out.influence = ss.out;
    out.slot_attention = ss.attention;
    Tensor o = permute(reshape(ss.out, {B, n, m, c.d_o}), {1, 0, 2, 3});
    parts.push_back(reshape(o, {n, B * m, c.d_o}));
  }

  Tensor z = parts.size() == 1 ? parts[0] : concat(parts, -1);
  Tensor scores;
  if (!ab.mmoe) {
    MMoEOutput mo = mmoe_forward(z, mmoe_);
    scores = mo.scores;
    out.gates = mo.gates;
  } else {
    scores = reshape(single_tower_forward(reshape(z, {n * B * m, d_z_}), single_tower_), {n, B * m});
  }
  out.scores = permute(reshape(scores, {n, B, m}), {1, 0, 2});
  return out;
}

Tensor ParModel::loss(const PageBatch& batch) const {
  return bce_loss(scores(batch), batch.labels, batch.mask);
}

}  // namespace par
