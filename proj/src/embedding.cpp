#include "par/embedding.hpp"

#include "par/errors.hpp"
#include "par/ops.hpp"

namespace par {

void PageBatch::validate() const {
  const std::size_t slots = batch * n * m;
  auto fail = [](const std::string& what) { throw DataError("page batch: " + what); };
  if (items.size() != slots || labels.size() != slots || mask.size() != slots) fail("slot arrays do not match batch*n*m");
  if (!item_cats.empty() && item_cats.size() != slots) fail("item category array has wrong size");
  if (history.size() != batch * t || history_mask.size() != batch * t) fail("history arrays do not match batch*t");
  if (!history_cats.empty() && history_cats.size() != batch * t) fail("history category array has wrong size");
  for (std::size_t k = 0; k < slots; ++k) {
    if (mask[k] == 0.0 && (items[k] != 0 || labels[k] != 0.0)) fail("padding slot with nonzero id or label");
    if (mask[k] != 0.0 && items[k] == 0) fail("real slot with padding id 0");
  }
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (history_mask[k] == 0.0 && history[k] != 0) fail("padding history entry with nonzero id");
  }
}

EmbeddingTable::EmbeddingTable(Tensor weight) : weight_(std::move(weight)) {
  if (weight_.rank() != 2) throw DimensionError("embedding table must be rank 2, got " + shape_str(weight_.shape()));
}

Tensor EmbeddingTable::lookup(std::span<const std::int64_t> ids) const { return gather_rows(weight_, ids); }

Tensor make_embedding_weight(std::size_t vocab, std::size_t dim, Rng& rng, double bound) {
  std::vector<double> w(vocab * dim, 0.0);
  for (std::size_t k = dim; k < w.size(); ++k) w[k] = uniform(rng, -bound, bound);
  return Tensor::from({vocab, dim}, std::move(w), true);
}

namespace {

Tensor embed(std::span<const std::int64_t> ids, std::span<const std::int64_t> cat_ids, const EmbeddingTable& items,
             const EmbeddingTable* cats) {
  Tensor e = items.lookup(ids);
  if (cats != nullptr && !cat_ids.empty()) {
    if (cats->dim() != items.dim()) throw DimensionError("category table width differs from item table width");
    e = add(e, cats->lookup(cat_ids));
  }
  return e;
}

}  // namespace

Tensor embed_page(const PageBatch& batch, const EmbeddingTable& items, const EmbeddingTable* cats) {
  Tensor e = embed(batch.items, batch.item_cats, items, cats);
  return reshape(e, {batch.batch, batch.n, batch.m, items.dim()});
}

Tensor embed_history(const PageBatch& batch, const EmbeddingTable& items, const EmbeddingTable* cats) {
  Tensor e = embed(batch.history, batch.history_cats, items, cats);
  return reshape(e, {batch.batch, batch.t, items.dim()});
}

}  // namespace par
