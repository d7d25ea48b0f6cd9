#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "par/nn.hpp"
#include "par/tensor.hpp"

namespace par {

/// One minibatch of pages in model layout. Slot (b, i, j) lives at index
/// (b * n + i) * m + j. Padding slots carry id 0, label 0 and mask 0.
struct PageBatch {
  std::size_t batch = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t t = 0;
  std::vector<std::int64_t> items;
  std::vector<std::int64_t> item_cats;     // empty when categories are unused
  std::vector<std::int64_t> history;       // batch * t
  std::vector<std::int64_t> history_cats;  // empty when categories are unused
  std::vector<double> labels;
  std::vector<double> mask;
  std::vector<double> history_mask;

  /// Throws DataError when sizes or padding invariants are violated.
  void validate() const;
};

/// Trainable lookup table; row 0 is the reserved padding row.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(Tensor weight);

  std::size_t vocab_size() const { return weight_.dim(0); }
  std::size_t dim() const { return weight_.dim(1); }
  const Tensor& weight() const { return weight_; }

  /// [ids.size() x dim]; id 0 maps to zeros.
  Tensor lookup(std::span<const std::int64_t> ids) const;

 private:
  Tensor weight_;
};

/// Uniform [-bound, bound] table with a zero padding row.
Tensor make_embedding_weight(std::size_t vocab, std::size_t dim, Rng& rng, double bound = 0.05);

/// Candidate embeddings [batch x n x m x d]; item row plus category row when given.
Tensor embed_page(const PageBatch& batch, const EmbeddingTable& items, const EmbeddingTable* cats = nullptr);

/// History embeddings [batch x t x d].
Tensor embed_history(const PageBatch& batch, const EmbeddingTable& items, const EmbeddingTable* cats = nullptr);

}  // namespace par
