#include <doctest.h>

#include "par/embedding.hpp"
#include "par/errors.hpp"
#include "support.hpp"

using namespace par;
using par::test::to_vec;

namespace {

PageBatch one_page(std::vector<std::int64_t> items, std::vector<std::int64_t> history) {
  PageBatch b;
  b.batch = 1;
  b.n = 1;
  b.m = items.size();
  b.t = history.size();
  for (auto id : items) {
    b.labels.push_back(0.0);
    b.mask.push_back(id == 0 ? 0.0 : 1.0);
  }
  for (auto id : history) b.history_mask.push_back(id == 0 ? 0.0 : 1.0);
  b.items = std::move(items);
  b.history = std::move(history);
  return b;
}

}  // namespace

TEST_CASE("lookup is exact row selection and padding is zero") {
  Rng rng(5);
  const EmbeddingTable table(make_embedding_weight(6, 4, rng));
  const auto w = to_vec(table.weight());
  for (std::size_t k = 0; k < 4; ++k) CHECK(w[k] == 0.0);
  const std::vector<std::int64_t> ids{3, 0, 3, 5};
  const auto e = to_vec(table.lookup(ids));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(e[k] == w[3 * 4 + k]);
    CHECK(e[4 + k] == 0.0);
    CHECK(e[8 + k] == e[k]);
    CHECK(e[12 + k] == w[5 * 4 + k]);
  }
  for (std::size_t k = 4; k < w.size(); ++k) {
    CHECK(w[k] >= -0.05);
    CHECK(w[k] <= 0.05);
  }
}

TEST_CASE("out-of-range id is a data error naming the id") {
  Rng rng(1);
  const EmbeddingTable table(make_embedding_weight(4, 2, rng));
  const std::vector<std::int64_t> ids{1, 9};
  try {
    table.lookup(ids);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("9") != std::string::npos);
  }
}

TEST_CASE("repeated ids sum their upstream gradients and padding gets none") {
  const Tensor w = par::test::random_tensor({4, 3}, 2);
  const EmbeddingTable table(w);
  const std::vector<std::int64_t> ids{2, 0, 2};
  const Tensor up = par::test::random_tensor({3, 3}, 3, -1, 1, false);
  sum(mul(table.lookup(ids), up)).backward();
  const auto g = w.grad();
  const auto u = up.values();
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(g[k] == 0.0);
    CHECK(g[2 * 3 + k] == doctest::Approx(u[k] + u[6 + k]).epsilon(1e-15));
    CHECK(g[1 * 3 + k] == 0.0);
  }
  const auto r = finite_diff_check([&] { return sum(mul(table.lookup(ids), up)); }, {w});
  CHECK(r.passed);
}

TEST_CASE("page and history embeddings have batch layout and add categories") {
  Rng rng(7);
  const EmbeddingTable items(make_embedding_weight(5, 3, rng));
  const EmbeddingTable cats(make_embedding_weight(3, 3, rng));
  PageBatch b = one_page({1, 4, 0}, {2, 0});
  b.item_cats = {1, 2, 0};
  b.history_cats = {2, 0};
  b.validate();
  const Tensor page = embed_page(b, items, &cats);
  CHECK(page.shape() == Shape{1, 1, 3, 3});
  const Tensor hist = embed_history(b, items, &cats);
  CHECK(hist.shape() == Shape{1, 2, 3});
  const auto pv = to_vec(page), iv = to_vec(items.weight()), cv = to_vec(cats.weight());
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(pv[k] == iv[3 + k] + cv[3 + k]);
    CHECK(pv[6 + k] == 0.0);
  }
}

TEST_CASE("batch validation enforces padding invariants") {
  PageBatch b = one_page({1, 2}, {1});
  b.validate();
  b.labels[1] = 1.0;
  b.mask[1] = 0.0;
  CHECK_THROWS_AS(b.validate(), DataError);
  PageBatch c = one_page({1, 2}, {1});
  c.items[0] = 0;
  CHECK_THROWS_AS(c.validate(), DataError);
}
