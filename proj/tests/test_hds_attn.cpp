#include <doctest.h>

#include <cmath>

#include "par/hds_attn.hpp"
#include "support.hpp"

using namespace par;
using par::test::random_tensor;
using par::test::to_vec;

namespace {

DualSideParams dual_params(std::size_t n, std::size_t d_x, std::size_t d_h, std::size_t m, std::uint64_t seed) {
  return {random_tensor({n, d_h, d_x}, seed), random_tensor({n, d_x, m}, seed + 1),
          random_tensor({n, d_h, m}, seed + 2)};
}

AggregationParams agg_params(std::size_t d_l, std::uint64_t seed) {
  return {random_tensor({d_l, d_l}, seed),     random_tensor({d_l}, seed + 1), random_tensor({d_l, 1}, seed + 2),
          random_tensor({d_l, d_l}, seed + 3), random_tensor({d_l}, seed + 4), random_tensor({d_l, 1}, seed + 5)};
}

void check_rows_sum_to_one(const Tensor& t) {
  const std::size_t cols = t.dim(-1);
  const auto v = to_vec(t);
  for (std::size_t r = 0; r < v.size() / cols; ++r) {
    double total = 0.0;
    for (std::size_t k = 0; k < cols; ++k) total += v[r * cols + k];
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

void require_pass(const GradCheckReport& r) {
  for (const auto& e : r.entries) INFO(e.name << " " << e.max_rel_error << " a " << e.analytic << " n " << e.numeric);
  CHECK(r.passed);
}

}  // namespace

TEST_CASE("dual-side attention shapes and normalisation") {
  // one list of 2 candidates, 3 history items, width 4
  const Tensor cand = random_tensor({1, 1, 2, 4}, 1);
  const Tensor hist = random_tensor({1, 3, 4}, 2);
  const auto p = dual_params(1, 4, 4, 2, 10);
  const HdsMasks masks{{1, 1}, {1, 1, 1}};
  const auto out = dual_side_attention(cand, hist, p, masks);
  CHECK(out.cand.shape() == Shape{1, 2, 4});
  CHECK(out.hist.shape() == Shape{1, 2, 4});
  check_rows_sum_to_one(out.cand_attn);
  check_rows_sum_to_one(out.hist_attn);
  require_pass(par::test::check([&] { return concat({dual_side_attention(cand, hist, p, masks).cand,
                                                     dual_side_attention(cand, hist, p, masks).hist}, -1); },
                                {cand, hist, p.affinity, p.cand_proj, p.hist_proj}));
}

TEST_CASE("one candidate attends only to itself") {
  const Tensor cand = random_tensor({2, 3, 1, 4}, 3, -1, 1, false);
  const Tensor hist = random_tensor({3, 2, 4}, 4, -1, 1, false);
  const auto p = dual_params(2, 4, 4, 1, 20);
  const auto out = dual_side_attention(cand, hist, p, {std::vector<double>(6, 1.0), std::vector<double>(6, 1.0)});
  for (double a : to_vec(out.cand_attn)) CHECK(a == 1.0);
  CHECK(to_vec(out.cand) == to_vec(cand));
}

TEST_CASE("masked keys get no attention and empty history pins position 0") {
  const Tensor cand = random_tensor({1, 2, 3, 2}, 5, -1, 1, false);
  const Tensor hist = random_tensor({2, 3, 2}, 6, -1, 1, false);
  const auto p = dual_params(1, 2, 2, 3, 30);
  // page 0: last candidate padded, history fully masked; page 1: all real
  const HdsMasks masks{{1, 1, 0, 1, 1, 1}, {0, 0, 0, 1, 1, 0}};
  const auto out = dual_side_attention(cand, hist, p, masks);
  const auto ax = to_vec(out.cand_attn), ah = to_vec(out.hist_attn);
  for (std::size_t row = 0; row < 3; ++row) {
    CHECK(ax[row * 3 + 2] < 1e-300);
    CHECK(ah[row * 3 + 0] == 1.0);
  }
  for (std::size_t row = 3; row < 6; ++row) CHECK(ah[row * 3 + 2] < 1e-300);
  check_rows_sum_to_one(out.hist_attn);
}

TEST_CASE("item and list aggregation weights are distributions") {
  const std::size_t n = 3, batch = 2, m = 4, d = 3;
  const Tensor cand = random_tensor({n * batch, m, d}, 7, -1, 1, false);
  const Tensor hist = random_tensor({n * batch, m, d}, 8, -1, 1, false);
  const auto agg = agg_params(2 * d, 40);
  std::vector<double> mask(batch * n * m, 1.0);
  mask[5] = 0.0;
  const HdsMasks masks{mask, {}};
  const auto items = item_level_aggregation(cand, hist, agg, masks, n, batch);
  CHECK(items.lists.shape() == Shape{batch, n, 2 * d});
  check_rows_sum_to_one(items.alpha);
  const auto lists = list_level_aggregation(list_level_self_attention(items.lists), agg);
  CHECK(lists.page.shape() == Shape{batch, 2 * d});
  check_rows_sum_to_one(lists.beta);
}

TEST_CASE("a single list is the page vector") {
  const Tensor lists = random_tensor({2, 1, 4}, 9, -1, 1, false);
  const auto agg = agg_params(4, 50);
  const Tensor attended = list_level_self_attention(lists);
  CHECK(to_vec(attended) == to_vec(lists));
  const auto out = list_level_aggregation(attended, agg);
  const auto page = to_vec(out.page), l = to_vec(lists);
  for (std::size_t k = 0; k < page.size(); ++k) CHECK(std::abs(page[k] - l[k]) <= 1e-12);
}

TEST_CASE("page vector ignores list order") {
  const std::size_t n = 3, d = 4;
  const Tensor lists = random_tensor({1, n, d}, 11, -1, 1, false);
  auto agg = agg_params(d, 60);
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto lv = to_vec(lists);
  std::vector<double> pv;
  for (auto i : perm) pv.insert(pv.end(), lv.begin() + i * d, lv.begin() + (i + 1) * d);
  const Tensor permuted = Tensor::from({1, n, d}, pv);
  for (bool tied : {false, true}) {
    if (tied) agg.list_query = Tensor::zeros({d, 1});
    const auto a = to_vec(list_level_aggregation(list_level_self_attention(lists), agg).page);
    const auto b = to_vec(list_level_aggregation(list_level_self_attention(permuted), agg).page);
    for (std::size_t k = 0; k < d; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-12);
  }
}

TEST_CASE("full module gradients on a tiny page") {
  const std::size_t n = 2, batch = 2, m = 3, t = 2, d = 4;
  const Tensor cand = random_tensor({n, batch, m, d}, 12);
  const Tensor hist = random_tensor({batch, t, d}, 13);
  const auto dual = dual_params(n, d, d, m, 70);
  const auto agg = agg_params(2 * d, 80);
  const HdsMasks masks{{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0}, {1, 1, 1, 0}};
  require_pass(par::test::check([&] { return hds_attention(cand, hist, dual, agg, masks, false).page; },
                                {cand, hist, dual.affinity, dual.cand_proj, dual.hist_proj, agg.item_weight,
                                 agg.item_bias, agg.item_query, agg.list_weight, agg.list_bias, agg.list_query}));
}

TEST_CASE("candidate-only variant keeps output shapes") {
  const std::size_t n = 2, batch = 3, m = 3, t = 2;
  const Tensor cand = random_tensor({n, batch, m, 4}, 14);
  const Tensor hist = random_tensor({batch, t, 5}, 15);
  const auto dual = dual_params(n, 4, 5, m, 90);
  const auto agg = agg_params(9, 100);
  const HdsMasks masks{std::vector<double>(n * batch * m, 1.0), std::vector<double>(batch * t, 1.0)};
  const auto full = hds_attention(cand, hist, dual, agg, masks, false);
  const auto self = hds_attention(cand, hist, dual, agg, masks, true);
  CHECK(self.dual.cand.shape() == full.dual.cand.shape());
  CHECK(self.dual.hist.shape() == full.dual.hist.shape());
  CHECK(self.page.shape() == full.page.shape());
  for (double h : to_vec(self.dual.hist)) CHECK(h == 0.0);
  check_rows_sum_to_one(self.dual.cand_attn);
  require_pass(par::test::check([&] { return hds_attention(cand, hist, dual, agg, masks, true).page; },
                                {cand, agg.item_weight, agg.item_query, agg.list_weight, agg.list_query}));
}
