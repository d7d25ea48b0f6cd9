#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "par/errors.hpp"
#include "par/scoring.hpp"
#include "support.hpp"

using namespace par;
using par::test::random_tensor;
using par::test::to_vec;

namespace {

struct Mmoe {
  ParameterStore store;
  MMoEParams params;
};

Mmoe make_mmoe(std::size_t n, std::size_t d_z, std::size_t experts, std::uint64_t seed) {
  Mmoe m;
  Rng rng(seed);
  m.params.experts = make_mlp(m.store, "expert", d_z, {5, 3}, false, rng, experts);
  m.params.gate_weight = m.store.add("gate.weight", {n, d_z, experts}, Init::glorot, rng);
  m.params.gate_bias = m.store.add("gate.bias", {n, 1, experts}, Init::small_uniform, rng, 0.5);
  m.params.towers = make_mlp(m.store, "tower", 3, {4, 1}, false, rng, n);
  // non-zero biases so every ReLU unit sees a generic input
  for (const auto& e : m.store.entries())
    if (e.name.ends_with("bias")) {
      Tensor t = e.tensor;
      for (auto& v : t.data()) v = uniform(rng, -0.3, 0.3);
    }
  return m;
}

}  // namespace

TEST_CASE("dense network with zero parameters outputs zeros") {
  ParameterStore store;
  Rng rng(1);
  Mlp net = make_mlp(store, "dense", 4, {6, 3}, true, rng);
  for (auto t : store.tensors()) std::fill(t.data().begin(), t.data().end(), 0.0);
  const auto r = to_vec(dense_network(random_tensor({5, 4}, 2, -1, 1, false), net));
  for (double v : r) CHECK(v == 0.0);
}

TEST_CASE("dense network shares weights across slots") {
  ParameterStore store;
  Rng rng(3);
  Mlp net = make_mlp(store, "dense", 3, {4, 2}, true, rng);
  const Tensor x = Tensor::from({3, 3}, {0.1, -0.2, 0.3, 0.5, 0.5, 0.5, 0.1, -0.2, 0.3});
  const auto r = to_vec(dense_network(x, net));
  CHECK(r[0] == r[4]);
  CHECK(r[1] == r[5]);
  for (double v : r) CHECK(v >= 0.0);
}

TEST_CASE("gates are distributions and scores are probabilities") {
  auto m = make_mmoe(3, 6, 4, 5);
  const Tensor z = random_tensor({3, 7, 6}, 6, -3, 3, false);
  const auto out = mmoe_forward(z, m.params);
  CHECK(out.scores.shape() == Shape{3, 7});
  const auto g = to_vec(out.gates);
  for (std::size_t r = 0; r < 21; ++r) {
    double total = 0.0;
    for (std::size_t k = 0; k < 4; ++k) total += g[r * 4 + k];
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
  for (double s : to_vec(out.scores)) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("one expert passes straight through whatever the gate says") {
  auto m = make_mmoe(2, 5, 1, 7);
  const Tensor z = random_tensor({2, 3, 5}, 8, -1, 1, false);
  const auto scores = to_vec(mmoe_forward(z, m.params).scores);
  // tower_i(e_1(z)) computed without the mixture
  const Tensor expert = m.params.experts.forward(reshape(z, {1, 6, 5}));
  const auto want = to_vec(sigmoid(m.params.towers.forward(reshape(expert, {2, 3, 3}))));
  for (std::size_t k = 0; k < 6; ++k) CHECK(scores[k] == doctest::Approx(want[k]).epsilon(1e-14));
}

TEST_CASE("single-slot score agrees with the batched path") {
  auto m = make_mmoe(3, 6, 2, 9);
  const Tensor page = random_tensor({2}, 10, -1, 1, false);
  const Tensor dense = random_tensor({3}, 11, -1, 1, false);
  const Tensor infl = random_tensor({1}, 12, -1, 1, false);
  const Tensor z = reshape(concat({page, dense, infl}, 0), {1, 1, 6});
  for (std::size_t list = 0; list < 3; ++list) {
    const double one = mmoe_score(page, dense, infl, m.params, list).item();
    const auto all = to_vec(mmoe_forward(broadcast_to(z, {3, 1, 6}), m.params).scores);
    CHECK(one == doctest::Approx(all[list]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(mmoe_score(page, dense, infl, m.params, 3), ContractError);
}

TEST_CASE("mixture-of-experts gradients") {
  auto m = make_mmoe(2, 4, 2, 13);
  const Tensor z = random_tensor({2, 3, 4}, 14);
  auto params = m.store.tensors();
  params.push_back(z);
  const auto r = par::test::check([&] { return mmoe_forward(z, m.params).scores; }, params);
  for (const auto& e : r.entries) INFO(e.name << " " << e.max_rel_error);
  CHECK(r.passed);
}

TEST_CASE("binary cross-entropy examples") {
  const std::vector<double> mask(4, 1.0);
  const Tensor half = Tensor::full({4}, 0.5);
  for (const auto& y : {std::vector<double>{0, 0, 0, 0}, std::vector<double>{1, 0, 1, 1}})
    CHECK(std::abs(bce_loss(half, y, mask).item() - std::log(2.0)) <= 1e-12);
  const double exact = bce_loss(Tensor::from({4}, {1, 0, 1, 0}), std::vector<double>{1, 0, 1, 0}, mask).item();
  CHECK(exact >= 0.0);
  CHECK(exact < 1e-11);
  const double quarter = bce_loss(Tensor::from({1}, {0.25}), std::vector<double>{1}, std::vector<double>{1}).item();
  CHECK(quarter == doctest::Approx(1.3862944).epsilon(1e-7));
  CHECK(std::isfinite(bce_loss(Tensor::from({2}, {0.0, 1.0}), std::vector<double>{1, 0}, std::vector<double>{1, 1}).item()));
  // masked slots do not count
  const double masked = bce_loss(Tensor::from({2}, {0.5, 0.01}), std::vector<double>{1, 1}, std::vector<double>{1, 0}).item();
  CHECK(std::abs(masked - std::log(2.0)) <= 1e-12);
}

TEST_CASE("rerank examples") {
  const std::vector<double> one_mask(3, 1.0);
  CHECK(rerank(std::vector<double>{0.9, 0.1, 0.5}, one_mask, 1, 3)[0] == std::vector<std::size_t>{0, 2, 1});
  CHECK(rerank(std::vector<double>{0.3, 0.3, 0.3}, one_mask, 1, 3)[0] == std::vector<std::size_t>{0, 1, 2});
  const auto padded = rerank(std::vector<double>{0.1, 0.9, 0.8, 0.2, 0.7, 0.6}, std::vector<double>{1, 0, 1, 1, 1, 1}, 2, 3);
  CHECK(padded[0] == std::vector<std::size_t>{2, 0, 1});
  CHECK(padded[1] == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("rerank is a bijection and ignores monotone transforms of the scores") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 3, m = 1 + trial % 7;
    std::vector<double> s(n * m), mask(n * m);
    for (std::size_t k = 0; k < s.size(); ++k) {
      s[k] = std::round(u(rng) * 4) / 4;  // ties on purpose
      mask[k] = (k % m == 0 || rng() % 4) ? 1.0 : 0.0;
    }
    std::vector<double> t(s.size());
    std::transform(s.begin(), s.end(), t.begin(), [](double x) { return std::exp(3 * x) + 1; });
    const auto a = rerank(s, mask, n, m);
    CHECK(rerank(t, mask, n, m) == a);
    for (std::size_t i = 0; i < n; ++i) {
      auto sorted = a[i];
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t j = 0; j < m; ++j) CHECK(sorted[j] == j);
      bool seen_pad = false;
      for (std::size_t k = 0; k < m; ++k) {
        const bool real = mask[i * m + a[i][k]] != 0.0;
        if (!real) seen_pad = true;
        CHECK(!(seen_pad && real));
        if (k > 0 && real && mask[i * m + a[i][k - 1]] != 0.0) {
          CHECK(s[i * m + a[i][k - 1]] >= s[i * m + a[i][k]]);
          if (s[i * m + a[i][k - 1]] == s[i * m + a[i][k]]) CHECK(a[i][k - 1] < a[i][k]);
        }
      }
    }
  }
}
