#include <doctest.h>

#include <cmath>
#include <limits>

#include "par/errors.hpp"
#include "par/optim.hpp"
#include "support.hpp"

using namespace par;
using par::test::check;
using par::test::random_tensor;
using par::test::to_vec;

namespace {

void require_pass(const GradCheckReport& r) {
  for (const auto& e : r.entries) INFO(e.name << " err " << e.max_rel_error << " a " << e.analytic << " n " << e.numeric);
  CHECK(r.passed);
  CHECK(r.max_rel_error <= 1e-4);
}

}  // namespace

TEST_CASE("tensor shape and element count agree") {
  CHECK_THROWS_AS(Tensor::from({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at({1, 2}) == 6.0);
  CHECK(t.dim(-1) == 3);
}

TEST_CASE("matmul small example and backward") {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  const Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8}, true);
  const Tensor c = matmul(a, b);
  CHECK(to_vec(c) == std::vector<double>{19, 22, 43, 50});
  sum(c).backward();
  // dA = 1 * B^T, dB = A^T * 1
  CHECK(std::vector<double>(a.grad().begin(), a.grad().end()) == std::vector<double>{11, 15, 11, 15});
  CHECK(std::vector<double>(b.grad().begin(), b.grad().end()) == std::vector<double>{4, 4, 6, 6});
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({4, 2});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(shape_str({2, 3})) != std::string::npos);
    CHECK(msg.find(shape_str({4, 2})) != std::string::npos);
  }
}

TEST_CASE("matmul is associative on random triples") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor a = random_tensor({3, 5}, s, -1, 1, false);
    const Tensor b = random_tensor({5, 4}, s + 100, -1, 1, false);
    const Tensor c = random_tensor({4, 2}, s + 200, -1, 1, false);
    const auto left = to_vec(matmul(matmul(a, b), c));
    const auto right = to_vec(matmul(a, matmul(b, c)));
    for (std::size_t k = 0; k < left.size(); ++k) CHECK(std::abs(left[k] - right[k]) <= 1e-9);
  }
}

TEST_CASE("finite differences agree for every op") {
  const Tensor a = random_tensor({2, 3, 4}, 1);
  const Tensor b = random_tensor({2, 4, 3}, 2);
  const Tensor c = random_tensor({2, 3, 4}, 3);
  const Tensor row = random_tensor({4}, 4);
  const Tensor pos = random_tensor({2, 3, 4}, 5, 0.5, 2.0);
  const Tensor w = random_tensor({4, 3}, 6);

  SUBCASE("matmul batched") { require_pass(check([&] { return matmul(a, b); }, {a, b})); }
  SUBCASE("matmul transposed") {
    require_pass(check([&] { return matmul(a, c, false, true); }, {a, c}));
    require_pass(check([&] { return matmul(a, c, true, false); }, {a, c}));
  }
  SUBCASE("matmul shared rank-2 operand") { require_pass(check([&] { return matmul(a, w); }, {a, w})); }
  SUBCASE("add sub mul with broadcast") {
    require_pass(check([&] { return add(a, row); }, {a, row}));
    require_pass(check([&] { return sub(row, c); }, {row, c}));
    require_pass(check([&] { return mul(a, c); }, {a, c}));
    require_pass(check([&] { return mul(a, row); }, {a, row}));
  }
  SUBCASE("scale and shift") {
    require_pass(check([&] { return scale(a, -1.7); }, {a}));
    require_pass(check([&] { return add_scalar(a, 0.3); }, {a}));
  }
  SUBCASE("pointwise nonlinearities") {
    require_pass(check([&] { return tanh(a); }, {a}));
    require_pass(check([&] { return sigmoid(a); }, {a}));
    require_pass(check([&] { return softplus(a); }, {a}));
    require_pass(check([&] { return exp(a); }, {a}));
    require_pass(check([&] { return log(pos); }, {pos}));
    require_pass(check([&] { return relu(add_scalar(a, 0.05)); }, {a}));
  }
  SUBCASE("softmax on each axis") {
    require_pass(check([&] { return softmax(a, -1); }, {a}));
    require_pass(check([&] { return softmax(a, 1); }, {a}));
    require_pass(check([&] { return softmax(a, 0); }, {a}));
  }
  SUBCASE("reductions") {
    require_pass(check([&] { return sum(a); }, {a}));
    require_pass(check([&] { return mean(a); }, {a}));
    require_pass(check([&] { return sum_axis(a, 1); }, {a}));
  }
  SUBCASE("shape ops") {
    require_pass(check([&] { return reshape(a, {6, 4}); }, {a}));
    require_pass(check([&] { return permute(a, {2, 0, 1}); }, {a}));
    require_pass(check([&] { return transpose(a); }, {a}));
    require_pass(check([&] { return broadcast_to(row, {3, 4}); }, {row}));
    require_pass(check([&] { return concat({a, c}, 1); }, {a, c}));
    require_pass(check([&] { return slice(a, 2, 1, 3); }, {a}));
  }
  SUBCASE("gather rows") {
    const Tensor table = random_tensor({4, 3}, 7);
    const std::vector<std::int64_t> ids{1, 3, 0, 1};
    require_pass(check([&] { return gather_rows(table, ids); }, {table}));
  }
  SUBCASE("learnable sigmoid in the steepness") {
    const Tensor v = random_tensor({3}, 8, -2.0, 2.0);
    const std::vector<double> d{0, 1, 2, 5, 10};
    require_pass(check([&] { return learnable_sigmoid(v, d, 0.1); }, {v}));
  }
  SUBCASE("bce loss") {
    const Tensor logits = random_tensor({2, 3}, 9);
    const std::vector<double> y{1, 0, 1, 0, 0, 1}, m{1, 1, 0, 1, 1, 1};
    require_pass(finite_diff_check([&] { return bce_loss(sigmoid(logits), y, m); }, {logits}));
  }
}

TEST_CASE("tanh gradient at zero is one") {
  const Tensor x = Tensor::from({1}, {0.0}, true);
  sum(tanh(x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(1.0).epsilon(1e-15));
  const auto r = finite_diff_check([&] { return sum(tanh(x)); }, {x});
  CHECK(r.entries[0].numeric == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pointwise examples") {
  CHECK(to_vec(softplus(Tensor::scalar(0.0)))[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(to_vec(relu(Tensor::from({2}, {-3.0, 3.0}))) == std::vector<double>{0.0, 3.0});
  CHECK(softplus_value(1000.0) == 1000.0);
  CHECK(softplus_value(-1000.0) >= 0.0);
  CHECK(std::isfinite(softplus_value(800.0)));
}

TEST_CASE("broadcast mismatch is a dimension error") {
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2, 4})), DimensionError);
}

TEST_CASE("softmax rows sum to one and reject non-finite input") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor x = random_tensor({5, 7}, s, -50.0, 50.0, false);
    const auto y = to_vec(softmax(x));
    for (std::size_t r = 0; r < 5; ++r) {
      double total = 0.0;
      for (std::size_t k = 0; k < 7; ++k) {
        CHECK(y[r * 7 + k] > 0.0);
        total += y[r * 7 + k];
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
  const Tensor bad = Tensor::from({2}, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(softmax(bad), NumericError);
}

TEST_CASE("gradients accumulate over consumers and across backward calls") {
  const Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  sum(add(mul(x, x), x)).backward();  // d/dx (x^2 + x) = 2x + 1
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{3.0, 5.0});
  sum(x).backward();
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{4.0, 6.0});
  CHECK_THROWS_AS(x.backward(), ContractError);
}

TEST_CASE("no-grad guard records nothing") {
  const Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  {
    NoGradGuard guard;
    const Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
}

TEST_CASE("adam with zero gradient and zero l2 leaves parameters unchanged") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<Tensor> params{random_tensor({3, 2}, seed), random_tensor({4}, seed + 50)};
    const auto before0 = to_vec(params[0]);
    const auto before1 = to_vec(params[1]);
    AdamState state(AdamConfig{.lr = 0.1, .l2 = 0.0}, params);
    state.step = seed * 7;  // any step count, moments still zero
    for (int k = 0; k < 3; ++k) {
      std::vector<std::vector<double>> zeros{std::vector<double>(6, 0.0), std::vector<double>(4, 0.0)};
      adam_step(params, zeros, state);
    }
    CHECK(to_vec(params[0]) == before0);
    CHECK(to_vec(params[1]) == before1);
    CHECK(state.step == seed * 7 + 3);
  }
}

TEST_CASE("adam first step moves each parameter by about lr") {
  const double lr = 1e-3;
  std::vector<Tensor> params{Tensor::from({3}, {0.5, -1.0, 2.0}, true)};
  AdamState state(AdamConfig{.lr = lr}, params);
  std::vector<std::vector<double>> grads{{1.0, 1.0, 1.0}};
  adam_step(params, grads, state);
  // m_hat = 1, v_hat = 1, step = lr * 1 / (1 + eps)
  const double step = lr / (1.0 + 1e-8);
  CHECK(params[0].values()[0] == doctest::Approx(0.5 - step).epsilon(1e-14));
  CHECK(params[0].values()[1] == doctest::Approx(-1.0 - step).epsilon(1e-14));
  CHECK(params[0].values()[2] == doctest::Approx(2.0 - step).epsilon(1e-14));
}

TEST_CASE("adam couples l2 into the gradient before the moments") {
  const double l2 = 2e-4;
  std::vector<Tensor> params{Tensor::from({1}, {1.0}, true)};
  AdamState state(AdamConfig{.lr = 1e-3, .l2 = l2}, params);
  std::vector<std::vector<double>> grads{{0.0}};
  adam_step(params, grads, state);
  // effective g = l2 * theta = 2e-4
  CHECK(state.first_moment[0][0] == doctest::Approx((1 - 0.9) * l2).epsilon(1e-14));
  CHECK(state.second_moment[0][0] == doctest::Approx((1 - 0.999) * l2 * l2).epsilon(1e-14));
  CHECK(params[0].values()[0] < 1.0);
}

TEST_CASE("adam rejects misaligned inputs") {
  std::vector<Tensor> params{Tensor::zeros({2}, true)};
  AdamState state(AdamConfig{}, params);
  std::vector<std::vector<double>> grads{{1.0}};
  CHECK_THROWS_AS(adam_step(params, grads, state), ContractError);
  std::vector<Tensor> two{Tensor::zeros({2}, true), Tensor::zeros({1}, true)};
  CHECK_THROWS_AS(adam_step(two, state), ContractError);
}
