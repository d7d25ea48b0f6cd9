#pragma once

#include <functional>
#include <random>
#include <vector>

#include "par/gradcheck.hpp"
#include "par/ops.hpp"
#include "par/tensor.hpp"

namespace par::test {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<double> random_values(std::size_t count, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

/// Reduces any output to a scalar with fixed random weights so every output
/// entry contributes a distinct upstream gradient.
inline Tensor weighted_sum(const Tensor& out, std::uint64_t seed = 99) {
  const Tensor w = random_tensor(out.shape(), seed, -1.0, 1.0, false);
  return sum(mul(out, w));
}

inline GradCheckReport check(const std::function<Tensor()>& f, std::vector<Tensor> params) {
  return finite_diff_check([&] { return weighted_sum(f()); }, std::move(params));
}

inline std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace par::test
