#pragma once

// Small helpers shared by the model modules: a named parameter registry,
// seeded initialisers and an affine layer.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "par/tensor.hpp"

namespace par {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng, double mean = 0.0, double stddev = 1.0);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

enum class Init { zeros, glorot, small_uniform };

/// Ordered registry of trainable tensors. Order is creation order and is the
/// order used by the optimizer and the checkpoint format.
class ParameterStore {
 public:
  /// Registers a parameter. glorot uses the last two axes as (fan_in, fan_out);
  /// small_uniform draws from [-bound, bound].
  Tensor add(const std::string& name, Shape shape, Init init, Rng& rng, double bound = 0.05);
  Tensor add_tensor(const std::string& name, Tensor tensor);

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  std::vector<std::string> names() const;
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t scalar_count() const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<NamedTensor> entries_;
};

/// x W + b, with b broadcast over rows.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Additive key mask: 0 where mask != 0, -1e9 elsewhere.
std::vector<double> mask_bias(const std::vector<double>& mask);

constexpr double kMaskedLogit = -1e9;

}  // namespace par
