#include "par/nn.hpp"

#include <cmath>

#include "par/errors.hpp"
#include "par/ops.hpp"

namespace par {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double normal(Rng& rng, double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(rng); }

Tensor ParameterStore::add(const std::string& name, Shape shape, Init init, Rng& rng, double bound) {
  const std::size_t count = shape_numel(shape);
  std::vector<double> values(count, 0.0);
  if (init == Init::glorot) {
    const std::size_t fan_in = shape.size() >= 2 ? shape[shape.size() - 2] : 1;
    const std::size_t fan_out = shape.empty() ? 1 : shape.back();
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : values) v = uniform(rng, -limit, limit);
  } else if (init == Init::small_uniform) {
    for (auto& v : values) v = uniform(rng, -bound, bound);
  }
  return add_tensor(name, Tensor::from(std::move(shape), std::move(values), true));
}

Tensor ParameterStore::add_tensor(const std::string& name, Tensor tensor) {
  if (contains(name)) throw ContractError("duplicate parameter name " + name);
  entries_.push_back({name, tensor});
  return tensor;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

Tensor ParameterStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ContractError("unknown parameter " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.tensor.numel();
  return total;
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) { return add(matmul(x, weight), bias); }

std::vector<double> mask_bias(const std::vector<double>& mask) {
  std::vector<double> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] != 0.0 ? 0.0 : kMaskedLogit;
  return out;
}

}  // namespace par
