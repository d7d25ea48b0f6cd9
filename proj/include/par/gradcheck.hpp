#pragma once

#include <functional>
#include <string>
#include <vector>

#include "par/tensor.hpp"

namespace par {

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;       // scalars checked
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;       // at worst_index
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // one per parameter tensor
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares the reverse-mode gradient of `loss_fn` with central differences
/// (f(x+h) - f(x-h)) / 2h for every scalar of every tensor in `params`.
/// `loss_fn` must be deterministic and return a scalar.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                  std::vector<std::string> names = {}, double h = 1e-5,
                                  double tol_rel = 1e-4);

}  // namespace par
