#include "par/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "par/errors.hpp"

namespace par {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                  std::vector<std::string> names, double h, double tol_rel) {
  if (!names.empty() && names.size() != params.size()) {
    throw ContractError("finite_diff_check: names and params differ in length");
  }
  for (auto& p : params) p.zero_grad();
  {
    Tensor loss = loss_fn();
    loss.backward();
  }

  GradCheckReport report;
  report.tolerance = tol_rel;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    GradCheckEntry entry;
    entry.name = names.empty() ? "param" + std::to_string(i) : names[i];
    auto& p = params[i];
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto values = p.data();
    entry.count = values.size();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + h;
      const double up = loss_fn().item();
      values[k] = saved - h;
      const double down = loss_fn().item();
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.empty() ? 0.0 : analytic[k];
      const double err = relative_error(a, numeric);
      if (k == 0 || err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = k;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error <= tol_rel;
  return report;
}

}  // namespace par
