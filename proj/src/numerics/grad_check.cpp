#include "rfpx/numerics/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "rfpx/error.hpp"

namespace rfpx {

void backward(const Tensor& loss, ParamSet& params) {
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  for (const auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    Tensor t = entry.tensor;
    t.mutable_grad();
    t.zero_grad();
  }
  backward(loss);
}

GradCheckReport grad_check(const std::function<Tensor(const ParamSet&)>& f, ParamSet& params, double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");
  GradCheckReport report;

  const double base_a = f(params).item();
  const double base_b = f(params).item();
  if (std::bit_cast<std::uint64_t>(base_a) != std::bit_cast<std::uint64_t>(base_b)) {
    throw DeterminismError("grad_check: objective returned different values on identical parameters");
  }

  if (params.scalar_count(true) == 0) {
    report.no_trainable_params = true;
    return report;
  }

  backward(f(params), params);

  for (const auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    Tensor t = entry.tensor;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double plus = f(params).item();
      values[i] = original - eps;
      const double minus = f(params).item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      ++report.entries_checked;
      if (err > report.max_relative_error || std::isnan(err)) {
        report.max_relative_error = std::isnan(err) ? INFINITY : err;
        report.worst_param = name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace rfpx
