#pragma once

#include <functional>
#include <string>

#include "rfpx/numerics/param_set.hpp"

namespace rfpx {

/// Populates the grad of every trainable entry with ∂loss/∂entry (zeros when
/// the entry is unreachable). Existing grads are overwritten. Frozen entries
/// never receive a grad buffer.
void backward(const Tensor& loss, ParamSet& params);

struct GradCheckReport {
  double max_relative_error = 0.0;
  bool no_trainable_params = false;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients against central differences over every
/// trainable entry: max |analytic − (f(p+ε) − f(p−ε))/2ε| / max(1, |analytic|).
/// `f` must rebuild its graph from `params` on every call.
GradCheckReport grad_check(const std::function<Tensor(const ParamSet&)>& f, ParamSet& params, double eps);

}  // namespace rfpx
