#pragma once

#include <functional>

#include "graphdoc/param_store.hpp"
#include "graphdoc/tape.hpp"

namespace graphdoc {

/// Builds a scalar loss over the parameters in the store. The callable must
/// be deterministic; it is invoked once per analytic pass and twice per
/// perturbed coordinate.
using LossFn = std::function<Var(Tape&, const ParamStore&)>;

/// Central-difference check of backprop over every parameter coordinate.
/// Returns max over coordinates of |a-n| / max(1e-8, |a|+|n|).
double check_gradients(const LossFn& loss_fn, ParamStore& params, double eps = 1e-5);

} // namespace graphdoc
