#pragma once

#include "molprop/tape.hpp"
#include "molprop/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace molprop::ad {

struct GradCheckOptions {
  Real eps = 1e-5;              // central-difference step
  int max_coords_per_tensor = 200;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;  // picks coords when a tensor is large
};

struct GradCheckResult {
  int n_checked = 0;
  Real max_rel_err = 0.0;
  Real max_abs_err = 0.0;
  std::string worst;            // coordinate where max_rel_err occurred
  bool deterministic = true;    // two evaluations of the loss agreed bitwise

  bool pass(Real tol) const { return deterministic && max_rel_err <= tol; }
};

/// Builds the loss from fresh leaves for the given tensors. Must be pure:
/// same inputs, same loss, bit for bit.
using LossFn = std::function<Value(Tape&, const std::vector<Value>&)>;

/// Compares reverse-mode gradients against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) on a sampled subset of coordinates of
/// every input tensor. Relative error uses max(|analytic|, |numeric|, 1e-8)
/// as the denominator.
GradCheckResult grad_check(const LossFn& f, const std::vector<Mat>& inputs,
                           const GradCheckOptions& opt = {});

}  // namespace molprop::ad
