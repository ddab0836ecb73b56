#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hvf/autodiff.hpp"

namespace hvf {

struct GradientCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t coordinates = 0;
  bool pass = false;
};

/// Relative error |a−n| / max(|a|, |n|, 1e-6). The floor keeps coordinates whose
/// true derivative is ~0 from being judged on round-off alone.
double gradient_relative_error(double analytic, double numeric);

/// Scalar-valued function of differentiable inputs, recorded on the given graph.
using InputFunction = std::function<Var(Graph&, std::span<const Var>)>;

/// Compares reverse-mode gradients with central differences at `point`.
/// Throws NumericError when the function or any gradient is not finite.
GradientCheckReport gradient_check(const InputFunction& f, std::vector<Tensor> point, double step,
                                   double tol);

/// Scalar-valued function of the parameters in `store`.
using ParameterFunction = std::function<Var(Graph&)>;

/// Same comparison over every element of every parameter in `store`.
/// `stride` > 1 checks every stride-th coordinate of each parameter (always
/// including the first).
GradientCheckReport gradient_check(const ParameterFunction& f, ParameterStore& store, double step,
                                   double tol, std::size_t stride = 1);

}  // namespace hvf
