// SPDX-License-Identifier: Apache-2.0
//
// Globally adaptive Gauss-Legendre quadrature (order 8 per panel). A panel's
// error is the disagreement between its one-panel and two-half estimates; the
// worst panel is bisected until the total error meets the tolerance or the
// depth cap is hit, in which case the result is returned unconverged.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pseudoloc/common.hpp"

namespace pseudoloc::quad {

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  int max_depth = 24;
  std::size_t max_panels = 200000;
};

struct Result {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  int depth = 0;
  std::size_t evaluations = 0;
};

struct VecResult {
  std::vector<double> value;
  std::vector<double> error;
  bool converged = true;
  int depth = 0;
  std::size_t evaluations = 0;
};

using ScalarFn = std::function<double(double)>;
using VectorFn = std::function<void(double, std::span<double>)>;
using BoxFn = std::function<double(const Point&)>;

/// Integrate f over [a, b]. `splits` are interior points where f may kink or
/// jump; `singular` are points where f may have an integrable (logarithmic)
/// singularity. Panels ending at a singular point are graded towards it.
Result integrate(const ScalarFn& f, double a, double b, const Options& opt = {},
                 std::span<const double> splits = {}, std::span<const double> singular = {});

/// Vector-valued variant: all m components share the panel refinement and the
/// tolerance applies component-wise.
VecResult integrate_vec(std::size_t m, const VectorFn& f, double a, double b, const Options& opt = {},
                        std::span<const double> splits = {}, std::span<const double> singular = {});

/// Tensor-product rule over the box [lo, hi] in dim dimensions, bisecting
/// every axis of the worst box. `splits[i]` seeds the partition along axis i.
Result integrate_box(int dim, const BoxFn& f, const Point& lo, const Point& hi, const Options& opt = {},
                     const std::vector<std::vector<double>>& splits = {});

/// Nodes and weights of the 8-point rule on [-1, 1].
std::span<const double> gauss_nodes();
std::span<const double> gauss_weights();

}  // namespace pseudoloc::quad
