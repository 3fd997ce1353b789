// SPDX-License-Identifier: Apache-2.0
//
// Brute-force midpoint sums. Built only on eval_kernel and haar_eval so they
// can check the quadrature-based paths independently.
#pragma once

#include <functional>

#include "pseudoloc/haar.hpp"
#include "pseudoloc/kernel.hpp"

namespace pseudoloc::oracle {

inline constexpr int kMaxResolution = 26;

/// Midpoint sum of K(x, y) over cell \ {|y - x| <= eps}, 2^res points per axis.
double riemann_cell(const kernel::KernelSpec& k, const Point& x, const dyadic::DyadicCube& cell, double eps, int res);

/// Midpoint sum of K(x, y) f(y) over the bounding box of f's cubes with the
/// truncation |y - x| > eps; f is evaluated term by term with haar_eval.
double riemann_apply(const kernel::KernelSpec& k, const haar::FiniteHaarExpansion& f, const Point& x, double eps,
                     int res);

/// <h^theta_J, T_eps h^eta_I> as a double midpoint sum: 2^outer points on J
/// and 2^inner points on I (per axis).
double riemann_pairing(const kernel::KernelSpec& k, const haar::HaarIndex& J, const haar::HaarIndex& I, double eps,
                       int outer, int inner);

/// Midpoint sum of g over a cube with 2^res points per axis.
double riemann_average(const std::function<double(const Point&)>& g, const dyadic::DyadicCube& cube, int res);

}  // namespace pseudoloc::oracle
