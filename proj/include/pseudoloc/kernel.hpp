// SPDX-License-Identifier: Apache-2.0
//
// Standard Calderon-Zygmund kernels: evaluation, empirical size/Hoelder
// constants and integration over dyadic cells minus an l-infinity ball.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pseudoloc/dyadic.hpp"
#include "pseudoloc/quadrature.hpp"

namespace pseudoloc::kernel {

using dyadic::DyadicCube;

enum class Family {
  Hilbert1d,      // c / (x - y)
  Weierstrass1d,  // c sgn(t)/|t| (1 + W(log2|t|)/2), W lacunary cosine series
  Smooth2d,       // c (x1 - y1) / |x - y|^3
};

/// How cell integrals are computed. Exact uses a closed-form primitive in
/// one dimension; Adaptive always runs Gauss-Legendre quadrature.
enum class CellStrategy { Exact, Adaptive };

struct Constants {
  double c_size = 0.0;
  double c_holder = 0.0;
  double max() const { return c_size > c_holder ? c_size : c_holder; }
};

struct KernelSpec {
  Family family = Family::Hilbert1d;
  int dim = 1;
  double gamma = 1.0;
  double scale = 1.0;
  int terms = 12;  // last index J of the lacunary series
  CellStrategy strategy = CellStrategy::Exact;
  double rel_tol = 1e-10;
  std::optional<Constants> measured;

  static KernelSpec hilbert1d(double c = 1.0);
  static KernelSpec weierstrass1d(double gamma, double c = 1.0, int terms = 12);
  static KernelSpec smooth2d(double c = 1.0);
  /// Family by name: "hilbert1d", "weierstrass1d", "smooth2d".
  static KernelSpec by_name(const std::string& name, double gamma, double c = 1.0);

  std::string name() const;
  bool antisymmetric() const { return true; }
  /// Tail of the lacunary series beyond `terms`, relative to the scale (0 for other families).
  double series_bias() const;
};

/// K(x, y). Throws Domain when x == y.
double eval_kernel(const KernelSpec& k, const Point& x, const Point& y);
/// Radial profile in one dimension: K(x, y) = k1(x - y).
double eval_profile_1d(const KernelSpec& k, double t);

struct ScaleRow {
  int scale_exp = 0;  // samples with 2^j <= |x - y| < 2^{j+1}
  double c_size = 0.0;
  double c_holder = 0.0;
};

struct EstimateReport {
  double c_size = 0.0;
  double c_holder = 0.0;      // max of the two one-sided difference ratios, plus series bias
  double c_holder_sum = 0.0;  // max of the summed ratio (both differences at once)
  double series_bias = 0.0;
  std::size_t samples = 0;
  std::vector<ScaleRow> per_scale;
  bool violation = false;
  Constants constants() const { return Constants{c_size, c_holder}; }
  std::string to_csv() const;
};

/// Seeded sampling of (x, y, h) with |x - y| > 2|h| over 12 dyadic scales.
/// `limit` > 0 flags a violation when either constant exceeds it.
EstimateReport verify_standard_estimates(const KernelSpec& k, std::size_t samples, std::uint64_t seed,
                                         double limit = 0.0);

/// Rescales by 1 / max(C_size, C_hoelder) and records the rescaled constants.
KernelSpec normalize(const KernelSpec& k, const EstimateReport& report);

/// Integral of K(x, .) over cell minus the closed cube of radius eps around x.
double cell_integral_truncated(const KernelSpec& k, const Point& x, const DyadicCube& cell, double eps);
/// Same over an arbitrary box [lo, hi).
double box_integral_truncated(const KernelSpec& k, const Point& x, const Point& lo, const Point& hi, double eps);
/// Integral of K(x, .) over a box that x is not inside (x may lie on its boundary
/// only if the integral converges, i.e. never for these kernels).
double box_integral(const KernelSpec& k, const Point& x, const Point& lo, const Point& hi);

/// Boxes whose union is [lo, hi) minus the cube {|y - c| <= eps}.
std::vector<std::pair<Point, Point>> box_minus_cube(const Point& lo, const Point& hi, const Point& c, double eps);

}  // namespace pseudoloc::kernel
