// SPDX-License-Identifier: Apache-2.0
//
// The exceptional sets: per-level covers of supp D_{k+s} f, their 9-fold
// expansions and union, and the single-cube replacement with its expansion.
#pragma once

#include <map>
#include <vector>

#include "pseudoloc/haar.hpp"

namespace pseudoloc::sigma {

using dyadic::DyadicCube;
using dyadic::DyadicSet;

struct SigmaResult {
  int s = 0;
  /// Level-k cubes of the minimal cover (before canonical merging), per k.
  std::map<int, std::vector<DyadicCube>> omega_cubes;
  std::map<int, DyadicSet> omega;
  DyadicSet sigma;

  /// Coarsest level carrying a nonempty cover.
  int coarsest_level() const;
};

/// Level-k ancestors of the level-(k+s) coefficient cubes, sorted and unique.
std::vector<DyadicCube> omega_k_cubes(const haar::FiniteHaarExpansion& f, int s, int k);
DyadicSet omega_k(const haar::FiniteHaarExpansion& f, int s, int k);
SigmaResult sigma_set(const haar::FiniteHaarExpansion& f, int s);

/// min(gamma, 1/2, 1/p') with p' = p/(p-1).
double decay_exponent(double p, double gamma);
double conjugate(double p);

struct ScaledCube {
  Point center;
  double side = 0.0;
  double factor = 1.0;
  bool contains(const Point& x) const;
};

/// Concentric expansion of Q by 100 * 2^{s[1 + e p'/n]}.
ScaledCube q_expansion(const DyadicCube& q, int s, double p, double gamma);

/// Smallest dyadic cube Q (finest level first, most mass first) with
/// ||1_{Q^c} g||_p <= threshold. Throws Numeric if none exists in the window.
DyadicCube select_q_cube(const haar::StepFunction& g, double p, double threshold);

}  // namespace pseudoloc::sigma
