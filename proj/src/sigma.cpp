// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/sigma.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pseudoloc::sigma {

int SigmaResult::coarsest_level() const {
  if (omega_cubes.empty()) fail(ErrorKind::Precondition, "empty exceptional set has no levels");
  return omega_cubes.begin()->first;
}

std::vector<DyadicCube> omega_k_cubes(const haar::FiniteHaarExpansion& f, int s, int k) {
  if (s < 0) fail(ErrorKind::Precondition, "s must be non-negative");
  std::set<DyadicCube> out;
  for (const auto& [h, a] : f)
    if (h.cube.level() == k + s) out.insert(h.cube.ancestor(s));
  return {out.begin(), out.end()};
}

DyadicSet omega_k(const haar::FiniteHaarExpansion& f, int s, int k) {
  return DyadicSet::from_cubes(f.dim(), omega_k_cubes(f, s, k));
}

SigmaResult sigma_set(const haar::FiniteHaarExpansion& f, int s) {
  if (s < 0) fail(ErrorKind::Precondition, "s must be non-negative");
  SigmaResult r;
  r.s = s;
  r.sigma = DyadicSet(f.dim());
  std::set<int> levels;
  for (const auto& [h, a] : f) levels.insert(h.cube.level());
  std::vector<DyadicCube> all;
  for (int j : levels) {
    const int k = j - s;
    auto cubes = omega_k_cubes(f, s, k);
    r.omega[k] = DyadicSet::from_cubes(f.dim(), cubes);
    for (const auto& c : cubes) {
      auto nine = dyadic::expand9_cubes(c);
      all.insert(all.end(), nine.begin(), nine.end());
    }
    r.omega_cubes[k] = std::move(cubes);
  }
  r.sigma = DyadicSet::from_cubes(f.dim(), std::move(all));
  return r;
}

double conjugate(double p) {
  if (!(p > 1.0)) fail(ErrorKind::Precondition, "exponent p must exceed 1");
  return p / (p - 1.0);
}

double decay_exponent(double p, double gamma) { return std::min({gamma, 0.5, 1.0 / conjugate(p)}); }

bool ScaledCube::contains(const Point& x) const {
  for (int i = 0; i < center.dim; ++i)
    if (std::abs(x[i] - center[i]) >= 0.5 * side) return false;
  return true;
}

ScaledCube q_expansion(const DyadicCube& q, int s, double p, double gamma) {
  const double pc = conjugate(p);
  const double e = decay_exponent(p, gamma);
  ScaledCube out;
  out.center = q.center_point();
  out.factor = 100.0 * std::exp2(s * (1.0 + e * pc / q.dim()));
  out.side = out.factor * q.side_d();
  return out;
}

DyadicCube select_q_cube(const haar::StepFunction& g, double p, double threshold) {
  IntVec lo{}, hi{};
  if (!g.nonzero_bounds(lo, hi)) return DyadicCube(g.dim(), g.level(), IntVec{});
  const int n = g.dim();
  // Mass |g|^p per level-j cube, accumulated from the mesh upwards.
  std::map<IntVec, double> mass;
  double total = 0.0;
  for (std::size_t f = 0; f < g.cell_count(); ++f) {
    const double v = std::abs(g.values()[f]);
    if (v == 0.0) continue;
    const double m = std::pow(v, p) * g.cell_measure();
    mass[g.cell_index(f)] += m;
    total += m;
  }
  const double budget = std::pow(threshold, p);
  const int min_level = dyadic::level_window().min_level;
  for (int j = g.level(); j >= min_level; --j) {
    const std::pair<const IntVec, double>* best = nullptr;
    for (const auto& entry : mass)
      if (!best || entry.second > best->second) best = &entry;
    if (best && total - best->second <= budget) return DyadicCube(n, j, best->first);
    std::map<IntVec, double> up;
    for (const auto& [c, m] : mass) {
      IntVec pc{};
      for (int i = 0; i < n; ++i) pc[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)] >> 1;
      up[pc] += m;
    }
    mass = std::move(up);
  }
  fail(ErrorKind::Numeric, "no dyadic cube in the level window meets the mass condition");
}

}  // namespace pseudoloc::sigma
