// SPDX-License-Identifier: Apache-2.0
//
// Haar system on dyadic cubes, finite Haar expansions, martingale projections
// and piecewise-constant functions on a uniform dyadic mesh.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pseudoloc/dyadic.hpp"

namespace pseudoloc::haar {

using dyadic::DyadicCube;
using dyadic::DyadicSet;

/// Cube plus signature bits. Bit i of eta selects the cancellative profile in
/// axis i; eta == 0 is the normalised indicator |I|^{-1/2} 1_I.
struct HaarIndex {
  DyadicCube cube;
  std::uint32_t eta = 1;

  bool cancellative() const { return eta != 0; }
  friend bool operator==(const HaarIndex&, const HaarIndex&) = default;
  friend auto operator<=>(const HaarIndex& a, const HaarIndex& b) {
    if (auto c = a.cube <=> b.cube; c != 0) return c;
    return a.eta <=> b.eta;
  }
};

/// |I|^{-1/2} = 2^{level*dim/2}, assembled from an exact power of two and at
/// most one factor sqrt(2).
double haar_amplitude(const DyadicCube& cube);

/// Sign (+1/-1) of h^eta_I on the child of I selected by `child_bits`.
int haar_sign(std::uint32_t eta, std::uint32_t child_bits);

double haar_eval(const HaarIndex& h, const Point& x);
double haar_eval(const DyadicCube& cube, std::uint32_t eta, const Point& x);

/// f = sum alpha * h^eta_I over finitely many cancellative indices.
class FiniteHaarExpansion {
 public:
  FiniteHaarExpansion() = default;
  explicit FiniteHaarExpansion(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return coeffs_.size(); }
  bool empty() const { return coeffs_.empty(); }
  const std::map<HaarIndex, double>& coefficients() const { return coeffs_; }
  auto begin() const { return coeffs_.begin(); }
  auto end() const { return coeffs_.end(); }

  /// Adds alpha to the coefficient (entries that cancel to 0 are removed).
  void add(const HaarIndex& h, double alpha);
  void set(const HaarIndex& h, double alpha);
  double get(const HaarIndex& h) const;

  int min_level() const;
  int max_level() const;
  /// Sum of squared coefficients (= ||f||_2^2).
  double energy() const;
  FiniteHaarExpansion scaled(double c) const;
  FiniteHaarExpansion plus(const FiniteHaarExpansion& other) const;
  /// Each cube moved by `levels` dyadic steps finer (x -> 2^{levels} x), L^2-normalised.
  FiniteHaarExpansion dilated(int levels) const;
  /// Each cube I replaced by I + offset * 2^{-level_of_offset}.
  FiniteHaarExpansion translated(const IntVec& offset, int offset_level) const;
  /// Union of the coefficient cubes.
  DyadicSet support_cover() const;

  /// One line per coefficient: "k:(m...) eta=<bits> alpha=<decimal>".
  std::string to_text() const;
  static FiniteHaarExpansion parse(const std::string& text);

  friend bool operator==(const FiniteHaarExpansion&, const FiniteHaarExpansion&) = default;

 private:
  int dim_ = 1;
  std::map<HaarIndex, double> coeffs_;
};

/// Piecewise-constant function on the level-`level` mesh restricted to the
/// box of cells origin[i] <= m_i < origin[i] + extent[i]; zero outside.
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(int dim, int level, const IntVec& origin, const IntVec& extent);
  static StepFunction zero(int dim, int level) { return StepFunction(dim, level, IntVec{}, IntVec{}); }

  int dim() const { return dim_; }
  int level() const { return level_; }
  const IntVec& origin() const { return origin_; }
  const IntVec& extent() const { return extent_; }
  std::size_t cell_count() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double cell_measure() const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  /// Mesh index of the cell stored at position `flat` (axis 0 fastest).
  IntVec cell_index(std::size_t flat) const;
  std::optional<std::size_t> flat_index(const IntVec& cell) const;
  DyadicCube cell(std::size_t flat) const { return DyadicCube(dim_, level_, cell_index(flat)); }
  double at(const IntVec& cell) const;
  double& ref(const IntVec& cell);
  double eval(const Point& x) const;

  /// Same function on a finer mesh.
  StepFunction refined(int level) const;
  /// Same function on a box enlarged to contain `lo..hi` (cell indices at this level) and
  /// aligned to multiples of 2^{level - align_level} cells.
  StepFunction enlarged(const IntVec& lo, const IntVec& hi, int align_level) const;
  /// Smallest and largest cell index (inclusive) of the nonzero cells; false if f == 0.
  bool nonzero_bounds(IntVec& lo, IntVec& hi) const;

  StepFunction plus(const StepFunction& other) const;
  StepFunction scaled(double c) const;
  /// Maximal absolute difference of values after bringing both to a common mesh.
  double max_abs_diff(const StepFunction& other) const;
  double max_abs() const;

 private:
  int dim_ = 1;
  int level_ = 0;
  IntVec origin_{};
  IntVec extent_{};
  std::vector<double> values_;
};

StepFunction synthesize(const FiniteHaarExpansion& f);
/// Synthesis at a prescribed mesh level (>= finest coefficient level + 1).
StepFunction synthesize(const FiniteHaarExpansion& f, int mesh_level);

/// Coefficients <h^eta_I, g> for all cancellative I with level in [a, b].
/// Exactly-zero coefficients are omitted.
FiniteHaarExpansion analyze(const StepFunction& g, int a, int b);

enum class Projection { E, D };
/// E_k keeps levels < k, D_k keeps level == k.
FiniteHaarExpansion project(const FiniteHaarExpansion& f, int k, Projection mode);
/// E_k replaces values by level-k cube averages; D_k = E_{k+1} - E_k.
StepFunction project(const StepFunction& g, int k, Projection mode);

double inner_product(const StepFunction& a, const StepFunction& b);
double inner_product(const StepFunction& a, const HaarIndex& h);

/// (sum over cells in region of |v|^p |cell|)^{1/p}, compensated summation.
double lp_norm(const StepFunction& g, double p, const DyadicSet* region = nullptr);
/// Convenience: L^p norm of the synthesised expansion.
double lp_norm(const FiniteHaarExpansion& f, double p);

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace pseudoloc::haar
