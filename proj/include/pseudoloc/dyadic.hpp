// SPDX-License-Identifier: Apache-2.0
//
// Exact geometry of dyadic cubes 2^{-k}([0,1)^n + m) under the l-infinity
// metric. Coordinates are dyadic rationals; nothing in here rounds.
#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pseudoloc/common.hpp"

namespace pseudoloc::dyadic {

/// Exact dyadic rational mant * 2^exp with an odd (or zero) mantissa.
class Dyadic {
 public:
  constexpr Dyadic() = default;
  Dyadic(std::int64_t mant, int exp);

  static Dyadic from_int(std::int64_t v) { return Dyadic(v, 0); }
  /// Every finite double is a dyadic rational; the conversion is exact.
  static Dyadic from_double(double v);

  std::int64_t mantissa() const { return mant_; }
  int exponent() const { return exp_; }
  double to_double() const;
  std::string to_string() const;

  Dyadic operator-() const { return Dyadic(-mant_, exp_); }
  friend Dyadic operator+(const Dyadic& a, const Dyadic& b);
  friend Dyadic operator-(const Dyadic& a, const Dyadic& b) { return a + (-b); }
  friend Dyadic operator*(const Dyadic& a, const Dyadic& b);
  /// Multiplication by 2^j.
  Dyadic scaled(int j) const { return mant_ == 0 ? *this : Dyadic(mant_, exp_ + j); }
  Dyadic abs() const { return mant_ < 0 ? -*this : *this; }
  bool is_zero() const { return mant_ == 0; }

  friend bool operator==(const Dyadic& a, const Dyadic& b) = default;
  friend std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b);

 private:
  std::int64_t mant_ = 0;
  int exp_ = 0;
};

Dyadic max(const Dyadic& a, const Dyadic& b);
Dyadic min(const Dyadic& a, const Dyadic& b);

/// Admissible range of cube levels. Cubes outside it cannot be constructed.
struct LevelWindow {
  int min_level = -16;
  int max_level = 16;
};

LevelWindow level_window();
void set_level_window(LevelWindow w);

/// The dyadic cube 2^{-level}([0,1)^dim + index).
class DyadicCube {
 public:
  DyadicCube() = default;
  DyadicCube(int dim, int level, const IntVec& index);
  /// One-dimensional convenience constructor.
  static DyadicCube interval(int level, std::int64_t index);
  static DyadicCube unit(int dim) { return DyadicCube(dim, 0, IntVec{}); }

  int dim() const { return dim_; }
  int level() const { return level_; }
  const IntVec& index() const { return index_; }
  std::int64_t index(int i) const { return index_[static_cast<std::size_t>(i)]; }

  Dyadic side() const { return Dyadic(1, -level_); }
  Dyadic lower(int i) const { return Dyadic(index(i), -level_); }
  Dyadic upper(int i) const { return Dyadic(index(i) + 1, -level_); }
  Dyadic center(int i) const { return Dyadic(2 * index(i) + 1, -level_ - 1); }
  /// |I| = 2^{-level*dim}.
  Dyadic measure() const { return Dyadic(1, -level_ * dim_); }

  double side_d() const;
  double lower_d(int i) const;
  double upper_d(int i) const;
  double center_d(int i) const;
  double measure_d() const;
  Point center_point() const;

  DyadicCube parent() const { return ancestor(1); }
  DyadicCube ancestor(int s) const;
  DyadicCube translate(const IntVec& m) const;
  /// The 2^dim children, ordered by the bit pattern (bit i set = upper half in axis i).
  std::vector<DyadicCube> children() const;
  /// Which child of its parent this cube is, as a bit pattern.
  std::uint32_t child_bits() const;

  bool contains(const DyadicCube& other) const;
  bool intersects(const DyadicCube& other) const;
  /// Half-open containment of a point.
  bool contains(const Point& p) const;

  /// "k:(m1,...,mn)"
  std::string to_string() const;
  static DyadicCube parse(const std::string& text);

  friend bool operator==(const DyadicCube& a, const DyadicCube& b) = default;
  friend std::strong_ordering operator<=>(const DyadicCube& a, const DyadicCube& b);

 private:
  int dim_ = 1;
  int level_ = 0;
  IntVec index_{};
};

/// The level-k cube containing a point.
DyadicCube cube_containing(const Point& p, int level);

/// Finite union of dyadic cubes in canonical form: pairwise disjoint maximal
/// cubes, sorted by (level, index). Equal point sets have equal forms.
class DyadicSet {
 public:
  DyadicSet() = default;
  explicit DyadicSet(int dim) : dim_(dim) {}
  static DyadicSet from_cubes(int dim, std::vector<DyadicCube> cubes);

  int dim() const { return dim_; }
  bool empty() const { return cubes_.empty(); }
  std::size_t size() const { return cubes_.size(); }
  const std::vector<DyadicCube>& cubes() const { return cubes_; }
  auto begin() const { return cubes_.begin(); }
  auto end() const { return cubes_.end(); }

  bool contains(const Point& p) const;
  bool contains(const DyadicCube& c) const;
  bool intersects(const DyadicCube& c) const;
  Dyadic measure() const;

  DyadicSet unite(const DyadicSet& other) const;
  DyadicSet intersect(const DyadicCube& box) const;
  bool is_subset_of(const DyadicSet& other) const;

  /// Coordinate-wise bounding box [lo, hi) of the union. Requires a nonempty set.
  void hull(std::array<Dyadic, kMaxDim>& lo, std::array<Dyadic, kMaxDim>& hi) const;

  friend bool operator==(const DyadicSet& a, const DyadicSet& b) = default;

 private:
  int dim_ = 1;
  std::vector<DyadicCube> cubes_;
};

DyadicCube ancestor(const DyadicCube& cube, int s);
DyadicCube translate(const DyadicCube& cube, const IntVec& m);

/// 9I as the union of the 9^n same-level translates I+m, m in {-4..4}^n.
DyadicSet expand9(const DyadicCube& cube);
/// The same translates before canonical merging.
std::vector<DyadicCube> expand9_cubes(const DyadicCube& cube);

/// Exact distance between closures.
Dyadic linf_dist(const DyadicCube& a, const DyadicCube& b);
Dyadic linf_dist(const DyadicCube& a, const DyadicSet& b);
Dyadic linf_dist(const Point& p, const DyadicCube& b);
Dyadic linf_dist(const Point& p, const DyadicSet& b);

/// B \ S as maximal dyadic cubes. Every cube of S must have level <= max_level.
DyadicSet complement_in_box(const DyadicSet& set, const DyadicCube& box, int max_level);

}  // namespace pseudoloc::dyadic
