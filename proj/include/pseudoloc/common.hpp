// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace pseudoloc {

inline constexpr int kMaxDim = 3;

using IntVec = std::array<std::int64_t, kMaxDim>;

enum class ErrorKind {
  Domain,        // kernel evaluated on the diagonal, singular integration
  Precondition,  // caller broke a documented precondition
  Window,        // dyadic level left the configured window
  Numeric,       // quadrature/truncation budget exhausted
  Invariant,     // internal consistency check failed
  Parse,         // malformed text input
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

/// A point of R^n with n <= kMaxDim. Unused trailing coordinates are zero.
struct Point {
  std::array<double, kMaxDim> x{};
  int dim = 1;

  static Point of(std::initializer_list<double> coords);

  double operator[](int i) const { return x[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return x[static_cast<std::size_t>(i)]; }
};

/// l-infinity distance between points.
double linf(const Point& a, const Point& b);

}  // namespace pseudoloc
