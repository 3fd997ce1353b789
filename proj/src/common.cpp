// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/common.hpp"

#include <algorithm>
#include <cmath>

namespace pseudoloc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Window: return "window";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Invariant: return "invariant";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

Point Point::of(std::initializer_list<double> coords) {
  if (coords.size() == 0 || coords.size() > static_cast<std::size_t>(kMaxDim))
    fail(ErrorKind::Precondition, "Point::of: dimension out of range");
  Point p;
  p.dim = static_cast<int>(coords.size());
  std::copy(coords.begin(), coords.end(), p.x.begin());
  return p;
}

double linf(const Point& a, const Point& b) {
  double d = 0.0;
  for (int i = 0; i < a.dim; ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace pseudoloc
