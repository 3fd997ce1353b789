// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace pseudoloc::oracle {

namespace {

void check_res(int res) {
  if (res < 0 || res > kMaxResolution) fail(ErrorKind::Precondition, "oracle resolution must lie in [0, 26]");
}

/// Calls fn(midpoint, weight) for the 2^res-per-axis grid on [lo, hi).
template <class Fn>
void midpoints(int n, const Point& lo, const Point& hi, int res, Fn&& fn) {
  const std::int64_t per = std::int64_t{1} << res;
  std::int64_t total = 1;
  for (int i = 0; i < n; ++i) total *= per;
  double w = 1.0;
  Point step;
  step.dim = n;
  for (int i = 0; i < n; ++i) {
    step[i] = (hi[i] - lo[i]) / static_cast<double>(per);
    w *= step[i];
  }
  Point y;
  y.dim = n;
  for (std::int64_t code = 0; code < total; ++code) {
    std::int64_t rest = code;
    for (int i = 0; i < n; ++i) {
      y[i] = lo[i] + (static_cast<double>(rest % per) + 0.5) * step[i];
      rest /= per;
    }
    fn(y, w);
  }
}

Point lower_corner(const dyadic::DyadicCube& c) {
  Point p;
  p.dim = c.dim();
  for (int i = 0; i < c.dim(); ++i) p[i] = c.lower_d(i);
  return p;
}

Point upper_corner(const dyadic::DyadicCube& c) {
  Point p;
  p.dim = c.dim();
  for (int i = 0; i < c.dim(); ++i) p[i] = c.upper_d(i);
  return p;
}

}  // namespace

double riemann_cell(const kernel::KernelSpec& k, const Point& x, const dyadic::DyadicCube& cell, double eps, int res) {
  check_res(res);
  long double sum = 0.0L;
  midpoints(cell.dim(), lower_corner(cell), upper_corner(cell), res, [&](const Point& y, double w) {
    if (linf(x, y) > eps) sum += static_cast<long double>(kernel::eval_kernel(k, x, y) * w);
  });
  return static_cast<double>(sum);
}

double riemann_apply(const kernel::KernelSpec& k, const haar::FiniteHaarExpansion& f, const Point& x, double eps,
                     int res) {
  check_res(res);
  if (f.empty()) return 0.0;
  const int n = f.dim();
  Point lo, hi;
  lo.dim = hi.dim = n;
  bool first = true;
  for (const auto& [h, a] : f)
    for (int i = 0; i < n; ++i) {
      lo[i] = first ? h.cube.lower_d(i) : std::min(lo[i], h.cube.lower_d(i));
      hi[i] = first ? h.cube.upper_d(i) : std::max(hi[i], h.cube.upper_d(i));
      if (i == n - 1) first = false;
    }
  // Stretch to a power-of-two side so grid points stay dyadically aligned.
  double side = 0.0;
  for (int i = 0; i < n; ++i) side = std::max(side, hi[i] - lo[i]);
  side = std::exp2(std::ceil(std::log2(side)));
  for (int i = 0; i < n; ++i) hi[i] = lo[i] + side;
  long double sum = 0.0L;
  midpoints(n, lo, hi, res, [&](const Point& y, double w) {
    if (!(linf(x, y) > eps)) return;
    double v = 0.0;
    for (const auto& [h, a] : f) v += a * haar::haar_eval(h, y);
    if (v != 0.0) sum += static_cast<long double>(kernel::eval_kernel(k, x, y) * v * w);
  });
  return static_cast<double>(sum);
}

double riemann_pairing(const kernel::KernelSpec& k, const haar::HaarIndex& J, const haar::HaarIndex& I, double eps,
                       int outer, int inner) {
  check_res(outer);
  check_res(inner);
  long double sum = 0.0L;
  midpoints(J.cube.dim(), lower_corner(J.cube), upper_corner(J.cube), outer, [&](const Point& x, double wx) {
    const double hx = haar::haar_eval(J, x);
    long double in = 0.0L;
    midpoints(I.cube.dim(), lower_corner(I.cube), upper_corner(I.cube), inner, [&](const Point& y, double wy) {
      if (linf(x, y) > eps) in += static_cast<long double>(kernel::eval_kernel(k, x, y) * haar::haar_eval(I, y) * wy);
    });
    sum += static_cast<long double>(hx * wx) * in;
  });
  return static_cast<double>(sum);
}

double riemann_average(const std::function<double(const Point&)>& g, const dyadic::DyadicCube& cube, int res) {
  check_res(res);
  long double sum = 0.0L;
  midpoints(cube.dim(), lower_corner(cube), upper_corner(cube), res,
            [&](const Point& y, double w) { sum += static_cast<long double>(g(y) * w); });
  return static_cast<double>(sum / static_cast<long double>(cube.measure_d()));
}

}  // namespace pseudoloc::oracle
