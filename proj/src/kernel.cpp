// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pseudoloc/random.hpp"

namespace pseudoloc::kernel {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLn2 = 0.69314718055994530942;
constexpr int kScaleMin = -6;
constexpr int kScaleCount = 12;

double lacunary(const KernelSpec& k, double u) {
  double w = 0.0;
  for (int j = 0; j <= k.terms; ++j) w += std::pow(2.0, -j * k.gamma) * std::cos(std::ldexp(kPi, j) * u);
  return w;
}

/// P(a) - P(b) for a, b > 0, where P' is the unscaled positive-side profile.
double primitive_diff(const KernelSpec& k, double a, double b) {
  // ln(a/b) without cancellation when a ~ b.
  const double ln_ratio = std::log1p((a - b) / b);
  if (k.family != Family::Weierstrass1d) return ln_ratio;
  const double half_diff = 0.5 * ln_ratio / kLn2;                  // (log2 a - log2 b)/2
  const double half_sum = 0.5 * (std::log2(a) + std::log2(b));     // (log2 a + log2 b)/2
  double series = 0.0;
  for (int j = 0; j <= k.terms; ++j) {
    const double f = std::ldexp(kPi, j);
    series += std::pow(2.0, -j * k.gamma) * 2.0 * std::cos(f * half_sum) * std::sin(f * half_diff) / f;
  }
  return ln_ratio + 0.5 * kLn2 * series;
}

double integrate_1d_exact(const KernelSpec& k, double x, double u, double v) {
  // y in [u, v), x outside: t = x - y runs over [x - v, x - u], one sign.
  const double du = std::abs(x - u);
  const double dv = std::abs(x - v);
  return k.scale * primitive_diff(k, du, dv);
}

double integrate_1d_adaptive(const KernelSpec& k, double x, double u, double v) {
  quad::Options opt;
  opt.rel_tol = k.rel_tol;
  const auto fn = [&](double y) { return eval_profile_1d(k, x - y); };
  // Grade towards the end nearest x; the profile is steepest there.
  const double near = (x <= u) ? u : v;
  const quad::Result r = integrate(fn, u, v, opt, {}, std::span<const double>(&near, 1));
  if (!r.converged) fail(ErrorKind::Numeric, "cell integral did not converge");
  return r.value;
}

}  // namespace

KernelSpec KernelSpec::hilbert1d(double c) {
  KernelSpec k;
  k.family = Family::Hilbert1d;
  k.dim = 1;
  k.gamma = 1.0;
  k.scale = c;
  return k;
}

KernelSpec KernelSpec::weierstrass1d(double gamma, double c, int terms) {
  if (!(gamma > 0.0 && gamma <= 1.0)) fail(ErrorKind::Precondition, "weierstrass1d: gamma must lie in (0, 1]");
  if (terms < 0) fail(ErrorKind::Precondition, "weierstrass1d: negative series length");
  KernelSpec k;
  k.family = Family::Weierstrass1d;
  k.dim = 1;
  k.gamma = gamma;
  k.scale = c;
  k.terms = terms;
  return k;
}

KernelSpec KernelSpec::smooth2d(double c) {
  KernelSpec k;
  k.family = Family::Smooth2d;
  k.dim = 2;
  k.gamma = 1.0;
  k.scale = c;
  k.strategy = CellStrategy::Adaptive;
  return k;
}

KernelSpec KernelSpec::by_name(const std::string& name, double gamma, double c) {
  if (name == "hilbert1d") return hilbert1d(c);
  if (name == "weierstrass1d") return weierstrass1d(gamma, c);
  if (name == "smooth2d") return smooth2d(c);
  fail(ErrorKind::Precondition, "unknown kernel family '" + name + "'");
}

std::string KernelSpec::name() const {
  switch (family) {
    case Family::Hilbert1d: return "hilbert1d";
    case Family::Weierstrass1d: return "weierstrass1d";
    case Family::Smooth2d: return "smooth2d";
  }
  return "unknown";
}

double KernelSpec::series_bias() const {
  if (family != Family::Weierstrass1d) return 0.0;
  return std::abs(scale) * std::pow(2.0, -terms * gamma) / (std::pow(2.0, gamma) - 1.0);
}

double eval_profile_1d(const KernelSpec& k, double t) {
  if (t == 0.0) fail(ErrorKind::Domain, "kernel evaluated on the diagonal");
  switch (k.family) {
    case Family::Hilbert1d: return k.scale / t;
    case Family::Weierstrass1d: {
      const double a = std::abs(t);
      return k.scale * (t > 0 ? 1.0 : -1.0) / a * (1.0 + 0.5 * lacunary(k, std::log2(a)));
    }
    case Family::Smooth2d: break;
  }
  fail(ErrorKind::Precondition, "kernel has no one-dimensional profile");
}

double eval_kernel(const KernelSpec& k, const Point& x, const Point& y) {
  if (k.dim == 1) return eval_profile_1d(k, x[0] - y[0]);
  const double z1 = x[0] - y[0];
  const double z2 = x[1] - y[1];
  const double m = std::max(std::abs(z1), std::abs(z2));
  if (m == 0.0) fail(ErrorKind::Domain, "kernel evaluated on the diagonal");
  return k.scale * z1 / (m * m * m);
}

// ---------------------------------------------------------------------------

std::string EstimateReport::to_csv() const {
  std::ostringstream os;
  os << "scale,C_size,C_holder\n";
  char buf[128];
  for (const auto& r : per_scale) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", r.scale_exp, r.c_size, r.c_holder);
    os << buf;
  }
  return os.str();
}

EstimateReport verify_standard_estimates(const KernelSpec& k, std::size_t samples, std::uint64_t seed,
                                         double limit) {
  if (samples < 1) fail(ErrorKind::Precondition, "verify_standard_estimates: need at least one sample");
  EstimateReport rep;
  rep.samples = samples;
  rep.per_scale.resize(kScaleCount);
  for (int j = 0; j < kScaleCount; ++j) rep.per_scale[static_cast<std::size_t>(j)].scale_exp = kScaleMin + j;
  Rng rng(seed);
  const int n = k.dim;
  double one_sided = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const int j = kScaleMin + static_cast<int>(s % kScaleCount);
    const double base = std::ldexp(1.0, j);
    // |x - y| in [2^j, 2^{j+1}); every fourth sample sits exactly on 2^j.
    const double dist = (s % 4 == 0) ? base : base * (1.0 + rng.uniform());
    // |h| / |x - y| in (0, 1/2); half the draws crowd the admissible edge.
    double r;
    const double u = rng.uniform();
    if (s % 2 == 0) r = 0.5 * (1.0 - u * u * u) * (1.0 - 1e-12);
    else r = 0.5 * std::ldexp(1.0, -static_cast<int>(30.0 * u));
    Point x, y, h;
    x.dim = y.dim = h.dim = n;
    Point t;
    t.dim = n;
    for (int i = 0; i < n; ++i) {
      x[i] = rng.uniform(-2.0, 2.0) * base;
      t[i] = rng.uniform(-1.0, 1.0) * dist;
      h[i] = rng.uniform(-1.0, 1.0) * r * dist;
    }
    // Pin the l-inf norms: one coordinate of t carries dist, one of h carries r*dist.
    const int ti = static_cast<int>(rng.integer(0, n - 1));
    t[ti] = rng.sign() * dist;
    const int hi = static_cast<int>(rng.integer(0, n - 1));
    h[hi] = rng.sign() * r * dist;
    for (int i = 0; i < n; ++i) y[i] = x[i] - t[i];
    const double d = linf(x, y);
    const double hn = linf(h, Point{{}, n});
    if (!(d > 2.0 * hn) || hn == 0.0) continue;

    const double kxy = eval_kernel(k, x, y);
    Point xh = x, yh = y;
    for (int i = 0; i < n; ++i) {
      xh[i] += h[i];
      yh[i] += h[i];
    }
    const double dn = std::pow(d, n);
    const double size = std::abs(kxy) * dn;
    const double factor = std::pow(d, n + k.gamma) / std::pow(hn, k.gamma);
    const double rx = std::abs(eval_kernel(k, xh, y) - kxy) * factor;
    const double ry = std::abs(eval_kernel(k, x, yh) - kxy) * factor;
    rep.c_size = std::max(rep.c_size, size);
    one_sided = std::max({one_sided, rx, ry});
    rep.c_holder_sum = std::max(rep.c_holder_sum, rx + ry);
    const int slot = std::clamp(static_cast<int>(std::floor(std::log2(d))) - kScaleMin, 0, kScaleCount - 1);
    auto& row = rep.per_scale[static_cast<std::size_t>(slot)];
    row.c_size = std::max(row.c_size, size);
    row.c_holder = std::max({row.c_holder, rx, ry});
  }
  rep.series_bias = k.series_bias();
  rep.c_holder = one_sided + rep.series_bias;
  rep.c_holder_sum += rep.series_bias;
  if (limit > 0.0) rep.violation = rep.c_size > limit || rep.c_holder > limit;
  return rep;
}

KernelSpec normalize(const KernelSpec& k, const EstimateReport& report) {
  const double m = std::max(report.c_size, report.c_holder);
  if (!(m > 0.0) || !std::isfinite(m)) fail(ErrorKind::Domain, "normalize: degenerate (zero) kernel");
  KernelSpec out = k;
  out.scale = k.scale / m;
  out.measured = Constants{report.c_size / m, report.c_holder / m};
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<Point, Point>> box_minus_cube(const Point& lo, const Point& hi, const Point& c, double eps) {
  std::vector<std::pair<Point, Point>> out;
  const int n = lo.dim;
  Point cl = lo, ch = hi;
  for (int i = 0; i < n; ++i)
    if (!(hi[i] > lo[i])) return out;
  if (eps <= 0.0) {
    out.emplace_back(lo, hi);
    return out;
  }
  for (int i = 0; i < n; ++i) {
    const double a = c[i] - eps;
    const double b = c[i] + eps;
    if (std::min(ch[i], a) > cl[i]) {
      Point l = cl, h = ch;
      h[i] = std::min(ch[i], a);
      out.emplace_back(l, h);
    }
    if (ch[i] > std::max(cl[i], b)) {
      Point l = cl, h = ch;
      l[i] = std::max(cl[i], b);
      out.emplace_back(l, h);
    }
    cl[i] = std::max(cl[i], a);
    ch[i] = std::min(ch[i], b);
    if (!(ch[i] > cl[i])) break;
  }
  return out;
}

double box_integral(const KernelSpec& k, const Point& x, const Point& lo, const Point& hi) {
  const int n = k.dim;
  bool inside_closure = true;
  for (int i = 0; i < n; ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) inside_closure = false;
  if (inside_closure) fail(ErrorKind::Domain, "singular configuration: point in the closure of the cell");
  if (n == 1) {
    if (k.strategy == CellStrategy::Exact) return integrate_1d_exact(k, x[0], lo[0], hi[0]);
    return integrate_1d_adaptive(k, x[0], lo[0], hi[0]);
  }
  quad::Options opt;
  opt.rel_tol = k.rel_tol;
  std::vector<std::vector<double>> splits(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) splits[static_cast<std::size_t>(i)].push_back(x[i]);
  const auto fn = [&](const Point& y) { return eval_kernel(k, x, y); };
  const quad::Result r = quad::integrate_box(n, fn, lo, hi, opt, splits);
  if (!r.converged) fail(ErrorKind::Numeric, "cell integral did not converge");
  return r.value;
}

double box_integral_truncated(const KernelSpec& k, const Point& x, const Point& lo, const Point& hi, double eps) {
  if (eps < 0.0) fail(ErrorKind::Precondition, "negative truncation radius");
  double total = 0.0;
  for (const auto& [a, b] : box_minus_cube(lo, hi, x, eps)) total += box_integral(k, x, a, b);
  return total;
}

double cell_integral_truncated(const KernelSpec& k, const Point& x, const DyadicCube& cell, double eps) {
  Point lo, hi;
  lo.dim = hi.dim = cell.dim();
  for (int i = 0; i < cell.dim(); ++i) {
    lo[i] = cell.lower_d(i);
    hi[i] = cell.upper_d(i);
  }
  return box_integral_truncated(k, x, lo, hi, eps);
}

}  // namespace pseudoloc::kernel
