// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "pseudoloc/quadrature.hpp"
#include "pseudoloc/random.hpp"

namespace pseudoloc::ops {

using haar::CompensatedSum;
using haar::haar_amplitude;
using haar::haar_sign;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Point make_point(int dim) {
  Point p;
  p.dim = dim;
  return p;
}

void cube_box(const DyadicCube& c, Point& lo, Point& hi) {
  lo = make_point(c.dim());
  hi = make_point(c.dim());
  for (int i = 0; i < c.dim(); ++i) {
    lo[i] = c.lower_d(i);
    hi[i] = c.upper_d(i);
  }
}

int linf_norm(const IntVec& m, int n) {
  std::int64_t r = 0;
  for (int i = 0; i < n; ++i) r = std::max<std::int64_t>(r, std::abs(m[static_cast<std::size_t>(i)]));
  return static_cast<int>(r);
}

/// Every m in {-M..M}^n with 0 < |m|_inf, in lexicographic order.
std::vector<IntVec> translates(int n, int M) {
  std::vector<IntVec> out;
  IntVec m{};
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = -M;
  while (true) {
    if (linf_norm(m, n) > 0) out.push_back(m);
    int i = 0;
    while (i < n && m[static_cast<std::size_t>(i)] == M) m[static_cast<std::size_t>(i++)] = -M;
    if (i == n) break;
    ++m[static_cast<std::size_t>(i)];
  }
  return out;
}

double cube_dist(const DyadicCube& a, const DyadicCube& b) { return dyadic::linf_dist(a, b).to_double(); }

/// Pieces of h^eta_I: (child box, value). eta == 0 gives the whole cube.
std::vector<std::tuple<Point, Point, double>> haar_pieces(const HaarIndex& h) {
  std::vector<std::tuple<Point, Point, double>> out;
  const double amp = haar_amplitude(h.cube);
  Point lo, hi;
  if (h.eta == 0) {
    cube_box(h.cube, lo, hi);
    out.emplace_back(lo, hi, amp);
    return out;
  }
  for (const auto& c : h.cube.children()) {
    cube_box(c, lo, hi);
    out.emplace_back(lo, hi, amp * haar_sign(h.eta, c.child_bits()));
  }
  return out;
}

/// Sorted distinct faces of the pieces of h along each axis.
std::vector<std::vector<double>> haar_faces(const HaarIndex& h) {
  const int n = h.cube.dim();
  std::vector<std::vector<double>> f(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& v = f[static_cast<std::size_t>(i)];
    v = {h.cube.lower_d(i), h.cube.upper_d(i)};
    if (h.eta != 0) v.push_back(h.cube.center_d(i));
    std::sort(v.begin(), v.end());
  }
  return f;
}

/// Points strictly inside (a, b) from the given candidates, sorted and unique.
std::vector<double> inside(const std::vector<double>& cand, double a, double b) {
  std::vector<double> out;
  for (double z : cand)
    if (z > a && z < b) out.push_back(z);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Kink candidates of T_eps applied to a function with the given faces.
std::vector<std::vector<double>> shifted_faces(const std::vector<std::vector<double>>& faces, double eps) {
  std::vector<std::vector<double>> out(faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i)
    for (double z : faces[i]) {
      out[i].push_back(z);
      if (eps > 0.0) {
        out[i].push_back(z - eps);
        out[i].push_back(z + eps);
      }
    }
  return out;
}

/// Integral of fn over the box with the given per-axis split candidates.
quad::Result integrate_on(int n, const std::function<double(const Point&)>& fn, const Point& lo, const Point& hi,
                          const std::vector<std::vector<double>>& cand, const std::vector<double>& singular,
                          double rel_tol) {
  quad::Options opt;
  opt.rel_tol = rel_tol;
  if (n == 1) {
    const auto sp = inside(cand.empty() ? std::vector<double>{} : cand[0], lo[0], hi[0]);
    std::vector<double> sg;
    for (double z : singular)
      if (z >= lo[0] && z <= hi[0]) sg.push_back(z);
    std::sort(sg.begin(), sg.end());
    sg.erase(std::unique(sg.begin(), sg.end()), sg.end());
    auto f1 = [&](double t) {
      Point p = make_point(1);
      p[0] = t;
      return fn(p);
    };
    return quad::integrate(f1, lo[0], hi[0], opt, sp, sg);
  }
  std::vector<std::vector<double>> sp(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    sp[static_cast<std::size_t>(i)] =
        inside(static_cast<std::size_t>(i) < cand.size() ? cand[static_cast<std::size_t>(i)] : std::vector<double>{},
               lo[i], hi[i]);
  opt.max_panels = 400000;
  return quad::integrate_box(n, fn, lo, hi, opt, sp);
}

/// Writes `value` times the indicator of `cube` into a step function on a finer mesh.
void add_indicator(StepFunction& g, const DyadicCube& cube, double value) {
  const int n = g.dim();
  const int shift = g.level() - cube.level();
  if (shift < 0) fail(ErrorKind::Invariant, "indicator coarser than mesh expected");
  const std::int64_t w = std::int64_t{1} << shift;
  IntVec base{}, off{};
  for (int i = 0; i < n; ++i) base[static_cast<std::size_t>(i)] = cube.index(i) * w;
  while (true) {
    IntVec c{};
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = base[static_cast<std::size_t>(i)] + off[static_cast<std::size_t>(i)];
    g.ref(c) += value;
    int i = 0;
    while (i < n && off[static_cast<std::size_t>(i)] == w - 1) off[static_cast<std::size_t>(i++)] = 0;
    if (i == n) break;
    ++off[static_cast<std::size_t>(i)];
  }
}

/// Step function holding sum_c w_c h^0_c; zero entries are skipped.
StepFunction indicator_sum(int n, const std::map<DyadicCube, double>& weights) {
  int level = std::numeric_limits<int>::min();
  bool any = false;
  for (const auto& [c, w] : weights)
    if (w != 0.0) {
      level = std::max(level, c.level());
      any = true;
    }
  if (!any) return StepFunction::zero(n, 0);
  IntVec lo{}, hi{};
  bool first = true;
  for (const auto& [c, w] : weights) {
    if (w == 0.0) continue;
    const std::int64_t s = std::int64_t{1} << (level - c.level());
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const std::int64_t a = c.index(i) * s, b = (c.index(i) + 1) * s;
      if (first || a < lo[ii]) lo[ii] = a;
      if (first || b > hi[ii]) hi[ii] = b;
    }
    first = false;
  }
  IntVec ext{};
  for (int i = 0; i < n; ++i) ext[static_cast<std::size_t>(i)] = hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
  StepFunction g(n, level, lo, ext);
  for (const auto& [c, w] : weights)
    if (w != 0.0) add_indicator(g, c, w * haar_amplitude(c));
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------

double TruncationBudget::tail_bound(int n, double gamma) const {
  // Shells |m|_inf = r hold (2r+1)^n - (2r-1)^n translates.
  const double a = n + gamma;
  double sum = 0.0;
  const int cap = M + 200000;
  for (int r = cap; r > M; --r) sum += (std::pow(2.0 * r + 1, n) - std::pow(2.0 * r - 1, n)) * std::pow(1.0 + r, -a);
  // Shells beyond the cap: count <= 2n (2r+1)^{n-1} <= 2n 3^{n-1} r^{n-1}.
  sum += 2.0 * n * std::pow(3.0, n - 1) * std::pow(static_cast<double>(cap), -gamma) / gamma;
  return c_emp * sum;
}

kernel::Constants kernel_constants(const KernelSpec& k) {
  if (k.measured) return *k.measured;
  static std::mutex mu;
  static std::map<std::tuple<std::string, double, double, int, int>, kernel::Constants> cache;
  const auto key = std::make_tuple(k.name(), k.gamma, k.scale, k.terms, k.dim);
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const auto c = kernel::verify_standard_estimates(k, 4096, 1).constants();
  std::lock_guard<std::mutex> lock(mu);
  cache[key] = c;
  return c;
}

// ---------------------------------------------------------------------------

TEvaluator::TEvaluator(const KernelSpec& k, const StepFunction& g) : k_(k), dim_(g.dim()) {
  if (g.dim() != k.dim) fail(ErrorKind::Precondition, "kernel and function dimensions differ");
  const auto& v = g.values();
  faces_.assign(static_cast<std::size_t>(dim_), {});
  const double side = std::ldexp(1.0, -g.level());
  if (dim_ == 1) {
    std::size_t i = 0;
    while (i < v.size()) {
      if (v[i] == 0.0) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
      Piece p{make_point(1), make_point(1), v[i]};
      p.lo[0] = g.cell(i).lower_d(0);
      p.hi[0] = g.cell(j).upper_d(0);
      pieces_.push_back(p);
      l1_ += std::abs(v[i]) * (p.hi[0] - p.lo[0]);
      i = j + 1;
    }
  } else {
    for (std::size_t f = 0; f < v.size(); ++f) {
      if (v[f] == 0.0) continue;
      Piece p{make_point(dim_), make_point(dim_), v[f]};
      cube_box(g.cell(f), p.lo, p.hi);
      pieces_.push_back(p);
      l1_ += std::abs(v[f]) * std::pow(side, dim_);
    }
  }
  for (const auto& p : pieces_)
    for (int i = 0; i < dim_; ++i) {
      faces_[static_cast<std::size_t>(i)].push_back(p.lo[i]);
      faces_[static_cast<std::size_t>(i)].push_back(p.hi[i]);
    }
  for (auto& f : faces_) {
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
  }
}

bool TEvaluator::on_support(const Point& x) const {
  for (const auto& p : pieces_) {
    bool in = true;
    for (int i = 0; i < dim_ && in; ++i) in = x[i] >= p.lo[i] && x[i] <= p.hi[i];
    if (in) return true;
  }
  return false;
}

bool TEvaluator::support_hull(Point& lo, Point& hi) const {
  if (pieces_.empty()) return false;
  lo = pieces_.front().lo;
  hi = pieces_.front().hi;
  for (const auto& p : pieces_)
    for (int i = 0; i < dim_; ++i) {
      lo[i] = std::min(lo[i], p.lo[i]);
      hi[i] = std::max(hi[i], p.hi[i]);
    }
  return true;
}

double TEvaluator::apply(const Point& x) const {
  if (on_support(x)) fail(ErrorKind::Precondition, "point lies on the support of the function");
  CompensatedSum s;
  for (const auto& p : pieces_) s.add(p.value * kernel::box_integral(k_, x, p.lo, p.hi));
  return s.value();
}

double TEvaluator::apply_truncated(const Point& x, double eps) const {
  if (eps < 0.0) fail(ErrorKind::Precondition, "negative truncation radius");
  if (eps == 0.0) return apply(x);
  CompensatedSum s;
  for (const auto& p : pieces_) s.add(p.value * kernel::box_integral_truncated(k_, x, p.lo, p.hi, eps));
  return s.value();
}

double TEvaluator::apply_pv(const Point& x) const {
  if (dim_ != 1 || k_.strategy != kernel::CellStrategy::Exact)
    fail(ErrorKind::Precondition, "principal value needs a one-dimensional closed-form kernel");
  CompensatedSum s;
  for (const auto& p : pieces_) {
    const double a = p.lo[0], b = p.hi[0];
    if (x[0] < a || x[0] > b) {
      s.add(p.value * kernel::box_integral(k_, x, p.lo, p.hi));
      continue;
    }
    if (x[0] == a || x[0] == b) fail(ErrorKind::Domain, "principal value diverges at a jump");
    // Odd kernel: the symmetric hole contributes nothing, any radius inside the run is exact.
    const double r = 0.5 * std::min(x[0] - a, b - x[0]);
    s.add(p.value * kernel::box_integral_truncated(k_, x, p.lo, p.hi, r));
  }
  return s.value();
}

double apply_T_offsupport(const KernelSpec& k, const FiniteHaarExpansion& f, const Point& x) {
  if (f.empty()) return 0.0;
  return TEvaluator(k, haar::synthesize(f)).apply(x);
}

double apply_T_offsupport(const KernelSpec& k, const StepFunction& g, const Point& x) {
  return TEvaluator(k, g).apply(x);
}

double apply_T_truncated(const KernelSpec& k, const StepFunction& g, double eps, const Point& x) {
  if (!(eps > 0.0)) fail(ErrorKind::Precondition, "truncation radius must be positive");
  return TEvaluator(k, g).apply_truncated(x, eps);
}

double apply_T_haar(const KernelSpec& k, const HaarIndex& h, double eps, const Point& x) {
  CompensatedSum s;
  for (const auto& [lo, hi, v] : haar_pieces(h)) {
    const double part =
        eps > 0.0 ? kernel::box_integral_truncated(k, x, lo, hi, eps) : kernel::box_integral(k, x, lo, hi);
    s.add(v * part);
  }
  return s.value();
}

double haar_pairing(const KernelSpec& k, const HaarIndex& J, const HaarIndex& I, double eps, double rel_tol) {
  const int n = k.dim;
  if (J.cube.dim() != n || I.cube.dim() != n) fail(ErrorKind::Precondition, "pairing dimension mismatch");
  if (eps < 0.0) fail(ErrorKind::Precondition, "negative truncation radius");
  if (eps == 0.0 && J.cube.intersects(I.cube))
    fail(ErrorKind::Precondition, "untruncated pairing of overlapping cubes");
  const auto cand = shifted_faces(haar_faces(I), eps);
  std::vector<double> singular;
  if (eps == 0.0 && n == 1) singular = haar_faces(I)[0];
  const auto inner = [&](const Point& x) { return apply_T_haar(k, I, eps, x); };
  CompensatedSum total;
  for (const auto& [lo, hi, v] : haar_pieces(J)) {
    const auto r = integrate_on(n, inner, lo, hi, cand, singular, rel_tol);
    if (!r.converged) fail(ErrorKind::Numeric, "pairing quadrature did not converge");
    total.add(v * r.value);
  }
  return total.value();
}

double pairing_bound(const kernel::Constants& c, double gamma, const DyadicCube& J, const DyadicCube& I) {
  const int n = I.dim();
  const double l = I.side_d();
  const double d = cube_dist(J, I);
  if (!(d > 0.5 * l)) return kInf;
  return c.c_holder * std::pow(0.5 * l, gamma) * std::sqrt(I.measure_d() * J.measure_d()) /
         std::pow(d + 0.5 * l, n + gamma);
}

// ---------------------------------------------------------------------------

PhiTildeResult phi_tilde_apply(const KernelSpec& k, const FiniteHaarExpansion& f, int s, const TruncationBudget& b) {
  if (b.M < 1) fail(ErrorKind::Precondition, "translate radius M must be at least 1");
  if (s < 0) fail(ErrorKind::Precondition, "s must be non-negative");
  const int n = f.dim();
  PhiTildeResult out;
  out.M = b.M;
  out.tail_bound = b.tail_bound(n, k.gamma);
  std::map<DyadicCube, double> w;
  const auto ms = translates(n, b.M);
  for (const auto& [h, a] : f) {
    const DyadicCube P = h.cube.ancestor(s);
    for (const auto& m : ms) {
      const DyadicCube J = P.translate(m);
      const double lam = haar_pairing(k, HaarIndex{J, 0}, h, 0.0, b.quad_tol);
      ++out.pairings;
      w[J] += a * lam;
      w[P] -= a * lam;
    }
  }
  out.value = indicator_sum(n, w);
  return out;
}

double phi_tilde_tail_at(const KernelSpec& k, const FiniteHaarExpansion& f, int s, int M, const Point& x) {
  const auto c = kernel_constants(k);
  double tail = 0.0;
  for (const auto& [h, a] : f) {
    const DyadicCube P = h.cube.ancestor(s);
    const DyadicCube Q = dyadic::cube_containing(x, P.level());
    IntVec m{};
    for (int i = 0; i < f.dim(); ++i) m[static_cast<std::size_t>(i)] = Q.index(i) - P.index(i);
    if (linf_norm(m, f.dim()) <= M) continue;
    tail += std::abs(a) * pairing_bound(c, k.gamma, Q, h.cube) * haar_amplitude(Q);
  }
  return tail;
}

// ---------------------------------------------------------------------------

PsiEvaluator::PsiEvaluator(const KernelSpec& k, const FiniteHaarExpansion& f, int s, double tol)
    : k_(k), dim_(f.dim()), s_(s), tol_(tol) {
  if (s < 0) fail(ErrorKind::Precondition, "s must be non-negative");
  std::map<int, FiniteHaarExpansion> by_level;
  for (const auto& [h, a] : f) {
    auto it = by_level.try_emplace(h.cube.level(), FiniteHaarExpansion(f.dim())).first;
    it->second.add(h, a);
  }
  for (const auto& [j, g] : by_level) {
    Level L;
    L.k = j - s;
    L.eps = std::ldexp(4.0, -L.k);
    L.t = std::make_unique<TEvaluator>(k, haar::synthesize(g));
    levels_.push_back(std::move(L));
  }
}

double PsiEvaluator::cube_average(std::size_t slot, const DyadicCube& q) const {
  const auto key = std::make_pair(slot, q);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const Level& L = levels_[slot];
  Point lo, hi;
  cube_box(q, lo, hi);
  const auto cand = shifted_faces(L.t->faces(), L.eps);
  const auto fn = [&](const Point& y) { return L.t->apply_truncated(y, L.eps); };
  const auto r = integrate_on(dim_, fn, lo, hi, cand, {}, tol_);
  if (!r.converged) fail(ErrorKind::Numeric, "cube average did not converge");
  const double avg = r.value / q.measure_d();
  std::lock_guard<std::mutex> lock(mu_);
  cache_.emplace(key, avg);
  return avg;
}

double PsiEvaluator::value(const Point& x) const {
  CompensatedSum s;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const Level& L = levels_[i];
    s.add(L.t->apply_truncated(x, L.eps));
    s.add(-cube_average(i, dyadic::cube_containing(x, L.k)));
  }
  return s.value();
}

std::vector<std::vector<double>> PsiEvaluator::breakpoints(const Point& lo, const Point& hi) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(dim_));
  for (const auto& L : levels_) {
    const auto sf = shifted_faces(L.t->faces(), L.eps);
    const double side = std::ldexp(1.0, -L.k);
    for (int i = 0; i < dim_; ++i) {
      auto& o = out[static_cast<std::size_t>(i)];
      o.insert(o.end(), sf[static_cast<std::size_t>(i)].begin(), sf[static_cast<std::size_t>(i)].end());
      // Jumps of the level-k averages.
      for (double z = std::ceil(lo[i] / side) * side; z < hi[i]; z += side) o.push_back(z);
    }
  }
  for (int i = 0; i < dim_; ++i) out[static_cast<std::size_t>(i)] = inside(out[static_cast<std::size_t>(i)], lo[i], hi[i]);
  return out;
}

double psi_apply(const KernelSpec& k, const FiniteHaarExpansion& f, int s, const Point& x) {
  return PsiEvaluator(k, f, s).value(x);
}

const char* to_string(PsiClass c) {
  switch (c) {
    case PsiClass::Haar11: return "Haar11";
    case PsiClass::Haar01: return "Haar01";
    case PsiClass::Haar10: return "Haar10";
  }
  return "?";
}

namespace {

int upward_levels(const DyadicCube& L, int s, int wanted) {
  return std::max(0, std::min(wanted, L.level() - s - dyadic::level_window().min_level));
}

/// h^0_L truncated to its first `levels` cancellative ancestors.
FiniteHaarExpansion indicator_expansion(const DyadicCube& L, int levels) {
  const int n = L.dim();
  FiniteHaarExpansion f(n);
  for (int j = 1; j <= levels; ++j) {
    const DyadicCube J = L.ancestor(j);
    const std::uint32_t bits = L.ancestor(j - 1).child_bits();
    for (std::uint32_t eta = 1; eta < (1u << n); ++eta)
      f.add(HaarIndex{J, eta}, haar_sign(eta, bits) * haar_amplitude(J) / haar_amplitude(L));
  }
  return f;
}

}  // namespace

PsiCoeff psi_haar_coeff(const KernelSpec& k, int s, const HaarIndex& K, const HaarIndex& L, const TruncationBudget& b) {
  if (K.cube.level() != L.cube.level()) fail(ErrorKind::Precondition, "cubes of different size");
  if (K.eta == 0 && L.eta == 0) fail(ErrorKind::Precondition, "both signatures are 0");
  if (s < 0) fail(ErrorKind::Precondition, "s must be non-negative");
  const int n = k.dim;
  PsiCoeff out;
  const double eps_of_L = std::ldexp(4.0, s) * L.cube.side_d();
  if (K.eta != 0 && L.eta != 0) {
    out.cls = PsiClass::Haar11;
    out.value = haar_pairing(k, K, L, eps_of_L, b.quad_tol);
    return out;
  }
  if (K.eta == 0) {
    out.cls = PsiClass::Haar01;
    const double a = haar_pairing(k, HaarIndex{K.cube, 0}, L, eps_of_L, b.quad_tol);
    const double c = haar_pairing(k, HaarIndex{K.cube.ancestor(s), 0}, L, eps_of_L, b.quad_tol);
    out.value = a - std::exp2(-0.5 * n * s) * c;
    return out;
  }
  out.cls = PsiClass::Haar10;
  const int levels = upward_levels(L.cube, s, b.levels);
  CompensatedSum sum;
  for (const auto& [J, w] : indicator_expansion(L.cube, levels)) {
    const double eps = std::ldexp(4.0, s) * J.cube.side_d();
    sum.add(w * haar_pairing(k, K, J, eps, b.quad_tol));
  }
  out.value = sum.value();
  const double c_size = kernel_constants(k).c_size;
  out.tail = n == 1 ? c_size * std::exp2(-1.0 - s - 2.0 * levels) / 3.0
                    : c_size * std::pow(std::ldexp(4.0, s), -n) * std::exp2(-1.0 * n * levels);
  return out;
}

double psi_coeff_direct(const KernelSpec& k, int s, const HaarIndex& K, const HaarIndex& L, const TruncationBudget& b) {
  if (K.cube.level() != L.cube.level()) fail(ErrorKind::Precondition, "cubes of different size");
  FiniteHaarExpansion f(k.dim);
  if (L.eta != 0)
    f.add(L, 1.0);
  else
    f = indicator_expansion(L.cube, upward_levels(L.cube, s, b.levels));
  const PsiEvaluator psi(k, f, s, b.quad_tol);
  const auto fn = [&](const Point& x) { return psi.value(x); };
  CompensatedSum total;
  for (const auto& [lo, hi, v] : haar_pieces(K)) {
    const auto r = integrate_on(k.dim, fn, lo, hi, psi.breakpoints(lo, hi), {}, b.quad_tol);
    if (!r.converged) fail(ErrorKind::Numeric, "direct coefficient quadrature did not converge");
    total.add(v * r.value);
  }
  return total.value();
}

// ---------------------------------------------------------------------------

FiniteHaarExpansion lambda_core(const KernelSpec& k, int s, const IntVec& m, const FiniteHaarExpansion& f,
                                double rel_tol) {
  if (linf_norm(m, f.dim()) == 0) fail(ErrorKind::Precondition, "Lambda needs a nonzero translate");
  FiniteHaarExpansion out(f.dim());
  for (const auto& [h, a] : f) {
    const DyadicCube P = h.cube.ancestor(s);
    const double lam = haar_pairing(k, HaarIndex{P.translate(m), 0}, h, 0.0, rel_tol);
    out.add(HaarIndex{P, h.eta}, a * lam);
  }
  return out;
}

namespace {

StepFunction apply_u(const IntVec& m, const FiniteHaarExpansion& f) {
  std::map<DyadicCube, double> w;
  if (linf_norm(m, f.dim()) == 0) return StepFunction::zero(f.dim(), 0);
  for (const auto& [h, a] : f) {
    w[h.cube.translate(m)] += a;
    w[h.cube] -= a;
  }
  return indicator_sum(f.dim(), w);
}

}  // namespace

ShiftResult shift_apply(const ShiftSpec& spec, const FiniteHaarExpansion& f, const TruncationBudget& b) {
  const int n = f.dim();
  ShiftResult out;
  switch (spec.kind) {
    case ShiftKind::U:
      out.step = apply_u(spec.m, f);
      break;
    case ShiftKind::T: {
      if (spec.zeta == 0) fail(ErrorKind::Precondition, "target signature must be cancellative");
      FiniteHaarExpansion e(n);
      for (const auto& [h, a] : f) e.add(HaarIndex{h.cube.translate(spec.m), spec.zeta}, a);
      out.expansion = std::move(e);
      break;
    }
    case ShiftKind::Theta: {
      if (!spec.kernel) fail(ErrorKind::Precondition, "Theta needs a kernel");
      if (linf_norm(spec.m, n) == 0) fail(ErrorKind::Precondition, "Theta needs a nonzero translate");
      FiniteHaarExpansion e(n);
      for (const auto& [h, a] : f)
        e.add(h, a * haar_pairing(*spec.kernel, HaarIndex{h.cube.translate(spec.m), spec.zeta}, h, 0.0, b.quad_tol));
      out.expansion = std::move(e);
      break;
    }
    case ShiftKind::Lambda: {
      if (!spec.kernel) fail(ErrorKind::Precondition, "Lambda needs a kernel");
      auto core = lambda_core(*spec.kernel, spec.s, spec.m, f, b.quad_tol);
      out.step = apply_u(spec.m, core);
      out.expansion = std::move(core);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

/// Envelope of sup_L |<h_{L+m}, Psi_s h_L>| for |m| beyond the truncation radius (one dimension).
double figiel_envelope(PsiClass cls, const kernel::Constants& c, double gamma, int s, double m) {
  const double hold = c.c_holder * std::pow(2.0, -gamma);
  switch (cls) {
    case PsiClass::Haar11:
      return hold * std::pow(m - 0.5, -1.0 - gamma);
    case PsiClass::Haar01:
      return hold * (std::pow(m - 0.5, -1.0 - gamma) + std::pow(m - std::ldexp(1.0, s) + 0.5, -1.0 - gamma));
    case PsiClass::Haar10: {
      // Ancestors small against m are far away and untruncated; the rest are Lipschitz-small.
      const double near = std::log2(m) * hold * std::pow(2.0 / m, 1.0 + gamma);
      const double far = c.c_size * std::exp2(-1.0 - s) * (4.0 / 3.0) * std::pow(std::ldexp(8.0, s) / m, 2.0);
      return near + far;
    }
  }
  return kInf;
}

}  // namespace

namespace {

/// Below this |m| every coefficient of the class vanishes: the truncation covers both supports.
int figiel_zero_radius(PsiClass cls, int s) {
  switch (cls) {
    case PsiClass::Haar11: return (4 << s) - 1;
    case PsiClass::Haar01: return 3 << s;
    case PsiClass::Haar10: return 2 * ((4 << s) - 1);
  }
  return 0;
}

/// From this |m| on the untruncated envelope applies.
int figiel_envelope_from(PsiClass cls, int s) {
  switch (cls) {
    case PsiClass::Haar11: return (4 << s) + 2;
    case PsiClass::Haar01: return (5 << s) + 2;
    case PsiClass::Haar10: return 1;
  }
  return 0;
}

/// Size-only bound for any m: |T_eps h| <= C_size |h|_1 / eps^n.
double figiel_crude(PsiClass cls, const kernel::Constants& c, int s) {
  const double base = c.c_size / std::ldexp(4.0, s);
  return cls == PsiClass::Haar01 ? 2.0 * base : base;
}

double figiel_bound(PsiClass cls, const kernel::Constants& c, double gamma, int s, double m) {
  if (m <= figiel_zero_radius(cls, s)) return 0.0;
  const double crude = figiel_crude(cls, c, s);
  if (m < figiel_envelope_from(cls, s)) return crude;
  return std::min(crude, figiel_envelope(cls, c, gamma, s, m));
}

}  // namespace

std::vector<FigielRow> figiel_condition_sum(const KernelSpec& k, int s, const TruncationBudget& b,
                                            const std::vector<DyadicCube>& sample) {
  if (k.dim != 1) fail(ErrorKind::Precondition, "Figiel sums are implemented in one dimension");
  if (sample.empty()) fail(ErrorKind::Precondition, "empty sample of base cubes");
  if (b.M < 1) fail(ErrorKind::Precondition, "translate radius M must be at least 1");
  const int M = b.M;
  const auto c = kernel_constants(k);
  std::vector<FigielRow> rows;
  for (PsiClass cls : {PsiClass::Haar11, PsiClass::Haar01, PsiClass::Haar10}) {
    const std::uint32_t theta = cls == PsiClass::Haar01 ? 0 : 1;
    const std::uint32_t zeta = cls == PsiClass::Haar10 ? 0 : 1;
    FigielRow row;
    row.cls = cls;
    row.M = M;
    row.predicted = (1.0 + s) * std::exp2(-s * k.gamma);
    CompensatedSum sum;
    const int zero = figiel_zero_radius(cls, s);
    for (int m = -M; m <= M; ++m) {
      if (std::abs(m) <= zero) continue;
      double sup = 0.0;
      for (const auto& L : sample) {
        const HaarIndex Kc{L.translate(IntVec{m, 0, 0}), theta};
        sup = std::max(sup, std::abs(psi_haar_coeff(k, s, Kc, HaarIndex{L, zeta}, b).value));
      }
      sum.add(sup * std::log(2.0 + std::abs(m)));
    }
    row.sum = sum.value();
    // |m| > M: term by term up to the envelope, then doubling blocks bounded by their first term.
    double tail = 0.0;
    const int from = std::max(M + 1, figiel_envelope_from(cls, s));
    for (int m = M + 1; m < from; ++m) tail += std::log(2.0 + m) * figiel_bound(cls, c, k.gamma, s, m);
    for (double a = from; a < 1e300; a *= 2.0) {
      const double blk = a * std::log(2.0 + 2.0 * a) * figiel_bound(cls, c, k.gamma, s, a);
      tail += blk;
      if (blk <= 1e-18 * (tail + row.sum)) break;
    }
    row.tail = 2.0 * tail;
    if (cls == PsiClass::Haar10) {
      // Truncated upward sums, per retained m.
      const int levels = upward_levels(sample.front(), s, b.levels);
      row.tail += (2.0 * M + 1) * std::log(2.0 + M) * c.c_size * std::exp2(-1.0 - s - 2.0 * levels) / 3.0;
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<HaarIndex> haar_basis(const DyadicCube& root, int lo, int hi) {
  if (lo < root.level() || hi < lo) fail(ErrorKind::Precondition, "basis levels must lie below the root");
  const int n = root.dim();
  std::vector<HaarIndex> out;
  std::vector<DyadicCube> layer;
  // Descend to level lo.
  layer.push_back(root);
  for (int l = root.level(); l < lo; ++l) {
    std::vector<DyadicCube> next;
    for (const auto& c : layer)
      for (const auto& ch : c.children()) next.push_back(ch);
    layer = std::move(next);
  }
  for (int l = lo; l <= hi; ++l) {
    for (const auto& c : layer)
      for (std::uint32_t eta = 1; eta < (1u << n); ++eta) out.push_back(HaarIndex{c, eta});
    if (l == hi) break;
    std::vector<DyadicCube> next;
    for (const auto& c : layer)
      for (const auto& ch : c.children()) next.push_back(ch);
    layer = std::move(next);
  }
  return out;
}

namespace {

/// Uniform mesh of level-`level` cells covering a list of cubes.
struct Mesh {
  int n = 1;
  int level = 0;
  IntVec lo{};
  IntVec ext{};
  std::size_t count = 0;
  double measure = 1.0;
};

Mesh mesh_for(int n, const std::vector<DyadicCube>& cubes, int level) {
  Mesh m;
  m.n = n;
  m.level = level;
  IntVec hi{};
  for (int i = 0; i < n; ++i) {
    m.lo[static_cast<std::size_t>(i)] = std::numeric_limits<std::int64_t>::max();
    hi[static_cast<std::size_t>(i)] = std::numeric_limits<std::int64_t>::min();
  }
  for (const auto& c : cubes) {
    const std::int64_t w = std::int64_t{1} << (level - c.level());
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
      m.lo[i] = std::min(m.lo[i], c.index()[i] * w);
      hi[i] = std::max(hi[i], (c.index()[i] + 1) * w - 1);
    }
  }
  m.count = 1;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    m.ext[i] = hi[i] - m.lo[i] + 1;
    m.count *= static_cast<std::size_t>(m.ext[i]);
  }
  m.measure = std::ldexp(1.0, -n * level);
  return m;
}

/// Appends the mesh cells of `cube` with a common value.
void push_cells(const Mesh& m, const DyadicCube& cube, double value, SparseColumn& col) {
  const std::int64_t w = std::int64_t{1} << (m.level - cube.level());
  IntVec first{};
  for (std::size_t i = 0; i < static_cast<std::size_t>(m.n); ++i) first[i] = cube.index()[i] * w - m.lo[i];
  std::array<std::int64_t, kMaxDim> off{};
  const std::size_t cells = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(w), m.n)));
  for (std::size_t t = 0; t < cells; ++t) {
    std::size_t flat = 0, stride = 1;
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.n); ++i) {
      flat += static_cast<std::size_t>(first[i] + off[i]) * stride;
      stride *= static_cast<std::size_t>(m.ext[i]);
    }
    col.idx.push_back(flat);
    col.val.push_back(value);
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.n); ++i) {
      if (++off[i] < w) break;
      off[i] = 0;
    }
  }
}

SparseColumn haar_column(const Mesh& m, const HaarIndex& h) {
  SparseColumn col;
  for (const auto& c : h.cube.children())
    push_cells(m, c, haar_amplitude(h.cube) * haar_sign(h.eta, c.child_bits()), col);
  return col;
}

int mesh_level(const std::vector<HaarIndex>& basis) {
  int level = basis.front().cube.level() + 1;
  for (const auto& h : basis) level = std::max(level, h.cube.level() + 1);
  return level;
}

}  // namespace

std::vector<double> DiscreteOperator::apply(const std::vector<double>& c) const {
  std::vector<double> out(out_weights.size(), 0.0);
  for (std::size_t j = 0; j < out_columns.size(); ++j) {
    if (c[j] == 0.0) continue;
    const auto& col = out_columns[j];
    for (std::size_t q = 0; q < col.idx.size(); ++q) out[col.idx[q]] += c[j] * col.val[q];
  }
  return out;
}

DiscreteOperator discretize_identity(const std::vector<HaarIndex>& basis) {
  if (basis.empty()) fail(ErrorKind::Precondition, "empty basis");
  const int n = basis.front().cube.dim();
  std::vector<DyadicCube> cubes;
  for (const auto& h : basis) cubes.push_back(h.cube);
  const auto mesh = mesh_for(n, cubes, mesh_level(basis));
  DiscreteOperator op;
  op.name = "identity";
  op.basis = basis;
  op.in_weights.assign(mesh.count, mesh.measure);
  for (const auto& h : basis) op.in_columns.push_back(haar_column(mesh, h));
  op.out_weights = op.in_weights;
  op.out_columns = op.in_columns;
  return op;
}

DiscreteOperator discretize_u(const IntVec& m, const std::vector<HaarIndex>& basis) {
  auto op = discretize_identity(basis);
  op.name = "U";
  const int n = basis.front().cube.dim();
  std::vector<DyadicCube> cubes;
  for (const auto& h : basis) {
    cubes.push_back(h.cube);
    cubes.push_back(h.cube.translate(m));
  }
  const auto mesh = mesh_for(n, cubes, mesh_level(basis));
  op.out_weights.assign(mesh.count, mesh.measure);
  op.out_columns.assign(basis.size(), SparseColumn{});
  if (linf_norm(m, n) == 0) return op;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const auto& c = basis[j].cube;
    push_cells(mesh, c.translate(m), haar_amplitude(c), op.out_columns[j]);
    push_cells(mesh, c, -haar_amplitude(c), op.out_columns[j]);
  }
  return op;
}

DiscreteOperator discretize_psi(const KernelSpec& k, int s, const std::vector<HaarIndex>& basis, double R) {
  if (k.dim != 1) fail(ErrorKind::Precondition, "Psi discretisation is one-dimensional");
  auto op = discretize_identity(basis);
  op.name = "Psi";
  double lo = kInf, hi = -kInf, coarse = 0.0, fine = kInf;
  for (const auto& h : basis) {
    lo = std::min(lo, h.cube.lower_d(0));
    hi = std::max(hi, h.cube.upper_d(0));
    coarse = std::max(coarse, h.cube.side_d());
    fine = std::min(fine, h.cube.side_d());
  }
  const double c = 0.5 * (lo + hi);
  if (R <= 0.0) R = 16.0 * std::ldexp(4.0, s) * coarse + 0.5 * (hi - lo);
  std::vector<std::unique_ptr<PsiEvaluator>> ev;
  std::vector<double> cuts = {c - R, c + R};
  for (const auto& h : basis) {
    FiniteHaarExpansion f(1);
    f.add(h, 1.0);
    ev.push_back(std::make_unique<PsiEvaluator>(k, f, s));
    Point a = make_point(1), b = make_point(1);
    a[0] = c - R;
    b[0] = c + R;
    const auto bp = ev.back()->breakpoints(a, b);
    cuts.insert(cuts.end(), bp[0].begin(), bp[0].end());
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  // Panels no longer than a quarter of their distance to the basis hull.
  std::vector<double> nodes, weights;
  const auto gx = quad::gauss_nodes();
  const auto gw = quad::gauss_weights();
  const auto panel = [&](double a, double b) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t q = 0; q < gx.size(); ++q) {
      nodes.push_back(mid + half * gx[q]);
      weights.push_back(half * gw[q]);
    }
  };
  const double hmin = 0.5 * fine;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (a >= hi) {
      for (double x = a; x < b;) {
        double e = std::min(b, x + std::max(hmin, 0.25 * (x - hi)));
        if (b - e < 1e-9 * (b - a)) e = b;
        panel(x, e);
        x = e;
      }
    } else if (b <= lo) {
      for (double x = b; x > a;) {
        double e = std::max(a, x - std::max(hmin, 0.25 * (lo - x)));
        if (e - a < 1e-9 * (b - a)) e = a;
        panel(e, x);
        x = e;
      }
    } else {
      const int cnt = std::max(1, static_cast<int>(std::ceil((b - a) / hmin)));
      for (int j = 0; j < cnt; ++j) panel(a + (b - a) * j / cnt, a + (b - a) * (j + 1) / cnt);
    }
  }
  op.out_weights = weights;
  op.out_columns.assign(basis.size(), SparseColumn{});
  for (std::size_t j = 0; j < basis.size(); ++j) {
    auto& col = op.out_columns[j];
    col.idx.resize(nodes.size());
    std::iota(col.idx.begin(), col.idx.end(), std::size_t{0});
    col.val.resize(nodes.size());
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      Point x = make_point(1);
      x[0] = nodes[q];
      col.val[q] = ev[j]->value(x);
    }
  }
  return op;
}

namespace {

double pow_abs(double x, double p) { return p == 2.0 ? x * x : std::pow(std::abs(x), p); }

double power_sum(const std::vector<double>& v, const std::vector<double>& w, double p) {
  CompensatedSum s;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) s.add(w[i] * pow_abs(v[i], p));
  return s.value();
}

std::vector<double> combine(const std::vector<SparseColumn>& cols, std::size_t size, const std::vector<double>& c) {
  std::vector<double> out(size, 0.0);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (c[j] == 0.0) continue;
    for (std::size_t q = 0; q < cols[j].idx.size(); ++q) out[cols[j].idx[q]] += c[j] * cols[j].val[q];
  }
  return out;
}

/// Change of sum w |v|^p when column `col` is added with factor d.
double power_delta(const SparseColumn& col, const std::vector<double>& v, const std::vector<double>& w, double d,
                   double p) {
  double s = 0.0;
  for (std::size_t q = 0; q < col.idx.size(); ++q) {
    const std::size_t i = col.idx[q];
    s += w[i] * (pow_abs(v[i] + d * col.val[q], p) - pow_abs(v[i], p));
  }
  return s;
}

}  // namespace

OpNormResult opnorm_lower_bound(const DiscreteOperator& op, double p, int trials, std::uint64_t seed) {
  if (trials < 1) fail(ErrorKind::Precondition, "need at least one trial");
  if (!(p >= 1.0)) fail(ErrorKind::Precondition, "exponent must be at least 1");
  const std::size_t nb = op.basis.size();
  const std::size_t n_out = op.out_weights.size(), n_in = op.in_weights.size();
  OpNormResult best;
  if (nb == 0) return best;
  // Ratios are kept as p-th powers until the end.
  const auto ratio_of = [&](const std::vector<double>& c) {
    const double den = power_sum(combine(op.in_columns, n_in, c), op.in_weights, p);
    if (!(den > 0.0)) return 0.0;
    return power_sum(combine(op.out_columns, n_out, c), op.out_weights, p) / den;
  };
  std::vector<std::vector<double>> starts;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    std::vector<double> c(nb);
    for (auto& v : c) v = rng.normal();
    starts.push_back(std::move(c));
  }
  if (p == 2.0) {
    // Top eigenvector of A^T W A (the basis is orthonormal), matrix-free.
    std::vector<double> v = starts.front();
    double prev = 0.0;
    for (int it = 0; it < 2000; ++it) {
      const auto y = combine(op.out_columns, n_out, v);
      std::vector<double> z(nb, 0.0);
      for (std::size_t j = 0; j < nb; ++j) {
        const auto& col = op.out_columns[j];
        double s = 0.0;
        for (std::size_t q = 0; q < col.idx.size(); ++q) s += op.out_weights[col.idx[q]] * y[col.idx[q]] * col.val[q];
        z[j] = s;
      }
      const double nrm = std::sqrt(std::inner_product(z.begin(), z.end(), z.begin(), 0.0));
      if (!(nrm > 0.0)) break;
      for (auto& x : z) x /= nrm;
      v = std::move(z);
      if (std::abs(nrm - prev) <= 1e-13 * nrm) break;
      prev = nrm;
    }
    starts.push_back(v);
  }
  std::vector<double> arg;
  double val = -1.0;
  for (const auto& c : starts) {
    const double r = ratio_of(c);
    if (r > val) {
      val = r;
      arg = c;
    }
  }
  // Coordinate ascent from the best start: sign flips and magnitude changes.
  std::vector<double> Ac = combine(op.out_columns, n_out, arg), Bc = combine(op.in_columns, n_in, arg);
  double Sa = power_sum(Ac, op.out_weights, p), Sb = power_sum(Bc, op.in_weights, p);
  for (int sweep = 0; sweep < 20 && Sb > 0.0; ++sweep) {
    bool improved = false;
    double scale = 0.0;
    for (double v : arg) scale = std::max(scale, std::abs(v));
    for (std::size_t j = 0; j < nb; ++j) {
      const double cj = arg[j];
      const double cand[] = {-2.0 * cj, cj, -0.5 * cj, 0.25 * scale, -0.25 * scale};
      double bestd = 0.0, bestr = Sa / Sb, bda = 0.0, bdb = 0.0;
      for (double d : cand) {
        if (d == 0.0) continue;
        const double db = power_delta(op.in_columns[j], Bc, op.in_weights, d, p);
        if (!(Sb + db > 1e-300)) continue;
        const double da = power_delta(op.out_columns[j], Ac, op.out_weights, d, p);
        const double r = (Sa + da) / (Sb + db);
        if (r > bestr * (1.0 + 1e-12)) {
          bestr = r;
          bestd = d;
          bda = da;
          bdb = db;
        }
      }
      if (bestd != 0.0) {
        arg[j] += bestd;
        for (std::size_t q = 0; q < op.out_columns[j].idx.size(); ++q)
          Ac[op.out_columns[j].idx[q]] += bestd * op.out_columns[j].val[q];
        for (std::size_t q = 0; q < op.in_columns[j].idx.size(); ++q)
          Bc[op.in_columns[j].idx[q]] += bestd * op.in_columns[j].val[q];
        Sa += bda;
        Sb += bdb;
        improved = true;
      }
    }
    Sa = power_sum(Ac, op.out_weights, p);
    Sb = power_sum(Bc, op.in_weights, p);
    if (!improved) break;
  }
  best.value = std::pow(std::max(0.0, ratio_of(arg)), 1.0 / p);
  best.argmax = std::move(arg);
  return best;
}

// ---------------------------------------------------------------------------

namespace {

struct TailInputs {
  double rho = 0.0;    // l-inf half-width of supp f about its own centre
  double rho2 = 0.0;   // Euclidean half-diagonal
  double shift = 0.0;  // l-inf distance from the box centre to that centre
  double l1 = 0.0;
};

TailInputs tail_inputs(const TEvaluator& T, const Point& c) {
  TailInputs t;
  t.l1 = T.l1_norm();
  Point lo, hi;
  if (!T.support_hull(lo, hi)) return t;
  for (int i = 0; i < T.dim(); ++i) {
    t.rho = std::max(t.rho, 0.5 * (hi[i] - lo[i]));
    t.rho2 += 0.25 * (hi[i] - lo[i]) * (hi[i] - lo[i]);
    t.shift = std::max(t.shift, std::abs(0.5 * (hi[i] + lo[i]) - c[i]));
  }
  t.rho2 = std::sqrt(t.rho2);
  return t;
}

/// (int_{|x-c|_inf > R} |Tf|^p)^{1/p} bounded by the smaller of the size and the
/// cancellation estimates (f has mean zero).
double analytic_tail(const kernel::Constants& c, double gamma, int n, double p, double R_box, const TailInputs& t) {
  if (t.l1 == 0.0) return 0.0;
  // |x - c| > R_box implies |x - c_f| > R.
  const double R = R_box - t.shift;
  if (!(R >= 2.0 * t.rho2)) fail(ErrorKind::Precondition, "box radius R too small for the tail formula");
  const double shell = n * std::pow(2.0, n);
  const double a = (n + gamma) * p;
  const double hold = std::pow(c.c_holder * std::pow(t.rho2, gamma) * t.l1, p) * shell * std::pow(R, n - a) / (a - n);
  double size = kInf;
  if (R > t.rho && n * p > n)
    size = std::pow(c.c_size * t.l1, p) * shell * std::pow(R / (R - t.rho), n - 1) * std::pow(R - t.rho, n - n * p) /
           (n * p - n);
  return std::pow(std::min(hold, size), 1.0 / p);
}

/// Minkowski over the coefficients: each h_I has its own small radius.
double coefficient_tail(const kernel::Constants& kc, double gamma, int n, double p, double R_box,
                        const FiniteHaarExpansion& f, const Point& c) {
  double sum = 0.0;
  for (const auto& [h, a] : f) {
    TailInputs t;
    t.l1 = std::abs(a) * std::sqrt(h.cube.measure_d());
    for (int i = 0; i < n; ++i) {
      const double w = 0.5 * h.cube.side_d();
      t.rho = w;
      t.rho2 += w * w;
      t.shift = std::max(t.shift, std::abs(h.cube.center_d(i) - c[i]));
    }
    t.rho2 = std::sqrt(t.rho2);
    if (R_box - t.shift < 2.0 * t.rho2) return kInf;
    sum += analytic_tail(kc, gamma, n, p, R_box, t);
  }
  return sum;
}

RestrictedNorm finish(const std::vector<double>& ps, const std::vector<double>& integral,
                      const std::vector<double>& err) {
  RestrictedNorm out;
  out.p = ps;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double I = std::max(0.0, integral[i]);
    const double nrm = std::pow(I, 1.0 / ps[i]);
    out.norm.push_back(nrm);
    out.quad_error.push_back(I > 0.0 ? nrm * err[i] / (ps[i] * I) : std::pow(err[i], 1.0 / ps[i]));
  }
  return out;
}

void check_exponents(const std::vector<double>& ps) {
  if (ps.empty()) fail(ErrorKind::Precondition, "no exponents given");
  for (double p : ps)
    if (!(p >= 1.0)) fail(ErrorKind::Precondition, "exponent must be at least 1");
}

}  // namespace

RestrictedNorm restricted_lp_norms(const KernelSpec& k, const FiniteHaarExpansion& f, const DyadicSet& S,
                                   const std::vector<double>& ps, const RestrictedOptions& opt) {
  check_exponents(ps);
  const int n = f.dim();
  if (S.dim() != n || k.dim != n) fail(ErrorKind::Precondition, "dimension mismatch");
  if (S.empty()) fail(ErrorKind::Precondition, "excluded set is empty");
  const std::size_t np = ps.size();
  std::vector<double> zero(np, 0.0);
  if (f.empty()) {
    auto out = finish(ps, zero, zero);
    out.tail = zero;
    return out;
  }
  if (!f.support_cover().is_subset_of(S)) fail(ErrorKind::Precondition, "excluded set does not contain supp f");
  const TEvaluator T(k, haar::synthesize(f));

  std::array<dyadic::Dyadic, kMaxDim> hlo{}, hhi{};
  S.hull(hlo, hhi);
  Point c = make_point(n);
  double half = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    c[i] = 0.5 * (hlo[ii].to_double() + hhi[ii].to_double());
    half = std::max(half, 0.5 * (hhi[ii].to_double() - hlo[ii].to_double()));
  }
  TailInputs ti = tail_inputs(T, c);
  const double R = opt.R > 0.0 ? opt.R : 2.0 * half;
  if (R < 2.0 * half) fail(ErrorKind::Precondition, "box radius R too small for the tail formula");

  // nD box: coarsest-level cubes of S meeting [c - R, c + R]^n. One dimension
  // uses [c - R, c + R] itself.
  std::vector<DyadicCube> region;
  if (n > 1) {
    int q = std::numeric_limits<int>::max(), finest = std::numeric_limits<int>::min();
    for (const auto& cube : S) {
      q = std::min(q, cube.level());
      finest = std::max(finest, cube.level());
    }
    const double side = std::ldexp(1.0, -q);
    IntVec lo{}, cnt{};
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      lo[ii] = static_cast<std::int64_t>(std::floor((c[i] - R) / side));
      const auto hi = static_cast<std::int64_t>(std::ceil((c[i] + R) / side));
      cnt[ii] = hi - lo[ii];
      total *= static_cast<std::size_t>(cnt[ii]);
    }
    for (std::size_t flat = 0; flat < total; ++flat) {
      IntVec idx{};
      std::size_t r = flat;
      for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        idx[ii] = lo[ii] + static_cast<std::int64_t>(r % static_cast<std::size_t>(cnt[ii]));
        r /= static_cast<std::size_t>(cnt[ii]);
      }
      const DyadicCube box(n, q, idx);
      for (const auto& piece : dyadic::complement_in_box(S, box, finest)) region.push_back(piece);
    }
  }

  quad::Options qo;
  qo.rel_tol = opt.rel_tol;
  std::vector<CompensatedSum> acc(np), accerr(np);
  RestrictedNorm out;
  bool converged = true;
  std::size_t evals = 0;
  if (n == 1) {
    // Gaps of S inside [c - R, c + R].
    std::vector<std::pair<double, double>> held, raw;
    for (const auto& cube : S) raw.emplace_back(cube.lower_d(0), cube.upper_d(0));
    std::sort(raw.begin(), raw.end());
    for (const auto& [a, b] : raw) {
      if (!held.empty() && held.back().second == a)
        held.back().second = b;
      else
        held.emplace_back(a, b);
    }
    std::vector<std::pair<double, double>> iv;
    double at = c[0] - R;
    for (const auto& [a, b] : held) {
      if (a > at) iv.emplace_back(at, a);
      at = std::max(at, b);
    }
    if (c[0] + R > at) iv.emplace_back(at, c[0] + R);
    for (const auto& [a, b] : iv) {
      const auto fn = [&](double x, std::span<double> out_v) {
        Point pt = make_point(1);
        pt[0] = x;
        const double v = std::abs(T.apply(pt));
        for (std::size_t i = 0; i < np; ++i) out_v[i] = ps[i] == 2.0 ? v * v : std::pow(v, ps[i]);
      };
      // Split where the interval crosses the centre so both sides refine independently.
      std::vector<double> sp, sg;
      if (c[0] > a && c[0] < b) sp.push_back(c[0]);
      // Geometric shells about the centre.
      for (double r = 2.0 * half; r < R; r *= 2.0)
        for (double z : {c[0] - r, c[0] + r})
          if (z > a && z < b) sp.push_back(z);
      std::sort(sp.begin(), sp.end());
      for (double z : {a, b}) {
        Point pt = make_point(1);
        pt[0] = z;
        if (T.on_support(pt)) sg.push_back(z);
      }
      const auto r = quad::integrate_vec(np, fn, a, b, qo, sp, sg);
      converged = converged && r.converged;
      evals += r.evaluations;
      for (std::size_t i = 0; i < np; ++i) {
        acc[i].add(r.value[i]);
        accerr[i].add(r.error[i]);
      }
    }
  } else {
    for (const auto& cube : region) {
      Point a, b;
      cube_box(cube, a, b);
      for (std::size_t i = 0; i < np; ++i) {
        const double p = ps[i];
        const auto fn = [&](const Point& x) { return std::pow(std::abs(T.apply(x)), p); };
        const auto r = quad::integrate_box(n, fn, a, b, qo);
        converged = converged && r.converged;
        evals += r.evaluations;
        acc[i].add(r.value);
        accerr[i].add(r.error);
      }
    }
  }
  std::vector<double> I(np), E(np);
  for (std::size_t i = 0; i < np; ++i) {
    I[i] = acc[i].value();
    E[i] = accerr[i].value();
  }
  out = finish(ps, I, E);
  const auto kc = kernel_constants(k);
  for (double p : ps)
    out.tail.push_back(std::min(analytic_tail(kc, k.gamma, n, p, R, ti), coefficient_tail(kc, k.gamma, n, p, R, f, c)));
  out.R = R;
  out.converged = converged;
  out.evaluations = evals;
  return out;
}

RestrictedNorm restricted_lp_norms_cube(const KernelSpec& k, const FiniteHaarExpansion& f,
                                        const sigma::ScaledCube& Q, const std::vector<double>& ps,
                                        const RestrictedOptions& opt) {
  check_exponents(ps);
  if (f.dim() != 1 || k.dim != 1) fail(ErrorKind::Precondition, "the cube variant is one-dimensional");
  const std::size_t np = ps.size();
  std::vector<double> zero(np, 0.0);
  if (f.empty()) {
    auto out = finish(ps, zero, zero);
    out.tail = zero;
    return out;
  }
  const TEvaluator T(k, haar::synthesize(f));
  const double c = Q.center[0];
  const double h = 0.5 * Q.side;
  Point cp = make_point(1);
  cp[0] = c;
  TailInputs ti = tail_inputs(T, cp);
  const double need = std::max(2.0 * ti.rho2 + ti.shift, h);
  const double R = opt.R > 0.0 ? opt.R : std::max(2.0 * h, need);
  if (R < need) fail(ErrorKind::Precondition, "box radius R too small for the tail formula");

  const auto& faces = T.faces()[0];
  quad::Options qo;
  qo.rel_tol = opt.rel_tol;
  std::vector<CompensatedSum> acc(np), accerr(np);
  bool converged = true;
  std::size_t evals = 0;
  const auto fn = [&](double x, std::span<double> out_v) {
    Point pt = make_point(1);
    pt[0] = x;
    const double v = std::abs(T.on_support(pt) ? T.apply_pv(pt) : T.apply(pt));
    for (std::size_t i = 0; i < np; ++i) out_v[i] = std::pow(v, ps[i]);
  };
  for (const auto& [a, b] : {std::make_pair(c - R, c - h), std::make_pair(c + h, c + R)}) {
    if (!(b > a)) continue;
    std::vector<double> sg;
    for (double z : faces)
      if (z >= a && z <= b) sg.push_back(z);
    const auto r = quad::integrate_vec(np, fn, a, b, qo, {}, sg);
    converged = converged && r.converged;
    evals += r.evaluations;
    for (std::size_t i = 0; i < np; ++i) {
      acc[i].add(r.value[i]);
      accerr[i].add(r.error[i]);
    }
  }
  std::vector<double> I(np), E(np);
  for (std::size_t i = 0; i < np; ++i) {
    I[i] = acc[i].value();
    E[i] = accerr[i].value();
  }
  auto out = finish(ps, I, E);
  const auto kc = kernel_constants(k);
  for (double p : ps)
    out.tail.push_back(std::min(analytic_tail(kc, k.gamma, 1, p, R, ti), coefficient_tail(kc, k.gamma, 1, p, R, f, cp)));
  out.R = R;
  out.converged = converged;
  out.evaluations = evals;
  return out;
}

}  // namespace pseudoloc::ops
