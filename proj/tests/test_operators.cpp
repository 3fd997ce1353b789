#include <cmath>
#include <random>

#include "doctest.h"
#include "pseudoloc/operators.hpp"
#include "pseudoloc/oracle.hpp"
#include "pseudoloc/random.hpp"
#include "test_util.hpp"

using namespace pseudoloc;
using namespace pseudoloc::ops;

namespace {

Point pt(double v) { return Point::of({v}); }
DyadicCube iv(int k, std::int64_t m) { return DyadicCube::interval(k, m); }
HaarIndex h1(int k, std::int64_t m) { return HaarIndex{iv(k, m), 1}; }
HaarIndex h0(int k, std::int64_t m) { return HaarIndex{iv(k, m), 0}; }

FiniteHaarExpansion unit_haar() {
  FiniteHaarExpansion f(1);
  f.add(h1(0, 0), 1.0);
  return f;
}

// T h_{[0,1)} for the Hilbert kernel with c = 1, by hand.
double hilbert_of_unit_haar(double x) {
  return std::log(std::abs(x)) + std::log(std::abs(x - 1.0)) - 2.0 * std::log(std::abs(x - 0.5));
}

}  // namespace

TEST_CASE("T off the support: examples") {
  const auto k = kernel::KernelSpec::hilbert1d();
  CHECK(apply_T_offsupport(k, unit_haar(), pt(2)) == doctest::Approx(std::log(8.0 / 9.0)).epsilon(1e-14));
  StepFunction g(1, 0, IntVec{}, IntVec{1});
  g.ref(IntVec{}) = 1.0;
  CHECK(apply_T_offsupport(k, g, pt(2)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(apply_T_offsupport(k, g, pt(0.5)), Error);
  CHECK_THROWS_AS(apply_T_offsupport(k, g, pt(1.0)), Error);
  CHECK(apply_T_offsupport(k, FiniteHaarExpansion(1), pt(0.5)) == 0.0);

  CHECK(apply_T_truncated(k, g, 2.0, pt(0.5)) == 0.0);
  CHECK(std::abs(apply_T_truncated(k, g, 0.25, pt(0.5))) <= 1e-15);
  CHECK_THROWS_AS(apply_T_truncated(k, g, 0.0, pt(3)), Error);
  const auto hs = haar::synthesize(unit_haar());
  const double t = apply_T_truncated(k, hs, 0.25, pt(0.5));
  CHECK(t == doctest::Approx(oracle::riemann_apply(k, unit_haar(), pt(0.5), 0.25, 22)).epsilon(1e-5));
  // By hand: 2 * ln(0.5 / 0.25) from the two halves.
  CHECK(t == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("T off the support matches the Riemann oracle") {
  const auto k = kernel::KernelSpec::hilbert1d();
  std::mt19937_64 rng(5);
  Rng r(6);
  for (int t = 0; t < 20; ++t) {
    const auto f = testutil::random_expansion(rng, 1, 8, 0, 3);
    const auto g = haar::synthesize(f);
    IntVec lo{}, hi{};
    g.nonzero_bounds(lo, hi);
    const double a = std::ldexp(static_cast<double>(lo[0]), -g.level());
    const double b = std::ldexp(static_cast<double>(hi[0] + 1), -g.level());
    const double x = (t % 2) ? b + r.uniform(1.0, 6.0) : a - r.uniform(1.0, 6.0);
    const double v = apply_T_offsupport(k, f, pt(x));
    const double o = oracle::riemann_apply(k, f, pt(x), 0.0, 20);
    CHECK(std::abs(v - o) <= 1e-6 * std::max(std::abs(o), 1e-3));
  }
}

TEST_CASE("Haar pairings") {
  const auto k = kernel::KernelSpec::hilbert1d();
  // By hand: int_1^2 [ln x + ln(x-1) - 2 ln(x-1/2)] dx = ln(16/27).
  CHECK(haar_pairing(k, h0(0, 1), h1(0, 0), 0.0) == doctest::Approx(std::log(16.0 / 27.0)).epsilon(1e-9));
  CHECK_THROWS_AS(haar_pairing(k, h0(0, 0), h1(1, 0), 0.0), Error);
  CHECK(haar_pairing(k, h1(0, 0), h1(0, 0), 4.0) == 0.0);
  CHECK(std::abs(haar_pairing(k, h1(2, 3), h1(2, 3), 4.0)) <= 1e-14);

  Rng r(9);
  for (int t = 0; t < 30; ++t) {
    const int li = static_cast<int>(r.integer(0, 2));
    const int lj = static_cast<int>(r.integer(-1, li));
    const auto I = h1(li, r.integer(-2, 2));
    DyadicCube J = iv(lj, r.integer(-4, 4));
    // Touching cubes leave a log singularity the midpoint rule resolves only at O(h).
    if (dyadic::linf_dist(J, I.cube).to_double() < I.cube.side().to_double()) continue;
    const std::uint32_t theta = static_cast<std::uint32_t>(t % 2);
    const double v = haar_pairing(k, HaarIndex{J, theta}, I, 0.0);
    const double o = oracle::riemann_pairing(k, HaarIndex{J, theta}, I, 0.0, 11, 11);
    CHECK(std::abs(v - o) <= 1e-5 * std::abs(o) + 1e-12);
  }
  // Far pairs obey the Hoelder bound.
  const auto c = kernel_constants(k);
  for (int t = 0; t < 50; ++t) {
    const auto I = h1(static_cast<int>(r.integer(0, 3)), r.integer(-3, 3));
    const auto J = iv(static_cast<int>(r.integer(-1, 0)), r.integer(3, 12));
    if (J.intersects(I.cube)) continue;
    const double b = pairing_bound(c, 1.0, J, I.cube);
    if (!std::isfinite(b)) continue;
    CHECK(std::abs(haar_pairing(k, HaarIndex{J, 0}, I, 0.0)) <= b * (1 + 1e-6));
  }
}

TEST_CASE("phi_tilde examples and linearity") {
  const auto k = kernel::KernelSpec::hilbert1d();
  TruncationBudget b;
  b.M = 2;
  CHECK(phi_tilde_apply(k, FiniteHaarExpansion(1), 0, b).value.max_abs() == 0.0);
  const auto r = phi_tilde_apply(k, unit_haar(), 0, b);
  CHECK(r.pairings == 4);
  IntVec lo{}, hi{};
  REQUIRE(r.value.nonzero_bounds(lo, hi));
  CHECK(std::ldexp(static_cast<double>(lo[0]), -r.value.level()) == -2.0);
  CHECK(std::ldexp(static_cast<double>(hi[0] + 1), -r.value.level()) == 3.0);
  // Value on [1,2) is the pairing with the right neighbour.
  CHECK(r.value.eval(pt(1.5)) == doctest::Approx(haar_pairing(k, h0(0, 1), h1(0, 0), 0.0)).epsilon(1e-12));
  // On [0,1): minus the sum of the four pairings.
  double all = 0.0;
  for (std::int64_t m : {-2, -1, 1, 2}) all += haar_pairing(k, h0(0, m), h1(0, 0), 0.0);
  CHECK(r.value.eval(pt(0.5)) == doctest::Approx(-all).epsilon(1e-12));
  // Tf is even about 1/2, so the mirrored pairings agree.
  CHECK(r.value.eval(pt(-0.5)) == doctest::Approx(r.value.eval(pt(1.5))).epsilon(1e-9));
  CHECK(r.tail_bound > 0.0);

  FiniteHaarExpansion f1(1), f2(1);
  f1.add(h1(1, 1), 0.7);
  f2.add(h1(0, -1), -1.3);
  f2.add(h1(2, 5), 0.4);
  const auto a = phi_tilde_apply(k, f1, 1, b).value;
  const auto c = phi_tilde_apply(k, f2, 1, b).value;
  const auto s = phi_tilde_apply(k, f1.plus(f2), 1, b).value;
  CHECK(s.max_abs_diff(a.plus(c)) <= 1e-12);
}

TEST_CASE("decomposition identity off the exceptional set") {
  const auto k = kernel::KernelSpec::hilbert1d();
  std::mt19937_64 rng(77);
  Rng r(78);
  TruncationBudget b;
  b.M = 16;
  for (int t = 0; t < 4; ++t) {
    const auto f = testutil::random_expansion(rng, 1, 8, 0, 3);
    const int s = t % 3;
    const auto S = sigma::sigma_set(f, s).sigma;
    const auto phi = phi_tilde_apply(k, f, s, b);
    const PsiEvaluator psi(k, f, s);
    const TEvaluator T(k, haar::synthesize(f));
    std::array<dyadic::Dyadic, kMaxDim> lo{}, hi{};
    S.hull(lo, hi);
    const double a = lo[0].to_double(), w = hi[0].to_double() - a;
    int checked = 0;
    while (checked < 15) {
      const double x = r.uniform(a - w, a + 2 * w);
      if (S.contains(pt(x))) continue;
      ++checked;
      const double lhs = T.apply(pt(x));
      const double rhs = phi.value.eval(pt(x)) + psi.value(pt(x));
      CHECK(std::abs(lhs - rhs) <= phi_tilde_tail_at(k, f, s, b.M, pt(x)) + 1e-6);
    }
  }
}

TEST_CASE("Psi: zero input and far points") {
  const auto k = kernel::KernelSpec::hilbert1d();
  CHECK(psi_apply(k, FiniteHaarExpansion(1), 2, pt(3)) == 0.0);
  // Single coefficient, s = 0: T_4 h(x) - average over the unit cube of x.
  const auto f = unit_haar();
  const double x = 7.3;
  const auto g = haar::synthesize(f);
  const auto avg = oracle::riemann_average([&](const Point& y) { return apply_T_truncated(k, g, 4.0, y); }, iv(0, 7), 12);
  const double expect = oracle::riemann_apply(k, f, pt(x), 4.0, 20) - avg;
  CHECK(psi_apply(k, f, 0, pt(x)) == doctest::Approx(expect).epsilon(1e-5));
  // Inside the truncation radius only the average survives.
  CHECK(psi_apply(k, f, 0, pt(2.5)) == doctest::Approx(-PsiEvaluator(k, f, 0).cube_average(0, iv(0, 2))).epsilon(1e-14));
}

TEST_CASE("Psi coefficient identities against direct quadrature") {
  const auto k = kernel::KernelSpec::hilbert1d();
  TruncationBudget b;
  b.levels = 12;
  // Haar11 vanishes on the diagonal.
  CHECK(psi_haar_coeff(k, 1, h1(0, 0), h1(0, 0), b).value == 0.0);
  CHECK_THROWS_AS(psi_haar_coeff(k, 1, h0(0, 0), h0(0, 0), b), Error);
  CHECK_THROWS_AS(psi_haar_coeff(k, 1, h1(1, 0), h1(0, 0), b), Error);
  Rng r(31);
  for (int t = 0; t < 3; ++t) {
    const int s = static_cast<int>(r.integer(0, 2));
    const auto L = iv(static_cast<int>(r.integer(0, 2)), r.integer(-3, 3));
    const std::int64_t m11 = 10 << s;
    const auto K11 = L.translate(IntVec{m11, 0, 0});
    const double a = psi_haar_coeff(k, s, HaarIndex{K11, 1}, HaarIndex{L, 1}, b).value;
    const double d = psi_coeff_direct(k, s, HaarIndex{K11, 1}, HaarIndex{L, 1}, b);
    CHECK(std::abs(a - d) <= 1e-4 * std::max(std::abs(d), 1e-6));

    // Just past the truncation radius, so the coefficient is not trivially zero.
    const auto K01 = L.translate(IntVec{(std::int64_t{8} << s) + 2, 0, 0});
    const double a01 = psi_haar_coeff(k, s + 1, HaarIndex{K01, 0}, HaarIndex{L, 1}, b).value;
    const double d01 = psi_coeff_direct(k, s + 1, HaarIndex{K01, 0}, HaarIndex{L, 1}, b);
    CHECK(std::abs(d01) > 1e-8);
    CHECK(std::abs(a01 - d01) <= 1e-4 * std::abs(d01));

    const auto K10 = L.translate(IntVec{r.integer(3, 40), 0, 0});
    const auto c10 = psi_haar_coeff(k, s, HaarIndex{K10, 1}, HaarIndex{L, 0}, b);
    const double d10 = psi_coeff_direct(k, s, HaarIndex{K10, 1}, HaarIndex{L, 0}, b);
    CHECK(c10.cls == PsiClass::Haar10);
    CHECK(std::abs(c10.value - d10) <= 1e-4 * std::max(std::abs(d10), 1e-6));
  }
}

TEST_CASE("shift operators") {
  const auto k = kernel::KernelSpec::hilbert1d();
  ShiftSpec u;
  u.kind = ShiftKind::U;
  u.m = IntVec{1, 0, 0};
  const auto g = *shift_apply(u, unit_haar()).step;
  CHECK(g.eval(pt(1.5)) == 1.0);
  CHECK(g.eval(pt(0.5)) == -1.0);
  CHECK(g.eval(pt(2.5)) == 0.0);
  u.m = IntVec{};
  CHECK(shift_apply(u, unit_haar()).step->max_abs() == 0.0);

  ShiftSpec t;
  t.kind = ShiftKind::T;
  t.m = IntVec{2, 0, 0};
  const auto e = *shift_apply(t, unit_haar()).expansion;
  CHECK(e.size() == 1);
  CHECK(e.get(h1(0, 2)) == 1.0);

  ShiftSpec th;
  th.kind = ShiftKind::Theta;
  th.m = IntVec{3, 0, 0};
  th.kernel = k;
  const auto te = *shift_apply(th, unit_haar()).expansion;
  CHECK(te.get(h1(0, 0)) == doctest::Approx(haar_pairing(k, h1(0, 3), h1(0, 0), 0.0)).epsilon(1e-12));

  // Lambda factorisation: summing U_m Lambda_{s,m} over m rebuilds phi_tilde.
  FiniteHaarExpansion f(1);
  f.add(h1(1, 1), 0.8);
  f.add(h1(2, -3), -0.5);
  TruncationBudget b;
  b.M = 3;
  const int s = 1;
  StepFunction sum = StepFunction::zero(1, 0);
  for (int m = -b.M; m <= b.M; ++m) {
    if (m == 0) continue;
    ShiftSpec l;
    l.kind = ShiftKind::Lambda;
    l.m = IntVec{m, 0, 0};
    l.s = s;
    l.kernel = k;
    sum = sum.plus(*shift_apply(l, f, b).step);
  }
  CHECK(sum.max_abs_diff(phi_tilde_apply(k, f, s, b).value) <= 1e-12);
}

TEST_CASE("Figiel sums") {
  const auto k = kernel::KernelSpec::hilbert1d();
  TruncationBudget b;
  b.M = 8;
  b.levels = 10;
  const std::vector<DyadicCube> sample = {iv(0, 0), iv(0, 1)};
  // Every coefficient within |m| <= 8 vanishes at s = 4.
  for (const auto& row : figiel_condition_sum(k, 4, b, sample)) {
    CHECK(row.sum == 0.0);
    CHECK(row.tail > 0.0);
  }
  b.M = 16;
  const auto r1 = figiel_condition_sum(k, 0, b, sample);
  b.M = 32;
  const auto r2 = figiel_condition_sum(k, 0, b, sample);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    // Haar01 vanishes identically at s = 0.
    if (r1[i].cls == PsiClass::Haar01) CHECK(r1[i].sum == 0.0);
    else CHECK(r1[i].sum > 0.0);
    CHECK(r2[i].sum - r1[i].sum <= r1[i].tail);
    CHECK(r2[i].sum >= r1[i].sum);
  }
}

TEST_CASE("operator norm lower bounds") {
  const auto basis = haar_basis(iv(0, 0), 0, 3);
  CHECK(basis.size() == 15);
  const auto id = opnorm_lower_bound(discretize_identity(basis), 3.0, 4, 1);
  CHECK(id.value >= 1.0 - 1e-9);
  CHECK(id.value <= 1.0 + 1e-9);
  CHECK(opnorm_lower_bound(discretize_u(IntVec{}, basis), 2.0, 3, 1).value == 0.0);
  const double u1 = opnorm_lower_bound(discretize_u(IntVec{1, 0, 0}, basis), 2.0, 3, 1).value;
  const double u8 = opnorm_lower_bound(discretize_u(IntVec{8, 0, 0}, basis), 2.0, 3, 1).value;
  CHECK(u1 > 0.0);
  CHECK(u8 > 0.0);
  CHECK(u1 <= 2.0 * std::sqrt(4.0) + 1e-9);
  // Determinism.
  CHECK(opnorm_lower_bound(discretize_u(IntVec{8, 0, 0}, basis), 2.0, 3, 1).value == u8);
  // A single column is a lower bound for the 2 -> 2 norm.
  const auto psi = discretize_psi(kernel::KernelSpec::hilbert1d(), 1, haar_basis(iv(0, 0), 0, 2));
  const double nb = opnorm_lower_bound(psi, 2.0, 2, 3).value;
  double col = 0.0;
  std::vector<double> e0(psi.basis.size(), 0.0);
  e0[0] = 1.0;
  const auto y = psi.apply(e0);
  for (std::size_t i = 0; i < y.size(); ++i) col += psi.out_weights[i] * y[i] * y[i];
  CHECK(nb >= std::sqrt(col) * (1 - 1e-9));
}

TEST_CASE("restricted norm of a single Haar function") {
  const auto k = kernel::KernelSpec::hilbert1d();
  const auto S = sigma::sigma_set(unit_haar(), 0).sigma;
  const auto r = restricted_lp_norms(k, unit_haar(), S, {2.0, 3.0});
  REQUIRE(r.converged);
  // Sigma = [-4, 5); R = 9 about 1/2 gives the box [-8.5, 9.5].
  const int res = 22;
  double sum2 = 0.0, sum3 = 0.0;
  for (const auto& [a, b] : {std::make_pair(-8.5, -4.0), std::make_pair(5.0, 9.5)}) {
    const long double h = (b - a) / std::ldexp(1.0L, res);
    for (long i = 0; i < (1L << res); ++i) {
      const double x = static_cast<double>(a + (i + 0.5L) * h);
      const long double v = std::abs(hilbert_of_unit_haar(x));
      sum2 += static_cast<double>(v * v * h);
      sum3 += static_cast<double>(v * v * v * h);
    }
  }
  CHECK(r.norm[0] == doctest::Approx(std::sqrt(sum2)).epsilon(1e-6));
  CHECK(r.norm[1] == doctest::Approx(std::cbrt(sum3)).epsilon(1e-6));
  CHECK(r.R == 9.0);

  RestrictedOptions big;
  big.R = 18.0;
  const auto r2 = restricted_lp_norms(k, unit_haar(), S, {2.0, 3.0}, big);
  for (int i = 0; i < 2; ++i) {
    CHECK(r2.norm[i] >= r.norm[i]);
    CHECK(r2.norm[i] - r.norm[i] <= r.tail[i]);
    CHECK(r2.tail[i] < r.tail[i]);
  }
  RestrictedOptions small;
  small.R = 2.0;
  CHECK_THROWS_AS(restricted_lp_norms(k, unit_haar(), S, {2.0}, small), Error);
  CHECK_THROWS_AS(restricted_lp_norms(k, unit_haar(), dyadic::DyadicSet::from_cubes(1, {iv(0, 5)}), {2.0}), Error);
}

TEST_CASE("cube-complement norm with the principal value") {
  const auto k = kernel::KernelSpec::hilbert1d(1.0 / 3.14159265358979323846);
  FiniteHaarExpansion f = unit_haar();
  f.add(h1(0, 3), 0.01);
  sigma::ScaledCube q;
  q.center = pt(0.5);
  q.side = 3.0;
  const auto r = restricted_lp_norms_cube(k, f, q, {2.0});
  CHECK(r.converged);
  CHECK(r.norm[0] > 0.0);
  // A larger excluded cube can only lower the norm.
  q.side = 6.0;
  RestrictedOptions o;
  o.R = r.R;
  const auto r2 = restricted_lp_norms_cube(k, f, q, {2.0}, o);
  CHECK(r2.norm[0] <= r.norm[0]);
}
