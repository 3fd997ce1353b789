#include <cmath>

#include "doctest.h"
#include "pseudoloc/haar.hpp"
#include "test_util.hpp"

using namespace pseudoloc;
using namespace pseudoloc::haar;
using dyadic::DyadicCube;
using dyadic::DyadicSet;

namespace {

DyadicCube iv(int k, std::int64_t m) { return DyadicCube::interval(k, m); }
HaarIndex h1(int k, std::int64_t m) { return HaarIndex{iv(k, m), 1}; }

FiniteHaarExpansion single(int k, std::int64_t m, double a = 1.0) {
  FiniteHaarExpansion f(1);
  f.add(h1(k, m), a);
  return f;
}

double coeff_diff(const FiniteHaarExpansion& a, const FiniteHaarExpansion& b) {
  double d = 0.0;
  for (const auto& [h, v] : a) d = std::max(d, std::abs(v - b.get(h)));
  for (const auto& [h, v] : b) d = std::max(d, std::abs(v - a.get(h)));
  return d;
}

}  // namespace

TEST_CASE("haar_eval values") {
  CHECK(haar_eval(h1(0, 0), Point::of({0.3})) == 1.0);
  CHECK(haar_eval(h1(0, 0), Point::of({0.7})) == -1.0);
  CHECK(haar_eval(iv(-1, 0), 0, Point::of({1.5})) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(haar_eval(DyadicCube(2, 0, IntVec{}), 3u, Point::of({0.25, 0.75})) == -1.0);
  CHECK(haar_eval(h1(0, 0), Point::of({1.0})) == 0.0);
  CHECK(haar_eval(h1(2, -1), Point::of({-0.2})) == 2.0);
}

TEST_CASE("synthesize examples") {
  auto s = synthesize(single(0, 0));
  CHECK(s.level() == 1);
  CHECK(s.eval(Point::of({0.25})) == 1.0);
  CHECK(s.eval(Point::of({0.75})) == -1.0);
  CHECK(synthesize(FiniteHaarExpansion(1)).empty());

  FiniteHaarExpansion f = single(0, 0);
  f.add(h1(1, 0), std::sqrt(2.0) * 0.25);
  s = synthesize(f);
  const double expect[4] = {1.5, 0.5, -1.0, -1.0};
  for (int q = 0; q < 4; ++q) CHECK(s.eval(Point::of({0.125 + 0.25 * q})) == doctest::Approx(expect[q]).epsilon(1e-15));
}

TEST_CASE("analyze examples and Gram oracle") {
  StepFunction g(1, 1, IntVec{0, 0, 0}, IntVec{2, 0, 0});
  g.values() = {1.0, -1.0};
  const auto a = analyze(g, -3, 0);
  CHECK(a.size() == 1);
  CHECK(a.get(h1(0, 0)) == 1.0);

  StepFunction one(1, 3, IntVec{}, IntVec{8, 0, 0});
  for (auto& v : one.values()) v = 1.0;
  for (const auto& [h, v] : analyze(one, 0, 2)) CHECK_FALSE(iv(0, 0).contains(h.cube));

  // Dense oracle: pair against every h^1_I evaluated at cell midpoints.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  StepFunction r(1, 3, IntVec{}, IntVec{8, 0, 0});
  for (auto& v : r.values()) v = nd(rng);
  const auto coeffs = analyze(r, 0, 2);
  for (int k = 0; k <= 2; ++k)
    for (std::int64_t m = 0; m < (1 << k); ++m) {
      double oracle = 0.0;
      for (int c = 0; c < 8; ++c) oracle += r.values()[static_cast<std::size_t>(c)] * haar_eval(h1(k, m), Point::of({(c + 0.5) / 8.0})) / 8.0;
      CHECK(std::abs(coeffs.get(h1(k, m)) - oracle) < 1e-12);
    }
  CHECK_THROWS_AS(analyze(r, 0, 3), Error);
}

TEST_CASE("projections") {
  const auto f = single(0, 0);
  CHECK(project(f, 0, Projection::E).empty());
  CHECK(project(f, 1, Projection::E) == f);
  CHECK(project(f, 0, Projection::D) == f);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  StepFunction g(1, 4, IntVec{-8, 0, 0}, IntVec{24, 0, 0});
  for (auto& v : g.values()) v = nd(rng);
  const auto e = project(g, 1, Projection::E);
  for (std::int64_t c = -8; c < 16; ++c) {
    double avg = 0.0;
    const std::int64_t base = (c >= 0 ? c / 8 : (c - 7) / 8) * 8;
    for (std::int64_t j = base; j < base + 8; ++j) avg += g.at(IntVec{j, 0, 0});
    CHECK(std::abs(e.at(IntVec{c, 0, 0}) - avg / 8.0) < 1e-14);
  }
}

TEST_CASE("inner products and norms") {
  const auto a = synthesize(single(0, 0));
  CHECK(inner_product(a, a) == 1.0);
  CHECK(inner_product(a, synthesize(single(0, 1))) == 0.0);
  CHECK(inner_product(a, HaarIndex{iv(0, 0), 0}) == 0.0);
  CHECK(inner_product(a, h1(0, 0)) == 1.0);
  for (double p : {1.0, 1.5, 2.0, 3.0, 4.0}) {
    CHECK(lp_norm(a, p) == doctest::Approx(1.0).epsilon(1e-15));
    const auto b = synthesize(single(3, 2));
    CHECK(lp_norm(b, p) == doctest::Approx(std::pow(0.125, 1.0 / p - 0.5)).epsilon(1e-14));
  }
  const auto far = DyadicSet::from_cubes(1, {iv(0, 5)});
  CHECK(lp_norm(a, 2.0, &far) == 0.0);
}

TEST_CASE("text round trip") {
  std::mt19937_64 rng(9);
  const auto f = testutil::random_expansion(rng, 2, 20, -2, 3);
  CHECK(FiniteHaarExpansion::parse(f.to_text()) == f);
  CHECK(FiniteHaarExpansion::parse("# c\n0:(0) eta=1 alpha=2.5\n").get(h1(0, 0)) == 2.5);
  CHECK_THROWS_AS(FiniteHaarExpansion::parse("0:(0) eta=0 alpha=1"), Error);
  CHECK_THROWS_AS(FiniteHaarExpansion::parse("0:(0) alpha=1"), Error);
}

TEST_CASE("property: orthonormality of random pairs") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> lvl(-2, 4);
  std::uniform_int_distribution<std::int64_t> idx(-3, 3);
  std::uniform_int_distribution<std::uint32_t> eta(1, 3);
  for (int t = 0; t < 1000; ++t) {
    const HaarIndex a{DyadicCube(2, lvl(rng), IntVec{idx(rng), idx(rng), 0}), eta(rng)};
    const HaarIndex b = (t % 3 == 0) ? a : HaarIndex{DyadicCube(2, lvl(rng), IntVec{idx(rng), idx(rng), 0}), eta(rng)};
    FiniteHaarExpansion fa(2);
    fa.add(a, 1.0);
    const double ip = inner_product(synthesize(fa, std::max(a.cube.level(), b.cube.level()) + 1), b);
    CHECK(std::abs(ip - (a == b ? 1.0 : 0.0)) <= 1e-12);
  }
}

TEST_CASE("property: round trip, Parseval, telescoping, projection algebra") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 200; ++t) {
    const int dim = (t % 4 == 0) ? 2 : 1;
    const auto f = testutil::random_expansion(rng, dim, dim == 1 ? 64 : 16, -2, dim == 1 ? 5 : 3);
    const auto g = synthesize(f);
    CHECK(coeff_diff(analyze(g, f.min_level(), f.max_level()), f) <= 1e-12);
    CHECK(std::abs(std::pow(lp_norm(g, 2.0), 2) - f.energy()) <= 1e-12 * f.energy());

    const int a = f.min_level();
    const int b = f.max_level();
    StepFunction tele = StepFunction::zero(dim, g.level());
    for (int k = a; k <= b; ++k) tele = tele.plus(project(g, k, Projection::D));
    const auto rhs = project(g, b + 1, Projection::E).plus(project(g, a, Projection::E).scaled(-1.0));
    CHECK(tele.max_abs_diff(rhs) <= 1e-12);

    const int j = a + 1;
    const int k = b;
    CHECK(project(project(f, k, Projection::E), j, Projection::E) == project(f, std::min(j, k), Projection::E));
    CHECK(project(project(f, j, Projection::D), j, Projection::D) == project(f, j, Projection::D));
    CHECK(project(project(f, j, Projection::D), j, Projection::E).empty());
    CHECK(project(project(f, j, Projection::D), k, Projection::D).empty() == (j != k || project(f, j, Projection::D).empty()));
    const auto ekg = project(project(g, k, Projection::E), j, Projection::E);
    CHECK(ekg.max_abs_diff(project(g, std::min(j, k), Projection::E)) <= 1e-12);
  }
}
