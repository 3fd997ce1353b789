#include <random>

#include "doctest.h"
#include "pseudoloc/dyadic.hpp"

using namespace pseudoloc;
using namespace pseudoloc::dyadic;

namespace {

DyadicCube iv(int k, std::int64_t m) { return DyadicCube::interval(k, m); }
DyadicCube sq(int k, std::int64_t a, std::int64_t b) { return DyadicCube(2, k, IntVec{a, b, 0}); }

}  // namespace

TEST_CASE("dyadic rationals are exact") {
  CHECK(Dyadic(6, 0) == Dyadic(3, 1));
  CHECK((Dyadic(1, -1) + Dyadic(1, -1)) == Dyadic::from_int(1));
  CHECK((Dyadic(3, -2) * Dyadic(1, 3)) == Dyadic::from_int(6));
  CHECK(Dyadic::from_double(0.375) == Dyadic(3, -3));
  CHECK(Dyadic(-1, -2) < Dyadic(1, -40));
  CHECK(Dyadic(1, 80) > Dyadic(1, 0));
  CHECK(Dyadic::from_double(-2.5).to_double() == -2.5);
}

TEST_CASE("ancestor") {
  CHECK(iv(3, 5).ancestor(2) == iv(1, 1));
  CHECK(iv(3, 5).ancestor(0) == iv(3, 5));
  CHECK(sq(0, -1, 0).ancestor(1) == sq(-1, -1, 0));
  CHECK(iv(0, -3).ancestor(1) == iv(-1, -2));
}

TEST_CASE("translate") {
  CHECK(iv(0, 0).translate(IntVec{3, 0, 0}) == iv(0, 3));
  CHECK(sq(0, 0, 0).translate(IntVec{2, -1, 0}) == sq(0, 2, -1));
  const auto c = iv(4, 7);
  CHECK(c.translate(IntVec{}) == c);
}

TEST_CASE("expand9") {
  const DyadicSet a = expand9(iv(0, 0));
  CHECK(a.measure() == Dyadic::from_int(9));
  CHECK(a.contains(Point::of({-4.0})));
  CHECK_FALSE(a.contains(Point::of({5.0})));
  CHECK(a.contains(Point::of({4.999})));
  CHECK(expand9_cubes(sq(0, 0, 0)).size() == 81);
  CHECK(expand9(sq(0, 0, 0)).measure() == Dyadic::from_int(81));
  const DyadicSet b = expand9(iv(-1, 0));
  CHECK(b.measure() == Dyadic::from_int(18));
  CHECK(b.contains(Point::of({-8.0})));
  CHECK_FALSE(b.contains(Point::of({10.0})));
}

TEST_CASE("linf_dist") {
  CHECK(linf_dist(iv(0, 0), iv(0, 3)) == Dyadic::from_int(2));
  CHECK(linf_dist(sq(0, 0, 0), sq(0, 2, 0)) == Dyadic::from_int(1));
  CHECK(linf_dist(Point::of({0.5}), iv(0, 0)).is_zero());
  CHECK(linf_dist(iv(0, 0), iv(0, 1)).is_zero());
}

TEST_CASE("complement_in_box") {
  // [-2,2) is not a single dyadic cube; take it as [-2,0) and [0,2).
  const auto s = DyadicSet::from_cubes(1, {iv(0, 0)});
  const auto c = complement_in_box(s, iv(-1, -1), 0).unite(complement_in_box(s, iv(-1, 0), 0));
  CHECK(c == DyadicSet::from_cubes(1, {iv(0, -2), iv(0, -1), iv(0, 1)}));
  CHECK(c.measure() == Dyadic::from_int(3));
  CHECK(complement_in_box(DyadicSet(1), iv(-2, -1), 0) == DyadicSet::from_cubes(1, {iv(-2, -1)}));
  CHECK(complement_in_box(DyadicSet::from_cubes(1, {iv(-3, -1)}), iv(-2, -1), 0).empty());
  CHECK_THROWS_AS(complement_in_box(DyadicSet::from_cubes(1, {iv(3, 0)}), iv(0, 0), 2), Error);
}

TEST_CASE("canonical form merges siblings and is order independent") {
  const auto a = DyadicSet::from_cubes(1, {iv(1, 0), iv(1, 1), iv(2, 4)});
  CHECK(a.size() == 2);
  CHECK(a.cubes()[0] == iv(0, 0));
  const auto b = DyadicSet::from_cubes(1, {iv(2, 4), iv(2, 0), iv(2, 1), iv(1, 1), iv(2, 0)});
  CHECK(a == b);
  const auto q = DyadicSet::from_cubes(2, {sq(1, 0, 0), sq(1, 1, 0), sq(1, 0, 1), sq(1, 1, 1)});
  CHECK(q.size() == 1);
  CHECK(q.cubes()[0] == sq(0, 0, 0));
}

TEST_CASE("window is enforced") {
  CHECK_THROWS_AS(iv(17, 0), Error);
  CHECK_THROWS_AS(iv(-16, 0).ancestor(1), Error);
}

TEST_CASE("cube text round trip") {
  const auto c = sq(-3, 4, -7);
  CHECK(c.to_string() == "-3:(4,-7)");
  CHECK(DyadicCube::parse(c.to_string()) == c);
  CHECK_THROWS_AS(DyadicCube::parse("3:(x)"), Error);
}

TEST_CASE("property: ancestor composition, translate distance") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> lvl(-4, 8);
  std::uniform_int_distribution<std::int64_t> idx(-100, 100);
  std::uniform_int_distribution<int> sd(0, 4);
  for (int t = 0; t < 500; ++t) {
    const auto c = sq(lvl(rng), idx(rng), idx(rng));
    const int s = sd(rng);
    const int u = sd(rng);
    CHECK(c.ancestor(s).ancestor(u) == c.ancestor(s + u));
    CHECK(c.ancestor(s).contains(c));
    const IntVec m{idx(rng) % 7, idx(rng) % 7, 0};
    if (m[0] == 0 && m[1] == 0) continue;
    const auto d = c.translate(m);
    const std::int64_t mx = std::max(std::abs(m[0]), std::abs(m[1]));
    CHECK(linf_dist(c, d) == Dyadic(mx - 1, 0) * c.side());
    CHECK_FALSE(c.intersects(d));
    CHECK(d.translate(IntVec{-m[0], -m[1], 0}) == c);
  }
}

TEST_CASE("property: complement partitions the box") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> lvl(0, 5);
  for (int t = 0; t < 20; ++t) {
    std::vector<DyadicCube> cubes;
    for (int j = 0; j < 6; ++j) {
      const int k = lvl(rng);
      std::uniform_int_distribution<std::int64_t> idx(-(std::int64_t{1} << k), (std::int64_t{1} << k) - 1);
      cubes.push_back(iv(k, idx(rng)));
    }
    const auto s = DyadicSet::from_cubes(1, cubes);
    const auto box = iv(-1, -1);
    const auto c = complement_in_box(s, box, 5);
    CHECK(c.measure() + s.intersect(box).measure() == box.measure());
    std::uniform_int_distribution<std::int64_t> pt(-(1 << 20), -1);
    for (int q = 0; q < 500; ++q) {
      const Point p = Point::of({std::ldexp(static_cast<double>(pt(rng)), -19)});
      CHECK(c.contains(p) != s.contains(p));
    }
  }
}
