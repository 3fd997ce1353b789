#include <cmath>

#include "doctest.h"
#include "pseudoloc/quadrature.hpp"

using namespace pseudoloc;
using namespace pseudoloc::quad;

TEST_CASE("polynomials are exact on one panel") {
  const auto r = integrate([](double x) { return std::pow(x, 15); }, 0.0, 1.0);
  CHECK(r.value == doctest::Approx(1.0 / 16).epsilon(1e-14));
  CHECK(r.converged);
}

TEST_CASE("smooth integrand") {
  const auto r = integrate([](double x) { return std::exp(-x * x); }, -3.0, 2.0);
  const double exact = 0.5 * std::sqrt(M_PI) * (std::erf(2.0) + std::erf(3.0));
  CHECK(std::abs(r.value - exact) < 1e-12);
}

TEST_CASE("reversed limits flip the sign") {
  const auto a = integrate([](double x) { return x * x; }, 0.0, 2.0);
  const auto b = integrate([](double x) { return x * x; }, 2.0, 0.0);
  CHECK(a.value == doctest::Approx(-b.value));
}

TEST_CASE("kink handled by split") {
  const double split = 0.3;
  const auto r = integrate([](double x) { return std::abs(x - 0.3); }, 0.0, 1.0, {}, std::span(&split, 1));
  CHECK(std::abs(r.value - (0.045 + 0.245)) < 1e-14);
  CHECK(r.evaluations < 100);
}

TEST_CASE("log endpoint singularity") {
  const double sing = 0.0;
  const auto r = integrate([](double x) { return std::log(x); }, 0.0, 1.0, {}, {}, std::span(&sing, 1));
  CHECK(std::abs(r.value + 1.0) < 1e-10);
  CHECK(r.converged);
  const double mid = 0.5;
  const auto r2 = integrate([](double x) { return std::log(std::abs(x - 0.5)); }, 0.0, 1.0, {}, {},
                            std::span(&mid, 1));
  CHECK(std::abs(r2.value - (std::log(0.5) - 1.0)) < 1e-10);
}

TEST_CASE("cancelling integrand converges") {
  const auto r = integrate([](double x) { return std::sin(x); }, -1.0, 1.0);
  CHECK(std::abs(r.value) < 1e-14);
  CHECK(r.converged);
}

TEST_CASE("depth cap flags non-convergence") {
  Options opt;
  opt.max_depth = 3;
  const auto r = integrate([](double x) { return x < 0.3141 ? 0.0 : 1.0; }, 0.0, 1.0, opt);
  CHECK_FALSE(r.converged);
}

TEST_CASE("vector integration shares panels") {
  const auto r = integrate_vec(
      3,
      [](double x, std::span<double> out) {
        out[0] = 1.0;
        out[1] = x;
        out[2] = std::cos(x);
      },
      0.0, 2.0);
  CHECK(r.value[0] == doctest::Approx(2.0));
  CHECK(r.value[1] == doctest::Approx(2.0));
  CHECK(std::abs(r.value[2] - std::sin(2.0)) < 1e-12);
}

TEST_CASE("box rule in two dimensions") {
  const auto r = integrate_box(
      2, [](const Point& p) { return std::exp(p[0]) * std::cos(p[1]); }, Point::of({0.0, 0.0}),
      Point::of({1.0, 1.0}));
  CHECK(std::abs(r.value - (std::exp(1.0) - 1.0) * std::sin(1.0)) < 1e-11);
  const auto r2 = integrate_box(
      2, [](const Point& p) { return std::max(std::abs(p[0]), std::abs(p[1])); }, Point::of({-1.0, -1.0}),
      Point::of({1.0, 1.0}), {}, {{0.0}, {0.0}});
  CHECK(r2.value == doctest::Approx(8.0 / 3.0).epsilon(1e-9));
}
