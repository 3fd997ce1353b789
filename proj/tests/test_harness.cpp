#include <cmath>
#include <sstream>

#include "doctest.h"
#include "pseudoloc/harness.hpp"

using namespace pseudoloc;
using namespace pseudoloc::harness;

namespace {

FiniteHaarExpansion unit_haar() {
  FiniteHaarExpansion f(1);
  f.add(HaarIndex{dyadic::DyadicCube::interval(0, 0), 1}, 1.0);
  return f;
}

std::vector<Row> rows_for(const std::vector<double>& s, const std::vector<double>& r) {
  std::vector<Row> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Row row;
    row.experiment = "decay";
    row.s = static_cast<int>(s[i]);
    row.ratio = r[i];
    out.push_back(row);
  }
  return out;
}

double ratio_at(const std::vector<Row>& rows, double p, int s, int fid = 0) {
  for (const auto& r : rows)
    if (r.experiment == "decay" && r.p == p && r.s == s && r.f_id == fid) return r.ratio;
  FAIL("row missing");
  return 0.0;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = ExperimentConfig::parse("# comment\nkernel = hilbert1d\np=1.5, 2,4\ns_max=3 # trailing\nM=8\n");
  CHECK(cfg.p == std::vector<double>{1.5, 2.0, 4.0});
  CHECK(cfg.s_max == 3);
  CHECK(cfg.M == 8);
  CHECK_THROWS_AS(ExperimentConfig::parse("bogus=1"), Error);
  CHECK_THROWS_AS(ExperimentConfig::parse("M=abc"), Error);
  CHECK_THROWS_AS(ExperimentConfig::parse("M"), Error);
  auto bad = cfg;
  bad.p = {1.0};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.s_min = 4;
  CHECK_THROWS_AS(bad.validate(), Error);
  auto over = cfg;
  over.set("s_max", "5");
  CHECK(over.s_max == 5);
  const auto d = cfg.describe();
  CHECK(d.find("p=4 p'=1.33333333333 exponent=0.5") != std::string::npos);
  CHECK(d.find("p=1.5 p'=3 exponent=0.333333333333") != std::string::npos);
}

TEST_CASE("families") {
  const auto a = gen_family(3, 5, "random-sparse");
  const auto b = gen_family(3, 5, "random-sparse");
  CHECK(a == b);
  CHECK(gen_family(4, 5, "random-sparse") != a);
  CHECK_THROWS_AS(gen_family(3, 0, "random-sparse"), Error);
  CHECK_THROWS_AS(gen_family(3, 2, "nope"), Error);
  for (const auto& f : a) {
    CHECK(f.size() <= 32);
    CHECK(f.max_level() <= 5);
    CHECK(haar::lp_norm(f, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (const auto& f : gen_family(9, 3, "bump", 1, 3.0)) {
    CHECK(haar::lp_norm(f, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
    const auto back = haar::analyze(haar::synthesize(f), 0, 5);
    CHECK(back.size() == f.size());
    for (const auto& [h, v] : f) CHECK(std::abs(back.get(h) - v) <= 1e-12);
  }
  for (const auto& f : gen_family(9, 3, "adversarial-boundary")) CHECK(f.size() >= 2);
  CHECK(gen_family(2, 2, "random-sparse", 2).front().dim() == 2);
}

TEST_CASE("sign vectors") {
  const SignVector e(5);
  int sum = 0;
  for (int m = 0; m < 4000; ++m) {
    const HaarIndex h{dyadic::DyadicCube::interval(3, m), 1};
    CHECK(std::abs(e(h)) == 1);
    CHECK(e(h) == SignVector(5)(h));
    sum += e(h);
  }
  CHECK(std::abs(sum) < 4000 / 10);
}

TEST_CASE("csv output") {
  Row r;
  r.experiment = "decay";
  r.kernel = "hilbert1d";
  r.ratio = 1.0 / 3.0;
  r.tail_budget = std::nan("");
  r.status = "BUDGET";
  std::ostringstream os;
  write_csv(os, {r});
  CHECK(os.str() == csv_header() + "\ndecay,hilbert1d,1,1,2,0,0,0.333333333333,nan,BUDGET\n");
  CHECK(exit_code({r}) == 1);
  r.status = "INVARIANT";
  CHECK(exit_code({r}) == 2);
  r.status = "PASS";
  CHECK(exit_code({r}) == 0);
}

TEST_CASE("slope fits") {
  std::vector<double> s = {0, 1, 2, 3, 4}, r, q;
  for (double x : s) {
    r.push_back(std::exp2(-x / 2));
    q.push_back((1 + x) * std::exp2(-x));
  }
  const auto a = fit_slope(rows_for(s, r), 0, 4, false);
  REQUIRE(a.size() == 1);
  CHECK(a[0].slope == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(a[0].residual <= 1e-12);
  CHECK(fit_slope(rows_for(s, q), 0, 4, true)[0].slope == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_THROWS_AS(fit_slope(rows_for({1, 1, 2}, {1, 2, 3}), 0, 4, false), Error);
  // Maximum over the family is fitted.
  auto rows = rows_for(s, r);
  auto extra = rows_for(s, q);
  for (auto& x : extra) x.f_id = 1;
  rows.insert(rows.end(), extra.begin(), extra.end());
  const auto m = fit_slope(rows, 2, 4, false);
  CHECK(m[0].points == 3);
}

TEST_CASE("decay rows") {
  auto cfg = ExperimentConfig::parse("p=2,3\ns_max=3\nthreads=2\n");
  const auto rows = run_decay(cfg, {unit_haar()});
  CHECK(rows.size() == 8);
  CHECK(exit_code(rows) == 0);
  // s = 0 and p = 2 reproduce the module-level value; the box spans twice the hull of Sigma_3.
  const auto S = sigma::sigma_set(unit_haar(), 0).sigma;
  std::array<dyadic::Dyadic, kMaxDim> lo{}, hi{};
  sigma::sigma_set(unit_haar(), 3).sigma.hull(lo, hi);
  ops::RestrictedOptions o;
  o.R = hi[0].to_double() - lo[0].to_double();
  const double direct = ops::restricted_lp_norms(kernel::KernelSpec::hilbert1d(), unit_haar(), S, {2.0}, o).norm[0];
  CHECK(ratio_at(rows, 2.0, 0) == doctest::Approx(direct).epsilon(1e-12));
  for (int s = 1; s <= 3; ++s) CHECK(ratio_at(rows, 2.0, s) < ratio_at(rows, 2.0, s - 1));
  // Deterministic and independent of the thread count.
  cfg.threads = 1;
  std::ostringstream a, b;
  write_csv(a, rows);
  write_csv(b, run_decay(cfg, {unit_haar()}));
  CHECK(a.str() == b.str());

  cfg.l1_variant = true;
  cfg.q_variant = true;
  const auto more = run_decay(cfg, {unit_haar()});
  int l1 = 0, q = 0;
  for (const auto& r : more) {
    l1 += r.experiment == "decay-l1";
    q += r.experiment == "decay-q";
    CHECK(r.status == "PASS");
  }
  CHECK(l1 == 4);
  CHECK(q == 8);
}

TEST_CASE("a larger excluded set lowers the ratio") {
  const auto k = kernel::KernelSpec::hilbert1d();
  FiniteHaarExpansion f = gen_family(11, 1, "random-sparse").front();
  const auto S = sigma::sigma_set(f, 1).sigma;
  const auto S2 = S.unite(dyadic::expand9(S.cubes().front()));
  ops::RestrictedOptions o;
  o.R = 400.0;
  const auto a = ops::restricted_lp_norms(k, f, S, {2.0, 3.0}, o);
  const auto b = ops::restricted_lp_norms(k, f, S2, {2.0, 3.0}, o);
  for (int i = 0; i < 2; ++i) CHECK(b.norm[i] <= a.norm[i] * (1 + 1e-12));

  // Same for the cube variant with a larger expansion factor.
  const auto h = kernel::KernelSpec::hilbert1d(1.0 / 3.14159265358979323846);
  sigma::ScaledCube q;
  q.center = Point::of({0.5});
  q.side = 2.0;
  ops::RestrictedOptions oq;
  oq.R = 64.0;
  const double r1 = ops::restricted_lp_norms_cube(h, f, q, {2.0}, oq).norm[0];
  q.side = 8.0;
  CHECK(ops::restricted_lp_norms_cube(h, f, q, {2.0}, oq).norm[0] <= r1);
}

TEST_CASE("dilation and translation invariance") {
  auto cfg = ExperimentConfig::parse("p=1.5,2,3,4\ns_max=4\n");
  const auto fam = gen_family(21, 3, "random-sparse");
  std::vector<FiniteHaarExpansion> dil, tr;
  for (const auto& f : fam) {
    dil.push_back(f.dilated(1));
    // Whole cubes of the coarsest level Sigma uses.
    IntVec m{};
    m[0] = 3;
    tr.push_back(f.translated(m, f.min_level() - cfg.s_max));
  }
  const auto a = run_decay(cfg, fam), b = run_decay(cfg, dil), c = run_decay(cfg, tr);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(b[i].ratio / a[i].ratio - 1) <= 1e-9);
    CHECK(std::abs(c[i].ratio / a[i].ratio - 1) <= 1e-9);
  }
}

TEST_CASE("decomposition check") {
  auto cfg = ExperimentConfig::parse("s_max=2\nM=16\npoints=10\nfamily_size=2\n");
  const auto rep = decomposition_check(cfg);
  CHECK(rep.pass);
  CHECK(rep.points == 60);
  CHECK(rep.rows.size() == 6);
  const auto zero = decomposition_check(cfg, {FiniteHaarExpansion(1)});
  CHECK(zero.pass);
  CHECK(zero.max_discrepancy == 0.0);
  // Doubling M does not raise the discrepancy beyond noise.
  cfg.s_max = 1;
  const auto fam = gen_family(cfg.seed, 1, "random-sparse");
  const auto d1 = decomposition_check(cfg, fam);
  cfg.M = 32;
  const auto d2 = decomposition_check(cfg, fam);
  CHECK(d2.max_discrepancy <= d1.max_discrepancy + 1e-9);
}

TEST_CASE("unconditionality") {
  const auto two = unconditionality_check(2.0, 50, 1);
  CHECK(std::abs(two.constant - 1.0) <= 1e-10);
  CHECK(std::abs(two.min_ratio - 1.0) <= 1e-10);
  const auto a = unconditionality_check(4.0, 1000, 1), b = unconditionality_check(4.0, 1000, 2);
  CHECK(a.constant > 1.0);
  CHECK(std::abs(a.constant / b.constant - 1) <= 0.15);
  // A single coefficient is unchanged by any sign.
  const SignVector e(3);
  CHECK(haar::lp_norm(e.apply(unit_haar()), 4.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("invariant suites") {
  const auto cfg = ExperimentConfig::parse("trials=30\np=2,3\n");
  const auto h = haar_check(cfg);
  REQUIRE(h.size() == 7);
  for (const auto& r : h) CHECK(r.status == "PASS");
  CHECK(h.back().experiment == "unconditionality");
  CHECK(h.back().ratio > 1.0);
  for (const auto& r : sigma_check(cfg)) {
    CHECK(r.status == "PASS");
    CHECK(r.ratio == 0.0);
  }
  const auto o = oracle_check(ExperimentConfig::parse("trials=3\n"));
  REQUIRE(o.size() == 3);
  for (const auto& r : o) CHECK(r.ratio <= 1e-5);
  CHECK_THROWS_AS(oracle_check(ExperimentConfig::parse("n=2\nkernel=smooth2d\n")), Error);
}

TEST_CASE("kernel and Figiel rows") {
  auto cfg = ExperimentConfig::parse("samples=2000\nnormalize=1\n");
  const auto k = kernel_check(cfg);
  double size = 0.0, nholder = 0.0;
  for (const auto& r : k) {
    if (r.experiment == "kernel-size") size = std::max(size, r.ratio);
    if (r.experiment == "kernel-normalized-holder") nholder = std::max(nholder, r.ratio);
  }
  CHECK(size == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(nholder <= 1.0 + 1e-6);
  cfg.limit = 1.5;
  CHECK(exit_code(kernel_check(cfg)) == 2);

  const auto f = figiel_check(ExperimentConfig::parse("s_max=1\nM=4\nlevels=6\n"));
  CHECK(f.size() == 8);
  for (const auto& r : f) {
    CHECK(r.ratio >= 0.0);
    CHECK(r.tail_budget > 0.0);
  }
  CHECK(f.front().experiment == "figiel-haar01");
  CHECK(f.front().ratio == 0.0);
}

TEST_CASE("commands") {
  CHECK(command_names().size() == 7);
  const auto cfg = ExperimentConfig::parse("s_max=4\nfamily_size=2\n");
  const auto d = run_command("decay", cfg);
  CHECK(d.exit_code == 0);
  CHECK(d.report.find("slope experiment=decay p=2 s=0..4") != std::string::npos);
  CHECK(d.report.rfind("kernel=hilbert1d\n", 0) == 0);
  const auto s = run_command("sigma-dump", ExperimentConfig::parse("s_max=1\nfamily_size=1\n"));
  CHECK(s.rows.size() == 2);
  CHECK(s.report.find("sigma: ") != std::string::npos);
  CHECK(s.report.find("eta=1 alpha=") != std::string::npos);
  CHECK_THROWS_AS(run_command("nope", cfg), Error);
  auto bad = cfg;
  bad.family_file = "/nonexistent/family.txt";
  CHECK_THROWS_AS(run_command("decay", bad), Error);
}
