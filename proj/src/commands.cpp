// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "harness_detail.hpp"
#include "pseudoloc/harness.hpp"
#include "pseudoloc/oracle.hpp"
#include "pseudoloc/random.hpp"

namespace pseudoloc::harness {

using detail::fmt;
using detail::parallel_for;
using dyadic::DyadicCube;
using dyadic::DyadicSet;
using haar::Projection;
using haar::StepFunction;

namespace {

constexpr double kExact = 1e-12;
constexpr double kOracleTol = 1e-5;

Row make_row(const ExperimentConfig& cfg, const std::string& experiment, double ratio, bool ok) {
  Row r;
  r.experiment = experiment;
  r.kernel = cfg.kernel;
  r.n = cfg.n;
  r.gamma = cfg.gamma;
  r.p = 0.0;
  r.ratio = ratio;
  r.status = ok ? "PASS" : "INVARIANT";
  return r;
}

FiniteHaarExpansion random_expansion(Rng& rng, int dim, int max_terms, int lo, int hi) {
  FiniteHaarExpansion f(dim);
  const auto terms = rng.integer(1, max_terms);
  for (std::int64_t t = 0; t < terms; ++t) {
    const int k = static_cast<int>(rng.integer(lo, hi));
    const std::int64_t cells = std::max<std::int64_t>(static_cast<std::int64_t>(std::ldexp(2.0, k)), 1);
    IntVec m{};
    for (int i = 0; i < dim; ++i) m[static_cast<std::size_t>(i)] = rng.integer(-cells, cells - 1);
    const auto eta = static_cast<std::uint32_t>(rng.integer(1, (std::int64_t{1} << dim) - 1));
    f.add(HaarIndex{DyadicCube(dim, k, m), eta}, rng.normal());
  }
  return f;
}

double coeff_diff(const FiniteHaarExpansion& a, const FiniteHaarExpansion& b) {
  double d = 0.0;
  for (const auto& [h, v] : a) d = std::max(d, std::abs(v - b.get(h)));
  for (const auto& [h, v] : b) d = std::max(d, std::abs(v - a.get(h)));
  return d;
}

/// A second index near `a`: itself, another signature, a child, the parent, a
/// neighbour, or a random cube.
HaarIndex partner(Rng& rng, const HaarIndex& a) {
  const int dim = a.cube.dim();
  const auto etas = (std::int64_t{1} << dim) - 1;
  const auto eta = static_cast<std::uint32_t>(rng.integer(1, etas));
  switch (rng.integer(0, 5)) {
    case 0:
      return a;
    case 1:
      return HaarIndex{a.cube, eta};
    case 2: {
      const auto kids = a.cube.children();
      return HaarIndex{kids[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(kids.size()) - 1))], eta};
    }
    case 3:
      return HaarIndex{a.cube.parent(), eta};
    case 4: {
      IntVec m{};
      m[static_cast<std::size_t>(rng.integer(0, dim - 1))] = rng.sign();
      return HaarIndex{a.cube.translate(m), eta};
    }
    default: {
      IntVec m{};
      for (int i = 0; i < dim; ++i) m[static_cast<std::size_t>(i)] = rng.integer(-3, 3);
      return HaarIndex{DyadicCube(dim, static_cast<int>(rng.integer(-2, 4)), m), eta};
    }
  }
}

struct HaarErrors {
  double ortho = 0, parseval = 0, round_trip = 0, telescoping = 0, projection = 0;
};

HaarErrors haar_instance(Rng& rng) {
  HaarErrors e;
  const int dim = rng.integer(0, 3) == 0 ? 2 : 1;
  const auto f = random_expansion(rng, dim, dim == 1 ? 64 : 16, -2, dim == 1 ? 5 : 3);
  const auto g = haar::synthesize(f);

  for (int t = 0; t < 4; ++t) {
    auto it = f.begin();
    std::advance(it, rng.integer(0, static_cast<std::int64_t>(f.size()) - 1));
    const HaarIndex a = it->first, b = partner(rng, a);
    FiniteHaarExpansion fa(dim);
    fa.add(a, 1.0);
    const double ip = haar::inner_product(haar::synthesize(fa, std::max(a.cube.level(), b.cube.level()) + 1), b);
    e.ortho = std::max(e.ortho, std::abs(ip - (a == b ? 1.0 : 0.0)));
  }

  e.parseval = std::abs(std::pow(haar::lp_norm(g, 2.0), 2) - f.energy()) / f.energy();
  e.round_trip = coeff_diff(haar::analyze(g, f.min_level(), f.max_level()), f);

  const int a = f.min_level(), b = f.max_level();
  StepFunction tele = StepFunction::zero(dim, g.level());
  for (int k = a; k <= b; ++k) tele = tele.plus(haar::project(g, k, Projection::D));
  const auto rhs = haar::project(g, b + 1, Projection::E).plus(haar::project(g, a, Projection::E).scaled(-1.0));
  e.telescoping = tele.max_abs_diff(rhs);

  // E_k E_j = E_min, D_j D_j = D_j, D_k D_j = 0 (k != j), E_k D_j = D_j (j < k) or 0.
  const int j = static_cast<int>(rng.integer(a, b));
  const int k = static_cast<int>(rng.integer(a, b + 1));
  const auto ej = haar::project(g, j, Projection::E), dj = haar::project(g, j, Projection::D);
  double d = haar::project(haar::project(g, k, Projection::E), j, Projection::E)
                 .max_abs_diff(haar::project(g, std::min(j, k), Projection::E));
  d = std::max(d, haar::project(dj, j, Projection::D).max_abs_diff(dj));
  if (k != j) d = std::max(d, haar::project(dj, k, Projection::D).max_abs());
  d = std::max(d, haar::project(dj, k, Projection::E).max_abs_diff(j < k ? dj : dj.scaled(0.0)));
  d = std::max(d, haar::project(ej, j, Projection::D).max_abs());
  const auto fk = haar::project(f, k, Projection::E);
  if (haar::project(fk, j, Projection::E) != haar::project(f, std::min(j, k), Projection::E)) d = 1.0;
  if (!haar::project(haar::project(f, j, Projection::D), j, Projection::E).empty()) d = 1.0;
  e.projection = d;
  return e;
}

bool covers(const std::vector<DyadicCube>& cubes, std::size_t skip, const FiniteHaarExpansion& f, int level) {
  for (const auto& [h, a] : f) {
    if (h.cube.level() != level) continue;
    bool hit = false;
    for (std::size_t i = 0; i < cubes.size() && !hit; ++i) hit = i != skip && cubes[i].contains(h.cube);
    if (!hit) return false;
  }
  return true;
}

DyadicSet unit_intervals(int lo, int hi) {
  std::vector<DyadicCube> c;
  for (int m = lo; m < hi; ++m) c.push_back(DyadicCube::interval(0, m));
  return DyadicSet::from_cubes(1, c);
}

double rel_err(double v, double o) { return o == 0.0 ? std::abs(v) : std::abs(v - o) / std::abs(o); }

struct Extreme {
  double value = 0.0;
  bool ok = true;
};

Extreme max_of(const std::vector<double>& v, double tol) {
  Extreme e;
  for (double x : v) {
    if (!(x <= tol)) e.ok = false;
    if (std::isnan(x) || x > e.value) e.value = x;
  }
  return e;
}

std::string fit_window_report(const std::vector<Row>& rows, const ExperimentConfig& cfg) {
  const int s0 = cfg.s_max - 3 >= 2 ? std::max(cfg.s_min, 3) : cfg.s_min;
  std::ostringstream os;
  if (cfg.s_max - s0 < 2) return "";
  try {
    for (const auto& fit : fit_slope(rows, s0, cfg.s_max, true))
      os << "slope experiment=" << fit.experiment << " p=" << fmt(fit.p) << " s=" << s0 << ".." << cfg.s_max
         << " slope=" << fmt(fit.slope) << " residual=" << fmt(fit.residual) << " points=" << fit.points << "\n";
  } catch (const Error& e) {
    os << "slope unavailable: " << e.what() << "\n";
  }
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<Row> haar_check(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<HaarErrors> errs(static_cast<std::size_t>(cfg.trials));
  parallel_for(errs.size(), cfg.threads, [&](std::size_t t) {
    Rng rng(row_seed(cfg.seed, "haar/" + std::to_string(t)));
    errs[t] = haar_instance(rng);
  });
  std::vector<Row> rows;
  const auto add = [&](const std::string& name, double HaarErrors::*field) {
    std::vector<double> v;
    for (const auto& e : errs) v.push_back(e.*field);
    const auto m = max_of(v, kExact);
    rows.push_back(make_row(cfg, "haar-" + name, m.value, m.ok));
  };
  add("orthonormality", &HaarErrors::ortho);
  add("parseval", &HaarErrors::parseval);
  add("projection", &HaarErrors::projection);
  add("round-trip", &HaarErrors::round_trip);
  add("telescoping", &HaarErrors::telescoping);
  for (double p : cfg.p) {
    const auto u = unconditionality_check(p, cfg.trials, row_seed(cfg.seed, "unconditionality"), cfg.n);
    const bool ok = std::isfinite(u.constant) && u.min_ratio > 0.0 &&
                    (p != 2.0 || (std::abs(u.constant - 1.0) <= 1e-10 && std::abs(u.min_ratio - 1.0) <= 1e-10));
    Row r = make_row(cfg, "unconditionality", u.constant, ok);
    r.p = p;
    rows.push_back(r);
  }
  return rows;
}

std::vector<Row> sigma_check(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<Row> rows;
  FiniteHaarExpansion unit(1);
  unit.add(HaarIndex{DyadicCube::interval(0, 0), 1}, 1.0);
  int hand = 0;
  hand += sigma::sigma_set(unit, 0).sigma != unit_intervals(-4, 5);
  hand += sigma::sigma_set(unit, 1).sigma != unit_intervals(-8, 10);
  rows.push_back(make_row(cfg, "sigma-hand", hand, hand == 0));

  struct Count {
    int support = 0, minimal = 0, monotone = 0;
  };
  std::vector<Count> counts(static_cast<std::size_t>(cfg.trials));
  parallel_for(counts.size(), cfg.threads, [&](std::size_t t) {
    Rng rng(row_seed(cfg.seed, "sigma/" + std::to_string(t)));
    const auto f = random_expansion(rng, 1, 32, 0, 5);
    const int s = static_cast<int>(rng.integer(0, 4));
    const auto r = sigma::sigma_set(f, s);
    Count& c = counts[t];
    c.support += !f.support_cover().is_subset_of(r.sigma);
    for (const auto& [k, cubes] : r.omega_cubes)
      for (std::size_t drop = 0; drop < cubes.size(); ++drop) c.minimal += covers(cubes, drop, f, k + s);
    FiniteHaarExpansion sub(1);
    int i = 0;
    for (const auto& [h, a] : f)
      if (i++ % 2 == 0) sub.add(h, a);
    c.monotone += !sigma::sigma_set(sub, s).sigma.is_subset_of(r.sigma);
    c.monotone += !r.sigma.is_subset_of(sigma::sigma_set(f, s + 1).sigma);
  });
  Count total;
  for (const auto& c : counts) {
    total.support += c.support;
    total.minimal += c.minimal;
    total.monotone += c.monotone;
  }
  rows.push_back(make_row(cfg, "sigma-minimal", total.minimal, total.minimal == 0));
  rows.push_back(make_row(cfg, "sigma-monotone", total.monotone, total.monotone == 0));
  rows.push_back(make_row(cfg, "sigma-support", total.support, total.support == 0));
  return rows;
}

std::vector<Row> oracle_check(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.n != 1) fail(ErrorKind::Precondition, "the oracle check is one-dimensional");
  const auto k = cfg.kernel_spec();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<double> apply(trials), cell(trials), pairing(trials);
  parallel_for(3 * trials, cfg.threads, [&](std::size_t task) {
    const std::size_t t = task % trials;
    const std::size_t kind = task / trials;
    Rng rng(row_seed(cfg.seed, "oracle/" + std::to_string(kind) + "/" + std::to_string(t)));
    if (kind == 0) {
      const auto f = random_expansion(rng, 1, 8, 0, 3);
      const auto g = haar::synthesize(f);
      IntVec lo{}, hi{};
      g.nonzero_bounds(lo, hi);
      const double a = std::ldexp(static_cast<double>(lo[0]), -g.level());
      const double b = std::ldexp(static_cast<double>(hi[0] + 1), -g.level());
      const double x = rng.sign() > 0 ? b + rng.uniform(0.25, 6.0) : a - rng.uniform(0.25, 6.0);
      const Point px = Point::of({x});
      apply[t] = rel_err(ops::apply_T_offsupport(k, f, px), oracle::riemann_apply(k, f, px, 0.0, 20));
    } else if (kind == 1) {
      const auto c = DyadicCube::interval(static_cast<int>(rng.integer(-1, 3)), rng.integer(-4, 4));
      const double side = c.side_d();
      const double gap = side * rng.uniform(0.05, 3.0);
      const double x = rng.sign() > 0 ? c.upper_d(0) + gap : c.lower_d(0) - gap;
      // Truncation radius below the gap (no effect) or cutting into the cell.
      const double eps = rng.integer(0, 1) ? gap * rng.uniform(0.0, 1.0) : gap + side * rng.uniform(0.05, 0.95);
      const Point px = Point::of({x});
      cell[t] = rel_err(kernel::cell_integral_truncated(k, px, c, eps), oracle::riemann_cell(k, px, c, eps, 20));
    } else {
      // Touching cubes leave a log singularity the midpoint rule resolves only at O(h).
      for (;;) {
        const int li = static_cast<int>(rng.integer(0, 2));
        const int lj = static_cast<int>(rng.integer(-1, li));
        const HaarIndex I{DyadicCube::interval(li, rng.integer(-2, 2)), 1};
        const HaarIndex J{DyadicCube::interval(lj, rng.integer(-4, 4)), static_cast<std::uint32_t>(rng.integer(0, 1))};
        if (dyadic::linf_dist(J.cube, I.cube).to_double() < I.cube.side_d()) continue;
        pairing[t] = rel_err(ops::haar_pairing(k, J, I, 0.0, 1e-10), oracle::riemann_pairing(k, J, I, 0.0, 11, 11));
        break;
      }
    }
  });
  std::vector<Row> rows;
  const auto add = [&](const std::string& name, const std::vector<double>& v) {
    const auto m = max_of(v, kOracleTol);
    rows.push_back(make_row(cfg, "oracle-" + name, m.value, m.ok));
  };
  add("apply", apply);
  add("cell", cell);
  add("pairing", pairing);
  return rows;
}

std::vector<Row> kernel_check(const ExperimentConfig& cfg) {
  cfg.validate();
  auto k = cfg.kernel_spec();
  const auto seed = row_seed(cfg.seed, "kernel");
  const auto samples = static_cast<std::size_t>(cfg.samples);
  std::vector<Row> rows;
  const auto emit = [&](const std::string& prefix, const kernel::EstimateReport& rep) {
    for (const auto& sr : rep.per_scale) {
      Row a = make_row(cfg, prefix + "size", sr.c_size, !rep.violation);
      a.s = sr.scale_exp;
      rows.push_back(a);
      Row b = make_row(cfg, prefix + "holder", sr.c_holder, !rep.violation);
      b.s = sr.scale_exp;
      rows.push_back(b);
    }
  };
  const auto rep = kernel::verify_standard_estimates(k, samples, seed, cfg.limit);
  emit("kernel-", rep);
  if (cfg.normalize) {
    k = kernel::normalize(k, rep);
    emit("kernel-normalized-", kernel::verify_standard_estimates(k, samples, seed, cfg.limit));
  }
  return rows;
}

std::vector<Row> figiel_check(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.n != 1) fail(ErrorKind::Precondition, "Figiel sums are one-dimensional");
  const auto k = cfg.kernel_spec();
  const std::vector<DyadicCube> sample = {DyadicCube::interval(0, 0), DyadicCube::interval(0, 1)};
  const int ns = cfg.s_max - cfg.s_min + 1;
  std::vector<std::vector<Row>> out(static_cast<std::size_t>(ns));
  parallel_for(out.size(), cfg.threads, [&](std::size_t t) {
    const int s = cfg.s_min + static_cast<int>(t);
    auto b = cfg.budget();
    if (cfg.M_growth) b.M = cfg.M << s;
    double sum = 0.0, tail = 0.0, pred = 1.0;
    for (const auto& fr : ops::figiel_condition_sum(k, s, b, sample)) {
      std::string name = ops::to_string(fr.cls);
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
      Row r = make_row(cfg, "figiel-" + name, fr.sum / fr.predicted, std::isfinite(fr.sum));
      r.s = s;
      r.tail_budget = fr.tail / fr.predicted;
      out[t].push_back(r);
      sum += fr.sum;
      tail += fr.tail;
      pred = fr.predicted;
    }
    Row r = make_row(cfg, "figiel-total", sum / pred, std::isfinite(sum));
    r.s = s;
    r.tail_budget = tail / pred;
    out[t].push_back(r);
  });
  std::vector<Row> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return std::tie(a.experiment, a.s) < std::tie(b.experiment, b.s); });
  return rows;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"decay",      "decompose-check", "kernel-check", "haar-check",
                                                 "sigma-dump", "figiel-sum",      "oracle"};
  return names;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& cfg) {
  cfg.validate();
  CommandResult res;
  std::ostringstream os;
  os << cfg.describe();
  if (name == "decay") {
    res.rows = run_decay(cfg);
    os << fit_window_report(res.rows, cfg);
  } else if (name == "decompose-check") {
    const auto rep = decomposition_check(cfg);
    res.rows = rep.rows;
    os << "points=" << rep.points << "\nmax_discrepancy=" << fmt(rep.max_discrepancy)
       << "\nmax_budget=" << fmt(rep.max_budget) << "\nmax_excess=" << fmt(rep.max_excess)
       << "\nresult=" << (rep.pass ? "PASS" : "FAIL") << "\n";
  } else if (name == "kernel-check") {
    res.rows = kernel_check(cfg);
    const auto k = cfg.kernel_spec();
    const auto rep = kernel::verify_standard_estimates(k, static_cast<std::size_t>(cfg.samples),
                                                       row_seed(cfg.seed, "kernel"), cfg.limit);
    os << "c_size=" << fmt(rep.c_size) << "\nc_holder=" << fmt(rep.c_holder)
       << "\nc_holder_sum=" << fmt(rep.c_holder_sum) << "\nseries_bias=" << fmt(rep.series_bias)
       << "\nsamples=" << rep.samples << "\n";
    if (cfg.normalize) {
      const auto nk = kernel::normalize(k, rep);
      const auto nr = kernel::verify_standard_estimates(nk, static_cast<std::size_t>(cfg.samples),
                                                        row_seed(cfg.seed, "kernel"), cfg.limit);
      os << "normalized_scale=" << fmt(nk.scale) << "\nnormalized_c_size=" << fmt(nr.c_size)
         << "\nnormalized_c_holder=" << fmt(nr.c_holder) << "\n";
    }
  } else if (name == "haar-check") {
    res.rows = haar_check(cfg);
    const auto more = sigma_check(cfg);
    res.rows.insert(res.rows.end(), more.begin(), more.end());
  } else if (name == "sigma-dump") {
    const auto fam = family_of(cfg);
    for (std::size_t i = 0; i < fam.size(); ++i)
      for (int s = cfg.s_min; s <= cfg.s_max; ++s) {
        const auto r = sigma::sigma_set(fam[i], s);
        os << "f=" << i << " s=" << s << "\n";
        if (s == cfg.s_min) os << fam[i].to_text();
        for (const auto& [k, cubes] : r.omega_cubes) {
          os << "omega k=" << k << ":";
          for (const auto& c : cubes) os << " " << c.to_string();
          os << "\n";
        }
        os << "sigma:";
        for (const auto& c : r.sigma) os << " " << c.to_string();
        const double measure = r.sigma.empty() ? 0.0 : r.sigma.measure().to_double();
        os << "\nmeasure=" << fmt(measure) << "\n";
        Row row = make_row(cfg, "sigma", measure, true);
        row.s = s;
        row.f_id = static_cast<int>(i);
        res.rows.push_back(row);
      }
  } else if (name == "figiel-sum") {
    res.rows = figiel_check(cfg);
  } else if (name == "oracle") {
    res.rows = oracle_check(cfg);
  } else {
    fail(ErrorKind::Precondition, "unknown command '" + name + "'");
  }
  if (name != "sigma-dump" && name != "decay" && name != "decompose-check")
    for (const auto& r : res.rows)
      os << r.experiment << (r.p != 0.0 ? " p=" + fmt(r.p) : "") << " s=" << r.s << " value=" << fmt(r.ratio)
         << " " << r.status << "\n";
  res.exit_code = exit_code(res.rows);
  os << "exit=" << res.exit_code << "\n";
  res.report = os.str();
  return res;
}

}  // namespace pseudoloc::harness
