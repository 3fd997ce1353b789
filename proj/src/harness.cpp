// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

#include "pseudoloc/random.hpp"
#include "harness_detail.hpp"

namespace pseudoloc::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(ErrorKind::Parse, "bad number for " + key + ": '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_real(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9) fail(ErrorKind::Parse, "bad integer for " + key + ": '" + v + "'");
  return static_cast<int>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(ErrorKind::Parse, "bad flag for " + key + ": '" + v + "'");
}

}  // namespace

namespace detail {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Runs fn(0..count-1) on a pool; each index writes only its own slot.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

const char* status_of(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Numeric:
    case ErrorKind::Window:
      return "BUDGET";
    default:
      return "INVARIANT";
  }
}

}  // namespace detail

namespace {

using detail::fmt;
using detail::parallel_for;
using detail::status_of;

Point lo_point(const std::array<dyadic::Dyadic, kMaxDim>& v, int n) {
  Point p;
  p.dim = n;
  for (int i = 0; i < n; ++i) p[i] = v[static_cast<std::size_t>(i)].to_double();
  return p;
}

HaarIndex random_index(Rng& rng, int n, int level, std::int64_t shift = 0) {
  IntVec m{};
  const std::int64_t cells = std::int64_t{1} << level;
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = rng.integer(0, cells - 1) + shift * cells;
  const auto eta = static_cast<std::uint32_t>(rng.integer(1, (std::int64_t{1} << n) - 1));
  return HaarIndex{dyadic::DyadicCube(n, level, m), eta};
}

FiniteHaarExpansion random_sparse(Rng& rng, int n, int terms) {
  FiniteHaarExpansion f(n);
  for (int t = 0; t < terms; ++t) f.add(random_index(rng, n, static_cast<int>(rng.integer(0, 5))), rng.normal());
  return f;
}

// Cell averages of a smoothed indicator of a random box inside [0,1)^n.
FiniteHaarExpansion bump(Rng& rng, int n) {
  const int L = n == 1 ? 6 : 4;
  std::array<double, kMaxDim> c{}, w{};
  for (int i = 0; i < n; ++i) {
    c[static_cast<std::size_t>(i)] = rng.uniform(0.3, 0.7);
    w[static_cast<std::size_t>(i)] = rng.uniform(0.1, 0.25);
  }
  IntVec ext{};
  for (int i = 0; i < n; ++i) ext[static_cast<std::size_t>(i)] = std::int64_t{1} << L;
  haar::StepFunction g(n, L, IntVec{}, ext);
  const double h = std::ldexp(1.0, -L);
  for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
    const IntVec cell = g.cell_index(flat);
    double v = 1.0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      // Two-point Gauss average of 0.5 [tanh((t - a)/d) - tanh((t - b)/d)].
      const double mid = (static_cast<double>(cell[k]) + 0.5) * h, off = 0.5 * h / std::sqrt(3.0);
      const double a = c[k] - w[k], b = c[k] + w[k], d = 0.25 * w[k];
      double acc = 0.0;
      for (double t : {mid - off, mid + off}) acc += 0.25 * (std::tanh((t - a) / d) - std::tanh((t - b) / d));
      v *= acc;
    }
    g.values()[flat] = v;
  }
  return haar::analyze(g, 0, L - 1);
}

// A coarse term plus fine terms hugging the ends of the support, and one
// detached fine cube, so that Sigma has many boundary pieces close to mass.
FiniteHaarExpansion adversarial(Rng& rng, int n) {
  FiniteHaarExpansion f(n);
  f.add(HaarIndex{dyadic::DyadicCube::unit(n), 1}, rng.normal());
  for (int t = 0; t < 8; ++t) {
    const int level = static_cast<int>(rng.integer(3, 5));
    IntVec m{};
    const std::int64_t last = (std::int64_t{1} << level) - 1;
    for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = rng.integer(0, last);
    m[0] = (t % 2) ? last : 0;
    const auto eta = static_cast<std::uint32_t>(rng.integer(1, (std::int64_t{1} << n) - 1));
    f.add(HaarIndex{dyadic::DyadicCube(n, level, m), eta}, rng.normal());
  }
  f.add(random_index(rng, n, 5, 3), rng.normal());
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::set(const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in), v = trim(value_in);
  if (key == "kernel") {
    kernel = v;
  } else if (key == "gamma") {
    gamma = to_real(key, v);
  } else if (key == "scale" || key == "c") {
    scale = to_real(key, v);
  } else if (key == "n") {
    n = to_int(key, v);
  } else if (key == "p") {
    p.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) p.push_back(to_real(key, trim(item)));
  } else if (key == "s_min") {
    s_min = to_int(key, v);
  } else if (key == "s_max") {
    s_max = to_int(key, v);
  } else if (key == "profile") {
    profile = v;
  } else if (key == "family_size") {
    family_size = to_int(key, v);
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(to_int(key, v));
  } else if (key == "M") {
    M = to_int(key, v);
  } else if (key == "levels") {
    levels = to_int(key, v);
  } else if (key == "R") {
    R = to_real(key, v);
  } else if (key == "R_factor") {
    R_factor = to_real(key, v);
  } else if (key == "quad_tol") {
    quad_tol = to_real(key, v);
  } else if (key == "rel_tol") {
    rel_tol = to_real(key, v);
  } else if (key == "tol") {
    tol = to_real(key, v);
  } else if (key == "points") {
    points = to_int(key, v);
  } else if (key == "trials") {
    trials = to_int(key, v);
  } else if (key == "q_variant") {
    q_variant = to_bool(key, v);
  } else if (key == "l1_variant") {
    l1_variant = to_bool(key, v);
  } else if (key == "threads") {
    threads = to_int(key, v);
  } else if (key == "samples") {
    samples = to_int(key, v);
  } else if (key == "limit") {
    limit = to_real(key, v);
  } else if (key == "normalize") {
    normalize = to_bool(key, v);
  } else if (key == "M_growth") {
    M_growth = to_bool(key, v);
  } else if (key == "family_file") {
    family_file = v;
  } else if (key == "output") {
    output = v;
  } else {
    fail(ErrorKind::Parse, "unknown config key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  if (p.empty()) fail(ErrorKind::Precondition, "no exponents");
  for (double q : p)
    if (!(q > 1.0) || !std::isfinite(q)) fail(ErrorKind::Precondition, "exponents must exceed 1");
  if (s_min < 0 || s_max < s_min) fail(ErrorKind::Precondition, "need 0 <= s_min <= s_max");
  if (n < 1 || n > kMaxDim) fail(ErrorKind::Precondition, "dimension out of range");
  if (family_size < 1) fail(ErrorKind::Precondition, "family_size must be at least 1");
  if (!(R_factor >= 1.0)) fail(ErrorKind::Precondition, "R_factor must be at least 1");
  if (M < 1) fail(ErrorKind::Precondition, "M must be at least 1");
  if (samples < 1) fail(ErrorKind::Precondition, "samples must be at least 1");
  if (points < 1 || trials < 1) fail(ErrorKind::Precondition, "points and trials must be at least 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail(ErrorKind::Precondition, "gamma must lie in (0, 1]");
  if (q_variant && (n != 1 || kernel != "hilbert1d"))
    fail(ErrorKind::Precondition, "the cube variant needs n = 1 and hilbert1d");
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

kernel::KernelSpec ExperimentConfig::kernel_spec() const {
  auto k = kernel::KernelSpec::by_name(kernel, gamma, scale);
  if (k.dim != n) fail(ErrorKind::Precondition, "kernel dimension differs from n");
  return k;
}

ops::TruncationBudget ExperimentConfig::budget() const {
  ops::TruncationBudget b;
  b.M = M;
  b.levels = levels;
  b.quad_tol = quad_tol;
  return b;
}

std::string ExperimentConfig::describe() const {
  std::ostringstream os;
  const double g = kernel_spec().gamma;
  os << "kernel=" << kernel << "\nn=" << n << "\ngamma=" << fmt(g) << "\n";
  for (double q : p)
    os << "p=" << fmt(q) << " p'=" << fmt(sigma::conjugate(q)) << " exponent=" << fmt(sigma::decay_exponent(q, g))
       << "\n";
  os << "s=" << s_min << ".." << s_max << "\nM=" << M << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------

int SignVector::operator()(const HaarIndex& h) const {
  std::uint64_t s = mix_seed(seed_, static_cast<std::uint64_t>(h.cube.level()) * 0x9e3779b97f4a7c15ULL + h.eta);
  for (int i = 0; i < h.cube.dim(); ++i) s = mix_seed(s, static_cast<std::uint64_t>(h.cube.index(i)));
  return (s >> 63) ? 1 : -1;
}

FiniteHaarExpansion SignVector::apply(const FiniteHaarExpansion& f) const {
  FiniteHaarExpansion out(f.dim());
  for (const auto& [h, a] : f) out.set(h, (*this)(h) * a);
  return out;
}

std::vector<FiniteHaarExpansion> gen_family(std::uint64_t seed, int count, const std::string& profile, int n,
                                            double p) {
  if (count < 1) fail(ErrorKind::Precondition, "family size must be at least 1");
  if (profile != "random-sparse" && profile != "bump" && profile != "adversarial-boundary")
    fail(ErrorKind::Precondition, "unknown profile '" + profile + "'");
  std::vector<FiniteHaarExpansion> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, hash_key(profile) + static_cast<std::uint64_t>(i)));
    FiniteHaarExpansion f(n);
    if (profile == "random-sparse")
      f = random_sparse(rng, n, static_cast<int>(rng.integer(4, 32)));
    else if (profile == "bump")
      f = bump(rng, n);
    else
      f = adversarial(rng, n);
    const double nrm = haar::lp_norm(f, p);
    out.push_back(nrm > 0.0 ? f.scaled(1.0 / nrm) : f);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<FiniteHaarExpansion> family_of(const ExperimentConfig& cfg) {
  if (cfg.family_file.empty()) return gen_family(cfg.seed, cfg.family_size, cfg.profile, cfg.n, cfg.p.front());
  std::ifstream in(cfg.family_file);
  if (!in) fail(ErrorKind::Io, "cannot read " + cfg.family_file);
  std::vector<FiniteHaarExpansion> out;
  std::string line, block;
  const auto flush = [&] {
    if (block.find_first_not_of(" \t\r\n") == std::string::npos) {
      block.clear();
      return;
    }
    auto f = FiniteHaarExpansion::parse(block);
    if (f.dim() != cfg.n) fail(ErrorKind::Precondition, "family dimension differs from n");
    out.push_back(std::move(f));
    block.clear();
  };
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) flush();
    else block += line + "\n";
  }
  flush();
  if (out.empty()) fail(ErrorKind::Parse, cfg.family_file + " holds no expansion");
  return out;
}

std::string csv_header() { return "experiment,kernel,n,gamma,p,s,f_id,ratio,tail_budget,status"; }

void write_csv(std::ostream& os, const std::vector<Row>& rows) {
  os << csv_header() << "\n";
  for (const auto& r : rows)
    os << r.experiment << "," << r.kernel << "," << r.n << "," << fmt(r.gamma) << "," << fmt(r.p) << "," << r.s
       << "," << r.f_id << "," << fmt(r.ratio) << "," << fmt(r.tail_budget) << "," << r.status << "\n";
}

int exit_code(const std::vector<Row>& rows) {
  int code = 0;
  for (const auto& r : rows) {
    if (r.status == "INVARIANT") return 2;
    if (r.status != "PASS") code = 1;
  }
  return code;
}

std::uint64_t row_seed(std::uint64_t seed, const std::string& key) { return mix_seed(seed, hash_key(key)); }

namespace {

void sort_rows(std::vector<Row>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.experiment, a.p, a.s, a.f_id) < std::tie(b.experiment, b.p, b.s, b.f_id);
  });
}

/// Box radius: twice the half-width of Sigma's hull at the largest s.
double auto_radius(const FiniteHaarExpansion& f, int s) {
  const auto S = sigma::sigma_set(f, s).sigma;
  if (S.empty()) return 0.0;
  std::array<dyadic::Dyadic, kMaxDim> lo{}, hi{};
  S.hull(lo, hi);
  double w = 0.0;
  for (int i = 0; i < f.dim(); ++i)
    w = std::max(w, hi[static_cast<std::size_t>(i)].to_double() - lo[static_cast<std::size_t>(i)].to_double());
  return w;
}

}  // namespace

std::vector<Row> run_decay(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_decay(cfg, family_of(cfg));
}

std::vector<Row> run_decay(const ExperimentConfig& cfg, const std::vector<FiniteHaarExpansion>& family) {
  cfg.validate();
  const auto k = cfg.kernel_spec();
  const double csize = ops::kernel_constants(k).c_size;
  const int ns = cfg.s_max - cfg.s_min + 1;
  const std::size_t tasks = family.size() * static_cast<std::size_t>(ns);
  std::vector<std::vector<Row>> out(tasks);
  const auto hilbert = kernel::KernelSpec::hilbert1d(1.0 / 3.14159265358979323846);

  parallel_for(tasks, cfg.threads, [&](std::size_t t) {
    const int fid = static_cast<int>(t / static_cast<std::size_t>(ns));
    const int s = cfg.s_min + static_cast<int>(t % static_cast<std::size_t>(ns));
    const auto& f = family[static_cast<std::size_t>(fid)];
    Row base;
    base.kernel = k.name();
    base.n = cfg.n;
    base.gamma = k.gamma;
    base.s = s;
    base.f_id = fid;
    auto& rows = out[t];
    const auto flagged = [&](const std::string& exp, double p, const char* status) {
      Row r = base;
      r.experiment = exp;
      r.p = p;
      r.ratio = kNaN;
      r.tail_budget = kNaN;
      r.status = status;
      rows.push_back(r);
    };
    if (f.empty()) {
      for (double p : cfg.p) {
        Row r = base;
        r.experiment = "decay";
        r.p = p;
        rows.push_back(r);
      }
      return;
    }
    std::vector<double> ps = cfg.p;
    if (cfg.l1_variant) ps.push_back(1.0);
    try {
      const auto S = sigma::sigma_set(f, s).sigma;
      ops::RestrictedOptions opt;
      opt.rel_tol = cfg.rel_tol;
      opt.R = cfg.R > 0.0 ? cfg.R : cfg.R_factor * auto_radius(f, cfg.s_max);
      const auto res = ops::restricted_lp_norms(k, f, S, ps, opt);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const double fp = haar::lp_norm(f, ps[i]);
        Row r = base;
        r.experiment = ps[i] == 1.0 && i == cfg.p.size() ? "decay-l1" : "decay";
        r.p = ps[i];
        r.ratio = res.norm[i] / fp / csize;
        r.tail_budget = (res.quad_error[i] + res.tail[i]) / fp / csize;
        r.status = res.converged ? "PASS" : "BUDGET";
        if (!std::isfinite(r.ratio) || r.ratio < 0.0) r.status = "INVARIANT";
        rows.push_back(r);
      }
    } catch (const Error& e) {
      for (std::size_t i = 0; i < ps.size(); ++i)
        flagged(ps[i] == 1.0 && i == cfg.p.size() ? "decay-l1" : "decay", ps[i], status_of(e));
    }
    if (!cfg.q_variant) return;
    const auto g = haar::synthesize(f);
    for (double p : cfg.p) {
      try {
        const double fp = haar::lp_norm(g, p);
        const double e = sigma::decay_exponent(p, 1.0);
        const auto Q = sigma::select_q_cube(g, p, (1.0 + s) * std::exp2(-s * e) * fp);
        const auto Qs = sigma::q_expansion(Q, s, p, 1.0);
        ops::RestrictedOptions opt;
        opt.rel_tol = cfg.rel_tol;
        const auto res = ops::restricted_lp_norms_cube(hilbert, f, Qs, {p}, opt);
        Row r = base;
        r.experiment = "decay-q";
        r.p = p;
        r.ratio = res.norm[0] / fp;
        r.tail_budget = (res.quad_error[0] + res.tail[0]) / fp;
        r.status = res.converged ? "PASS" : "BUDGET";
        if (!std::isfinite(r.ratio) || r.ratio < 0.0) r.status = "INVARIANT";
        rows.push_back(r);
      } catch (const Error& e) {
        flagged("decay-q", p, status_of(e));
      }
    }
  });
  std::vector<Row> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  sort_rows(rows);
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<SlopeFit> fit_slope(const std::vector<Row>& rows, int s0, int s1, bool remove_poly) {
  std::map<std::tuple<std::string, double, double>, std::map<int, double>> best;
  for (const auto& r : rows) {
    if (r.s < s0 || r.s > s1 || r.status != "PASS" || !(r.ratio > 0.0)) continue;
    auto& m = best[{r.experiment, r.p, r.gamma}];
    m[r.s] = std::max(m[r.s], r.ratio);
  }
  std::vector<SlopeFit> out;
  for (const auto& [key, m] : best) {
    if (m.size() < 3) fail(ErrorKind::Precondition, "slope fit needs at least 3 distinct s values");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double cnt = static_cast<double>(m.size());
    for (const auto& [s, v] : m) {
      const double y = std::log2(remove_poly ? v / (1.0 + s) : v);
      sx += s;
      sy += y;
      sxx += static_cast<double>(s) * s;
      sxy += s * y;
    }
    const double den = cnt * sxx - sx * sx;
    if (den == 0.0) fail(ErrorKind::Precondition, "degenerate slope fit");
    SlopeFit fit;
    std::tie(fit.experiment, fit.p, fit.gamma) = key;
    fit.slope = (cnt * sxy - sx * sy) / den;
    const double icpt = (sy - fit.slope * sx) / cnt;
    double rss = 0.0;
    for (const auto& [s, v] : m) {
      const double e = std::log2(remove_poly ? v / (1.0 + s) : v) - (icpt + fit.slope * s);
      rss += e * e;
    }
    fit.residual = std::sqrt(rss / cnt);
    fit.points = static_cast<int>(m.size());
    out.push_back(fit);
  }
  return out;
}

// ---------------------------------------------------------------------------

DecompositionReport decomposition_check(const ExperimentConfig& cfg) {
  cfg.validate();
  return decomposition_check(cfg, family_of(cfg));
}

DecompositionReport decomposition_check(const ExperimentConfig& cfg,
                                        const std::vector<FiniteHaarExpansion>& family) {
  cfg.validate();
  const auto k = cfg.kernel_spec();
  const auto b = cfg.budget();
  const int ns = cfg.s_max - cfg.s_min + 1;
  const std::size_t tasks = family.size() * static_cast<std::size_t>(ns);
  struct Slot {
    Row row;
    double excess = -std::numeric_limits<double>::infinity();
    double budget = 0.0;
    std::size_t points = 0;
  };
  std::vector<Slot> out(tasks);
  parallel_for(tasks, cfg.threads, [&](std::size_t t) {
    const int fid = static_cast<int>(t / static_cast<std::size_t>(ns));
    const int s = cfg.s_min + static_cast<int>(t % static_cast<std::size_t>(ns));
    const auto& f = family[static_cast<std::size_t>(fid)];
    Slot& slot = out[t];
    Row& r = slot.row;
    r.experiment = "decompose";
    r.kernel = k.name();
    r.n = cfg.n;
    r.gamma = k.gamma;
    r.p = 0.0;
    r.s = s;
    r.f_id = fid;
    if (f.empty()) {
      slot.excess = -cfg.tol;
      slot.budget = cfg.tol;
      r.tail_budget = cfg.tol;
      return;
    }
    try {
      const auto S = sigma::sigma_set(f, s).sigma;
      const auto phi = ops::phi_tilde_apply(k, f, s, b);
      const ops::PsiEvaluator psi(k, f, s, cfg.quad_tol);
      const ops::TEvaluator T(k, haar::synthesize(f));
      std::array<dyadic::Dyadic, kMaxDim> lo{}, hi{};
      S.hull(lo, hi);
      const Point a = lo_point(lo, cfg.n), c = lo_point(hi, cfg.n);
      Rng rng(row_seed(cfg.seed, "decompose/" + std::to_string(fid) + "/" + std::to_string(s)));
      double worst = 0.0, worst_budget = 0.0, excess = -std::numeric_limits<double>::infinity();
      int got = 0, tries = 0;
      while (got < cfg.points) {
        if (++tries > 1000 * cfg.points) fail(ErrorKind::Numeric, "could not sample the complement");
        Point x;
        x.dim = cfg.n;
        for (int i = 0; i < cfg.n; ++i) {
          const double w = c[i] - a[i];
          x[i] = rng.uniform(a[i] - w, c[i] + w);
        }
        if (S.contains(x)) continue;
        ++got;
        const double lhs = T.apply(x);
        const double rhs = phi.value.eval(x) + psi.value(x);
        const double d = std::abs(lhs - rhs);
        const double bud = ops::phi_tilde_tail_at(k, f, s, b.M, x) + cfg.tol;
        if (d - bud > excess) {
          excess = d - bud;
          worst = d;
          worst_budget = bud;
        }
      }
      slot.excess = excess;
      slot.budget = worst_budget;
      slot.points = static_cast<std::size_t>(got);
      r.ratio = worst;
      r.tail_budget = worst_budget;
      r.status = excess <= 0.0 ? "PASS" : "INVARIANT";
    } catch (const Error& e) {
      r.ratio = kNaN;
      r.tail_budget = kNaN;
      r.status = status_of(e);
    }
  });
  DecompositionReport rep;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  for (auto& slot : out) {
    rep.points += slot.points;
    if (slot.row.status != "PASS") rep.pass = false;
    if (std::isfinite(slot.row.ratio)) rep.max_discrepancy = std::max(rep.max_discrepancy, slot.row.ratio);
    rep.max_budget = std::max(rep.max_budget, slot.budget);
    rep.max_excess = std::max(rep.max_excess, slot.excess);
    rep.rows.push_back(slot.row);
  }
  sort_rows(rep.rows);
  return rep;
}

// ---------------------------------------------------------------------------

UnconditionalityReport unconditionality_check(double p, int trials, std::uint64_t seed, int n) {
  if (trials < 1) fail(ErrorKind::Precondition, "need at least one trial");
  if (!(p >= 1.0)) fail(ErrorKind::Precondition, "exponent must be at least 1");
  UnconditionalityReport rep;
  rep.trials = trials;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    const auto f = random_sparse(rng, n, 32);
    const double base = haar::lp_norm(f, p);
    if (!(base > 0.0)) continue;
    const SignVector eps(rng.next());
    const double r = haar::lp_norm(eps.apply(f), p) / base;
    rep.constant = std::max(rep.constant, r);
    rep.min_ratio = std::min(rep.min_ratio, r);
  }
  return rep;
}

}  // namespace pseudoloc::harness
