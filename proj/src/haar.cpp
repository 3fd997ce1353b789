// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/haar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace pseudoloc::haar {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

std::int64_t floor_div_pow2(std::int64_t v, int s) { return s >= 63 ? (v < 0 ? -1 : 0) : (v >> s); }
std::int64_t mul_pow2(std::int64_t v, int s) {
  if (s >= 62) fail(ErrorKind::Window, "mesh index overflow");
  return v * (std::int64_t{1} << s);
}

/// Visit every cell index in the half-open box [lo, hi).
void for_each_cell(int dim, const IntVec& lo, const IntVec& hi, const std::function<void(const IntVec&)>& fn) {
  for (int i = 0; i < dim; ++i)
    if (hi[static_cast<std::size_t>(i)] <= lo[static_cast<std::size_t>(i)]) return;
  IntVec c = lo;
  while (true) {
    fn(c);
    int axis = 0;
    while (axis < dim) {
      auto& v = c[static_cast<std::size_t>(axis)];
      if (++v < hi[static_cast<std::size_t>(axis)]) break;
      v = lo[static_cast<std::size_t>(axis)];
      ++axis;
    }
    if (axis == dim) return;
  }
}

/// Bits of the child of the level-k ancestor that contains mesh cell `c` at level L.
std::uint32_t child_bits_of_cell(int dim, const IntVec& c, int L, int k) {
  std::uint32_t bits = 0;
  const int shift = L - k - 1;
  for (int i = 0; i < dim; ++i)
    if (floor_div_pow2(c[static_cast<std::size_t>(i)], shift) & 1) bits |= 1u << i;
  return bits;
}

}  // namespace

double haar_amplitude(const DyadicCube& cube) {
  const int e = cube.level() * cube.dim();
  // 2^{e/2}: floor-halve the exponent and fix parity with one sqrt(2).
  const int half = e >= 0 ? e / 2 : -((-e + 1) / 2);
  const bool odd = (e - 2 * half) != 0;
  const double base = std::ldexp(1.0, half);
  return odd ? base * kSqrt2 : base;
}

int haar_sign(std::uint32_t eta, std::uint32_t child_bits) {
  return (std::popcount(eta & child_bits) & 1) ? -1 : 1;
}

double haar_eval(const DyadicCube& cube, std::uint32_t eta, const Point& x) {
  if (!cube.contains(x)) return 0.0;
  std::uint32_t bits = 0;
  for (int i = 0; i < cube.dim(); ++i) {
    const double t = std::floor(std::ldexp(x[i], cube.level() + 1));
    if (static_cast<std::int64_t>(t) - 2 * cube.index(i) == 1) bits |= 1u << i;
  }
  return haar_sign(eta, bits) * haar_amplitude(cube);
}

double haar_eval(const HaarIndex& h, const Point& x) { return haar_eval(h.cube, h.eta, x); }

// ---------------------------------------------------------------------------

void FiniteHaarExpansion::add(const HaarIndex& h, double alpha) {
  if (h.cube.dim() != dim_) fail(ErrorKind::Precondition, "expansion: dimension mismatch");
  if (!h.cancellative()) fail(ErrorKind::Precondition, "expansion: h^0 is not allowed");
  if (h.eta >= (1u << dim_)) fail(ErrorKind::Precondition, "expansion: signature has too many bits");
  const double v = (coeffs_.count(h) ? coeffs_.at(h) : 0.0) + alpha;
  if (v == 0.0) coeffs_.erase(h);
  else coeffs_[h] = v;
}

void FiniteHaarExpansion::set(const HaarIndex& h, double alpha) {
  coeffs_.erase(h);
  add(h, alpha);
}

double FiniteHaarExpansion::get(const HaarIndex& h) const {
  const auto it = coeffs_.find(h);
  return it == coeffs_.end() ? 0.0 : it->second;
}

int FiniteHaarExpansion::min_level() const {
  if (coeffs_.empty()) fail(ErrorKind::Precondition, "empty expansion has no levels");
  return coeffs_.begin()->first.cube.level();
}

int FiniteHaarExpansion::max_level() const {
  if (coeffs_.empty()) fail(ErrorKind::Precondition, "empty expansion has no levels");
  return coeffs_.rbegin()->first.cube.level();
}

double FiniteHaarExpansion::energy() const {
  CompensatedSum s;
  for (const auto& [h, a] : coeffs_) s.add(a * a);
  return s.value();
}

FiniteHaarExpansion FiniteHaarExpansion::scaled(double c) const {
  FiniteHaarExpansion out(dim_);
  for (const auto& [h, a] : coeffs_) out.add(h, a * c);
  return out;
}

FiniteHaarExpansion FiniteHaarExpansion::plus(const FiniteHaarExpansion& other) const {
  FiniteHaarExpansion out = *this;
  for (const auto& [h, a] : other.coeffs_) out.add(h, a);
  return out;
}

FiniteHaarExpansion FiniteHaarExpansion::dilated(int levels) const {
  FiniteHaarExpansion out(dim_);
  for (const auto& [h, a] : coeffs_)
    out.add(HaarIndex{DyadicCube(dim_, h.cube.level() + levels, h.cube.index()), h.eta}, a);
  return out;
}

FiniteHaarExpansion FiniteHaarExpansion::translated(const IntVec& offset, int offset_level) const {
  FiniteHaarExpansion out(dim_);
  for (const auto& [h, a] : coeffs_) {
    const int k = h.cube.level();
    if (k < offset_level) fail(ErrorKind::Precondition, "translation is not a multiple of the cube side");
    IntVec idx = h.cube.index();
    for (int i = 0; i < dim_; ++i)
      idx[static_cast<std::size_t>(i)] += mul_pow2(offset[static_cast<std::size_t>(i)], k - offset_level);
    out.add(HaarIndex{DyadicCube(dim_, k, idx), h.eta}, a);
  }
  return out;
}

DyadicSet FiniteHaarExpansion::support_cover() const {
  std::vector<DyadicCube> cubes;
  for (const auto& [h, a] : coeffs_) cubes.push_back(h.cube);
  return DyadicSet::from_cubes(dim_, std::move(cubes));
}

std::string FiniteHaarExpansion::to_text() const {
  std::ostringstream os;
  for (const auto& [h, a] : coeffs_) {
    std::string bits;
    for (int i = 0; i < dim_; ++i) bits += ((h.eta >> i) & 1u) ? '1' : '0';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", a);
    os << h.cube.to_string() << " eta=" << bits << " alpha=" << buf << "\n";
  }
  return os.str();
}

FiniteHaarExpansion FiniteHaarExpansion::parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::optional<FiniteHaarExpansion> out;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line.substr(first));
    std::string cube_s, eta_s, alpha_s;
    ls >> cube_s >> eta_s >> alpha_s;
    const std::string where = "haar text line " + std::to_string(lineno) + ": ";
    if (eta_s.rfind("eta=", 0) != 0 || alpha_s.rfind("alpha=", 0) != 0)
      fail(ErrorKind::Parse, where + "expected 'k:(m...) eta=<bits> alpha=<decimal>'");
    const DyadicCube cube = DyadicCube::parse(cube_s);
    const std::string bits = eta_s.substr(4);
    if (bits.size() != static_cast<std::size_t>(cube.dim()))
      fail(ErrorKind::Parse, where + "signature needs one bit per dimension");
    std::uint32_t eta = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] == '1') eta |= 1u << i;
      else if (bits[i] != '0') fail(ErrorKind::Parse, where + "bad signature bit");
    }
    char* end = nullptr;
    const std::string av = alpha_s.substr(6);
    const double alpha = std::strtod(av.c_str(), &end);
    if (av.empty() || *end != '\0' || !std::isfinite(alpha)) fail(ErrorKind::Parse, where + "bad alpha");
    if (eta == 0) fail(ErrorKind::Parse, where + "signature must be nonzero");
    if (!out) out.emplace(cube.dim());
    if (out->dim() != cube.dim()) fail(ErrorKind::Parse, where + "mixed dimensions");
    out->add(HaarIndex{cube, eta}, alpha);
  }
  return out ? *out : FiniteHaarExpansion(1);
}

// ---------------------------------------------------------------------------

StepFunction::StepFunction(int dim, int level, const IntVec& origin, const IntVec& extent)
    : dim_(dim), level_(level), origin_(origin), extent_(extent) {
  if (dim < 1 || dim > kMaxDim) fail(ErrorKind::Precondition, "step function dimension out of range");
  const auto w = dyadic::level_window();
  if (level < w.min_level || level > w.max_level) fail(ErrorKind::Window, "mesh level outside window");
  std::size_t n = 1;
  for (int i = 0; i < dim; ++i) {
    if (extent_[static_cast<std::size_t>(i)] < 0) fail(ErrorKind::Precondition, "negative extent");
    n *= static_cast<std::size_t>(extent_[static_cast<std::size_t>(i)]);
  }
  for (int i = dim; i < kMaxDim; ++i) origin_[static_cast<std::size_t>(i)] = extent_[static_cast<std::size_t>(i)] = 0;
  if (n > (std::size_t{1} << 28)) fail(ErrorKind::Window, "step function mesh too large");
  values_.assign(n, 0.0);
}

double StepFunction::cell_measure() const { return std::ldexp(1.0, -level_ * dim_); }

IntVec StepFunction::cell_index(std::size_t flat) const {
  IntVec c{};
  for (int i = 0; i < dim_; ++i) {
    const auto e = static_cast<std::size_t>(extent_[static_cast<std::size_t>(i)]);
    c[static_cast<std::size_t>(i)] = origin_[static_cast<std::size_t>(i)] + static_cast<std::int64_t>(flat % e);
    flat /= e;
  }
  return c;
}

std::optional<std::size_t> StepFunction::flat_index(const IntVec& cell) const {
  if (values_.empty()) return std::nullopt;
  std::size_t flat = 0;
  std::size_t stride = 1;
  for (int i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const std::int64_t r = cell[u] - origin_[u];
    if (r < 0 || r >= extent_[u]) return std::nullopt;
    flat += static_cast<std::size_t>(r) * stride;
    stride *= static_cast<std::size_t>(extent_[u]);
  }
  return flat;
}

double StepFunction::at(const IntVec& cell) const {
  const auto f = flat_index(cell);
  return f ? values_[*f] : 0.0;
}

double& StepFunction::ref(const IntVec& cell) {
  const auto f = flat_index(cell);
  if (!f) fail(ErrorKind::Precondition, "cell outside the step function box");
  return values_[*f];
}

double StepFunction::eval(const Point& x) const {
  IntVec c{};
  for (int i = 0; i < dim_; ++i)
    c[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(std::ldexp(x[i], level_)));
  return at(c);
}

StepFunction StepFunction::refined(int level) const {
  if (level < level_) fail(ErrorKind::Precondition, "refined: target mesh is coarser");
  if (level == level_) return *this;
  const int r = level - level_;
  IntVec o{}, e{};
  for (int i = 0; i < dim_; ++i) {
    o[static_cast<std::size_t>(i)] = mul_pow2(origin_[static_cast<std::size_t>(i)], r);
    e[static_cast<std::size_t>(i)] = mul_pow2(extent_[static_cast<std::size_t>(i)], r);
  }
  StepFunction out(dim_, level, o, e);
  for (std::size_t f = 0; f < out.values_.size(); ++f) {
    IntVec c = out.cell_index(f);
    for (int i = 0; i < dim_; ++i) c[static_cast<std::size_t>(i)] = floor_div_pow2(c[static_cast<std::size_t>(i)], r);
    out.values_[f] = at(c);
  }
  return out;
}

StepFunction StepFunction::enlarged(const IntVec& lo, const IntVec& hi, int align_level) const {
  const int r = std::max(0, level_ - align_level);
  IntVec o{}, e{};
  for (int i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    std::int64_t a = lo[u];
    std::int64_t b = hi[u] + 1;
    if (!values_.empty()) {
      a = std::min(a, origin_[u]);
      b = std::max(b, origin_[u] + extent_[u]);
    }
    a = mul_pow2(floor_div_pow2(a, r), r);
    b = mul_pow2(-floor_div_pow2(-b, r), r);
    o[u] = a;
    e[u] = b - a;
  }
  StepFunction out(dim_, level_, o, e);
  for (std::size_t f = 0; f < values_.size(); ++f) out.values_[*out.flat_index(cell_index(f))] = values_[f];
  return out;
}

bool StepFunction::nonzero_bounds(IntVec& lo, IntVec& hi) const {
  bool any = false;
  for (std::size_t f = 0; f < values_.size(); ++f) {
    if (values_[f] == 0.0) continue;
    const IntVec c = cell_index(f);
    if (!any) {
      lo = hi = c;
      any = true;
    }
    for (int i = 0; i < dim_; ++i) {
      const auto u = static_cast<std::size_t>(i);
      lo[u] = std::min(lo[u], c[u]);
      hi[u] = std::max(hi[u], c[u]);
    }
  }
  return any;
}

StepFunction StepFunction::plus(const StepFunction& other) const {
  if (other.dim_ != dim_) fail(ErrorKind::Precondition, "step functions of different dimension");
  const int L = std::max(level_, other.level_);
  const StepFunction a = refined(L);
  const StepFunction b = other.refined(L);
  if (a.values_.empty()) return b;
  if (b.values_.empty()) return a;
  IntVec lo{}, hi{};
  for (int i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    lo[u] = b.origin_[u];
    hi[u] = b.origin_[u] + b.extent_[u] - 1;
  }
  StepFunction out = a.enlarged(lo, hi, L);
  for (std::size_t f = 0; f < b.values_.size(); ++f) out.values_[*out.flat_index(b.cell_index(f))] += b.values_[f];
  return out;
}

StepFunction StepFunction::scaled(double c) const {
  StepFunction out = *this;
  for (auto& v : out.values_) v *= c;
  return out;
}

double StepFunction::max_abs_diff(const StepFunction& other) const {
  return plus(other.scaled(-1.0)).max_abs();
}

double StepFunction::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------

StepFunction synthesize(const FiniteHaarExpansion& f) {
  if (f.empty()) return StepFunction::zero(f.dim(), 0);
  return synthesize(f, f.max_level() + 1);
}

StepFunction synthesize(const FiniteHaarExpansion& f, int L) {
  const int n = f.dim();
  if (f.empty()) return StepFunction::zero(n, std::min(L, dyadic::level_window().max_level));
  if (L < f.max_level() + 1) fail(ErrorKind::Precondition, "synthesize: mesh coarser than the finest coefficient");
  if (L > dyadic::level_window().max_level) fail(ErrorKind::Window, "synthesize: mesh level outside window");
  IntVec lo{}, hi{};
  bool first = true;
  for (const auto& [h, a] : f) {
    const int r = L - h.cube.level();
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const std::int64_t a0 = mul_pow2(h.cube.index(i), r);
      const std::int64_t b0 = a0 + mul_pow2(1, r);
      lo[u] = first ? a0 : std::min(lo[u], a0);
      hi[u] = first ? b0 : std::max(hi[u], b0);
    }
    first = false;
  }
  IntVec extent{};
  for (int i = 0; i < n; ++i) extent[static_cast<std::size_t>(i)] = hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
  StepFunction out(n, L, lo, extent);
  for (const auto& [h, alpha] : f) {
    const int k = h.cube.level();
    const int r = L - k;
    const double amp = alpha * haar_amplitude(h.cube);
    IntVec a0{}, b0{};
    for (int i = 0; i < n; ++i) {
      a0[static_cast<std::size_t>(i)] = mul_pow2(h.cube.index(i), r);
      b0[static_cast<std::size_t>(i)] = a0[static_cast<std::size_t>(i)] + mul_pow2(1, r);
    }
    for_each_cell(n, a0, b0, [&](const IntVec& c) {
      out.values()[*out.flat_index(c)] += haar_sign(h.eta, child_bits_of_cell(n, c, L, k)) * amp;
    });
  }
  return out;
}

FiniteHaarExpansion analyze(const StepFunction& g, int a, int b) {
  const int n = g.dim();
  FiniteHaarExpansion out(n);
  if (a > b) return out;
  if (g.level() < b + 1) fail(ErrorKind::Precondition, "analyze: level range exceeds mesh resolution");
  if (g.empty()) return out;
  // integrals[j] maps level-j cube index -> integral of g over it.
  std::map<IntVec, double> current;
  const double cm = g.cell_measure();
  for (std::size_t f = 0; f < g.cell_count(); ++f) current[g.cell_index(f)] = g.values()[f] * cm;
  const std::uint32_t full = 1u << n;
  for (int j = g.level() - 1; j >= a; --j) {
    // Parent integrals, summing children in bit order for a fixed reduction order.
    std::map<IntVec, std::vector<double>> kids;
    for (const auto& [c, v] : current) {
      IntVec p{};
      std::uint32_t bits = 0;
      for (int i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        p[u] = floor_div_pow2(c[u], 1);
        if (c[u] & 1) bits |= 1u << i;
      }
      auto& slot = kids[p];
      if (slot.empty()) slot.assign(full, 0.0);
      slot[bits] = v;
    }
    std::map<IntVec, double> parent;
    for (const auto& [p, ch] : kids) {
      double s = 0.0;
      for (double v : ch) s += v;
      parent[p] = s;
      if (j <= b) {
        const DyadicCube cube(n, j, p);
        const double amp = haar_amplitude(cube);
        for (std::uint32_t eta = 1; eta < full; ++eta) {
          double plus = 0.0, minus = 0.0;
          for (std::uint32_t bits = 0; bits < full; ++bits) (haar_sign(eta, bits) > 0 ? plus : minus) += ch[bits];
          const double alpha = amp * (plus - minus);
          if (alpha != 0.0) out.add(HaarIndex{cube, eta}, alpha);
        }
      }
    }
    current = std::move(parent);
  }
  return out;
}

FiniteHaarExpansion project(const FiniteHaarExpansion& f, int k, Projection mode) {
  FiniteHaarExpansion out(f.dim());
  for (const auto& [h, a] : f) {
    const int lvl = h.cube.level();
    if ((mode == Projection::E && lvl < k) || (mode == Projection::D && lvl == k)) out.add(h, a);
  }
  return out;
}

StepFunction project(const StepFunction& g, int k, Projection mode) {
  if (mode == Projection::D) return project(g, k + 1, Projection::E).plus(project(g, k, Projection::E).scaled(-1.0));
  if (k >= g.level() || g.empty()) return g;
  const int r = g.level() - k;
  IntVec lo = g.origin();
  IntVec hi = g.origin();
  StepFunction out = g.enlarged(lo, hi, k);
  std::map<IntVec, CompensatedSum> sums;
  for (std::size_t f = 0; f < out.cell_count(); ++f) {
    IntVec c = out.cell_index(f);
    for (int i = 0; i < g.dim(); ++i) c[static_cast<std::size_t>(i)] = floor_div_pow2(c[static_cast<std::size_t>(i)], r);
    sums[c].add(out.values()[f]);
  }
  const double per_cube = std::ldexp(1.0, r * g.dim());
  for (std::size_t f = 0; f < out.cell_count(); ++f) {
    IntVec c = out.cell_index(f);
    for (int i = 0; i < g.dim(); ++i) c[static_cast<std::size_t>(i)] = floor_div_pow2(c[static_cast<std::size_t>(i)], r);
    out.values()[f] = sums[c].value() / per_cube;
  }
  return out;
}

double inner_product(const StepFunction& a, const StepFunction& b) {
  const int L = std::max(a.level(), b.level());
  const StepFunction x = a.refined(L);
  const StepFunction y = b.refined(L);
  CompensatedSum s;
  for (std::size_t f = 0; f < x.cell_count(); ++f) {
    if (x.values()[f] == 0.0) continue;
    s.add(x.values()[f] * y.at(x.cell_index(f)));
  }
  return s.value() * x.cell_measure();
}

double inner_product(const StepFunction& a, const HaarIndex& h) {
  const int n = a.dim();
  const int k = h.cube.level();
  if (k >= a.level()) {
    if (h.cancellative()) return 0.0;
    IntVec c = h.cube.index();
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = floor_div_pow2(c[static_cast<std::size_t>(i)], k - a.level());
    return a.at(c) * h.cube.measure_d() * haar_amplitude(h.cube);
  }
  const int r = a.level() - k;
  IntVec lo{}, hi{};
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    lo[u] = std::max(mul_pow2(h.cube.index(i), r), a.origin()[u]);
    hi[u] = std::min(mul_pow2(h.cube.index(i) + 1, r), a.origin()[u] + a.extent()[u]);
  }
  CompensatedSum s;
  for_each_cell(n, lo, hi, [&](const IntVec& c) {
    const double v = a.at(c);
    if (v != 0.0) s.add(h.cancellative() ? haar_sign(h.eta, child_bits_of_cell(n, c, a.level(), k)) * v : v);
  });
  return s.value() * haar_amplitude(h.cube) * a.cell_measure();
}

double lp_norm(const StepFunction& g, double p, const DyadicSet* region) {
  if (!(p >= 1.0) || !std::isfinite(p)) fail(ErrorKind::Precondition, "lp_norm: p must lie in [1, inf)");
  if (region)
    for (const auto& c : *region)
      if (c.level() > g.level()) fail(ErrorKind::Precondition, "lp_norm: region finer than the mesh");
  CompensatedSum s;
  for (std::size_t f = 0; f < g.cell_count(); ++f) {
    const double v = std::abs(g.values()[f]);
    if (v == 0.0) continue;
    if (region && !region->contains(g.cell(f))) continue;
    s.add(p == 1.0 ? v : (p == 2.0 ? v * v : std::pow(v, p)));
  }
  const double total = s.value() * g.cell_measure();
  return p == 1.0 ? total : (p == 2.0 ? std::sqrt(total) : std::pow(total, 1.0 / p));
}

double lp_norm(const FiniteHaarExpansion& f, double p) { return lp_norm(synthesize(f), p); }

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
  else comp_ += (v - t) + sum_;
  sum_ = t;
}

}  // namespace pseudoloc::haar
