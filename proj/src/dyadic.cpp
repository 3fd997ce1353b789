// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/dyadic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace pseudoloc::dyadic {

namespace {

using i128 = __int128;

constexpr i128 kI64Max = static_cast<i128>(INT64_MAX);
constexpr i128 kI64Min = static_cast<i128>(INT64_MIN);

Dyadic normalize_wide(i128 mant, int exp) {
  if (mant == 0) return Dyadic();
  while ((mant & 1) == 0) {
    mant /= 2;
    ++exp;
  }
  if (mant > kI64Max || mant < kI64Min)
    fail(ErrorKind::Numeric, "dyadic rational mantissa overflow");
  return Dyadic(static_cast<std::int64_t>(mant), exp);
}

std::atomic<int> g_min_level{-16};
std::atomic<int> g_max_level{16};

std::int64_t floor_shift(std::int64_t v, int s) {
  // Arithmetic right shift is floor division by 2^s for negative values too.
  return s >= 63 ? (v < 0 ? -1 : 0) : (v >> s);
}

}  // namespace

Dyadic::Dyadic(std::int64_t mant, int exp) : mant_(mant), exp_(exp) {
  if (mant_ == 0) {
    exp_ = 0;
    return;
  }
  while ((mant_ & 1) == 0) {
    mant_ /= 2;
    ++exp_;
  }
}

Dyadic Dyadic::from_double(double v) {
  if (!std::isfinite(v)) fail(ErrorKind::Domain, "Dyadic::from_double: non-finite value");
  if (v == 0.0) return Dyadic();
  int e = 0;
  const double frac = std::frexp(v, &e);  // v = frac * 2^e, 0.5 <= |frac| < 1
  const auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
  return Dyadic(mant, e - 53);
}

double Dyadic::to_double() const { return std::ldexp(static_cast<double>(mant_), exp_); }

std::string Dyadic::to_string() const {
  std::ostringstream os;
  if (exp_ >= 0 && exp_ < 62) {
    os << static_cast<long long>(mant_) * (1LL << exp_);
  } else {
    os.precision(17);
    os << to_double();
  }
  return os.str();
}

Dyadic operator+(const Dyadic& a, const Dyadic& b) {
  if (a.mant_ == 0) return b;
  if (b.mant_ == 0) return a;
  const int e = std::min(a.exp_, b.exp_);
  const int sa = a.exp_ - e;
  const int sb = b.exp_ - e;
  if (sa > 62 || sb > 62) fail(ErrorKind::Numeric, "dyadic rational exponent gap too large");
  const i128 ma = static_cast<i128>(a.mant_) << sa;
  const i128 mb = static_cast<i128>(b.mant_) << sb;
  return normalize_wide(ma + mb, e);
}

Dyadic operator*(const Dyadic& a, const Dyadic& b) {
  if (a.mant_ == 0 || b.mant_ == 0) return Dyadic();
  return normalize_wide(static_cast<i128>(a.mant_) * static_cast<i128>(b.mant_), a.exp_ + b.exp_);
}

std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b) {
  const int sa = a.mant_ > 0 ? 1 : (a.mant_ < 0 ? -1 : 0);
  const int sb = b.mant_ > 0 ? 1 : (b.mant_ < 0 ? -1 : 0);
  if (sa != sb) return sa <=> sb;
  if (sa == 0) return std::strong_ordering::equal;
  const int e = std::min(a.exp_, b.exp_);
  const int da = a.exp_ - e;
  const int db = b.exp_ - e;
  // With odd mantissas below 2^63 a gap of 64 or more decides by magnitude alone.
  if (da >= 64) return sa > 0 ? std::strong_ordering::greater : std::strong_ordering::less;
  if (db >= 64) return sa > 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  const i128 ma = static_cast<i128>(a.mant_) << da;
  const i128 mb = static_cast<i128>(b.mant_) << db;
  if (ma < mb) return std::strong_ordering::less;
  if (ma > mb) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Dyadic max(const Dyadic& a, const Dyadic& b) { return a < b ? b : a; }
Dyadic min(const Dyadic& a, const Dyadic& b) { return b < a ? b : a; }

LevelWindow level_window() { return LevelWindow{g_min_level.load(), g_max_level.load()}; }

void set_level_window(LevelWindow w) {
  if (w.min_level > w.max_level) fail(ErrorKind::Precondition, "level window is empty");
  g_min_level.store(w.min_level);
  g_max_level.store(w.max_level);
}

// ---------------------------------------------------------------------------

DyadicCube::DyadicCube(int dim, int level, const IntVec& index)
    : dim_(dim), level_(level), index_(index) {
  if (dim < 1 || dim > kMaxDim) fail(ErrorKind::Precondition, "cube dimension out of range");
  const LevelWindow w = level_window();
  if (level < w.min_level || level > w.max_level)
    fail(ErrorKind::Window, "cube level " + std::to_string(level) + " outside window [" +
                                std::to_string(w.min_level) + ", " + std::to_string(w.max_level) + "]");
  for (int i = dim; i < kMaxDim; ++i) index_[static_cast<std::size_t>(i)] = 0;
}

DyadicCube DyadicCube::interval(int level, std::int64_t index) {
  return DyadicCube(1, level, IntVec{index, 0, 0});
}

double DyadicCube::side_d() const { return std::ldexp(1.0, -level_); }
double DyadicCube::lower_d(int i) const { return std::ldexp(static_cast<double>(index(i)), -level_); }
double DyadicCube::upper_d(int i) const { return std::ldexp(static_cast<double>(index(i) + 1), -level_); }
double DyadicCube::center_d(int i) const {
  return std::ldexp(static_cast<double>(2 * index(i) + 1), -level_ - 1);
}
double DyadicCube::measure_d() const { return std::ldexp(1.0, -level_ * dim_); }

Point DyadicCube::center_point() const {
  Point p;
  p.dim = dim_;
  for (int i = 0; i < dim_; ++i) p[i] = center_d(i);
  return p;
}

DyadicCube DyadicCube::ancestor(int s) const {
  if (s < 0) fail(ErrorKind::Precondition, "ancestor: negative generation");
  IntVec idx{};
  for (int i = 0; i < dim_; ++i) idx[static_cast<std::size_t>(i)] = floor_shift(index(i), s);
  return DyadicCube(dim_, level_ - s, idx);
}

DyadicCube DyadicCube::translate(const IntVec& m) const {
  IntVec idx = index_;
  for (int i = 0; i < dim_; ++i) idx[static_cast<std::size_t>(i)] += m[static_cast<std::size_t>(i)];
  return DyadicCube(dim_, level_, idx);
}

std::vector<DyadicCube> DyadicCube::children() const {
  std::vector<DyadicCube> out;
  const std::uint32_t count = 1u << dim_;
  out.reserve(count);
  for (std::uint32_t bits = 0; bits < count; ++bits) {
    IntVec idx{};
    for (int i = 0; i < dim_; ++i)
      idx[static_cast<std::size_t>(i)] = 2 * index(i) + ((bits >> i) & 1u);
    out.emplace_back(dim_, level_ + 1, idx);
  }
  return out;
}

std::uint32_t DyadicCube::child_bits() const {
  std::uint32_t bits = 0;
  for (int i = 0; i < dim_; ++i)
    if (index(i) & 1) bits |= 1u << i;
  return bits;
}

bool DyadicCube::contains(const DyadicCube& other) const {
  if (other.dim_ != dim_ || other.level_ < level_) return false;
  const int s = other.level_ - level_;
  for (int i = 0; i < dim_; ++i)
    if (floor_shift(other.index(i), s) != index(i)) return false;
  return true;
}

bool DyadicCube::intersects(const DyadicCube& other) const {
  return contains(other) || other.contains(*this);
}

bool DyadicCube::contains(const Point& p) const {
  for (int i = 0; i < dim_; ++i)
    if (!(p[i] >= lower_d(i) && p[i] < upper_d(i))) return false;
  return true;
}

std::string DyadicCube::to_string() const {
  std::string s = std::to_string(level_) + ":(";
  for (int i = 0; i < dim_; ++i) {
    if (i) s += ',';
    s += std::to_string(index(i));
  }
  return s + ")";
}

DyadicCube DyadicCube::parse(const std::string& text) {
  const auto colon = text.find(':');
  const auto open = text.find('(');
  const auto close = text.find(')');
  if (colon == std::string::npos || open != colon + 1 || close == std::string::npos || close < open)
    fail(ErrorKind::Parse, "malformed cube '" + text + "'");
  int level = 0;
  try {
    std::size_t used = 0;
    level = std::stoi(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("level");
  } catch (const std::exception&) {
    fail(ErrorKind::Parse, "malformed cube level in '" + text + "'");
  }
  IntVec idx{};
  int dim = 0;
  std::stringstream ss(text.substr(open + 1, close - open - 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (dim >= kMaxDim) fail(ErrorKind::Parse, "too many coordinates in '" + text + "'");
    try {
      std::size_t used = 0;
      idx[static_cast<std::size_t>(dim)] = std::stoll(item, &used);
      while (used < item.size() && item[used] == ' ') ++used;
      if (used != item.size()) throw std::invalid_argument("index");
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, "malformed cube index in '" + text + "'");
    }
    ++dim;
  }
  if (dim == 0) fail(ErrorKind::Parse, "cube without coordinates '" + text + "'");
  return DyadicCube(dim, level, idx);
}

std::strong_ordering operator<=>(const DyadicCube& a, const DyadicCube& b) {
  if (auto c = a.level_ <=> b.level_; c != 0) return c;
  if (auto c = a.index_ <=> b.index_; c != 0) return c;
  return a.dim_ <=> b.dim_;
}

DyadicCube cube_containing(const Point& p, int level) {
  IntVec idx{};
  for (int i = 0; i < p.dim; ++i)
    idx[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(std::ldexp(p[i], level)));
  return DyadicCube(p.dim, level, idx);
}

// ---------------------------------------------------------------------------

DyadicSet DyadicSet::from_cubes(int dim, std::vector<DyadicCube> cubes) {
  DyadicSet out(dim);
  if (cubes.empty()) return out;
  for (const auto& c : cubes)
    if (c.dim() != dim) fail(ErrorKind::Precondition, "DyadicSet: mixed dimensions");

  // Drop duplicates and cubes inside coarser members.
  std::sort(cubes.begin(), cubes.end());
  cubes.erase(std::unique(cubes.begin(), cubes.end()), cubes.end());
  std::map<int, std::set<IntVec>> kept;
  for (const auto& c : cubes) {
    bool covered = false;
    for (const auto& [lvl, members] : kept) {
      if (lvl >= c.level()) break;
      if (members.count(c.ancestor(c.level() - lvl).index())) {
        covered = true;
        break;
      }
    }
    if (!covered) kept[c.level()].insert(c.index());
  }

  // Merge complete sibling groups, finest level first; parents land on the
  // next level to be visited.
  const std::size_t full = std::size_t{1} << dim;
  for (auto it = kept.rbegin(); it != kept.rend(); ++it) {
    const int lvl = it->first;
    std::map<IntVec, std::size_t> parents;
    for (const auto& idx : it->second) {
      IntVec p{};
      for (int i = 0; i < dim; ++i) p[static_cast<std::size_t>(i)] = floor_shift(idx[static_cast<std::size_t>(i)], 1);
      ++parents[p];
    }
    std::vector<IntVec> promoted;
    for (const auto& [p, count] : parents)
      if (count == full) promoted.push_back(p);
    if (promoted.empty()) continue;
    if (lvl - 1 < level_window().min_level) continue;
    for (const auto& p : promoted) {
      for (auto child : DyadicCube(dim, lvl - 1, p).children()) it->second.erase(child.index());
      kept[lvl - 1].insert(p);
    }
  }

  for (const auto& [lvl, members] : kept)
    for (const auto& idx : members) out.cubes_.emplace_back(dim, lvl, idx);
  std::sort(out.cubes_.begin(), out.cubes_.end());
  return out;
}

bool DyadicSet::contains(const Point& p) const {
  return std::any_of(cubes_.begin(), cubes_.end(), [&](const DyadicCube& c) { return c.contains(p); });
}

bool DyadicSet::contains(const DyadicCube& c) const {
  return std::any_of(cubes_.begin(), cubes_.end(), [&](const DyadicCube& m) { return m.contains(c); });
}

bool DyadicSet::intersects(const DyadicCube& c) const {
  return std::any_of(cubes_.begin(), cubes_.end(), [&](const DyadicCube& m) { return m.intersects(c); });
}

Dyadic DyadicSet::measure() const {
  Dyadic total;
  for (const auto& c : cubes_) total = total + c.measure();
  return total;
}

DyadicSet DyadicSet::unite(const DyadicSet& other) const {
  std::vector<DyadicCube> all = cubes_;
  all.insert(all.end(), other.cubes_.begin(), other.cubes_.end());
  return from_cubes(dim_, std::move(all));
}

DyadicSet DyadicSet::intersect(const DyadicCube& box) const {
  std::vector<DyadicCube> out;
  for (const auto& c : cubes_) {
    if (box.contains(c)) out.push_back(c);
    else if (c.contains(box)) out.push_back(box);
  }
  return from_cubes(dim_, std::move(out));
}

bool DyadicSet::is_subset_of(const DyadicSet& other) const {
  return std::all_of(cubes_.begin(), cubes_.end(), [&](const DyadicCube& c) { return other.contains(c); });
}

void DyadicSet::hull(std::array<Dyadic, kMaxDim>& lo, std::array<Dyadic, kMaxDim>& hi) const {
  if (cubes_.empty()) fail(ErrorKind::Precondition, "hull of an empty set");
  for (int i = 0; i < dim_; ++i) {
    lo[static_cast<std::size_t>(i)] = cubes_.front().lower(i);
    hi[static_cast<std::size_t>(i)] = cubes_.front().upper(i);
  }
  for (const auto& c : cubes_)
    for (int i = 0; i < dim_; ++i) {
      lo[static_cast<std::size_t>(i)] = min(lo[static_cast<std::size_t>(i)], c.lower(i));
      hi[static_cast<std::size_t>(i)] = max(hi[static_cast<std::size_t>(i)], c.upper(i));
    }
}

// ---------------------------------------------------------------------------

DyadicCube ancestor(const DyadicCube& cube, int s) { return cube.ancestor(s); }
DyadicCube translate(const DyadicCube& cube, const IntVec& m) { return cube.translate(m); }

std::vector<DyadicCube> expand9_cubes(const DyadicCube& cube) {
  std::vector<DyadicCube> out;
  const int n = cube.dim();
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= 9;
  out.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    IntVec m{};
    std::size_t rest = code;
    for (int i = 0; i < n; ++i) {
      m[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(rest % 9) - 4;
      rest /= 9;
    }
    out.push_back(cube.translate(m));
  }
  return out;
}

DyadicSet expand9(const DyadicCube& cube) { return DyadicSet::from_cubes(cube.dim(), expand9_cubes(cube)); }

Dyadic linf_dist(const DyadicCube& a, const DyadicCube& b) {
  Dyadic d;
  for (int i = 0; i < a.dim(); ++i) {
    const Dyadic gap = max(a.lower(i) - b.upper(i), b.lower(i) - a.upper(i));
    d = max(d, gap);
  }
  return d;
}

Dyadic linf_dist(const DyadicCube& a, const DyadicSet& b) {
  if (b.empty()) fail(ErrorKind::Precondition, "distance to an empty set");
  Dyadic best = linf_dist(a, b.cubes().front());
  for (const auto& c : b) best = min(best, linf_dist(a, c));
  return best;
}

Dyadic linf_dist(const Point& p, const DyadicCube& b) {
  Dyadic d;
  for (int i = 0; i < b.dim(); ++i) {
    const Dyadic x = Dyadic::from_double(p[i]);
    d = max(d, max(b.lower(i) - x, x - b.upper(i)));
  }
  return d;
}

Dyadic linf_dist(const Point& p, const DyadicSet& b) {
  if (b.empty()) fail(ErrorKind::Precondition, "distance to an empty set");
  Dyadic best = linf_dist(p, b.cubes().front());
  for (const auto& c : b) best = min(best, linf_dist(p, c));
  return best;
}

namespace {

void complement_rec(const DyadicCube& q, const std::vector<const DyadicCube*>& candidates,
                    std::vector<DyadicCube>& out) {
  std::vector<const DyadicCube*> hits;
  for (const auto* c : candidates) {
    if (c->contains(q)) return;
    if (q.contains(*c)) hits.push_back(c);
  }
  if (hits.empty()) {
    out.push_back(q);
    return;
  }
  for (const auto& child : q.children()) complement_rec(child, hits, out);
}

}  // namespace

DyadicSet complement_in_box(const DyadicSet& set, const DyadicCube& box, int max_level) {
  std::vector<const DyadicCube*> candidates;
  for (const auto& c : set) {
    if (c.level() > max_level)
      fail(ErrorKind::Precondition, "complement_in_box: cube " + c.to_string() + " finer than max_level");
    if (c.intersects(box)) candidates.push_back(&c);
  }
  std::vector<DyadicCube> out;
  complement_rec(box, candidates, out);
  return DyadicSet::from_cubes(box.dim(), std::move(out));
}

}  // namespace pseudoloc::dyadic
