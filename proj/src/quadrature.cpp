// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>

namespace pseudoloc::quad {

namespace {

constexpr std::array<double, 8> kNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// Magnitude floor: the relative tolerance never asks for more than this
// fraction of the integral of |f|, so integrals that cancel to zero converge.
constexpr double kMagnitudeFloor = 1e-5;

enum class Grading { None, Left, Right };

struct Segment {
  double a = 0.0;
  double b = 0.0;
  Grading grading = Grading::None;

  double x(double u) const {
    switch (grading) {
      case Grading::Left: return a + (b - a) * (u * u) * (u * u);
      case Grading::Right: {
        const double v = 1.0 - u;
        return b - (b - a) * (v * v) * (v * v);
      }
      case Grading::None: break;
    }
    return a + (b - a) * u;
  }
  double jac(double u) const {
    switch (grading) {
      case Grading::Left: return 4.0 * (b - a) * u * u * u;
      case Grading::Right: {
        const double v = 1.0 - u;
        return 4.0 * (b - a) * v * v * v;
      }
      case Grading::None: break;
    }
    return b - a;
  }
};

struct Panel {
  std::size_t seg = 0;
  double u0 = 0.0;
  double u1 = 1.0;
  int depth = 0;
  std::vector<double> coarse;  // whole-panel rule
  std::vector<double> left;    // half-panel rules
  std::vector<double> right;
  std::vector<double> mag;     // rule applied to |f|
  bool alive = true;
};

class VecIntegrator {
 public:
  VecIntegrator(std::size_t m, const VectorFn& f, const Options& opt)
      : m_(m), f_(f), opt_(opt), buf_(m) {}

  VecResult run(double a, double b, std::span<const double> splits, std::span<const double> singular) {
    VecResult res;
    res.value.assign(m_, 0.0);
    res.error.assign(m_, 0.0);
    if (!(b > a)) return res;

    build_segments(a, b, splits, singular);
    for (std::size_t s = 0; s < segments_.size(); ++s) {
      Panel p;
      p.seg = s;
      p.coarse.assign(m_, 0.0);
      std::vector<double> dummy(m_, 0.0);
      rule(s, 0.0, 1.0, p.coarse, dummy);
      refine(p);
      panels_.push_back(std::move(p));
    }

    rescale();
    std::size_t since_rescale = 0;
    while (true) {
      if (converged()) break;
      if (heap_.empty()) break;
      const auto [score, idx] = heap_.top();
      heap_.pop();
      if (!panels_[idx].alive) continue;
      if (panels_[idx].depth >= opt_.max_depth || panels_.size() >= opt_.max_panels) {
        res.converged = false;
        break;
      }
      split(idx);
      if (++since_rescale >= 32) {
        rescale();
        since_rescale = 0;
      }
    }

    for (const auto& p : panels_) {
      if (!p.alive) continue;
      for (std::size_t i = 0; i < m_; ++i) {
        res.value[i] += p.left[i] + p.right[i];
        res.error[i] += std::abs(p.coarse[i] - p.left[i] - p.right[i]);
      }
      res.depth = std::max(res.depth, p.depth);
    }
    if (res.converged) res.converged = converged();
    res.evaluations = evals_;
    return res;
  }

 private:
  void build_segments(double a, double b, std::span<const double> splits, std::span<const double> singular) {
    std::vector<double> cuts{a, b};
    for (double s : splits)
      if (s > a && s < b) cuts.push_back(s);
    for (double s : singular)
      if (s > a && s < b) cuts.push_back(s);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto is_singular = [&](double x) {
      return std::find(singular.begin(), singular.end(), x) != singular.end();
    };
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double lo = cuts[i];
      const double hi = cuts[i + 1];
      const bool sl = is_singular(lo);
      const bool sr = is_singular(hi);
      if (sl && sr) {
        const double mid = 0.5 * (lo + hi);
        segments_.push_back({lo, mid, Grading::Left});
        segments_.push_back({mid, hi, Grading::Right});
      } else {
        segments_.push_back({lo, hi, sl ? Grading::Left : (sr ? Grading::Right : Grading::None)});
      }
    }
  }

  void rule(std::size_t s, double u0, double u1, std::vector<double>& out, std::vector<double>& mag) {
    const Segment& seg = segments_[s];
    const double mid = 0.5 * (u0 + u1);
    const double half = 0.5 * (u1 - u0);
    std::fill(out.begin(), out.end(), 0.0);
    std::fill(mag.begin(), mag.end(), 0.0);
    for (std::size_t j = 0; j < kNodes.size(); ++j) {
      const double u = mid + half * kNodes[j];
      const double w = half * kWeights[j] * seg.jac(u);
      if (w == 0.0) continue;
      f_(seg.x(u), buf_);
      ++evals_;
      for (std::size_t i = 0; i < m_; ++i) {
        out[i] += w * buf_[i];
        mag[i] += std::abs(w * buf_[i]);
      }
    }
  }

  void refine(Panel& p) {
    const double mid = 0.5 * (p.u0 + p.u1);
    p.left.assign(m_, 0.0);
    p.right.assign(m_, 0.0);
    p.mag.assign(m_, 0.0);
    std::vector<double> mag2(m_, 0.0);
    rule(p.seg, p.u0, mid, p.left, p.mag);
    rule(p.seg, mid, p.u1, p.right, mag2);
    for (std::size_t i = 0; i < m_; ++i) p.mag[i] += mag2[i];
  }

  double score(const Panel& p) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double e = std::abs(p.coarse[i] - p.left[i] - p.right[i]);
      worst = std::max(worst, e / scale_[i]);
    }
    return worst;
  }

  void rescale() {
    std::vector<double> total(m_, 0.0);
    std::vector<double> mag(m_, 0.0);
    for (const auto& p : panels_) {
      if (!p.alive) continue;
      for (std::size_t i = 0; i < m_; ++i) {
        total[i] += p.left[i] + p.right[i];
        mag[i] += p.mag[i];
      }
    }
    scale_.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const double rel = opt_.rel_tol * std::max(std::abs(total[i]), kMagnitudeFloor * mag[i]);
      scale_[i] = std::max({opt_.abs_tol, rel, 1e-300});
    }
    heap_ = {};
    for (std::size_t k = 0; k < panels_.size(); ++k)
      if (panels_[k].alive) heap_.emplace(score(panels_[k]), k);
  }

  bool converged() const {
    std::vector<double> err(m_, 0.0);
    for (const auto& p : panels_) {
      if (!p.alive) continue;
      for (std::size_t i = 0; i < m_; ++i) err[i] += std::abs(p.coarse[i] - p.left[i] - p.right[i]);
    }
    for (std::size_t i = 0; i < m_; ++i)
      if (err[i] > scale_[i]) return false;
    return true;
  }

  void split(std::size_t idx) {
    Panel parent = std::move(panels_[idx]);
    panels_[idx].alive = false;
    const double mid = 0.5 * (parent.u0 + parent.u1);
    Panel l;
    l.seg = parent.seg;
    l.u0 = parent.u0;
    l.u1 = mid;
    l.depth = parent.depth + 1;
    l.coarse = parent.left;
    refine(l);
    Panel r;
    r.seg = parent.seg;
    r.u0 = mid;
    r.u1 = parent.u1;
    r.depth = parent.depth + 1;
    r.coarse = parent.right;
    refine(r);
    panels_.push_back(std::move(l));
    heap_.emplace(score(panels_.back()), panels_.size() - 1);
    panels_.push_back(std::move(r));
    heap_.emplace(score(panels_.back()), panels_.size() - 1);
  }

  std::size_t m_;
  const VectorFn& f_;
  Options opt_;
  std::vector<double> buf_;
  std::vector<Segment> segments_;
  std::vector<Panel> panels_;
  std::vector<double> scale_;
  std::priority_queue<std::pair<double, std::size_t>> heap_;
  std::size_t evals_ = 0;
};

}  // namespace

std::span<const double> gauss_nodes() { return kNodes; }
std::span<const double> gauss_weights() { return kWeights; }

VecResult integrate_vec(std::size_t m, const VectorFn& f, double a, double b, const Options& opt,
                        std::span<const double> splits, std::span<const double> singular) {
  if (b < a) {
    VecResult r = integrate_vec(m, f, b, a, opt, splits, singular);
    for (auto& v : r.value) v = -v;
    return r;
  }
  VecIntegrator integ(m, f, opt);
  return integ.run(a, b, splits, singular);
}

Result integrate(const ScalarFn& f, double a, double b, const Options& opt, std::span<const double> splits,
                 std::span<const double> singular) {
  const VectorFn g = [&f](double x, std::span<double> out) { out[0] = f(x); };
  const VecResult v = integrate_vec(1, g, a, b, opt, splits, singular);
  return Result{v.value[0], v.error[0], v.converged, v.depth, v.evaluations};
}

// ---------------------------------------------------------------------------

namespace {

struct BoxPanel {
  Point lo, hi;
  int depth = 0;
  double coarse = 0.0;
  double fine = 0.0;
  double mag = 0.0;
  bool alive = true;
};

class BoxIntegrator {
 public:
  BoxIntegrator(int dim, const BoxFn& f, const Options& opt) : dim_(dim), f_(f), opt_(opt) {}

  Result run(const Point& lo, const Point& hi, const std::vector<std::vector<double>>& splits) {
    Result res;
    for (int i = 0; i < dim_; ++i)
      if (!(hi[i] > lo[i])) return res;

    // Seed grid from the per-axis split lists.
    std::vector<std::vector<double>> cuts(static_cast<std::size_t>(dim_));
    for (int i = 0; i < dim_; ++i) {
      auto& c = cuts[static_cast<std::size_t>(i)];
      c = {lo[i], hi[i]};
      if (static_cast<std::size_t>(i) < splits.size())
        for (double s : splits[static_cast<std::size_t>(i)])
          if (s > lo[i] && s < hi[i]) c.push_back(s);
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    std::vector<std::size_t> counter(static_cast<std::size_t>(dim_), 0);
    while (true) {
      BoxPanel p;
      p.lo.dim = p.hi.dim = dim_;
      for (int i = 0; i < dim_; ++i) {
        const auto& c = cuts[static_cast<std::size_t>(i)];
        p.lo[i] = c[counter[static_cast<std::size_t>(i)]];
        p.hi[i] = c[counter[static_cast<std::size_t>(i)] + 1];
      }
      double unused = 0.0;
      p.coarse = rule(p.lo, p.hi, unused);
      refine(p);
      panels_.push_back(p);
      int axis = 0;
      while (axis < dim_) {
        auto& k = counter[static_cast<std::size_t>(axis)];
        if (++k + 1 < cuts[static_cast<std::size_t>(axis)].size()) break;
        k = 0;
        ++axis;
      }
      if (axis == dim_) break;
    }

    rescale();
    std::size_t since = 0;
    while (!converged() && !heap_.empty()) {
      const auto [score, idx] = heap_.top();
      heap_.pop();
      if (!panels_[idx].alive) continue;
      if (panels_[idx].depth >= opt_.max_depth || panels_.size() >= opt_.max_panels) {
        res.converged = false;
        break;
      }
      split(idx);
      if (++since >= 32) {
        rescale();
        since = 0;
      }
    }
    for (const auto& p : panels_) {
      if (!p.alive) continue;
      res.value += p.fine;
      res.error += std::abs(p.coarse - p.fine);
      res.depth = std::max(res.depth, p.depth);
    }
    if (res.converged) res.converged = converged();
    res.evaluations = evals_;
    return res;
  }

 private:
  double rule(const Point& lo, const Point& hi, double& mag) {
    std::size_t total = 1;
    for (int i = 0; i < dim_; ++i) total *= kNodes.size();
    double sum = 0.0;
    mag = 0.0;
    Point x;
    x.dim = dim_;
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t rest = code;
      double w = 1.0;
      for (int i = 0; i < dim_; ++i) {
        const std::size_t j = rest % kNodes.size();
        rest /= kNodes.size();
        const double mid = 0.5 * (lo[i] + hi[i]);
        const double half = 0.5 * (hi[i] - lo[i]);
        x[i] = mid + half * kNodes[j];
        w *= half * kWeights[j];
      }
      const double v = f_(x);
      ++evals_;
      sum += w * v;
      mag += std::abs(w * v);
    }
    return sum;
  }

  std::vector<std::pair<Point, Point>> children(const Point& lo, const Point& hi) const {
    std::vector<std::pair<Point, Point>> out;
    const std::uint32_t count = 1u << dim_;
    for (std::uint32_t bits = 0; bits < count; ++bits) {
      Point a = lo;
      Point b = hi;
      for (int i = 0; i < dim_; ++i) {
        const double mid = 0.5 * (lo[i] + hi[i]);
        if ((bits >> i) & 1u) a[i] = mid;
        else b[i] = mid;
      }
      out.emplace_back(a, b);
    }
    return out;
  }

  void refine(BoxPanel& p) {
    p.fine = 0.0;
    p.mag = 0.0;
    for (const auto& [a, b] : children(p.lo, p.hi)) {
      double m = 0.0;
      p.fine += rule(a, b, m);
      p.mag += m;
    }
  }

  void rescale() {
    double total = 0.0;
    double mag = 0.0;
    for (const auto& p : panels_)
      if (p.alive) {
        total += p.fine;
        mag += p.mag;
      }
    scale_ = std::max({opt_.abs_tol, opt_.rel_tol * std::max(std::abs(total), kMagnitudeFloor * mag), 1e-300});
    heap_ = {};
    for (std::size_t k = 0; k < panels_.size(); ++k)
      if (panels_[k].alive) heap_.emplace(std::abs(panels_[k].coarse - panels_[k].fine), k);
  }

  bool converged() const {
    double err = 0.0;
    for (const auto& p : panels_)
      if (p.alive) err += std::abs(p.coarse - p.fine);
    return err <= scale_;
  }

  void split(std::size_t idx) {
    const BoxPanel parent = panels_[idx];
    panels_[idx].alive = false;
    for (const auto& [a, b] : children(parent.lo, parent.hi)) {
      BoxPanel c;
      c.lo = a;
      c.hi = b;
      c.depth = parent.depth + 1;
      double unused = 0.0;
      c.coarse = rule(a, b, unused);
      refine(c);
      panels_.push_back(c);
      heap_.emplace(std::abs(c.coarse - c.fine), panels_.size() - 1);
    }
  }

  int dim_;
  const BoxFn& f_;
  Options opt_;
  std::vector<BoxPanel> panels_;
  double scale_ = 0.0;
  std::priority_queue<std::pair<double, std::size_t>> heap_;
  std::size_t evals_ = 0;
};

}  // namespace

Result integrate_box(int dim, const BoxFn& f, const Point& lo, const Point& hi, const Options& opt,
                     const std::vector<std::vector<double>>& splits) {
  if (dim == 1) {
    const ScalarFn g = [&f](double t) { return f(Point::of({t})); };
    const std::vector<double> s = splits.empty() ? std::vector<double>{} : splits[0];
    return integrate(g, lo[0], hi[0], opt, s);
  }
  BoxIntegrator integ(dim, f, opt);
  return integ.run(lo, hi, splits);
}

}  // namespace pseudoloc::quad
