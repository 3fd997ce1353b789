// SPDX-License-Identifier: Apache-2.0
//
// Singular integrals applied to finite Haar expansions, the two halves of
// the decomposition of 1_{Sigma^c} T, Haar-basis shift operators and
// operator-norm lower bounds.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pseudoloc/haar.hpp"
#include "pseudoloc/kernel.hpp"
#include "pseudoloc/sigma.hpp"

namespace pseudoloc::ops {

using dyadic::DyadicCube;
using dyadic::DyadicSet;
using haar::FiniteHaarExpansion;
using haar::HaarIndex;
using haar::StepFunction;
using kernel::KernelSpec;

/// Truncation of the translate sums.
struct TruncationBudget {
  int M = 64;              // |m|_inf <= M
  double c_emp = 1.0;      // empirical pairing constant used for tail bounds
  double quad_tol = 1e-8;  // relative tolerance of pairings and cube averages
  int levels = 20;         // ancestor levels kept in the upward J-sum

  /// c_emp * sum_{|m|_inf > M} (1 + |m|)^{-n-gamma}.
  double tail_bound(int n, double gamma) const;
};

/// Measured kernel constants, sampled once if the spec carries none.
kernel::Constants kernel_constants(const KernelSpec& k);

/// T applied to a fixed step function. One dimension works on maximal runs
/// of equal value, higher dimensions on mesh cells.
class TEvaluator {
 public:
  TEvaluator(const KernelSpec& k, const StepFunction& g);

  /// Tg(x); x must lie at positive distance from the support.
  double apply(const Point& x) const;
  /// T_eps g(x) for any x (eps > 0), or eps == 0 with x off the support.
  double apply_truncated(const Point& x, double eps) const;
  /// Principal value for one-dimensional kernels with a closed-form cell integral.
  double apply_pv(const Point& x) const;

  bool on_support(const Point& x) const;
  /// Sorted run endpoints (one dimension) or per-axis cell faces.
  const std::vector<std::vector<double>>& faces() const { return faces_; }
  /// l-inf bounding box of the support; false when g == 0.
  bool support_hull(Point& lo, Point& hi) const;
  double l1_norm() const { return l1_; }
  const KernelSpec& kernel() const { return k_; }
  int dim() const { return dim_; }

 private:
  struct Piece {
    Point lo, hi;
    double value;
  };
  KernelSpec k_;
  int dim_;
  std::vector<Piece> pieces_;
  std::vector<std::vector<double>> faces_;
  double l1_ = 0.0;
};

double apply_T_offsupport(const KernelSpec& k, const FiniteHaarExpansion& f, const Point& x);
double apply_T_offsupport(const KernelSpec& k, const StepFunction& g, const Point& x);
double apply_T_truncated(const KernelSpec& k, const StepFunction& g, double eps, const Point& x);

/// T_eps h^eta_I(x) for a single Haar function (eta may be 0).
double apply_T_haar(const KernelSpec& k, const HaarIndex& h, double eps, const Point& x);

/// <h^theta_J, T_eps h^eta_I>; eps == 0 requires disjoint cubes.
double haar_pairing(const KernelSpec& k, const HaarIndex& J, const HaarIndex& I, double eps, double rel_tol = 1e-8);

/// Analytic bound for |<h^theta_J, T h^eta_I>|, I cancellative, from the
/// Hoelder constant: C (l(I)/2)^gamma |I|^{1/2} |J|^{1/2} / (dist + l(I)/2)^{n+gamma}.
/// Infinite when the cubes are closer than l(I)/2.
double pairing_bound(const kernel::Constants& c, double gamma, const DyadicCube& J, const DyadicCube& I);

// ---------------------------------------------------------------------------

struct PhiTildeResult {
  StepFunction value;
  double tail_bound = 0.0;  // operator-level tail, see TruncationBudget
  int M = 0;
  std::size_t pairings = 0;
};

/// sum_{0<|m|<=M} sum_I (h^0_{I^(s)+m} - h^0_{I^(s)}) <h^0_{I^(s)+m}, T h_I> alpha_I.
PhiTildeResult phi_tilde_apply(const KernelSpec& k, const FiniteHaarExpansion& f, int s, const TruncationBudget& b);

/// Bound at x for the translates dropped by the truncation |m| <= M.
double phi_tilde_tail_at(const KernelSpec& k, const FiniteHaarExpansion& f, int s, int M, const Point& x);

/// Psi_s f(x) = sum_k [T_{4*2^-k} D_{k+s} f(x) - its average over the level-k cube of x].
class PsiEvaluator {
 public:
  PsiEvaluator(const KernelSpec& k, const FiniteHaarExpansion& f, int s, double tol = 1e-8);
  double value(const Point& x) const;
  /// Points where the value may kink or jump, per axis.
  std::vector<std::vector<double>> breakpoints(const Point& lo, const Point& hi) const;
  /// Average of T_eps D_{k+s} f over a level-k cube (memoised).
  double cube_average(std::size_t level_slot, const DyadicCube& q) const;

 private:
  struct Level {
    int k;
    double eps;
    std::unique_ptr<TEvaluator> t;
  };
  KernelSpec k_;
  int dim_;
  int s_;
  double tol_;
  std::vector<Level> levels_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::size_t, DyadicCube>, double> cache_;
};

double psi_apply(const KernelSpec& k, const FiniteHaarExpansion& f, int s, const Point& x);

enum class PsiClass { Haar11, Haar01, Haar10 };
const char* to_string(PsiClass c);

struct PsiCoeff {
  double value = 0.0;
  double tail = 0.0;  // remainder bound of the truncated upward sum (Haar10 only)
  PsiClass cls = PsiClass::Haar11;
};

/// <h^theta_K, Psi_s h^zeta_L> through the closed-form identities. K and L
/// must have equal side; at most one signature may be 0.
PsiCoeff psi_haar_coeff(const KernelSpec& k, int s, const HaarIndex& K, const HaarIndex& L, const TruncationBudget& b);

/// Same quantity by quadrature of h_K against PsiEvaluator (h^0_L is replaced
/// by its Haar expansion truncated at the same number of levels).
double psi_coeff_direct(const KernelSpec& k, int s, const HaarIndex& K, const HaarIndex& L, const TruncationBudget& b);

// ---------------------------------------------------------------------------

enum class ShiftKind { U, T, Theta, Lambda };

struct ShiftSpec {
  ShiftKind kind = ShiftKind::U;
  IntVec m{};
  std::uint32_t zeta = 1;
  int s = 0;
  std::optional<KernelSpec> kernel;
};

struct ShiftResult {
  std::optional<FiniteHaarExpansion> expansion;
  std::optional<StepFunction> step;
};

/// U_m and Lambda-composed outputs are step functions, T and Theta return expansions.
ShiftResult shift_apply(const ShiftSpec& spec, const FiniteHaarExpansion& f, const TruncationBudget& b = {});

/// Lambda_{s,m}: h^eta_I -> <h^0_{I^(s)+m}, T h^eta_I> h^eta_{I^(s)} (kept as an expansion).
FiniteHaarExpansion lambda_core(const KernelSpec& k, int s, const IntVec& m, const FiniteHaarExpansion& f,
                                double rel_tol = 1e-8);

struct FigielRow {
  PsiClass cls = PsiClass::Haar11;
  double sum = 0.0;
  double tail = 0.0;
  double predicted = 0.0;  // (1+s) 2^{-s gamma}
  int M = 0;
};

/// sum_{|m|<=M} sup_L |<h_{L+m}, Psi_s h_L>| log(2+|m|) per signature class (one dimension).
std::vector<FigielRow> figiel_condition_sum(const KernelSpec& k, int s, const TruncationBudget& b,
                                            const std::vector<DyadicCube>& sample);

// ---------------------------------------------------------------------------

/// Nonzero entries of one column.
struct SparseColumn {
  std::vector<std::size_t> idx;
  std::vector<double> val;
};

/// A linear map restricted to span{basis}: columns of output samples with
/// quadrature weights, and the synthesised inputs on their own mesh.
struct DiscreteOperator {
  std::string name;
  std::vector<HaarIndex> basis;
  std::vector<double> out_weights;         // per output node
  std::vector<SparseColumn> out_columns;   // one per basis function
  std::vector<double> in_weights;          // per input cell
  std::vector<SparseColumn> in_columns;

  /// Dense A c on the output nodes.
  std::vector<double> apply(const std::vector<double>& c) const;
};

/// Haar basis of all cubes at levels [lo, hi] inside `root` (every signature).
std::vector<HaarIndex> haar_basis(const DyadicCube& root, int lo, int hi);

DiscreteOperator discretize_identity(const std::vector<HaarIndex>& basis);
DiscreteOperator discretize_u(const IntVec& m, const std::vector<HaarIndex>& basis);
/// Psi_s sampled on composite Gauss nodes over [-R, R]^n (one dimension); R = 0 picks
/// 16 * 4 * 2^s * (coarsest side).
DiscreteOperator discretize_psi(const KernelSpec& k, int s, const std::vector<HaarIndex>& basis, double R = 0.0);

struct OpNormResult {
  double value = 0.0;
  std::vector<double> argmax;  // basis coefficients
};

/// max over seeded random inputs (plus a power-iteration start at p = 2) of
/// ||A c||_p / ||c||_p, refined by 20 sweeps of coordinate ascent. A lower bound.
OpNormResult opnorm_lower_bound(const DiscreteOperator& op, double p, int trials, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct RestrictedNorm {
  std::vector<double> p;
  std::vector<double> norm;       // (int_{box \ Sigma} |Tf|^p)^{1/p}
  std::vector<double> quad_error; // absolute error estimate of the norm
  std::vector<double> tail;       // bound for (int_{|x-c|>R} |Tf|^p)^{1/p}
  double R = 0.0;
  bool converged = true;
  std::size_t evaluations = 0;
};

struct RestrictedOptions {
  double R = 0.0;         // half-width of the integration box about Sigma's centre; 0 = 2 * hull
  double rel_tol = 1e-10;
};

/// Norms of Tf over (box \ S) for several exponents at once. S must contain supp f.
RestrictedNorm restricted_lp_norms(const KernelSpec& k, const FiniteHaarExpansion& f, const DyadicSet& S,
                                   const std::vector<double>& ps, const RestrictedOptions& opt = {});

/// Same with a general excluded cube (one dimension). Points on supp f use the
/// principal value, so this is meant for the exactly known Hilbert transform.
RestrictedNorm restricted_lp_norms_cube(const KernelSpec& k, const FiniteHaarExpansion& f,
                                        const sigma::ScaledCube& Q, const std::vector<double>& ps,
                                        const RestrictedOptions& opt = {});

}  // namespace pseudoloc::ops
