// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: configuration, test-function families, decay
// sweeps, slope fits, decomposition and unconditionality checks, CSV.
#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "pseudoloc/operators.hpp"

namespace pseudoloc::harness {

using haar::FiniteHaarExpansion;
using haar::HaarIndex;

struct ExperimentConfig {
  std::string kernel = "hilbert1d";
  double gamma = 1.0;
  double scale = 1.0;
  int n = 1;
  std::vector<double> p = {2.0};
  int s_min = 0;
  int s_max = 8;
  std::string profile = "random-sparse";
  int family_size = 20;
  std::uint64_t seed = 1;
  int M = 64;
  int levels = 20;
  double R = 0.0;         // 0 = automatic
  double R_factor = 1.0;  // multiplies the automatic radius
  double quad_tol = 1e-8;
  double rel_tol = 1e-10;
  double tol = 1e-3;  // absolute slack of pointwise checks
  int points = 100;
  int trials = 100;
  int samples = 20000;     // kernel-check draws
  double limit = 0.0;      // kernel-check violation threshold, 0 = none
  bool normalize = false;  // kernel-check also reports the normalised kernel
  bool M_growth = false;   // figiel-sum uses M * 2^s
  bool q_variant = false;
  bool l1_variant = false;
  int threads = 0;  // 0 = hardware concurrency
  std::string family_file;  // expansions in text form, separated by blank lines; replaces the generated family
  std::string output;

  /// Throws Parse on unknown keys or malformed values, Precondition on invalid ones.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  /// "key=value" lines, '#' comments.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  kernel::KernelSpec kernel_spec() const;
  ops::TruncationBudget budget() const;
  /// Derived quantities (p', exponent) as "key=value" lines.
  std::string describe() const;
};

/// Independent uniform signs keyed by Haar index.
class SignVector {
 public:
  explicit SignVector(std::uint64_t seed) : seed_(seed) {}
  int operator()(const HaarIndex& h) const;
  FiniteHaarExpansion apply(const FiniteHaarExpansion& f) const;

 private:
  std::uint64_t seed_;
};

/// Deterministic family normalised to ||f||_p = 1. Profiles: "random-sparse",
/// "bump", "adversarial-boundary".
std::vector<FiniteHaarExpansion> gen_family(std::uint64_t seed, int count, const std::string& profile, int n = 1,
                                            double p = 2.0);

/// The configured family: family_file when set, otherwise gen_family.
std::vector<FiniteHaarExpansion> family_of(const ExperimentConfig& cfg);

struct Row {
  std::string experiment;
  std::string kernel;
  int n = 1;
  double gamma = 1.0;
  double p = 2.0;
  int s = 0;
  int f_id = 0;
  double ratio = 0.0;
  double tail_budget = 0.0;
  std::string status = "PASS";
};

/// Fixed column order, 12 significant digits.
void write_csv(std::ostream& os, const std::vector<Row>& rows);
std::string csv_header();

/// ratio = ||1_{Sigma^c} T f||_p / ||f||_p / C_size per (f, s, p); experiments
/// "decay", plus "decay-q" and "decay-l1" when enabled.
std::vector<Row> run_decay(const ExperimentConfig& cfg);
/// Same on a given family (f_id is the position).
std::vector<Row> run_decay(const ExperimentConfig& cfg, const std::vector<FiniteHaarExpansion>& family);

struct SlopeFit {
  std::string experiment;
  double p = 0.0;
  double gamma = 0.0;
  double slope = 0.0;
  double residual = 0.0;  // rms of the fit in log2 units
  int points = 0;
};

/// Least squares of log2(max-over-family ratio), or log2(ratio / (1 + s)), on s in [s0, s1].
std::vector<SlopeFit> fit_slope(const std::vector<Row>& rows, int s0, int s1, bool remove_poly);

struct DecompositionReport {
  double max_discrepancy = 0.0;
  double max_budget = 0.0;
  double max_excess = 0.0;  // max of discrepancy - budget
  std::size_t points = 0;
  bool pass = true;
  std::vector<Row> rows;  // one per (f, s): ratio = discrepancy, tail_budget = budget
};

/// Samples cfg.points points of Sigma^c per (f, s) and compares Tf with phi_tilde + Psi.
DecompositionReport decomposition_check(const ExperimentConfig& cfg);
DecompositionReport decomposition_check(const ExperimentConfig& cfg, const std::vector<FiniteHaarExpansion>& family);

struct UnconditionalityReport {
  double constant = 0.0;  // max ratio found
  double min_ratio = 0.0;
  int trials = 0;
};

/// max over random f (32 coefficients) and sign vectors of ||sum eps a h||_p / ||f||_p.
UnconditionalityReport unconditionality_check(double p, int trials, std::uint64_t seed, int n = 1);

/// Haar-system invariants on cfg.trials seeded random instances; one row per
/// invariant with ratio = max error, plus one "unconditionality" row per p.
std::vector<Row> haar_check(const ExperimentConfig& cfg);

/// Hand-computable exceptional sets plus containment, minimality and
/// monotonicity on cfg.trials random f; ratio = number of failures.
std::vector<Row> sigma_check(const ExperimentConfig& cfg);

/// apply_T_offsupport, cell_integral_truncated and haar_pairing against the
/// midpoint oracle on cfg.trials random off-support configurations each
/// (one dimension); ratio = max relative error, PASS at 1e-5.
std::vector<Row> oracle_check(const ExperimentConfig& cfg);

/// Empirical kernel constants per distance scale (s = log2 of the scale).
std::vector<Row> kernel_check(const ExperimentConfig& cfg);

/// figiel_condition_sum per s and class, divided by (1+s)2^{-s gamma};
/// tail_budget is the divided truncation bound. Samples [0,1) and [1,2).
std::vector<Row> figiel_check(const ExperimentConfig& cfg);

struct CommandResult {
  std::vector<Row> rows;
  std::string report;  // human-readable summary, derived quantities first
  int exit_code = 0;
};

/// "decay", "decompose-check", "kernel-check", "haar-check", "sigma-dump",
/// "figiel-sum", "oracle". Throws Precondition for other names.
CommandResult run_command(const std::string& name, const ExperimentConfig& cfg);
const std::vector<std::string>& command_names();

/// Exit code from row statuses: 0 all PASS, 1 numeric budget, 2 invariant violation.
int exit_code(const std::vector<Row>& rows);

/// Per-row seed from the config seed and a row key.
std::uint64_t row_seed(std::uint64_t seed, const std::string& key);

}  // namespace pseudoloc::harness
