// SPDX-License-Identifier: Apache-2.0
#include "pseudoloc/pseudoloc.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "pseudoloc/harness.hpp"
#include "pseudoloc/oracle.hpp"

struct pl_kernel {
  pseudoloc::kernel::KernelSpec spec;
};

struct pl_expansion {
  pseudoloc::haar::FiniteHaarExpansion f;
};

struct pl_config {
  pseudoloc::harness::ExperimentConfig cfg;
};

struct pl_result {
  pseudoloc::harness::CommandResult res;
};

namespace {

using namespace pseudoloc;

thread_local std::string g_error;

pl_status to_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return PL_ERR_DOMAIN;
    case ErrorKind::Precondition: return PL_ERR_PRECONDITION;
    case ErrorKind::Window: return PL_ERR_WINDOW;
    case ErrorKind::Numeric: return PL_ERR_NUMERIC;
    case ErrorKind::Invariant: return PL_ERR_INVARIANT;
    case ErrorKind::Parse: return PL_ERR_PARSE;
    case ErrorKind::Io: return PL_ERR_IO;
  }
  return PL_ERR_INTERNAL;
}

template <class F>
pl_status guard(F&& body) {
  try {
    body();
    g_error.clear();
    return PL_OK;
  } catch (const Error& e) {
    g_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
  } catch (const std::exception& e) {
    g_error = e.what();
  } catch (...) {
    g_error = "unknown failure";
  }
  return PL_ERR_INTERNAL;
}

pl_status null_arg(const char* what) {
  g_error = std::string("null argument: ") + what;
  return PL_ERR_NULL;
}

#define PL_REQUIRE(ptr)                   \
  do {                                    \
    if (!(ptr)) return null_arg(#ptr);    \
  } while (0)

pl_status put_text(const std::string& s, char* buf, size_t cap, size_t* len) {
  PL_REQUIRE(len);
  *len = s.size();
  if (!buf) return PL_OK;
  if (cap < s.size() + 1) {
    g_error = "buffer too small";
    return PL_ERR_BUFFER;
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return PL_OK;
}

Point point_of(const double* x, int dim) {
  Point p;
  p.dim = dim;
  for (int i = 0; i < dim; ++i) p[i] = x[i];
  return p;
}

IntVec index_of(const int64_t* m, int dim) {
  IntVec v{};
  for (int i = 0; i < dim; ++i) v[static_cast<std::size_t>(i)] = m[i];
  return v;
}

void check_dims(const pl_kernel* k, const pl_expansion* f) {
  if (k->spec.dim != f->f.dim()) fail(ErrorKind::Precondition, "kernel and expansion dimensions differ");
}

}  // namespace

extern "C" {

const char* pl_version(void) { return "1.0.0"; }

const char* pl_status_name(pl_status status) {
  switch (status) {
    case PL_OK: return "ok";
    case PL_ERR_DOMAIN: return "domain";
    case PL_ERR_PRECONDITION: return "precondition";
    case PL_ERR_WINDOW: return "window";
    case PL_ERR_NUMERIC: return "numeric";
    case PL_ERR_INVARIANT: return "invariant";
    case PL_ERR_PARSE: return "parse";
    case PL_ERR_IO: return "io";
    case PL_ERR_NULL: return "null";
    case PL_ERR_BUFFER: return "buffer";
    case PL_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* pl_last_error(void) { return g_error.c_str(); }

// --- kernels ---------------------------------------------------------------

pl_status pl_kernel_create(const char* family, double gamma, double scale, pl_kernel** out) {
  PL_REQUIRE(family);
  PL_REQUIRE(out);
  *out = nullptr;
  return guard([&] { *out = new pl_kernel{kernel::KernelSpec::by_name(family, gamma, scale)}; });
}

void pl_kernel_destroy(pl_kernel* k) { delete k; }

pl_status pl_kernel_dim(const pl_kernel* k, int* out) {
  PL_REQUIRE(k);
  PL_REQUIRE(out);
  *out = k->spec.dim;
  return PL_OK;
}

pl_status pl_kernel_scale(const pl_kernel* k, double* out) {
  PL_REQUIRE(k);
  PL_REQUIRE(out);
  *out = k->spec.scale;
  return PL_OK;
}

pl_status pl_kernel_eval(const pl_kernel* k, const double* x, const double* y, double* out) {
  PL_REQUIRE(k);
  PL_REQUIRE(x);
  PL_REQUIRE(y);
  PL_REQUIRE(out);
  return guard([&] { *out = kernel::eval_kernel(k->spec, point_of(x, k->spec.dim), point_of(y, k->spec.dim)); });
}

pl_status pl_kernel_estimates(const pl_kernel* k, size_t samples, uint64_t seed, double* c_size, double* c_holder) {
  PL_REQUIRE(k);
  PL_REQUIRE(c_size);
  PL_REQUIRE(c_holder);
  return guard([&] {
    const auto rep = kernel::verify_standard_estimates(k->spec, samples, seed);
    *c_size = rep.c_size;
    *c_holder = rep.c_holder;
  });
}

pl_status pl_kernel_normalize(pl_kernel* k, size_t samples, uint64_t seed) {
  PL_REQUIRE(k);
  return guard([&] {
    k->spec = kernel::normalize(k->spec, kernel::verify_standard_estimates(k->spec, samples, seed));
  });
}

// --- expansions ------------------------------------------------------------

pl_status pl_expansion_create(int dim, pl_expansion** out) {
  PL_REQUIRE(out);
  *out = nullptr;
  return guard([&] {
    if (dim < 1 || dim > kMaxDim) fail(ErrorKind::Precondition, "dimension out of range");
    *out = new pl_expansion{haar::FiniteHaarExpansion(dim)};
  });
}

pl_status pl_expansion_parse(const char* text, pl_expansion** out) {
  PL_REQUIRE(text);
  PL_REQUIRE(out);
  *out = nullptr;
  return guard([&] { *out = new pl_expansion{haar::FiniteHaarExpansion::parse(text)}; });
}

void pl_expansion_destroy(pl_expansion* f) { delete f; }

pl_status pl_expansion_add(pl_expansion* f, int level, const int64_t* index, uint32_t eta, double alpha) {
  PL_REQUIRE(f);
  PL_REQUIRE(index);
  return guard([&] {
    const int dim = f->f.dim();
    if (eta == 0 || eta >= (1u << dim)) fail(ErrorKind::Precondition, "signature must be a nonzero bit mask");
    f->f.add(haar::HaarIndex{dyadic::DyadicCube(dim, level, index_of(index, dim)), eta}, alpha);
  });
}

pl_status pl_expansion_size(const pl_expansion* f, size_t* out) {
  PL_REQUIRE(f);
  PL_REQUIRE(out);
  *out = f->f.size();
  return PL_OK;
}

pl_status pl_expansion_lp_norm(const pl_expansion* f, double p, double* out) {
  PL_REQUIRE(f);
  PL_REQUIRE(out);
  return guard([&] {
    if (!(p >= 1.0)) fail(ErrorKind::Precondition, "exponent must be at least 1");
    *out = f->f.empty() ? 0.0 : haar::lp_norm(f->f, p);
  });
}

pl_status pl_expansion_text(const pl_expansion* f, char* buf, size_t cap, size_t* len) {
  PL_REQUIRE(f);
  return put_text(f->f.to_text(), buf, cap, len);
}

// --- operators -------------------------------------------------------------

pl_status pl_apply(const pl_kernel* k, const pl_expansion* f, const double* x, double* out) {
  PL_REQUIRE(k);
  PL_REQUIRE(f);
  PL_REQUIRE(x);
  PL_REQUIRE(out);
  return guard([&] {
    check_dims(k, f);
    *out = ops::apply_T_offsupport(k->spec, f->f, point_of(x, k->spec.dim));
  });
}

pl_status pl_apply_truncated(const pl_kernel* k, const pl_expansion* f, double eps, const double* x, double* out) {
  PL_REQUIRE(k);
  PL_REQUIRE(f);
  PL_REQUIRE(x);
  PL_REQUIRE(out);
  return guard([&] {
    check_dims(k, f);
    if (f->f.empty()) {
      *out = 0.0;
      return;
    }
    *out = ops::apply_T_truncated(k->spec, haar::synthesize(f->f), eps, point_of(x, k->spec.dim));
  });
}

pl_status pl_haar_pairing(const pl_kernel* k, int level_j, const int64_t* index_j, uint32_t theta, int level_i,
                          const int64_t* index_i, uint32_t eta, double eps, double* out) {
  PL_REQUIRE(k);
  PL_REQUIRE(index_j);
  PL_REQUIRE(index_i);
  PL_REQUIRE(out);
  return guard([&] {
    const int dim = k->spec.dim;
    const haar::HaarIndex J{dyadic::DyadicCube(dim, level_j, index_of(index_j, dim)), theta};
    const haar::HaarIndex I{dyadic::DyadicCube(dim, level_i, index_of(index_i, dim)), eta};
    *out = ops::haar_pairing(k->spec, J, I, eps);
  });
}

pl_status pl_oracle_apply(const pl_kernel* k, const pl_expansion* f, const double* x, double eps, int res,
                          double* out) {
  PL_REQUIRE(k);
  PL_REQUIRE(f);
  PL_REQUIRE(x);
  PL_REQUIRE(out);
  return guard([&] {
    check_dims(k, f);
    *out = oracle::riemann_apply(k->spec, f->f, point_of(x, k->spec.dim), eps, res);
  });
}

pl_status pl_sigma_text(const pl_expansion* f, int s, char* buf, size_t cap, size_t* len) {
  PL_REQUIRE(f);
  std::string text;
  const pl_status st = guard([&] {
    std::ostringstream os;
    bool first = true;
    for (const auto& c : sigma::sigma_set(f->f, s).sigma) {
      os << (first ? "" : " ") << c.to_string();
      first = false;
    }
    text = os.str();
  });
  if (st != PL_OK) return st;
  return put_text(text, buf, cap, len);
}

pl_status pl_sigma_measure(const pl_expansion* f, int s, double* out) {
  PL_REQUIRE(f);
  PL_REQUIRE(out);
  return guard([&] {
    const auto S = sigma::sigma_set(f->f, s).sigma;
    *out = S.empty() ? 0.0 : S.measure().to_double();
  });
}

pl_status pl_restricted_norm(const pl_kernel* k, const pl_expansion* f, int s, double p, double R, double* norm,
                             double* tail) {
  PL_REQUIRE(k);
  PL_REQUIRE(f);
  PL_REQUIRE(norm);
  PL_REQUIRE(tail);
  return guard([&] {
    check_dims(k, f);
    ops::RestrictedOptions opt;
    opt.R = R;
    const auto r = ops::restricted_lp_norms(k->spec, f->f, sigma::sigma_set(f->f, s).sigma, {p}, opt);
    *norm = r.norm[0];
    *tail = r.tail[0];
  });
}

// --- configuration and commands --------------------------------------------

pl_status pl_config_create(pl_config** out) {
  PL_REQUIRE(out);
  *out = nullptr;
  return guard([&] { *out = new pl_config{}; });
}

pl_status pl_config_parse(const char* text, pl_config** out) {
  PL_REQUIRE(text);
  PL_REQUIRE(out);
  *out = nullptr;
  return guard([&] { *out = new pl_config{harness::ExperimentConfig::parse(text)}; });
}

pl_status pl_config_load(const char* path, pl_config** out) {
  PL_REQUIRE(path);
  PL_REQUIRE(out);
  *out = nullptr;
  return guard([&] { *out = new pl_config{harness::ExperimentConfig::load(path)}; });
}

void pl_config_destroy(pl_config* cfg) { delete cfg; }

pl_status pl_config_set(pl_config* cfg, const char* key, const char* value) {
  PL_REQUIRE(cfg);
  PL_REQUIRE(key);
  PL_REQUIRE(value);
  return guard([&] { cfg->cfg.set(key, value); });
}

pl_status pl_config_output(const pl_config* cfg, char* buf, size_t cap, size_t* len) {
  PL_REQUIRE(cfg);
  return put_text(cfg->cfg.output, buf, cap, len);
}

pl_status pl_config_describe(const pl_config* cfg, char* buf, size_t cap, size_t* len) {
  PL_REQUIRE(cfg);
  std::string text;
  const pl_status st = guard([&] {
    cfg->cfg.validate();
    text = cfg->cfg.describe();
  });
  if (st != PL_OK) return st;
  return put_text(text, buf, cap, len);
}

size_t pl_command_count(void) { return harness::command_names().size(); }

const char* pl_command_name(size_t i) {
  const auto& names = harness::command_names();
  return i < names.size() ? names[i].c_str() : nullptr;
}

pl_status pl_run(const char* command, const pl_config* cfg, pl_result** out) {
  PL_REQUIRE(command);
  PL_REQUIRE(cfg);
  PL_REQUIRE(out);
  *out = nullptr;
  return guard([&] { *out = new pl_result{harness::run_command(command, cfg->cfg)}; });
}

void pl_result_destroy(pl_result* r) { delete r; }

int pl_result_exit_code(const pl_result* r) { return r ? r->res.exit_code : 2; }

size_t pl_result_row_count(const pl_result* r) { return r ? r->res.rows.size() : 0; }

pl_status pl_result_row(const pl_result* r, size_t i, pl_row* out) {
  PL_REQUIRE(r);
  PL_REQUIRE(out);
  if (i >= r->res.rows.size()) {
    g_error = "row index out of range";
    return PL_ERR_PRECONDITION;
  }
  const auto& row = r->res.rows[i];
  *out = pl_row{row.experiment.c_str(), row.kernel.c_str(), row.n,     row.gamma,       row.p,
                row.s,                  row.f_id,           row.ratio, row.tail_budget, row.status.c_str()};
  return PL_OK;
}

pl_status pl_result_csv(const pl_result* r, char* buf, size_t cap, size_t* len) {
  PL_REQUIRE(r);
  std::ostringstream os;
  harness::write_csv(os, r->res.rows);
  return put_text(os.str(), buf, cap, len);
}

pl_status pl_result_report(const pl_result* r, char* buf, size_t cap, size_t* len) {
  PL_REQUIRE(r);
  return put_text(r->res.report, buf, cap, len);
}

pl_status pl_result_write_csv(const pl_result* r, const char* path) {
  PL_REQUIRE(r);
  PL_REQUIRE(path);
  return guard([&] {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::Io, std::string("cannot write ") + path);
    harness::write_csv(os, r->res.rows);
    if (!os.flush()) fail(ErrorKind::Io, std::string("write failed: ") + path);
  });
}

}  // extern "C"
