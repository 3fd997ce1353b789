#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "pseudoloc/pseudoloc.h"

namespace {

struct Kernel {
  pl_kernel* k = nullptr;
  explicit Kernel(const char* name = "hilbert1d", double gamma = 1.0, double c = 1.0) {
    REQUIRE(pl_kernel_create(name, gamma, c, &k) == PL_OK);
  }
  ~Kernel() { pl_kernel_destroy(k); }
};

struct Expansion {
  pl_expansion* f = nullptr;
  explicit Expansion(int dim = 1) { REQUIRE(pl_expansion_create(dim, &f) == PL_OK); }
  ~Expansion() { pl_expansion_destroy(f); }
};

struct Config {
  pl_config* c = nullptr;
  explicit Config(const char* text) { REQUIRE(pl_config_parse(text, &c) == PL_OK); }
  ~Config() { pl_config_destroy(c); }
};

struct Result {
  pl_result* r = nullptr;
  ~Result() { pl_result_destroy(r); }
};

template <class F>
std::string text(F get) {
  size_t len = 0;
  REQUIRE(get(nullptr, 0, &len) == PL_OK);
  std::string s(len + 1, '\0');
  REQUIRE(get(s.data(), s.size(), &len) == PL_OK);
  s.resize(len);
  return s;
}

void add_unit_haar(pl_expansion* f) {
  const int64_t m = 0;
  REQUIRE(pl_expansion_add(f, 0, &m, 1, 1.0) == PL_OK);
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(pl_version()) == "1.0.0");
  CHECK(std::string(pl_status_name(PL_ERR_BUFFER)) == "buffer");
  CHECK(std::string(pl_status_name(PL_OK)) == "ok");
  CHECK(pl_command_count() == 7);
  CHECK(std::string(pl_command_name(0)) == "decay");
  CHECK(pl_command_name(99) == nullptr);
}

TEST_CASE("kernel handles") {
  Kernel h;
  const double x = 0.0, y = 2.0;
  double v = 0.0;
  REQUIRE(pl_kernel_eval(h.k, &x, &y, &v) == PL_OK);
  CHECK(v == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(pl_kernel_eval(h.k, &x, &x, &v) == PL_ERR_DOMAIN);
  CHECK(std::strlen(pl_last_error()) > 0);
  CHECK(pl_kernel_eval(h.k, nullptr, &y, &v) == PL_ERR_NULL);

  int dim = 0;
  CHECK(pl_kernel_dim(h.k, &dim) == PL_OK);
  CHECK(dim == 1);
  double cs = 0, ch = 0;
  REQUIRE(pl_kernel_estimates(h.k, 4000, 7, &cs, &ch) == PL_OK);
  CHECK(std::abs(cs - 1.0) <= 1e-9);
  CHECK(ch <= 2.0 + 1e-6);
  REQUIRE(pl_kernel_normalize(h.k, 4000, 7) == PL_OK);
  double scale = 0;
  CHECK(pl_kernel_scale(h.k, &scale) == PL_OK);
  CHECK(scale == doctest::Approx(0.5).epsilon(1e-9));

  pl_kernel* bad = nullptr;
  CHECK(pl_kernel_create("nope", 1.0, 1.0, &bad) != PL_OK);
  CHECK(bad == nullptr);
  Kernel two("smooth2d");
  CHECK(pl_kernel_dim(two.k, &dim) == PL_OK);
  CHECK(dim == 2);
}

TEST_CASE("expansion handles and text") {
  Expansion e;
  add_unit_haar(e.f);
  size_t n = 0;
  CHECK(pl_expansion_size(e.f, &n) == PL_OK);
  CHECK(n == 1);
  double norm = 0;
  CHECK(pl_expansion_lp_norm(e.f, 2.0, &norm) == PL_OK);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-15));
  const int64_t m = 0;
  CHECK(pl_expansion_add(e.f, 0, &m, 0, 1.0) == PL_ERR_PRECONDITION);
  CHECK(pl_expansion_add(e.f, 0, &m, 2, 1.0) == PL_ERR_PRECONDITION);

  const std::string t = text([&](char* b, size_t c, size_t* l) { return pl_expansion_text(e.f, b, c, l); });
  CHECK(t.find("0:(0) eta=1 alpha=1") != std::string::npos);
  pl_expansion* back = nullptr;
  REQUIRE(pl_expansion_parse(t.c_str(), &back) == PL_OK);
  CHECK(pl_expansion_size(back, &n) == PL_OK);
  CHECK(n == 1);
  pl_expansion_destroy(back);
  CHECK(pl_expansion_parse("0:(0) alpha=1", &back) == PL_ERR_PARSE);
  CHECK(back == nullptr);

  // Buffer protocol.
  size_t len = 0;
  char tiny[4];
  CHECK(pl_expansion_text(e.f, tiny, sizeof tiny, &len) == PL_ERR_BUFFER);
  CHECK(len == t.size());
  CHECK(pl_expansion_text(e.f, tiny, sizeof tiny, nullptr) == PL_ERR_NULL);
  pl_expansion* none = nullptr;
  CHECK(pl_expansion_create(0, &none) == PL_ERR_PRECONDITION);
}

TEST_CASE("operators through the C interface") {
  Kernel h;
  Expansion e;
  add_unit_haar(e.f);
  const double x = 2.0;
  double v = 0;
  REQUIRE(pl_apply(h.k, e.f, &x, &v) == PL_OK);
  CHECK(v == doctest::Approx(std::log(8.0 / 9.0)).epsilon(1e-14));
  const double inside = 0.5;
  CHECK(pl_apply(h.k, e.f, &inside, &v) != PL_OK);
  REQUIRE(pl_apply_truncated(h.k, e.f, 0.25, &inside, &v) == PL_OK);
  CHECK(v == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));

  double o = 0;
  REQUIRE(pl_oracle_apply(h.k, e.f, &x, 0.0, 20, &o) == PL_OK);
  CHECK(std::abs(o - std::log(8.0 / 9.0)) <= 1e-6);
  CHECK(pl_oracle_apply(h.k, e.f, &x, 0.0, 27, &o) != PL_OK);

  const int64_t j = 1, i = 0;
  REQUIRE(pl_haar_pairing(h.k, 0, &j, 0, 0, &i, 1, 0.0, &v) == PL_OK);
  CHECK(v == doctest::Approx(std::log(16.0 / 27.0)).epsilon(1e-9));
  CHECK(pl_haar_pairing(h.k, 0, &i, 0, 1, &i, 1, 0.0, &v) != PL_OK);

  Expansion two(2);
  CHECK(pl_apply(h.k, two.f, &x, &v) == PL_ERR_PRECONDITION);
}

TEST_CASE("exceptional sets and restricted norms") {
  Kernel h;
  Expansion e;
  add_unit_haar(e.f);
  double mu = 0;
  REQUIRE(pl_sigma_measure(e.f, 0, &mu) == PL_OK);
  CHECK(mu == 9.0);
  REQUIRE(pl_sigma_measure(e.f, 1, &mu) == PL_OK);
  CHECK(mu == 18.0);
  const std::string s = text([&](char* b, size_t c, size_t* l) { return pl_sigma_text(e.f, 0, b, c, l); });
  CHECK(s == "-2:(-1) -2:(0) 0:(4)");

  double norm = 0, tail = 0;
  REQUIRE(pl_restricted_norm(h.k, e.f, 0, 2.0, 0.0, &norm, &tail) == PL_OK);
  CHECK(norm > 0.0);
  CHECK(tail >= 0.0);
  double norm_big = 0, tail_big = 0;
  REQUIRE(pl_restricted_norm(h.k, e.f, 0, 2.0, 64.0, &norm_big, &tail_big) == PL_OK);
  CHECK(norm_big >= norm);
  CHECK(tail_big <= tail);
  CHECK(norm_big <= norm + tail + 1e-12);
}

TEST_CASE("configuration") {
  Config c("p=4\ns_max=3\n");
  const std::string d = text([&](char* b, size_t n, size_t* l) { return pl_config_describe(c.c, b, n, l); });
  CHECK(d.find("p=4 p'=1.33333333333 exponent=0.5") != std::string::npos);
  CHECK(pl_config_set(c.c, "bogus", "1") == PL_ERR_PARSE);
  CHECK(pl_config_set(c.c, "M", "x") == PL_ERR_PARSE);
  CHECK(pl_config_set(c.c, "output", "here.csv") == PL_OK);
  CHECK(text([&](char* b, size_t n, size_t* l) { return pl_config_output(c.c, b, n, l); }) == "here.csv");
  CHECK(pl_config_set(c.c, "p", "1") == PL_OK);
  size_t len = 0;
  CHECK(pl_config_describe(c.c, nullptr, 0, &len) == PL_ERR_PRECONDITION);
  pl_config* missing = nullptr;
  CHECK(pl_config_load("/nonexistent/file.cfg", &missing) == PL_ERR_IO);
}

TEST_CASE("commands") {
  Config c("s_max=3\nfamily_size=2\np=2,3\n");
  Result a, b;
  REQUIRE(pl_run("decay", c.c, &a.r) == PL_OK);
  CHECK(pl_result_exit_code(a.r) == 0);
  CHECK(pl_result_row_count(a.r) == 16);
  pl_row row{};
  REQUIRE(pl_result_row(a.r, 0, &row) == PL_OK);
  CHECK(std::string(row.experiment) == "decay");
  CHECK(std::string(row.status) == "PASS");
  CHECK(row.p == 2.0);
  CHECK(pl_result_row(a.r, 16, &row) == PL_ERR_PRECONDITION);

  const std::string csv = text([&](char* p, size_t n, size_t* l) { return pl_result_csv(a.r, p, n, l); });
  CHECK(csv.rfind("experiment,kernel,n,gamma,p,s,f_id,ratio,tail_budget,status\n", 0) == 0);
  const std::string rep = text([&](char* p, size_t n, size_t* l) { return pl_result_report(a.r, p, n, l); });
  CHECK(rep.find("exponent=0.5") != std::string::npos);
  CHECK(rep.find("exit=0") != std::string::npos);

  // Identical configuration, identical bytes.
  REQUIRE(pl_run("decay", c.c, &b.r) == PL_OK);
  CHECK(text([&](char* p, size_t n, size_t* l) { return pl_result_csv(b.r, p, n, l); }) == csv);

  const std::string path = "test_capi_out.csv";
  REQUIRE(pl_result_write_csv(a.r, path.c_str()) == PL_OK);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == csv);
  std::remove(path.c_str());
  CHECK(pl_result_write_csv(a.r, "/nonexistent/dir/out.csv") == PL_ERR_IO);

  Result bad;
  CHECK(pl_run("nope", c.c, &bad.r) == PL_ERR_PRECONDITION);
  CHECK(bad.r == nullptr);
  CHECK(pl_result_exit_code(nullptr) == 2);

  Config small("trials=20\np=2,4\n");
  Result h;
  REQUIRE(pl_run("haar-check", small.c, &h.r) == PL_OK);
  CHECK(pl_result_exit_code(h.r) == 0);
  Result k;
  REQUIRE(pl_run("kernel-check", small.c, &k.r) == PL_OK);
  CHECK(pl_result_exit_code(k.r) == 0);
  CHECK(pl_result_row_count(k.r) > 0);
}

TEST_CASE("family from a file") {
  const std::string path = "test_capi_family.txt";
  {
    std::ofstream os(path);
    os << "0:(0) eta=1 alpha=1\n\n# second\n1:(0) eta=1 alpha=2\n1:(1) eta=1 alpha=-1\n";
  }
  Config c("s_max=2\n");
  REQUIRE(pl_config_set(c.c, "family_file", path.c_str()) == PL_OK);
  Result r;
  REQUIRE(pl_run("sigma-dump", c.c, &r.r) == PL_OK);
  CHECK(pl_result_row_count(r.r) == 6);
  pl_row row{};
  REQUIRE(pl_result_row(r.r, 0, &row) == PL_OK);
  CHECK(row.ratio == 9.0);
  std::remove(path.c_str());
  Result gone;
  CHECK(pl_run("sigma-dump", c.c, &gone.r) == PL_ERR_IO);
}
