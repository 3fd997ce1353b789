// SPDX-License-Identifier: Apache-2.0
//
// pseudoloc <command> [--config FILE] [key=value ...] [--output FILE]
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pseudoloc/pseudoloc.h"

namespace {

constexpr int kUsageError = 64;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  std::string family;
  bool quiet = false;
};

const char* describe(const std::string& cmd) {
  if (cmd == "decay") return "localized norm of Tf off the exceptional set, per f, s and p";
  if (cmd == "decompose-check") return "compare Tf with the two-part decomposition at sampled points";
  if (cmd == "kernel-check") return "empirical size and Hoelder constants per distance scale";
  if (cmd == "haar-check") return "Haar-system, unconditionality and exceptional-set invariants";
  if (cmd == "sigma-dump") return "per-level covers and exceptional sets in cube text format";
  if (cmd == "figiel-sum") return "summability sums of the Psi coefficients per class";
  if (cmd == "oracle") return "cross-check against brute-force midpoint sums";
  return "";
}

std::string text_of(pl_status (*get)(const pl_result*, char*, size_t, size_t*), const pl_result* r) {
  size_t len = 0;
  get(r, nullptr, 0, &len);
  std::string s(len + 1, '\0');
  get(r, s.data(), s.size(), &len);
  s.resize(len);
  return s;
}

int fail_with(pl_status st) {
  std::cerr << "error (" << pl_status_name(st) << "): " << pl_last_error() << "\n";
  return st == PL_ERR_PARSE || st == PL_ERR_PRECONDITION || st == PL_ERR_IO || st == PL_ERR_NULL ? kUsageError : 2;
}

int run(const std::string& cmd, const Options& o) {
  pl_config* raw = nullptr;
  pl_status st = o.config.empty() ? pl_config_create(&raw) : pl_config_load(o.config.c_str(), &raw);
  if (st != PL_OK) return fail_with(st);
  std::unique_ptr<pl_config, decltype(&pl_config_destroy)> cfg(raw, pl_config_destroy);

  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: override '" << kv << "' is not key=value\n";
      return kUsageError;
    }
    st = pl_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != PL_OK) return fail_with(st);
  }
  if (!o.family.empty() && (st = pl_config_set(cfg.get(), "family_file", o.family.c_str())) != PL_OK)
    return fail_with(st);
  if (!o.output.empty() && (st = pl_config_set(cfg.get(), "output", o.output.c_str())) != PL_OK)
    return fail_with(st);

  pl_result* res_raw = nullptr;
  st = pl_run(cmd.c_str(), cfg.get(), &res_raw);
  if (st != PL_OK) return fail_with(st);
  std::unique_ptr<pl_result, decltype(&pl_result_destroy)> res(res_raw, pl_result_destroy);

  // The output path may also come from the config file.
  size_t len = 0;
  pl_config_output(cfg.get(), nullptr, 0, &len);
  std::string path(len + 1, '\0');
  pl_config_output(cfg.get(), path.data(), path.size(), &len);
  path.resize(len);

  if (!o.quiet) std::cerr << text_of(pl_result_report, res.get());
  if (path.empty()) {
    std::cout << text_of(pl_result_csv, res.get());
  } else if ((st = pl_result_write_csv(res.get(), path.c_str())) != PL_OK) {
    return fail_with(st);
  }
  return pl_result_exit_code(res.get());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-localisation experiments on finite Haar expansions"};
  app.set_version_flag("--version", pl_version());
  app.require_subcommand(1);
  Options opts;
  std::string chosen;
  for (size_t i = 0; i < pl_command_count(); ++i) {
    const std::string name = pl_command_name(i);
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("-c,--config", opts.config, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("-o,--output", opts.output, "CSV output path (default: stdout)");
    sub->add_option("-f,--family", opts.family, "expansions in text form, blank-line separated");
    sub->add_flag("-q,--quiet", opts.quiet, "suppress the summary on stderr");
    sub->add_option("overrides", opts.overrides, "key=value overrides applied after the config file");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  return run(chosen, opts);
}
