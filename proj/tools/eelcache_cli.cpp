// Scenario runner and filter micro-tools over the public C API.
//
// Exit codes: 0 success, 1 bad config or usage, 2 when a run stops at the
// horizon instead of its own convergence rule.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "eelcache.h"

namespace {

bool verbose() {
  const char* v = std::getenv("EELCACHE_VERBOSE");
  return v && *v && std::string(v) != "0";
}

struct SchemeRun {
  explicit SchemeRun(std::string n) : name(std::move(n)) {}
  std::string name;
  eel_status status = EEL_ERR_INTERNAL;
  std::string error;
  eel_run_summary summary{};
};

int run_scenario(const std::string& config_path, const std::string& scheme,
                 std::uint64_t seed, bool seed_given, const std::string& out_dir) {
  eel_config* cfg = nullptr;
  if (eel_config_from_file(config_path.c_str(), &cfg) != EEL_OK) {
    std::fprintf(stderr, "error: %s\n", eel_last_error());
    return 1;
  }
  if (seed_given) eel_config_set_seed(cfg, seed);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    std::fprintf(stderr, "error: cannot create output directory %s: %s\n",
                 out_dir.c_str(), ec.message().c_str());
    eel_config_free(cfg);
    return 1;
  }

  std::vector<SchemeRun> runs;
  if (scheme == "all") {
    runs.emplace_back("ccache");
    runs.emplace_back("pcache");
    runs.emplace_back("centralized");
  } else {
    runs.emplace_back(scheme);
  }

  // Schemes are independent given the shared config, so the three-way
  // comparison fans out; rows still print in declaration order.
  std::vector<std::thread> workers;
  for (SchemeRun& r : runs)
    workers.emplace_back([&r, cfg, &out_dir] {
      std::string csv = out_dir + "/" + r.name + ".csv";
      if (verbose()) std::fprintf(stderr, "running %s -> %s\n", r.name.c_str(), csv.c_str());
      r.status = eel_run_scheme(cfg, r.name.c_str(), csv.c_str(), &r.summary);
      if (r.status != EEL_OK) r.error = eel_last_error();
      if (verbose())
        std::fprintf(stderr, "%s finished: %s\n", r.name.c_str(),
                     r.status == EEL_OK ? "converged" : r.error.c_str());
    });
  for (auto& w : workers) w.join();
  eel_config_free(cfg);

  for (const SchemeRun& r : runs)
    if (r.status != EEL_OK && r.status != EEL_ERR_DID_NOT_CONVERGE) {
      std::fprintf(stderr, "error: %s\n", r.error.c_str());
      return 1;
    }

  std::printf("%-12s %-10s %12s %10s %10s %10s %16s\n", "scheme", "converged",
              "latency_s", "accuracy", "glr_final", "r_final", "overhead_bytes");
  for (const SchemeRun& r : runs) {
    const eel_run_summary& s = r.summary;
    std::printf("%-12s %-10s %12.1f %10.4f %10.4f %10.4f %16llu\n",
                r.name.c_str(), s.converged ? "yes" : "no", s.latency_s,
                s.accuracy, s.glr_final, s.r_final,
                static_cast<unsigned long long>(s.overhead_bytes));
  }

  for (const SchemeRun& r : runs)
    if (r.status == EEL_ERR_DID_NOT_CONVERGE) return 2;
  return 0;
}

struct FilterParams {
  std::uint32_t m = 16384;
  std::uint8_t g = 4;
  std::uint8_t k = 7;
  std::uint32_t n = 2000;
  std::uint64_t hash_seed = 1;
  std::uint64_t matrix_seed = 2;
};

void add_param_flags(CLI::App* cmd, FilterParams& p) {
  cmd->add_option("--m", p.m, "bits per array");
  cmd->add_option("--g", p.g, "stacked arrays");
  cmd->add_option("--k", p.k, "probe positions per key");
  cmd->add_option("--n", p.n, "item capacity");
  cmd->add_option("--hash-seed", p.hash_seed);
  cmd->add_option("--matrix-seed", p.matrix_seed);
}

// Load the filter file, or start a fresh one from the flags when absent.
int open_or_create(const std::string& path, const FilterParams& p,
                   eel_ccbf** out) {
  if (std::filesystem::exists(path)) {
    if (eel_ccbf_load(path.c_str(), out) != EEL_OK) {
      std::fprintf(stderr, "error: %s\n", eel_last_error());
      return 1;
    }
    return 0;
  }
  if (eel_ccbf_create(p.m, p.g, p.k, p.n, p.hash_seed, p.matrix_seed, out) !=
      EEL_OK) {
    std::fprintf(stderr, "error: %s\n", eel_last_error());
    return 1;
  }
  return 0;
}

int save_and_close(eel_ccbf* f, const std::string& path) {
  eel_status s = eel_ccbf_save(f, path.c_str());
  if (s != EEL_OK) std::fprintf(stderr, "error: %s\n", eel_last_error());
  eel_ccbf_free(f);
  return s == EEL_OK ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative edge-cache scenario runner and filter tools"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run schemes from a JSON config");
  std::string config_path, scheme = "all", out_dir = ".";
  std::uint64_t seed = 0;
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--scheme", scheme, "ccache, pcache, centralized, or all")
      ->check(CLI::IsMember({"ccache", "pcache", "centralized", "all"}));
  auto* seed_opt = run->add_option("--seed", seed, "master seed override");
  run->add_option("--out", out_dir, "directory for per-scheme CSVs");

  auto* ccbf = app.add_subcommand("ccbf", "Counting filter micro-tools");
  ccbf->require_subcommand(1);

  std::string file_a, file_b, out_file;
  std::vector<std::string> keys;
  FilterParams params;

  auto* ins = ccbf->add_subcommand("insert", "Insert keys (creates the file if absent)");
  ins->add_option("file", file_a)->required();
  ins->add_option("keys", keys, "keys to insert")->required();
  add_param_flags(ins, params);

  auto* qry = ccbf->add_subcommand("query", "Query keys");
  qry->add_option("file", file_a)->required();
  qry->add_option("keys", keys, "keys to look up")->required();

  auto* cmb = ccbf->add_subcommand("combine", "Fold two filters into one");
  cmb->add_option("a", file_a)->required();
  cmb->add_option("b", file_b)->required();
  cmb->add_option("--out", out_file, "output filter file")->required();

  auto* insp = ccbf->add_subcommand("inspect", "Print filter state as JSON");
  insp->add_option("file", file_a)->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return run_scenario(config_path, scheme, seed, seed_opt->count() > 0,
                        out_dir);

  if (ins->parsed()) {
    eel_ccbf* f = nullptr;
    if (int rc = open_or_create(file_a, params, &f)) return rc;
    for (const std::string& key : keys) {
      int outcome = -1;
      if (eel_ccbf_insert(f, key.c_str(), &outcome) != EEL_OK) {
        std::fprintf(stderr, "error: %s: %s\n", key.c_str(), eel_last_error());
        eel_ccbf_free(f);
        return 1;
      }
      std::printf("%s %s\n", key.c_str(),
                  outcome == 0 ? "inserted" : "duplicate");
    }
    return save_and_close(f, file_a);
  }

  if (qry->parsed()) {
    eel_ccbf* f = nullptr;
    if (eel_ccbf_load(file_a.c_str(), &f) != EEL_OK) {
      std::fprintf(stderr, "error: %s\n", eel_last_error());
      return 1;
    }
    for (const std::string& key : keys) {
      int present = 0;
      eel_ccbf_query(f, key.c_str(), &present);
      std::printf("%s %s\n", key.c_str(), present ? "true" : "false");
    }
    eel_ccbf_free(f);
    return 0;
  }

  if (cmb->parsed()) {
    eel_ccbf *a = nullptr, *b = nullptr, *merged = nullptr;
    if (eel_ccbf_load(file_a.c_str(), &a) != EEL_OK) {
      std::fprintf(stderr, "error: %s\n", eel_last_error());
      return 1;
    }
    if (eel_ccbf_load(file_b.c_str(), &b) != EEL_OK) {
      std::fprintf(stderr, "error: %s\n", eel_last_error());
      eel_ccbf_free(a);
      return 1;
    }
    eel_status s = eel_ccbf_combine(a, b, &merged);
    eel_ccbf_free(a);
    eel_ccbf_free(b);
    if (s != EEL_OK) {
      std::fprintf(stderr, "error: %s\n", eel_last_error());
      return 1;
    }
    return save_and_close(merged, out_file);
  }

  if (insp->parsed()) {
    eel_ccbf* f = nullptr;
    if (eel_ccbf_load(file_a.c_str(), &f) != EEL_OK) {
      std::fprintf(stderr, "error: %s\n", eel_last_error());
      return 1;
    }
    char* json = nullptr;
    eel_status s = eel_ccbf_inspect(f, &json);
    eel_ccbf_free(f);
    if (s != EEL_OK) {
      std::fprintf(stderr, "error: %s\n", eel_last_error());
      return 1;
    }
    std::printf("%s\n", json);
    eel_string_free(json);
    return 0;
  }

  return 1;
}
