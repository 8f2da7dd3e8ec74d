#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "eelcache.h"

namespace {

// Small scenario so the whole binary stays fast; shares/skew keep the
// default shape, volumes shrink.
const char* kTinyScenario = R"({
  "workload": {
    "learning_total": 800,
    "universe_items": 300,
    "device_rate_per_s": 2.0,
    "bg_request_rate_per_device": 0.5
  },
  "learning": {"val_draws": 500},
  "sim": {"horizon_s": 3000, "master_seed": 11}
})";

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct ConfigHandle {
  eel_config* c = nullptr;
  ~ConfigHandle() { eel_config_free(c); }
};

struct FilterHandle {
  eel_ccbf* f = nullptr;
  ~FilterHandle() { eel_ccbf_free(f); }
};

}  // namespace

TEST_CASE("version and error text are always available") {
  CHECK(eel_version() != nullptr);
  CHECK(eel_last_error() != nullptr);
}

TEST_CASE("config parse failures name the offending key path") {
  eel_config* c = nullptr;

  CHECK(eel_config_from_json("{nope", &c) == EEL_ERR_INVALID_ARG);
  CHECK(std::string(eel_last_error()).find("not valid JSON") != std::string::npos);

  CHECK(eel_config_from_json(R"({"workload": {"devce_rate": 1}})", &c) ==
        EEL_ERR_INVALID_ARG);
  CHECK(std::string(eel_last_error()).find("workload.devce_rate") !=
        std::string::npos);

  CHECK(eel_config_from_json(R"({"ccbf": {"m": 16, "k": 32}})", &c) ==
        EEL_ERR_INVALID_ARG);
  CHECK(std::string(eel_last_error()).find("ccbf.k") != std::string::npos);

  CHECK(eel_config_from_json(R"({"learning": {"epsilon": -1}})", &c) ==
        EEL_ERR_INVALID_ARG);
  CHECK(std::string(eel_last_error()).find("learning.epsilon") !=
        std::string::npos);

  CHECK(eel_config_from_file("/definitely/not/here.json", &c) == EEL_ERR_IO);
}

TEST_CASE("runs are deterministic for a fixed seed and diverge across seeds") {
  ConfigHandle cfg;
  REQUIRE(eel_config_from_json(kTinyScenario, &cfg.c) == EEL_OK);

  eel_run_summary a{}, b{};
  REQUIRE(eel_run_scheme(cfg.c, "ccache", "capi_run_a.csv", &a) == EEL_OK);
  REQUIRE(eel_run_scheme(cfg.c, "ccache", "capi_run_b.csv", &b) == EEL_OK);

  CHECK(a.converged == 1);
  CHECK(a.latency_s > 0);
  CHECK(a.accuracy > 0);
  CHECK(a.accuracy <= 1.0);
  CHECK(a.overhead_bytes > 0);
  CHECK(a.glr_final > 0);
  CHECK(a.latency_s == b.latency_s);
  CHECK(a.overhead_bytes == b.overhead_bytes);
  CHECK(a.accuracy == b.accuracy);

  std::string csv_a = slurp("capi_run_a.csv");
  CHECK(!csv_a.empty());
  CHECK(csv_a == slurp("capi_run_b.csv"));

  REQUIRE(eel_config_set_seed(cfg.c, 12) == EEL_OK);
  eel_run_summary other{};
  REQUIRE(eel_run_scheme(cfg.c, "ccache", nullptr, &other) == EEL_OK);
  CHECK(other.overhead_bytes != a.overhead_bytes);

  std::remove("capi_run_a.csv");
  std::remove("capi_run_b.csv");
}

TEST_CASE("unknown scheme names are rejected") {
  ConfigHandle cfg;
  REQUIRE(eel_config_default(&cfg.c) == EEL_OK);
  eel_run_summary s{};
  CHECK(eel_run_scheme(cfg.c, "dcache", nullptr, &s) == EEL_ERR_INVALID_ARG);
  CHECK(std::string(eel_last_error()).find("dcache") != std::string::npos);
}

TEST_CASE("filter insert, query, and persistence roundtrip") {
  FilterHandle f;
  REQUIRE(eel_ccbf_create(1024, 4, 7, 200, 42, 43, &f.f) == EEL_OK);

  int outcome = -1;
  REQUIRE(eel_ccbf_insert(f.f, "item-1", &outcome) == EEL_OK);
  CHECK(outcome == 0);
  REQUIRE(eel_ccbf_insert(f.f, "item-1", &outcome) == EEL_OK);
  CHECK(outcome == 1);

  int present = 0;
  REQUIRE(eel_ccbf_query(f.f, "item-1", &present) == EEL_OK);
  CHECK(present == 1);

  REQUIRE(eel_ccbf_save(f.f, "capi_filter.bin") == EEL_OK);
  FilterHandle loaded;
  REQUIRE(eel_ccbf_load("capi_filter.bin", &loaded.f) == EEL_OK);
  present = 0;
  REQUIRE(eel_ccbf_query(loaded.f, "item-1", &present) == EEL_OK);
  CHECK(present == 1);

  std::remove("capi_filter.bin");

  eel_ccbf* bad = nullptr;
  CHECK(eel_ccbf_load("/definitely/not/here.bin", &bad) == EEL_ERR_IO);
  std::ofstream("capi_garbage.bin", std::ios::binary) << "not a filter";
  CHECK(eel_ccbf_load("capi_garbage.bin", &bad) == EEL_ERR_MALFORMED);
  std::remove("capi_garbage.bin");
}

TEST_CASE("filter combine folds matching filters and rejects mismatches") {
  FilterHandle a, b;
  REQUIRE(eel_ccbf_create(1024, 4, 7, 200, 42, 43, &a.f) == EEL_OK);
  REQUIRE(eel_ccbf_create(1024, 4, 7, 200, 42, 43, &b.f) == EEL_OK);
  REQUIRE(eel_ccbf_insert(a.f, "only-a", nullptr) == EEL_OK);
  REQUIRE(eel_ccbf_insert(b.f, "only-b", nullptr) == EEL_OK);

  FilterHandle merged;
  REQUIRE(eel_ccbf_combine(a.f, b.f, &merged.f) == EEL_OK);
  int present = 0;
  REQUIRE(eel_ccbf_query(merged.f, "only-a", &present) == EEL_OK);
  CHECK(present == 1);
  REQUIRE(eel_ccbf_query(merged.f, "only-b", &present) == EEL_OK);
  CHECK(present == 1);

  FilterHandle stranger;
  REQUIRE(eel_ccbf_create(1024, 4, 7, 200, 99, 43, &stranger.f) == EEL_OK);
  eel_ccbf* out = nullptr;
  CHECK(eel_ccbf_combine(a.f, stranger.f, &out) == EEL_ERR_PARAM_MISMATCH);
}

TEST_CASE("filter inspect reports parameters and item count as JSON") {
  FilterHandle f;
  REQUIRE(eel_ccbf_create(4096, 4, 5, 100, 1, 2, &f.f) == EEL_OK);
  for (int i = 0; i < 100; ++i)
    REQUIRE(eel_ccbf_insert(f.f, ("key-" + std::to_string(i)).c_str(),
                            nullptr) == EEL_OK);

  char* json = nullptr;
  REQUIRE(eel_ccbf_inspect(f.f, &json) == EEL_OK);
  std::string text(json);
  eel_string_free(json);

  CHECK(text.find("\"m\":4096") != std::string::npos);
  CHECK(text.find("\"item_count\":100") != std::string::npos);
  CHECK(text.find("\"fill_ratio\":") != std::string::npos);
  CHECK(text.find("\"column_counts\":[") != std::string::npos);
}
