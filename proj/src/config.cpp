#include "config.hpp"

#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace eel {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument(path + " " + what);
}

// One config section: typed getters that record which keys were consumed so
// done() can reject typos instead of silently ignoring them.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be a JSON object");
  }

  void get(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(at(key), "must be a boolean");
      out = v->get<bool>();
    }
  }

  void get(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(at(key), "must be a number");
      out = v->get<double>();
    }
  }

  void get(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(at(key), "must be an integer");
      out = v->get<int>();
    }
  }

  template <typename U>
    requires std::unsigned_integral<U>
  void get(const char* key, U& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(at(key), "must be a nonnegative integer");
      if (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)
        fail(at(key), "must be a nonnegative integer");
      auto u = v->get<std::uint64_t>();
      if (u > std::numeric_limits<U>::max()) fail(at(key), "is out of range");
      out = static_cast<U>(u);
    }
  }

  void get(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(at(key), "must be an array of numbers");
      std::vector<double> vals;
      for (const auto& e : *v) {
        if (!e.is_number()) fail(at(key), "must be an array of numbers");
        vals.push_back(e.get<double>());
      }
      out = std::move(vals);
    }
  }

  // Call after the last get: any key not consumed is unknown.
  void done() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(at(key.c_str()), "is not a recognized key");
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const char* key) const { return path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void apply_config(const json& root, SimCfg& cfg) {
  if (!root.is_object()) throw std::invalid_argument("config root must be a JSON object");

  std::set<std::string> sections;
  auto section = [&](const char* name) -> const json* {
    sections.insert(name);
    auto it = root.find(name);
    return it == root.end() ? nullptr : &*it;
  };

  if (const json* j = section("topology")) {
    Section s(*j, "topology");
    s.get("edges", cfg.topo.edges);
    s.get("devices_per_edge", cfg.topo.devices_per_edge);
    s.get("bandwidth_bps", cfg.topo.bandwidth_bps);
    s.get("propagation_delay_s", cfg.topo.propagation_delay_s);
    s.done();
  }

  if (const json* j = section("ccbf")) {
    Section s(*j, "ccbf");
    s.get("m", cfg.ccbf.array_bits);
    s.get("g", cfg.ccbf.num_arrays);
    s.get("k", cfg.ccbf.num_hashes);
    s.get("n", cfg.ccbf.capacity);
    s.get("hash_seed", cfg.ccbf.hash_seed);
    s.get("matrix_seed", cfg.ccbf.matrix_seed);
    s.done();
    if (cfg.ccbf.array_bits < 8) fail("ccbf.m", "must be >= 8");
    if (cfg.ccbf.num_arrays == 0 || cfg.ccbf.num_arrays > kCcbfMaxArrays)
      fail("ccbf.g", "must be in [1,64]");
    if (cfg.ccbf.num_hashes == 0) fail("ccbf.k", "must be >= 1");
    if (cfg.ccbf.num_hashes > cfg.ccbf.array_bits)
      fail("ccbf.k", "must not exceed ccbf.m");
    if (cfg.ccbf.capacity == 0) fail("ccbf.n", "must be >= 1");
  }

  if (const json* j = section("workload")) {
    Section s(*j, "workload");
    s.get("learning_total", cfg.workload.learning_total);
    s.get("universe_items", cfg.workload.universe_items);
    s.get("class_shares", cfg.workload.class_shares);
    s.get("device_rate_per_s", cfg.workload.device_rate_per_s);
    s.get("class_skew_boost", cfg.workload.class_skew_boost);
    s.get("uniform_share", cfg.workload.uniform_share);
    s.get("learning_bytes", cfg.workload.learning_bytes);
    s.get("bg_request_rate_per_device", cfg.workload.bg_request_rate_per_device);
    s.get("bg_universe", cfg.workload.bg_universe);
    s.get("bg_hot_count", cfg.workload.bg_hot_count);
    s.get("bg_hot_share", cfg.workload.bg_hot_share);
    s.get("background_bytes", cfg.workload.background_bytes);
    s.done();
  }

  if (const json* j = section("learning")) {
    Section s(*j, "learning");
    s.get("epsilon", cfg.learning.epsilon);
    s.get("window", cfg.learning.window);
    s.get("stall_epsilon", cfg.learning.stall_epsilon);
    s.get("explain_k", cfg.learning.explain_k);
    s.get("ceil_acc", cfg.learning.ceil_acc);
    s.get("val_draws", cfg.learning.val_draws);
    s.done();
  }

  if (const json* j = section("scheme")) {
    Section s(*j, "scheme");
    s.get("record_exchange_period_s", cfg.scheme.record_exchange_period_s);
    s.get("p_cache_period_s", cfg.scheme.p_cache_period_s);
    s.get("request_budget", cfg.scheme.request_budget);
    s.get("p_cache_budget", cfg.scheme.p_cache_budget);
    s.get("initial_range_hops", cfg.scheme.initial_range_hops);
    s.get("max_range_hops", cfg.scheme.max_range_hops);
    s.done();
  }

  if (const json* j = section("sim")) {
    Section s(*j, "sim");
    std::uint64_t cap = cfg.cache_capacity;
    s.get("cache_capacity", cap);
    cfg.cache_capacity = static_cast<std::size_t>(cap);
    s.get("snapshot_period_s", cfg.snapshot_period_s);
    s.get("horizon_s", cfg.horizon_s);
    s.get("train_period_s", cfg.train_period_s);
    s.get("model_upload_bytes", cfg.model_upload_bytes);
    s.get("master_seed", cfg.master_seed);
    s.get("debug_dump", cfg.debug_dump);
    s.done();
  }

  for (const auto& [key, value] : root.items())
    if (!sections.count(key))
      throw std::invalid_argument(key + " is not a recognized config section");
}

}  // namespace

SimCfg parse_sim_cfg(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  SimCfg cfg;
  apply_config(root, cfg);
  validate_sim_cfg(cfg);
  return cfg;
}

SimCfg load_sim_cfg(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_sim_cfg(buf.str());
}

}  // namespace eel
