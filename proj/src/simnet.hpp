#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cache.hpp"
#include "ccbf.hpp"
#include "metrics.hpp"

namespace eel {

// Star-of-stars network: one data center behind a gateway, edge nodes hanging
// off the gateway and cross-linked in a ring, end devices attached to edges.
// The ring gives "nearby edge" a physical meaning: adjacent edges are one hop
// apart, the rest are two (via ring or gateway).

enum class NodeKind { DataCenter, Gateway, Edge, Device };

struct TopoCfg {
  int edges = 4;
  int devices_per_edge = 2;
  double bandwidth_bps = 1e9;
  double propagation_delay_s = 0.0005;
};

class Topology {
 public:
  static Topology build(const TopoCfg& cfg);

  int node_count() const { return static_cast<int>(kind_.size()); }
  NodeKind kind(int id) const { return kind_[id]; }
  int data_center() const { return 0; }
  int gateway() const { return 1; }
  const std::vector<int>& edge_ids() const { return edge_ids_; }
  const std::vector<int>& device_ids() const { return device_ids_; }
  int edge_of_device(int device_id) const { return attach_[device_id]; }

  int hops(int a, int b) const { return hop_[a][b]; }
  int diameter() const { return diameter_; }
  // One message over the shortest path: per-hop serialization plus
  // propagation, summed across hops.
  double delay(int a, int b, std::uint64_t payload_bytes) const;

  // Edge indices (0-based, ascending) whose nodes sit within `range` hops of
  // the given edge, excluding it.
  std::vector<int> edge_peers_within(int edge_index, int range) const;

 private:
  TopoCfg cfg_;
  std::vector<NodeKind> kind_;
  std::vector<int> edge_ids_;
  std::vector<int> device_ids_;
  std::vector<int> attach_;               // device node id -> edge node id
  std::vector<std::vector<int>> hop_;     // all-pairs BFS hop counts
  int diameter_ = 0;
};

enum class Scheme { CCache, PCache, Centralized };

const char* to_string(Scheme s);
bool parse_scheme(std::string_view name, Scheme& out);

struct WorkloadCfg {
  std::uint64_t learning_total = 12000;
  std::uint32_t universe_items = 2200;
  std::vector<double> class_shares = {0.35, 0.25, 0.15, 0.10, 0.10, 0.05};
  double device_rate_per_s = 1.0;
  // Edge data is non-IID: each edge leans toward its home classes
  // (class index ≡ edge index mod edge count) by this factor, with
  // uniform_share of draws following the global mix instead.
  double class_skew_boost = 8.0;
  double uniform_share = 0.2;
  std::uint32_t learning_bytes = 1024;
  double bg_request_rate_per_device = 0.75;
  std::uint32_t bg_universe = 160;
  std::uint32_t bg_hot_count = 48;
  double bg_hot_share = 0.95;      // chance a content request targets the hot set
  std::uint32_t background_bytes = 4096;
};

struct LearnCfg {
  double epsilon = 0.001;
  int window = 8;
  double stall_epsilon = 0.004;    // request trigger, looser than the latch
  int explain_k = 3;
  double ceil_acc = 0.95;
  int val_draws = 4000;
};

struct SchemeCfg {
  double record_exchange_period_s = 60;
  double p_cache_period_s = 60;
  std::uint32_t request_budget = 64;
  std::uint32_t p_cache_budget = 8;
  int initial_range_hops = 1;
  int max_range_hops = 0;          // 0 = network diameter
};

struct SimCfg {
  TopoCfg topo;
  // Dedup decisions query the fold of every node's filter, so the default
  // array is sized for the pooled record load, not one node's capacity.
  CcbfParams ccbf{.array_bits = 65536};
  WorkloadCfg workload;
  LearnCfg learning;
  SchemeCfg scheme;
  std::size_t cache_capacity = 2000;
  double snapshot_period_s = 10;
  double horizon_s = 7200;
  double train_period_s = 10;
  std::uint32_t model_upload_bytes = 16384;
  std::uint64_t master_seed = 1;
  bool debug_dump = false;         // capture raw cache contents per snapshot
};

// Throws std::invalid_argument naming the offending key.
void validate_sim_cfg(const SimCfg& cfg);

struct DumpItem {
  std::string key;
  ItemKind kind = ItemKind::Learning;
};

struct SnapshotDump {
  double t = 0;
  std::vector<std::vector<DumpItem>> per_edge;
};

// Tallies for the conservation audit: every generated item ends up in
// exactly one bucket, or is still in flight when the run stops.
struct RunAudit {
  std::uint64_t learn_pushes_sent = 0;
  std::uint64_t learn_pushes_delivered = 0;
  std::uint64_t admitted_new = 0;
  std::uint64_t admitted_evicting = 0;
  std::uint64_t repeats = 0;
  std::uint64_t dedup_skips = 0;
  std::uint64_t response_items_sent = 0;
  std::uint64_t response_items_kept = 0;
  std::uint64_t record_messages = 0;
  std::uint64_t record_rejects = 0;
  std::uint64_t bg_requests = 0;
  std::uint64_t bg_hits = 0;
  std::uint64_t bg_cached = 0;
  std::uint64_t bg_refused = 0;
};

struct RunResult {
  MetricsSeries series;
  bool converged = false;
  double latency_s = 0;
  double end_time_s = 0;
  std::uint64_t total_overhead_bytes = 0;
  RunAudit audit;
  std::vector<SnapshotDump> dumps;
};

RunResult run_scheme(const SimCfg& cfg, Scheme scheme, std::uint64_t seed);

}  // namespace eel
