#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <unordered_set>

#include "metrics.hpp"
#include "simnet.hpp"

using namespace eel;

namespace {

// Small but complete scenario: every mechanism fires (gossip, requests,
// digests, background churn) within a few hundred simulated seconds.
SimCfg tiny_cfg() {
  SimCfg c;
  c.topo = {4, 2, 1e9, 0.0005};
  c.ccbf.array_bits = 16384;
  c.ccbf.num_arrays = 4;
  c.ccbf.num_hashes = 7;
  c.ccbf.capacity = 2000;
  c.workload.learning_total = 600;
  c.workload.universe_items = 220;
  c.workload.device_rate_per_s = 2.0;
  c.workload.uniform_share = 0.2;
  c.workload.class_skew_boost = 6.0;
  c.workload.bg_request_rate_per_device = 0.5;
  c.workload.bg_universe = 256;
  c.workload.bg_hot_count = 16;
  c.workload.bg_hot_share = 0.9;
  c.workload.background_bytes = 2048;
  c.learning.epsilon = 0.01;
  c.learning.window = 4;
  c.learning.stall_epsilon = 0.02;
  c.learning.val_draws = 800;
  c.scheme.record_exchange_period_s = 10;
  c.scheme.p_cache_period_s = 15;
  c.scheme.request_budget = 32;
  c.scheme.p_cache_budget = 8;
  c.cache_capacity = 300;
  c.snapshot_period_s = 5;
  c.horizon_s = 600;
  c.train_period_s = 5;
  c.master_seed = 7;
  return c;
}

bool on_tick_boundary(double t, double period) {
  double m = std::fmod(t, period);
  return m < 1e-6 || period - m < 1e-6;
}

}  // namespace

TEST_CASE("message delay follows payload size and hop count") {
  TopoCfg tc;
  tc.edges = 4;
  tc.devices_per_edge = 2;
  tc.bandwidth_bps = 1e9;
  tc.propagation_delay_s = 0;
  auto flat = Topology::build(tc);
  int dev = flat.device_ids()[0];
  int edge = flat.edge_of_device(dev);
  // 10^6 bytes over 1 Gbps, one hop, no propagation
  CHECK(flat.delay(dev, edge, 1000000) == doctest::Approx(0.008));

  tc.propagation_delay_s = 0.0005;
  auto topo = Topology::build(tc);
  // empty payload pays propagation alone
  CHECK(topo.delay(dev, edge, 0) == doctest::Approx(0.0005));
  // the two-hop edge-to-center path costs exactly twice the one-hop leg
  CHECK(topo.hops(edge, topo.data_center()) == 2);
  CHECK(topo.delay(edge, topo.data_center(), 5000) ==
        doctest::Approx(2 * topo.delay(dev, edge, 5000)));
}

TEST_CASE("default topology shape and distances") {
  auto topo = Topology::build(TopoCfg{});
  CHECK(topo.node_count() == 14);
  CHECK(topo.kind(0) == NodeKind::DataCenter);
  CHECK(topo.kind(1) == NodeKind::Gateway);
  CHECK(topo.edge_ids() == std::vector<int>{2, 3, 4, 5});
  REQUIRE(topo.device_ids().size() == 8);
  CHECK(topo.edge_of_device(6) == 2);
  CHECK(topo.edge_of_device(7) == 2);
  CHECK(topo.edge_of_device(8) == 3);
  CHECK(topo.edge_of_device(13) == 5);

  CHECK(topo.hops(2, 3) == 1);   // ring neighbours
  CHECK(topo.hops(2, 4) == 2);   // opposite edges
  CHECK(topo.hops(2, 1) == 1);
  CHECK(topo.hops(2, 0) == 2);
  CHECK(topo.hops(6, 0) == 3);   // device to data center
  CHECK(topo.hops(6, 10) == 4);  // devices under opposite edges
  CHECK(topo.diameter() == 4);

  CHECK(topo.edge_peers_within(0, 1) == std::vector<int>{1, 3});
  CHECK(topo.edge_peers_within(0, 2) == std::vector<int>{1, 2, 3});
  CHECK(topo.edge_peers_within(2, 1) == std::vector<int>{1, 3});

  TopoCfg two;
  two.edges = 2;
  two.devices_per_edge = 1;
  auto pair = Topology::build(two);
  CHECK(pair.hops(2, 3) == 1);  // single cross link
  CHECK(pair.edge_peers_within(0, 1) == std::vector<int>{1});
}

TEST_CASE("config validation names the offending key") {
  auto c = tiny_cfg();
  c.workload.class_shares = {0.5, 0.2};
  CHECK_THROWS_WITH_AS(validate_sim_cfg(c), "workload.class_shares must sum to 1",
                       std::invalid_argument);
  c = tiny_cfg();
  c.workload.bg_hot_count = 9999;
  CHECK_THROWS_WITH_AS(validate_sim_cfg(c), "workload.bg_hot_count exceeds bg_universe",
                       std::invalid_argument);
  c = tiny_cfg();
  c.scheme.request_budget = 0;
  CHECK_THROWS_WITH_AS(validate_sim_cfg(c), "scheme.request_budget must be >= 1",
                       std::invalid_argument);
  c = tiny_cfg();
  c.cache_capacity = 0;
  CHECK_THROWS_WITH_AS(validate_sim_cfg(c), "sim.cache_capacity must be >= 1",
                       std::invalid_argument);
}

TEST_CASE("scheme names round-trip") {
  Scheme s;
  CHECK(parse_scheme("ccache", s));
  CHECK(s == Scheme::CCache);
  CHECK(parse_scheme("pcache", s));
  CHECK(s == Scheme::PCache);
  CHECK(parse_scheme("centralized", s));
  CHECK(s == Scheme::Centralized);
  CHECK_FALSE(parse_scheme("c-cache", s));
  CHECK(std::string(to_string(Scheme::PCache)) == "pcache");
}

TEST_CASE("a workload with no traffic produces an empty run") {
  auto c = tiny_cfg();
  c.workload.learning_total = 0;
  c.workload.bg_request_rate_per_device = 0;
  auto r = run_scheme(c, Scheme::CCache, 1);
  CHECK(r.converged);
  CHECK(r.latency_s == 0);
  CHECK(r.series.snapshots().empty());
  CHECK(r.series.terminal().scheme == "ccache");
  CHECK(r.total_overhead_bytes == 0);
}

TEST_CASE("identical seeds give byte-identical output") {
  auto c = tiny_cfg();
  auto a = run_scheme(c, Scheme::CCache, 7);
  auto b = run_scheme(c, Scheme::CCache, 7);
  CHECK(to_csv(a.series) == to_csv(b.series));
  CHECK(a.total_overhead_bytes == b.total_overhead_bytes);
  CHECK(a.latency_s == b.latency_s);
  CHECK(a.audit.learn_pushes_delivered == b.audit.learn_pushes_delivered);
}

TEST_CASE("cooperative run converges and respects cache bounds") {
  auto c = tiny_cfg();
  auto r = run_scheme(c, Scheme::CCache, 7);
  CHECK(r.converged);
  CHECK(r.latency_s > 0);
  CHECK(r.latency_s <= c.horizon_s);
  // convergence latches on a training tick, so the latency must sit on one
  CHECK(on_tick_boundary(r.latency_s, c.train_period_s));

  const auto& term = r.series.terminal();
  CHECK(term.scheme == "ccache");
  CHECK(term.tp + term.fp + term.fn + term.tn == 800);
  CHECK(term.accuracy > 0.5);
  CHECK(term.accuracy <= 1.0);

  REQUIRE(!r.series.snapshots().empty());
  for (const auto& s : r.series.snapshots()) {
    for (const auto& n : s.nodes) {
      CHECK(n.n_l <= n.n_c);
      CHECK(n.n_c <= c.cache_capacity);
    }
  }
  CHECK(r.total_overhead_bytes > 0);
  CHECK(r.series.snapshots().back().overhead_bytes <= r.total_overhead_bytes);

  const auto& a = r.audit;
  CHECK(a.learn_pushes_sent <= c.workload.learning_total);
  CHECK(a.learn_pushes_delivered <= a.learn_pushes_sent);
  // every delivered push lands in exactly one bucket
  CHECK(a.learn_pushes_delivered ==
        a.admitted_new + a.admitted_evicting + a.repeats + a.dedup_skips);
  CHECK(a.response_items_kept <= a.response_items_sent);
  CHECK(a.bg_hits <= a.bg_requests);
  CHECK(a.record_messages > 0);
}

TEST_CASE("digest run converges too") {
  auto c = tiny_cfg();
  auto r = run_scheme(c, Scheme::PCache, 7);
  CHECK(r.converged);
  CHECK(on_tick_boundary(r.latency_s, c.train_period_s));
  CHECK(r.series.terminal().scheme == "pcache");
  CHECK(r.series.terminal().accuracy > 0.5);
  const auto& a = r.audit;
  CHECK(a.learn_pushes_delivered ==
        a.admitted_new + a.admitted_evicting + a.repeats + a.dedup_skips);
  CHECK(a.dedup_skips == 0);      // no shared record, nothing to dedup against
  CHECK(a.record_messages == 0);  // digests travel instead of records
  CHECK(a.response_items_sent > 0);
}

TEST_CASE("centralized run trains at the center and caches nothing") {
  auto c = tiny_cfg();
  auto r = run_scheme(c, Scheme::Centralized, 7);
  CHECK(r.converged);
  CHECK(r.series.terminal().scheme == "centralized");
  CHECK(r.series.terminal().accuracy > 0.5);
  const auto& a = r.audit;
  CHECK(a.learn_pushes_delivered == a.admitted_new + a.repeats);
  CHECK(a.admitted_evicting == 0);
  CHECK(a.dedup_skips == 0);
  CHECK(a.record_messages == 0);
  CHECK(a.response_items_sent == 0);
  CHECK(a.bg_hits == 0);  // no edge caches, every request goes upstream
  for (const auto& s : r.series.snapshots()) {
    CHECK(s.n_g == 0);
    CHECK(s.n_gc == 0);
    CHECK(s.n_b == 0);
    for (const auto& n : s.nodes) {
      CHECK(n.n_l == 0);
      CHECK(n.n_c == 0);
    }
  }
  CHECK(r.total_overhead_bytes > 0);
}

TEST_CASE("snapshot counters match a brute-force recount of dumped contents") {
  auto c = tiny_cfg();
  c.debug_dump = true;
  auto r = run_scheme(c, Scheme::CCache, 11);
  REQUIRE(r.dumps.size() == r.series.snapshots().size());
  for (std::size_t i = 0; i < r.dumps.size(); ++i) {
    const auto& d = r.dumps[i];
    const auto& s = r.series.snapshots()[i];
    CHECK(d.t == s.t);
    REQUIRE(d.per_edge.size() == s.nodes.size());
    std::unordered_set<std::string> distinct;
    std::uint64_t total = 0, bg = 0;
    for (std::size_t e = 0; e < d.per_edge.size(); ++e) {
      std::uint64_t n_l = 0, n_c = 0;
      for (const auto& it : d.per_edge[e]) {
        ++n_c;
        if (it.kind == ItemKind::Learning) {
          ++n_l;
          distinct.insert(it.key);
        } else {
          ++bg;
        }
      }
      CHECK(n_l == s.nodes[e].n_l);
      CHECK(n_c == s.nodes[e].n_c);
      total += n_c;
    }
    CHECK(total == s.n_gc);
    CHECK(bg == s.n_b);
    CHECK(distinct.size() == s.n_g);
  }
}

TEST_CASE("a horizon too short to latch reports the failure honestly") {
  auto c = tiny_cfg();
  c.horizon_s = 30;
  // window 8 needs nine observations; six ticks fit before the horizon
  c.learning.window = 8;
  auto r = run_scheme(c, Scheme::CCache, 7);
  CHECK_FALSE(r.converged);
  CHECK(r.latency_s == 30);
  CHECK(r.end_time_s == 30);
  REQUIRE(!r.series.snapshots().empty());
  CHECK(r.series.snapshots().back().t == doctest::Approx(30));
}
