#include "simnet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <queue>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "learning.hpp"
#include "prng.hpp"

namespace eel {

Topology Topology::build(const TopoCfg& cfg) {
  if (cfg.edges < 1) throw std::invalid_argument("topology.edges must be >= 1");
  if (cfg.devices_per_edge < 0)
    throw std::invalid_argument("topology.devices_per_edge must be >= 0");
  if (cfg.bandwidth_bps <= 0) throw std::invalid_argument("topology.bandwidth_bps must be > 0");
  if (cfg.propagation_delay_s < 0)
    throw std::invalid_argument("topology.propagation_delay_s must be >= 0");

  Topology t;
  t.cfg_ = cfg;
  const int E = cfg.edges;
  const int D = cfg.edges * cfg.devices_per_edge;
  const int n = 2 + E + D;

  t.kind_.assign(n, NodeKind::Device);
  t.kind_[0] = NodeKind::DataCenter;
  t.kind_[1] = NodeKind::Gateway;

  std::vector<std::vector<int>> adj(n);
  auto link = [&](int a, int b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };

  link(0, 1);
  for (int i = 0; i < E; ++i) {
    int id = 2 + i;
    t.kind_[id] = NodeKind::Edge;
    t.edge_ids_.push_back(id);
    link(1, id);
  }
  // Ring among the edges; two edges share a single cross link.
  if (E == 2) link(2, 3);
  if (E >= 3)
    for (int i = 0; i < E; ++i) link(2 + i, 2 + (i + 1) % E);

  t.attach_.assign(n, -1);
  for (int d = 0; d < D; ++d) {
    int id = 2 + E + d;
    int edge = 2 + d / cfg.devices_per_edge;
    t.device_ids_.push_back(id);
    t.attach_[id] = edge;
    link(id, edge);
  }

  t.hop_.assign(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    auto& dist = t.hop_[s];
    dist[s] = 0;
    std::deque<int> q{s};
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (int v : adj[u])
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push_back(v);
        }
    }
    for (int v = 0; v < n; ++v) {
      if (dist[v] < 0) throw std::logic_error("topology not connected");
      t.diameter_ = std::max(t.diameter_, dist[v]);
    }
  }
  return t;
}

double Topology::delay(int a, int b, std::uint64_t payload_bytes) const {
  double per_hop = 8.0 * static_cast<double>(payload_bytes) / cfg_.bandwidth_bps +
                   cfg_.propagation_delay_s;
  return per_hop * hop_[a][b];
}

std::vector<int> Topology::edge_peers_within(int edge_index, int range) const {
  std::vector<int> out;
  int self = edge_ids_[edge_index];
  for (std::size_t j = 0; j < edge_ids_.size(); ++j) {
    if (static_cast<int>(j) == edge_index) continue;
    if (hop_[self][edge_ids_[j]] <= range) out.push_back(static_cast<int>(j));
  }
  return out;
}

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::CCache: return "ccache";
    case Scheme::PCache: return "pcache";
    case Scheme::Centralized: return "centralized";
  }
  return "?";
}

bool parse_scheme(std::string_view name, Scheme& out) {
  if (name == "ccache") out = Scheme::CCache;
  else if (name == "pcache") out = Scheme::PCache;
  else if (name == "centralized") out = Scheme::Centralized;
  else return false;
  return true;
}

namespace {

// Class c owns the uid band [start_c, start_{c+1}); sizes follow the share
// mix with the last band absorbing rounding slack.
std::vector<std::uint64_t> class_band_sizes(std::uint32_t universe,
                                            const std::vector<double>& shares) {
  std::vector<std::uint64_t> sizes;
  double cum = 0;
  std::uint64_t prev = 0;
  for (std::size_t c = 0; c < shares.size(); ++c) {
    cum += shares[c];
    std::uint64_t end = c + 1 == shares.size()
                            ? universe
                            : static_cast<std::uint64_t>(universe * cum + 1e-9);
    if (end < prev) end = prev;
    sizes.push_back(end - prev);
    prev = end;
  }
  return sizes;
}

}  // namespace

void validate_sim_cfg(const SimCfg& cfg) {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };

  need(cfg.topo.edges >= 1, "topology.edges must be >= 1");
  need(cfg.topo.devices_per_edge >= 1, "topology.devices_per_edge must be >= 1");
  need(cfg.topo.bandwidth_bps > 0, "topology.bandwidth_bps must be > 0");
  need(cfg.topo.propagation_delay_s >= 0, "topology.propagation_delay_s must be >= 0");

  Ccbf probe(cfg.ccbf);  // throws with a ccbf.* message on bad parameters
  (void)probe;

  const auto& w = cfg.workload;
  need(w.class_shares.size() >= 2, "workload.class_shares needs at least 2 classes");
  double sum = 0;
  for (double s : w.class_shares) {
    need(s > 0, "workload.class_shares entries must be > 0");
    sum += s;
  }
  need(std::abs(sum - 1.0) < 1e-6, "workload.class_shares must sum to 1");
  need(w.universe_items >= w.class_shares.size(), "workload.universe_items too small");
  for (auto sz : class_band_sizes(w.universe_items, w.class_shares))
    need(sz >= 1, "workload.universe_items leaves an empty class band");
  if (w.learning_total > 0)
    need(w.device_rate_per_s > 0, "workload.device_rate_per_s must be > 0");
  need(w.class_skew_boost >= 1.0, "workload.class_skew_boost must be >= 1");
  need(w.uniform_share >= 0 && w.uniform_share <= 1, "workload.uniform_share must be in [0,1]");
  need(w.learning_bytes > 0, "workload.learning_bytes must be > 0");
  need(w.bg_request_rate_per_device >= 0, "workload.bg_request_rate_per_device must be >= 0");
  if (w.bg_request_rate_per_device > 0) {
    need(w.bg_universe >= 1, "workload.bg_universe must be >= 1");
    need(w.bg_hot_count <= w.bg_universe, "workload.bg_hot_count exceeds bg_universe");
    need(w.bg_hot_share >= 0 && w.bg_hot_share <= 1, "workload.bg_hot_share must be in [0,1]");
    need(w.background_bytes > 0, "workload.background_bytes must be > 0");
  }

  need(cfg.learning.epsilon > 0, "learning.epsilon must be > 0");
  need(cfg.learning.window >= 1, "learning.window must be >= 1");
  need(cfg.learning.stall_epsilon > 0, "learning.stall_epsilon must be > 0");
  need(cfg.learning.explain_k >= 1, "learning.explain_k must be >= 1");
  need(cfg.learning.ceil_acc > 0 && cfg.learning.ceil_acc <= 1,
       "learning.ceil_acc must be in (0,1]");
  need(cfg.learning.val_draws >= 1, "learning.val_draws must be >= 1");

  need(cfg.scheme.record_exchange_period_s > 0, "scheme.record_exchange_period_s must be > 0");
  need(cfg.scheme.p_cache_period_s > 0, "scheme.p_cache_period_s must be > 0");
  need(cfg.scheme.request_budget >= 1, "scheme.request_budget must be >= 1");
  need(cfg.scheme.p_cache_budget >= 1, "scheme.p_cache_budget must be >= 1");
  need(cfg.scheme.initial_range_hops >= 1, "scheme.initial_range_hops must be >= 1");
  need(cfg.scheme.max_range_hops >= 0, "scheme.max_range_hops must be >= 0");

  need(cfg.cache_capacity >= 1, "sim.cache_capacity must be >= 1");
  need(cfg.snapshot_period_s > 0, "sim.snapshot_period_s must be > 0");
  need(cfg.horizon_s > 0, "sim.horizon_s must be > 0");
  need(cfg.train_period_s > 0, "sim.train_period_s must be > 0");
  need(cfg.model_upload_bytes > 0, "sim.model_upload_bytes must be > 0");
}

namespace {

constexpr std::uint64_t kBgRequestBytes = 64;

struct Event {
  double at = 0;
  std::uint64_t seq = 0;
  std::function<void()> fn;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.at != b.at) return a.at > b.at;
    return a.seq > b.seq;
  }
};

struct EdgeState {
  int node_id = 0;
  std::unique_ptr<EdgeCache> cache;
  std::unique_ptr<CoverageLearner> model;
  std::deque<double> acc_hist;
  std::uint64_t new_items_round = 0;
  int range = 1;
  double latch_time = -1;
  int rr_cursor = 0;
};

struct CentralState {
  std::unique_ptr<CoverageLearner> model;
  std::unordered_set<std::string> keys;
  std::vector<TrainSample> samples;
  std::deque<double> acc_hist;
  double latch_time = -1;
};

class Sim {
 public:
  Sim(const SimCfg& cfg, Scheme scheme, std::uint64_t seed)
      : cfg_(cfg),
        scheme_(scheme),
        topo_(Topology::build(cfg.topo)),
        wseed_(derive_seed(seed, "workload")) {
    bands_ = class_band_sizes(cfg_.workload.universe_items, cfg_.workload.class_shares);
    band_start_.assign(bands_.size() + 1, 0);
    for (std::size_t c = 0; c < bands_.size(); ++c)
      band_start_[c + 1] = band_start_[c] + bands_[c];

    const auto& shares = cfg_.workload.class_shares;
    global_cdf_.assign(shares.size(), 0.0);
    double acc = 0;
    for (std::size_t c = 0; c < shares.size(); ++c) {
      acc += shares[c];
      global_cdf_[c] = acc;
    }
    std::size_t E = topo_.edge_ids().size();
    edge_cdf_.assign(E, {});
    for (std::size_t i = 0; i < E; ++i) {
      std::vector<double> w(shares.size());
      double tot = 0;
      for (std::size_t c = 0; c < shares.size(); ++c) {
        w[c] = shares[c] * (c % E == i ? cfg_.workload.class_skew_boost : 1.0);
        tot += w[c];
      }
      edge_cdf_[i].assign(shares.size(), 0.0);
      double run = 0;
      for (std::size_t c = 0; c < shares.size(); ++c) {
        run += w[c] / tot;
        edge_cdf_[i][c] = run;
      }
    }

    max_range_ = cfg_.scheme.max_range_hops > 0 ? cfg_.scheme.max_range_hops
                                                : topo_.diameter();

    Rng er(derive_seed(wseed_, "eval"));
    eval_.reserve(cfg_.learning.val_draws);
    for (int i = 0; i < cfg_.learning.val_draws; ++i) {
      double u = er.next_double();
      int label = static_cast<int>(cfg_.workload.class_shares.size()) - 1;
      double cum = 0;
      for (std::size_t c = 0; c < cfg_.workload.class_shares.size(); ++c) {
        cum += cfg_.workload.class_shares[c];
        if (u < cum) {
          label = static_cast<int>(c);
          break;
        }
      }
      eval_.push_back({(1ULL << 40) + static_cast<std::uint64_t>(i), label});
    }

    CoverageCfg mc;
    mc.class_universe = bands_;
    mc.class_shares = cfg_.workload.class_shares;
    mc.explain_k = cfg_.learning.explain_k;
    mc.floor_acc = 1.0 / static_cast<double>(cfg_.workload.class_shares.size());
    mc.ceil_acc = cfg_.learning.ceil_acc;
    mc.shared_seed = derive_seed(wseed_, "model-shared");

    // Seed 0 means "derive from the run seed"; anything else is an explicit
    // override and must survive into every node's filter unchanged.
    CcbfParams fp = cfg_.ccbf;
    if (fp.hash_seed == 0) fp.hash_seed = derive_seed(wseed_, "filter-hash");
    if (fp.matrix_seed == 0)
      fp.matrix_seed = derive_seed(wseed_, "filter-matrix");

    if (scheme_ == Scheme::Centralized) {
      CoverageCfg cc = mc;
      cc.private_seed = hash64(1000, derive_seed(wseed_, "model-private"));
      central_.model = std::make_unique<CoverageLearner>(cc, cfg_.learning.epsilon,
                                                         cfg_.learning.window);
    }
    edges_.resize(topo_.edge_ids().size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      auto& e = edges_[i];
      e.node_id = topo_.edge_ids()[i];
      e.range = cfg_.scheme.initial_range_hops;
      if (scheme_ == Scheme::Centralized) continue;  // plain relays, no cache
      EdgeCacheCfg ec;
      ec.capacity = cfg_.cache_capacity;
      ec.params = fp;
      ec.global_dedup = scheme_ == Scheme::CCache;
      ec.keep_records = scheme_ == Scheme::CCache;
      e.cache = std::make_unique<EdgeCache>(ec);
      CoverageCfg cc = mc;
      cc.private_seed = hash64(i + 1, derive_seed(wseed_, "model-private"));
      e.model = std::make_unique<CoverageLearner>(cc, cfg_.learning.epsilon,
                                                  cfg_.learning.window);
    }

    bg_rngs_.reserve(topo_.device_ids().size());
    for (std::size_t d = 0; d < topo_.device_ids().size(); ++d)
      bg_rngs_.emplace_back(hash64(d, derive_seed(wseed_, "bg")));
  }

  RunResult run();

 private:
  void schedule(double at, std::function<void()> fn) {
    queue_.push(Event{at, seq_++, std::move(fn)});
  }
  // Transmission overhead counts backhaul traffic only: the device access hop
  // carries each item exactly once under every scheme, so it cancels in any
  // cross-scheme comparison and is left out of the tally.
  void add_overhead(std::uint64_t bytes, int hops) {
    overhead_ += bytes * static_cast<std::uint64_t>(hops);
  }
  int num_classes() const { return static_cast<int>(cfg_.workload.class_shares.size()); }
  int class_of(std::uint64_t uid) const {
    int c = 0;
    while (uid >= band_start_[c + 1]) ++c;
    return c;
  }

  void seed_events();
  void snapshot_loop();
  std::uint64_t draw_uid(Rng& rng, std::size_t device);
  void deliver_learning(int edge_idx, const DataItem& item);
  void tally_learning(AdmitOutcome out, EdgeState& e);
  void on_train_tick();
  void fire_requests(std::size_t edge_idx);
  void fire_gossip(std::size_t edge_idx);
  void fire_p_exchange(std::size_t edge_idx);
  void on_bg_request(std::size_t device_idx);
  void take_snapshot(double t);
  void finish(RunResult& out);
  bool all_converged() const;

  const SimCfg& cfg_;
  Scheme scheme_;
  Topology topo_;
  std::uint64_t wseed_;

  std::vector<std::uint64_t> bands_;
  std::vector<std::uint64_t> band_start_;
  std::vector<double> global_cdf_;
  std::vector<std::vector<double>> edge_cdf_;
  std::vector<EvalInput> eval_;
  int max_range_ = 1;

  std::vector<EdgeState> edges_;
  CentralState central_;
  std::vector<Rng> bg_rngs_;

  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  double now_ = 0;
  std::uint64_t seq_ = 0;
  bool done_ = false;
  std::uint64_t overhead_ = 0;
  double last_snap_t_ = 0;

  MetricsSeries series_;
  RunAudit audit_;
  std::vector<SnapshotDump> dumps_;
};

std::uint64_t Sim::draw_uid(Rng& rng, std::size_t device) {
  std::size_t edge = device / cfg_.topo.devices_per_edge;
  const auto& cdf = rng.next_double() < cfg_.workload.uniform_share
                        ? global_cdf_
                        : edge_cdf_[edge];
  double u = rng.next_double();
  std::size_t c = cdf.size() - 1;
  for (std::size_t k = 0; k < cdf.size(); ++k)
    if (u < cdf[k]) { c = k; break; }
  return band_start_[c] + rng.next_below(bands_[c]);
}

void Sim::seed_events() {
  const auto& w = cfg_.workload;
  const std::size_t D = topo_.device_ids().size();

  std::uint64_t quota = w.learning_total / D;
  std::uint64_t extra = w.learning_total % D;
  for (std::size_t d = 0; d < D; ++d) {
    Rng ar(hash64(d, derive_seed(wseed_, "arrive")));
    std::uint64_t count = quota + (d < extra ? 1 : 0);
    double t = 0;
    for (std::uint64_t k = 0; k < count; ++k) {
      t += ar.next_exp(w.device_rate_per_s);
      std::uint64_t uid = draw_uid(ar, d);
      int label = class_of(uid);
      schedule(t, [this, d, uid, label] {
        ++audit_.learn_pushes_sent;
        int dev_id = topo_.device_ids()[d];
        int edge_id = topo_.edge_of_device(dev_id);
        int edge_idx = edge_id - 2;
        DataItem item;
        item.key = "L" + std::to_string(uid);
        item.kind = ItemKind::Learning;
        item.label = label;
        item.payload_bytes = cfg_.workload.learning_bytes;
        item.origin = edge_idx;
        item.uid = uid;
        double at = now_ + topo_.delay(dev_id, edge_id, cfg_.workload.learning_bytes);
        schedule(at, [this, edge_idx, item] { deliver_learning(edge_idx, item); });
      });
    }
  }

  if (w.bg_request_rate_per_device > 0) {
    for (std::size_t d = 0; d < D; ++d)
      schedule(bg_rngs_[d].next_exp(w.bg_request_rate_per_device),
               [this, d] { on_bg_request(d); });
  }

  schedule(cfg_.train_period_s, [this] { on_train_tick(); });
  schedule(cfg_.snapshot_period_s, [this] { snapshot_loop(); });

  if (scheme_ == Scheme::CCache)
    for (std::size_t i = 0; i < edges_.size(); ++i)
      schedule(cfg_.scheme.record_exchange_period_s, [this, i] { fire_gossip(i); });
  if (scheme_ == Scheme::PCache)
    for (std::size_t i = 0; i < edges_.size(); ++i)
      schedule(cfg_.scheme.p_cache_period_s, [this, i] { fire_p_exchange(i); });
}

void Sim::snapshot_loop() {
  take_snapshot(now_);
  schedule(now_ + cfg_.snapshot_period_s, [this] { snapshot_loop(); });
}

void Sim::deliver_learning(int edge_idx, const DataItem& item) {
  if (scheme_ == Scheme::Centralized) {
    int edge_id = topo_.edge_ids()[edge_idx];
    add_overhead(cfg_.workload.learning_bytes, topo_.hops(edge_id, topo_.data_center()));
    double at = now_ + topo_.delay(edge_id, topo_.data_center(), cfg_.workload.learning_bytes);
    schedule(at, [this, item] {
      ++audit_.learn_pushes_delivered;
      if (central_.keys.insert(item.key).second) {
        central_.samples.push_back({item.uid, item.label});
        ++audit_.admitted_new;
      } else {
        ++audit_.repeats;
      }
    });
    return;
  }
  ++audit_.learn_pushes_delivered;
  auto& e = edges_[edge_idx];
  tally_learning(e.cache->admit(item), e);
}

void Sim::tally_learning(AdmitOutcome out, EdgeState& e) {
  switch (out) {
    case AdmitOutcome::CachedNew:
      ++audit_.admitted_new;
      ++e.new_items_round;
      break;
    case AdmitOutcome::EvictedThenCached:
      ++audit_.admitted_evicting;
      ++e.new_items_round;
      break;
    case AdmitOutcome::AlreadyCached:
      ++audit_.repeats;
      break;
    case AdmitOutcome::SkippedDuplicateElsewhere:
      ++audit_.dedup_skips;
      break;
    default:
      break;  // background outcomes cannot arise from a learning admit
  }
}

bool Sim::all_converged() const {
  if (scheme_ == Scheme::Centralized) return central_.model->converged();
  for (const auto& e : edges_)
    if (!e.model->converged()) return false;
  return true;
}

void Sim::on_train_tick() {
  auto train_one = [this](CoverageLearner& m, std::deque<double>& hist,
                          const std::vector<TrainSample>& items, double& latch_time) {
    m.sync_to(items);
    if (m.distinct_items_seen() == 0) return;
    m.record_round();
    hist.push_back(m.validation_accuracy());
    while (hist.size() > static_cast<std::size_t>(cfg_.learning.window) + 1)
      hist.pop_front();
    if (m.converged() && latch_time < 0) latch_time = now_;
  };

  if (scheme_ == Scheme::Centralized) {
    if (!central_.model->converged())
      train_one(*central_.model, central_.acc_hist, central_.samples,
                central_.latch_time);
  } else {
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      auto& e = edges_[i];
      if (e.model->converged()) {
        e.new_items_round = 0;
        continue;
      }
      std::vector<TrainSample> items;
      items.reserve(e.cache->store().learning_count());
      for (const auto& it : e.cache->store().learning_items())
        items.push_back({it.uid, it.label});
      train_one(*e.model, e.acc_hist, items, e.latch_time);

      if (scheme_ == Scheme::CCache && !e.model->converged() &&
          e.model->distinct_items_seen() > 0) {
        bool zero_new = e.new_items_round == 0;
        bool plateau =
            e.acc_hist.size() == static_cast<std::size_t>(cfg_.learning.window) + 1 &&
            e.acc_hist.back() - e.acc_hist.front() < cfg_.learning.stall_epsilon;
        if (zero_new) e.range = std::min(e.range + 1, max_range_);
        if (zero_new || plateau) fire_requests(i);
      }
      e.new_items_round = 0;
    }
  }

  if (all_converged()) {
    done_ = true;
    return;
  }
  schedule(now_ + cfg_.train_period_s, [this] { on_train_tick(); });
}

void Sim::fire_requests(std::size_t edge_idx) {
  auto& e = edges_[edge_idx];
  auto req = std::make_shared<RequestVector>(e.cache->build_request(cfg_.scheme.request_budget));
  std::uint64_t req_bytes = req->bits.byte_size() + 8;
  for (int j : topo_.edge_peers_within(static_cast<int>(edge_idx), e.range)) {
    int peer_id = edges_[j].node_id;
    add_overhead(req_bytes, topo_.hops(e.node_id, peer_id));
    double at = now_ + topo_.delay(e.node_id, peer_id, req_bytes);
    schedule(at, [this, edge_idx, j, req] {
      auto items = std::make_shared<std::vector<DataItem>>(
          edges_[j].cache->answer_request(*req));
      if (items->empty()) return;
      audit_.response_items_sent += items->size();
      std::uint64_t bytes =
          items->size() * static_cast<std::uint64_t>(cfg_.workload.learning_bytes);
      int from = edges_[j].node_id;
      int to = edges_[edge_idx].node_id;
      add_overhead(bytes, topo_.hops(from, to));
      double back = now_ + topo_.delay(from, to, bytes);
      schedule(back, [this, edge_idx, items] {
        std::size_t kept = edges_[edge_idx].cache->integrate_response(*items, true);
        edges_[edge_idx].new_items_round += kept;
        audit_.response_items_kept += kept;
      });
    });
  }
}

void Sim::fire_gossip(std::size_t edge_idx) {
  auto& e = edges_[edge_idx];
  auto rec = std::make_shared<std::vector<std::uint8_t>>(e.cache->local_record().serialize());
  for (int j : topo_.edge_peers_within(static_cast<int>(edge_idx), e.range)) {
    int peer_id = edges_[j].node_id;
    add_overhead(rec->size(), topo_.hops(e.node_id, peer_id));
    double at = now_ + topo_.delay(e.node_id, peer_id, rec->size());
    schedule(at, [this, edge_idx, j, rec] {
      ++audit_.record_messages;
      auto rc = edges_[j].cache->receive_record(static_cast<int>(edge_idx), rec->data(),
                                                rec->size());
      if (rc != RecordOutcome::Applied) ++audit_.record_rejects;
    });
  }
  schedule(now_ + cfg_.scheme.record_exchange_period_s,
           [this, edge_idx] { fire_gossip(edge_idx); });
}

void Sim::fire_p_exchange(std::size_t edge_idx) {
  auto& e = edges_[edge_idx];
  std::vector<int> others;
  for (std::size_t j = 0; j < edges_.size(); ++j)
    if (j != edge_idx) others.push_back(static_cast<int>(j));
  if (!others.empty()) {
    int j = others[static_cast<std::size_t>(e.rr_cursor) % others.size()];
    ++e.rr_cursor;
    auto digest = std::make_shared<std::unordered_set<std::string>>();
    for (const auto& it : e.cache->store().learning_items()) digest->insert(it.key);
    std::uint64_t req_bytes = 8 * digest->size();
    int peer_id = edges_[j].node_id;
    add_overhead(req_bytes, topo_.hops(e.node_id, peer_id));
    double at = now_ + topo_.delay(e.node_id, peer_id, req_bytes);
    schedule(at, [this, edge_idx, j, digest] {
      std::vector<DataItem> picked;
      for (const auto& it : edges_[j].cache->store().learning_items()) {
        if (digest->count(it.key)) continue;
        picked.push_back(it);
        if (picked.size() >= cfg_.scheme.p_cache_budget) break;
      }
      if (picked.empty()) return;
      audit_.response_items_sent += picked.size();
      auto items = std::make_shared<std::vector<DataItem>>(std::move(picked));
      std::uint64_t bytes =
          items->size() * static_cast<std::uint64_t>(cfg_.workload.learning_bytes);
      int from = edges_[j].node_id;
      int to = edges_[edge_idx].node_id;
      add_overhead(bytes, topo_.hops(from, to));
      double back = now_ + topo_.delay(from, to, bytes);
      schedule(back, [this, edge_idx, items] {
        std::size_t kept = edges_[edge_idx].cache->integrate_response(*items, true);
        edges_[edge_idx].new_items_round += kept;
        audit_.response_items_kept += kept;
      });
    });
  }
  schedule(now_ + cfg_.scheme.p_cache_period_s,
           [this, edge_idx] { fire_p_exchange(edge_idx); });
}

void Sim::on_bg_request(std::size_t device_idx) {
  const auto& w = cfg_.workload;
  auto& rng = bg_rngs_[device_idx];
  std::uint64_t id;
  std::uint64_t cold = w.bg_universe - w.bg_hot_count;
  if (w.bg_hot_count > 0 && (cold == 0 || rng.next_double() < w.bg_hot_share))
    id = rng.next_below(w.bg_hot_count);
  else
    id = w.bg_hot_count + rng.next_below(cold);
  std::string key = "B" + std::to_string(id);

  ++audit_.bg_requests;
  int dev_id = topo_.device_ids()[device_idx];
  int edge_id = topo_.edge_of_device(dev_id);
  int edge_idx = edge_id - 2;
  bool cached_scheme = scheme_ != Scheme::Centralized;

  if (cached_scheme && edges_[edge_idx].cache->store().contains(key)) {
    // Served from the edge over the access hop alone: no backhaul cost.
    ++audit_.bg_hits;
    edges_[edge_idx].cache->store().touch(key);
  } else {
    int h = topo_.hops(edge_id, topo_.data_center());
    add_overhead(kBgRequestBytes, h);
    add_overhead(w.background_bytes, h);
    if (cached_scheme) {
      DataItem item;
      item.key = key;
      item.kind = ItemKind::Background;
      item.payload_bytes = w.background_bytes;
      item.origin = edge_idx;
      auto out = edges_[edge_idx].cache->admit(item);
      if (out == AdmitOutcome::CachedBackground) ++audit_.bg_cached;
      if (out == AdmitOutcome::SkippedFull) ++audit_.bg_refused;
    }
  }
  schedule(now_ + rng.next_exp(w.bg_request_rate_per_device),
           [this, device_idx] { on_bg_request(device_idx); });
}

void Sim::take_snapshot(double t) {
  if (t <= last_snap_t_) return;
  Snapshot s;
  s.t = t;
  s.overhead_bytes = overhead_;
  if (scheme_ != Scheme::Centralized) {
    std::unordered_set<std::string_view> distinct;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const auto& st = edges_[i].cache->store();
      s.nodes.push_back({static_cast<int>(i), st.learning_count(), st.size()});
      s.n_gc += st.size();
      s.n_b += st.background_count();
      for (const auto& it : st.learning_items()) distinct.insert(it.key);
    }
    s.n_g = distinct.size();
  } else {
    for (std::size_t i = 0; i < edges_.size(); ++i)
      s.nodes.push_back({static_cast<int>(i), 0, 0});
  }
  series_.add_snapshot(s);
  last_snap_t_ = t;

  if (cfg_.debug_dump) {
    SnapshotDump d;
    d.t = t;
    d.per_edge.resize(edges_.size());
    if (scheme_ != Scheme::Centralized) {
      for (std::size_t i = 0; i < edges_.size(); ++i) {
        const auto& st = edges_[i].cache->store();
        for (const auto& it : st.learning_items())
          d.per_edge[i].push_back({it.key, it.kind});
        for (const auto& it : st.background_items())
          d.per_edge[i].push_back({it.key, it.kind});
      }
    }
    dumps_.push_back(std::move(d));
  }
}

void Sim::finish(RunResult& out) {
  // The evaluation collects the trained sub-models over the backhaul.
  if (scheme_ != Scheme::Centralized)
    for (const auto& e : edges_)
      add_overhead(cfg_.model_upload_bytes, topo_.hops(e.node_id, topo_.data_center()));

  take_snapshot(now_);

  std::vector<const SubModel*> models;
  std::vector<double> weights;
  if (scheme_ == Scheme::Centralized) {
    models.push_back(central_.model.get());
    weights.push_back(1.0);
  } else {
    for (const auto& e : edges_) models.push_back(e.model.get());
    CovMatrix cov = estimate_covariance(models, eval_,
                                        [](const EvalInput&) { return 1.0; });
    weights = optimal_weights(cov);
  }

  const int classes = num_classes();
  const int positive_below = classes / 2;
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::vector<double> score(classes);
  for (const auto& x : eval_) {
    int pred;
    if (models.size() == 1) {
      pred = models[0]->predict_label(x);
    } else {
      std::fill(score.begin(), score.end(), 0.0);
      for (std::size_t i = 0; i < models.size(); ++i) {
        int c = models[i]->predict_label(x);
        if (c >= 0 && c < classes) score[c] += weights[i];
      }
      pred = 0;
      for (int c = 1; c < classes; ++c)
        if (score[c] > score[pred]) pred = c;  // ties keep the lowest class
    }
    bool predicted_pos = pred < positive_below;
    bool actual_pos = x.label < positive_below;
    if (predicted_pos && actual_pos) ++tp;
    else if (predicted_pos && !actual_pos) ++fp;
    else if (!predicted_pos && actual_pos) ++fn;
    else ++tn;
  }

  double latency;
  if (done_) {
    latency = 0;
    if (scheme_ == Scheme::Centralized) {
      latency = central_.latch_time;
    } else {
      for (const auto& e : edges_) latency = std::max(latency, e.latch_time);
    }
  } else {
    latency = cfg_.horizon_s;
  }

  series_.terminal() = {to_string(scheme_), latency, accuracy(tp, fp, fn, tn),
                        tp, fp, fn, tn};

  out.series = std::move(series_);
  out.converged = done_;
  out.latency_s = latency;
  out.end_time_s = now_;
  out.total_overhead_bytes = overhead_;
  out.audit = audit_;
  out.dumps = std::move(dumps_);
}

RunResult Sim::run() {
  RunResult out;
  const auto& w = cfg_.workload;
  bool has_work = w.learning_total > 0 ||
                  (w.bg_request_rate_per_device > 0 && !topo_.device_ids().empty());
  if (!has_work) {
    // Nothing will ever happen; report an empty run rather than spinning
    // train ticks until the horizon.
    out.converged = true;
    out.end_time_s = cfg_.horizon_s;
    out.series.terminal() = {to_string(scheme_), 0, 0, 0, 0, 0, 0};
    return out;
  }

  seed_events();

  while (!queue_.empty() && !done_) {
    const Event& top = queue_.top();
    if (top.at > cfg_.horizon_s) break;
    now_ = top.at;
    auto fn = std::move(const_cast<Event&>(top).fn);
    queue_.pop();
    fn();
  }
  if (!done_) now_ = cfg_.horizon_s;

  finish(out);
  return out;
}

}  // namespace

RunResult run_scheme(const SimCfg& cfg, Scheme scheme, std::uint64_t seed) {
  validate_sim_cfg(cfg);
  Sim sim(cfg, scheme, seed);
  return sim.run();
}

}  // namespace eel
