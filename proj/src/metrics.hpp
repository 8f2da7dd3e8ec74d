#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eel {

// Per-node cache composition at one sample time. n_l counts learning items,
// n_c counts everything cached, so n_l <= n_c always.
struct NodeCounts {
  int node = 0;
  std::uint64_t n_l = 0;
  std::uint64_t n_c = 0;
};

struct Snapshot {
  double t = 0;
  std::vector<NodeCounts> nodes;
  std::uint64_t n_g = 0;    // distinct learning items held anywhere
  std::uint64_t n_gc = 0;   // total cached items summed over nodes
  std::uint64_t n_b = 0;    // background items summed over nodes
  std::uint64_t overhead_bytes = 0;  // cumulative payload bytes x hops
};

struct Terminal {
  std::string scheme;
  double latency_s = 0;
  double accuracy = 0;
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Ratios are 0 when the denominator is 0: early samples happen before
// anything is cached.
double llr_hit(std::uint64_t n_l, std::uint64_t n_c);
double glr_hit(std::uint64_t n_g, std::uint64_t n_gc);
double r_hit(std::uint64_t n_b, std::uint64_t n_gc);
double accuracy(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn);

class MetricsSeries {
 public:
  // Validates the cross-field invariants; throws std::invalid_argument on a
  // malformed snapshot so a buggy caller fails loudly, not in the output.
  void add_snapshot(Snapshot s);

  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  Terminal& terminal() { return terminal_; }
  const Terminal& terminal() const { return terminal_; }

 private:
  std::vector<Snapshot> snapshots_;
  Terminal terminal_;
};

// One row per (snapshot, node) with that node's composition, the global
// columns repeated, then a GLOBAL row whose n_l/n_c are the node sums.
// Fixed 6-decimal ratios, '\n' endings; byte-stable for golden files.
std::string to_csv(const MetricsSeries& series);
void emit_csv(const MetricsSeries& series, const std::string& path);

}  // namespace eel
