#include "metrics.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>

namespace eel {

namespace {

double checked_ratio(std::uint64_t num, std::uint64_t den, const char* what) {
  if (num > den) throw std::invalid_argument(std::string(what) + ": numerator exceeds denominator");
  if (den == 0) return 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

void append_f6(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  out += buf;
}

void append_u64(std::string& out, std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%" PRIu64, v);
  out += buf;
}

}  // namespace

double llr_hit(std::uint64_t n_l, std::uint64_t n_c) {
  return checked_ratio(n_l, n_c, "llr_hit");
}

double glr_hit(std::uint64_t n_g, std::uint64_t n_gc) {
  return checked_ratio(n_g, n_gc, "glr_hit");
}

double r_hit(std::uint64_t n_b, std::uint64_t n_gc) {
  return checked_ratio(n_b, n_gc, "r_hit");
}

double accuracy(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  std::uint64_t total = tp + fp + fn + tn;
  if (total == 0) throw std::invalid_argument("accuracy: empty confusion counts");
  return static_cast<double>(tp + tn) / static_cast<double>(total);
}

void MetricsSeries::add_snapshot(Snapshot s) {
  if (!snapshots_.empty()) {
    const auto& prev = snapshots_.back();
    if (s.t <= prev.t) throw std::invalid_argument("snapshot time not increasing");
    if (s.overhead_bytes < prev.overhead_bytes)
      throw std::invalid_argument("overhead_bytes decreased");
  }
  for (const auto& n : s.nodes)
    if (n.n_l > n.n_c) throw std::invalid_argument("node n_l exceeds n_c");
  if (s.n_g + s.n_b > s.n_gc)
    throw std::invalid_argument("n_g + n_b exceeds n_gc");
  snapshots_.push_back(std::move(s));
}

std::string to_csv(const MetricsSeries& series) {
  std::string out =
      "t,node,n_l,n_c,llr_hit,n_g,n_gc,glr_hit,n_b,r_hit,overhead_bytes\n";
  for (const auto& s : series.snapshots()) {
    auto global_cols = [&](std::string& row) {
      append_u64(row, s.n_g);
      row += ',';
      append_u64(row, s.n_gc);
      row += ',';
      append_f6(row, glr_hit(s.n_g, s.n_gc));
      row += ',';
      append_u64(row, s.n_b);
      row += ',';
      append_f6(row, r_hit(s.n_b, s.n_gc));
      row += ',';
      append_u64(row, s.overhead_bytes);
      row += '\n';
    };

    std::uint64_t sum_l = 0, sum_c = 0;
    for (const auto& n : s.nodes) {
      sum_l += n.n_l;
      sum_c += n.n_c;
      append_f6(out, s.t);
      out += ',';
      append_u64(out, static_cast<std::uint64_t>(n.node));
      out += ',';
      append_u64(out, n.n_l);
      out += ',';
      append_u64(out, n.n_c);
      out += ',';
      append_f6(out, llr_hit(n.n_l, n.n_c));
      out += ',';
      global_cols(out);
    }
    append_f6(out, s.t);
    out += ",GLOBAL,";
    append_u64(out, sum_l);
    out += ',';
    append_u64(out, sum_c);
    out += ',';
    append_f6(out, llr_hit(sum_l, sum_c));
    out += ',';
    global_cols(out);
  }

  const auto& term = series.terminal();
  out += "# terminal,";
  out += term.scheme;
  out += ',';
  append_f6(out, term.latency_s);
  out += ',';
  append_f6(out, term.accuracy);
  out += ',';
  append_u64(out, term.tp);
  out += ',';
  append_u64(out, term.fp);
  out += ',';
  append_u64(out, term.fn);
  out += ',';
  append_u64(out, term.tn);
  out += '\n';
  return out;
}

void emit_csv(const MetricsSeries& series, const std::string& path) {
  std::string body = to_csv(series);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("metrics: cannot open " + path);
  std::size_t n = std::fwrite(body.data(), 1, body.size(), f);
  int close_rc = std::fclose(f);
  if (n != body.size() || close_rc != 0)
    throw std::runtime_error("metrics: short write to " + path);
}

}  // namespace eel
