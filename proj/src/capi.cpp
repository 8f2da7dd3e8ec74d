#include "eelcache.h"

#include <cstdint>
#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ccbf.hpp"
#include "config.hpp"
#include "metrics.hpp"
#include "simnet.hpp"

struct eel_config {
  eel::SimCfg cfg;
};

struct eel_ccbf {
  eel::Ccbf filter;
};

namespace {

thread_local std::string t_error = "no error";

eel_status set_error(eel_status s, std::string msg) {
  t_error = std::move(msg);
  return s;
}

// Every entry point funnels through here so an exception can never cross the
// C boundary.
template <typename Fn>
eel_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return set_error(EEL_ERR_INVALID_ARG, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(EEL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(EEL_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(EEL_ERR_INTERNAL, "unknown failure");
  }
}

eel_status need_arg(bool ok, const char* what) {
  return ok ? EEL_OK : set_error(EEL_ERR_INVALID_ARG, what);
}

}  // namespace

extern "C" {

const char* eel_version(void) { return "0.1.0"; }

const char* eel_last_error(void) { return t_error.c_str(); }

eel_status eel_config_default(eel_config** out) {
  if (eel_status s = need_arg(out != nullptr, "out is NULL")) return s;
  return guarded([&] {
    *out = new eel_config{};
    return EEL_OK;
  });
}

eel_status eel_config_from_json(const char* json_text, eel_config** out) {
  if (eel_status s = need_arg(json_text && out, "json_text or out is NULL"))
    return s;
  return guarded([&] {
    *out = new eel_config{eel::parse_sim_cfg(json_text)};
    return EEL_OK;
  });
}

eel_status eel_config_from_file(const char* path, eel_config** out) {
  if (eel_status s = need_arg(path && out, "path or out is NULL")) return s;
  return guarded([&] {
    std::ifstream probe(path, std::ios::binary);
    if (!probe)
      return set_error(EEL_ERR_IO, std::string("cannot open config file: ") + path);
    *out = new eel_config{eel::load_sim_cfg(path)};
    return EEL_OK;
  });
}

eel_status eel_config_set_seed(eel_config* cfg, uint64_t master_seed) {
  if (eel_status s = need_arg(cfg != nullptr, "cfg is NULL")) return s;
  cfg->cfg.master_seed = master_seed;
  return EEL_OK;
}

void eel_config_free(eel_config* cfg) { delete cfg; }

eel_status eel_run_scheme(const eel_config* cfg, const char* scheme,
                          const char* csv_path, eel_run_summary* out) {
  if (eel_status s = need_arg(cfg && scheme, "cfg or scheme is NULL")) return s;
  return guarded([&]() -> eel_status {
    eel::Scheme sch;
    if (!eel::parse_scheme(scheme, sch))
      return set_error(EEL_ERR_INVALID_ARG,
                       std::string("unknown scheme: ") + scheme +
                           " (expected ccache, pcache, or centralized)");
    eel::RunResult r =
        eel::run_scheme(cfg->cfg, sch, cfg->cfg.master_seed);
    if (csv_path) {
      std::ofstream probe(csv_path, std::ios::binary);
      if (!probe)
        return set_error(EEL_ERR_IO,
                         std::string("cannot write CSV: ") + csv_path);
      probe.close();
      eel::emit_csv(r.series, csv_path);
    }
    if (out) {
      *out = {};
      out->converged = r.converged ? 1 : 0;
      out->latency_s = r.latency_s;
      out->end_time_s = r.end_time_s;
      out->accuracy = r.series.terminal().accuracy;
      if (!r.series.snapshots().empty()) {
        const auto& last = r.series.snapshots().back();
        out->glr_final = eel::glr_hit(last.n_g, last.n_gc);
        out->r_final = eel::r_hit(last.n_b, last.n_gc);
      }
      out->overhead_bytes = r.total_overhead_bytes;
    }
    if (!r.converged)
      return set_error(EEL_ERR_DID_NOT_CONVERGE,
                       std::string(scheme) +
                           " hit the horizon before its stop rule");
    return EEL_OK;
  });
}

eel_status eel_ccbf_create(uint32_t m, uint8_t g, uint8_t k, uint32_t n,
                           uint64_t hash_seed, uint64_t matrix_seed,
                           eel_ccbf** out) {
  if (eel_status s = need_arg(out != nullptr, "out is NULL")) return s;
  return guarded([&] {
    eel::CcbfParams p;
    p.array_bits = m;
    p.num_arrays = g;
    p.num_hashes = k;
    p.capacity = n;
    p.hash_seed = hash_seed;
    p.matrix_seed = matrix_seed;
    *out = new eel_ccbf{eel::Ccbf(p)};
    return EEL_OK;
  });
}

eel_status eel_ccbf_load(const char* path, eel_ccbf** out) {
  if (eel_status s = need_arg(path && out, "path or out is NULL")) return s;
  return guarded([&]() -> eel_status {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      return set_error(EEL_ERR_IO, std::string("cannot open filter file: ") + path);
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    auto parsed = eel::Ccbf::deserialize(bytes.data(), bytes.size());
    if (auto* err = std::get_if<eel::WireError>(&parsed))
      return set_error(EEL_ERR_MALFORMED,
                       std::string("malformed filter file ") + path + ": " +
                           eel::to_string(*err));
    *out = new eel_ccbf{std::get<eel::Ccbf>(std::move(parsed))};
    return EEL_OK;
  });
}

eel_status eel_ccbf_save(const eel_ccbf* f, const char* path) {
  if (eel_status s = need_arg(f && path, "filter or path is NULL")) return s;
  return guarded([&]() -> eel_status {
    auto bytes = f->filter.serialize();
    std::ofstream outf(path, std::ios::binary | std::ios::trunc);
    outf.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    if (!outf)
      return set_error(EEL_ERR_IO, std::string("cannot write filter file: ") + path);
    return EEL_OK;
  });
}

eel_status eel_ccbf_insert(eel_ccbf* f, const char* key, int* outcome) {
  if (eel_status s = need_arg(f && key, "filter or key is NULL")) return s;
  return guarded([&]() -> eel_status {
    eel::InsertOutcome o = f->filter.insert(key);
    if (outcome) *outcome = static_cast<int>(o);
    switch (o) {
      case eel::InsertOutcome::Inserted:
      case eel::InsertOutcome::Duplicate:
        return EEL_OK;
      case eel::InsertOutcome::CapacityExceeded:
      case eel::InsertOutcome::PositionOverflow:
        return set_error(EEL_ERR_INVALID_ARG, eel::to_string(o));
    }
    return set_error(EEL_ERR_INTERNAL, "unreachable insert outcome");
  });
}

eel_status eel_ccbf_query(const eel_ccbf* f, const char* key, int* present) {
  if (eel_status s = need_arg(f && key && present, "filter, key, or present is NULL"))
    return s;
  return guarded([&] {
    *present = f->filter.contains(key) ? 1 : 0;
    return EEL_OK;
  });
}

eel_status eel_ccbf_combine(const eel_ccbf* a, const eel_ccbf* b,
                            eel_ccbf** out) {
  if (eel_status s = need_arg(a && b && out, "filter or out is NULL")) return s;
  return guarded([&]() -> eel_status {
    auto merged = eel::Ccbf::combine(a->filter, b->filter);
    if (auto* err = std::get_if<eel::CombineError>(&merged)) {
      if (*err == eel::CombineError::ParamMismatch) {
        const eel::CcbfParams& pa = a->filter.params();
        const eel::CcbfParams& pb = b->filter.params();
        const char* field = pa.array_bits != pb.array_bits ? "m"
                            : pa.num_arrays != pb.num_arrays ? "g"
                            : pa.num_hashes != pb.num_hashes ? "k"
                            : pa.capacity != pb.capacity     ? "n"
                            : pa.hash_seed != pb.hash_seed   ? "hash_seed"
                                                             : "matrix_seed";
        return set_error(EEL_ERR_PARAM_MISMATCH,
                         std::string("filters disagree on ") + field);
      }
      return set_error(EEL_ERR_INVALID_ARG,
                       "combined item count exceeds filter capacity");
    }
    *out = new eel_ccbf{std::get<eel::Ccbf>(std::move(merged))};
    return EEL_OK;
  });
}

eel_status eel_ccbf_inspect(const eel_ccbf* f, char** json_out) {
  if (eel_status s = need_arg(f && json_out, "filter or json_out is NULL"))
    return s;
  return guarded([&] {
    const eel::Ccbf& c = f->filter;
    const eel::CcbfParams& p = c.params();
    std::vector<std::uint64_t> histogram(p.num_arrays + 1u, 0);
    std::uint64_t occupied = 0;
    for (std::uint32_t pos = 0; pos < p.array_bits; ++pos) {
      std::uint8_t cnt = c.column_count(pos);
      ++histogram[cnt];
      if (cnt > 0) ++occupied;
    }
    std::ostringstream os;
    os << "{\"m\":" << p.array_bits << ",\"g\":" << int(p.num_arrays)
       << ",\"k\":" << int(p.num_hashes) << ",\"n\":" << p.capacity
       << ",\"hash_seed\":" << p.hash_seed
       << ",\"matrix_seed\":" << p.matrix_seed
       << ",\"item_count\":" << c.item_count() << ",\"fill_ratio\":"
       << (p.array_bits ? double(occupied) / double(p.array_bits) : 0.0)
       << ",\"column_counts\":[";
    for (std::size_t i = 0; i < histogram.size(); ++i)
      os << (i ? "," : "") << histogram[i];
    os << "]}";
    std::string s = os.str();
    char* buf = new char[s.size() + 1];
    std::copy(s.begin(), s.end(), buf);
    buf[s.size()] = '\0';
    *json_out = buf;
    return EEL_OK;
  });
}

void eel_ccbf_free(eel_ccbf* f) { delete f; }

void eel_string_free(char* s) { delete[] s; }

}  // extern "C"
