#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bits.hpp"
#include "ccbf.hpp"

namespace eel {

enum class ItemKind { Learning, Background };

struct DataItem {
  std::string key;
  ItemKind kind = ItemKind::Learning;
  int label = 0;                  // learning items: class
  std::uint32_t payload_bytes = 1024;
  int origin = -1;                // generating node id
  std::uint64_t uid = 0;          // learning items: workload universe id
};

// Bounded store with recency tracking per kind. Eviction prefers the
// least-recently-used Background item; Learning is evicted only when no
// Background remains.
class CacheStore {
 public:
  explicit CacheStore(std::size_t capacity);

  bool contains(const std::string& key) const { return index_.count(key) != 0; }
  const DataItem* peek(const std::string& key) const;
  void touch(const std::string& key);

  // Inserts a key not already present, evicting if at capacity.
  // Returns the evicted item, if any.
  std::optional<DataItem> put(const DataItem& item);
  bool erase(const std::string& key);

  std::size_t size() const { return learning_.size() + background_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t learning_count() const { return learning_.size(); }
  std::size_t background_count() const { return background_.size(); }

  // Front = most recently used.
  const std::list<DataItem>& learning_items() const { return learning_; }
  const std::list<DataItem>& background_items() const { return background_; }

 private:
  std::list<DataItem>& list_for(ItemKind kind) {
    return kind == ItemKind::Learning ? learning_ : background_;
  }

  std::size_t capacity_;
  std::list<DataItem> learning_;
  std::list<DataItem> background_;
  std::unordered_map<std::string, std::list<DataItem>::iterator> index_;
};

enum class AdmitOutcome {
  CachedNew,
  EvictedThenCached,
  AlreadyCached,              // exact key already held locally; recency refreshed
  SkippedDuplicateElsewhere,  // global record says a neighbor holds it
  CachedBackground,
  SkippedFull,                // background refused: no background victim left
};

enum class RecordOutcome { Applied, RejectedParams, RejectedMalformed };

struct RequestVector {
  BitArray bits;
  std::uint32_t budget = 0;
};

struct EdgeCacheCfg {
  std::size_t capacity = 2000;
  CcbfParams params;
  bool global_dedup = true;   // admission consults the folded global record
  bool keep_records = true;   // maintain the local filter at all
};

// One node's cache plus its record state: the local filter over cached
// learning keys, the last filter received per neighbor interface, and the
// global fold used for duplicate-aware admission.
class EdgeCache {
 public:
  explicit EdgeCache(const EdgeCacheCfg& cfg);

  AdmitOutcome admit(const DataItem& item);
  // Admit an item that arrived because this node asked for it. Deduplicates
  // against the local store only: requested data is in some neighbor record
  // by construction, so the global gate would reject every response.
  AdmitOutcome admit_requested(const DataItem& item);

  void record_local(const DataItem& item);
  RecordOutcome receive_record(int interface_id, const std::uint8_t* data, std::size_t len);

  RequestVector build_request(std::uint32_t budget) const;
  std::vector<DataItem> answer_request(const RequestVector& req) const;
  std::size_t integrate_response(const std::vector<DataItem>& items, bool solicited);

  const CacheStore& store() const { return store_; }
  CacheStore& store() { return store_; }
  const Ccbf& local_record() const { return local_; }
  const Ccbf& global_record() const { return global_; }
  bool fold_saturated() const { return saturated_; }
  std::size_t record_warnings() const { return record_warnings_; }
  std::size_t interfaces() const { return neighbor_.size(); }

 private:
  AdmitOutcome admit_learning(const DataItem& item, bool use_global);
  void on_evicted(const DataItem& item);
  void refold();

  EdgeCacheCfg cfg_;
  CacheStore store_;
  Ccbf local_;
  std::map<int, Ccbf> neighbor_;  // folded in ascending interface order
  Ccbf global_;
  bool saturated_ = false;
  std::size_t record_warnings_ = 0;
};

}  // namespace eel
