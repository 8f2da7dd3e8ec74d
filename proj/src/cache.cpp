#include "cache.hpp"

#include <algorithm>
#include <utility>
#include <variant>

namespace eel {

CacheStore::CacheStore(std::size_t capacity) : capacity_(capacity) {}

const DataItem* CacheStore::peek(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &*it->second;
}

void CacheStore::touch(const std::string& key) {
  auto it = index_.find(key);
  if (it == index_.end()) return;
  auto& lst = list_for(it->second->kind);
  lst.splice(lst.begin(), lst, it->second);
}

std::optional<DataItem> CacheStore::put(const DataItem& item) {
  std::optional<DataItem> evicted;
  if (size() >= capacity_) {
    // Background goes first; a node under pressure sheds convenience data
    // before training data.
    auto& victim_list = background_.empty() ? learning_ : background_;
    evicted = victim_list.back();
    index_.erase(evicted->key);
    victim_list.pop_back();
  }
  auto& lst = list_for(item.kind);
  lst.push_front(item);
  index_[item.key] = lst.begin();
  return evicted;
}

bool CacheStore::erase(const std::string& key) {
  auto it = index_.find(key);
  if (it == index_.end()) return false;
  list_for(it->second->kind).erase(it->second);
  index_.erase(it);
  return true;
}

EdgeCache::EdgeCache(const EdgeCacheCfg& cfg)
    : cfg_(cfg), store_(cfg.capacity), local_(cfg.params), global_(cfg.params) {}

AdmitOutcome EdgeCache::admit(const DataItem& item) {
  if (item.kind == ItemKind::Background) {
    if (store_.contains(item.key)) {
      store_.touch(item.key);
      return AdmitOutcome::AlreadyCached;
    }
    // Background never displaces learning data; it only recycles its own
    // slots once the cache fills up.
    if (store_.size() >= store_.capacity() && store_.background_count() == 0) {
      return AdmitOutcome::SkippedFull;
    }
    if (auto evicted = store_.put(item)) on_evicted(*evicted);
    return AdmitOutcome::CachedBackground;
  }
  return admit_learning(item, cfg_.global_dedup);
}

AdmitOutcome EdgeCache::admit_requested(const DataItem& item) {
  if (item.kind == ItemKind::Background) return admit(item);
  return admit_learning(item, false);
}

AdmitOutcome EdgeCache::admit_learning(const DataItem& item, bool use_global) {
  if (store_.contains(item.key)) {
    store_.touch(item.key);
    return AdmitOutcome::AlreadyCached;
  }
  if (use_global && cfg_.keep_records && global_.contains(item.key)) {
    return AdmitOutcome::SkippedDuplicateElsewhere;
  }
  bool evicted_any = false;
  if (auto evicted = store_.put(item)) {
    on_evicted(*evicted);
    evicted_any = true;
  }
  record_local(item);
  return evicted_any ? AdmitOutcome::EvictedThenCached : AdmitOutcome::CachedNew;
}

void EdgeCache::on_evicted(const DataItem& item) {
  if (item.kind != ItemKind::Learning || !cfg_.keep_records) return;
  // Counting delete keeps the local record accurate. The global fold stays
  // stale until the next neighbor refresh; admission may briefly over-skip
  // but never loses track of what this node holds.
  local_.erase(item.key);
}

void EdgeCache::record_local(const DataItem& item) {
  if (!cfg_.keep_records) return;
  auto warn = [this](InsertOutcome st) {
    if (st == InsertOutcome::CapacityExceeded || st == InsertOutcome::PositionOverflow) {
      ++record_warnings_;
    }
  };
  warn(local_.insert(item.key));
  // Incremental update; a full refold happens on the next record exchange.
  warn(global_.insert(item.key));
}

RecordOutcome EdgeCache::receive_record(int interface_id, const std::uint8_t* data,
                                        std::size_t len) {
  if (!cfg_.keep_records) return RecordOutcome::RejectedMalformed;
  auto parsed = Ccbf::deserialize(data, len);
  if (std::holds_alternative<WireError>(parsed)) return RecordOutcome::RejectedMalformed;
  Ccbf rec = std::move(std::get<Ccbf>(parsed));
  if (!(rec.params() == cfg_.params)) return RecordOutcome::RejectedParams;
  neighbor_.insert_or_assign(interface_id, std::move(rec));
  refold();
  return RecordOutcome::Applied;
}

void EdgeCache::refold() {
  global_ = local_;
  saturated_ = false;
  for (const auto& [iface, rec] : neighbor_) {
    (void)iface;
    auto merged = Ccbf::combine(global_, rec);
    if (std::holds_alternative<CombineError>(merged)) {
      // Over-capacity folds drop this contribution; admission keeps working
      // on the partial view.
      saturated_ = true;
      continue;
    }
    global_ = std::move(std::get<Ccbf>(merged));
  }
}

RequestVector EdgeCache::build_request(std::uint32_t budget) const {
  RequestVector req;
  req.budget = budget;
  req.bits = BitArray(cfg_.params.array_bits);
  for (const auto& [iface, rec] : neighbor_) {
    (void)iface;
    req.bits.or_with(rec.or_array());
  }
  req.bits.and_not(local_.or_array());
  return req;
}

std::vector<DataItem> EdgeCache::answer_request(const RequestVector& req) const {
  std::vector<DataItem> out;
  if (req.budget == 0) return out;
  for (const auto& item : store_.learning_items()) {
    if (local_.covered_by(item.key, req.bits)) {
      out.push_back(item);
      if (out.size() >= req.budget) break;
    }
  }
  return out;
}

std::size_t EdgeCache::integrate_response(const std::vector<DataItem>& items,
                                          bool solicited) {
  std::size_t kept = 0;
  for (const auto& item : items) {
    auto outcome = solicited ? admit_requested(item) : admit(item);
    if (outcome == AdmitOutcome::CachedNew || outcome == AdmitOutcome::EvictedThenCached ||
        outcome == AdmitOutcome::CachedBackground) {
      ++kept;
    }
  }
  return kept;
}

}  // namespace eel
