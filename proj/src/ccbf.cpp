#include "ccbf.hpp"

#include <algorithm>
#include <stdexcept>

#include "prng.hpp"

namespace eel {

namespace {

bool power_of_two(std::uint32_t v) { return v && (v & (v - 1)) == 0; }

void check_params(const CcbfParams& p) {
  if (p.array_bits < 8) throw std::invalid_argument("ccbf: array_bits < 8");
  if (p.num_arrays == 0 || p.num_arrays > kCcbfMaxArrays)
    throw std::invalid_argument("ccbf: num_arrays out of range");
  if (p.num_hashes == 0) throw std::invalid_argument("ccbf: num_hashes == 0");
  if (p.capacity == 0) throw std::invalid_argument("ccbf: capacity == 0");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::array<std::uint8_t, kCcbfMaxArrays> fill_order(std::uint64_t matrix_seed,
                                                    std::uint32_t position,
                                                    std::uint8_t num_arrays) {
  std::array<std::uint8_t, kCcbfMaxArrays> order{};
  for (std::uint8_t i = 0; i < num_arrays; ++i) order[i] = i;
  std::uint64_t state = hash64(static_cast<std::uint64_t>(position), matrix_seed);
  for (std::uint8_t i = num_arrays; i > 1; --i) {
    std::uint64_t j = splitmix64(state) % i;
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Ccbf::Ccbf(const CcbfParams& params) : params_(params), or_(params.array_bits) {
  check_params(params_);
  arrays_.assign(params_.num_arrays, BitArray(params_.array_bits));
}

void Ccbf::positions(std::string_view key, std::vector<std::uint32_t>& out) const {
  out.clear();
  const std::uint32_t m = params_.array_bits;
  std::uint64_t h1 = hash64(key, params_.hash_seed);
  std::uint64_t h2 = mix64(h1 + kGolden);
  if (power_of_two(m)) h2 |= 1ULL;  // keeps the probe stride coprime with m
  for (std::uint8_t j = 0; j < params_.num_hashes; ++j) {
    auto p = static_cast<std::uint32_t>((h1 + j * h2) % m);
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
}

std::uint8_t Ccbf::column_count(std::uint32_t position) const {
  std::uint8_t c = 0;
  for (const auto& a : arrays_)
    if (a.get(position)) ++c;
  return c;
}

InsertOutcome Ccbf::insert(std::string_view key) {
  if (contains(key)) return InsertOutcome::Duplicate;
  if (item_count_ == params_.capacity) return InsertOutcome::CapacityExceeded;

  std::vector<std::uint32_t> pos;
  positions(key, pos);

  // Two passes so a full column leaves the filter untouched.
  for (std::uint32_t p : pos)
    if (column_count(p) == params_.num_arrays) return InsertOutcome::PositionOverflow;

  for (std::uint32_t p : pos) {
    std::uint8_t c = column_count(p);
    auto order = fill_order(params_.matrix_seed, p, params_.num_arrays);
    arrays_[order[c]].set(p);
    or_.set(p);
  }
  ++item_count_;
  return InsertOutcome::Inserted;
}

bool Ccbf::contains(std::string_view key) const {
  std::vector<std::uint32_t> pos;
  positions(key, pos);
  for (std::uint32_t p : pos)
    if (!or_.get(p)) return false;
  return true;
}

DeleteOutcome Ccbf::erase(std::string_view key) {
  if (!contains(key)) return DeleteOutcome::NotFound;

  std::vector<std::uint32_t> pos;
  positions(key, pos);
  for (std::uint32_t p : pos) {
    std::uint8_t c = column_count(p);  // >= 1, or_ bit was set
    auto order = fill_order(params_.matrix_seed, p, params_.num_arrays);
    arrays_[order[c - 1]].clear(p);
    if (c == 1) or_.clear(p);
  }
  if (item_count_ > 0) --item_count_;
  return DeleteOutcome::Deleted;
}

std::variant<Ccbf, CombineError> Ccbf::combine(const Ccbf& a, const Ccbf& b) {
  if (a.params_ != b.params_) return CombineError::ParamMismatch;
  if (static_cast<std::uint64_t>(a.item_count_) + b.item_count_ > a.params_.capacity)
    return CombineError::Capacity;

  Ccbf out = a;
  for (std::uint8_t i = 0; i < out.params_.num_arrays; ++i)
    out.arrays_[i].or_with(b.arrays_[i]);
  out.or_.or_with(b.or_);
  out.item_count_ = a.item_count_ + b.item_count_;  // upper bound, not exact
  return out;
}

std::vector<std::uint8_t> Ccbf::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(kCcbfHeaderBytes + (params_.num_arrays + 1u) * or_.byte_size());
  const char magic[4] = {'C', 'C', 'B', 'F'};
  for (char c : magic) out.push_back(static_cast<std::uint8_t>(c));
  out.push_back(kCcbfWireVersion);
  put_u32(out, params_.array_bits);
  out.push_back(params_.num_arrays);
  out.push_back(params_.num_hashes);
  put_u32(out, params_.capacity);
  put_u64(out, params_.hash_seed);
  put_u64(out, params_.matrix_seed);
  put_u32(out, item_count_);
  for (const auto& a : arrays_) a.append_bytes(out);
  // The aggregate array travels too: receivers cross-check instead of trusting
  // the sender to have kept it consistent.
  or_.append_bytes(out);
  return out;
}

std::variant<Ccbf, WireError> Ccbf::deserialize(const std::uint8_t* data,
                                                std::size_t len) {
  if (len < kCcbfHeaderBytes) return WireError::Truncated;
  if (data[0] != 'C' || data[1] != 'C' || data[2] != 'B' || data[3] != 'F')
    return WireError::BadMagic;
  if (data[4] != kCcbfWireVersion) return WireError::BadVersion;

  CcbfParams p;
  p.array_bits = get_u32(data + 5);
  p.num_arrays = data[9];
  p.num_hashes = data[10];
  p.capacity = get_u32(data + 11);
  p.hash_seed = get_u64(data + 15);
  p.matrix_seed = get_u64(data + 23);
  std::uint32_t count = get_u32(data + 31);

  if (p.array_bits < 8 || p.num_arrays == 0 || p.num_arrays > kCcbfMaxArrays ||
      p.num_hashes == 0 || p.capacity == 0)
    return WireError::BadParams;
  if (count > p.capacity) return WireError::BadParams;

  std::size_t arr_bytes = (p.array_bits + 7) / 8;
  std::size_t need = kCcbfHeaderBytes + (p.num_arrays + 1u) * arr_bytes;
  if (len < need) return WireError::Truncated;

  Ccbf f(p);
  const std::uint8_t* cur = data + kCcbfHeaderBytes;
  for (auto& a : f.arrays_) {
    if (!a.load_bytes(cur)) return WireError::Inconsistent;
    cur += arr_bytes;
  }
  BitArray claimed(p.array_bits);
  if (!claimed.load_bytes(cur)) return WireError::Inconsistent;

  BitArray recomputed(p.array_bits);
  for (const auto& a : f.arrays_) recomputed.or_with(a);
  if (!(claimed == recomputed)) return WireError::Inconsistent;

  f.or_ = claimed;
  f.item_count_ = count;
  return f;
}

bool Ccbf::invariants_hold() const {
  BitArray recomputed(params_.array_bits);
  for (const auto& a : arrays_) recomputed.or_with(a);
  if (!(recomputed == or_)) return false;
  for (std::uint32_t p = 0; p < params_.array_bits; ++p) {
    auto order = fill_order(params_.matrix_seed, p, params_.num_arrays);
    std::uint8_t c = column_count(p);
    // First c slots of the fill order set, the rest clear.
    for (std::uint8_t i = 0; i < params_.num_arrays; ++i) {
      bool expect = i < c;
      if (arrays_[order[i]].get(p) != expect) return false;
    }
  }
  return true;
}

bool Ccbf::covered_by(std::string_view key, const BitArray& bits) const {
  std::vector<std::uint32_t> pos;
  positions(key, pos);
  for (std::uint32_t p : pos)
    if (!bits.get(p)) return false;
  return true;
}

const char* to_string(InsertOutcome o) {
  switch (o) {
    case InsertOutcome::Inserted: return "inserted";
    case InsertOutcome::Duplicate: return "duplicate";
    case InsertOutcome::CapacityExceeded: return "capacity-exceeded";
    case InsertOutcome::PositionOverflow: return "position-overflow";
  }
  return "?";
}

const char* to_string(WireError e) {
  switch (e) {
    case WireError::BadMagic: return "bad-magic";
    case WireError::BadVersion: return "bad-version";
    case WireError::Truncated: return "truncated";
    case WireError::BadParams: return "bad-params";
    case WireError::Inconsistent: return "inconsistent";
  }
  return "?";
}

}  // namespace eel
