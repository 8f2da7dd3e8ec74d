#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "bits.hpp"

namespace eel {

// Composable counting Bloom filter: g stacked plain bit arrays over the same
// index space act as a unary counter per position, plus an aggregate OR array
// for O(1) membership checks. Which array receives the c-th bit of a position
// is dictated by a per-position permutation derived from matrix_seed, so two
// filters built with the same parameters fill positions in the same order and
// a bitwise OR of their arrays is a lossless merge.

struct CcbfParams {
  std::uint32_t array_bits = 16384;   // m, bits per array
  std::uint8_t num_arrays = 4;        // g, stacked arrays == max count/position
  std::uint8_t num_hashes = 7;        // k, probe positions per key
  std::uint32_t capacity = 2000;      // n, max items per filter
  std::uint64_t hash_seed = 0;
  std::uint64_t matrix_seed = 0;

  friend bool operator==(const CcbfParams&, const CcbfParams&) = default;
};

enum class InsertOutcome { Inserted, Duplicate, CapacityExceeded, PositionOverflow };
enum class DeleteOutcome { Deleted, NotFound };
enum class CombineError { ParamMismatch, Capacity };
enum class WireError { BadMagic, BadVersion, Truncated, BadParams, Inconsistent };

constexpr std::size_t kCcbfHeaderBytes = 35;
constexpr std::uint8_t kCcbfWireVersion = 1;
constexpr std::uint8_t kCcbfMaxArrays = 64;

// Fill order for one position: a permutation of {0..g-1}, Fisher-Yates driven
// by a stream seeded from (matrix_seed, position). Derived on demand; never
// stored, so merged filters cannot disagree about it.
std::array<std::uint8_t, kCcbfMaxArrays> fill_order(std::uint64_t matrix_seed,
                                                    std::uint32_t position,
                                                    std::uint8_t num_arrays);

class Ccbf {
 public:
  explicit Ccbf(const CcbfParams& params);

  const CcbfParams& params() const { return params_; }
  std::uint32_t item_count() const { return item_count_; }

  // Probe positions for a key: double hashing off one keyed 64-bit hash,
  // duplicates removed, order preserved. Exposed for the request-vector logic.
  void positions(std::string_view key, std::vector<std::uint32_t>& out) const;

  // Number of set bits stacked at a position, derived from the arrays.
  std::uint8_t column_count(std::uint32_t position) const;

  InsertOutcome insert(std::string_view key);
  bool contains(std::string_view key) const;
  DeleteOutcome erase(std::string_view key);

  static std::variant<Ccbf, CombineError> combine(const Ccbf& a, const Ccbf& b);

  std::vector<std::uint8_t> serialize() const;
  static std::variant<Ccbf, WireError> deserialize(const std::uint8_t* data,
                                                   std::size_t len);

  const BitArray& or_array() const { return or_; }
  const BitArray& array(std::uint8_t i) const { return arrays_[i]; }

  // True when the aggregate array matches the OR of the stacked arrays and
  // every column is contiguous in its fill order. Test hook.
  bool invariants_hold() const;

  // All probe positions set in the given external bit array (used to match
  // keys against a request vector built elsewhere).
  bool covered_by(std::string_view key, const BitArray& bits) const;

  friend bool operator==(const Ccbf&, const Ccbf&) = default;

 private:
  CcbfParams params_;
  std::vector<BitArray> arrays_;
  BitArray or_;
  std::uint32_t item_count_ = 0;
};

const char* to_string(InsertOutcome o);
const char* to_string(WireError e);

}  // namespace eel
