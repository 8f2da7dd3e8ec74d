#pragma once

#include <bit>
#include <cstdint>
#include <cstddef>
#include <vector>

namespace eel {

// Fixed-width bit array packed into 64-bit words. Bit i lives at word i/64,
// bit i%64; when exported to bytes the packing is LSB-first, which matches
// little-endian word order, so serialization is a plain byte copy.
class BitArray {
 public:
  BitArray() = default;
  explicit BitArray(std::uint32_t nbits)
      : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

  std::uint32_t size() const { return nbits_; }

  bool get(std::uint32_t i) const {
    return (words_[i >> 6] >> (i & 63U)) & 1ULL;
  }
  void set(std::uint32_t i) { words_[i >> 6] |= 1ULL << (i & 63U); }
  void clear(std::uint32_t i) { words_[i >> 6] &= ~(1ULL << (i & 63U)); }

  void or_with(const BitArray& other) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= other.words_[w];
  }

  void and_not(const BitArray& other) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= ~other.words_[w];
  }

  std::uint32_t popcount() const {
    std::uint64_t n = 0;
    for (std::uint64_t w : words_) n += std::popcount(w);
    return static_cast<std::uint32_t>(n);
  }

  bool none() const {
    for (std::uint64_t w : words_)
      if (w) return false;
    return true;
  }

  std::size_t byte_size() const { return (nbits_ + 7) / 8; }

  void append_bytes(std::vector<std::uint8_t>& out) const {
    std::size_t nb = byte_size();
    for (std::size_t i = 0; i < nb; ++i)
      out.push_back(static_cast<std::uint8_t>(words_[i >> 3] >> ((i & 7U) * 8)));
  }

  // Loads byte_size() bytes. Returns false if a padding bit past nbits_ is set.
  bool load_bytes(const std::uint8_t* data) {
    std::size_t nb = byte_size();
    for (auto& w : words_) w = 0;
    for (std::size_t i = 0; i < nb; ++i)
      words_[i >> 3] |= static_cast<std::uint64_t>(data[i]) << ((i & 7U) * 8);
    if (nbits_ & 63U) {
      std::uint64_t tail_mask = (~0ULL) << (nbits_ & 63U);
      if (words_.back() & tail_mask) return false;
    }
    return true;
  }

  friend bool operator==(const BitArray&, const BitArray&) = default;

 private:
  std::uint32_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace eel
