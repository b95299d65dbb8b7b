#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <string>

#include "hmcode/errors.hpp"

namespace hmcode {

// Fixed-length word of binary symbols, at most 32 bits. Position 0 is the
// first bit emitted by the encoder; all modules share this convention.
class BitWord {
public:
  BitWord() : bits_(0), len_(0) {}

  BitWord(std::uint32_t bits, int len) : bits_(bits), len_(len) {
    if (len < 0 || len > 32) throw ParameterError("BitWord: length out of range");
    if (len < 32) bits_ &= (std::uint32_t{1} << len) - 1;
  }

  static BitWord from_string(const std::string& s) {
    BitWord w(0, static_cast<int>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '1')
        w.set_bit(static_cast<int>(i), true);
      else if (s[i] != '0')
        throw ParameterError("BitWord: invalid character in bit string");
    }
    return w;
  }

  int length() const { return len_; }

  bool bit(int i) const { return (bits_ >> i) & 1u; }

  void set_bit(int i, bool v) {
    if (i < 0 || i >= len_) throw ParameterError("BitWord: bit index out of range");
    if (v)
      bits_ |= std::uint32_t{1} << i;
    else
      bits_ &= ~(std::uint32_t{1} << i);
  }

  std::uint32_t raw() const { return bits_; }

  BitWord complemented() const {
    std::uint32_t mask = len_ == 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << len_) - 1;
    return BitWord(~bits_ & mask, len_);
  }

  std::string to_string() const {
    std::string s(static_cast<std::size_t>(len_), '0');
    for (int i = 0; i < len_; ++i)
      if (bit(i)) s[static_cast<std::size_t>(i)] = '1';
    return s;
  }

  friend bool operator==(const BitWord&, const BitWord&) = default;

private:
  std::uint32_t bits_;
  int len_;
};

inline int hamming_distance(const BitWord& x, const BitWord& y) {
  if (x.length() != y.length())
    throw ParameterError("hamming_distance: length mismatch");
  return std::popcount(x.raw() ^ y.raw());
}

// Removes the positions set in `mask`, keeping the remaining bits in order.
inline BitWord erase_positions(const BitWord& w, std::uint32_t mask) {
  BitWord out(0, w.length() - std::popcount(mask & ((w.length() == 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << w.length()) - 1))));
  int j = 0;
  for (int i = 0; i < w.length(); ++i) {
    if ((mask >> i) & 1u) continue;
    if (w.bit(i)) out.set_bit(j, true);
    ++j;
  }
  return out;
}

}  // namespace hmcode
