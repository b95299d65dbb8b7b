#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "hmcode/bitword.hpp"
#include "hmcode/errors.hpp"

namespace hmcode {

// GF(2) polynomials packed as bit masks, bit i = coefficient of x^i.
namespace gf2poly {

inline int degree(std::uint64_t p) { return p == 0 ? -1 : 63 - std::countl_zero(p); }

inline std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  while (b) {
    if (b & 1u) out ^= a;
    a <<= 1;
    b >>= 1;
  }
  return out;
}

inline std::uint64_t mod(std::uint64_t a, std::uint64_t m) {
  const int dm = degree(m);
  for (int d = degree(a); d >= dm; d = degree(a)) a ^= m << (d - dm);
  return a;
}

}  // namespace gf2poly

// GF(32) arithmetic on the primitive polynomial x^5 + x^2 + 1.
class GF32 {
public:
  static const GF32& instance() {
    static const GF32 field;
    return field;
  }

  int mul(int a, int b) const {
    if (a == 0 || b == 0) return 0;
    return exp_[(log_[a] + log_[b]) % 31];
  }

  int pow_alpha(int e) const { return exp_[((e % 31) + 31) % 31]; }

  // Evaluates a GF(2) polynomial at alpha^e.
  int eval_poly_at_alpha(std::uint64_t poly, int e) const {
    int acc = 0;
    int term = 1;
    const int x = pow_alpha(e);
    for (int i = 0; i <= gf2poly::degree(poly); ++i) {
      if ((poly >> i) & 1u) acc ^= term;
      term = mul(term, x);
    }
    return acc;
  }

private:
  GF32() {
    int v = 1;
    for (int i = 0; i < 31; ++i) {
      exp_[i] = v;
      log_[v] = i;
      v <<= 1;
      if (v & 32) v ^= 0x25;
    }
  }

  std::array<int, 31> exp_{};
  std::array<int, 32> log_{};
};

// Minimal polynomial of alpha^j over GF(2): product of (x - alpha^e) over the
// conjugacy class {j, 2j, 4j, ...} mod 31.
inline std::uint64_t minimal_polynomial(int j) {
  const GF32& f = GF32::instance();
  const int start = ((j % 31) + 31) % 31;
  std::vector<int> cls;
  int e = start;
  do {
    cls.push_back(e);
    e = (2 * e) % 31;
  } while (e != start);

  std::vector<int> poly{1};  // coefficients in GF(32), poly[i] multiplies x^i
  for (int root_exp : cls) {
    const int root = f.pow_alpha(root_exp);
    std::vector<int> nxt(poly.size() + 1, 0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      nxt[i + 1] ^= poly[i];
      nxt[i] ^= f.mul(poly[i], root);
    }
    poly = std::move(nxt);
  }
  std::uint64_t out = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (poly[i] > 1) throw NumericError("minimal_polynomial: non-binary coefficient");
    if (poly[i]) out |= std::uint64_t{1} << i;
  }
  return out;
}

struct Bch31Code {
  int k = 0;
  int r = 0;
  int designed_distance = 0;
  std::uint64_t generator = 0;
};

// Length-31 binary BCH family, generators as cumulative products of the
// minimal polynomials of alpha^1, alpha^3, alpha^5, alpha^7, alpha^11.
inline const std::array<Bch31Code, 5>& bch31_ladder() {
  static const std::array<Bch31Code, 5> ladder = [] {
    constexpr int odd_roots[5] = {1, 3, 5, 7, 11};
    constexpr int distances[5] = {3, 5, 7, 11, 15};
    std::array<Bch31Code, 5> out{};
    std::uint64_t g = 1;
    for (int i = 0; i < 5; ++i) {
      g = gf2poly::mul(g, minimal_polynomial(odd_roots[i]));
      const int r = gf2poly::degree(g);
      out[i] = Bch31Code{31 - r, r, distances[i], g};
    }
    return out;
  }();
  return ladder;
}

// Systematic shortened and possibly punctured code. Emits the payload
// verbatim in the first payload_len positions, parity after it, with the
// last (full_len - output_len) parity positions dropped.
class LinearBlockCode {
public:
  int payload_len() const { return k_; }
  int parity_bits() const { return r_; }
  int full_len() const { return k_ + r_; }
  int output_len() const { return target_; }
  int puncture_count() const { return k_ + r_ - target_; }
  int designed_distance() const { return d_; }
  std::uint64_t generator() const { return g_; }

  std::vector<int> puncture_pattern() const {
    std::vector<int> out;
    for (int p = target_; p < full_len(); ++p) out.push_back(p);
    return out;
  }

  BitWord encode(const BitWord& payload) const {
    if (payload.length() != k_)
      throw ParameterError("LinearBlockCode: payload length mismatch");
    std::uint64_t m = 0;
    for (int i = 0; i < k_; ++i)
      if (payload.bit(i)) m |= std::uint64_t{1} << (k_ - 1 - i);
    const std::uint64_t shifted = m << r_;
    const std::uint64_t word = r_ > 0 ? shifted | gf2poly::mod(shifted, g_) : shifted;
    BitWord out(0, target_);
    for (int p = 0; p < target_; ++p)
      if ((word >> (k_ + r_ - 1 - p)) & 1u) out.set_bit(p, true);
    return out;
  }

  friend LinearBlockCode build_shortened_code(int payload_len, int target_len);

private:
  LinearBlockCode(int k, int r, int target, int d, std::uint64_t g)
      : k_(k), r_(r), target_(target), d_(d), g_(g) {}

  int k_, r_, target_, d_;
  std::uint64_t g_;
};

// Picks the highest-rate length-31 parent whose payload capacity covers
// payload_len and whose parity fills target_len, shortens it, and punctures
// the tail parity down to target_len.
inline LinearBlockCode build_shortened_code(int payload_len, int target_len) {
  if (payload_len < 0 || target_len < 0)
    throw ParameterError("build_shortened_code: negative length");
  if (payload_len > target_len)
    throw CodeDesignError("build_shortened_code: payload longer than target");
  for (const auto& parent : bch31_ladder()) {
    if (parent.k < payload_len) break;  // later parents hold even less payload
    if (payload_len + parent.r >= target_len)
      return LinearBlockCode(payload_len, parent.r, target_len,
                             parent.designed_distance, parent.generator);
  }
  throw CodeDesignError("build_shortened_code: no feasible parent code");
}

}  // namespace hmcode
