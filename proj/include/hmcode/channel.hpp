#pragma once

#include "hmcode/bitword.hpp"
#include "hmcode/errors.hpp"
#include "hmcode/rng.hpp"

namespace hmcode {

// Binary symmetric channel: flips each bit independently with probability pb.
inline BitWord transmit(const BitWord& x, double pb, Rng& rng) {
  if (pb < 0.0 || pb > 1.0) throw ParameterError("transmit: pb out of [0,1]");
  BitWord y = x;
  for (int i = 0; i < x.length(); ++i)
    if (rng.uniform01() < pb) y.set_bit(i, !y.bit(i));
  return y;
}

}  // namespace hmcode
