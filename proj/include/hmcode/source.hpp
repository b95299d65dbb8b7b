#pragma once

#include <vector>

#include "hmcode/errors.hpp"
#include "hmcode/rng.hpp"
#include "hmcode/transition.hpp"

namespace hmcode {

struct SourceTrajectoryStep {
  long long time = 0;
  int state = 0;
  int message = 0;
};

// Markov source over S states emitting one of M uniform messages per step.
class MarkovSource {
public:
  MarkovSource(TransitionMatrix transition, int messages_per_state)
      : t_(std::move(transition)), m_(messages_per_state) {
    if (m_ <= 0) throw ParameterError("MarkovSource: messages_per_state must be positive");
  }

  const TransitionMatrix& transition() const { return t_; }
  int num_states() const { return t_.size(); }
  int messages_per_state() const { return m_; }

  // Draw the first state from an explicit distribution (stationary or uniform
  // depending on the experiment).
  int sample_initial_state(std::span<const double> dist, Rng& rng) const {
    if (static_cast<int>(dist.size()) != t_.size())
      throw ParameterError("MarkovSource: initial distribution size mismatch");
    return rng.sample_discrete(dist);
  }

  int sample_message(Rng& rng) const { return rng.uniform_int(m_); }

  int step_state(int state, Rng& rng) const {
    if (state < 0 || state >= t_.size())
      throw ParameterError("MarkovSource: state out of range");
    return rng.sample_discrete(t_.row(state));
  }

private:
  TransitionMatrix t_;
  int m_;
};

}  // namespace hmcode
