#pragma once

#include <cstdint>
#include <deque>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "hmcode/bitword.hpp"
#include "hmcode/errors.hpp"
#include "hmcode/transition.hpp"

namespace hmcode {

// Bit-flip rate from a pilot phase of known words: total differing bits over
// total bits across all (sent, received) pairs.
inline double estimate_pb_pilot(
    std::span<const std::pair<BitWord, BitWord>> observations) {
  if (observations.empty())
    throw ParameterError("estimate_pb_pilot: no observations");
  std::int64_t flips = 0;
  std::int64_t bits = 0;
  for (const auto& [sent, received] : observations) {
    flips += hamming_distance(sent, received);
    bits += sent.length();
  }
  if (bits == 0) throw ParameterError("estimate_pb_pilot: zero-length words");
  return static_cast<double>(flips) / static_cast<double>(bits);
}

// Online estimator for the channel flip rate and the source transition matrix.
//
// Transitions and per-packet flip observations each live in a FIFO window of
// the last `window` entries; counts are maintained incrementally and always
// match a recount of the window content. Pilot-phase flip statistics are kept
// outside the window and never evicted. The transition estimate applies
// additive smoothing: T_ij = (N_ij + alpha) / (sum_j' N_ij' + S * alpha).
class EstimatorState {
public:
  EstimatorState(int num_states, double alpha = 0.1, int window = 1000)
      : num_states_(num_states), alpha_(alpha), window_(window) {
    if (num_states <= 0)
      throw ParameterError("EstimatorState: num_states must be positive");
    if (!(alpha > 0.0))
      throw ParameterError("EstimatorState: alpha must be positive");
    if (window <= 0)
      throw ParameterError("EstimatorState: window must be positive");
    counts_.assign(static_cast<std::size_t>(num_states) * num_states, 0);
    row_totals_.assign(num_states, 0);
  }

  int num_states() const { return num_states_; }
  double alpha() const { return alpha_; }
  int window() const { return window_; }

  // Accumulates pilot statistics for the flip-rate estimate. Pilot bits are
  // permanent: they anchor the estimate when the refresh window is sparse.
  void observe_pilot(const BitWord& sent, const BitWord& received) {
    pilot_flips_ += hamming_distance(sent, received);
    pilot_bits_ += sent.length();
  }

  // Records a decoded state transition. The oldest one falls out of the
  // counts once the window is full.
  void observe_transition(int from, int to) {
    check_state(from);
    check_state(to);
    transitions_.emplace_back(from, to);
    ++cell(from, to);
    ++row_totals_[from];
    if (static_cast<int>(transitions_.size()) > window_) {
      const auto [f, t] = transitions_.front();
      transitions_.pop_front();
      --cell(f, t);
      --row_totals_[f];
    }
  }

  // Feeds one packet's flip observation: the received word against the
  // re-encoding of the decoded estimate. The ratio enters the sliding-window
  // part of the flip-rate estimate.
  void refresh_pb(const BitWord& received, const BitWord& reencoded) {
    const int flips = hamming_distance(received, reencoded);
    flip_window_.emplace_back(flips, received.length());
    window_flips_ += flips;
    window_bits_ += received.length();
    if (static_cast<int>(flip_window_.size()) > window_) {
      const auto [f, b] = flip_window_.front();
      flip_window_.pop_front();
      window_flips_ -= f;
      window_bits_ -= b;
    }
  }

  // Smoothed row-stochastic estimate. With no observations every row is
  // uniform.
  TransitionMatrix transition_estimate() const {
    std::vector<double> entries(counts_.size());
    for (int i = 0; i < num_states_; ++i) {
      const double denom =
          static_cast<double>(row_totals_[i]) + num_states_ * alpha_;
      for (int j = 0; j < num_states_; ++j)
        entries[static_cast<std::size_t>(i) * num_states_ + j] =
            (static_cast<double>(cell_value(i, j)) + alpha_) / denom;
    }
    return TransitionMatrix::from_flat(num_states_, std::move(entries));
  }

  double pb_estimate() const {
    const std::int64_t bits = pilot_bits_ + window_bits_;
    if (bits == 0)
      throw ModelError("EstimatorState: pb estimate requested with no observations");
    return static_cast<double>(pilot_flips_ + window_flips_) /
           static_cast<double>(bits);
  }

  bool has_pb_observations() const { return pilot_bits_ + window_bits_ > 0; }

  std::int64_t transition_count() const {
    return static_cast<std::int64_t>(transitions_.size());
  }

  std::int64_t count(int from, int to) const {
    check_state(from);
    check_state(to);
    return cell_value(from, to);
  }

  // Diagnostic snapshot: the current transition estimate in matrix text
  // format followed by one "pb <value>" line.
  void dump_snapshot(std::ostream& os) const {
    transition_estimate().write_text(os);
    os << "pb " << pb_estimate() << "\n";
  }

private:
  void check_state(int s) const {
    if (s < 0 || s >= num_states_)
      throw ParameterError("EstimatorState: state id out of range");
  }

  std::int64_t& cell(int i, int j) {
    return counts_[static_cast<std::size_t>(i) * num_states_ + j];
  }
  std::int64_t cell_value(int i, int j) const {
    return counts_[static_cast<std::size_t>(i) * num_states_ + j];
  }

  int num_states_;
  double alpha_;
  int window_;

  std::deque<std::pair<int, int>> transitions_;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> row_totals_;

  std::deque<std::pair<int, int>> flip_window_;
  std::int64_t window_flips_ = 0;
  std::int64_t window_bits_ = 0;
  std::int64_t pilot_flips_ = 0;
  std::int64_t pilot_bits_ = 0;
};

}  // namespace hmcode
