#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "hmcode/bitword.hpp"
#include "hmcode/codebook.hpp"
#include "hmcode/errors.hpp"
#include "hmcode/logprob.hpp"
#include "hmcode/transition.hpp"

namespace hmcode {

struct BeliefState {
  std::vector<double> prior;  // over states
  long long time = 0;
};

struct DecodeResult {
  int state_estimate = -1;
  int message_estimate = -1;
  std::vector<double> state_posterior;
  double log_evidence = 0.0;
};

inline void validate_belief(const BeliefState& b, int num_states) {
  if (static_cast<int>(b.prior.size()) != num_states)
    throw ParameterError("BeliefState: size mismatch");
  double sum = 0.0;
  for (double p : b.prior) {
    if (p < 0.0) throw ParameterError("BeliefState: negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("BeliefState: prior does not sum to 1");
}

inline BeliefState uniform_belief(int num_states, long long time = 0) {
  return BeliefState{std::vector<double>(static_cast<std::size_t>(num_states),
                                         1.0 / num_states),
                     time};
}

// log P(y | x) on a binary symmetric channel. The boundary channels keep
// exact-match semantics instead of evaluating log 0.
inline double word_log_likelihood(const BitWord& y, const BitWord& x, double pb) {
  if (y.length() != x.length())
    throw ParameterError("word_log_likelihood: length mismatch");
  if (pb < 0.0 || pb > 1.0) throw ParameterError("word_log_likelihood: pb out of [0,1]");
  const int n = y.length();
  const int d = hamming_distance(y, x);
  if (pb == 0.0) return d == 0 ? 0.0 : kNegInf;
  if (pb == 1.0) return d == n ? 0.0 : kNegInf;
  return d * std::log(pb) + (n - d) * std::log(1.0 - pb);
}

// Per-codebook emission evaluator. The per-word likelihood is affine in the
// Hamming distance, so each state reduces to a distance histogram folded
// through a table of channel-ratio powers; no exp calls in the scan.
class EmissionComputer {
public:
  EmissionComputer(const Codebook& cb, double pb) : cb_(&cb), pb_(pb) {
    if (pb < 0.0 || pb > 1.0) throw ParameterError("EmissionComputer: pb out of [0,1]");
    const int n = cb.word_len;
    log_m_ = std::log(static_cast<double>(cb.num_messages));
    if (pb > 0.0 && pb < 1.0) {
      log_rho_ = std::log(pb) - std::log(1.0 - pb);
      base_ = n * std::log(1.0 - pb);
      const double eta = std::exp(-std::abs(log_rho_));
      eta_pow_.resize(static_cast<std::size_t>(n) + 1);
      eta_pow_[0] = 1.0;
      for (int i = 1; i <= n; ++i)
        eta_pow_[static_cast<std::size_t>(i)] = eta_pow_[static_cast<std::size_t>(i - 1)] * eta;
    }
  }

  const Codebook& codebook() const { return *cb_; }
  double pb() const { return pb_; }

  // log of the state-conditional probability of y: the mean of the word
  // likelihoods over the state's codeword set. Unreachable states get -inf.
  double log_emission(const BitWord& y, int s) const {
    if (s < 0 || s >= cb_->num_states) throw ParameterError("log_emission: state out of range");
    if (y.length() != cb_->word_len) throw ParameterError("log_emission: word length mismatch");
    const auto& words = cb_->words[static_cast<std::size_t>(s)];
    if (words.empty()) return kNegInf;
    const int n = cb_->word_len;

    if (pb_ == 0.0 || pb_ == 1.0) {
      const int want = pb_ == 0.0 ? 0 : n;
      int hits = 0;
      for (const BitWord& x : words)
        if (hamming_distance(y, x) == want) ++hits;
      return hits > 0 ? std::log(static_cast<double>(hits)) - log_m_ : kNegInf;
    }

    int dmin = n, dmax = 0;
    int hist[33] = {0};
    const std::uint32_t raw = y.raw();
    for (const BitWord& x : words) {
      const int d = std::popcount(raw ^ x.raw());
      ++hist[d];
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
    // Factor out the dominant distance so the remaining powers are <= 1.
    const int pivot = log_rho_ <= 0.0 ? dmin : dmax;
    double sum = 0.0;
    for (int d = dmin; d <= dmax; ++d)
      if (hist[d]) sum += hist[d] * eta_pow_[static_cast<std::size_t>(std::abs(d - pivot))];
    return pivot * log_rho_ + std::log(sum) + base_ - log_m_;
  }

  // log emissions for every state at once.
  std::vector<double> log_emissions(const BitWord& y) const {
    std::vector<double> out(static_cast<std::size_t>(cb_->num_states), kNegInf);
    for (int s = 0; s < cb_->num_states; ++s)
      if (cb_->state_supported(s)) out[static_cast<std::size_t>(s)] = log_emission(y, s);
    return out;
  }

private:
  const Codebook* cb_;
  double pb_;
  double log_rho_ = 0.0;
  double base_ = 0.0;
  double log_m_ = 0.0;
  std::vector<double> eta_pow_;
};

inline double emission_log_prob(const BitWord& y, int s, const Codebook& cb, double pb) {
  if (s >= 0 && s < cb.num_states && !cb.state_supported(s))
    throw ModelError("emission_log_prob: state has no codewords");
  return EmissionComputer(cb, pb).log_emission(y, s);
}

// Joint posterior over codewords given the state prior: entry [s][m] is
// P(x(s,m) sent | y). Rows of unreachable states stay empty.
inline std::vector<std::vector<double>> codeword_posterior(const BitWord& y,
                                                           const BeliefState& belief,
                                                           const Codebook& cb, double pb) {
  validate_belief(belief, cb.num_states);
  std::vector<std::vector<double>> post(static_cast<std::size_t>(cb.num_states));
  std::vector<std::vector<double>> lw(static_cast<std::size_t>(cb.num_states));
  double mx = kNegInf;
  const double log_m = std::log(static_cast<double>(cb.num_messages));
  for (int s = 0; s < cb.num_states; ++s) {
    if (!cb.state_supported(s) || belief.prior[static_cast<std::size_t>(s)] == 0.0) continue;
    const double lp = std::log(belief.prior[static_cast<std::size_t>(s)]);
    auto& row = lw[static_cast<std::size_t>(s)];
    row.resize(static_cast<std::size_t>(cb.num_messages));
    for (int m = 0; m < cb.num_messages; ++m) {
      row[static_cast<std::size_t>(m)] =
          lp - log_m + word_log_likelihood(y, cb.word(s, m), pb);
      mx = std::max(mx, row[static_cast<std::size_t>(m)]);
    }
  }
  if (mx == kNegInf) throw NumericError("codeword_posterior: all codewords impossible");
  double total = 0.0;
  for (auto& row : lw)
    for (double v : row) total += v == kNegInf ? 0.0 : std::exp(v - mx);
  for (int s = 0; s < cb.num_states; ++s) {
    if (lw[static_cast<std::size_t>(s)].empty()) continue;
    auto& row = post[static_cast<std::size_t>(s)];
    row.resize(static_cast<std::size_t>(cb.num_messages));
    for (int m = 0; m < cb.num_messages; ++m) {
      const double v = lw[static_cast<std::size_t>(s)][static_cast<std::size_t>(m)];
      row[static_cast<std::size_t>(m)] = v == kNegInf ? 0.0 : std::exp(v - mx) / total;
    }
  }
  return post;
}

namespace detail {

inline int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  return best;
}

inline int nearest_message(const BitWord& y, const Codebook& cb, int s) {
  const auto& words = cb.state_words(s);
  if (words.empty()) throw ModelError("nearest_message: state has no codewords");
  int best = 0;
  int best_d = hamming_distance(y, words[0]);
  for (int m = 1; m < static_cast<int>(words.size()); ++m) {
    const int d = hamming_distance(y, words[static_cast<std::size_t>(m)]);
    if (d < best_d) {
      best = m;
      best_d = d;
    }
  }
  return best;
}

}  // namespace detail

// Posterior-weighted one-step prediction: the belief for t+1 given the
// posterior at t and the transition estimate.
inline BeliefState propagate_belief(std::span<const double> posterior,
                                    const TransitionMatrix& t_hat, long long next_time) {
  const int S = t_hat.size();
  if (static_cast<int>(posterior.size()) != S)
    throw ParameterError("propagate_belief: size mismatch");
  BeliefState next{std::vector<double>(static_cast<std::size_t>(S), 0.0), next_time};
  for (int s = 0; s < S; ++s) {
    const double w = posterior[static_cast<std::size_t>(s)];
    if (w == 0.0) continue;
    for (int j = 0; j < S; ++j) next.prior[static_cast<std::size_t>(j)] += w * t_hat.at(s, j);
  }
  double sum = 0.0;
  for (double v : next.prior) sum += v;
  if (sum <= 0.0) throw NumericError("propagate_belief: degenerate belief");
  for (double& v : next.prior) v /= sum;
  return next;
}

// Single-packet MAP decoding: posterior over states from prior and emission,
// hard state by argmax (lowest index on ties), message by nearest codeword
// within the winning state, belief advanced through the transition estimate.
inline std::pair<DecodeResult, BeliefState> map_decode(const BitWord& y,
                                                       const BeliefState& belief,
                                                       const Codebook& cb, double pb,
                                                       const TransitionMatrix& t_hat) {
  validate_belief(belief, cb.num_states);
  if (t_hat.size() != cb.num_states) throw ParameterError("map_decode: matrix size mismatch");
  const EmissionComputer em(cb, pb);
  const int S = cb.num_states;
  std::vector<double> lp(static_cast<std::size_t>(S), kNegInf);
  double mx = kNegInf;
  for (int s = 0; s < S; ++s) {
    const double pr = belief.prior[static_cast<std::size_t>(s)];
    if (pr == 0.0 || !cb.state_supported(s)) continue;
    lp[static_cast<std::size_t>(s)] = std::log(pr) + em.log_emission(y, s);
    mx = std::max(mx, lp[static_cast<std::size_t>(s)]);
  }
  if (mx == kNegInf)
    throw NumericError("map_decode: posterior degenerate (no state consistent with prior)");
  DecodeResult res;
  res.state_posterior.assign(static_cast<std::size_t>(S), 0.0);
  double total = 0.0;
  for (int s = 0; s < S; ++s) {
    const double v = lp[static_cast<std::size_t>(s)];
    if (v != kNegInf) total += res.state_posterior[static_cast<std::size_t>(s)] = std::exp(v - mx);
  }
  for (double& v : res.state_posterior) v /= total;
  res.log_evidence = mx + std::log(total);
  res.state_estimate = detail::argmax_lowest(res.state_posterior);
  res.message_estimate = detail::nearest_message(y, cb, res.state_estimate);
  BeliefState next = propagate_belief(res.state_posterior, t_hat, belief.time + 1);
  return {std::move(res), std::move(next)};
}

// Per-slot emissions for one window position. `single` is indexed by state;
// when the slot's codebook depends on the previous state, `pair` holds one
// row per predecessor instead. Slot 0 always uses `single` (its context, if
// any, is already resolved by the caller).
struct SlotEmissions {
  std::vector<double> single;
  std::vector<std::vector<double>> pair;

  bool pair_dependent() const { return !pair.empty(); }
};

// Forward-backward marginal of the first slot's state over a window of d+1
// packets. Works in rescaled linear space; returns the normalized marginal
// and the window log evidence.
inline std::pair<std::vector<double>, double> window_marginal(
    std::span<const SlotEmissions> slots, std::span<const double> prior,
    const TransitionMatrix& t_hat) {
  const int S = t_hat.size();
  if (slots.empty()) throw ParameterError("window_marginal: empty window");
  if (static_cast<int>(prior.size()) != S) throw ParameterError("window_marginal: size mismatch");
  if (slots[0].pair_dependent())
    throw ParameterError("window_marginal: first slot must be context free");
  const int last = static_cast<int>(slots.size()) - 1;

  std::vector<double> beta(static_cast<std::size_t>(S), 1.0);
  double log_scale = 0.0;
  std::vector<double> lin(static_cast<std::size_t>(S) * static_cast<std::size_t>(S));
  for (int i = last; i >= 1; --i) {
    const SlotEmissions& em = slots[static_cast<std::size_t>(i)];
    double mx = kNegInf;
    if (em.pair_dependent()) {
      if (static_cast<int>(em.pair.size()) != S)
        throw ParameterError("window_marginal: slot size mismatch");
      for (const auto& row : em.pair)
        for (double v : row) mx = std::max(mx, v);
    } else {
      if (static_cast<int>(em.single.size()) != S)
        throw ParameterError("window_marginal: slot size mismatch");
      for (double v : em.single) mx = std::max(mx, v);
    }
    if (mx == kNegInf) throw NumericError("window_marginal: slot has no consistent state");

    std::vector<double> nb(static_cast<std::size_t>(S), 0.0);
    if (em.pair_dependent()) {
      for (int c = 0; c < S; ++c) {
        const auto& row = em.pair[static_cast<std::size_t>(c)];
        double acc = 0.0;
        for (int s = 0; s < S; ++s) {
          const double le = row[static_cast<std::size_t>(s)];
          if (le == kNegInf) continue;
          acc += t_hat.at(c, s) * std::exp(le - mx) * beta[static_cast<std::size_t>(s)];
        }
        nb[static_cast<std::size_t>(c)] = acc;
      }
    } else {
      for (int s = 0; s < S; ++s) {
        const double le = em.single[static_cast<std::size_t>(s)];
        lin[static_cast<std::size_t>(s)] =
            le == kNegInf ? 0.0 : std::exp(le - mx) * beta[static_cast<std::size_t>(s)];
      }
      for (int c = 0; c < S; ++c) {
        double acc = 0.0;
        for (int s = 0; s < S; ++s) acc += t_hat.at(c, s) * lin[static_cast<std::size_t>(s)];
        nb[static_cast<std::size_t>(c)] = acc;
      }
    }
    double peak = 0.0;
    for (double v : nb) peak = std::max(peak, v);
    if (peak <= 0.0) throw NumericError("window_marginal: backward pass vanished");
    for (double& v : nb) v /= peak;
    log_scale += std::log(peak) + mx;
    beta = std::move(nb);
  }

  double m0 = kNegInf;
  for (double v : slots[0].single) m0 = std::max(m0, v);
  if (m0 == kNegInf) throw NumericError("window_marginal: first slot has no consistent state");
  std::vector<double> marg(static_cast<std::size_t>(S), 0.0);
  double total = 0.0;
  for (int s = 0; s < S; ++s) {
    const double le = slots[0].single[static_cast<std::size_t>(s)];
    const double pr = prior[static_cast<std::size_t>(s)];
    if (le == kNegInf || pr == 0.0) continue;
    total += marg[static_cast<std::size_t>(s)] =
        pr * std::exp(le - m0) * beta[static_cast<std::size_t>(s)];
  }
  if (total <= 0.0) throw NumericError("window_marginal: marginal degenerate");
  for (double& v : marg) v /= total;
  return {std::move(marg), std::log(total) + m0 + log_scale};
}

// Decode packet t using its own word plus d future words. Window slides by
// one packet; tail packets of a sequence shrink the effective delay.
inline std::pair<DecodeResult, BeliefState> delayed_decode(std::span<const BitWord> window,
                                                           const BeliefState& belief,
                                                           const TransitionMatrix& t_hat,
                                                           const Codebook& cb, double pb,
                                                           int d) {
  if (d < 0) throw ParameterError("delayed_decode: negative delay");
  if (static_cast<int>(window.size()) != d + 1)
    throw ParameterError("delayed_decode: window must hold d+1 words");
  if (d == 0) return map_decode(window[0], belief, cb, pb, t_hat);
  validate_belief(belief, cb.num_states);
  if (t_hat.size() != cb.num_states)
    throw ParameterError("delayed_decode: matrix size mismatch");

  const EmissionComputer em(cb, pb);
  std::vector<SlotEmissions> slots(window.size());
  for (std::size_t i = 0; i < window.size(); ++i)
    slots[i].single = em.log_emissions(window[i]);
  auto [marg, evidence] = window_marginal(slots, belief.prior, t_hat);

  DecodeResult res;
  res.state_posterior = std::move(marg);
  res.log_evidence = evidence;
  res.state_estimate = detail::argmax_lowest(res.state_posterior);
  res.message_estimate = detail::nearest_message(window[0], cb, res.state_estimate);
  BeliefState next = propagate_belief(res.state_posterior, t_hat, belief.time + 1);
  return {std::move(res), std::move(next)};
}

// Codebook-wide nearest-codeword decoding; the posterior degenerates to the
// indicator of the winning state.
inline DecodeResult min_distance_decode(const BitWord& y, const Codebook& cb) {
  int best_s = -1, best_m = -1, best_d = cb.word_len + 1;
  for (int s = 0; s < cb.num_states; ++s) {
    if (!cb.state_supported(s)) continue;
    const auto& words = cb.words[static_cast<std::size_t>(s)];
    for (int m = 0; m < static_cast<int>(words.size()); ++m) {
      const int d = hamming_distance(y, words[static_cast<std::size_t>(m)]);
      if (d < best_d) {
        best_d = d;
        best_s = s;
        best_m = m;
      }
    }
  }
  if (best_s < 0) throw ModelError("min_distance_decode: empty codebook");
  DecodeResult res;
  res.state_estimate = best_s;
  res.message_estimate = best_m;
  res.state_posterior.assign(static_cast<std::size_t>(cb.num_states), 0.0);
  res.state_posterior[static_cast<std::size_t>(best_s)] = 1.0;
  res.log_evidence = 0.0;
  return res;
}

}  // namespace hmcode
