#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <optional>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hmcode/bitword.hpp"
#include "hmcode/channel.hpp"
#include "hmcode/codebook.hpp"
#include "hmcode/decoder.hpp"
#include "hmcode/errors.hpp"
#include "hmcode/estimation.hpp"
#include "hmcode/logprob.hpp"
#include "hmcode/rng.hpp"
#include "hmcode/source.hpp"
#include "hmcode/transition.hpp"

namespace hmcode {

enum class Mode { kSteadyState, kTransient, kDynamic };
enum class DecoderKind { kMinDistance, kMap, kDelayed };

// Perfect receivers know the true transition matrix and flip rate; learning
// receivers start from uniform estimates plus a pilot phase.
enum class Knowledge { kPerfect, kLearned };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kSteadyState: return "steady-state";
    case Mode::kTransient: return "transient";
    case Mode::kDynamic: return "dynamic";
  }
  throw ParameterError("mode_name: unknown mode");
}

inline Mode mode_from_name(const std::string& name) {
  if (name == "steady-state") return Mode::kSteadyState;
  if (name == "transient") return Mode::kTransient;
  if (name == "dynamic") return Mode::kDynamic;
  throw ParameterError("mode_from_name: unknown mode '" + name + "'");
}

// CSV mode label; learning runs carry the bare mode name, perfect-knowledge
// companions in transient/dynamic modes get a -perfect suffix.
inline std::string mode_label(Mode m, Knowledge k) {
  std::string base = mode_name(m);
  if (m != Mode::kSteadyState && k == Knowledge::kPerfect) base += "-perfect";
  return base;
}

inline const char* decoder_name(DecoderKind d) {
  switch (d) {
    case DecoderKind::kMinDistance: return "min-distance";
    case DecoderKind::kMap: return "map";
    case DecoderKind::kDelayed: return "delayed";
  }
  throw ParameterError("decoder_name: unknown decoder");
}

inline DecoderKind decoder_from_name(const std::string& name) {
  if (name == "min-distance") return DecoderKind::kMinDistance;
  if (name == "map") return DecoderKind::kMap;
  if (name == "delayed") return DecoderKind::kDelayed;
  throw ParameterError("decoder_from_name: unknown decoder '" + name + "'");
}

struct ExperimentConfig {
  Mode mode = Mode::kSteadyState;
  std::vector<Scheme> schemes{Scheme::kLegacy};
  DecoderKind decoder = DecoderKind::kMap;
  int word_len = 20;
  int num_states = 32;
  int num_messages = 32;
  std::vector<double> pb{0.05};
  std::vector<double> density{0.125};
  std::vector<int> delay{0};
  int check_period = 2;
  double alpha = 0.1;
  int window = 1000;
  int sequences = 10;
  int packets_per_sequence = 100000;
  std::uint64_t base_seed = 1;
  int bucket_width = 100;
  int pilot_packets = 50;
  bool per_sequence_rows = false;
  // Feed the estimator true source transitions instead of decoded ones.
  bool learn_from_true_states = false;
};

inline void validate_config(const ExperimentConfig& cfg) {
  log2_exact(cfg.num_states, "config num_states");
  const int mb = log2_exact(cfg.num_messages, "config num_messages");
  if (cfg.word_len <= 0 || cfg.word_len > 32)
    throw ParameterError("config: word_len must be in [1,32]");
  if (mb > cfg.word_len)
    throw ParameterError("config: message bits exceed the codeword length");
  if (cfg.schemes.empty() || cfg.pb.empty() || cfg.density.empty() || cfg.delay.empty())
    throw ParameterError("config: sweep lists must be nonempty");
  for (double p : cfg.pb)
    if (p < 0.0 || p > 1.0) throw ParameterError("config: pb out of [0,1]");
  for (double d : cfg.density)
    if (d <= 0.0 || d > 1.0) throw ParameterError("config: density out of (0,1]");
  for (int d : cfg.delay)
    if (d < 0) throw ParameterError("config: negative delay");
  if (cfg.check_period < 1) throw ParameterError("config: check_period must be >= 1");
  if (!(cfg.alpha > 0.0)) throw ParameterError("config: alpha must be positive");
  if (cfg.window <= 0) throw ParameterError("config: window must be positive");
  if (cfg.sequences <= 0) throw ParameterError("config: sequences must be positive");
  if (cfg.packets_per_sequence <= 0)
    throw ParameterError("config: packets_per_sequence must be positive");
  if (cfg.bucket_width <= 0) throw ParameterError("config: bucket_width must be positive");
  if (cfg.mode != Mode::kSteadyState) {
    if (cfg.pilot_packets < 1)
      throw ParameterError("config: learning modes need at least one pilot packet");
    for (Scheme s : cfg.schemes)
      if (s == Scheme::kStationary || s == Scheme::kConditional)
        throw ParameterError(
            "config: compression schemes need known statistics and are only "
            "available in steady-state mode");
  }
}

// One point of the Cartesian sweep.
struct SweepPoint {
  Scheme scheme = Scheme::kLegacy;
  double pb = 0.05;
  double density = 0.125;
  int delay = 0;
};

struct ResultRow {
  Mode mode = Mode::kSteadyState;
  Knowledge knowledge = Knowledge::kPerfect;
  Scheme scheme = Scheme::kLegacy;
  DecoderKind decoder = DecoderKind::kMap;
  int word_len = 0;
  int num_states = 0;
  int num_messages = 0;
  double pb = 0.0;
  double density = 0.0;
  int delay = 0;
  int check_period = 0;
  double alpha = 0.0;
  int window = 0;
  int seq = -1;     // -1 aggregates over sequences
  int bucket = -1;  // -1 aggregates over the whole run
  long long packets = 0;
  long long errors = 0;
  double per = 0.0;
  double wall_seconds = 0.0;  // diagnostic only, not part of the CSV
};

struct TraceRow {
  long long t = 0;
  int true_state = 0;
  int true_message = 0;
  int est_state = 0;
  int est_message = 0;
  double posterior_entropy = 0.0;
};

struct SequenceStats {
  long long packets = 0;
  long long errors = 0;
  // (packets, errors) per time bucket of bucket_width packets.
  std::vector<std::pair<long long, long long>> buckets;
  double wall_seconds = 0.0;
};

// Optional instrumentation for a single sequence run.
struct SequenceProbes {
  std::vector<TraceRow>* trace = nullptr;
  // Called with every prior and posterior the receiver produces.
  std::function<void(std::span<const double>)> distribution_hook;
  // Called once at the end of a learning run with the final estimator.
  std::function<void(const EstimatorState&)> estimator_hook;
};

namespace detail {

// RNG stream ids carved out of one per-sequence seed. Keeping streams apart
// gives common random numbers across sweep points and receiver variants.
inline constexpr std::uint64_t kMatrixStream = 0;
inline constexpr std::uint64_t kSourceStream = 1;
inline constexpr std::uint64_t kChannelStream = 2;
inline constexpr std::uint64_t kMatrixStream2 = 3;
inline constexpr std::uint64_t kPilotStream = 4;

struct PendingPacket {
  long long t = 0;
  BitWord received;
  int true_state = 0;
  int true_message = 0;
  bool check = false;  // conditional-scheme check packet
};

}  // namespace detail

// Runs one sequence of one sweep point: regenerates the source model from the
// per-sequence seed, pushes every packet through encode -> channel -> decode,
// and counts joint (state, message) packet errors. Learning receivers run a
// pilot phase first (excluded from the error statistics) and update their
// estimates from each decoded packet.
inline SequenceStats run_sequence(const ExperimentConfig& cfg, const SweepPoint& pt,
                                  int sequence_index, Knowledge knowledge,
                                  const SequenceProbes* probes = nullptr) {
  validate_config(cfg);
  if (pt.pb < 0.0 || pt.pb > 1.0) throw ParameterError("run_sequence: pb out of [0,1]");
  if (pt.delay < 0) throw ParameterError("run_sequence: negative delay");
  if (sequence_index < 0) throw ParameterError("run_sequence: negative sequence index");
  if (cfg.mode == Mode::kSteadyState && knowledge != Knowledge::kPerfect)
    throw ParameterError("run_sequence: steady-state receivers know the true model");
  const bool conditional = pt.scheme == Scheme::kConditional;
  const bool learned = knowledge == Knowledge::kLearned;

  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(sequence_index);
  const int S = cfg.num_states;
  const int M = cfg.num_messages;
  const int n = cfg.word_len;
  const long long packets = cfg.packets_per_sequence;
  const int d = cfg.decoder == DecoderKind::kDelayed ? pt.delay : 0;

  Rng matrix_rng = Rng::stream(seed, detail::kMatrixStream, 0);
  Rng source_rng = Rng::stream(seed, detail::kSourceStream, 0);
  Rng channel_rng = Rng::stream(seed, detail::kChannelStream, 0);

  const TransitionMatrix truth = generate_sparse_transition(S, pt.density, matrix_rng);
  TransitionMatrix truth2 = truth;
  if (cfg.mode == Mode::kDynamic) {
    Rng matrix2_rng = Rng::stream(seed, detail::kMatrixStream2, 0);
    truth2 = generate_sparse_transition(S, pt.density, matrix2_rng);
  }
  const std::vector<double> pi = stationary_distribution(truth);

  Codebook codebook;  // single-codebook schemes
  std::vector<Codebook> contexts;
  Codebook check_codebook;
  switch (pt.scheme) {
    case Scheme::kLegacy:
      codebook = build_legacy_codebook(S, M, n);
      break;
    case Scheme::kPunctured:
      codebook = build_punctured_codebook(S, M, n);
      break;
    case Scheme::kStationary:
      codebook = build_stationary_codebook(S, M, n, pi);
      break;
    case Scheme::kConditional:
      contexts = build_conditional_codebooks(S, M, n, truth);
      check_codebook = build_legacy_codebook(S, M, n);
      break;
  }

  // Receiver parameters. Learning receivers bootstrap the flip rate from a
  // pilot phase of known all-zero packets on a dedicated RNG stream, so the
  // data-packet noise matches the perfect-knowledge companion run.
  EstimatorState estimator(S, cfg.alpha, cfg.window);
  double pb_dec = pt.pb;
  TransitionMatrix t_hat = truth;
  BeliefState belief{pi, 0};
  if (learned) {
    Rng pilot_rng = Rng::stream(seed, detail::kPilotStream, 0);
    const BitWord pilot_word(0, n);
    for (int i = 0; i < cfg.pilot_packets; ++i)
      estimator.observe_pilot(pilot_word, transmit(pilot_word, pt.pb, pilot_rng));
    pb_dec = estimator.pb_estimate();
    t_hat = estimator.transition_estimate();
    belief = uniform_belief(S);
  }

  SequenceStats stats;
  stats.buckets.assign(
      static_cast<std::size_t>((packets + cfg.bucket_width - 1) / cfg.bucket_width),
      {0, 0});

  std::deque<detail::PendingPacket> pending;
  int prev_true_state = -1;  // encoder context
  int prev_est_state = -1;   // decoder context, previous decoded packet
  int prev_est_for_learning = -1;
  int prev_true_for_learning = -1;

  std::optional<EmissionComputer> check_em;
  std::vector<EmissionComputer> context_ems;
  auto refresh_conditional_emitters = [&]() {
    if (!conditional || (check_em && check_em->pb() == pb_dec)) return;
    context_ems.clear();
    context_ems.reserve(static_cast<std::size_t>(S));
    for (int c = 0; c < S; ++c)
      context_ems.emplace_back(contexts[static_cast<std::size_t>(c)], pb_dec);
    check_em.emplace(check_codebook, pb_dec);
  };

  auto front_codebook = [&](const detail::PendingPacket& p) -> const Codebook& {
    if (!conditional) return codebook;
    if (p.check) return check_codebook;
    if (prev_est_state < 0)
      throw ModelError("run_sequence: conditional packet without decoded context");
    return contexts[static_cast<std::size_t>(prev_est_state)];
  };

  auto decode_front = [&]() {
    const detail::PendingPacket& front = pending.front();
    // Dynamic-mode perfect receivers decode packet t with the matrix of time
    // t, which lags the generator by the lookahead depth.
    if (cfg.mode == Mode::kDynamic && !learned)
      t_hat = front.t == 0 ? truth : blend(truth, truth2, front.t, packets);
    DecodeResult res;
    if (cfg.decoder == DecoderKind::kMinDistance) {
      res = min_distance_decode(front.received, front_codebook(front));
    } else if (cfg.decoder == DecoderKind::kMap) {
      if (probes && probes->distribution_hook) probes->distribution_hook(belief.prior);
      auto [r, next] = map_decode(front.received, belief, front_codebook(front), pb_dec, t_hat);
      res = std::move(r);
      belief = std::move(next);
    } else {
      if (probes && probes->distribution_hook) probes->distribution_hook(belief.prior);
      const int d_eff = static_cast<int>(pending.size()) - 1;
      if (!conditional) {
        std::vector<BitWord> window;
        window.reserve(pending.size());
        for (const auto& p : pending) window.push_back(p.received);
        auto [r, next] = delayed_decode(window, belief, t_hat, codebook, pb_dec, d_eff);
        res = std::move(r);
        belief = std::move(next);
      } else {
        refresh_conditional_emitters();
        std::vector<SlotEmissions> slots(pending.size());
        const Codebook& cb0 = front_codebook(front);
        slots[0].single = (front.check ? *check_em
                                       : context_ems[static_cast<std::size_t>(prev_est_state)])
                              .log_emissions(front.received);
        for (int i = 1; i <= d_eff; ++i) {
          const detail::PendingPacket& p = pending[static_cast<std::size_t>(i)];
          if (p.check) {
            slots[static_cast<std::size_t>(i)].single = check_em->log_emissions(p.received);
          } else {
            auto& pair = slots[static_cast<std::size_t>(i)].pair;
            pair.resize(static_cast<std::size_t>(S));
            for (int c = 0; c < S; ++c)
              pair[static_cast<std::size_t>(c)] =
                  context_ems[static_cast<std::size_t>(c)].log_emissions(p.received);
          }
        }
        auto [marg, evidence] = window_marginal(slots, belief.prior, t_hat);
        res.state_posterior = std::move(marg);
        res.log_evidence = evidence;
        res.state_estimate = detail::argmax_lowest(res.state_posterior);
        res.message_estimate = detail::nearest_message(front.received, cb0, res.state_estimate);
        belief = propagate_belief(res.state_posterior, t_hat, belief.time + 1);
      }
    }
    if (probes && probes->distribution_hook) probes->distribution_hook(res.state_posterior);

    if (learned) {
      // The decoded packet feeds both estimators; the transition stream uses
      // the previous decoded state (or the true one when configured).
      const Codebook& recb = front_codebook(front);
      estimator.refresh_pb(front.received, recb.word(res.state_estimate, res.message_estimate));
      if (cfg.learn_from_true_states) {
        if (prev_true_for_learning >= 0)
          estimator.observe_transition(prev_true_for_learning, front.true_state);
        prev_true_for_learning = front.true_state;
      } else {
        if (prev_est_for_learning >= 0)
          estimator.observe_transition(prev_est_for_learning, res.state_estimate);
        prev_est_for_learning = res.state_estimate;
      }
      pb_dec = estimator.pb_estimate();
      t_hat = estimator.transition_estimate();
    }

    const bool error =
        res.state_estimate != front.true_state || res.message_estimate != front.true_message;
    ++stats.packets;
    stats.errors += error ? 1 : 0;
    auto& bucket = stats.buckets[static_cast<std::size_t>(front.t / cfg.bucket_width)];
    ++bucket.first;
    bucket.second += error ? 1 : 0;

    if (probes && probes->trace)
      probes->trace->push_back({front.t, front.true_state, front.true_message,
                               res.state_estimate, res.message_estimate,
                               entropy_bits(res.state_posterior)});

    prev_est_state = res.state_estimate;
    pending.pop_front();
  };

  MarkovSource source(truth, M);
  TransitionMatrix blended = truth;  // dynamic-mode scratch
  int state = -1;
  for (long long t = 0; t < packets; ++t) {
    const TransitionMatrix* true_t = &truth;
    if (cfg.mode == Mode::kDynamic && t > 0) {
      blended = blend(truth, truth2, t, packets);
      true_t = &blended;
    }
    if (t == 0)
      state = source.sample_initial_state(pi, source_rng);
    else
      state = source_rng.sample_discrete(true_t->row(state));
    const int message = source.sample_message(source_rng);

    const Codebook& encode_cb =
        !conditional ? codebook
                     : (t % cfg.check_period == 0 ? check_codebook
                                                  : contexts[static_cast<std::size_t>(prev_true_state)]);
    const BitWord sent = encode_cb.word(state, message);
    const BitWord received = transmit(sent, pt.pb, channel_rng);
    prev_true_state = state;

    pending.push_back({t, received, state, message, conditional && t % cfg.check_period == 0});
    if (static_cast<int>(pending.size()) == d + 1) decode_front();
  }
  while (!pending.empty()) decode_front();

  if (learned && probes && probes->estimator_hook) probes->estimator_hook(estimator);

  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

namespace detail {

inline int thread_budget() {
  if (const char* env = std::getenv("HMCODE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

// Cartesian sweep over schemes x pb x density x delay, each point run over all
// sequences (twice in learning modes: learning and perfect-knowledge
// receivers on the same seeds). Sequences run in parallel; output order is
// sweep order, then mode label, then sequence, then bucket.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);

  std::vector<SweepPoint> points;
  for (Scheme scheme : cfg.schemes)
    for (double pb : cfg.pb)
      for (double density : cfg.density)
        for (int delay : cfg.delay) points.push_back({scheme, pb, density, delay});

  std::vector<Knowledge> variants;
  if (cfg.mode == Mode::kSteadyState) {
    variants = {Knowledge::kPerfect};
  } else {
    variants = {Knowledge::kLearned, Knowledge::kPerfect};
  }

  struct Task {
    std::size_t point;
    std::size_t variant;
    int seq;
  };
  std::vector<Task> tasks;
  tasks.reserve(points.size() * variants.size() * static_cast<std::size_t>(cfg.sequences));
  for (std::size_t p = 0; p < points.size(); ++p)
    for (std::size_t v = 0; v < variants.size(); ++v)
      for (int q = 0; q < cfg.sequences; ++q) tasks.push_back({p, v, q});

  std::vector<SequenceStats> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const Task& task = tasks[i];
        slots[i] = run_sequence(cfg, points[task.point], task.seq, variants[task.variant]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int threads = std::min<int>(detail::thread_budget(), static_cast<int>(tasks.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const bool bucketed = cfg.mode != Mode::kSteadyState;
  std::vector<ResultRow> rows;
  auto base_row = [&](const SweepPoint& pt, Knowledge k) {
    ResultRow r;
    r.mode = cfg.mode;
    r.knowledge = k;
    r.scheme = pt.scheme;
    r.decoder = cfg.decoder;
    r.word_len = cfg.word_len;
    r.num_states = cfg.num_states;
    r.num_messages = cfg.num_messages;
    r.pb = pt.pb;
    r.density = pt.density;
    r.delay = pt.delay;
    r.check_period = cfg.check_period;
    r.alpha = cfg.alpha;
    r.window = cfg.window;
    return r;
  };
  auto slot_of = [&](std::size_t p, std::size_t v, int q) -> const SequenceStats& {
    return slots[(p * variants.size() + v) * static_cast<std::size_t>(cfg.sequences) +
                 static_cast<std::size_t>(q)];
  };

  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const std::size_t nbuckets = slot_of(p, v, 0).buckets.size();
      auto emit = [&](int seq, auto&& fold) {
        if (!bucketed) {
          ResultRow r = base_row(points[p], variants[v]);
          r.seq = seq;
          fold(r, -1);
          rows.push_back(r);
        } else {
          for (std::size_t b = 0; b < nbuckets; ++b) {
            ResultRow r = base_row(points[p], variants[v]);
            r.seq = seq;
            r.bucket = static_cast<int>(b);
            fold(r, static_cast<int>(b));
            rows.push_back(r);
          }
        }
      };
      emit(-1, [&](ResultRow& r, int b) {
        for (int q = 0; q < cfg.sequences; ++q) {
          const SequenceStats& s = slot_of(p, v, q);
          if (b < 0) {
            r.packets += s.packets;
            r.errors += s.errors;
          } else {
            r.packets += s.buckets[static_cast<std::size_t>(b)].first;
            r.errors += s.buckets[static_cast<std::size_t>(b)].second;
          }
          r.wall_seconds += s.wall_seconds;
        }
        r.per = r.packets > 0 ? static_cast<double>(r.errors) / static_cast<double>(r.packets)
                              : 0.0;
      });
      if (cfg.per_sequence_rows) {
        for (int q = 0; q < cfg.sequences; ++q) {
          emit(q, [&](ResultRow& r, int b) {
            const SequenceStats& s = slot_of(p, v, q);
            if (b < 0) {
              r.packets = s.packets;
              r.errors = s.errors;
            } else {
              r.packets = s.buckets[static_cast<std::size_t>(b)].first;
              r.errors = s.buckets[static_cast<std::size_t>(b)].second;
            }
            r.wall_seconds = s.wall_seconds;
            r.per = r.packets > 0
                        ? static_cast<double>(r.errors) / static_cast<double>(r.packets)
                        : 0.0;
          });
        }
      }
    }
  }
  return rows;
}

inline constexpr const char* kCsvHeader =
    "mode,scheme,decoder,n,S,M,pb,density,delay,tc,alpha,window,seq,bucket,packets,errors,per";

inline void write_csv(std::ostream& os, std::span<const ResultRow> rows) {
  os << kCsvHeader << "\n";
  for (const ResultRow& r : rows) {
    os << mode_label(r.mode, r.knowledge) << ',' << scheme_name(r.scheme) << ','
       << decoder_name(r.decoder) << ',' << r.word_len << ',' << r.num_states << ','
       << r.num_messages << ',' << detail::format_double(r.pb) << ','
       << detail::format_double(r.density) << ',' << r.delay << ',' << r.check_period << ','
       << detail::format_double(r.alpha) << ',' << r.window << ',' << r.seq << ',' << r.bucket
       << ',' << r.packets << ',' << r.errors << ',' << detail::format_double(r.per) << "\n";
  }
}

inline void write_trace_csv(std::ostream& os, std::span<const TraceRow> rows) {
  os << "t,true_state,true_msg,est_state,est_msg,posterior_entropy\n";
  for (const TraceRow& r : rows)
    os << r.t << ',' << r.true_state << ',' << r.true_message << ',' << r.est_state << ','
       << r.est_message << ',' << detail::format_double(r.posterior_entropy) << "\n";
}

}  // namespace hmcode
