#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hmcode/codebook.hpp"
#include "hmcode/errors.hpp"
#include "hmcode/harness.hpp"

using namespace hmcode;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.mode = Mode::kSteadyState;
  cfg.schemes = {Scheme::kLegacy};
  cfg.decoder = DecoderKind::kMap;
  cfg.word_len = 12;
  cfg.num_states = 8;
  cfg.num_messages = 4;
  cfg.pb = {0.05};
  cfg.density = {0.25};
  cfg.delay = {0};
  cfg.sequences = 2;
  cfg.packets_per_sequence = 600;
  cfg.base_seed = 11;
  return cfg;
}

std::string csv_of(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const auto rows = run_experiment(cfg);
  write_csv(os, rows);
  return os.str();
}

}  // namespace

TEST_CASE("noiseless channel decodes every packet for every scheme and decoder") {
  ExperimentConfig cfg = small_config();
  cfg.pb = {0.0};
  cfg.packets_per_sequence = 400;
  cfg.schemes = {Scheme::kLegacy, Scheme::kPunctured, Scheme::kStationary,
                 Scheme::kConditional};
  for (DecoderKind dec :
       {DecoderKind::kMinDistance, DecoderKind::kMap, DecoderKind::kDelayed}) {
    cfg.decoder = dec;
    cfg.delay = {dec == DecoderKind::kDelayed ? 1 : 0};
    for (const ResultRow& r : run_experiment(cfg)) {
      INFO(scheme_name(r.scheme) << " under " << decoder_name(r.decoder));
      CHECK(r.errors == 0);
      CHECK(r.per == 0.0);
      CHECK(r.packets == 800);
    }
  }
}

TEST_CASE("single-point sweep equals summing the sequences directly") {
  ExperimentConfig cfg = small_config();
  cfg.sequences = 3;
  const SweepPoint pt{cfg.schemes[0], cfg.pb[0], cfg.density[0], cfg.delay[0]};
  long long packets = 0, errors = 0;
  for (int q = 0; q < cfg.sequences; ++q) {
    const SequenceStats s = run_sequence(cfg, pt, q, Knowledge::kPerfect);
    packets += s.packets;
    errors += s.errors;
  }
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].packets == packets);
  CHECK(rows[0].errors == errors);
  CHECK(rows[0].per == Catch::Approx(static_cast<double>(errors) / packets));
  CHECK(rows[0].seq == -1);
  CHECK(rows[0].bucket == -1);
}

TEST_CASE("identical configs produce byte-identical CSV") {
  ExperimentConfig cfg = small_config();
  cfg.pb = {0.03, 0.08};
  cfg.decoder = DecoderKind::kDelayed;
  cfg.delay = {1};
  const std::string a = csv_of(cfg);
  const std::string b = csv_of(cfg);
  REQUIRE(!a.empty());
  CHECK(a == b);
}

TEST_CASE("thread count does not change the output bytes") {
  ExperimentConfig cfg = small_config();
  cfg.sequences = 4;
  cfg.pb = {0.02, 0.07};
  setenv("HMCODE_THREADS", "1", 1);
  const std::string serial = csv_of(cfg);
  setenv("HMCODE_THREADS", "4", 1);
  const std::string parallel = csv_of(cfg);
  unsetenv("HMCODE_THREADS");
  CHECK(serial == parallel);
}

TEST_CASE("result rows conserve packet counts") {
  ExperimentConfig cfg = small_config();
  cfg.mode = Mode::kTransient;
  cfg.packets_per_sequence = 500;
  cfg.bucket_width = 100;
  cfg.per_sequence_rows = true;
  const auto rows = run_experiment(cfg);

  long long total_learned = 0;
  for (const ResultRow& r : rows) {
    CHECK(r.errors >= 0);
    CHECK(r.errors <= r.packets);
    CHECK(r.per == Catch::Approx(static_cast<double>(r.errors) / r.packets));
    if (r.seq == -1 && r.knowledge == Knowledge::kLearned) total_learned += r.packets;
  }
  // 5 buckets x 100 packets x 2 sequences on the aggregate rows.
  CHECK(total_learned == 1000);

  // Per-sequence bucket rows repartition the aggregate exactly.
  long long per_seq_learned = 0;
  for (const ResultRow& r : rows)
    if (r.seq >= 0 && r.knowledge == Knowledge::kLearned) per_seq_learned += r.packets;
  CHECK(per_seq_learned == total_learned);
}

TEST_CASE("learning modes run learned and perfect variants on the same seeds") {
  ExperimentConfig cfg = small_config();
  cfg.mode = Mode::kTransient;
  cfg.packets_per_sequence = 300;
  cfg.bucket_width = 150;
  const auto rows = run_experiment(cfg);
  int learned = 0, perfect = 0;
  for (const ResultRow& r : rows) {
    CHECK(r.bucket >= 0);
    if (r.knowledge == Knowledge::kLearned) ++learned;
    if (r.knowledge == Knowledge::kPerfect) ++perfect;
  }
  CHECK(learned == 2);
  CHECK(perfect == 2);
}

TEST_CASE("compression schemes require steady-state mode") {
  for (Mode m : {Mode::kTransient, Mode::kDynamic}) {
    for (Scheme s : {Scheme::kStationary, Scheme::kConditional}) {
      ExperimentConfig cfg = small_config();
      cfg.mode = m;
      cfg.schemes = {s};
      CHECK_THROWS_AS(validate_config(cfg), ParameterError);
    }
  }
  ExperimentConfig steady = small_config();
  steady.schemes = {Scheme::kStationary};
  CHECK_NOTHROW(validate_config(steady));
}

TEST_CASE("config validation rejects malformed fields") {
  auto broken = [](auto&& mutate) {
    ExperimentConfig cfg;
    cfg.mode = Mode::kSteadyState;
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.pb.clear(); })), ParameterError);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.density.clear(); })), ParameterError);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.num_states = 12; })), ParameterError);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.num_messages = 7; })), ParameterError);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.pb = {1.5}; })), ParameterError);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.delay = {-1}; })), ParameterError);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.sequences = 0; })), ParameterError);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.word_len = 40; })), ParameterError);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) {
                    c.num_messages = 1 << 13;
                    c.word_len = 12;
                  })),
                  ParameterError);
  CHECK_THROWS_AS(run_sequence(small_config(), SweepPoint{}, 0, Knowledge::kLearned),
                  ParameterError);
}

TEST_CASE("csv header and row shape are fixed") {
  CHECK(std::string(kCsvHeader) ==
        "mode,scheme,decoder,n,S,M,pb,density,delay,tc,alpha,window,seq,bucket,packets,"
        "errors,per");
  ExperimentConfig cfg = small_config();
  cfg.packets_per_sequence = 200;
  const std::string csv = csv_of(cfg);
  std::istringstream is(csv);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == kCsvHeader);
  REQUIRE(std::getline(is, line));
  CHECK(std::count(line.begin(), line.end(), ',') == 16);
  CHECK(line.rfind("steady-state,legacy,map,12,8,4,0.05,0.25,0,", 0) == 0);
}

TEST_CASE("trace records the decoded path") {
  ExperimentConfig cfg = small_config();
  cfg.pb = {0.0};
  cfg.packets_per_sequence = 150;
  std::vector<TraceRow> trace;
  SequenceProbes probes;
  probes.trace = &trace;
  const SweepPoint pt{Scheme::kLegacy, 0.0, 0.25, 0};
  run_sequence(cfg, pt, 0, Knowledge::kPerfect, &probes);
  REQUIRE(static_cast<int>(trace.size()) == cfg.packets_per_sequence);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i].t == static_cast<long long>(i));
    CHECK(trace[i].est_state == trace[i].true_state);
    CHECK(trace[i].est_message == trace[i].true_message);
    CHECK(trace[i].posterior_entropy == Catch::Approx(0.0).margin(1e-12));
  }
  std::ostringstream os;
  write_trace_csv(os, trace);
  std::istringstream is(os.str());
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "t,true_state,true_msg,est_state,est_msg,posterior_entropy");
}

TEST_CASE("every prior and posterior in a run is normalized") {
  ExperimentConfig cfg = small_config();
  cfg.decoder = DecoderKind::kDelayed;
  cfg.delay = {2};
  cfg.packets_per_sequence = 400;
  long long seen = 0;
  SequenceProbes probes;
  probes.distribution_hook = [&](std::span<const double> dist) {
    double sum = 0.0;
    for (double v : dist) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
    ++seen;
  };
  const SweepPoint pt{Scheme::kLegacy, 0.05, 0.25, 2};
  run_sequence(cfg, pt, 0, Knowledge::kPerfect, &probes);
  CHECK(seen == 2 * cfg.packets_per_sequence);
}

TEST_CASE("learning run exposes its final estimator") {
  ExperimentConfig cfg = small_config();
  cfg.mode = Mode::kTransient;
  cfg.packets_per_sequence = 800;
  int calls = 0;
  SequenceProbes probes;
  probes.estimator_hook = [&](const EstimatorState& est) {
    ++calls;
    CHECK(est.transition_count() == 800 - 1);
    const TransitionMatrix t = est.transition_estimate();
    for (int i = 0; i < t.size(); ++i) {
      double sum = 0.0;
      for (int j = 0; j < t.size(); ++j) sum += t.at(i, j);
      CHECK(sum == Catch::Approx(1.0));
    }
    // 50 pilot packets of 12 bits plus the refresh window.
    CHECK(std::abs(est.pb_estimate() - 0.05) < 0.04);
  };
  const SweepPoint pt{Scheme::kLegacy, 0.05, 0.25, 0};
  run_sequence(cfg, pt, 0, Knowledge::kLearned, &probes);
  run_sequence(cfg, pt, 0, Knowledge::kPerfect, &probes);
  CHECK(calls == 1);
}

TEST_CASE("source randomness is shared across sweep points") {
  ExperimentConfig cfg = small_config();
  cfg.packets_per_sequence = 300;
  auto trajectory = [&](double pb) {
    std::vector<TraceRow> trace;
    SequenceProbes probes;
    probes.trace = &trace;
    const SweepPoint pt{Scheme::kLegacy, pb, 0.25, 0};
    run_sequence(cfg, pt, 0, Knowledge::kPerfect, &probes);
    return trace;
  };
  const auto low = trajectory(0.01);
  const auto high = trajectory(0.09);
  REQUIRE(low.size() == high.size());
  for (std::size_t i = 0; i < low.size(); ++i) {
    REQUIRE(low[i].true_state == high[i].true_state);
    REQUIRE(low[i].true_message == high[i].true_message);
  }
}

TEST_CASE("delayed decoding beats forward decoding on a correlated source") {
  ExperimentConfig cfg = small_config();
  cfg.word_len = 10;
  cfg.num_states = 8;
  cfg.num_messages = 2;
  cfg.pb = {0.08};
  cfg.density = {0.25};
  cfg.sequences = 4;
  cfg.packets_per_sequence = 4000;

  auto per_of = [&](DecoderKind dec, int delay) {
    cfg.decoder = dec;
    cfg.delay = {delay};
    const auto rows = run_experiment(cfg);
    REQUIRE(rows.size() == 1);
    return rows[0].per;
  };
  const double md = per_of(DecoderKind::kMinDistance, 0);
  const double map = per_of(DecoderKind::kMap, 0);
  const double delayed = per_of(DecoderKind::kDelayed, 1);
  CHECK(map < md);
  CHECK(delayed <= map);
}
