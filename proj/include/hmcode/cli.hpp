#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmcode/codebook.hpp"
#include "hmcode/errors.hpp"
#include "hmcode/harness.hpp"

namespace hmcode {
namespace cli_detail {

// Sweepable numeric flags accept a single value, a comma list, or an
// inclusive a:b:step range.
inline std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  try {
    if (text.find(':') != std::string::npos) {
      std::istringstream is(text);
      std::string a, b, step;
      if (!std::getline(is, a, ':') || !std::getline(is, b, ':') ||
          !std::getline(is, step, ':') || !is.eof())
        throw ParameterError(std::string(what) + ": range must be start:stop:step");
      const double lo = std::stod(a);
      const double hi = std::stod(b);
      const double st = std::stod(step);
      if (st <= 0.0) throw ParameterError(std::string(what) + ": step must be positive");
      if (hi < lo) throw ParameterError(std::string(what) + ": stop below start");
      for (int k = 0;; ++k) {
        const double v = lo + k * st;
        if (v > hi + st * 1e-9) break;
        out.push_back(v);
      }
    } else {
      std::istringstream is(text);
      std::string item;
      while (std::getline(is, item, ',')) out.push_back(std::stod(item));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw ParameterError(std::string(what) + ": cannot parse '" + text + "'");
  }
  if (out.empty()) throw ParameterError(std::string(what) + ": empty list");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  try {
    if (text.find(':') != std::string::npos) {
      std::istringstream is(text);
      std::string a, b, step;
      if (!std::getline(is, a, ':') || !std::getline(is, b, ':') ||
          !std::getline(is, step, ':') || !is.eof())
        throw ParameterError(std::string(what) + ": range must be start:stop:step");
      const int lo = std::stoi(a);
      const int hi = std::stoi(b);
      const int st = std::stoi(step);
      if (st <= 0) throw ParameterError(std::string(what) + ": step must be positive");
      if (hi < lo) throw ParameterError(std::string(what) + ": stop below start");
      for (int v = lo; v <= hi; v += st) out.push_back(v);
    } else {
      std::istringstream is(text);
      std::string item;
      while (std::getline(is, item, ',')) out.push_back(std::stoi(item));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw ParameterError(std::string(what) + ": cannot parse '" + text + "'");
  }
  if (out.empty()) throw ParameterError(std::string(what) + ": empty list");
  return out;
}

struct RawOptions {
  std::string scheme = "legacy";
  std::string schemes = "legacy";
  std::string decoder;
  std::string pb = "0.05";
  std::string density = "0.125";
  std::string delay = "0";
  int word_len = 20;
  int num_states = 32;
  int num_messages = 32;
  int check_period = 2;
  double alpha = 0.1;
  int window = 1000;
  int packets = 0;
  int sequences = 10;
  int bucket_width = 100;
  int pilot_packets = 50;
  std::uint64_t seed = 1;
  bool per_seq = false;
  bool learn_from_truth = false;
  std::string out;
  std::string trace_path;
  std::string estimator_dump_path;
  std::string config_path;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline int to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (const std::exception&) {
    throw ParameterError("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

inline double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (const std::exception&) {
    throw ParameterError("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return static_cast<std::uint64_t>(r);
  } catch (const std::exception&) {
    throw ParameterError("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ParameterError("config: key '" + key + "' needs a boolean, got '" + v + "'");
}

// Flat key=value defaults mirroring the command-line flags. Keys the command
// line already set are skipped: explicit flags always win. Returns the keys
// present in the file so required-flag checks can count them as provided.
inline std::set<std::string> apply_config_file(const CLI::App& sub, RawOptions& raw) {
  std::ifstream is(raw.config_path);
  if (!is) throw ParameterError("config: cannot read '" + raw.config_path + "'");

  auto cli_given = [&sub](const std::string& flag) {
    const CLI::Option* opt = sub.get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  auto has_flag = [&sub](const std::string& flag) {
    return sub.get_option_no_throw(flag) != nullptr;
  };

  std::set<std::string> present;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ParameterError("config: line " + std::to_string(lineno) + " is not key=value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const std::string flag = "--" + key;
    if (!has_flag(flag) || key == "config")
      throw ParameterError("config: unknown key '" + key + "' (line " +
                           std::to_string(lineno) + ")");
    present.insert(key);
    if (cli_given(flag)) continue;

    if (key == "scheme") raw.scheme = value;
    else if (key == "schemes") raw.schemes = value;
    else if (key == "decoder") raw.decoder = value;
    else if (key == "pb") raw.pb = value;
    else if (key == "density") raw.density = value;
    else if (key == "delay") raw.delay = value;
    else if (key == "n") raw.word_len = to_int(value, key);
    else if (key == "S") raw.num_states = to_int(value, key);
    else if (key == "M") raw.num_messages = to_int(value, key);
    else if (key == "tc") raw.check_period = to_int(value, key);
    else if (key == "alpha") raw.alpha = to_double(value, key);
    else if (key == "window") raw.window = to_int(value, key);
    else if (key == "packets") raw.packets = to_int(value, key);
    else if (key == "sequences") raw.sequences = to_int(value, key);
    else if (key == "bucket-width") raw.bucket_width = to_int(value, key);
    else if (key == "pilot") raw.pilot_packets = to_int(value, key);
    else if (key == "seed") raw.seed = to_u64(value, key);
    else if (key == "per-seq") raw.per_seq = to_bool(value, key);
    else if (key == "learn-from-truth") raw.learn_from_truth = to_bool(value, key);
    else if (key == "out") raw.out = value;
    else if (key == "trace") raw.trace_path = value;
    else if (key == "estimator-dump") raw.estimator_dump_path = value;
    else
      throw ParameterError("config: unknown key '" + key + "' (line " +
                           std::to_string(lineno) + ")");
  }
  return present;
}

// Post-parse step: merge the config file (if any) and enforce required
// options, counting a config-file key as provided.
inline void finalize_options(const CLI::App& sub, RawOptions& raw, const char* axis_flag) {
  std::set<std::string> file_keys;
  if (!raw.config_path.empty()) file_keys = apply_config_file(sub, raw);
  auto provided = [&sub, &file_keys](const std::string& flag) {
    const CLI::Option* opt = sub.get_option_no_throw(flag);
    if (opt != nullptr && opt->count() > 0) return true;
    return file_keys.count(flag.substr(2)) > 0;
  };
  if (axis_flag != nullptr && !provided(axis_flag)) throw CLI::RequiredError(axis_flag);
  if (!provided("--out")) throw CLI::RequiredError("--out");
}

inline void add_common_options(CLI::App* sub, RawOptions& raw, Mode mode,
                               const char* default_decoder, int default_packets) {
  raw.decoder = default_decoder;
  raw.packets = default_packets;
  if (mode == Mode::kSteadyState)
    sub->add_option("--scheme", raw.scheme, "Encoding scheme: legacy, punctured, stationary, conditional");
  else
    sub->add_option("--schemes", raw.schemes, "Comma list of encoding schemes: legacy, punctured");
  sub->add_option("--decoder", raw.decoder, "Decoder: min-distance, map, delayed")
      ->capture_default_str();
  sub->add_option("--pb", raw.pb, "Channel flip rate (value, comma list, or start:stop:step)")
      ->capture_default_str();
  sub->add_option("--density", raw.density,
                  "Transition matrix density (value, comma list, or start:stop:step)")
      ->capture_default_str();
  sub->add_option("--delay", raw.delay, "Decoding delay (value, comma list, or start:stop:step)")
      ->capture_default_str();
  sub->add_option("--n", raw.word_len, "Codeword length in bits")->capture_default_str();
  sub->add_option("--S", raw.num_states, "Number of source states (power of two)")
      ->capture_default_str();
  sub->add_option("--M", raw.num_messages, "Messages per state (power of two)")
      ->capture_default_str();
  sub->add_option("--tc", raw.check_period, "Check packet period of the conditional scheme")
      ->capture_default_str();
  sub->add_option("--alpha", raw.alpha, "Transition estimator smoothing constant")
      ->capture_default_str();
  sub->add_option("--window", raw.window, "Estimator sliding window length")
      ->capture_default_str();
  sub->add_option("--packets", raw.packets, "Packets per sequence")->capture_default_str();
  sub->add_option("--sequences", raw.sequences, "Monte Carlo sequences per sweep point")
      ->capture_default_str();
  sub->add_option("--bucket-width", raw.bucket_width,
                  "Time bucket width for transient/dynamic curves")
      ->capture_default_str();
  sub->add_option("--pilot", raw.pilot_packets, "Pilot packets for the flip-rate estimate")
      ->capture_default_str();
  sub->add_option("--seed", raw.seed, "Base seed; sequence i uses seed+i")
      ->capture_default_str();
  sub->add_flag("--per-seq", raw.per_seq, "Emit per-sequence rows in addition to aggregates");
  sub->add_flag("--learn-from-truth", raw.learn_from_truth,
                "Feed the transition estimator true states instead of decoded ones");
  sub->add_option("--out", raw.out, "Output CSV path (required here or in the config file)");
  sub->add_option("--trace", raw.trace_path,
                  "Also write a per-packet decode trace of the first sweep point, sequence 0");
  sub->add_option("--estimator-dump", raw.estimator_dump_path,
                  "Also write the final estimator snapshot of the first sweep point, sequence 0 "
                  "(learning modes only)");
  sub->add_option("--config", raw.config_path,
                  "Key=value file supplying defaults for any flag of this subcommand; "
                  "explicit flags win");
}

inline ExperimentConfig config_from_raw(const RawOptions& raw, Mode mode) {
  ExperimentConfig cfg;
  cfg.mode = mode;
  cfg.schemes.clear();
  if (mode == Mode::kSteadyState) {
    cfg.schemes.push_back(scheme_from_name(raw.scheme));
  } else {
    std::istringstream is(raw.schemes);
    std::string item;
    while (std::getline(is, item, ',')) cfg.schemes.push_back(scheme_from_name(item));
    if (cfg.schemes.empty()) throw ParameterError("schemes: empty list");
  }
  cfg.decoder = decoder_from_name(raw.decoder);
  cfg.word_len = raw.word_len;
  cfg.num_states = raw.num_states;
  cfg.num_messages = raw.num_messages;
  cfg.pb = parse_double_list(raw.pb, "pb");
  cfg.density = parse_double_list(raw.density, "density");
  cfg.delay = parse_int_list(raw.delay, "delay");
  cfg.check_period = raw.check_period;
  cfg.alpha = raw.alpha;
  cfg.window = raw.window;
  cfg.sequences = raw.sequences;
  cfg.packets_per_sequence = raw.packets;
  cfg.base_seed = raw.seed;
  cfg.bucket_width = raw.bucket_width;
  cfg.pilot_packets = raw.pilot_packets;
  cfg.per_sequence_rows = raw.per_seq;
  cfg.learn_from_true_states = raw.learn_from_truth;
  return cfg;
}

inline int run_experiment_command(const RawOptions& raw, Mode mode) {
  const ExperimentConfig cfg = config_from_raw(raw, mode);
  validate_config(cfg);

  const auto rows = run_experiment(cfg);
  {
    std::ofstream os(raw.out);
    if (!os) {
      std::cerr << "error: cannot open '" << raw.out << "' for writing\n";
      return 1;
    }
    write_csv(os, rows);
  }

  const SweepPoint first{cfg.schemes[0], cfg.pb[0], cfg.density[0], cfg.delay[0]};
  const Knowledge knowledge =
      mode == Mode::kSteadyState ? Knowledge::kPerfect : Knowledge::kLearned;

  if (!raw.trace_path.empty()) {
    std::vector<TraceRow> trace;
    SequenceProbes probes;
    probes.trace = &trace;
    run_sequence(cfg, first, 0, knowledge, &probes);
    std::ofstream os(raw.trace_path);
    if (!os) {
      std::cerr << "error: cannot open '" << raw.trace_path << "' for writing\n";
      return 1;
    }
    write_trace_csv(os, trace);
  }

  if (!raw.estimator_dump_path.empty()) {
    if (mode == Mode::kSteadyState) {
      std::cerr << "error: --estimator-dump needs a learning mode (transient or dynamic)\n";
      return 1;
    }
    std::ofstream os(raw.estimator_dump_path);
    if (!os) {
      std::cerr << "error: cannot open '" << raw.estimator_dump_path << "' for writing\n";
      return 1;
    }
    SequenceProbes probes;
    probes.estimator_hook = [&os](const EstimatorState& est) { est.dump_snapshot(os); };
    run_sequence(cfg, first, 0, Knowledge::kLearned, &probes);
  }
  return 0;
}

struct DumpOptions {
  std::string scheme;
  int word_len = 20;
  int num_states = 32;
  int num_messages = 32;
  double density = 0.125;
  int context = 0;
  std::uint64_t seed = 1;
  std::string out;
};

inline int run_dump_command(const DumpOptions& opt) {
  const Scheme scheme = scheme_from_name(opt.scheme);
  Codebook cb;
  switch (scheme) {
    case Scheme::kLegacy:
      cb = build_legacy_codebook(opt.num_states, opt.num_messages, opt.word_len);
      break;
    case Scheme::kPunctured:
      cb = build_punctured_codebook(opt.num_states, opt.num_messages, opt.word_len);
      break;
    case Scheme::kStationary:
    case Scheme::kConditional: {
      Rng rng = Rng::stream(opt.seed, 0, 0);
      const TransitionMatrix t =
          generate_sparse_transition(opt.num_states, opt.density, rng);
      if (scheme == Scheme::kStationary) {
        const std::vector<double> pi = stationary_distribution(t);
        cb = build_stationary_codebook(opt.num_states, opt.num_messages, opt.word_len, pi);
      } else {
        cb = build_conditional_codebook(opt.num_states, opt.num_messages, opt.word_len, t,
                                        opt.context);
      }
      break;
    }
  }
  std::ofstream os(opt.out);
  if (!os) {
    std::cerr << "error: cannot open '" << opt.out << "' for writing\n";
    return 1;
  }
  dump_codebook_csv(cb, os);
  return 0;
}

}  // namespace cli_detail

// Entry point behind the hmcode binary; kept callable for in-process tests.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Monte Carlo simulator for joint source-channel coding of "
               "hidden-Markov sources over a binary symmetric channel"};
  app.require_subcommand(1);

  cli_detail::RawOptions sweep_pb, sweep_density, sweep_delay, transient, dynamic;
  cli_detail::DumpOptions dump;

  auto* sub_pb = app.add_subcommand(
      "sweep-pb", "Steady-state packet error rate as a function of the channel flip rate");
  cli_detail::add_common_options(sub_pb, sweep_pb, Mode::kSteadyState, "map", 100000);

  auto* sub_density = app.add_subcommand(
      "sweep-density", "Steady-state packet error rate as a function of the source density");
  cli_detail::add_common_options(sub_density, sweep_density, Mode::kSteadyState, "map", 100000);

  auto* sub_delay = app.add_subcommand(
      "sweep-delay", "Steady-state packet error rate as a function of the decoding delay");
  cli_detail::add_common_options(sub_delay, sweep_delay, Mode::kSteadyState, "delayed", 100000);

  auto* sub_transient = app.add_subcommand(
      "transient", "Bucketed learning curves against a perfect-knowledge receiver");
  cli_detail::add_common_options(sub_transient, transient, Mode::kTransient, "map", 4000);

  auto* sub_dynamic = app.add_subcommand(
      "dynamic", "Bucketed tracking curves for a source drifting between two matrices");
  cli_detail::add_common_options(sub_dynamic, dynamic, Mode::kDynamic, "map", 10000);

  auto* sub_dump = app.add_subcommand("codebook-dump", "Write one codebook as CSV");
  sub_dump->add_option("--scheme", dump.scheme,
                       "Scheme: legacy, punctured, stationary, conditional")
      ->required();
  sub_dump->add_option("--n", dump.word_len, "Codeword length in bits")->capture_default_str();
  sub_dump->add_option("--S", dump.num_states, "Number of source states (power of two)")
      ->capture_default_str();
  sub_dump->add_option("--M", dump.num_messages, "Messages per state (power of two)")
      ->capture_default_str();
  sub_dump->add_option("--density", dump.density,
                       "Matrix density for the stationary/conditional schemes")
      ->capture_default_str();
  sub_dump->add_option("--context", dump.context, "Conditioning state of the conditional scheme")
      ->capture_default_str();
  sub_dump->add_option("--seed", dump.seed, "Seed of the generated matrix")
      ->capture_default_str();
  sub_dump->add_option("--out", dump.out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
    if (sub_pb->parsed()) cli_detail::finalize_options(*sub_pb, sweep_pb, "--pb");
    if (sub_density->parsed()) cli_detail::finalize_options(*sub_density, sweep_density, "--density");
    if (sub_delay->parsed()) cli_detail::finalize_options(*sub_delay, sweep_delay, "--delay");
    if (sub_transient->parsed()) cli_detail::finalize_options(*sub_transient, transient, nullptr);
    if (sub_dynamic->parsed()) cli_detail::finalize_options(*sub_dynamic, dynamic, nullptr);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (sub_pb->parsed()) return cli_detail::run_experiment_command(sweep_pb, Mode::kSteadyState);
    if (sub_density->parsed())
      return cli_detail::run_experiment_command(sweep_density, Mode::kSteadyState);
    if (sub_delay->parsed())
      return cli_detail::run_experiment_command(sweep_delay, Mode::kSteadyState);
    if (sub_transient->parsed())
      return cli_detail::run_experiment_command(transient, Mode::kTransient);
    if (sub_dynamic->parsed())
      return cli_detail::run_experiment_command(dynamic, Mode::kDynamic);
    if (sub_dump->parsed()) return cli_detail::run_dump_command(dump);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace hmcode
