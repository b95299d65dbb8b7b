#pragma once

#include <bit>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "hmcode/bch.hpp"
#include "hmcode/bitword.hpp"
#include "hmcode/errors.hpp"
#include "hmcode/huffman.hpp"
#include "hmcode/transition.hpp"

namespace hmcode {

enum class Scheme { kLegacy, kPunctured, kStationary, kConditional };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kLegacy: return "legacy";
    case Scheme::kPunctured: return "punctured";
    case Scheme::kStationary: return "stationary";
    case Scheme::kConditional: return "conditional";
  }
  throw ParameterError("scheme_name: unknown scheme");
}

inline Scheme scheme_from_name(const std::string& name) {
  if (name == "legacy") return Scheme::kLegacy;
  if (name == "punctured") return Scheme::kPunctured;
  if (name == "stationary") return Scheme::kStationary;
  if (name == "conditional") return Scheme::kConditional;
  throw ParameterError("unknown scheme: " + name);
}

inline int log2_exact(int v, const char* what) {
  if (v <= 0 || !std::has_single_bit(static_cast<unsigned>(v)))
    throw ParameterError(std::string(what) + " must be a positive power of two");
  return std::countr_zero(static_cast<unsigned>(v));
}

// Total encoding map (state, message) -> word. For context-dependent tables
// states outside the conditioning row's support carry no words.
struct Codebook {
  Scheme scheme = Scheme::kLegacy;
  int num_states = 0;
  int num_messages = 0;
  int word_len = 0;
  int context = -1;  // conditioning state, -1 when context free
  std::vector<std::vector<BitWord>> words;  // [state][message]

  bool state_supported(int s) const {
    return !words[static_cast<std::size_t>(s)].empty();
  }

  // The codeword set of one state.
  const std::vector<BitWord>& state_words(int s) const {
    if (s < 0 || s >= num_states) throw ParameterError("Codebook: state out of range");
    return words[static_cast<std::size_t>(s)];
  }

  BitWord word(int s, int m) const {
    if (s < 0 || s >= num_states) throw ParameterError("Codebook: state out of range");
    if (m < 0 || m >= num_messages) throw ParameterError("Codebook: message out of range");
    if (!state_supported(s))
      throw ModelError("Codebook: state has probability zero under this context");
    return words[static_cast<std::size_t>(s)][static_cast<std::size_t>(m)];
  }
};

inline BitWord encode(const Codebook& cb, int s, int m) { return cb.word(s, m); }

namespace detail {

inline void check_collisions(const Codebook& cb) {
  std::unordered_set<std::uint32_t> seen;
  for (const auto& row : cb.words)
    for (const BitWord& w : row)
      if (!seen.insert(w.raw()).second)
        throw CodeDesignError(std::string(scheme_name(cb.scheme)) +
                              " codebook: two entries share a codeword");
}

// prefix followed by the index in natural (most significant first) bit order.
inline BitWord make_payload(const BitWord& prefix, int index, int index_bits) {
  BitWord p(0, prefix.length() + index_bits);
  for (int i = 0; i < prefix.length(); ++i)
    if (prefix.bit(i)) p.set_bit(i, true);
  for (int j = 0; j < index_bits; ++j)
    if ((index >> (index_bits - 1 - j)) & 1) p.set_bit(prefix.length() + j, true);
  return p;
}

}  // namespace detail

inline Codebook build_legacy_codebook(int num_states, int num_messages, int word_len) {
  const int sb = log2_exact(num_states, "state count");
  const int mb = log2_exact(num_messages, "message count");
  const LinearBlockCode code = build_shortened_code(sb + mb, word_len);
  Codebook cb{Scheme::kLegacy, num_states, num_messages, word_len, -1, {}};
  cb.words.assign(static_cast<std::size_t>(num_states), {});
  for (int s = 0; s < num_states; ++s) {
    auto& row = cb.words[static_cast<std::size_t>(s)];
    row.reserve(static_cast<std::size_t>(num_messages));
    const BitWord state_bits = detail::make_payload(BitWord(), s, sb);
    for (int m = 0; m < num_messages; ++m)
      row.push_back(code.encode(detail::make_payload(state_bits, m, mb)));
  }
  detail::check_collisions(cb);
  return cb;
}

// Same payload as legacy, encoded for word_len + log2(S) positions, then the
// systematic state-bit positions (the first log2(S)) are removed. The state
// is carried only by the parity that remains.
inline Codebook build_punctured_codebook(int num_states, int num_messages, int word_len) {
  const int sb = log2_exact(num_states, "state count");
  const int mb = log2_exact(num_messages, "message count");
  const LinearBlockCode code = build_shortened_code(sb + mb, word_len + sb);
  const std::uint32_t state_mask = (std::uint32_t{1} << sb) - 1;
  Codebook cb{Scheme::kPunctured, num_states, num_messages, word_len, -1, {}};
  cb.words.assign(static_cast<std::size_t>(num_states), {});
  for (int s = 0; s < num_states; ++s) {
    auto& row = cb.words[static_cast<std::size_t>(s)];
    row.reserve(static_cast<std::size_t>(num_messages));
    const BitWord state_bits = detail::make_payload(BitWord(), s, sb);
    for (int m = 0; m < num_messages; ++m) {
      const BitWord full = code.encode(detail::make_payload(state_bits, m, mb));
      row.push_back(erase_positions(full, state_mask));
    }
  }
  detail::check_collisions(cb);
  return cb;
}

namespace detail {

// Shared body of the two compressed schemes: prefix code per state, payload =
// prefix || message bits, one shortened code per payload length.
inline Codebook build_prefix_compressed(Scheme scheme, int num_states, int num_messages,
                                        int word_len, const HuffmanCode& prefix,
                                        std::span<const int> states, int context) {
  const int mb = log2_exact(num_messages, "message count");
  Codebook cb{scheme, num_states, num_messages, word_len, context, {}};
  cb.words.assign(static_cast<std::size_t>(num_states), {});
  std::map<int, LinearBlockCode> by_len;
  for (std::size_t idx = 0; idx < states.size(); ++idx) {
    const int s = states[idx];
    const BitWord& h = prefix.codes[idx];
    const int k = h.length() + mb;
    auto it = by_len.find(k);
    if (it == by_len.end()) it = by_len.emplace(k, build_shortened_code(k, word_len)).first;
    auto& row = cb.words[static_cast<std::size_t>(s)];
    row.reserve(static_cast<std::size_t>(num_messages));
    for (int m = 0; m < num_messages; ++m)
      row.push_back(it->second.encode(make_payload(h, m, mb)));
  }
  check_collisions(cb);
  return cb;
}

}  // namespace detail

// Prefix code over the stationary distribution; zero-probability states are
// kept and get the longest codes.
inline Codebook build_stationary_codebook(int num_states, int num_messages, int word_len,
                                          std::span<const double> stationary) {
  if (static_cast<int>(stationary.size()) != num_states)
    throw ParameterError("build_stationary_codebook: distribution size mismatch");
  const HuffmanCode h = huffman_build(stationary);
  std::vector<int> states(static_cast<std::size_t>(num_states));
  for (int s = 0; s < num_states; ++s) states[static_cast<std::size_t>(s)] = s;
  return detail::build_prefix_compressed(Scheme::kStationary, num_states, num_messages,
                                         word_len, h, states, -1);
}

// Prefix code over one transition row, support only. States the row cannot
// reach have no codewords; encoding them raises a model error.
inline Codebook build_conditional_codebook(int num_states, int num_messages, int word_len,
                                           const TransitionMatrix& t, int context) {
  if (t.size() != num_states)
    throw ParameterError("build_conditional_codebook: matrix size mismatch");
  if (context < 0 || context >= num_states)
    throw ParameterError("build_conditional_codebook: context out of range");
  std::vector<int> support;
  std::vector<double> probs;
  for (int s = 0; s < num_states; ++s) {
    const double p = t.at(context, s);
    if (p > 0.0) {
      support.push_back(s);
      probs.push_back(p);
    }
  }
  const HuffmanCode h = huffman_build(probs);
  return detail::build_prefix_compressed(Scheme::kConditional, num_states, num_messages,
                                         word_len, h, support, context);
}

inline std::vector<Codebook> build_conditional_codebooks(int num_states, int num_messages,
                                                         int word_len,
                                                         const TransitionMatrix& t) {
  std::vector<Codebook> out;
  out.reserve(static_cast<std::size_t>(num_states));
  for (int c = 0; c < num_states; ++c)
    out.push_back(build_conditional_codebook(num_states, num_messages, word_len, t, c));
  return out;
}

inline Codebook codebook_from_words(Scheme scheme, int num_states, int num_messages,
                                    int word_len, std::vector<std::vector<BitWord>> words) {
  if (static_cast<int>(words.size()) != num_states)
    throw ParameterError("codebook_from_words: row count mismatch");
  for (const auto& row : words) {
    if (!row.empty() && static_cast<int>(row.size()) != num_messages)
      throw ParameterError("codebook_from_words: row size mismatch");
    for (const BitWord& w : row)
      if (w.length() != word_len)
        throw ParameterError("codebook_from_words: word length mismatch");
  }
  Codebook cb{scheme, num_states, num_messages, word_len, -1, std::move(words)};
  detail::check_collisions(cb);
  return cb;
}

// One-stop builder. The stationary scheme needs the distribution; the
// conditional scheme needs the transition matrix and the conditioning state.
inline Codebook build_codebook(Scheme scheme, int num_states, int num_messages, int word_len,
                               std::span<const double> stationary = {},
                               const TransitionMatrix* transition = nullptr,
                               int context = -1) {
  switch (scheme) {
    case Scheme::kLegacy:
      return build_legacy_codebook(num_states, num_messages, word_len);
    case Scheme::kPunctured:
      return build_punctured_codebook(num_states, num_messages, word_len);
    case Scheme::kStationary:
      if (stationary.empty())
        throw ParameterError("build_codebook: stationary scheme needs a distribution");
      return build_stationary_codebook(num_states, num_messages, word_len, stationary);
    case Scheme::kConditional:
      if (transition == nullptr || context < 0)
        throw ParameterError("build_codebook: conditional scheme needs a matrix and context");
      return build_conditional_codebook(num_states, num_messages, word_len, *transition,
                                        context);
  }
  throw ParameterError("build_codebook: unknown scheme");
}

inline void dump_codebook_csv(const Codebook& cb, std::ostream& os) {
  os << "state,message,codeword_bits\n";
  for (int s = 0; s < cb.num_states; ++s) {
    if (!cb.state_supported(s)) continue;
    for (int m = 0; m < cb.num_messages; ++m)
      os << s << ',' << m << ',' << cb.word(s, m).to_string() << '\n';
  }
}

}  // namespace hmcode
