#pragma once

#include <cmath>
#include <cstdint>
#include <queue>
#include <span>
#include <tuple>
#include <vector>

#include "hmcode/bitword.hpp"
#include "hmcode/errors.hpp"

namespace hmcode {

struct HuffmanCode {
  std::vector<BitWord> codes;        // per symbol, first branch bit at position 0
  std::vector<double> distribution;  // what the code was built from

  int length(int symbol) const { return codes[static_cast<std::size_t>(symbol)].length(); }

  double expected_length() const {
    double e = 0.0;
    for (std::size_t i = 0; i < codes.size(); ++i) e += distribution[i] * codes[i].length();
    return e;
  }
};

// Deterministic Huffman code. Ties are broken by the smallest leaf index in a
// subtree, both when ordering the merge queue and when assigning the 0 branch,
// so identical inputs always yield identical codes.
inline HuffmanCode huffman_build(std::span<const double> dist) {
  const int n = static_cast<int>(dist.size());
  if (n == 0) throw ParameterError("huffman_build: empty distribution");
  double total = 0.0;
  for (double p : dist) {
    if (p < 0.0) throw ParameterError("huffman_build: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ParameterError("huffman_build: distribution does not sum to 1");
  HuffmanCode out;
  out.distribution.assign(dist.begin(), dist.end());
  if (n == 1) {
    out.codes.assign(1, BitWord(0, 0));
    return out;
  }

  struct Node {
    double p;
    int min_leaf;
    int zero_child = -1;
    int one_child = -1;
  };
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) nodes.push_back(Node{dist[static_cast<std::size_t>(i)], i});

  auto after = [&nodes](int a, int b) {
    if (nodes[static_cast<std::size_t>(a)].p != nodes[static_cast<std::size_t>(b)].p)
      return nodes[static_cast<std::size_t>(a)].p > nodes[static_cast<std::size_t>(b)].p;
    return nodes[static_cast<std::size_t>(a)].min_leaf > nodes[static_cast<std::size_t>(b)].min_leaf;
  };
  std::priority_queue<int, std::vector<int>, decltype(after)> heap(after);
  for (int i = 0; i < n; ++i) heap.push(i);

  while (heap.size() > 1) {
    int a = heap.top();
    heap.pop();
    int b = heap.top();
    heap.pop();
    if (nodes[static_cast<std::size_t>(b)].min_leaf < nodes[static_cast<std::size_t>(a)].min_leaf)
      std::swap(a, b);
    nodes.push_back(Node{nodes[static_cast<std::size_t>(a)].p + nodes[static_cast<std::size_t>(b)].p,
                         nodes[static_cast<std::size_t>(a)].min_leaf, a, b});
    heap.push(static_cast<int>(nodes.size()) - 1);
  }

  out.codes.assign(static_cast<std::size_t>(n), BitWord());
  std::vector<std::tuple<int, std::uint32_t, int>> stack;
  stack.emplace_back(heap.top(), 0u, 0);
  while (!stack.empty()) {
    const auto [id, bits, depth] = stack.back();
    stack.pop_back();
    const Node& node = nodes[static_cast<std::size_t>(id)];
    if (node.zero_child < 0) {
      out.codes[static_cast<std::size_t>(id)] = BitWord(bits, depth);
      continue;
    }
    if (depth >= 32) throw ParameterError("huffman_build: code length exceeds 32 bits");
    stack.emplace_back(node.zero_child, bits, depth + 1);
    stack.emplace_back(node.one_child, bits | (std::uint32_t{1} << depth), depth + 1);
  }
  return out;
}

}  // namespace hmcode
