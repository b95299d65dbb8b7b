#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hmcode/errors.hpp"
#include "hmcode/rng.hpp"

namespace hmcode {

// Row-stochastic S x S matrix. Every constructor validates row sums (1e-12)
// and non-negativity.
class TransitionMatrix {
public:
  static TransitionMatrix from_flat(int size, std::vector<double> entries) {
    if (size <= 0) throw ParameterError("TransitionMatrix: size must be positive");
    if (entries.size() != static_cast<std::size_t>(size) * static_cast<std::size_t>(size))
      throw ParameterError("TransitionMatrix: entry count does not match size");
    TransitionMatrix t;
    t.size_ = size;
    t.p_ = std::move(entries);
    t.validate();
    return t;
  }

  static TransitionMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const int s = static_cast<int>(rows.size());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(s) * static_cast<std::size_t>(s));
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != s)
        throw ParameterError("TransitionMatrix: ragged rows");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return from_flat(s, std::move(flat));
  }

  static TransitionMatrix uniform(int size) {
    if (size <= 0) throw ParameterError("TransitionMatrix: size must be positive");
    return from_flat(size, std::vector<double>(
                               static_cast<std::size_t>(size) * static_cast<std::size_t>(size),
                               1.0 / size));
  }

  int size() const { return size_; }

  double at(int i, int j) const {
    return p_[static_cast<std::size_t>(i) * static_cast<std::size_t>(size_) +
              static_cast<std::size_t>(j)];
  }

  std::span<const double> row(int i) const {
    return std::span<const double>(p_).subspan(
        static_cast<std::size_t>(i) * static_cast<std::size_t>(size_),
        static_cast<std::size_t>(size_));
  }

  // Fraction of nonzero entries.
  double density() const {
    std::size_t nz = 0;
    for (double v : p_)
      if (v != 0.0) ++nz;
    return static_cast<double>(nz) / static_cast<double>(p_.size());
  }

  // One row per line, space-separated decimals; round-trips bit-exactly.
  void write_text(std::ostream& os) const {
    os.precision(17);
    for (int i = 0; i < size_; ++i) {
      for (int j = 0; j < size_; ++j) {
        if (j) os << ' ';
        os << at(i, j);
      }
      os << '\n';
    }
  }

  // Reads exactly as many rows as the first row has entries; trailing stream
  // content is left unread.
  static TransitionMatrix read_text(std::istream& is) {
    auto next_row = [&is]() {
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        return row;
      }
      return std::vector<double>{};
    };
    std::vector<std::vector<double>> rows;
    rows.push_back(next_row());
    if (rows.front().empty())
      throw ParameterError("TransitionMatrix: empty text input");
    const std::size_t size = rows.front().size();
    while (rows.size() < size) {
      rows.push_back(next_row());
      if (rows.back().empty())
        throw ParameterError("TransitionMatrix: truncated text input");
    }
    return from_rows(rows);
  }

private:
  TransitionMatrix() = default;

  void validate() const {
    for (int i = 0; i < size_; ++i) {
      double sum = 0.0;
      for (int j = 0; j < size_; ++j) {
        const double v = at(i, j);
        if (v < 0.0) throw ParameterError("TransitionMatrix: negative entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw ParameterError("TransitionMatrix: row does not sum to 1");
    }
  }

  int size_ = 0;
  std::vector<double> p_;
};

// True when the directed graph of nonzero entries has a single closed
// communicating class that is reachable from every state.
inline bool has_unique_closed_class(const TransitionMatrix& t) {
  const int s = t.size();
  // reach[i][j]: j reachable from i (including i itself).
  std::vector<std::vector<char>> reach(s, std::vector<char>(s, 0));
  for (int i = 0; i < s; ++i) {
    std::vector<int> stack{i};
    reach[i][i] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < s; ++v) {
        if (t.at(u, v) != 0.0 && !reach[i][v]) {
          reach[i][v] = 1;
          stack.push_back(v);
        }
      }
    }
  }
  // Recurrent: every reachable state can reach back.
  std::vector<char> recurrent(s, 1);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      if (reach[i][j] && !reach[j][i]) recurrent[i] = 0;
  int first = -1;
  for (int i = 0; i < s; ++i)
    if (recurrent[i]) {
      first = i;
      break;
    }
  if (first < 0) return false;
  // One class iff all recurrent states communicate. Every state then reaches
  // it, since any walk ends up in some closed class.
  for (int i = first + 1; i < s; ++i)
    if (recurrent[i] && !(reach[first][i] && reach[i][first])) return false;
  return true;
}

// Random sparse row-stochastic matrix: round(density*S) nonzeros per row at
// uniform positions, magnitudes uniform(0,1] then normalized. Regenerated
// wholesale until the closed-class check passes (up to 1000 attempts).
inline TransitionMatrix generate_sparse_transition(int size, double density, Rng& rng) {
  if (size <= 0) throw ParameterError("generate_sparse_transition: size must be positive");
  if (density < 1.0 / size || density > 1.0)
    throw ParameterError("generate_sparse_transition: density must be in [1/S, 1]");
  const int per_row = static_cast<int>(std::lround(density * size));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> flat(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), 0.0);
    std::vector<int> cols(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) cols[static_cast<std::size_t>(j)] = j;
      // Partial Fisher-Yates: first per_row entries are the nonzero columns.
      for (int j = 0; j < per_row; ++j) {
        const int k = j + rng.uniform_int(size - j);
        std::swap(cols[static_cast<std::size_t>(j)], cols[static_cast<std::size_t>(k)]);
      }
      double sum = 0.0;
      std::vector<double> mags(static_cast<std::size_t>(per_row));
      for (int j = 0; j < per_row; ++j) {
        mags[static_cast<std::size_t>(j)] = rng.uniform_open01();
        sum += mags[static_cast<std::size_t>(j)];
      }
      for (int j = 0; j < per_row; ++j)
        flat[static_cast<std::size_t>(i) * static_cast<std::size_t>(size) +
             static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])] =
            mags[static_cast<std::size_t>(j)] / sum;
    }
    TransitionMatrix t = TransitionMatrix::from_flat(size, std::move(flat));
    if (has_unique_closed_class(t)) return t;
  }
  throw ModelError("generate_sparse_transition: no ergodic matrix after 1000 attempts");
}

// Stationary distribution: solves pi T = pi, sum(pi) = 1 by Gaussian
// elimination, then verifies the residual bound max|pi T - pi| < 1e-10.
inline std::vector<double> stationary_distribution(const TransitionMatrix& t) {
  if (!has_unique_closed_class(t))
    throw ModelError("stationary_distribution: chain is not ergodic");
  const int s = t.size();
  // Unknown x solves A x = b with A = [ (T^t - I) rows 0..s-2 ; ones ].
  std::vector<std::vector<double>> a(s, std::vector<double>(s + 1, 0.0));
  for (int i = 0; i + 1 < s; ++i) {
    for (int j = 0; j < s; ++j) a[i][j] = t.at(j, i);
    a[i][i] -= 1.0;
  }
  for (int j = 0; j < s; ++j) a[s - 1][j] = 1.0;
  a[s - 1][s] = 1.0;
  for (int col = 0; col < s; ++col) {
    int pivot = col;
    for (int r = col + 1; r < s; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    if (a[col][col] == 0.0) continue;
    for (int r = 0; r < s; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c <= s; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> pi(static_cast<std::size_t>(s), 0.0);
  for (int i = 0; i < s; ++i)
    pi[static_cast<std::size_t>(i)] = a[i][i] != 0.0 ? a[i][s] / a[i][i] : 0.0;
  for (double& v : pi)
    if (v < 0.0) v = 0.0;
  double total = 0.0;
  for (double v : pi) total += v;
  if (total <= 0.0) throw NumericError("stationary_distribution: degenerate solve");
  for (double& v : pi) v /= total;

  auto residual = [&](const std::vector<double>& x) {
    double worst = 0.0;
    for (int j = 0; j < s; ++j) {
      double acc = 0.0;
      for (int i = 0; i < s; ++i) acc += x[static_cast<std::size_t>(i)] * t.at(i, j);
      worst = std::max(worst, std::abs(acc - x[static_cast<std::size_t>(j)]));
    }
    return worst;
  };
  // Polish with lazy-chain power steps if the direct solve fell short.
  int iter = 0;
  while (residual(pi) >= 1e-10 && iter < 100000) {
    std::vector<double> nxt(static_cast<std::size_t>(s), 0.0);
    for (int i = 0; i < s; ++i) {
      const double w = pi[static_cast<std::size_t>(i)];
      if (w == 0.0) continue;
      nxt[static_cast<std::size_t>(i)] += 0.5 * w;
      for (int j = 0; j < s; ++j) nxt[static_cast<std::size_t>(j)] += 0.5 * w * t.at(i, j);
    }
    double tot = 0.0;
    for (double v : nxt) tot += v;
    for (double& v : nxt) v /= tot;
    pi = std::move(nxt);
    ++iter;
  }
  if (residual(pi) >= 1e-10)
    throw NumericError("stationary_distribution: residual bound not met");
  return pi;
}

// Convex combination (1 - t/t_total) T1 + (t/t_total) T2.
inline TransitionMatrix blend(const TransitionMatrix& t1, const TransitionMatrix& t2,
                              long long t, long long t_total) {
  if (t1.size() != t2.size()) throw ParameterError("blend: size mismatch");
  if (t_total <= 0 || t < 0 || t > t_total)
    throw ParameterError("blend: t must be in [0, t_total]");
  const double lam = static_cast<double>(t) / static_cast<double>(t_total);
  const int s = t1.size();
  std::vector<double> flat(static_cast<std::size_t>(s) * static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      flat[static_cast<std::size_t>(i) * static_cast<std::size_t>(s) +
           static_cast<std::size_t>(j)] = (1.0 - lam) * t1.at(i, j) + lam * t2.at(i, j);
  return TransitionMatrix::from_flat(s, std::move(flat));
}

}  // namespace hmcode
