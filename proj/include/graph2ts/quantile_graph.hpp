#pragma once

// Quantile-state discretization and first-order transition graphs.
//
// States are numbered 1..Q. Bin k is [b_{k-1}, b_k) except the last, which is
// closed on the right. Values outside [b_0, b_Q] clip into the end bins.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph2ts/dataset.hpp"

namespace graph2ts {

struct QuantileBoundaries {
  std::vector<double> edges;  // b_0 .. b_Q, strictly increasing
  std::size_t perturbed = 0;  // edges nudged apart because ties collapsed them

  std::size_t states() const { return edges.empty() ? 0 : edges.size() - 1; }
};

struct StateSequence {
  std::vector<int> states;
};

struct QuantileGraph {
  std::size_t Q = 0;
  std::vector<double> P;  // row-major Q x Q

  double operator()(std::size_t from, std::size_t to) const { return P[from * Q + to]; }
  bool operator==(const QuantileGraph&) const = default;
};

/// Linear-interpolation quantile of already sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("sorted_quantile: empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline QuantileBoundaries fit_boundaries(std::vector<double> values, std::size_t Q) {
  if (Q < 2) throw std::invalid_argument("fit_boundaries: Q must be at least 2");
  std::sort(values.begin(), values.end());
  const auto distinct = static_cast<std::size_t>(
      std::distance(values.begin(), std::unique(values.begin(), values.end())));
  if (distinct < Q) {
    throw std::invalid_argument("fit_boundaries: need at least " + std::to_string(Q) +
                                " distinct values, got " + std::to_string(distinct));
  }
  // re-sort the full multiset; unique() above reordered the tail
  std::sort(values.begin(), values.end());

  QuantileBoundaries b;
  b.edges.resize(Q + 1);
  for (std::size_t k = 0; k <= Q; ++k) {
    b.edges[k] = sorted_quantile(values, static_cast<double>(k) / static_cast<double>(Q));
  }
  for (std::size_t k = 1; k <= Q; ++k) {
    if (!(b.edges[k] > b.edges[k - 1])) {
      b.edges[k] = std::nextafter(b.edges[k - 1], std::numeric_limits<double>::infinity());
      ++b.perturbed;
    }
  }
  return b;
}

inline QuantileBoundaries fit_boundaries(const WindowSet& train, std::size_t Q) {
  std::vector<double> pooled;
  for (const auto& w : train) pooled.insert(pooled.end(), w.values.begin(), w.values.end());
  return fit_boundaries(std::move(pooled), Q);
}

inline int state_of(double x, const QuantileBoundaries& bounds) {
  // number of interior edges b_1..b_{Q-1} that are <= x
  const auto first = bounds.edges.begin() + 1;
  const auto last = bounds.edges.end() - 1;
  return 1 + static_cast<int>(std::upper_bound(first, last, x) - first);
}

inline StateSequence discretize(const TimeSeriesWindow& window, const QuantileBoundaries& bounds) {
  if (bounds.edges.size() < 3) throw std::invalid_argument("discretize: need at least two states");
  StateSequence seq;
  seq.states.reserve(window.size());
  for (double x : window.values) seq.states.push_back(state_of(x, bounds));
  return seq;
}

/// Raw transition counts, row-major Q x Q.
inline std::vector<std::size_t> transition_counts(const StateSequence& seq, std::size_t Q) {
  if (seq.states.size() < 2) throw std::invalid_argument("transition_matrix: sequence too short");
  std::vector<std::size_t> counts(Q * Q, 0);
  for (std::size_t t = 0; t + 1 < seq.states.size(); ++t) {
    const int a = seq.states[t];
    const int b = seq.states[t + 1];
    if (a < 1 || b < 1 || static_cast<std::size_t>(a) > Q || static_cast<std::size_t>(b) > Q) {
      throw std::invalid_argument("transition_matrix: state out of range at t=" + std::to_string(t));
    }
    ++counts[static_cast<std::size_t>(a - 1) * Q + static_cast<std::size_t>(b - 1)];
  }
  return counts;
}

/// Row-normalized transition counts. Rows of unvisited source states stay zero.
inline QuantileGraph transition_matrix(const StateSequence& seq, std::size_t Q) {
  const auto counts = transition_counts(seq, Q);
  QuantileGraph g{Q, std::vector<double>(Q * Q, 0.0)};
  for (std::size_t i = 0; i < Q; ++i) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < Q; ++j) row += counts[i * Q + j];
    if (row == 0) continue;
    for (std::size_t j = 0; j < Q; ++j) {
      g.P[i * Q + j] = static_cast<double>(counts[i * Q + j]) / static_cast<double>(row);
    }
  }
  return g;
}

inline QuantileGraph window_graph(const TimeSeriesWindow& window, const QuantileBoundaries& bounds) {
  return transition_matrix(discretize(window, bounds), bounds.states());
}

inline std::vector<double> flatten(const QuantileGraph& g) { return g.P; }

inline QuantileGraph reshape(const std::vector<double>& flat, std::size_t Q) {
  if (flat.size() != Q * Q) throw std::invalid_argument("reshape: expected Q^2 entries");
  return QuantileGraph{Q, flat};
}

inline QuantileGraph identity_graph(std::size_t Q) {
  if (Q < 1) throw std::invalid_argument("identity_graph: Q must be positive");
  QuantileGraph g{Q, std::vector<double>(Q * Q, 0.0)};
  for (std::size_t i = 0; i < Q; ++i) g.P[i * Q + i] = 1.0;
  return g;
}

/// Frobenius norm of the difference.
inline double graph_distance(const QuantileGraph& a, const QuantileGraph& b) {
  if (a.Q != b.Q || a.P.size() != b.P.size()) throw std::invalid_argument("graph_distance: dimension mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < a.P.size(); ++i) ss += (a.P[i] - b.P[i]) * (a.P[i] - b.P[i]);
  return std::sqrt(ss);
}

inline std::vector<std::vector<double>> flattened_graphs(const WindowSet& windows, const QuantileBoundaries& bounds) {
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(flatten(window_graph(w, bounds)));
  return out;
}

}  // namespace graph2ts
