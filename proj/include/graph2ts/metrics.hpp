#pragma once

// Evaluation metrics for a (real, synthetic) pair of window sets: marginal
// distances on pooled values, temporal structure, prototype and coverage
// scores from exact nearest-neighbour search, and tail statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph2ts/dataset.hpp"
#include "graph2ts/quantile_graph.hpp"

namespace graph2ts {

struct TailStats {
  double mean = 0.0;
  double std = 0.0;
  double excess_kurtosis = 0.0;
  double q_low = 0.0;   // 0.1% quantile
  double q_high = 0.0;  // 99.9% quantile
};

struct MetricsReport {
  double wasserstein = 0.0;
  double ks = 0.0;
  double acf_mae = 0.0;
  double psd_l2 = 0.0;
  double proto_err_avg = 0.0;
  double proto_err_med = 0.0;
  double mdr = 0.0;
  std::map<double, double> coverage;  // q -> Coverage@tau_q
  TailStats real_x, real_dx, synth_x, synth_dx;
  std::size_t n_real = 0;
  std::size_t n_synth = 0;
};

namespace detail {

inline void require_nonempty(const WindowSet& s, const char* fn) {
  if (s.empty()) throw std::invalid_argument(std::string(fn) + ": empty window set");
}

inline std::vector<double> pooled_sorted(const WindowSet& s) {
  std::vector<double> v;
  for (const auto& w : s) v.insert(v.end(), w.values.begin(), w.values.end());
  std::sort(v.begin(), v.end());
  return v;
}

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("euclidean: length mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// W1 between the pooled empirical value distributions: ∫ |F_real − F_synth| dv.
inline double wasserstein1_pooled(const WindowSet& real, const WindowSet& synth) {
  detail::require_nonempty(real, "wasserstein1_pooled");
  detail::require_nonempty(synth, "wasserstein1_pooled");
  const auto a = detail::pooled_sorted(real);
  const auto b = detail::pooled_sorted(synth);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  double w = 0.0;
  while (i < a.size() || j < b.size()) {
    const double next = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    w += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    while (i < a.size() && a[i] == next) ++i;
    while (j < b.size() && b[j] == next) ++j;
    prev = next;
  }
  return w;
}

/// sup_v |F_real(v) − F_synth(v)| over pooled values.
inline double ks_pooled(const WindowSet& real, const WindowSet& synth) {
  detail::require_nonempty(real, "ks_pooled");
  detail::require_nonempty(synth, "ks_pooled");
  const auto a = detail::pooled_sorted(real);
  const auto b = detail::pooled_sorted(synth);
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    const double v = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) -
                             static_cast<double>(j) / static_cast<double>(b.size())));
  }
  return d;
}

/// Biased autocorrelation at lags 1..L. Returns an empty vector for a
/// zero-variance window.
inline std::vector<double> acf(const std::vector<double>& x, std::size_t max_lag) {
  const std::size_t n = x.size();
  if (max_lag >= n) throw std::invalid_argument("acf: max lag must be below the window length");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0;
  for (double v : x) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) return {};
  std::vector<double> out(max_lag);
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (x[t] - mean) * (x[t + lag] - mean);
    out[lag - 1] = s / denom;
  }
  return out;
}

/// Mean ACF curve over a set; zero-variance windows are skipped and counted.
inline std::vector<double> mean_acf(const WindowSet& set, std::size_t max_lag, std::size_t* skipped = nullptr) {
  detail::require_nonempty(set, "mean_acf");
  std::vector<double> acc(max_lag, 0.0);
  std::size_t used = 0, skip = 0;
  for (const auto& w : set) {
    auto r = acf(w.values, max_lag);
    if (r.empty()) {
      ++skip;
      continue;
    }
    for (std::size_t l = 0; l < max_lag; ++l) acc[l] += r[l];
    ++used;
  }
  if (skipped) *skipped = skip;
  if (used == 0) throw std::invalid_argument("mean_acf: every window has zero variance");
  for (double& v : acc) v /= static_cast<double>(used);
  return acc;
}

inline std::size_t default_max_lag(const WindowSet& set) { return set.empty() ? 0 : set.front().size() / 2; }

inline double acf_mae(const WindowSet& real, const WindowSet& synth, std::size_t max_lag) {
  const auto a = mean_acf(real, max_lag);
  const auto b = mean_acf(synth, max_lag);
  double s = 0.0;
  for (std::size_t l = 0; l < max_lag; ++l) s += std::abs(a[l] - b[l]);
  return s / static_cast<double>(max_lag);
}

/// One-sided periodogram of a single Hann-windowed segment spanning the whole
/// window, scaled by the window power Σw². Interior bins are doubled.
/// Returns floor(T/2)+1 bins.
inline std::vector<double> periodogram(const std::vector<double>& x) {
  constexpr double kPi = 3.14159265358979323846;
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("periodogram: window too short");
  std::vector<double> w(n);
  double wpow = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    w[t] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(t) / static_cast<double>(n));
    wpow += w[t] * w[t];
  }
  const std::size_t bins = n / 2 + 1;
  std::vector<double> p(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = 2.0 * kPi * static_cast<double>(k * t % n) / static_cast<double>(n);
      re += w[t] * x[t] * std::cos(ang);
      im -= w[t] * x[t] * std::sin(ang);
    }
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    p[k] = (edge ? 1.0 : 2.0) * (re * re + im * im) / wpow;
  }
  return p;
}

inline std::vector<double> mean_psd(const WindowSet& set) {
  detail::require_nonempty(set, "mean_psd");
  const std::size_t T = set.front().size();
  std::vector<double> acc(T / 2 + 1, 0.0);
  for (const auto& w : set) {
    if (w.size() != T) throw std::invalid_argument("mean_psd: windows must share one length");
    auto p = periodogram(w.values);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
  }
  for (double& v : acc) v /= static_cast<double>(set.size());
  return acc;
}

inline double psd_l2(const WindowSet& real, const WindowSet& synth) {
  const auto a = mean_psd(real);
  const auto b = mean_psd(synth);
  if (a.size() != b.size()) throw std::invalid_argument("psd_l2: window lengths differ");
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) ss += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(ss);
}

/// Distance from each query window to its nearest neighbour in `pool`.
/// With exclude_self, pool index i is skipped for query i (pool == queries).
inline std::vector<double> nearest_distances(const WindowSet& queries, const WindowSet& pool, bool exclude_self) {
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (exclude_self && i == j) continue;
      best = std::min(best, detail::euclidean(queries[i].values, pool[j].values));
    }
    out[i] = best;
  }
  return out;
}

struct ProtoErr {
  double avg = 0.0;
  double med = 0.0;
};

inline ProtoErr proto_err(const WindowSet& real, const WindowSet& synth) {
  detail::require_nonempty(real, "proto_err");
  detail::require_nonempty(synth, "proto_err");
  const auto d = nearest_distances(real, synth, false);
  return {std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size()), detail::median(d)};
}

/// Index of the element minimizing summed distance to all members; ties to the lowest index.
inline std::size_t medoid_index(const WindowSet& set) {
  detail::require_nonempty(set, "medoid");
  std::size_t best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < set.size(); ++j) s += detail::euclidean(set[i].values, set[j].values);
    if (s < best_sum) {
      best_sum = s;
      best = i;
    }
  }
  return best;
}

/// ‖m_real − m_synth‖ / mean_x ‖x − m_real‖ over the real set.
inline double mdr(const WindowSet& real, const WindowSet& synth) {
  if (real.size() < 2) throw std::invalid_argument("mdr: need at least two real windows");
  detail::require_nonempty(synth, "mdr");
  const auto& mr = real[medoid_index(real)].values;
  const auto& ms = synth[medoid_index(synth)].values;
  double spread = 0.0;
  for (const auto& w : real) spread += detail::euclidean(w.values, mr);
  spread /= static_cast<double>(real.size());
  if (!(spread > 0.0)) throw std::invalid_argument("mdr: zero denominator (all real windows identical)");
  return detail::euclidean(mr, ms) / spread;
}

/// q-quantile of real-to-real nearest-neighbour distances (self excluded).
inline double coverage_threshold(const WindowSet& real, double q) {
  if (real.size() < 2) throw std::invalid_argument("coverage: need at least two real windows");
  auto d = nearest_distances(real, real, true);
  std::sort(d.begin(), d.end());
  return sorted_quantile(d, q);
}

/// Fraction of real windows whose nearest synthetic neighbour lies within tau_q.
inline double coverage(const WindowSet& real, const WindowSet& synth, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("coverage: q must lie in [0,1]");
  detail::require_nonempty(synth, "coverage");
  const double tau = coverage_threshold(real, q);
  const auto d = nearest_distances(real, synth, false);
  const auto hit = std::count_if(d.begin(), d.end(), [tau](double v) { return v <= tau; });
  return static_cast<double>(hit) / static_cast<double>(real.size());
}

/// Pooled mean, population std, Fisher excess kurtosis and (0.1%, 99.9%) quantiles.
inline TailStats tail_stats_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("tail_stats: no values");
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw std::invalid_argument("tail_stats: zero variance");
  std::sort(v.begin(), v.end());
  return {mean, std::sqrt(m2), m4 / (m2 * m2) - 3.0, sorted_quantile(v, 0.001), sorted_quantile(v, 0.999)};
}

struct TailPair {
  TailStats x;
  TailStats dx;
};

/// Statistics of raw values and of within-window first differences.
inline TailPair tail_stats(const WindowSet& windows) {
  detail::require_nonempty(windows, "tail_stats");
  std::vector<double> xs, dxs;
  for (const auto& w : windows) {
    xs.insert(xs.end(), w.values.begin(), w.values.end());
    for (std::size_t t = 1; t < w.size(); ++t) dxs.push_back(w.values[t] - w.values[t - 1]);
  }
  return {tail_stats_of(std::move(xs)), tail_stats_of(std::move(dxs))};
}

struct VarianceDecomposition {
  double total = 0.0;    // Var(X)
  double between = 0.0;  // Var(E[X|G])
  double within = 0.0;   // E[Var(X|G)]
  double rhs = 0.0;      // between + within
  double rel_gap = 0.0;  // |total − rhs| / total
};

/// Law of total variance on labelled samples, population convention with
/// groups weighted by their sample share.
inline VarianceDecomposition variance_decomposition_check(const std::vector<double>& x, const std::vector<int>& group) {
  if (x.size() != group.size() || x.empty()) throw std::invalid_argument("variance_decomposition_check: bad input");
  std::map<int, std::vector<double>> by;
  for (std::size_t i = 0; i < x.size(); ++i) by[group[i]].push_back(x[i]);
  for (const auto& [g, v] : by) {
    if (v.size() < 2) throw std::invalid_argument("variance_decomposition_check: group with fewer than two samples");
  }
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  VarianceDecomposition out;
  for (double v : x) out.total += (v - mean) * (v - mean);
  out.total /= n;
  for (const auto& [g, v] : by) {
    const double ng = static_cast<double>(v.size());
    const double gm = std::accumulate(v.begin(), v.end(), 0.0) / ng;
    double gv = 0.0;
    for (double e : v) gv += (e - gm) * (e - gm);
    gv /= ng;
    out.between += ng / n * (gm - mean) * (gm - mean);
    out.within += ng / n * gv;
  }
  out.rhs = out.between + out.within;
  if (!(out.total > 0.0)) throw std::invalid_argument("variance_decomposition_check: zero total variance");
  out.rel_gap = std::abs(out.total - out.rhs) / out.total;
  return out;
}

/// Seeded subsample of the larger set down to the size of the smaller.
inline void balance_sizes(WindowSet& real, WindowSet& synth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto shrink = [&rng](WindowSet& s, std::size_t n) {
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    WindowSet out;
    out.reserve(n);
    for (auto i : idx) out.push_back(std::move(s[i]));
    s = std::move(out);
  };
  if (real.size() > synth.size()) shrink(real, synth.size());
  else if (synth.size() > real.size()) shrink(synth, real.size());
}

struct EvalOptions {
  std::size_t max_lag = 0;  // 0 = T/2
  std::vector<double> coverage_q{0.5, 0.9};
  std::uint64_t seed = 0;   // for balanced subsampling
};

inline MetricsReport evaluate(WindowSet real, WindowSet synth, const EvalOptions& opt = {}) {
  detail::require_nonempty(real, "evaluate");
  detail::require_nonempty(synth, "evaluate");
  balance_sizes(real, synth, opt.seed);
  MetricsReport r;
  r.n_real = real.size();
  r.n_synth = synth.size();
  r.wasserstein = wasserstein1_pooled(real, synth);
  r.ks = ks_pooled(real, synth);
  r.acf_mae = acf_mae(real, synth, opt.max_lag ? opt.max_lag : default_max_lag(real));
  r.psd_l2 = psd_l2(real, synth);
  const auto pe = proto_err(real, synth);
  r.proto_err_avg = pe.avg;
  r.proto_err_med = pe.med;
  r.mdr = mdr(real, synth);

  // one pass of nearest-neighbour distances serves every coverage level
  auto rr = nearest_distances(real, real, true);
  std::sort(rr.begin(), rr.end());
  const auto rs = nearest_distances(real, synth, false);
  for (double q : opt.coverage_q) {
    const double tau = sorted_quantile(rr, q);
    const auto hit = std::count_if(rs.begin(), rs.end(), [tau](double v) { return v <= tau; });
    r.coverage[q] = static_cast<double>(hit) / static_cast<double>(real.size());
  }
  const auto rt = tail_stats(real);
  const auto st = tail_stats(synth);
  r.real_x = rt.x;
  r.real_dx = rt.dx;
  r.synth_x = st.x;
  r.synth_dx = st.dx;
  return r;
}

inline std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string coverage_key(double q) {
  std::ostringstream os;
  os << "coverage_" << q;
  return os.str();
}

inline void append_tail(std::ostringstream& os, const std::string& prefix, const TailStats& s) {
  os << prefix << "_mean=" << format_real(s.mean) << "\n"
     << prefix << "_std=" << format_real(s.std) << "\n"
     << prefix << "_excess_kurtosis=" << format_real(s.excess_kurtosis) << "\n"
     << prefix << "_q001=" << format_real(s.q_low) << "\n"
     << prefix << "_q999=" << format_real(s.q_high) << "\n";
}

inline constexpr const char* kMetricsHeader = "# graph2ts-metrics v1";

/// `key=value` document, one metric per line, behind a version header.
inline std::string to_text(const MetricsReport& r) {
  std::ostringstream os;
  os << kMetricsHeader << "\n";
  os << "n_real=" << r.n_real << "\n" << "n_synth=" << r.n_synth << "\n";
  os << "wasserstein=" << format_real(r.wasserstein) << "\n"
     << "ks=" << format_real(r.ks) << "\n"
     << "acf_mae=" << format_real(r.acf_mae) << "\n"
     << "psd_l2=" << format_real(r.psd_l2) << "\n"
     << "proto_err_avg=" << format_real(r.proto_err_avg) << "\n"
     << "proto_err_med=" << format_real(r.proto_err_med) << "\n"
     << "mdr=" << format_real(r.mdr) << "\n";
  for (const auto& [q, v] : r.coverage) os << coverage_key(q) << "=" << format_real(v) << "\n";
  append_tail(os, "real_x", r.real_x);
  append_tail(os, "real_dx", r.real_dx);
  append_tail(os, "synth_x", r.synth_x);
  append_tail(os, "synth_dx", r.synth_dx);
  return os.str();
}

/// Parses a metrics document back into key → value.
inline std::map<std::string, double> parse_metrics_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) {
    throw std::runtime_error("parse_metrics_text: missing or mismatched header");
  }
  std::map<std::string, double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("parse_metrics_text: malformed line " + line);
    out[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return out;
}

}  // namespace graph2ts
