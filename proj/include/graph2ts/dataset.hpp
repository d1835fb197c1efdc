#pragma once

// Series ingestion, windowing, z-score normalization, splitting and the
// synthetic corpora used for desk-scale experiments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace graph2ts {

struct RawSeries {
  std::vector<double> values;
  std::string source_id;
};

struct TimeSeriesWindow {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const TimeSeriesWindow&) const = default;
};

using WindowSet = std::vector<TimeSeriesWindow>;

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

struct DatasetSplit {
  WindowSet train;
  WindowSet eval;
  NormStats norm;
  std::size_t window_length = 0;
  std::size_t stride = 0;
  std::vector<std::size_t> train_index;  // positions in the unsplit window list
  std::vector<std::size_t> eval_index;
};

enum class SynthKind { sine_mix, ar1, heavy_tail };

inline SynthKind parse_synth_kind(std::string_view name) {
  if (name == "sine_mix") return SynthKind::sine_mix;
  if (name == "ar1") return SynthKind::ar1;
  if (name == "heavy_tail") return SynthKind::heavy_tail;
  throw std::invalid_argument("unknown synthetic corpus kind: " + std::string(name));
}

inline const char* to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::sine_mix: return "sine_mix";
    case SynthKind::ar1: return "ar1";
    case SynthKind::heavy_tail: return "heavy_tail";
  }
  return "?";
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  char delim = ' ';
  if (line.find(',') != std::string_view::npos) {
    delim = ',';
  } else if (line.find('\t') != std::string_view::npos) {
    delim = '\t';
  }
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(delim, pos);
    if (end == std::string_view::npos) end = line.size();
    std::string_view f = line.substr(pos, end - pos);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    // runs of spaces collapse when space is the delimiter
    if (!(delim == ' ' && f.empty())) fields.push_back(f);
    pos = end + 1;
  }
  return fields;
}

// Parses the whole field as a real; accepts "nan"/"inf" so they can be rejected
// with a row number instead of silently treated as headers.
inline bool parse_real(std::string_view field, double& out) {
  if (field.empty()) return false;
  std::string s(field);
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace detail

/// Reads one numeric column from a text file. Lines whose column does not
/// parse as a number are treated as headers and skipped; blank lines and
/// lines starting with '#' are ignored.
inline RawSeries load_series(const std::string& path, std::size_t column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_series: cannot open " + path);
  RawSeries series;
  series.source_id = path;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    auto fields = detail::split_fields(line);
    if (column >= fields.size()) continue;
    double v = 0.0;
    if (!detail::parse_real(fields[column], v)) continue;
    if (!std::isfinite(v)) {
      throw std::runtime_error("load_series: non-finite value at row " + std::to_string(row) +
                               " of " + path);
    }
    series.values.push_back(v);
  }
  if (series.values.empty()) throw std::runtime_error("load_series: no parseable rows in " + path);
  return series;
}

inline WindowSet make_windows(const RawSeries& series, std::size_t length, std::size_t stride) {
  if (length == 0 || stride == 0) throw std::invalid_argument("make_windows: T and stride must be positive");
  const auto& v = series.values;
  if (v.size() < length) {
    throw std::invalid_argument("make_windows: series of length " + std::to_string(v.size()) +
                                " is shorter than T=" + std::to_string(length));
  }
  WindowSet out;
  for (std::size_t start = 0; start + length <= v.size(); start += stride) {
    out.push_back(TimeSeriesWindow{{v.begin() + static_cast<std::ptrdiff_t>(start),
                                    v.begin() + static_cast<std::ptrdiff_t>(start + length)}});
  }
  return out;
}

/// Population mean/std over every value of every window.
inline NormStats fit_norm(const WindowSet& windows) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& w : windows) {
    for (double x : w.values) sum += x;
    n += w.size();
  }
  if (n == 0) throw std::invalid_argument("fit_norm: no values");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& w : windows) {
    for (double x : w.values) ss += (x - mean) * (x - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 0.0)) throw std::invalid_argument("fit_norm: pooled values have zero variance");
  return {mean, sd};
}

inline WindowSet apply_norm(const WindowSet& windows, const NormStats& norm) {
  WindowSet out = windows;
  for (auto& w : out) {
    for (double& x : w.values) x = (x - norm.mean) / norm.std;
  }
  return out;
}

inline std::pair<WindowSet, NormStats> zscore_fit_apply(const WindowSet& windows) {
  NormStats norm = fit_norm(windows);
  return {apply_norm(windows, norm), norm};
}

/// Seeded shuffle, then the first ceil((1-f)N) windows train and the rest
/// eval. Normalization is fitted on train only and applied to both.
inline DatasetSplit split(const WindowSet& windows, double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw std::invalid_argument("split: eval_fraction must lie in (0,1)");
  }
  const std::size_t n = windows.size();
  const auto n_train =
      static_cast<std::size_t>(std::ceil((1.0 - eval_fraction) * static_cast<double>(n) - 1e-9));
  if (n_train == 0 || n_train >= n) {
    throw std::invalid_argument("split: degenerate split sizes for " + std::to_string(n) + " windows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit out;
  out.window_length = windows.front().size();
  out.train_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.eval_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  WindowSet train, eval;
  for (auto i : out.train_index) train.push_back(windows[i]);
  for (auto i : out.eval_index) eval.push_back(windows[i]);
  out.norm = fit_norm(train);
  out.train = apply_norm(train, out.norm);
  out.eval = apply_norm(eval, out.norm);
  return out;
}

/// Synthetic corpora:
///   sine_mix   - a·sin(2πf₁t+φ₁) + ½·sin(2πf₂t+φ₂) + N(0, 0.1²), f from {1,2,3,4}/32
///   ar1        - x_t = 0.9·x_{t-1} + N(0,1), started from the stationary law
///   heavy_tail - the same recursion driven by Student-t(3) innovations
inline WindowSet synth_generate(SynthKind kind, std::size_t n, std::size_t length, std::uint64_t seed) {
  if (n < 1 || length < 4) throw std::invalid_argument("synth_generate: need n >= 1 and T >= 4");
  constexpr double kPi = 3.14159265358979323846;
  constexpr double kPhi = 0.9;
  constexpr std::size_t kBurnIn = 64;
  static constexpr double kFreqs[] = {1.0 / 32, 2.0 / 32, 3.0 / 32, 4.0 / 32};

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::uniform_int_distribution<int> pick(0, 3);
  std::student_t_distribution<double> student(3.0);

  WindowSet out(n);
  for (auto& w : out) {
    w.values.resize(length);
    switch (kind) {
      case SynthKind::sine_mix: {
        const double f1 = kFreqs[pick(rng)];
        const double f2 = kFreqs[pick(rng)];
        const double p1 = phase(rng);
        const double p2 = phase(rng);
        for (std::size_t t = 0; t < length; ++t) {
          const double td = static_cast<double>(t);
          w.values[t] = std::sin(2.0 * kPi * f1 * td + p1) + 0.5 * std::sin(2.0 * kPi * f2 * td + p2) +
                        0.1 * normal(rng);
        }
        break;
      }
      case SynthKind::ar1: {
        double x = normal(rng) / std::sqrt(1.0 - kPhi * kPhi);
        for (std::size_t t = 0; t < length; ++t) {
          if (t > 0) x = kPhi * x + normal(rng);
          w.values[t] = x;
        }
        break;
      }
      case SynthKind::heavy_tail: {
        double x = 0.0;
        for (std::size_t t = 0; t < kBurnIn; ++t) x = kPhi * x + student(rng);
        for (std::size_t t = 0; t < length; ++t) {
          x = kPhi * x + student(rng);
          w.values[t] = x;
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace graph2ts
