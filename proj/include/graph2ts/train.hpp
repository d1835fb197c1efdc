#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph2ts/dataset.hpp"
#include "graph2ts/model.hpp"
#include "graph2ts/params.hpp"
#include "graph2ts/quantile_graph.hpp"

namespace graph2ts {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown loss;     // sample-weighted means over the epoch's batches
};

struct TrainResult {
  ParamStore best;          // snapshot from the epoch with the lowest mean total
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
  std::vector<LossBreakdown> batch_log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

namespace detail {

// Independent deterministic streams derived from the run seed.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{seed, id};
  return std::mt19937_64(seq);
}

inline Tensor2 standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor2 out(rows, cols);
  for (double& v : out.data) v = normal(rng);
  return out;
}

}  // namespace detail

/// Conditioning rows actually fed to the model: the no_graph variant
/// replaces every graph with the flattened identity.
inline std::vector<std::vector<double>> conditioning_graphs(const TrainConfig& c,
                                                            const std::vector<std::vector<double>>& graphs) {
  if (c.variant != Variant::no_graph) return graphs;
  return std::vector<std::vector<double>>(graphs.size(), flatten(identity_graph(c.Q)));
}

/// Mini-batch Adam on the weighted objective. Each epoch shuffles the
/// training windows, records per-batch loss parts, and keeps a parameter
/// snapshot whenever the epoch-mean total reaches a new minimum.
inline TrainResult train(const TrainConfig& c, const WindowSet& windows, const std::vector<std::vector<double>>& graphs,
                         const EpochCallback& on_epoch = {}) {
  c.validate();
  if (windows.empty()) throw std::invalid_argument("train: empty training data");
  if (graphs.size() != windows.size()) throw std::invalid_argument("train: graph count does not match window count");
  const Tensor2 all_x = windows_to_tensor(windows, c.T);
  const Tensor2 all_g = rows_to_tensor(conditioning_graphs(c, graphs), c.Q * c.Q);

  ParamStore store = init_params(c);
  AdamConfig adam;
  adam.lr = c.lr;
  auto shuffle_rng = detail::stream(c.seed, 1);
  auto noise_rng = detail::stream(c.seed, 2);

  TrainResult result;
  double best_total = std::numeric_limits<double>::infinity();
  const std::size_t n = windows.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double beta = beta_schedule(epoch - 1, c.kl_warmup_epochs, c.beta_max);
    LossBreakdown acc;
    acc.beta = beta;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += c.batch_size, ++batch_index) {
      const std::size_t b = std::min(c.batch_size, n - start);
      Tensor2 x(b, c.T), g(b, c.Q * c.Q);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t src = order[start + r];
        std::copy(all_x.row(src).begin(), all_x.row(src).end(), x.row(r).begin());
        std::copy(all_g.row(src).begin(), all_g.row(src).end(), g.row(r).begin());
      }
      Tensor2 eps = c.variant == Variant::deterministic ? Tensor2(b, c.latent_dim, 0.0)
                                                          : detail::standard_normal(b, c.latent_dim, noise_rng);
      LossBreakdown parts;
      try {
        Tape tape;
        auto vars = bind(tape, store);
        ModelVars mv(store, vars);
        auto lv = net::objective(tape, mv, c, x, g, eps, beta);
        parts = {tape.value(lv.align).item(), tape.value(lv.recon).item(), tape.value(lv.dist).item(),
                 tape.value(lv.kl).item(),    beta,                         tape.value(lv.total).item()};
        tape.backward(lv.total);
        adam_step(store, collect_grads(tape, vars), adam);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("train: epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) +
                                 ": " + e.what());
      }
      result.batch_log.push_back(parts);
      const double w = static_cast<double>(b) / static_cast<double>(n);
      acc.align += w * parts.align;
      acc.recon += w * parts.recon;
      acc.dist += w * parts.dist;
      acc.kl += w * parts.kl;
      acc.total += w * parts.total;
    }
    result.log.push_back({epoch, acc});
    if (acc.total < best_total) {
      best_total = acc.total;
      result.best = store;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(result.log.back());
  }
  return result;
}

/// Fits boundaries on the train split, builds its graphs and trains.
inline Model train(const TrainConfig& c, const DatasetSplit& data, TrainResult* details = nullptr,
                   const EpochCallback& on_epoch = {}) {
  if (data.train.empty()) throw std::invalid_argument("train: empty training data");
  Model m;
  m.config = c;
  m.bounds = fit_boundaries(data.train, c.Q);
  auto r = train(c, data.train, flattened_graphs(data.train, m.bounds), on_epoch);
  m.params = r.best;
  if (details) *details = std::move(r);
  return m;
}

/// Draws n_per_graph independent z ~ N(0, I) per conditioning graph and
/// decodes each. Output order is graph-major. The deterministic variant
/// repeats its single conditional output.
inline WindowSet generate(const Model& m, const std::vector<std::vector<double>>& graphs, std::size_t n_per_graph,
                          std::uint64_t seed) {
  const TrainConfig& c = m.config;
  if (n_per_graph == 0) throw std::invalid_argument("generate: n_per_graph must be positive");
  if (m.params.find("dec.w1") == nullptr) throw std::invalid_argument("generate: model has no decoder");
  const std::size_t dec_in = m.params.at("dec.w1").value.rows;
  const std::size_t expected = c.variant == Variant::deterministic ? c.embed_dim : c.embed_dim + c.latent_dim;
  if (dec_in != expected) throw std::invalid_argument("generate: checkpoint does not match its config");
  for (const auto& g : graphs) {
    if (g.size() != c.Q * c.Q) throw std::invalid_argument("generate: graph width does not match Q^2");
  }

  auto rng = detail::stream(seed, 3);
  WindowSet out;
  out.reserve(graphs.size() * n_per_graph);
  constexpr std::size_t kChunk = 512;
  const auto cond_rows = conditioning_graphs(c, graphs);
  for (std::size_t start = 0; start < cond_rows.size(); start += kChunk) {
    const std::size_t b = std::min(kChunk, cond_rows.size() - start);
    std::vector<std::vector<double>> chunk(cond_rows.begin() + static_cast<std::ptrdiff_t>(start),
                                           cond_rows.begin() + static_cast<std::ptrdiff_t>(start + b));
    const Tensor2 g_raw = encode_graph(m.params, rows_to_tensor(chunk, c.Q * c.Q));
    if (c.variant == Variant::deterministic) {
      Tape t;
      const Tensor2 cond = t.value(ops::l2_normalize_rows(t, t.constant(g_raw)));
      const Tensor2 x = decode(m.params, cond, nullptr);
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t k = 0; k < n_per_graph; ++k) out.push_back({{x.row(r).begin(), x.row(r).end()}});
      }
      continue;
    }
    // replicate each embedding n_per_graph times, one fresh z per copy
    Tensor2 cond(b * n_per_graph, g_raw.cols);
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t k = 0; k < n_per_graph; ++k) {
        std::copy(g_raw.row(r).begin(), g_raw.row(r).end(), cond.row(r * n_per_graph + k).begin());
      }
    }
    const Tensor2 z = detail::standard_normal(b * n_per_graph, c.latent_dim, rng);
    const Tensor2 x = decode(m.params, cond, &z);
    for (std::size_t r = 0; r < x.rows; ++r) out.push_back({{x.row(r).begin(), x.row(r).end()}});
  }
  return out;
}

}  // namespace graph2ts
