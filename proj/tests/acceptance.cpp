// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "graph2ts/graph2ts.hpp"
#include "oracles.hpp"

using namespace graph2ts;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---- shared training protocol ------------------------------------------------

constexpr std::size_t kCorpusSize = 2000;
constexpr double kEvalFraction = 0.2;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Run {
  TrainConfig config;
  DatasetSplit data;
  Model model;
  TrainResult result;
  std::vector<std::vector<double>> eval_graphs;
  WindowSet synth;  // one sample per eval graph
  MetricsReport metrics;
};

DatasetSplit protocol_data(std::uint64_t seed) {
  return split(synth_generate(SynthKind::sine_mix, kCorpusSize, 32, seed), kEvalFraction, seed);
}

TrainConfig protocol_config(std::uint64_t seed) {
  TrainConfig c;
  c.batch_size = 256;
  c.epochs = 100;
  c.seed = seed;
  return c;
}

Run run_protocol(const TrainConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Run r;
  r.config = c;
  r.data = protocol_data(c.seed);
  r.model = train(c, r.data, &r.result);
  r.eval_graphs = flattened_graphs(r.data.eval, r.model.bounds);
  r.synth = generate(r.model, r.eval_graphs, 1, c.seed);
  r.metrics = evaluate(r.data.eval, r.synth, {0, {0.5, 0.9}, c.seed});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "  trained " << to_string(c.variant) << " beta_max=" << c.beta_max << " seed=" << c.seed << " in "
            << num(secs) << "s, best epoch " << r.result.best_epoch << "\n";
  return r;
}

std::map<std::string, Run> g_runs;

const Run& cached_run(const std::string& key, const TrainConfig& c) {
  auto it = g_runs.find(key);
  if (it == g_runs.end()) it = g_runs.emplace(key, run_protocol(c)).first;
  return it->second;
}

const Run& full_run(std::uint64_t seed) { return cached_run("full/" + std::to_string(seed), protocol_config(seed)); }

// ---- criteria ------------------------------------------------------------------

Outcome criterion1() {
  const StateSequence seq{{1, 2, 3, 3, 2, 1, 1, 2, 3}};
  const auto counts = transition_counts(seq, 3);
  const auto P = transition_matrix(seq, 3);
  // numerator/denominator pairs of the expected matrix, zero entries as 0/1
  const std::vector<std::pair<int, int>> expected{{1, 3}, {2, 3}, {0, 1}, {1, 3}, {0, 1}, {2, 3}, {0, 1}, {1, 2}, {1, 2}};
  bool ok = true;
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t row_total = 0;
    for (std::size_t j = 0; j < 3; ++j) row_total += counts[i * 3 + j];
    for (std::size_t j = 0; j < 3; ++j) {
      const auto [num_e, den_e] = expected[i * 3 + j];
      // exact rational equality by cross-multiplication of integer counts
      ok = ok && counts[i * 3 + j] * static_cast<std::size_t>(den_e) == static_cast<std::size_t>(num_e) * row_total;
      ok = ok && P(i, j) == static_cast<double>(num_e) / static_cast<double>(den_e);
      nonzero += num_e != 0 ? 1 : 0;
    }
  }
  const TimeSeriesWindow points{{0.6, 1.6, 2.9, 2.7, 1.4, 0.5, 0.8, 2.0, 2.8}};
  const QuantileBoundaries bands{{0.3, 1.1, 2.5, 3.1}, 0};
  ok = ok && discretize(points, bands).states == seq.states;
  ok = ok && flatten(window_graph(points, bands)) == flatten(P);
  return {ok && nonzero == 6, "six labelled entries exact, zeros elsewhere, points -> states -> graph consistent"};
}

Outcome criterion2() {
  TrainConfig c;
  c.seed = 42;
  ParamStore store = init_params(c);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  // non-zero biases so hidden units sit away from relu kinks
  for (auto& p : store.params()) {
    if (p.name.find(".b") != std::string::npos) {
      for (double& v : p.value.data) v = 0.1 * normal(rng);
    }
  }
  store.at("log_temp").value.data[0] = std::log(0.2);
  Tensor2 x(4, c.T), eps(4, c.latent_dim);
  for (double& v : x.data) v = normal(rng);
  for (double& v : eps.data) v = normal(rng);
  std::uniform_int_distribution<int> state(1, static_cast<int>(c.Q));
  std::vector<std::vector<double>> graphs;
  for (int r = 0; r < 4; ++r) {
    StateSequence s;
    for (std::size_t t = 0; t < c.T; ++t) s.states.push_back(state(rng));
    graphs.push_back(flatten(transition_matrix(s, c.Q)));
  }
  const Tensor2 g = rows_to_tensor(graphs, c.Q * c.Q);
  GradCheckOptions opt;
  opt.floor = 1e-5;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = grad_check(store, [&](Tape& t, const std::vector<Var>& vars) {
    ModelVars mv(store, vars);
    return net::objective(t, mv, c, x, g, eps, 0.03).total;
  }, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool all = rep.checked == store.scalar_count();
  return {all && rep.max_rel_error <= 1e-4,
          std::to_string(rep.checked) + " coordinates, max rel error " + num(rep.max_rel_error) + " at " +
              rep.worst_param + ", floor " + num(opt.floor) + ", " + num(secs) + "s"};
}

WindowSet tied_set(std::mt19937_64& rng, std::size_t n, std::size_t T) {
  // values on a coarse grid so pooled ties occur
  std::uniform_int_distribution<int> grid(-6, 6);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coarse(0.5);
  WindowSet s(n, TimeSeriesWindow{std::vector<double>(T)});
  for (auto& w : s) {
    for (double& v : w.values) v = coarse(rng) ? 0.5 * grid(rng) : normal(rng);
  }
  return s;
}

Outcome criterion3() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<std::size_t> size(2, 14), len(2, 9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::map<std::string, double> worst;
  for (int i = 0; i < 50; ++i) {
    const std::size_t T = len(rng);
    const auto a = tied_set(rng, size(rng), T), b = tied_set(rng, size(rng), T);
    worst["wasserstein1_pooled"] = std::max(worst["wasserstein1_pooled"],
                                            std::abs(wasserstein1_pooled(a, b) - oracle::wasserstein1(a, b)));
    worst["ks_pooled"] = std::max(worst["ks_pooled"], std::abs(ks_pooled(a, b) - oracle::ks(a, b)));
    const auto pe = proto_err(a, b);
    const auto [avg, med] = oracle::proto_err(a, b);
    worst["proto_err"] = std::max({worst["proto_err"], std::abs(pe.avg - avg), std::abs(pe.med - med)});
    worst["mdr"] = std::max(worst["mdr"], std::abs(mdr(a, b) - oracle::mdr(a, b)));
    const double q = unit(rng);
    worst["coverage"] = std::max(worst["coverage"], std::abs(coverage(a, b, q) - oracle::coverage(a, b, q)));
  }
  bool ok = true;
  std::string detail = "50 instances each; max |diff|:";
  for (const auto& [name, d] : worst) {
    ok = ok && d <= 1e-12;
    detail += " " + name + "=" + num(d);
  }
  return {ok, detail};
}

Outcome criterion4() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::size_t> size(3, 30), len(4, 32);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  double worst_zero = 0.0, worst_one = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto s = oracle::random_set(rng, size(rng), len(rng), 1.0 + unit(rng), normal(rng));
    const double q = unit(rng);
    const auto r = evaluate(s, s, {0, {0.5, 0.9, q}, 7});
    const auto pe = proto_err(s, s);
    for (double v : {r.wasserstein, r.ks, r.acf_mae, r.psd_l2, r.proto_err_avg, r.proto_err_med, r.mdr,
                     wasserstein1_pooled(s, s), ks_pooled(s, s), acf_mae(s, s, default_max_lag(s)), psd_l2(s, s),
                     pe.avg, pe.med, mdr(s, s)}) {
      worst_zero = std::max(worst_zero, std::abs(v));
    }
    for (const auto& [level, v] : r.coverage) worst_one = std::max(worst_one, std::abs(v - 1.0));
    worst_one = std::max(worst_one, std::abs(coverage(s, s, q) - 1.0));
  }
  return {worst_zero == 0.0 && worst_one == 0.0,
          "20 sets; max deviation from 0: " + num(worst_zero) + ", from 1 (coverage): " + num(worst_one)};
}

Outcome criterion5() {
  const std::vector<double> p{0.2, 0.5, 0.3}, mu{-2.0, 0.0, 3.0}, sd{0.5, 1.0, 2.0};
  double mean = 0.0, between = 0.0, within = 0.0;
  for (std::size_t k = 0; k < 3; ++k) mean += p[k] * mu[k];
  for (std::size_t k = 0; k < 3; ++k) {
    between += p[k] * (mu[k] - mean) * (mu[k] - mean);
    within += p[k] * sd[k] * sd[k];
  }
  std::mt19937_64 rng(505);
  std::discrete_distribution<int> pick(p.begin(), p.end());
  std::normal_distribution<double> normal;
  const std::size_t n = 100000;
  std::vector<double> x(n);
  std::vector<int> group(n);
  for (std::size_t i = 0; i < n; ++i) {
    group[i] = pick(rng);
    x[i] = mu[group[i]] + sd[group[i]] * normal(rng);
  }
  const auto d = variance_decomposition_check(x, group);
  const double mc_gap = std::abs(d.total - (between + within)) / (between + within);
  const double between_gap = std::abs(d.between - between) / between;
  const double within_gap = std::abs(d.within - within) / within;

  // exact identity on a small labelled sample, against a direct two-pass computation
  std::vector<double> xs;
  std::vector<int> gs;
  for (int i = 0; i < 37; ++i) {
    gs.push_back(i % 4);
    xs.push_back(std::sin(1.7 * i) * (1 + i % 4) + (i % 4));
  }
  const auto small = variance_decomposition_check(xs, gs);
  double m = 0.0, total = 0.0;
  for (double v : xs) m += v;
  m /= static_cast<double>(xs.size());
  for (double v : xs) total += (v - m) * (v - m);
  total /= static_cast<double>(xs.size());
  const bool exact = d.rel_gap <= 1e-12 && small.rel_gap <= 1e-12 && std::abs(small.total - total) <= 1e-12;
  return {mc_gap <= 0.02 && between_gap <= 0.02 && within_gap <= 0.02 && exact,
          "MC gap " + num(mc_gap) + " (between " + num(between_gap) + ", within " + num(within_gap) +
              "); finite-sample identity gap " + num(std::max(d.rel_gap, small.rel_gap))};
}

Outcome criterion6() {
  const Run& r = full_run(kSeeds[0]);
  const auto& log = r.result.log;
  const auto argmin = std::min_element(log.begin(), log.end(), [](const EpochLog& a, const EpochLog& b) {
    return a.loss.total < b.loss.total;
  });
  const bool descent = log.size() == 100 && log.back().loss.total < log.front().loss.total;
  const bool best = argmin->epoch == r.result.best_epoch;
  return {descent && best, "epoch 1 total " + num(log.front().loss.total) + ", epoch 100 total " +
                               num(log.back().loss.total) + ", best epoch " + std::to_string(r.result.best_epoch) +
                               ", argmin epoch " + std::to_string(argmin->epoch)};
}

Outcome criterion7() {
  int a_ok = 0, b_ok = 0, c_ok = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const Run& full = full_run(seed);
    TrainConfig det_cfg = protocol_config(seed);
    det_cfg.variant = Variant::deterministic;
    const Run& det = cached_run("det/" + std::to_string(seed), det_cfg);
    TrainConfig b0_cfg = protocol_config(seed);
    b0_cfg.beta_max = 0.0;
    const Run& b0 = cached_run("beta0/" + std::to_string(seed), b0_cfg);

    const double cf9 = full.metrics.coverage.at(0.9), cd9 = det.metrics.coverage.at(0.9);
    const double cf5 = full.metrics.coverage.at(0.5), cb5 = b0.metrics.coverage.at(0.5);
    a_ok += cd9 <= cf9 - 0.05 ? 1 : 0;
    b_ok += cb5 < cf5 ? 1 : 0;
    const auto s1 = generate(det.model, det.eval_graphs, 3, 1000 + seed);
    const auto s2 = generate(det.model, det.eval_graphs, 3, 2000 + seed);
    bool same_within = true;
    for (std::size_t i = 0; i + 2 < s1.size(); i += 3) same_within = same_within && s1[i] == s1[i + 1] && s1[i] == s1[i + 2];
    c_ok += s1 == s2 && same_within ? 1 : 0;
    detail += " seed " + std::to_string(seed) + ": cov@0.9 full " + num(cf9) + " det " + num(cd9) + ", cov@0.5 full " +
              num(cf5) + " beta0 " + num(cb5) + ";";
  }
  detail = "(a) " + std::to_string(a_ok) + "/3 (b) " + std::to_string(b_ok) + "/3 (c) " + std::to_string(c_ok) + "/3;" +
           detail;
  return {a_ok >= 2 && b_ok >= 2 && c_ok >= 2, detail};
}

Outcome criterion8() {
  const Run& r = full_run(kSeeds[0]);
  const std::size_t n = r.eval_graphs.size();
  const std::size_t Q = r.config.Q;
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<std::size_t> other(0, n - 2);
  double to_generated = 0.0, to_random = 0.0;
  std::size_t closer = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto cond = reshape(r.eval_graphs[i], Q);
    std::size_t j = other(rng);
    if (j >= i) ++j;
    const double dg = graph_distance(cond, window_graph(r.synth[i], r.model.bounds));
    const double dr = graph_distance(cond, reshape(r.eval_graphs[j], Q));
    to_generated += dg;
    to_random += dr;
    closer += dg < dr ? 1 : 0;
  }
  to_generated /= static_cast<double>(n);
  to_random /= static_cast<double>(n);
  return {n >= 200 && to_generated < to_random,
          std::to_string(n) + " eval graphs; mean distance to generated " + num(to_generated) + ", to random real " +
              num(to_random) + "; generated closer for " + std::to_string(closer) + "/" + std::to_string(n)};
}

Outcome criterion9() {
  const auto heavy = tail_stats(synth_generate(SynthKind::heavy_tail, kCorpusSize, 32, 909));
  const auto sine = tail_stats(synth_generate(SynthKind::sine_mix, kCorpusSize, 32, 909));
  return {heavy.dx.excess_kurtosis > 2.0 && sine.dx.excess_kurtosis < 1.0,
          "dx excess kurtosis heavy_tail " + num(heavy.dx.excess_kurtosis) + ", sine_mix " +
              num(sine.dx.excess_kurtosis) + " (x: " + num(heavy.x.excess_kurtosis) + " vs " +
              num(sine.x.excess_kurtosis) + ")"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("GRAPH2TS_LOG=0 \"") + GRAPH2TS_CLI + "\" " + args;
  return std::system(cmd.c_str());
}

Outcome criterion10() {
  const fs::path root = fs::temp_directory_path() / "graph2ts_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> artifacts{"train.csv",      "eval.csv",     "train_graphs.csv", "train_graphs.csv.bounds.csv",
                                           "eval_graphs.csv", "model.ckpt",   "loss.csv",         "synth.csv",
                                           "metrics.txt"};
  for (const char* run : {"a", "b"}) {
    const std::string d = (root / run).string() + "/";
    const std::vector<std::string> steps{
        "ingest --synth sine_mix --n 2000 --window 32 --eval-fraction 0.2 --seed 1 --out " + d,
        "graph --windows " + d + "train.csv --Q 10 --out " + d + "train_graphs.csv",
        "graph --windows " + d + "eval.csv --bounds " + d + "train_graphs.csv.bounds.csv --out " + d + "eval_graphs.csv",
        "train --windows " + d + "train.csv --graphs " + d + "train_graphs.csv --bounds " + d +
            "train_graphs.csv.bounds.csv --batch-size 256 --epochs 100 --seed 1 --checkpoint " + d +
            "model.ckpt --loss-log " + d + "loss.csv",
        "generate --checkpoint " + d + "model.ckpt --graphs " + d + "eval_graphs.csv --seed 1 --out " + d + "synth.csv",
        "eval --real " + d + "eval.csv --synth " + d + "synth.csv --seed 1 --out " + d + "metrics.txt"};
    for (const auto& s : steps) {
      if (run_cli(s) != 0) return {false, "pipeline step failed: " + s};
    }
  }
  std::size_t identical = 0;
  for (const auto& name : artifacts) {
    identical += io::read_file((root / "a" / name).string()) == io::read_file((root / "b" / name).string()) ? 1 : 0;
  }
  return {identical == artifacts.size(),
          std::to_string(identical) + "/" + std::to_string(artifacts.size()) + " artifacts byte-identical across two runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
