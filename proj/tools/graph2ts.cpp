#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graph2ts/graph2ts.hpp"

using namespace graph2ts;
namespace fs = std::filesystem;

namespace {

// GRAPH2TS_LOG: 0 = quiet, 1 = progress (default), 2 = per-epoch detail
int log_level() {
  const char* v = std::getenv("GRAPH2TS_LOG");
  if (v == nullptr || *v == '\0') return 1;
  return std::atoi(v);
}

void log(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << msg << '\n';
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void add_train_options(CLI::App* cmd, TrainConfig& c, std::string& variant) {
  cmd->add_option("--Q", c.Q, "quantile states");
  cmd->add_option("--embed-dim", c.embed_dim, "encoder output width");
  cmd->add_option("--hidden-dim", c.hidden_dim, "hidden layer width");
  cmd->add_option("--latent-dim", c.latent_dim, "latent width d_z");
  cmd->add_option("--w-align", c.w_align, "alignment weight");
  cmd->add_option("--w-recon", c.w_recon, "reconstruction weight");
  cmd->add_option("--w-dist", c.w_dist, "order-statistics weight");
  cmd->add_option("--beta-max", c.beta_max, "final KL weight");
  cmd->add_option("--kl-warmup-epochs", c.kl_warmup_epochs, "KL warmup length");
  cmd->add_option("--lr", c.lr, "Adam learning rate");
  cmd->add_option("--batch-size", c.batch_size, "mini-batch size");
  cmd->add_option("--epochs", c.epochs, "training epochs");
  cmd->add_option("--seed", c.seed, "run seed");
  cmd->add_option("--variant", variant, "full | no_graph | deterministic")
      ->check(CLI::IsMember({"full", "no_graph", "deterministic"}));
}

std::string metrics_csv_header() {
  return "wasserstein,ks,acf_mae,psd_l2,proto_err_avg,proto_err_med,mdr,coverage_0.5,coverage_0.9";
}

std::string metrics_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << format_real(r.wasserstein) << ',' << format_real(r.ks) << ',' << format_real(r.acf_mae) << ','
     << format_real(r.psd_l2) << ',' << format_real(r.proto_err_avg) << ',' << format_real(r.proto_err_med) << ','
     << format_real(r.mdr) << ',' << format_real(r.coverage.at(0.5)) << ',' << format_real(r.coverage.at(0.9));
  return os.str();
}

std::string curve_csv(const std::string& column, const std::vector<double>& real, const std::vector<double>& synth) {
  std::ostringstream os;
  os << column << ",real,synth\n";
  for (std::size_t k = 0; k < real.size(); ++k) os << k << ',' << format_real(real[k]) << ',' << format_real(synth[k]) << '\n';
  return os.str();
}

std::string embeddings_csv(const Model& m, const WindowSet& windows, const std::vector<std::vector<double>>& graphs) {
  const Tensor2 t_raw = encode_ts(m.params, windows_to_tensor(windows, m.config.T));
  const Tensor2 g_raw = encode_graph(m.params, rows_to_tensor(conditioning_graphs(m.config, graphs), m.config.Q * m.config.Q));
  std::ostringstream os;
  os << "kind,index";
  for (std::size_t k = 0; k < t_raw.cols; ++k) os << ",e" << k;
  os << '\n';
  auto emit = [&os](const char* kind, const Tensor2& e) {
    for (std::size_t r = 0; r < e.rows; ++r) {
      os << kind << ',' << r;
      for (double v : e.row(r)) os << ',' << format_real(v);
      os << '\n';
    }
  };
  emit("ts", t_raw);
  emit("graph", g_raw);
  return os.str();
}

bool fig1_check() {
  const std::vector<double> expected{1.0 / 3, 2.0 / 3, 0.0, 1.0 / 3, 0.0, 2.0 / 3, 0.0, 0.5, 0.5};
  const TimeSeriesWindow w{{0.6, 1.6, 2.9, 2.7, 1.4, 0.5, 0.8, 2.0, 2.8}};
  const QuantileBoundaries b{{0.3, 1.1, 2.5, 3.1}, 0};
  return flatten(transition_matrix(StateSequence{{1, 2, 3, 3, 2, 1, 1, 2, 3}}, 3)) == expected &&
         flatten(window_graph(w, b)) == expected;
}

bool identities_check() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    WindowSet s(12, TimeSeriesWindow{std::vector<double>(16)});
    for (auto& w : s) {
      for (double& v : w.values) v = normal(rng);
    }
    const auto r = evaluate(s, s);
    const bool zeros = r.wasserstein == 0.0 && r.ks == 0.0 && r.acf_mae == 0.0 && r.psd_l2 == 0.0 &&
                       r.proto_err_avg == 0.0 && r.proto_err_med == 0.0 && r.mdr == 0.0;
    const bool ones = r.coverage.at(0.5) == 1.0 && r.coverage.at(0.9) == 1.0;
    if (!zeros || !ones) return false;
  }
  return true;
}

struct AblationRow {
  std::string name;
  TrainConfig config;
};

std::vector<AblationRow> ablation_grid(const TrainConfig& base) {
  std::vector<AblationRow> rows;
  auto with = [&](const std::string& name, auto edit) {
    TrainConfig c = base;
    edit(c);
    rows.push_back({name, c});
  };
  with("full", [](TrainConfig&) {});
  with("no_graph", [](TrainConfig& c) { c.variant = Variant::no_graph; });
  with("deterministic", [](TrainConfig& c) { c.variant = Variant::deterministic; });
  with("w_recon=0", [](TrainConfig& c) { c.w_recon = 0.0; });
  with("w_align=0", [](TrainConfig& c) { c.w_align = 0.0; });
  with("w_dist=0", [](TrainConfig& c) { c.w_dist = 0.0; });
  with("beta_max=0", [](TrainConfig& c) { c.beta_max = 0.0; });
  return rows;
}

EpochCallback epoch_logger() {
  return [](const EpochLog& e) {
    log(2, "epoch " + std::to_string(e.epoch) + " total=" + format_real(e.loss.total));
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-conditioned time-series generation pipeline"};
  app.set_config("--config", "", "key=value config file; subcommand keys go under [subcommand] sections");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  // ingest
  std::string in_path, synth_kind, out_dir = ".";
  std::size_t column = 0, window = 32, stride = 0, synth_n = 2000;
  double eval_fraction = 0.2;
  std::uint64_t data_seed = 0;
  auto* ingest = app.add_subcommand("ingest", "window, normalize and split a series (or a synthetic corpus)");
  auto* in_opt = ingest->add_option("--input", in_path, "numeric CSV/TSV file")->check(CLI::ExistingFile);
  ingest->add_option("--column", column, "0-based column index");
  ingest->add_option("--synth", synth_kind, "sine_mix | ar1 | heavy_tail")->excludes(in_opt);
  ingest->add_option("--n", synth_n, "synthetic window count");
  ingest->add_option("--window", window, "window length T");
  ingest->add_option("--stride", stride, "window stride (0 = T)");
  ingest->add_option("--eval-fraction", eval_fraction, "held-out fraction");
  ingest->add_option("--seed", data_seed, "split / corpus seed");
  ingest->add_option("--out", out_dir, "output directory");

  // graph
  std::string windows_path, bounds_path, graphs_out;
  std::size_t graph_q = 10;
  auto* graph = app.add_subcommand("graph", "quantile transition graphs of a window file");
  graph->add_option("--windows", windows_path, "window file")->required()->check(CLI::ExistingFile);
  graph->add_option("--Q", graph_q, "quantile states (when fitting boundaries)");
  graph->add_option("--bounds", bounds_path, "reuse these boundaries; otherwise fit and write <out>.bounds.csv");
  graph->add_option("--out", graphs_out, "graph file")->required();

  // train
  TrainConfig tc;
  std::string variant = "full", graphs_path, ckpt_path, loss_path, embed_path;
  auto* train_cmd = app.add_subcommand("train", "fit the conditional model");
  train_cmd->add_option("--windows", windows_path, "training windows")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--graphs", graphs_path, "training graphs")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--bounds", bounds_path, "boundaries stored in the checkpoint")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--checkpoint", ckpt_path, "checkpoint output")->required();
  train_cmd->add_option("--loss-log", loss_path, "loss log output");
  train_cmd->add_option("--embeddings", embed_path, "CSV of 128-dim training embeddings");
  add_train_options(train_cmd, tc, variant);

  // generate
  std::size_t n_per_graph = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "sample windows conditioned on graphs");
  gen->add_option("--checkpoint", ckpt_path, "checkpoint")->required()->check(CLI::ExistingFile);
  gen->add_option("--graphs", graphs_path, "conditioning graphs")->required()->check(CLI::ExistingFile);
  gen->add_option("--n-per-graph", n_per_graph, "samples per graph");
  gen->add_option("--seed", gen_seed, "sampling seed");
  gen->add_option("--out", gen_out, "synthetic window file")->required();

  // eval
  std::string real_path, synth_path, metrics_out, curves_dir;
  EvalOptions eopt;
  auto* eval = app.add_subcommand("eval", "score synthetic windows against real ones");
  eval->add_option("--real", real_path, "real windows")->required()->check(CLI::ExistingFile);
  eval->add_option("--synth", synth_path, "synthetic windows")->required()->check(CLI::ExistingFile);
  eval->add_option("--max-lag", eopt.max_lag, "ACF lags (0 = T/2)");
  eval->add_option("--coverage-q", eopt.coverage_q, "coverage quantiles");
  eval->add_option("--seed", eopt.seed, "balanced subsampling seed");
  eval->add_option("--out", metrics_out, "metrics file")->required();
  eval->add_option("--curves", curves_dir, "directory for acf.csv and psd.csv");

  // stats
  std::string stats_out;
  auto* stats = app.add_subcommand("stats", "tail statistics of a window file");
  stats->add_option("--windows", windows_path, "window file")->required()->check(CLI::ExistingFile);
  stats->add_option("--out", stats_out, "tail statistics file")->required();

  // ablate
  std::string train_path, eval_path, table_out;
  TrainConfig ac;
  std::string ablate_variant = "full";
  auto* ablate = app.add_subcommand("ablate", "train the knockout grid and tabulate metrics");
  ablate->add_option("--train", train_path, "training windows")->required()->check(CLI::ExistingFile);
  ablate->add_option("--eval", eval_path, "evaluation windows")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", table_out, "comparison table CSV")->required();
  add_train_options(ablate, ac, ablate_variant);

  // gradcheck
  std::uint64_t gc_seed = 0;
  GradCheckOptions gco;
  double gc_tol = 1e-4;
  std::size_t gc_batch = 4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full objective");
  gradcheck->add_option("--seed", gc_seed, "seed for parameters and batch");
  gradcheck->add_option("--batch", gc_batch, "batch rows");
  gradcheck->add_option("--stride", gco.stride, "check every k-th coordinate");
  gradcheck->add_option("--floor", gco.floor, "relative-error denominator floor");
  gradcheck->add_option("--tol", gc_tol, "pass threshold");

  app.add_subcommand("selfcheck", "worked-example and metric identity checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      if (in_path.empty() == synth_kind.empty()) throw std::invalid_argument("ingest: give exactly one of --input or --synth");
      WindowSet windows;
      const std::size_t s = stride == 0 ? window : stride;
      if (!synth_kind.empty()) {
        windows = synth_generate(parse_synth_kind(synth_kind), synth_n, window, data_seed);
      } else {
        windows = make_windows(load_series(in_path, column), window, s);
      }
      DatasetSplit sp = split(windows, eval_fraction, data_seed);
      ensure_dir(out_dir);
      io::write_windows(join(out_dir, "train.csv"), sp.train);
      io::write_windows(join(out_dir, "eval.csv"), sp.eval);
      log(1, "ingest: " + std::to_string(sp.train.size()) + " train / " + std::to_string(sp.eval.size()) + " eval windows");
    } else if (*graph) {
      const WindowSet w = io::read_windows(windows_path);
      QuantileBoundaries b;
      if (bounds_path.empty()) {
        b = fit_boundaries(w, graph_q);
        if (b.perturbed > 0) log(1, "graph: " + std::to_string(b.perturbed) + " collapsed boundaries perturbed");
        io::write_bounds(graphs_out + ".bounds.csv", b);
      } else {
        b = io::read_bounds(bounds_path);
      }
      io::write_graphs(graphs_out, flattened_graphs(w, b), b.states());
      log(1, "graph: " + std::to_string(w.size()) + " graphs with Q=" + std::to_string(b.states()));
    } else if (*train_cmd) {
      tc.variant = parse_variant(variant);
      const WindowSet w = io::read_windows(windows_path);
      std::size_t Q = 0;
      const auto graphs = io::read_graphs(graphs_path, &Q);
      if (Q != tc.Q) throw std::invalid_argument("train: graph file Q does not match --Q");
      if (!w.empty()) tc.T = w.front().size();
      Model m;
      m.config = tc;
      m.bounds = io::read_bounds(bounds_path);
      auto result = train(tc, w, graphs, epoch_logger());
      m.params = result.best;
      io::write_checkpoint(ckpt_path, m);
      if (!loss_path.empty()) io::write_file(loss_path, io::loss_log_text(result.log));
      if (!embed_path.empty()) io::write_file(embed_path, embeddings_csv(m, w, graphs));
      log(1, "train: best epoch " + std::to_string(result.best_epoch) + " total=" +
                 format_real(result.log[result.best_epoch - 1].loss.total));
    } else if (*gen) {
      const Model m = io::read_checkpoint(ckpt_path);
      const auto synth = generate(m, io::read_graphs(graphs_path), n_per_graph, gen_seed);
      io::write_windows(gen_out, synth);
      log(1, "generate: " + std::to_string(synth.size()) + " windows");
    } else if (*eval) {
      const WindowSet real = io::read_windows(real_path);
      const WindowSet synth = io::read_windows(synth_path);
      io::write_file(metrics_out, to_text(evaluate(real, synth, eopt)));
      if (!curves_dir.empty()) {
        ensure_dir(curves_dir);
        const std::size_t L = eopt.max_lag ? eopt.max_lag : default_max_lag(real);
        io::write_file(join(curves_dir, "acf.csv"), curve_csv("lag", mean_acf(real, L), mean_acf(synth, L)));
        io::write_file(join(curves_dir, "psd.csv"), curve_csv("bin", mean_psd(real), mean_psd(synth)));
      }
    } else if (*stats) {
      io::write_file(stats_out, io::tail_stats_text(tail_stats(io::read_windows(windows_path))));
    } else if (*ablate) {
      ac.variant = parse_variant(ablate_variant);
      const WindowSet tr = io::read_windows(train_path);
      const WindowSet ev = io::read_windows(eval_path);
      if (!tr.empty()) ac.T = tr.front().size();
      const QuantileBoundaries b = fit_boundaries(tr, ac.Q);
      const auto train_graphs = flattened_graphs(tr, b);
      const auto eval_graphs = flattened_graphs(ev, b);
      std::ostringstream table;
      table << "config," << metrics_csv_header() << '\n';
      for (const auto& row : ablation_grid(ac)) {
        log(1, "ablate: " + row.name);
        auto result = train(row.config, tr, train_graphs, epoch_logger());
        const Model m{row.config, b, result.best};
        const auto synth = generate(m, eval_graphs, 1, row.config.seed);
        table << row.name << ',' << metrics_csv_row(evaluate(ev, synth, {0, {0.5, 0.9}, row.config.seed})) << '\n';
      }
      io::write_file(table_out, table.str());
    } else if (*gradcheck) {
      TrainConfig c;
      c.seed = gc_seed;
      ParamStore store = init_params(c);
      std::mt19937_64 rng(gc_seed);
      std::normal_distribution<double> normal;
      for (auto& p : store.params()) {
        if (p.name.find(".b") != std::string::npos) {
          for (double& v : p.value.data) v = 0.1 * normal(rng);
        }
      }
      Tensor2 x(gc_batch, c.T), eps(gc_batch, c.latent_dim);
      for (double& v : x.data) v = normal(rng);
      for (double& v : eps.data) v = normal(rng);
      const WindowSet ws = synth_generate(SynthKind::ar1, gc_batch, c.T, gc_seed);
      const Tensor2 g = rows_to_tensor(flattened_graphs(ws, fit_boundaries(ws, c.Q)), c.Q * c.Q);
      const auto rep = grad_check(store, [&](Tape& t, const std::vector<Var>& vars) {
        ModelVars mv(store, vars);
        return net::objective(t, mv, c, x, g, eps, c.beta_max).total;
      }, gco);
      std::cout << "checked=" << rep.checked << " max_rel_error=" << format_real(rep.max_rel_error) << " at "
                << rep.worst_param << "[" << rep.worst_index << "] analytic=" << format_real(rep.worst_analytic)
                << " numeric=" << format_real(rep.worst_numeric) << "\n";
      return rep.max_rel_error <= gc_tol ? 0 : 1;
    } else {
      const bool fig1 = fig1_check();
      const bool ids = identities_check();
      std::cout << "fig1: " << (fig1 ? "PASS" : "FAIL") << "\n";
      std::cout << "identities: " << (ids ? "PASS" : "FAIL") << "\n";
      return fig1 && ids ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
