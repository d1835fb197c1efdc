#pragma once

// Graph-conditioned VAE: time-series and graph MLP encoders, a Gaussian
// posterior over z, a decoder conditioned on the raw graph embedding and z,
// and the four-term training objective
//
//   total = w_align·align + w_recon·recon + w_dist·dist + beta·kl
//
// The deterministic variant drops the posterior, latent and KL term and
// decodes from the l2-normalized graph embedding alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "graph2ts/params.hpp"
#include "graph2ts/quantile_graph.hpp"
#include "graph2ts/tape.hpp"

namespace graph2ts {

enum class Variant { full, no_graph, deterministic };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_graph: return "no_graph";
    case Variant::deterministic: return "deterministic";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "full") return Variant::full;
  if (s == "no_graph") return Variant::no_graph;
  if (s == "deterministic") return Variant::deterministic;
  throw std::invalid_argument("unknown variant: " + std::string(s));
}

struct TrainConfig {
  std::size_t T = 32;
  std::size_t Q = 10;
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t latent_dim = 32;
  double w_align = 1.0;
  double w_recon = 5.0;
  double w_dist = 1.0;
  double beta_max = 0.05;
  std::size_t kl_warmup_epochs = 50;
  double lr = 3e-4;
  std::size_t batch_size = 4096;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
  Variant variant = Variant::full;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    if (T == 0 || Q < 2 || embed_dim == 0 || hidden_dim == 0 || latent_dim == 0 || batch_size == 0 || epochs == 0) {
      throw std::invalid_argument("TrainConfig: sizes must be positive (Q >= 2)");
    }
    if (w_align < 0 || w_recon < 0 || w_dist < 0 || beta_max < 0 || !(lr > 0)) {
      throw std::invalid_argument("TrainConfig: weights must be non-negative and lr positive");
    }
  }
};

/// Line-oriented `key=value` rendering; round-trips through parse_train_config.
inline std::string to_text(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "T=" << c.T << "\nQ=" << c.Q << "\nembed_dim=" << c.embed_dim << "\nhidden_dim=" << c.hidden_dim
     << "\nlatent_dim=" << c.latent_dim << "\nw_align=" << c.w_align << "\nw_recon=" << c.w_recon
     << "\nw_dist=" << c.w_dist << "\nbeta_max=" << c.beta_max << "\nkl_warmup_epochs=" << c.kl_warmup_epochs
     << "\nlr=" << c.lr << "\nbatch_size=" << c.batch_size << "\nepochs=" << c.epochs << "\nseed=" << c.seed
     << "\nvariant=" << to_string(c.variant) << "\n";
  return os.str();
}

inline TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("parse_train_config: malformed line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "T") c.T = std::stoul(val);
    else if (key == "Q") c.Q = std::stoul(val);
    else if (key == "embed_dim") c.embed_dim = std::stoul(val);
    else if (key == "hidden_dim") c.hidden_dim = std::stoul(val);
    else if (key == "latent_dim") c.latent_dim = std::stoul(val);
    else if (key == "w_align") c.w_align = std::stod(val);
    else if (key == "w_recon") c.w_recon = std::stod(val);
    else if (key == "w_dist") c.w_dist = std::stod(val);
    else if (key == "beta_max") c.beta_max = std::stod(val);
    else if (key == "kl_warmup_epochs") c.kl_warmup_epochs = std::stoul(val);
    else if (key == "lr") c.lr = std::stod(val);
    else if (key == "batch_size") c.batch_size = std::stoul(val);
    else if (key == "epochs") c.epochs = std::stoul(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "variant") c.variant = parse_variant(val);
    else throw std::invalid_argument("parse_train_config: unknown key " + key);
  }
  return c;
}

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;
inline constexpr double kInitTemperature = 0.07;

/// Trained weights plus everything generation needs: the config and the
/// quantile boundaries used to build conditioning graphs.
struct Model {
  TrainConfig config;
  QuantileBoundaries bounds;
  ParamStore params;
};

namespace detail {

inline void add_mlp(ParamStore& s, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
                    std::mt19937_64& rng) {
  s.add(prefix + ".w1", glorot_uniform(in, hidden, rng));
  s.add(prefix + ".b1", Tensor2(1, hidden, 0.0));
  s.add(prefix + ".w2", glorot_uniform(hidden, out, rng));
  s.add(prefix + ".b2", Tensor2(1, out, 0.0));
}

}  // namespace detail

inline ParamStore init_params(const TrainConfig& c) {
  c.validate();
  std::seed_seq seq{c.seed, std::uint64_t{0x1a17}};
  std::mt19937_64 rng(seq);
  ParamStore s;
  detail::add_mlp(s, "ts_enc", c.T, c.hidden_dim, c.embed_dim, rng);
  detail::add_mlp(s, "graph_enc", c.Q * c.Q, c.hidden_dim, c.embed_dim, rng);
  if (c.variant == Variant::deterministic) {
    detail::add_mlp(s, "dec", c.embed_dim, c.hidden_dim, c.T, rng);
  } else {
    detail::add_mlp(s, "post", 2 * c.embed_dim, c.hidden_dim, 2 * c.latent_dim, rng);
    detail::add_mlp(s, "dec", c.embed_dim + c.latent_dim, c.hidden_dim, c.T, rng);
  }
  s.add("log_temp", Tensor2::scalar(std::log(kInitTemperature)));
  return s;
}

/// Tape handles for a bound ParamStore, looked up by name.
class ModelVars {
 public:
  ModelVars(const ParamStore& store, const std::vector<Var>& vars) {
    for (std::size_t i = 0; i < store.size(); ++i) index_[store.params()[i].name] = vars[i];
  }
  Var operator[](const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("model has no parameter " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }

 private:
  std::map<std::string, Var> index_;
};

namespace net {

inline Var mlp(Tape& t, const ModelVars& mv, const std::string& prefix, Var x) {
  Var h = ops::relu(t, ops::affine(t, x, mv[prefix + ".w1"], mv[prefix + ".b1"]));
  return ops::affine(t, h, mv[prefix + ".w2"], mv[prefix + ".b2"]);
}

inline Var encode_ts(Tape& t, const ModelVars& mv, Var x) { return mlp(t, mv, "ts_enc", x); }
inline Var encode_graph(Tape& t, const ModelVars& mv, Var g) { return mlp(t, mv, "graph_enc", g); }

struct Posterior {
  Var mu;
  Var logvar;
};

inline Posterior posterior(Tape& t, const ModelVars& mv, Var t_raw, Var g_raw, std::size_t latent_dim) {
  Var out = mlp(t, mv, "post", ops::concat_cols(t, t_raw, g_raw));
  Var mu = ops::slice_cols(t, out, 0, latent_dim);
  Var lv = ops::clamp(t, ops::slice_cols(t, out, latent_dim, 2 * latent_dim), kLogvarMin, kLogvarMax);
  return {mu, lv};
}

/// Stochastic variants decode concat(g_raw, z); the deterministic variant
/// passes only the (normalized) graph embedding.
inline Var decode(Tape& t, const ModelVars& mv, Var cond, const Var* z) {
  Var in = z ? ops::concat_cols(t, cond, *z) : cond;
  return mlp(t, mv, "dec", in);
}

/// Symmetric InfoNCE between row-normalized embeddings at temperature exp(log_temp).
inline Var loss_align(Tape& t, Var t_raw, Var g_raw, Var log_temp) {
  Var tn = ops::l2_normalize_rows(t, t_raw);
  Var gn = ops::l2_normalize_rows(t, g_raw);
  Var s = ops::scale_exp_neg(t, ops::matmul_nt(t, tn, gn), log_temp);
  Var ts_to_graph = ops::cross_entropy_diag(t, s);
  Var graph_to_ts = ops::cross_entropy_diag(t, ops::transpose(t, s));
  return ops::weighted_sum(t, {{ts_to_graph, 0.5}, {graph_to_ts, 0.5}});
}

inline Var loss_recon(Tape& t, Var x_hat, Var x) { return ops::mse(t, x_hat, x); }

/// Mean squared difference of per-row order statistics.
inline Var loss_dist(Tape& t, Var x_hat, Var x) { return ops::mse(t, ops::sort_rows(t, x_hat), ops::sort_rows(t, x)); }

inline Var loss_kl(Tape& t, const Posterior& p) { return ops::kl_standard_normal(t, p.mu, p.logvar); }

struct LossVars {
  Var align, recon, dist, kl, total;
  Var x_hat;
};

/// Builds the full objective for one batch. `eps` (B×d_z) is ignored by the
/// deterministic variant.
inline LossVars objective(Tape& t, const ModelVars& mv, const TrainConfig& c, const Tensor2& x, const Tensor2& g,
                          const Tensor2& eps, double beta) {
  Var xv = t.constant(x);
  Var gv = t.constant(g);
  Var t_raw = encode_ts(t, mv, xv);
  Var g_raw = encode_graph(t, mv, gv);
  LossVars out{};
  out.align = loss_align(t, t_raw, g_raw, mv["log_temp"]);
  if (c.variant == Variant::deterministic) {
    Var cond = ops::l2_normalize_rows(t, g_raw);
    out.x_hat = decode(t, mv, cond, nullptr);
    out.kl = t.constant(Tensor2::scalar(0.0));
  } else {
    Posterior p = posterior(t, mv, t_raw, g_raw, c.latent_dim);
    Var z = ops::reparameterize(t, p.mu, p.logvar, eps);
    out.x_hat = decode(t, mv, g_raw, &z);
    out.kl = loss_kl(t, p);
  }
  out.recon = loss_recon(t, out.x_hat, xv);
  out.dist = loss_dist(t, out.x_hat, xv);
  out.total = ops::weighted_sum(
      t, {{out.align, c.w_align}, {out.recon, c.w_recon}, {out.dist, c.w_dist}, {out.kl, beta}});
  return out;
}

}  // namespace net

/// beta_max · min(1, epoch / warmup)
inline double beta_schedule(std::size_t epoch, std::size_t warmup, double beta_max) {
  if (warmup == 0) return beta_max;
  return beta_max * std::min(1.0, static_cast<double>(epoch) / static_cast<double>(warmup));
}

struct LossBreakdown {
  double align = 0.0;
  double recon = 0.0;
  double dist = 0.0;
  double kl = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

// Value-level entry points. Parameters enter the tape as constants, so no
// backward closures are recorded.

inline Tensor2 encode_ts(const ParamStore& params, const Tensor2& x) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& p : params.params()) vars.push_back(t.constant(p.value));
  ModelVars mv(params, vars);
  return t.value(net::encode_ts(t, mv, t.constant(x)));
}

inline Tensor2 encode_graph(const ParamStore& params, const Tensor2& g) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& p : params.params()) vars.push_back(t.constant(p.value));
  ModelVars mv(params, vars);
  return t.value(net::encode_graph(t, mv, t.constant(g)));
}

struct PosteriorParams {
  Tensor2 mu;
  Tensor2 logvar;
};

inline PosteriorParams posterior(const ParamStore& params, const Tensor2& t_raw, const Tensor2& g_raw,
                                 std::size_t latent_dim) {
  if (t_raw.rows != g_raw.rows) throw std::invalid_argument("posterior: batch size mismatch");
  Tape t;
  std::vector<Var> vars;
  for (const auto& p : params.params()) vars.push_back(t.constant(p.value));
  ModelVars mv(params, vars);
  auto p = net::posterior(t, mv, t.constant(t_raw), t.constant(g_raw), latent_dim);
  return {t.value(p.mu), t.value(p.logvar)};
}

inline Tensor2 reparameterize(const PosteriorParams& p, const Tensor2& eps) {
  Tape t;
  return t.value(ops::reparameterize(t, t.constant(p.mu), t.constant(p.logvar), eps));
}

/// Decoder output for conditioning `cond` (raw graph embedding, or its
/// normalized form for the deterministic variant) and optional latent z.
inline Tensor2 decode(const ParamStore& params, const Tensor2& cond, const Tensor2* z) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& p : params.params()) vars.push_back(t.constant(p.value));
  ModelVars mv(params, vars);
  Var zv;
  if (z) zv = t.constant(*z);
  return t.value(net::decode(t, mv, t.constant(cond), z ? &zv : nullptr));
}

/// Scalar losses on plain values, for direct use and testing.
inline double loss_align(const Tensor2& t_raw, const Tensor2& g_raw, double log_temp) {
  Tape t;
  return t.value(net::loss_align(t, t.constant(t_raw), t.constant(g_raw), t.constant(Tensor2::scalar(log_temp))))
      .item();
}
inline double loss_recon(const Tensor2& x_hat, const Tensor2& x) {
  Tape t;
  return t.value(net::loss_recon(t, t.constant(x_hat), t.constant(x))).item();
}
inline double loss_dist(const Tensor2& x_hat, const Tensor2& x) {
  Tape t;
  return t.value(net::loss_dist(t, t.constant(x_hat), t.constant(x))).item();
}
inline double loss_kl(const PosteriorParams& p) {
  Tape t;
  return t.value(ops::kl_standard_normal(t, t.constant(p.mu), t.constant(p.logvar))).item();
}

inline Tensor2 rows_to_tensor(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Tensor2 out(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw std::invalid_argument("rows_to_tensor: row width mismatch");
    std::copy(rows[r].begin(), rows[r].end(), out.row(r).begin());
  }
  return out;
}

inline Tensor2 windows_to_tensor(const WindowSet& windows, std::size_t T) {
  Tensor2 out(windows.size(), T);
  for (std::size_t r = 0; r < windows.size(); ++r) {
    if (windows[r].size() != T) throw std::invalid_argument("windows_to_tensor: window length mismatch");
    std::copy(windows[r].values.begin(), windows[r].values.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace graph2ts
