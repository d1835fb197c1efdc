#pragma once

// Versioned artifact files.
//
//   windows     "# graph2ts-windows v1 T=<T>"  then one window per row, comma-separated
//   graphs      "# graph2ts-graphs v1 Q=<Q>"   then one flattened Q×Q graph per row
//   boundaries  "# graph2ts-bounds v1 Q=<Q>"   then one row of Q+1 edges
//   loss log    "# graph2ts-losslog v1"        then "epoch,align,recon,dist,kl,beta,total" rows
//   tail stats  "# graph2ts-tailstats v1"      then key=value lines
//   checkpoint  binary, magic "g2ts-ckpt v1", little-endian

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph2ts/dataset.hpp"
#include "graph2ts/metrics.hpp"
#include "graph2ts/model.hpp"
#include "graph2ts/quantile_graph.hpp"
#include "graph2ts/train.hpp"

namespace graph2ts::io {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

namespace detail {

inline void append_row(std::ostringstream& os, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    os << format_real(row[i]);
  }
  os << '\n';
}

inline std::vector<double> parse_row(const std::string& line, std::size_t expected, const std::string& path,
                                     std::size_t lineno) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    double v = 0.0;
    if (!graph2ts::detail::parse_real(std::string_view(line).substr(pos, end - pos), v) || !std::isfinite(v)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number");
    }
    row.push_back(v);
    pos = end + 1;
  }
  if (row.size() != expected) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(expected) +
                             " values, got " + std::to_string(row.size()));
  }
  return row;
}

// Header of the form "<tag> <key>=<n>"; returns n.
inline std::size_t parse_header(const std::string& line, const std::string& tag, const std::string& key,
                                const std::string& path) {
  const std::string prefix = tag + " " + key + "=";
  if (line.rfind(prefix, 0) != 0) {
    throw std::runtime_error(path + ": expected header '" + tag + " " + key + "=<n>', got '" + line + "'");
  }
  return std::stoul(line.substr(prefix.size()));
}

inline std::vector<std::vector<double>> read_rows(const std::string& path, const std::string& tag,
                                                  const std::string& key, std::size_t width_from_n(std::size_t),
                                                  std::size_t& n_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  n_out = parse_header(line, tag, key, path);
  const std::size_t width = width_from_n(n_out);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    rows.push_back(parse_row(line, width, path, lineno));
  }
  return rows;
}

}  // namespace detail

inline constexpr const char* kWindowsTag = "# graph2ts-windows v1";
inline constexpr const char* kGraphsTag = "# graph2ts-graphs v1";
inline constexpr const char* kBoundsTag = "# graph2ts-bounds v1";
inline constexpr const char* kLossLogTag = "# graph2ts-losslog v1";
inline constexpr const char* kTailStatsTag = "# graph2ts-tailstats v1";
inline constexpr const char* kCheckpointMagic = "g2ts-ckpt v1";

inline std::string windows_text(const WindowSet& windows) {
  if (windows.empty()) throw std::invalid_argument("windows_text: no windows");
  std::ostringstream os;
  os << kWindowsTag << " T=" << windows.front().size() << '\n';
  for (const auto& w : windows) {
    if (w.size() != windows.front().size()) throw std::invalid_argument("windows_text: ragged windows");
    detail::append_row(os, w.values);
  }
  return os.str();
}

inline void write_windows(const std::string& path, const WindowSet& windows) { write_file(path, windows_text(windows)); }

inline WindowSet read_windows(const std::string& path) {
  std::size_t T = 0;
  auto rows = detail::read_rows(path, kWindowsTag, "T", [](std::size_t n) { return n; }, T);
  WindowSet out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back({std::move(r)});
  if (out.empty()) throw std::runtime_error(path + ": no windows");
  return out;
}

inline void write_graphs(const std::string& path, const std::vector<std::vector<double>>& graphs, std::size_t Q) {
  std::ostringstream os;
  os << kGraphsTag << " Q=" << Q << '\n';
  for (const auto& g : graphs) {
    if (g.size() != Q * Q) throw std::invalid_argument("write_graphs: graph width does not match Q^2");
    detail::append_row(os, g);
  }
  write_file(path, os.str());
}

inline std::vector<std::vector<double>> read_graphs(const std::string& path, std::size_t* Q_out = nullptr) {
  std::size_t Q = 0;
  auto rows = detail::read_rows(path, kGraphsTag, "Q", [](std::size_t n) { return n * n; }, Q);
  if (Q_out) *Q_out = Q;
  return rows;
}

inline void write_bounds(const std::string& path, const QuantileBoundaries& b) {
  std::ostringstream os;
  os << kBoundsTag << " Q=" << b.states() << '\n';
  detail::append_row(os, b.edges);
  write_file(path, os.str());
}

inline QuantileBoundaries read_bounds(const std::string& path) {
  std::size_t Q = 0;
  auto rows = detail::read_rows(path, kBoundsTag, "Q", [](std::size_t n) { return n + 1; }, Q);
  if (rows.size() != 1) throw std::runtime_error(path + ": expected exactly one row of edges");
  QuantileBoundaries b;
  b.edges = std::move(rows.front());
  for (std::size_t k = 1; k < b.edges.size(); ++k) {
    if (!(b.edges[k] > b.edges[k - 1])) throw std::runtime_error(path + ": edges not strictly increasing");
  }
  return b;
}

inline std::string loss_log_text(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << kLossLogTag << "\nepoch,align,recon,dist,kl,beta,total\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << format_real(e.loss.align) << ',' << format_real(e.loss.recon) << ','
       << format_real(e.loss.dist) << ',' << format_real(e.loss.kl) << ',' << format_real(e.loss.beta) << ','
       << format_real(e.loss.total) << '\n';
  }
  return os.str();
}

inline std::vector<EpochLog> parse_loss_log(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kLossLogTag) throw std::runtime_error("loss log: missing header");
  std::getline(is, line);  // column names
  std::vector<EpochLog> out;
  std::size_t lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto v = detail::parse_row(line, 7, "loss log", lineno);
    out.push_back({static_cast<std::size_t>(v[0]), {v[1], v[2], v[3], v[4], v[5], v[6]}});
  }
  return out;
}

inline std::string tail_stats_text(const TailPair& s) {
  std::ostringstream os;
  os << kTailStatsTag << '\n';
  append_tail(os, "x", s.x);
  append_tail(os, "dx", s.dx);
  return os.str();
}

// ---- checkpoint ------------------------------------------------------------

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw std::runtime_error("checkpoint: truncated file");
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Layout: magic, config text, variant tag, boundary edges, then named arrays
/// (name, rows, cols, row-major doubles). Integers are u64, all little-endian.
inline std::string checkpoint_bytes(const Model& m) {
  std::string out(kCheckpointMagic);
  out.push_back('\n');
  detail::put_str(out, to_text(m.config));
  detail::put_str(out, to_string(m.config.variant));
  detail::put_u64(out, m.bounds.edges.size());
  for (double e : m.bounds.edges) detail::put_f64(out, e);
  detail::put_u64(out, m.params.size());
  for (const auto& p : m.params.params()) {
    detail::put_str(out, p.name);
    detail::put_u64(out, p.value.rows);
    detail::put_u64(out, p.value.cols);
    for (double v : p.value.data) detail::put_f64(out, v);
  }
  return out;
}

inline Model parse_checkpoint(const std::string& bytes) {
  detail::Reader in(bytes);
  const std::string magic = std::string(kCheckpointMagic) + "\n";
  if (bytes.size() < magic.size() || in.raw(magic.size()) != magic) {
    throw std::runtime_error("checkpoint: bad magic or unsupported version");
  }
  Model m;
  m.config = parse_train_config(in.str());
  const std::string variant = in.str();
  if (parse_variant(variant) != m.config.variant) throw std::runtime_error("checkpoint: variant tag disagrees with config");
  const auto n_edges = in.u64();
  for (std::uint64_t i = 0; i < n_edges; ++i) m.bounds.edges.push_back(in.f64());
  if (m.bounds.states() != m.config.Q) throw std::runtime_error("checkpoint: boundaries do not match Q");
  const auto n_params = in.u64();
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = in.str();
    const auto rows = in.u64();
    const auto cols = in.u64();
    Tensor2 t(rows, cols);
    for (double& v : t.data) v = in.f64();
    m.params.add(std::move(name), std::move(t));
  }
  if (!in.done()) throw std::runtime_error("checkpoint: trailing bytes");
  const ParamStore reference = init_params(m.config);
  if (reference.size() != m.params.size()) throw std::runtime_error("checkpoint: parameter set does not match config");
  for (const auto& p : reference.params()) {
    const auto* q = m.params.find(p.name);
    if (!q || !q->value.same_shape(p.value)) throw std::runtime_error("checkpoint: parameter " + p.name + " mismatched");
  }
  return m;
}

inline void write_checkpoint(const std::string& path, const Model& m) { write_file(path, checkpoint_bytes(m)); }
inline Model read_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

}  // namespace graph2ts::io
