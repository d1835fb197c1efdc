#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "graph2ts/io.hpp"

using namespace graph2ts;

namespace {

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("graph2ts_io_" + name)).string();
}

}  // namespace

TEST(WindowFile, HeaderAndRoundTrip) {
  WindowSet ws = synth_generate(SynthKind::ar1, 5, 6, 3);
  const auto path = tmp("windows.csv");
  io::write_windows(path, ws);
  const auto text = io::read_file(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), "# graph2ts-windows v1 T=6");
  EXPECT_EQ(io::read_windows(path), ws);
}

TEST(WindowFile, RejectsWrongHeaderAndWidth) {
  const auto path = tmp("bad_windows.csv");
  io::write_file(path, "# graph2ts-windows v2 T=2\n1,2\n");
  EXPECT_THROW(io::read_windows(path), std::runtime_error);
  io::write_file(path, "# graph2ts-windows v1 T=3\n1,2\n");
  EXPECT_THROW(io::read_windows(path), std::runtime_error);
  io::write_file(path, "# graph2ts-graphs v1 Q=2\n1,0,0,1\n");
  EXPECT_THROW(io::read_windows(path), std::runtime_error);
}

TEST(GraphFile, RoundTripAndBounds) {
  std::vector<std::vector<double>> graphs{flatten(identity_graph(3)), std::vector<double>(9, 1.0 / 3.0)};
  const auto path = tmp("graphs.csv");
  io::write_graphs(path, graphs, 3);
  std::size_t Q = 0;
  EXPECT_EQ(io::read_graphs(path, &Q), graphs);
  EXPECT_EQ(Q, 3u);
  EXPECT_EQ(io::read_file(path).substr(0, 25), "# graph2ts-graphs v1 Q=3\n");

  QuantileBoundaries b{{-1.5, 0.1, 0.2, 7.0}, 0};
  io::write_bounds(tmp("bounds.csv"), b);
  EXPECT_EQ(io::read_bounds(tmp("bounds.csv")).edges, b.edges);
  io::write_file(tmp("bounds_bad.csv"), "# graph2ts-bounds v1 Q=2\n0,0,1\n");
  EXPECT_THROW(io::read_bounds(tmp("bounds_bad.csv")), std::runtime_error);
}

TEST(LossLog, Format) {
  std::vector<EpochLog> log{{1, {0.5, 1.0, 0.25, 2.0, 0.0, 6.75}}, {2, {0.25, 0.5, 0.125, 1.0, 0.001, 3.376}}};
  const auto text = io::loss_log_text(log);
  EXPECT_EQ(text.substr(0, text.find('\n', text.find('\n') + 1)),
            "# graph2ts-losslog v1\nepoch,align,recon,dist,kl,beta,total");
  EXPECT_NE(text.find("\n1,0.5,1,0.25,2,0,6.75\n"), std::string::npos);
  auto parsed = io::parse_loss_log(text);
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[1].loss.total, 3.376);
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  TrainConfig c;
  c.T = 8;
  c.Q = 3;
  c.embed_dim = 5;
  c.hidden_dim = 4;
  c.latent_dim = 2;
  c.seed = 77;
  c.variant = Variant::full;
  Model m{c, QuantileBoundaries{{-2.0, -0.5, 0.5, 2.0}, 0}, init_params(c)};
  const auto bytes = io::checkpoint_bytes(m);
  EXPECT_EQ(bytes.substr(0, 13), "g2ts-ckpt v1\n");
  Model back = io::parse_checkpoint(bytes);
  EXPECT_EQ(back.config, c);
  EXPECT_EQ(back.bounds.edges, m.bounds.edges);
  ASSERT_EQ(back.params.size(), m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    EXPECT_EQ(back.params.params()[i].name, m.params.params()[i].name);
    EXPECT_EQ(back.params.params()[i].value, m.params.params()[i].value);
  }
  EXPECT_EQ(io::checkpoint_bytes(back), bytes);
}

TEST(Checkpoint, LittleEndianLayout) {
  std::string out;
  io::detail::put_f64(out, 1.0);  // 0x3FF0000000000000
  EXPECT_EQ(out, std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8));
  std::string n;
  io::detail::put_u64(n, 0x0102);
  EXPECT_EQ(n, std::string("\x02\x01\x00\x00\x00\x00\x00\x00", 8));
}

TEST(Checkpoint, RejectsCorruptInput) {
  TrainConfig c;
  c.T = 8;
  c.Q = 2;
  c.embed_dim = 3;
  c.hidden_dim = 3;
  c.latent_dim = 2;
  Model m{c, QuantileBoundaries{{0.0, 1.0, 2.0}, 0}, init_params(c)};
  const auto bytes = io::checkpoint_bytes(m);
  EXPECT_THROW(io::parse_checkpoint("g2ts-ckpt v2\n" + bytes.substr(13)), std::runtime_error);
  EXPECT_THROW(io::parse_checkpoint(bytes.substr(0, bytes.size() - 3)), std::runtime_error);
  EXPECT_THROW(io::parse_checkpoint(bytes + "x"), std::runtime_error);

  Model wrong = m;
  wrong.config.variant = Variant::deterministic;  // params still shaped for the stochastic decoder
  EXPECT_THROW(io::parse_checkpoint(io::checkpoint_bytes(wrong)), std::runtime_error);
}
