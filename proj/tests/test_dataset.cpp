#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "graph2ts/dataset.hpp"
#include "graph2ts/metrics.hpp"

using namespace graph2ts;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / ("graph2ts_test_" + name);
  std::ofstream(path) << content;
  return path.string();
}

RawSeries series(std::vector<double> v) { return RawSeries{std::move(v), "test"}; }

}  // namespace

TEST(LoadSeries, ReadsValuesInOrder) {
  auto s = load_series(temp_file("three.txt", "1.0\n2.0\n3.0\n"), 0);
  EXPECT_EQ(s.values, (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(LoadSeries, SkipsHeaderRow) {
  auto s = load_series(temp_file("header.txt", "val\n5\n5\n"), 0);
  EXPECT_EQ(s.values, (std::vector<double>{5.0, 5.0}));
}

TEST(LoadSeries, RejectsNanWithRowNumber) {
  const auto path = temp_file("nan.txt", "1\n2\nnan\n4\n");
  try {
    load_series(path, 0);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(LoadSeries, PicksColumnWithAutoDetectedDelimiter) {
  EXPECT_EQ(load_series(temp_file("csv.txt", "a,b\n1,10\n2,20\n"), 1).values, (std::vector<double>{10, 20}));
  EXPECT_EQ(load_series(temp_file("tsv.txt", "1\t10\n2\t20\n"), 1).values, (std::vector<double>{10, 20}));
  EXPECT_EQ(load_series(temp_file("ssv.txt", "1   10\n2 20\n"), 1).values, (std::vector<double>{10, 20}));
}

TEST(LoadSeries, Errors) {
  EXPECT_THROW(load_series("/nonexistent/graph2ts.txt", 0), std::runtime_error);
  EXPECT_THROW(load_series(temp_file("empty.txt", "x\ny\n"), 0), std::runtime_error);
}

TEST(MakeWindows, SlidingAndStrided) {
  auto s = series({1, 2, 3, 4, 5});
  auto w1 = make_windows(s, 3, 1);
  ASSERT_EQ(w1.size(), 3u);
  EXPECT_EQ(w1[0].values, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(w1[2].values, (std::vector<double>{3, 4, 5}));
  auto w2 = make_windows(s, 3, 2);
  ASSERT_EQ(w2.size(), 2u);
  EXPECT_EQ(w2[1].values, (std::vector<double>{3, 4, 5}));
  EXPECT_THROW(make_windows(series({1, 2}), 3, 1), std::invalid_argument);
}

TEST(MakeWindows, NonOverlappingConcatenationReconstructsPrefix) {
  std::vector<double> v(103);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.37 * static_cast<double>(i));
  auto ws = make_windows(series(v), 10, 10);
  std::vector<double> joined;
  for (const auto& w : ws) joined.insert(joined.end(), w.values.begin(), w.values.end());
  ASSERT_EQ(joined.size(), 100u);
  EXPECT_TRUE(std::equal(joined.begin(), joined.end(), v.begin()));
}

TEST(ZScore, TwoPointCase) {
  auto [out, norm] = zscore_fit_apply({TimeSeriesWindow{{0, 2}}});
  EXPECT_EQ(out[0].values, (std::vector<double>{-1, 1}));
  EXPECT_DOUBLE_EQ(norm.mean, 1.0);
  EXPECT_DOUBLE_EQ(norm.std, 1.0);
}

TEST(ZScore, PopulationStdOverPooledValues) {
  auto [out, norm] = zscore_fit_apply({TimeSeriesWindow{{1, 3}}, TimeSeriesWindow{{1, 3}}});
  EXPECT_DOUBLE_EQ(norm.mean, 2.0);
  EXPECT_DOUBLE_EQ(norm.std, 1.0);
  for (const auto& w : out) EXPECT_EQ(w.values, (std::vector<double>{-1, 1}));
}

TEST(ZScore, ZeroVarianceIsAnError) {
  EXPECT_THROW(zscore_fit_apply({TimeSeriesWindow{{5, 5, 5}}}), std::invalid_argument);
}

TEST(ZScore, OutputIsStandardized) {
  auto ws = synth_generate(SynthKind::heavy_tail, 200, 32, 9);
  auto [out, norm] = zscore_fit_apply(ws);
  auto refit = fit_norm(out);
  EXPECT_LE(std::abs(refit.mean), 1e-9);
  EXPECT_LE(std::abs(refit.std - 1.0), 1e-9);
}

TEST(Split, SizesAndDeterminism) {
  WindowSet ws;
  for (int i = 0; i < 10; ++i) ws.push_back({{double(i), double(i * i), double(-i)}});
  auto a = split(ws, 0.2, 1);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.eval.size(), 2u);
  auto b = split(ws, 0.2, 1);
  EXPECT_EQ(a.train_index, b.train_index);
  EXPECT_EQ(a.eval, b.eval);

  auto c = split(ws, 0.99, 1);
  EXPECT_EQ(c.train.size(), 1u);
  EXPECT_EQ(c.eval.size(), 9u);
}

TEST(Split, DisjointAndTrainFitted) {
  auto ws = synth_generate(SynthKind::ar1, 50, 16, 4);
  auto s = split(ws, 0.3, 7);
  std::vector<std::size_t> all = s.train_index;
  all.insert(all.end(), s.eval_index.begin(), s.eval_index.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  auto refit = fit_norm(s.train);
  EXPECT_LE(std::abs(refit.mean), 1e-9);
  EXPECT_LE(std::abs(refit.std - 1.0), 1e-9);
}

TEST(Split, DegenerateSizes) {
  WindowSet one{{{1.0, 2.0}}};
  EXPECT_THROW(split(one, 0.5, 0), std::invalid_argument);
  WindowSet two{{{1.0, 2.0}}, {{3.0, 4.0}}};
  EXPECT_THROW(split(two, 0.0, 0), std::invalid_argument);
}

TEST(Synth, Reproducible) {
  EXPECT_EQ(synth_generate(SynthKind::sine_mix, 1, 32, 42), synth_generate(SynthKind::sine_mix, 1, 32, 42));
  EXPECT_NE(synth_generate(SynthKind::sine_mix, 1, 32, 42), synth_generate(SynthKind::sine_mix, 1, 32, 43));
  EXPECT_THROW(synth_generate(SynthKind::ar1, 0, 32, 1), std::invalid_argument);
  EXPECT_THROW(synth_generate(SynthKind::ar1, 1, 3, 1), std::invalid_argument);
}

TEST(Synth, Ar1PooledLagOneAutocorrelation) {
  auto ws = synth_generate(SynthKind::ar1, 10000, 32, 5);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& w : ws) {
    for (double v : w.values) sum += v;
    n += w.size();
  }
  const double mean = sum / static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (const auto& w : ws) {
    for (std::size_t t = 0; t < w.size(); ++t) {
      den += (w.values[t] - mean) * (w.values[t] - mean);
      if (t + 1 < w.size()) num += (w.values[t] - mean) * (w.values[t + 1] - mean);
    }
  }
  const double rho = num / den;
  EXPECT_GE(rho, 0.85);
  EXPECT_LE(rho, 0.95);
}

TEST(Synth, HeavyTailDifferencesHaveExcessKurtosis) {
  auto ws = synth_generate(SynthKind::heavy_tail, 10000, 32, 6);
  EXPECT_GT(tail_stats(ws).dx.excess_kurtosis, 2.0);
}
