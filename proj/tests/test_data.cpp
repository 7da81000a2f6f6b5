/* Copyright 2026 The sigrnn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "sigrnn/data.hpp"
#include "sigrnn/signature.hpp"
#include "test_util.hpp"

namespace sigrnn {
namespace {

Vec iota(std::size_t n, double start = 1.0) {
  Vec v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + static_cast<double>(i);
  return v;
}

TEST(MovingMedian, HandExample) {
  const Vec x = iota(10);
  const Vec out = moving_median_scale(x, 2, 1);
  ASSERT_EQ(out.size(), 7u);
  EXPECT_DOUBLE_EQ(out[0], 4.0 / 1.5);  // t = 4 reads x1, x2
  EXPECT_DOUBLE_EQ(out[6], 10.0 / 7.5);
  const Vec inc = moving_median_scale(x, 2, 1, MedianAlignment::inclusive);
  EXPECT_DOUBLE_EQ(inc[0], 4.0 / 2.5);
}

TEST(MovingMedian, ConstantSeriesIsOne) {
  for (double v : moving_median_scale(Vec(50, 3.5), 7, 2)) EXPECT_EQ(v, 1.0);
}

TEST(MovingMedian, EvenAndOddWindows) {
  EXPECT_EQ(median_of({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median_of({5, 1, 3}), 3.0);
  EXPECT_EQ(median_of({7}), 7.0);
}

TEST(MovingMedian, Errors) {
  EXPECT_THROW(moving_median_scale(iota(3), 2, 1), DataError);
  Vec z(20, 0.0);
  try {
    moving_median_scale(z, 3, 1);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("index 5"), std::string::npos) << e.what();
  }
}

TEST(MovingMedian, NeverReadsAheadOfTheShift) {
  RngStream rng(1);
  for (const auto align : {MedianAlignment::exclusive, MedianAlignment::inclusive}) {
    for (std::size_t h : {1u, 3u}) {
      const std::size_t w = 5;
      Vec x(60);
      for (double& v : x) v = rng.uniform(1.0, 2.0);
      const Vec base = moving_median_scale(x, w, h, align);
      for (std::size_t k = 0; k < base.size(); ++k) {
        const std::size_t t = k + w + h;  // 0-based raw index of output k
        Vec y = x;
        for (std::size_t s = t - h + 1; s < y.size(); ++s) {
          if (s != t) y[s] *= 3.0;
        }
        EXPECT_EQ(moving_median_scale(y, w, h, align)[k], base[k]);
      }
    }
  }
}

TEST(Scalers, MinMax) {
  const Vec train{2, 10, 4};
  const Vec out = minmax_scale(train, Vec{6, 2, 10, 12});
  EXPECT_EQ(out, (Vec{0.5, 0.0, 1.0, 1.25}));
  EXPECT_THROW(minmax_scale(Vec{3, 3}, Vec{1}), DataError);
  RngStream rng(2);
  Vec x(100);
  for (double& v : x) v = rng.uniform(-50, 50);
  const Vec back = inverse_minmax(std::span(x).first(40), minmax_scale(std::span(x).first(40), x));
  EXPECT_LT(testing::max_abs_diff(back, x), 1e-12);
}

TEST(Scalers, Max) {
  EXPECT_EQ(max_scale(Vec{1, 4}, Vec{4, 0, 8}), (Vec{1.0, 0.0, 2.0}));
  EXPECT_THROW(max_scale(Vec{0, 0}, Vec{0}), DataError);
  EXPECT_THROW(max_scale(Vec{1}, Vec{-1}), DataError);
}

TEST(AbsReturns, Examples) {
  EXPECT_EQ(abs_returns(Vec{5, 5, 5}), (Vec{0, 0}));
  EXPECT_NEAR(abs_returns(Vec{100, 110})[0], 0.1, 1e-15);
  EXPECT_NEAR(abs_returns(Vec{100, 90})[0], 0.1, 1e-15);
  EXPECT_NEAR(abs_returns(Vec{100, 110}, ReturnKind::log)[0], std::log(1.1), 1e-15);
  EXPECT_THROW(abs_returns(Vec{1, 0}), DataError);
  EXPECT_THROW(abs_returns(Vec{1}), DataError);
}

TEST(Windowing, SequenceLength) {
  EXPECT_EQ(sequence_length(1), 45u);
  EXPECT_EQ(sequence_length(9), 45u);
  EXPECT_EQ(sequence_length(15), 75u);
  EXPECT_EQ(window_count(100, 45, 1), 55u);
  EXPECT_EQ(window_count(45, 45, 1), 0u);
}

SeriesFrame ramp_frame(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  RngStream rng(seed);
  SeriesFrame f;
  for (std::size_t i = 0; i < rows; ++i) f.timestamps.push_back(static_cast<std::int64_t>(1000 + 3600 * i));
  for (std::size_t c = 0; c < cols; ++c) {
    f.names.push_back("s" + std::to_string(c));
    Vec v(rows);
    for (double& x : v) x = rng.uniform(1.0, 3.0);
    f.columns.push_back(v);
  }
  return f;
}

TEST(Windowing, HundredRowsGiveFiftyFiveWindows) {
  PreprocessSpec spec;
  spec.task = Task::minmax;
  const auto ds = window_sequences(ramp_frame(100, 2, 1), spec);
  EXPECT_EQ(ds.windows(), 55u);
  EXPECT_EQ(ds.seq_len, 45u);
  EXPECT_EQ(ds.test.size(), 11u);
  EXPECT_EQ(ds.val.size(), 8u);
  EXPECT_EQ(ds.train.size(), 36u);
}

TEST(Windowing, SplitsAndIndicesForManyShapes) {
  for (const Task task : {Task::volume, Task::abs_returns, Task::minmax}) {
    for (std::size_t h : {1u, 3u, 9u, 15u}) {
      for (std::size_t rows : {260u, 333u}) {
        PreprocessSpec spec;
        spec.task = task;
        spec.horizon = h;
        spec.median_window = 12;
        spec.target_column = "s1";
        const SeriesFrame f = ramp_frame(rows, 3, rows + h);
        const auto ds = window_sequences(f, spec);
        const std::size_t usable = rows - ds.raw_offset;
        EXPECT_EQ(ds.windows(), usable - ds.seq_len - h + 1);
        EXPECT_EQ(ds.train.size() + ds.val.size() + ds.test.size(), ds.windows());
        EXPECT_EQ(ds.test.size(), static_cast<std::size_t>(std::floor(0.2 * ds.windows())));
        std::size_t expect = 0;
        for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
          for (std::size_t b : *split) EXPECT_EQ(b, expect++);
        }
        for (std::size_t b = 0; b < ds.windows(); ++b) {
          EXPECT_GT(ds.target_row(b), ds.input_end_row(b));
          EXPECT_EQ(ds.target_row(b), ds.input_end_row(b) + h);
        }
        EXPECT_EQ(ds.target_feature, 1u);
      }
    }
  }
}

TEST(Windowing, TargetIsTheScaledTargetColumn) {
  PreprocessSpec spec;
  spec.task = Task::minmax;
  spec.horizon = 2;
  spec.target_column = "s0";
  const SeriesFrame f = ramp_frame(120, 2, 3);
  const auto ds = window_sequences(f, spec);
  const Vec scaled = minmax_scale(std::span(f.columns[0]).first(ds.scaler_rows), f.columns[0]);
  for (std::size_t b = 0; b < ds.windows(); ++b) {
    EXPECT_EQ(ds.y[b], scaled[b + 45 - 1 + 2]);
    EXPECT_EQ(ds.x(b, 0, 0), scaled[b]);
  }
  // The scalers see the training windows' rows only.
  EXPECT_EQ(ds.scaler_rows, ds.train.size() - 1 + 45 + 2);
}

TEST(Windowing, NoLookAhead) {
  for (const Task task : {Task::volume, Task::abs_returns, Task::minmax}) {
    PreprocessSpec spec;
    spec.task = task;
    spec.horizon = 2;
    spec.median_window = 10;
    const SeriesFrame f = ramp_frame(200, 2, 4);
    const auto ds = window_sequences(f, spec);
    for (std::size_t b = 0; b < ds.windows(); b += 7) {
      const std::size_t last = ds.last_raw_read(b);
      if (last + 1 >= f.rows()) continue;
      SeriesFrame g = f;
      for (auto& col : g.columns)
        for (std::size_t r = last + 1; r < g.rows(); ++r) col[r] *= 5.0;
      const auto other = window_sequences(g, spec);
      EXPECT_EQ(other.y[b], ds.y[b]) << to_string(task) << " window " << b;
      for (std::size_t t = 0; t < ds.seq_len; ++t)
        for (std::size_t c = 0; c < 2; ++c) ASSERT_EQ(other.x(b, t, c), ds.x(b, t, c));
    }
  }
}

TEST(Windowing, TooFewRowsStatesTheMinimum) {
  PreprocessSpec spec;
  spec.task = Task::minmax;
  try {
    window_sequences(ramp_frame(50, 1, 1), spec);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    const auto at = msg.find("at least ");
    ASSERT_NE(at, std::string::npos) << msg;
    const std::size_t need = std::stoul(msg.substr(at + 9));
    EXPECT_NO_THROW(window_sequences(ramp_frame(need, 1, 1), spec));
    EXPECT_THROW(window_sequences(ramp_frame(need - 1, 1, 1), spec), DataError);
  }
}

TEST(Csv, RoundTripAndErrors) {
  const SeriesFrame f = ramp_frame(5, 2, 9);
  std::stringstream ss;
  write_csv(ss, f);
  const SeriesFrame g = parse_csv(ss);
  EXPECT_EQ(g.timestamps, f.timestamps);
  EXPECT_EQ(g.names, f.names);
  EXPECT_EQ(g.columns, f.columns);

  std::istringstream missing("timestamp,a,b\n1,1.0,2.0\n2,,3.0\n3,4.0,5.0\n");
  EXPECT_THROW(parse_csv(missing), DataError);
  std::istringstream missing2("timestamp,a,b\n1,1.0,2.0\n2,,3.0\n3,4.0,5.0\n");
  const SeriesFrame filled = parse_csv(missing2, MissingPolicy::forward_fill);
  EXPECT_EQ(filled.columns[0], (Vec{1.0, 1.0, 4.0}));

  std::istringstream leading("timestamp,a\n1,\n2,3\n");
  EXPECT_THROW(parse_csv(leading, MissingPolicy::forward_fill), DataError);
  std::istringstream unordered("timestamp,a\n2,1\n1,3\n");
  EXPECT_THROW(parse_csv(unordered), DataError);
  std::istringstream no_header("time,a\n1,2\n");
  EXPECT_THROW(parse_csv(no_header), DataError);
  std::istringstream ragged("timestamp,a\n1,2,3\n");
  EXPECT_THROW(parse_csv(ragged), DataError);
  std::istringstream junk("timestamp,a\n1,2x\n");
  EXPECT_THROW(parse_csv(junk), DataError);
}

TEST(Synth, DeterministicPerSeed) {
  for (const SynthKind k : {SynthKind::ar1, SynthKind::levy_area, SynthKind::lagged_mean}) {
    const auto a = synth_generate(k, 300, 7);
    const auto b = synth_generate(k, 300, 7);
    const auto c = synth_generate(k, 300, 8);
    EXPECT_EQ(a.columns, b.columns);
    EXPECT_NE(a.columns, c.columns);
    EXPECT_EQ(a.names.front(), "target");
    EXPECT_NO_THROW(a.validate());
  }
  EXPECT_THROW(synth_generate(SynthKind::ar1, 199, 1), ConfigError);
}

TEST(Synth, LevyAreaOfTheLPath) {
  EXPECT_DOUBLE_EQ(levy_area(Vec{0, 1, 1}, Vec{0, 0, 1}), 0.5);
  Matrix path(3, 2, Vec{0, 0, 1, 0, 1, 1});
  const auto sig = oracle_signature(path, SigSpec(2, 2), 1, OracleRule::polynomial);
  const auto l2 = sig.level(2);
  EXPECT_NEAR(0.5 * (l2[1] - l2[2]), 0.5, 1e-15);
}

TEST(Synth, LevyTargetMatchesTheSignatureOfItsWindow) {
  SynthOptions opt;
  const auto f = synth_generate(SynthKind::levy_area, 240, 3, opt);
  for (std::size_t t : {30u, 100u, 239u}) {
    Matrix path(opt.area_window, 2);
    for (std::size_t k = 0; k < opt.area_window; ++k) {
      path(k, 0) = f.columns[1][t - opt.area_window + k];
      path(k, 1) = f.columns[2][t - opt.area_window + k];
    }
    const auto l2 = oracle_signature(path, SigSpec(2, 2), 1, OracleRule::polynomial).level(2);
    EXPECT_NEAR(f.columns[0][t], 0.5 * (l2[1] - l2[2]), 1e-12);
  }
}

TEST(Synth, LaggedMeanTarget) {
  const auto f = synth_generate(SynthKind::lagged_mean, 200, 5);
  double acc = 0.0;
  for (std::size_t s = 40; s < 50; ++s) acc += f.columns[1][s];
  EXPECT_NEAR(f.columns[0][50], acc / 10.0, 1e-14);
}

TEST(Synth, ZeroCoefficientIsWhiteNoise) {
  SynthOptions opt;
  opt.ar_coefficient = 0.0;
  const std::size_t n = 5000;
  const auto f = synth_generate(SynthKind::ar1, n, 11, opt);
  for (const Vec& x : f.columns) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      den += (x[t] - mean) * (x[t] - mean);
      if (t) num += (x[t] - mean) * (x[t - 1] - mean);
    }
    EXPECT_LT(std::abs(num / den), 3.0 / std::sqrt(static_cast<double>(n)));
  }
  // With the default coefficient the lag-1 autocorrelation is clearly positive.
  const auto g = synth_generate(SynthKind::ar1, n, 11);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 1; t < n; ++t) num += g.columns[0][t] * g.columns[0][t - 1];
  for (std::size_t t = 0; t < n; ++t) den += g.columns[0][t] * g.columns[0][t];
  EXPECT_GT(num / den, 0.5);
}

}  // namespace
}  // namespace sigrnn
