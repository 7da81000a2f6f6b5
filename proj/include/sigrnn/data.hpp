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

// Time-series ingestion and preprocessing: CSV frames, moving-median and
// train-fitted scaling, absolute returns, sliding windows with chronological
// splits, and seeded synthetic series.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sigrnn/errors.hpp"
#include "sigrnn/numerics.hpp"

namespace sigrnn {

struct SeriesFrame {
  std::vector<std::int64_t> timestamps;
  std::vector<std::string> names;
  std::vector<Vec> columns;

  std::size_t rows() const { return timestamps.size(); }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw DataError("no column named '" + name + "'");
  }

  void validate() const {
    if (names.size() != columns.size()) throw DataError("frame: column names and data disagree");
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].size() != timestamps.size()) {
        throw DataError("frame: column '" + names[c] + "' has " + std::to_string(columns[c].size()) +
                        " rows, expected " + std::to_string(timestamps.size()));
      }
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
      if (timestamps[i] <= timestamps[i - 1]) {
        throw DataError("frame: timestamps not strictly increasing at row " + std::to_string(i + 1));
      }
    }
  }
};

enum class MissingPolicy { reject, forward_fill };

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA" || cell == "null";
}

}  // namespace detail

// Header row mandatory; first column `timestamp` (integer epoch seconds),
// remaining columns are named numeric series with '.' decimals.
inline SeriesFrame parse_csv(std::istream& in, MissingPolicy missing = MissingPolicy::reject) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty input, header row required");
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  if (header.empty() || header.front() != "timestamp") {
    throw DataError("csv: first header column must be 'timestamp'");
  }
  if (header.size() < 2) throw DataError("csv: no series columns");
  SeriesFrame f;
  f.names.assign(header.begin() + 1, header.end());
  f.columns.assign(f.names.size(), {});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(cells.size()));
    }
    try {
      std::size_t pos = 0;
      const std::string ts = detail::trim(cells[0]);
      const long long v = std::stoll(ts, &pos);
      if (pos != ts.size()) throw std::invalid_argument(ts);
      f.timestamps.push_back(v);
    } catch (const std::exception&) {
      throw DataError("csv line " + std::to_string(line_no) + ": bad timestamp '" + cells[0] + "'");
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const std::string cell = detail::trim(cells[c]);
      auto& col = f.columns[c - 1];
      if (detail::is_missing(cell)) {
        if (missing == MissingPolicy::forward_fill && !col.empty()) {
          col.push_back(col.back());
          continue;
        }
        throw DataError("csv line " + std::to_string(line_no) + ": missing value in column '" + header[c] + "'");
      }
      double v = 0.0;
      try {
        std::size_t pos = 0;
        v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError("csv line " + std::to_string(line_no) + ": bad number '" + cell + "' in column '" +
                        header[c] + "'");
      }
      if (!std::isfinite(v)) {
        throw DataError("csv line " + std::to_string(line_no) + ": non-finite value in column '" + header[c] + "'");
      }
      col.push_back(v);
    }
  }
  f.validate();
  return f;
}

inline SeriesFrame read_csv(const std::string& path, MissingPolicy missing = MissingPolicy::reject) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, missing);
}

inline void write_csv(std::ostream& out, const SeriesFrame& f) {
  out << "timestamp";
  for (const auto& n : f.names) out << "," << n;
  out << "\n" << std::setprecision(17);
  for (std::size_t r = 0; r < f.rows(); ++r) {
    out << f.timestamps[r];
    for (const auto& c : f.columns) out << "," << c[r];
    out << "\n";
  }
}

inline void write_csv(const std::string& path, const SeriesFrame& f) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_csv(out, f);
}

// ---------------------------------------------------------------------------
// Scaling

// Which trailing window the moving median at (1-based) index t uses:
// exclusive = x_{t-h-W} .. x_{t-h-1}, inclusive = x_{t-h-W+1} .. x_{t-h}.
enum class MedianAlignment { exclusive, inclusive };

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lower + upper);
}

// x_t divided by the median of a trailing window of W samples that ends h
// samples back. The first W + h samples are dropped.
inline Vec moving_median_scale(std::span<const double> x, std::size_t window, std::size_t horizon,
                               MedianAlignment align = MedianAlignment::exclusive) {
  if (window < 1) throw ConfigError("moving_median_scale: window must be >= 1");
  if (horizon < 1) throw ConfigError("moving_median_scale: horizon must be >= 1");
  if (x.size() <= window + horizon) {
    throw DataError("moving_median_scale: series of " + std::to_string(x.size()) + " samples needs more than " +
                    std::to_string(window + horizon));
  }
  const std::size_t end_lag = align == MedianAlignment::exclusive ? horizon + 1 : horizon;
  Vec out;
  out.reserve(x.size() - window - horizon);
  std::vector<double> buf(window);
  for (std::size_t t = window + horizon; t < x.size(); ++t) {  // 0-based
    const std::size_t last = t - end_lag;
    std::copy(x.begin() + (last + 1 - window), x.begin() + last + 1, buf.begin());
    const double med = median_of(buf);
    if (med == 0.0) {
      throw DataError("moving_median_scale: zero median at index " + std::to_string(t + 1));
    }
    out.push_back(x[t] / med);
  }
  return out;
}

struct MinMaxScaler {
  double min = 0.0;
  double max = 1.0;

  static MinMaxScaler fit(std::span<const double> train) {
    if (train.empty()) throw DataError("minmax: empty training segment");
    const auto [lo, hi] = std::minmax_element(train.begin(), train.end());
    if (!(*hi > *lo)) throw DataError("minmax: degenerate training range (max == min)");
    return {*lo, *hi};
  }
  double apply(double v) const { return (v - min) / (max - min); }
  double invert(double v) const { return v * (max - min) + min; }
};

inline Vec minmax_scale(std::span<const double> train, std::span<const double> full) {
  const auto s = MinMaxScaler::fit(train);
  Vec out(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) out[i] = s.apply(full[i]);
  return out;
}

inline Vec inverse_minmax(std::span<const double> train, std::span<const double> scaled) {
  const auto s = MinMaxScaler::fit(train);
  Vec out(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) out[i] = s.invert(scaled[i]);
  return out;
}

inline Vec max_scale(std::span<const double> train, std::span<const double> full) {
  if (train.empty()) throw DataError("max_scale: empty training segment");
  const double m = *std::max_element(train.begin(), train.end());
  if (!(m > 0.0)) throw DataError("max_scale: training maximum must be positive");
  Vec out(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (full[i] < 0.0) throw DataError("max_scale: negative value at index " + std::to_string(i));
    out[i] = full[i] / m;
  }
  return out;
}

enum class ReturnKind { simple, log };

// |p_t / p_{t-1} - 1| (or |log(p_t / p_{t-1})|), one shorter than `prices`.
inline Vec abs_returns(std::span<const double> prices, ReturnKind kind = ReturnKind::simple) {
  if (prices.size() < 2) throw DataError("abs_returns: needs at least two prices");
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!(prices[i] > 0.0)) throw DataError("abs_returns: non-positive price at index " + std::to_string(i));
  }
  Vec out(prices.size() - 1);
  for (std::size_t t = 1; t < prices.size(); ++t) {
    const double ratio = prices[t] / prices[t - 1];
    out[t - 1] = kind == ReturnKind::simple ? std::abs(ratio - 1.0) : std::abs(std::log(ratio));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windowing

enum class Task {
  volume,       // moving-median scaling then train min-max
  abs_returns,  // absolute returns then train max scaling
  minmax,       // train min-max only (synthetic series)
};

inline const char* to_string(Task t) {
  switch (t) {
    case Task::volume: return "volume";
    case Task::abs_returns: return "abs_returns";
    case Task::minmax: return "minmax";
  }
  return "?";
}

inline Task task_from_string(const std::string& s) {
  if (s == "volume") return Task::volume;
  if (s == "abs_returns") return Task::abs_returns;
  if (s == "minmax") return Task::minmax;
  throw ConfigError("unknown task '" + s + "' (valid: volume, abs_returns, minmax)");
}

struct PreprocessSpec {
  Task task = Task::volume;
  std::size_t median_window = 336;  // two weeks of hourly samples
  std::size_t horizon = 1;
  std::string target_column;
  double val_fraction = 0.2;   // of the non-test windows
  double test_fraction = 0.2;  // of all windows, trailing
  MedianAlignment alignment = MedianAlignment::exclusive;
  ReturnKind returns = ReturnKind::simple;

  void validate() const {
    if (median_window < 1) throw ConfigError("median_window must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in [0, 1)");
  }
};

inline std::size_t sequence_length(std::size_t horizon) { return std::max<std::size_t>(45, 5 * horizon); }

inline std::size_t window_count(std::size_t rows, std::size_t seq_len, std::size_t horizon) {
  return rows >= seq_len + horizon ? rows - seq_len - horizon + 1 : 0;
}

struct WindowedDataset {
  Tensor3 x;  // windows x T x F
  Vec y;
  std::size_t seq_len = 0;
  std::size_t horizon = 0;
  std::vector<std::string> features;
  std::size_t target_feature = 0;
  // Window b reads transformed rows [b, b + T - 1] and targets row
  // b + T - 1 + h; transformed row r comes from raw rows <= r + raw_offset.
  std::size_t raw_offset = 0;
  // Transformed rows [0, scaler_rows) were used to fit the scalers.
  std::size_t scaler_rows = 0;
  std::vector<std::size_t> train, val, test;

  std::size_t windows() const { return y.size(); }
  std::size_t input_end_row(std::size_t b) const { return b + seq_len - 1; }
  std::size_t target_row(std::size_t b) const { return b + seq_len - 1 + horizon; }

  // Last raw row that window b's inputs, target or the fitted scalers read.
  std::size_t last_raw_read(std::size_t b) const {
    return std::max(target_row(b), scaler_rows - 1) + raw_offset;
  }

  const std::vector<std::size_t>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ConfigError("unknown split '" + name + "' (valid: train, val, test)");
  }
};

inline WindowedDataset window_sequences(const SeriesFrame& frame, const PreprocessSpec& spec) {
  spec.validate();
  frame.validate();
  const std::size_t target_col =
      spec.target_column.empty() ? 0 : frame.column_index(spec.target_column);
  const std::size_t features = frame.columns.size();

  std::vector<Vec> cols(features);
  std::size_t raw_offset = 0;
  for (std::size_t c = 0; c < features; ++c) {
    switch (spec.task) {
      case Task::volume:
        cols[c] = moving_median_scale(frame.columns[c], spec.median_window, spec.horizon, spec.alignment);
        raw_offset = spec.median_window + spec.horizon;
        break;
      case Task::abs_returns:
        cols[c] = abs_returns(frame.columns[c], spec.returns);
        raw_offset = 1;
        break;
      case Task::minmax:
        cols[c] = frame.columns[c];
        break;
    }
  }
  const std::size_t rows = cols.front().size();
  const std::size_t seq_len = sequence_length(spec.horizon);
  const std::size_t n = window_count(rows, seq_len, spec.horizon);
  const std::size_t n_test = static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(n)));
  const std::size_t n_fit = n - n_test;
  const std::size_t n_val = static_cast<std::size_t>(std::floor(spec.val_fraction * static_cast<double>(n_fit)));
  const std::size_t n_train = n_fit - n_val;
  if (n_train < 1 || n_val < 1 || (spec.test_fraction > 0.0 && n_test < 1)) {
    // Smallest usable row count giving every split at least one window.
    std::size_t need = n + 1;
    while (true) {
      const std::size_t t = static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(need)));
      const std::size_t f = need - t;
      const std::size_t v = static_cast<std::size_t>(std::floor(spec.val_fraction * static_cast<double>(f)));
      if (f - v >= 1 && v >= 1 && (spec.test_fraction == 0.0 || t >= 1)) break;
      ++need;
    }
    throw DataError("window_sequences: " + std::to_string(frame.rows()) + " rows give " + std::to_string(n) +
                    " windows of length " + std::to_string(seq_len) + "; at least " +
                    std::to_string(need + seq_len + spec.horizon - 1 + raw_offset) + " rows are required");
  }

  WindowedDataset ds;
  ds.seq_len = seq_len;
  ds.horizon = spec.horizon;
  ds.features = frame.names;
  ds.target_feature = target_col;
  ds.raw_offset = raw_offset;
  ds.scaler_rows = n_train - 1 + seq_len + spec.horizon;
  for (std::size_t c = 0; c < features; ++c) {
    const std::span<const double> fit_rows(cols[c].data(), ds.scaler_rows);
    cols[c] = spec.task == Task::abs_returns ? max_scale(fit_rows, cols[c]) : minmax_scale(fit_rows, cols[c]);
  }
  ds.x = Tensor3(n, seq_len, features);
  ds.y.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t t = 0; t < seq_len; ++t) {
      auto row = ds.x.row(b, t);
      for (std::size_t c = 0; c < features; ++c) row[c] = cols[c][b + t];
    }
    ds.y[b] = cols[target_col][ds.target_row(b)];
  }
  for (std::size_t b = 0; b < n; ++b) {
    (b < n_train ? ds.train : b < n_fit ? ds.val : ds.test).push_back(b);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic series

enum class SynthKind { ar1, levy_area, lagged_mean };

inline SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "ar1") return SynthKind::ar1;
  if (s == "levy_area") return SynthKind::levy_area;
  if (s == "lagged_mean") return SynthKind::lagged_mean;
  throw ConfigError("unknown synthetic series '" + s + "' (valid: ar1, levy_area, lagged_mean)");
}

inline const char* to_string(SynthKind k) {
  switch (k) {
    case SynthKind::ar1: return "ar1";
    case SynthKind::levy_area: return "levy_area";
    case SynthKind::lagged_mean: return "lagged_mean";
  }
  return "?";
}

struct SynthOptions {
  // ar1: x_t^i = phi x_{t-1}^i + (phi / 4) x_{t-1}^{(i+1) mod 3} + e_t^i.
  double ar_coefficient = 0.7;
  // levy_area: walk p_t = reversion * p_{t-1} + 0.1 e_t; target_t is the
  // Levy area of p_{t-area_window} .. p_{t-1}.
  double levy_reversion = 0.95;
  std::size_t area_window = 20;
  // lagged_mean: target_t = mean(x1_{t-lag_window} .. x1_{t-1}), with
  // x1 an AR(1) of coefficient 0.9 and x2 white noise.
  std::size_t lag_window = 10;
};

// Signed area between a planar path (T x 2) and its chord,
// (S^{12} - S^{21}) / 2 of its signature.
inline double levy_area(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("levy_area: coordinate lengths differ");
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    area += (xs[k] - xs[0]) * (ys[k + 1] - ys[k]) - (ys[k] - ys[0]) * (xs[k + 1] - xs[k]);
  }
  return 0.5 * area;
}

inline SeriesFrame synth_generate(SynthKind kind, std::size_t n, std::uint64_t seed,
                                  const SynthOptions& opt = {}) {
  if (n < 200) throw ConfigError("synth_generate: n must be >= 200");
  RngStream rng(seed);
  SeriesFrame f;
  constexpr std::int64_t kStart = 1577836800;  // 2020-01-01T00:00:00Z, hourly
  for (std::size_t i = 0; i < n; ++i) f.timestamps.push_back(kStart + 3600 * static_cast<std::int64_t>(i));
  switch (kind) {
    case SynthKind::ar1: {
      const double phi = opt.ar_coefficient;
      f.names = {"target", "x1", "x2"};
      f.columns.assign(3, Vec(n, 0.0));
      double prev[3] = {0.0, 0.0, 0.0};
      for (std::size_t t = 0; t < n; ++t) {
        double cur[3];
        for (int i = 0; i < 3; ++i) cur[i] = phi * prev[i] + 0.25 * phi * prev[(i + 1) % 3] + rng.normal();
        for (int i = 0; i < 3; ++i) {
          f.columns[i][t] = cur[i];
          prev[i] = cur[i];
        }
      }
      break;
    }
    case SynthKind::levy_area: {
      f.names = {"target", "x", "y"};
      f.columns.assign(3, Vec(n, 0.0));
      Vec& px = f.columns[1];
      Vec& py = f.columns[2];
      for (std::size_t t = 0; t < n; ++t) {
        const double ex = rng.normal(), ey = rng.normal();
        px[t] = (t ? opt.levy_reversion * px[t - 1] : 0.0) + 0.1 * ex;
        py[t] = (t ? opt.levy_reversion * py[t - 1] : 0.0) + 0.1 * ey;
      }
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t first = t > opt.area_window ? t - opt.area_window : 0;
        f.columns[0][t] = t >= 2 ? levy_area(std::span(px).subspan(first, t - first),
                                             std::span(py).subspan(first, t - first))
                                 : 0.0;
      }
      break;
    }
    case SynthKind::lagged_mean: {
      f.names = {"target", "x1", "x2"};
      f.columns.assign(3, Vec(n, 0.0));
      Vec& x1 = f.columns[1];
      for (std::size_t t = 0; t < n; ++t) {
        x1[t] = (t ? 0.9 * x1[t - 1] : 0.0) + rng.normal();
        f.columns[2][t] = rng.normal();
      }
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t first = t > opt.lag_window ? t - opt.lag_window : 0;
        double acc = 0.0;
        for (std::size_t s = first; s < t; ++s) acc += x1[s];
        f.columns[0][t] = t > first ? acc / static_cast<double>(t - first) : 0.0;
      }
      break;
    }
  }
  return f;
}

}  // namespace sigrnn
