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

// Loss and metrics, reverse-mode gradients of a model, finite-difference
// verification, Adam, plateau/early-stopping schedules and the epoch loop.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sigrnn/errors.hpp"
#include "sigrnn/model.hpp"
#include "sigrnn/numerics.hpp"
#include "sigrnn/params.hpp"

namespace sigrnn {

inline double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw ShapeError("mse_loss: " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(target.size()) + " targets");
  }
  if (pred.empty()) throw ShapeError("mse_loss: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

inline double r2_score(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("r2_score: length mismatch");
  if (target.size() < 2) throw ShapeError("r2_score: needs at least two samples");
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= static_cast<double>(target.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ss_tot += (target[i] - mean) * (target[i] - mean);
    ss_res += (target[i] - pred[i]) * (target[i] - pred[i]);
  }
  if (ss_tot == 0.0) throw DataError("r2_score: target is constant, R^2 is undefined");
  return 1.0 - ss_res / ss_tot;
}

struct LossAndGrads {
  double loss = 0.0;
  Gradients grads;
};

// Mean-squared-error loss of a batch and its exact gradient with respect to
// every parameter block.
inline LossAndGrads backward(const Model& model, const Tensor3& x, std::span<const double> y) {
  Model::Tape tape;
  const Vec pred = model.forward(x, &tape);
  LossAndGrads out{mse_loss(pred, y), model.params().zeros_like()};
  if (!std::isfinite(out.loss)) throw NumericError("backward: loss is not finite");
  Vec d_pred(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) d_pred[i] = scale * (pred[i] - y[i]);
  model.backward(tape, d_pred, out.grads);
  for (const auto& b : out.grads) {
    if (!all_finite(b.value.values())) {
      throw NumericError("backward: non-finite gradient in parameter block '" + b.name + "'");
    }
  }
  return out;
}

// Central differences (L(theta + eps) - L(theta - eps)) / 2 eps for every
// scalar parameter. `params` is perturbed in place and restored.
template <typename LossFn>
Gradients finite_diff_grad(LossFn&& loss_fn, ParamSet& params, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
  Gradients g = params.zeros_like();
  for (std::size_t bi = 0; bi < params.size(); ++bi) {
    auto values = params.value(bi).values();
    auto out = g.value(bi).values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = loss_fn(params);
      values[i] = saved - eps;
      const double down = loss_fn(params);
      values[i] = saved;
      out[i] = (up - down) / (2.0 * eps);
    }
  }
  return g;
}

// Bias-corrected Adam.
inline void adam_step(ParamSet& params, const Gradients& grads, AdamState& state, double lr) {
  if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v)) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t bi = 0; bi < params.size(); ++bi) {
    auto p = params.value(bi).values();
    const auto g = grads.value(bi).values();
    auto m = state.m.value(bi).values();
    auto v = state.v.value(bi).values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient verification

struct BlockError {
  std::string name;
  double max_rel_error = 0.0;
};

// |a - f| / max(|a|, |f|, floor); the floor keeps entries whose true
// gradient is ~0 from dividing finite-difference roundoff by ~0.
inline constexpr double kRelErrorFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

inline std::vector<BlockError> compare_gradients(const Gradients& analytic, const Gradients& numeric) {
  if (!analytic.same_shape(numeric)) throw ShapeError("compare_gradients: shape mismatch");
  std::vector<BlockError> out;
  for (std::size_t bi = 0; bi < analytic.size(); ++bi) {
    BlockError e{analytic[bi].name, 0.0};
    const auto a = analytic.value(bi).values();
    const auto n = numeric.value(bi).values();
    for (std::size_t i = 0; i < a.size(); ++i) e.max_rel_error = std::max(e.max_rel_error, relative_error(a[i], n[i]));
    out.push_back(e);
  }
  return out;
}

// Analytic vs central-difference gradients of the batch MSE of `model`.
inline std::vector<BlockError> gradient_check(Model& model, const Tensor3& x, std::span<const double> y,
                                              double eps = 1e-5,
                                              const std::function<void(Gradients&)>& tamper = {}) {
  LossAndGrads analytic = backward(model, x, y);
  if (tamper) tamper(analytic.grads);
  auto loss_at = [&](const ParamSet&) { return mse_loss(model.predict(x), y); };
  const Gradients numeric = finite_diff_grad(loss_at, model.params(), eps);
  return compare_gradients(analytic.grads, numeric);
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 1000;
  bool early_stopping = true;
  std::size_t early_stop_patience = 10;
  double early_stop_min_delta = 1e-5;
  double lr_init = 1e-3;
  double plateau_factor = 0.25;
  std::size_t plateau_patience = 5;
  double lr_min = 2.5e-5;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("plateau_factor must be in (0, 1)");
    if (!(lr_min <= lr_init)) throw ConfigError("lr_min must not exceed lr_init");
    if (!(lr_init > 0.0)) throw ConfigError("lr_init must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
    if (early_stop_min_delta < 0.0) throw ConfigError("early_stop_min_delta must be >= 0");
  }
};

// Multiplies the learning rate by `factor` after `patience` epochs without a
// validation-loss decrease larger than `min_delta`, never going below
// `lr_min`.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, std::size_t patience, double min_delta, double lr_min)
      : lr_(lr), factor_(factor), patience_(patience), min_delta_(min_delta), lr_min_(lr_min) {}

  double lr() const { return lr_; }

  // Returns the learning rate for the next epoch.
  double update(double val_loss) {
    if (val_loss < best_ - min_delta_) {
      best_ = val_loss;
      wait_ = 0;
      return lr_;
    }
    if (++wait_ >= patience_ && lr_ > lr_min_) {
      lr_ = std::max(lr_ * factor_, lr_min_);
      wait_ = 0;
    }
    return lr_;
  }

 private:
  double lr_, factor_;
  std::size_t patience_;
  double min_delta_, lr_min_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t wait_ = 0;
};

// Patience counts epochs without a decrease larger than `min_delta`; the
// best epoch is the one with the lowest validation loss seen.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  struct Verdict {
    bool new_best = false;
    bool stop = false;
  };

  Verdict update(double val_loss, std::size_t epoch) {
    Verdict v;
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch;
      v.new_best = true;
    }
    if (val_loss < reference_ - min_delta_) {
      reference_ = val_loss;
      wait_ = 0;
    } else {
      ++wait_;
    }
    v.stop = wait_ >= patience_;
    return v;
  }

  double best_loss() const { return best_loss_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double reference_ = std::numeric_limits<double>::infinity();
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t wait_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // learning rate after this epoch's schedule update
  double seconds = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  AdamState adam;
};

inline void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << "epoch,train_loss,val_loss,lr\n" << std::setprecision(17);
  for (const auto& r : history) f << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.lr << "\n";
}

// Rows `indices` of a (windows x T x F) block.
inline Tensor3 gather(const Tensor3& x, std::span<const std::size_t> indices) {
  Tensor3 out(indices.size(), x.time(), x.features());
  const std::size_t block = x.time() * x.features();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(x.values().begin() + indices[i] * block, block, out.values().begin() + i * block);
  }
  return out;
}

inline Vec gather(std::span<const double> y, std::span<const std::size_t> indices) {
  Vec out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = y[indices[i]];
  return out;
}

// Predictions for the listed windows, evaluated in chunks of `chunk`.
inline Vec predict_indices(const Model& model, const Tensor3& x, std::span<const std::size_t> indices,
                           std::size_t chunk = 256) {
  Vec out;
  out.reserve(indices.size());
  for (std::size_t s = 0; s < indices.size(); s += chunk) {
    const auto part = indices.subspan(s, std::min(chunk, indices.size() - s));
    const Vec p = model.predict(gather(x, part));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// Optimizes `model` on the `train` windows, monitoring `val`. On return the
// model holds the weights of the epoch with the lowest validation loss.
inline FitResult fit(Model& model, const Tensor3& x, std::span<const double> y,
                     std::span<const std::size_t> train, std::span<const std::size_t> val,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() < cfg.batch_size) {
    throw DataError("fit: " + std::to_string(train.size()) + " training windows is smaller than one batch of " +
                    std::to_string(cfg.batch_size));
  }
  if (val.empty()) throw DataError("fit: validation split is empty");
  RngStream rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  FitResult result;
  result.adam = AdamState::for_params(model.params());
  PlateauScheduler plateau(cfg.lr_init, cfg.plateau_factor, cfg.plateau_patience, cfg.early_stop_min_delta,
                           cfg.lr_min);
  EarlyStopping stopper(cfg.early_stop_patience, cfg.early_stop_min_delta);
  ParamSet best = model.params();
  const Vec y_val = gather(y, val);
  std::vector<std::size_t> batch_idx;
  double lr = cfg.lr_init;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto order = rng.permutation(train.size());
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - s);
      batch_idx.resize(n);
      for (std::size_t i = 0; i < n; ++i) batch_idx[i] = train[order[s + i]];
      const LossAndGrads lg = backward(model, gather(x, batch_idx), gather(y, batch_idx));
      adam_step(model.params(), lg.grads, result.adam, lr);
      loss_sum += lg.loss * static_cast<double>(n);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = mse_loss(predict_indices(model, x, val), y_val);
    if (!std::isfinite(rec.val_loss)) throw NumericError("fit: validation loss is not finite");
    lr = plateau.update(rec.val_loss);
    rec.lr = lr;
    const auto verdict = stopper.update(rec.val_loss, epoch);
    if (verdict.new_best) best = model.params();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(rec);
    if (cfg.early_stopping && verdict.stop) {
      result.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  model.params() = best;
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_loss();
  return result;
}

}  // namespace sigrnn
